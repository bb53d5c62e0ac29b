"""Protected 64-dim feature extractor trained with softmax + secure-center loss.

The secure-center term is a quintuple hinge: for each anchor it pushes three
negative kinds (impostor, cross-application, stolen-token) farther from
every non-anchor class center than the anchor sits from its own center,
plus a margin.  Gradients are exact analytic expressions, verified against
central finite differences in the test suite.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .colorize import ColorVein
from .imaging import FeatureVector, quantize_template
from .nnet import (Adam, AvgPool2d, Conv2d, Dense, Flatten, L2NormScale,
                   ScaledTanh, Sequential, Softplus, Tanh)

EMBED_DIM = 64
DEFAULT_LAMBDAS = (1.0, 0.001, 0.001)
DEFAULT_MARGIN = 0.5
CHECKPOINT_VERSION = 1

KIND_ANCHOR, KIND_CROSS_APP, KIND_STOLEN = 0, 1, 2


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""


def _key(*parts) -> int:
    text = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:16], "big")


def _generator(*parts) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=_key(*parts)))


@dataclasses.dataclass(frozen=True)
class Architecture:
    """Layer spec mapping (in_channels, H, W) input to 64 bounded reals."""

    input_hw: tuple[int, int]
    in_channels: int = 3
    conv_channels: tuple[int, ...] = (8, 16, 32)
    dense_hidden: tuple[int, ...] = ()
    embed_dim: int = EMBED_DIM
    output_scale: float = 10.0
    activation: str = "tanh"
    # "sphere": L2-normalize the embedding to radius output_scale (keeps
    # components in [-10, 10] with healthy gradients); "tanh": scaled tanh.
    output_mode: str = "sphere"
    # mean-pool factor after the conv stack: local translation tolerance at
    # the capture-jitter scale without erasing coarse vein shape
    pool: int = 1

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Architecture":
        raw = json.loads(text)
        raw["input_hw"] = tuple(raw["input_hw"])
        raw["conv_channels"] = tuple(raw["conv_channels"])
        raw["dense_hidden"] = tuple(raw["dense_hidden"])
        return cls(**raw)


def _activation(name: str):
    if name == "tanh":
        return Tanh()
    if name == "softplus":
        return Softplus()
    raise ValueError(f"unknown activation {name!r}")


def _build_trunk(arch: Architecture, rng: np.random.Generator) -> Sequential:
    layers: list = []
    h, w = arch.input_hw
    channels = arch.in_channels
    if arch.conv_channels:
        for c_out in arch.conv_channels:
            layers.append(Conv2d(channels, c_out, k=3, stride=2, pad=1, rng=rng))
            layers.append(_activation(arch.activation))
            channels = c_out
            h = (h + 1) // 2
            w = (w + 1) // 2
        if arch.pool > 1:
            layers.append(AvgPool2d(arch.pool))
            h //= arch.pool
            w //= arch.pool
        layers.append(Flatten())
        dim = channels * h * w
    else:
        layers.append(Flatten())
        dim = channels * h * w
    for hidden in arch.dense_hidden:
        layers.append(Dense(dim, hidden, rng=rng))
        layers.append(_activation(arch.activation))
        dim = hidden
    layers.append(Dense(dim, arch.embed_dim, rng=rng))
    if arch.output_mode == "sphere":
        layers.append(L2NormScale(arch.output_scale))
    elif arch.output_mode == "tanh":
        layers.append(ScaledTanh(arch.output_scale))
    else:
        raise ValueError(f"unknown output_mode {arch.output_mode!r}")
    return Sequential(layers)


class EmbeddingModel:
    """Deterministic feature extractor: trunk to 64 dims plus a softmax head
    used only during training."""

    def __init__(self, arch: Architecture, n_classes: int | None = None,
                 seed: int = 0):
        self.arch = arch
        self.n_classes = n_classes
        rng = _generator("model-init", seed, arch.to_json())
        self.trunk = _build_trunk(arch, rng)
        self.head = (
            Sequential([Dense(arch.embed_dim, n_classes, rng=rng)])
            if n_classes
            else None
        )

    # -- parameter vector ---------------------------------------------------
    def get_theta(self) -> np.ndarray:
        parts = [self.trunk.get_theta()]
        if self.head is not None:
            parts.append(self.head.get_theta())
        return np.concatenate(parts)

    def set_theta(self, theta: np.ndarray) -> None:
        n_trunk = self.trunk.get_theta().size
        self.trunk.set_theta(theta[:n_trunk])
        if self.head is not None:
            self.head.set_theta(theta[n_trunk:])
        elif theta.size != n_trunk:
            raise ValueError("theta size mismatch")

    def get_grad(self) -> np.ndarray:
        parts = [self.trunk.get_grad()]
        if self.head is not None:
            parts.append(self.head.get_grad())
        return np.concatenate(parts)

    def zero_grad(self) -> None:
        self.trunk.zero_grad()
        if self.head is not None:
            self.head.zero_grad()

    # -- forward ------------------------------------------------------------
    def check_input(self, x: np.ndarray) -> None:
        expected = (self.arch.in_channels, *self.arch.input_hw)
        if x.shape[1:] != expected:
            raise ValueError(f"input shape {x.shape[1:]} != model spec {expected}")

    def embeddings(self, x: np.ndarray) -> np.ndarray:
        self.check_input(x)
        return self.trunk.forward(x)

    def logits(self, e: np.ndarray) -> np.ndarray:
        if self.head is None:
            raise ValueError("model has no classification head")
        return self.head.forward(e)


@dataclasses.dataclass
class ClassCenters:
    """One 64-dim center per enrolled class, updated with momentum alpha."""

    centers: np.ndarray
    alpha: float = 0.5

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64)
        if self.centers.ndim != 2:
            raise ValueError("centers must be (K, embed_dim)")
        if not np.all(np.isfinite(self.centers)):
            raise ValueError("centers must be finite")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    def update(self, embeddings: np.ndarray, labels: np.ndarray) -> None:
        """c_y <- c_y - alpha (c_y - mean of this batch's class-y anchors)."""
        for cls in np.unique(labels):
            mean = embeddings[labels == cls].mean(axis=0)
            self.centers[cls] -= self.alpha * (self.centers[cls] - mean)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def classification_loss(logits: np.ndarray, labels: np.ndarray) -> float:
    loss, _ = classification_loss_grad(logits, labels)
    return loss


def classification_loss_grad(logits: np.ndarray, labels: np.ndarray):
    """Summed softmax cross entropy and its gradient w.r.t. the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, k = logits.shape
    if k < 2:
        raise ValueError("need at least 2 classes")
    if labels.shape != (n,) or labels.min() < 0 or labels.max() >= k:
        raise ValueError("invalid labels")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_softmax = shifted - log_norm
    loss = float(-log_softmax[np.arange(n), labels].sum())
    grad = np.exp(log_softmax)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad


def secure_center_loss(
    embeddings: np.ndarray,
    centers: ClassCenters,
    y: np.ndarray,
    lambdas=DEFAULT_LAMBDAS,
    margin: float = DEFAULT_MARGIN,
    center_mode: str = "all",
) -> float:
    loss, _, _ = secure_center_loss_grad(
        embeddings, centers, y, lambdas, margin, center_mode
    )
    return loss


def _normalize_rows(v: np.ndarray):
    """Unit rows plus the data needed to backpropagate through the map."""
    norms = np.sqrt((v ** 2).sum(axis=-1, keepdims=True))
    norms = np.maximum(norms, 1e-12)
    return v / norms, norms


def _through_normalization(grad_hat: np.ndarray, v_hat: np.ndarray,
                           norms: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. v/||v|| back to v."""
    radial = (grad_hat * v_hat).sum(axis=-1, keepdims=True)
    return (grad_hat - radial * v_hat) / norms


def secure_center_loss_grad(
    embeddings: np.ndarray,
    centers: ClassCenters,
    y: np.ndarray,
    lambdas=DEFAULT_LAMBDAS,
    margin: float = DEFAULT_MARGIN,
    center_mode: str = "all",
):
    """Quintuple hinge loss with exact gradients.

    ``embeddings`` is (N, 4, E): anchor plus the impostor, cross-application
    and stolen-token negatives.  Distances are squared Euclidean between
    L2-normalized embeddings and centers (so d = 2 - 2 cos and the margin is
    commensurate with the cosine scores used for matching; on raw vectors
    the hinge can be satisfied by inflating a negative's norm without
    rotating it away, which leaves its match score untouched).

    ``center_mode`` selects which center the negatives' distances are taken
    against.  "all" (the printed-formula reading): for every non-anchor
    center k, hinge max(0, d(anchor, c_y) - d(neg_j, c_k) + margin).
    "anchor": the negatives' distances are measured to the anchor's own
    center c_y, one hinge per (i, j).  Only the anchor mode creates contrast
    between a stolen-token probe and the victim's center, so training uses
    it; the "all" mode never penalizes proximity to c_y itself.

    Returns (loss, d_embeddings, d_centers).
    """
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 3 or e.shape[1] != 4:
        raise ValueError("embeddings must be (N, 4, embed_dim)")
    if margin <= 0:
        raise ValueError("margin must be positive")
    if center_mode not in ("all", "anchor"):
        raise ValueError(f"unknown center_mode {center_mode!r}")
    lambdas = tuple(float(v) for v in lambdas)
    if len(lambdas) != 3:
        raise ValueError("lambdas must have 3 entries")
    c = centers.centers
    k = c.shape[0]
    y = np.asarray(y)
    if y.min() < 0 or y.max() >= k:
        raise ValueError("class id out of range for the given centers")
    n = e.shape[0]
    rows = np.arange(n)
    e_hat, e_norms = _normalize_rows(e)
    c_hat, c_norms = _normalize_rows(c)
    anchors = e_hat[:, 0]
    diff_intra = anchors - c_hat[y]
    d_intra = (diff_intra ** 2).sum(axis=1)
    loss = 0.0
    g_e = np.zeros_like(e_hat)   # gradients w.r.t. the normalized vectors
    g_c = np.zeros_like(c_hat)
    for j, lam in enumerate(lambdas):
        neg = e_hat[:, 1 + j]
        if center_mode == "all":
            diff = neg[:, None, :] - c_hat[None, :, :]      # (N, K, E)
            d_neg = (diff ** 2).sum(axis=2)                 # (N, K)
            arg = d_intra[:, None] - d_neg + margin
            active = arg > 0.0
            active[rows, y] = False
            if lam == 0.0 or not active.any():
                continue
            loss += lam * float(arg[active].sum())
            counts = active.sum(axis=1).astype(np.float64)  # hinges per anchor
            g_e[:, 0] += (2.0 * lam) * diff_intra * counts[:, None]
            np.add.at(g_c, y, (-2.0 * lam) * diff_intra * counts[:, None])
            masked = diff * active[:, :, None]
            g_e[:, 1 + j] += (-2.0 * lam) * masked.sum(axis=1)
            g_c += (2.0 * lam) * masked.sum(axis=0)
        else:
            diff = neg - c_hat[y]                           # (N, E)
            d_neg = (diff ** 2).sum(axis=1)                 # (N,)
            arg = d_intra - d_neg + margin
            active = arg > 0.0
            if lam == 0.0 or not active.any():
                continue
            loss += lam * float(arg[active].sum())
            act = active.astype(np.float64)
            g_e[:, 0] += (2.0 * lam) * diff_intra * act[:, None]
            g_e[:, 1 + j] += (-2.0 * lam) * diff * act[:, None]
            # d arg / d c_y = -2 (a - c_y) + 2 (neg - c_y)
            np.add.at(g_c, y, (2.0 * lam) * (diff - diff_intra) * act[:, None])
    d_e = _through_normalization(g_e, e_hat, e_norms)
    d_c = _through_normalization(g_c, c_hat, c_norms)
    return loss, d_e, d_c


@dataclasses.dataclass(frozen=True)
class QuintupleBatch:
    """Assembled training batch: (N, 4, C, H, W) inputs and anchor labels."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.inputs.ndim != 5 or self.inputs.shape[1] != 4:
            raise ValueError("inputs must be (N, 4, C, H, W)")
        if self.labels.shape != (self.inputs.shape[0],):
            raise ValueError("labels must match the batch size")


def total_loss(
    batch: QuintupleBatch,
    model: EmbeddingModel,
    centers: ClassCenters,
    lambdas=DEFAULT_LAMBDAS,
    margin: float = DEFAULT_MARGIN,
    center_mode: str = "all",
):
    """Softmax loss over anchors plus the secure-center loss, with exact
    gradients w.r.t. the model parameters and the centers.

    Returns (loss, parts, grad_theta, grad_centers) where parts is a dict
    with the two components.
    """
    n = batch.inputs.shape[0]
    x = batch.inputs.reshape(n * 4, *batch.inputs.shape[2:])
    model.zero_grad()
    e_flat = model.embeddings(x)
    e = e_flat.reshape(n, 4, -1)
    logits = model.logits(e[:, 0])
    l_s, d_logits = classification_loss_grad(logits, batch.labels)
    l_sc, d_e, d_centers = secure_center_loss_grad(
        e, centers, batch.labels, lambdas, margin, center_mode
    )
    d_anchor = model.head.backward(d_logits)
    d_e = d_e.copy()
    d_e[:, 0] += d_anchor
    model.trunk.backward(d_e.reshape(n * 4, -1))
    loss = l_s + l_sc
    # anchor embeddings ride along for the center momentum update
    parts = {"L_S": l_s, "L_SC": l_sc, "anchor_embeddings": e[:, 0].copy()}
    return loss, parts, model.get_grad(), d_centers


# ---------------------------------------------------------------------------
# Training corpus and quintuple construction
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class CorpusRow:
    kind: int                 # KIND_ANCHOR / KIND_CROSS_APP / KIND_STOLEN
    class_id: int             # enrolled class this row trains against
    biometric_subject: str    # owner of the vein sample
    sample_idx: int
    token_fingerprint: str


@dataclasses.dataclass
class TrainingCorpus:
    """Precolorized tensors plus the metadata quintuple sampling needs."""

    inputs: np.ndarray                 # (M, C, H, W)
    rows: tuple[CorpusRow, ...]
    class_names: tuple[str, ...]       # enrolled subject ids, index = class id
    enrolled_subjects: frozenset
    stolen_subjects: frozenset

    def __post_init__(self):
        if self.inputs.shape[0] != len(self.rows):
            raise ValueError("inputs and rows length mismatch")
        if self.enrolled_subjects & self.stolen_subjects:
            overlap = sorted(self.enrolled_subjects & self.stolen_subjects)
            raise ValueError(f"stolen pool overlaps enrolled subjects: {overlap}")
        by_kind: dict[int, list[int]] = {0: [], 1: [], 2: []}
        for i, row in enumerate(self.rows):
            by_kind[row.kind].append(i)
        self._anchor_rows = np.array(by_kind[KIND_ANCHOR], dtype=np.intp)
        self._cross_by_class: dict[int, list[int]] = {}
        self._stolen_by_class: dict[int, list[int]] = {}
        self._anchors_by_class: dict[int, list[int]] = {}
        for i in by_kind[KIND_ANCHOR]:
            self._anchors_by_class.setdefault(self.rows[i].class_id, []).append(i)
        for i in by_kind[KIND_CROSS_APP]:
            self._cross_by_class.setdefault(self.rows[i].class_id, []).append(i)
        for i in by_kind[KIND_STOLEN]:
            self._stolen_by_class.setdefault(self.rows[i].class_id, []).append(i)
        if not self._anchor_rows.size:
            raise ValueError("corpus has no anchor rows")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_anchors(self) -> int:
        return int(self._anchor_rows.size)


@dataclasses.dataclass(frozen=True)
class Quintuple:
    """Indices into a TrainingCorpus for one anchor and its three negatives."""

    anchor: int
    class_id: int
    neg_impostor: int
    neg_cross_app: int
    neg_stolen: int

    def validate(self, corpus: TrainingCorpus) -> None:
        rows = corpus.rows
        a, imp = rows[self.anchor], rows[self.neg_impostor]
        cross, stolen = rows[self.neg_cross_app], rows[self.neg_stolen]
        if a.class_id != self.class_id:
            raise ValueError("anchor class mismatch")
        if imp.class_id == self.class_id:
            raise ValueError("impostor negative shares the anchor class")
        if cross.biometric_subject != a.biometric_subject:
            raise ValueError("cross-app negative must reuse the anchor biometric")
        if cross.token_fingerprint == a.token_fingerprint:
            raise ValueError("cross-app negative must use a different token")
        if stolen.token_fingerprint != a.token_fingerprint:
            raise ValueError("stolen negative must reuse the anchor token")
        if stolen.biometric_subject not in corpus.stolen_subjects:
            raise ValueError("stolen negative must come from the stolen pool")


def build_quintuples(
    corpus: TrainingCorpus,
    batch_size: int,
    seed: int,
    anchor_rows: np.ndarray | None = None,
) -> list[Quintuple]:
    """Deterministically sample one batch of quintuples.

    ``anchor_rows`` fixes the anchors (the train loop cycles them per epoch);
    otherwise they are drawn uniformly from the corpus anchors.
    """
    rng = _generator("quintuples", seed)
    if anchor_rows is None:
        anchor_rows = rng.choice(corpus._anchor_rows, size=batch_size, replace=False)
    quintuples = []
    for a_idx in anchor_rows:
        row = corpus.rows[int(a_idx)]
        cls = row.class_id
        other = [c for c in corpus._anchors_by_class if c != cls]
        if not other:
            raise ValueError("need at least two enrolled classes")
        imp_cls = other[int(rng.integers(len(other)))]
        imp_rows = corpus._anchors_by_class[imp_cls]
        imp = imp_rows[int(rng.integers(len(imp_rows)))]
        cross_pool = [
            i for i in corpus._cross_by_class.get(cls, ())
            if corpus.rows[i].biometric_subject == row.biometric_subject
        ]
        if not cross_pool:
            raise ValueError(f"no cross-application rows for class {cls}")
        cross = cross_pool[int(rng.integers(len(cross_pool)))]
        stolen_pool = corpus._stolen_by_class.get(cls, ())
        if not stolen_pool:
            raise ValueError(f"no stolen-token rows for class {cls}")
        stolen = stolen_pool[int(rng.integers(len(stolen_pool)))]
        q = Quintuple(int(a_idx), cls, int(imp), int(cross), int(stolen))
        q.validate(corpus)
        quintuples.append(q)
    return quintuples


def assemble_batch(corpus: TrainingCorpus, quintuples) -> QuintupleBatch:
    idx = np.array(
        [[q.anchor, q.neg_impostor, q.neg_cross_app, q.neg_stolen] for q in quintuples],
        dtype=np.intp,
    )
    inputs = corpus.inputs[idx]
    labels = np.array([q.class_id for q in quintuples], dtype=np.intp)
    return QuintupleBatch(inputs=inputs, labels=labels)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 8
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    lambdas: tuple[float, float, float] = DEFAULT_LAMBDAS
    margin: float = DEFAULT_MARGIN
    center_alpha: float = 0.5
    weight_decay: float = 1e-4
    # Training measures negatives against the anchor's own center: only that
    # creates contrast between a stolen-token probe and the victim's center.
    center_mode: str = "anchor"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.lr < 0:
            raise ValueError("lr must be nonnegative")


@dataclasses.dataclass
class TrainResult:
    model: EmbeddingModel
    centers: ClassCenters
    history: list[dict]


def train(corpus: TrainingCorpus, config: TrainConfig,
          arch: Architecture | None = None) -> TrainResult:
    """Train the extractor on a precolorized corpus; deterministic in seed."""
    if arch is None:
        h, w = corpus.inputs.shape[2], corpus.inputs.shape[3]
        arch = Architecture(input_hw=(h, w), in_channels=corpus.inputs.shape[1])
    model = EmbeddingModel(arch, n_classes=corpus.n_classes, seed=config.seed)
    # Random unit directions: a zero center has no direction to normalize.
    init = _generator("centers-init", config.seed).normal(
        size=(corpus.n_classes, arch.embed_dim)
    )
    init /= np.linalg.norm(init, axis=1, keepdims=True)
    centers = ClassCenters(init, alpha=config.center_alpha)
    optimizer = Adam(model.get_theta().size, config.lr, config.beta1,
                     config.beta2, config.eps, config.weight_decay)
    steps = max(1, corpus.n_anchors // config.batch_size)
    history: list[dict] = []
    for epoch in range(config.epochs):
        order = _generator("epoch-order", config.seed, epoch).permutation(
            corpus._anchor_rows
        )
        sums = {"L_S": 0.0, "L_SC": 0.0, "L": 0.0}
        for step in range(steps):
            anchors = order[step * config.batch_size : (step + 1) * config.batch_size]
            if anchors.size == 0:
                break
            quintuples = build_quintuples(
                corpus, anchors.size, _key("batch", config.seed, epoch, step),
                anchor_rows=anchors,
            )
            batch = assemble_batch(corpus, quintuples)
            loss, parts, grad_theta, _ = total_loss(
                batch, model, centers, config.lambdas, config.margin,
                config.center_mode,
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} step {step}: "
                    f"L_S={parts['L_S']:.4g} L_SC={parts['L_SC']:.4g}"
                )
            if config.lr > 0:
                model.set_theta(optimizer.step(model.get_theta(), grad_theta))
                # Center rule uses the pre-update anchor embeddings.
                centers.update(parts["anchor_embeddings"], batch.labels)
            sums["L_S"] += parts["L_S"]
            sums["L_SC"] += parts["L_SC"]
            sums["L"] += loss
        history.append(
            {"epoch": epoch, "L_S": sums["L_S"] / steps,
             "L_SC": sums["L_SC"] / steps, "L": sums["L"] / steps}
        )
    return TrainResult(model=model, centers=centers, history=history)


# ---------------------------------------------------------------------------
# Inference and checkpointing
# ---------------------------------------------------------------------------

def embed(cv: ColorVein, model: EmbeddingModel) -> FeatureVector:
    """Quantized 64-dim protected template of one colorized vein image."""
    x = cv.as_tensor()[None, ...]
    e = model.embeddings(x)
    return quantize_template(e[0])


def save_checkpoint(path, model: EmbeddingModel, centers: ClassCenters,
                    config_hash: str = "", class_names=()) -> None:
    np.savez_compressed(
        Path(path),
        format_version=np.array(CHECKPOINT_VERSION),
        library_version=np.array(__version__),
        arch=np.array(model.arch.to_json()),
        theta=model.get_theta(),
        centers=centers.centers,
        center_alpha=np.array(centers.alpha),
        n_classes=np.array(model.n_classes or 0),
        config_hash=np.array(config_hash),
        class_names=np.array(list(class_names), dtype=object),
    )


def load_checkpoint(path):
    """Returns (model, centers, meta)."""
    with np.load(Path(path), allow_pickle=True) as data:
        version = int(data["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        arch = Architecture.from_json(str(data["arch"]))
        n_classes = int(data["n_classes"]) or None
        model = EmbeddingModel(arch, n_classes=n_classes, seed=0)
        model.set_theta(data["theta"])
        centers = ClassCenters(data["centers"], alpha=float(data["center_alpha"]))
        meta = {
            "config_hash": str(data["config_hash"]),
            "library_version": str(data["library_version"]),
            "class_names": tuple(str(s) for s in data["class_names"]),
        }
    return model, centers, meta
