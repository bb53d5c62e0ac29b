"""Hint-guided chroma propagation and the colorization training losses.

The reference backend solves a quadratic propagation energy: chroma follows
lightness-affinity smoothing, hint pixels are softly pinned to their chroma,
and background pixels relax toward the token's undertone.  The solve is
Jacobi-preconditioned conjugate gradient over a matrix-free 4-neighbour
stencil.  Callers depend only on the ``colorize`` contract, so a learned
backend could replace the solver without touching them.
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path

import numpy as np

from . import _accel
from .hints import HintSet
from .imaging import BinaryPattern, GrayImage

DEFAULT_LAMBDA_HINT = 100.0
DEFAULT_LAMBDA_TONE = 0.1
DEFAULT_SIGMA = 0.1
DEFAULT_TOL = 1e-8  # comfortably inside the <= 1e-6 residual contract

# 3x3 Gaussian (sigma = 1), sampled and normalized.
_G = np.exp(-0.5 * np.array([2.0, 1.0, 0.0]))
GAUSS3 = np.array([
    [_G[0], _G[1], _G[0]],
    [_G[1], _G[2], _G[1]],
    [_G[0], _G[1], _G[0]],
])
GAUSS3 /= GAUSS3.sum()


class ConvergenceError(RuntimeError):
    """Conjugate gradient failed to reach the target residual."""


@dataclasses.dataclass(frozen=True)
class ChromaPlanes:
    """Two bounded chroma channels sharing dims with their source."""

    a_plane: np.ndarray
    b_plane: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a_plane, dtype=np.float64)
        b = np.asarray(self.b_plane, dtype=np.float64)
        if a.ndim != 2 or a.shape != b.shape:
            raise ValueError(f"chroma planes must share 2-D dims, got {a.shape} vs {b.shape}")
        for plane in (a, b):
            if not np.all(np.isfinite(plane)):
                raise ValueError("chroma contains non-finite values")
            if np.abs(plane).max(initial=0.0) > 1.0:
                raise ValueError("chroma values must lie in [-1, 1]")
        from .imaging import _freeze

        object.__setattr__(self, "a_plane", _freeze(a))
        object.__setattr__(self, "b_plane", _freeze(b))

    @property
    def shape(self) -> tuple[int, int]:
        return self.a_plane.shape


@dataclasses.dataclass(frozen=True)
class Provenance:
    token_fingerprint: str
    offset: tuple[int, int]


@dataclasses.dataclass(frozen=True)
class ColorVein:
    """Protected colorized image: lightness plus chroma plus provenance."""

    lightness: GrayImage
    chroma: ChromaPlanes
    provenance: Provenance

    def __post_init__(self):
        if self.lightness.shape != self.chroma.shape:
            raise ValueError(
                f"lightness dims {self.lightness.shape} != chroma dims {self.chroma.shape}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.lightness.shape

    def as_tensor(self) -> np.ndarray:
        """(3, H, W) array: lightness, a, b."""
        return np.stack(
            [self.lightness.data, self.chroma.a_plane, self.chroma.b_plane]
        )


@dataclasses.dataclass(frozen=True)
class HintDistribution:
    """Per-pixel probability distribution over Q quantized color bins."""

    Z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.Z, dtype=np.float64)
        if z.ndim != 3:
            raise ValueError(f"expected (H, W, Q), got shape {z.shape}")
        if z.min(initial=0.0) < 0.0:
            raise ValueError("distribution entries must be nonnegative")
        sums = z.sum(axis=2)
        if np.abs(sums - 1.0).max(initial=0.0) > 1e-9:
            raise ValueError("each pixel's distribution must sum to 1")
        from .imaging import _freeze

        object.__setattr__(self, "Z", _freeze(z))

    @property
    def q(self) -> int:
        return self.Z.shape[2]


# ---------------------------------------------------------------------------
# Lightness construction
# ---------------------------------------------------------------------------

def build_lightness(mask: BinaryPattern, style: tuple[float, float]) -> GrayImage:
    """Paint the vein region and background, then smooth with a 3x3 Gaussian.

    ``style`` is (region_lightness, background_lightness); the smoothing
    gives the propagation weights a gradient to follow at the region edge.
    """
    region, background = float(style[0]), float(style[1])
    if region == background:
        raise ValueError("region and background lightness must differ")
    for v in (region, background):
        if not 0.0 <= v <= 1.0:
            raise ValueError("lightness levels must lie in [0, 1]")
    flat = np.where(mask.data == 1, region, background)
    padded = np.pad(flat, 1, mode="reflect")
    out = np.zeros_like(flat)
    for di in range(3):
        for dj in range(3):
            out += GAUSS3[di, dj] * padded[di : di + flat.shape[0], dj : dj + flat.shape[1]]
    return GrayImage(np.clip(out, 0.0, 1.0))


def background_lightness_for(region: float) -> float:
    """Background level paired with a token's region lightness.

    Keeps at least 0.35 contrast so the propagation weights see the region
    boundary regardless of where in [0.2, 0.9] the token's lightness landed.
    """
    return region - 0.35 if region >= 0.55 else region + 0.35


# ---------------------------------------------------------------------------
# Propagation solve
# ---------------------------------------------------------------------------

def propagation_weights(lightness: np.ndarray, sigma: float) -> np.ndarray:
    """Row-normalized 4-neighbour affinities w_pq = exp(-(L_p-L_q)^2 / 2 sigma^2)."""
    h, w = lightness.shape
    w4 = np.zeros((h, w, 4))
    diffs = (
        (0, lightness[1:, :], lightness[:-1, :], (slice(1, None), slice(None))),   # up
        (1, lightness[:-1, :], lightness[1:, :], (slice(None, -1), slice(None))),  # down
        (2, lightness[:, 1:], lightness[:, :-1], (slice(None), slice(1, None))),   # left
        (3, lightness[:, :-1], lightness[:, 1:], (slice(None), slice(None, -1))),  # right
    )
    inv = 1.0 / (2.0 * sigma * sigma)
    for d, here, there, region in diffs:
        w4[region[0], region[1], d] = np.exp(-((here - there) ** 2) * inv)
    total = w4.sum(axis=2, keepdims=True)
    return w4 / total


def _numpy_matvec(x: np.ndarray, w4: np.ndarray, diag: np.ndarray) -> np.ndarray:
    """Vectorized fallback for :func:`_accel.propagation_matvec`."""

    def w_apply(v):
        out = np.zeros_like(v)
        out[1:, :] += w4[1:, :, 0] * v[:-1, :]
        out[:-1, :] += w4[:-1, :, 1] * v[1:, :]
        out[:, 1:] += w4[:, 1:, 2] * v[:, :-1]
        out[:, :-1] += w4[:, :-1, 3] * v[:, 1:]
        return out

    def wt_apply(v):
        out = np.zeros_like(v)
        out[:-1, :] += w4[1:, :, 0] * v[1:, :]
        out[1:, :] += w4[:-1, :, 1] * v[:-1, :]
        out[:, :-1] += w4[:, 1:, 2] * v[:, 1:]
        out[:, 1:] += w4[:, :-1, 3] * v[:, :-1]
        return out

    t = x - w_apply(x)
    return t - wt_apply(t) + diag * x


def _make_operator(w4: np.ndarray, diag: np.ndarray):
    if _accel.NUMBA_ENABLED:
        out = np.empty(diag.shape)
        tmp = np.empty(diag.shape)

        def apply(x):
            _accel.propagation_matvec(x, w4, diag, out, tmp)
            return out.copy()

        return apply
    return lambda x: _numpy_matvec(x, w4, diag)


def _operator_diagonal(w4: np.ndarray, diag: np.ndarray) -> np.ndarray:
    """diag((I-W)^T (I-W)) + diag: Jacobi preconditioner."""
    d = np.ones(diag.shape)
    d[:-1, :] += w4[1:, :, 0] ** 2
    d[1:, :] += w4[:-1, :, 1] ** 2
    d[:, :-1] += w4[:, 1:, 2] ** 2
    d[:, 1:] += w4[:, :-1, 3] ** 2
    return d + diag


def _cg_solve(apply_a, b, precond, tol, max_iter, energy_every=0):
    x = np.zeros_like(b)
    r = b.copy()
    z = r * precond
    p = z.copy()
    rz = float((r * z).sum())
    energies = []
    for it in range(max_iter):
        res = math.sqrt(float((r * r).sum()))
        if energy_every and it % energy_every == 0:
            ax = apply_a(x)
            energies.append(0.5 * float((x * ax).sum()) - float((x * b).sum()))
        if res <= tol:
            return x, it, energies
        ap = apply_a(p)
        alpha = rz / float((p * ap).sum())
        x = x + alpha * p
        r = r - alpha * ap
        z = r * precond
        rz_new = float((r * z).sum())
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = math.sqrt(float((r * r).sum()))
    if res <= tol:
        return x, max_iter, energies
    raise ConvergenceError(
        f"CG did not reach residual {tol:g} in {max_iter} iterations (residual {res:g})"
    )


def solve_propagation(
    lightness: GrayImage,
    hints: HintSet,
    lam_hint: float = DEFAULT_LAMBDA_HINT,
    sigma: float = DEFAULT_SIGMA,
    *,
    mask: BinaryPattern | None = None,
    lam_tone: float = DEFAULT_LAMBDA_TONE,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    energy_every: int = 0,
):
    """Minimize the propagation energy per chroma channel.

    Energy: ||(I-W)c||^2 + lam_hint * sum_h (c_h - chroma_h)^2
    [+ lam_tone * sum_{p not vein} (c_p - undertone)^2 when a mask is given].
    Solved by conjugate gradient; the result is clamped to [-1, 1].

    Returns ``ChromaPlanes``; with ``energy_every > 0`` returns
    ``(ChromaPlanes, energies)`` with the sampled CG energy values.
    """
    if lam_hint <= 0:
        raise ValueError("lam_hint must be positive")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    h, w = lightness.shape
    pos = hints.positions()
    if (pos[:, 0].max() >= h) or (pos[:, 1].max() >= w):
        raise ValueError("hints out of image bounds")
    w4 = propagation_weights(lightness.data, sigma)
    diag = np.zeros((h, w))
    diag[pos[:, 0], pos[:, 1]] += lam_hint
    chroma = hints.chroma()
    targets = []
    for ch in range(2):
        b = np.zeros((h, w))
        b[pos[:, 0], pos[:, 1]] += lam_hint * chroma[:, ch]
        targets.append(b)
    if mask is not None:
        if mask.shape != (h, w):
            raise ValueError("mask dims differ from lightness dims")
        bg = mask.data == 0
        diag[bg] += lam_tone
        targets[0][bg] += lam_tone * hints.undertone[0]
        targets[1][bg] += lam_tone * hints.undertone[1]
    apply_a = _make_operator(w4, diag)
    precond = 1.0 / _operator_diagonal(w4, diag)
    limit = max_iter if max_iter is not None else 10 * h * w
    planes = []
    all_energies = []
    for b in targets:
        x, _, energies = _cg_solve(apply_a, b, precond, tol, limit, energy_every)
        planes.append(np.clip(x, -1.0, 1.0))
        all_energies.append(energies)
    result = ChromaPlanes(planes[0], planes[1])
    if energy_every:
        return result, all_energies
    return result


def colorize(
    lightness: GrayImage,
    hints: HintSet,
    mask: BinaryPattern | None = None,
    **solver_kwargs,
) -> ChromaPlanes:
    """Produce bounded chroma planes from lightness and token hints.

    Contract: hint chroma is reproduced within 0.05 per channel at hint
    pixels, propagation is smooth across constant lightness, background
    pixels relax toward the undertone (when ``mask`` is given), and all
    outputs lie in [-1, 1].  Deterministic and invariant to hint order.
    """
    if len(hints) == 0:
        raise ValueError("colorize requires at least one hint")
    return solve_propagation(lightness, hints, mask=mask, **solver_kwargs)


# ---------------------------------------------------------------------------
# Training losses
# ---------------------------------------------------------------------------

def huber_loss(x: ChromaPlanes, y: ChromaPlanes, delta: float = 1.0) -> float:
    """Per-channel mean Huber penalty, summed over the two chroma channels."""
    loss, _ = huber_loss_grad(x, y, delta)
    return loss


def huber_loss_grad(x: ChromaPlanes, y: ChromaPlanes, delta: float = 1.0):
    """Huber loss and its analytic gradient w.r.t. ``x``'s planes."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if x.shape != y.shape:
        raise ValueError(f"dims differ: {x.shape} vs {y.shape}")
    n = x.shape[0] * x.shape[1]
    loss = 0.0
    grads = []
    for xp, yp in ((x.a_plane, y.a_plane), (x.b_plane, y.b_plane)):
        err = xp - yp
        small = np.abs(err) < delta
        quad = 0.5 * err ** 2
        lin = delta * (np.abs(err) - 0.5 * delta)
        loss += float(np.where(small, quad, lin).sum()) / n
        grads.append(np.where(small, err, delta * np.sign(err)) / n)
    return loss, tuple(grads)


def hint_distribution_loss(z: HintDistribution, z_hat: HintDistribution) -> float:
    """Cross entropy -sum Z log Zhat, summed (not averaged) over pixels."""
    if z.Z.shape != z_hat.Z.shape:
        raise ValueError(f"distribution dims differ: {z.Z.shape} vs {z_hat.Z.shape}")
    if z_hat.Z.min() <= 0.0:
        raise ValueError("predicted distribution must be strictly positive")
    return float(-(z.Z * np.log(z_hat.Z)).sum())


def hint_distribution_loss_from_logits(z: HintDistribution, logits: np.ndarray):
    """Cross entropy against softmax(logits) and its gradient w.r.t. logits."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != z.Z.shape:
        raise ValueError(f"logit dims {logits.shape} differ from Z dims {z.Z.shape}")
    shifted = logits - logits.max(axis=2, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=2, keepdims=True))
    log_softmax = shifted - log_norm
    loss = float(-(z.Z * log_softmax).sum())
    grad = np.exp(log_softmax) - z.Z
    return loss, grad


# ---------------------------------------------------------------------------
# Composition and export
# ---------------------------------------------------------------------------

def compose_lab(
    lightness: GrayImage,
    chroma: ChromaPlanes,
    hints: HintSet,
    offset: tuple[int, int] = (0, 0),
    provenance: Provenance | None = None,
) -> ColorVein:
    """Bundle the planes with provenance; no value transformation.

    An explicitly supplied ``provenance`` must match the hints' fingerprint.
    """
    if lightness.shape != chroma.shape:
        raise ValueError(f"dims differ: {lightness.shape} vs {chroma.shape}")
    if provenance is None:
        provenance = Provenance(hints.token_fingerprint, (int(offset[0]), int(offset[1])))
    elif provenance.token_fingerprint != hints.token_fingerprint:
        raise ValueError("provenance fingerprint does not match the hints used")
    return ColorVein(lightness=lightness, chroma=chroma, provenance=provenance)


def save_colorvein(cv: ColorVein, path) -> None:
    """Lossless 3-plane container (NPZ)."""
    np.savez_compressed(
        Path(path),
        lightness=cv.lightness.data,
        a_plane=cv.chroma.a_plane,
        b_plane=cv.chroma.b_plane,
        token_fingerprint=np.array(cv.provenance.token_fingerprint),
        offset=np.array(cv.provenance.offset, dtype=np.int64),
    )


def load_colorvein(path) -> ColorVein:
    with np.load(Path(path)) as data:
        return ColorVein(
            lightness=GrayImage(data["lightness"]),
            chroma=ChromaPlanes(data["a_plane"], data["b_plane"]),
            provenance=Provenance(
                str(data["token_fingerprint"]),
                (int(data["offset"][0]), int(data["offset"][1])),
            ),
        )


def save_preview_png(cv: ColorVein, path) -> None:
    """Lossy 8-bit preview (never used for matching): L and chroma in [0, 255]."""
    from PIL import Image

    rgb = np.stack(
        [
            cv.lightness.data,
            (cv.chroma.a_plane + 1.0) / 2.0,
            (cv.chroma.b_plane + 1.0) / 2.0,
        ],
        axis=2,
    )
    Image.fromarray((rgb * 255.0 + 0.5).astype(np.uint8), mode="RGB").save(Path(path))
