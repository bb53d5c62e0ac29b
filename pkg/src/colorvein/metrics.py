"""Recognition and template-protection metrics.

EER sweeps the merged score set with linear interpolation at the crossing;
unlinkability follows the mated/non-mated posterior-difference formulation;
decidability is the normalized mean separation; privacy leakage is a mutual
information ratio over a documented, seeded estimator.
"""

from __future__ import annotations

import dataclasses
import hashlib

import numpy as np

from .imaging import BinaryPattern, FeatureVector, GrayImage

SCORE_BINS = 100


@dataclasses.dataclass(frozen=True)
class ScoreSet:
    """Protocol output: whichever distributions the scenario produces."""

    genuine: np.ndarray | None = None
    impostor: np.ndarray | None = None
    pseudo_impostor: np.ndarray | None = None
    mated: np.ndarray | None = None
    non_mated: np.ndarray | None = None

    def __post_init__(self):
        for name in ("genuine", "impostor", "pseudo_impostor", "mated", "non_mated"):
            value = getattr(self, name)
            if value is None:
                continue
            arr = np.asarray(value, dtype=np.float64)
            if arr.size == 0:
                raise ValueError(f"{name} scores are empty")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} scores contain non-finite values")
            if np.abs(arr).max() > 1.0 + 1e-12:
                raise ValueError(f"{name} scores must lie in [-1, 1]")
            object.__setattr__(self, name, arr)


def compute_eer(genuine, impostor) -> tuple[float, float]:
    """Equal error rate and its threshold.

    Thresholds sweep the merged sorted score set (plus a sentinel past the
    maximum); FAR(t) is the impostor fraction >= t, FRR(t) the genuine
    fraction < t.  The crossing is linearly interpolated between the
    adjacent thresholds where FAR - FRR changes sign.
    """
    gen = np.asarray(genuine, dtype=np.float64)
    imp = np.asarray(impostor, dtype=np.float64)
    if gen.size == 0 or imp.size == 0:
        raise ValueError("genuine and impostor score lists must be nonempty")
    thresholds = np.unique(np.concatenate([gen, imp]))
    thresholds = np.append(thresholds, thresholds[-1] + 1.0)
    gen_sorted = np.sort(gen)
    imp_sorted = np.sort(imp)
    far = (imp.size - np.searchsorted(imp_sorted, thresholds, side="left")) / imp.size
    frr = np.searchsorted(gen_sorted, thresholds, side="left") / gen.size
    diff = far - frr
    idx = int(np.argmax(diff <= 0.0))
    if idx == 0:
        return float(far[0]), float(thresholds[0])
    i, j = idx - 1, idx
    t = diff[i] / (diff[i] - diff[j])
    eer = far[i] + t * (far[j] - far[i])
    tau = thresholds[i] + t * (thresholds[j] - thresholds[i])
    return float(eer), float(tau)


def decidability(dist1, dist2) -> float:
    """d' = |mu1 - mu2| / sqrt((var1 + var2) / 2), population variances."""
    a = np.asarray(dist1, dtype=np.float64)
    b = np.asarray(dist2, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each distribution needs at least 2 scores")
    pooled = 0.5 * (a.var() + b.var())
    if pooled <= 0.0:
        raise ValueError("pooled variance is zero")
    return float(abs(a.mean() - b.mean()) / np.sqrt(pooled))


def unlinkability(mated, non_mated, bins: int = SCORE_BINS,
                  clip_negative: bool = False) -> tuple[float, np.ndarray]:
    """Global unlinkability D_sys and the per-bin D(s) curve.

    Densities are common-support histograms over [-1, 1]; posteriors use
    equal priors.  By default negative D(s) mass integrates as printed in
    the defining equation; ``clip_negative`` floors D(s) at 0 (the variant
    used by the evaluation-framework implementation).
    """
    m = np.asarray(mated, dtype=np.float64)
    nm = np.asarray(non_mated, dtype=np.float64)
    if m.size == 0 or nm.size == 0:
        raise ValueError("mated and non-mated score lists must be nonempty")
    if bins < 10:
        raise ValueError("need at least 10 bins")
    edges = np.linspace(-1.0, 1.0, bins + 1)
    pm = np.histogram(m, bins=edges)[0] / m.size
    pnm = np.histogram(nm, bins=edges)[0] / nm.size
    total = pm + pnm
    d_curve = np.zeros(bins)
    occupied = total > 0
    d_curve[occupied] = (pm[occupied] - pnm[occupied]) / total[occupied]
    if clip_negative:
        d_curve = np.maximum(d_curve, 0.0)
    d_sys = float((pm * d_curve).sum())
    return d_sys, d_curve


# ---------------------------------------------------------------------------
# Privacy leakage
# ---------------------------------------------------------------------------

X_AXES = 8
X_LEVELS = 64
JOINT_BINS = 16


def _leakage_axes(n_pixels: int, seed: int) -> np.ndarray:
    key = int.from_bytes(
        hashlib.sha256(f"leakage-axes\x1f{seed}".encode()).digest()[:16], "big"
    )
    rng = np.random.Generator(np.random.Philox(key=key))
    axes = rng.normal(size=(X_AXES, n_pixels))
    return axes / np.linalg.norm(axes, axis=1, keepdims=True)


def _equalize(values: np.ndarray, levels: int) -> np.ndarray:
    """Rank-based histogram equalization to ``levels`` integer levels."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty_like(order)
    ranks[order] = np.arange(values.size)
    return (ranks * levels) // values.size


def _pair_mutual_information(x16: np.ndarray, y16: np.ndarray, bins: int) -> float:
    """Plug-in MI (nats) with Miller-Madow bias correction, clamped at 0."""
    n = x16.size
    joint = np.zeros((bins, bins))
    np.add.at(joint, (x16, y16), 1.0)
    joint /= n
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    nz = joint > 0
    outer = px[:, None] * py[None, :]
    mi = float((joint[nz] * np.log(joint[nz] / outer[nz])).sum())
    k_joint = int(nz.sum())
    k_x = int((px > 0).sum())
    k_y = int((py > 0).sum())
    bias = (k_joint - k_x - k_y + 1) / (2.0 * n)
    return max(0.0, mi - bias)


def privacy_leakage(originals, templates, seed: int = 0) -> float:
    """Leakage rate 1 - I(X;Y)/H(X), clamped to [0, 1].

    Estimator: X is each original image projected onto 8 fixed seeded random
    axes and histogram-equalized to 64 levels; Y is the 64 template
    components.  Component j pairs with axis j mod 8; each pair's mutual
    information comes from a 16x16 joint histogram with Miller-Madow bias
    correction, averaged over pairs, with H(X) the mean 16-bin marginal
    entropy under the same binning.  Absolute values are estimator-relative.
    """
    originals = list(originals)
    templates = list(templates)
    if len(originals) != len(templates):
        raise ValueError("originals and templates must pair up")
    n = len(originals)
    if n < 30:
        raise ValueError(f"need at least 30 pairs for the binned estimator, got {n}")
    shape = originals[0].shape
    flat = np.empty((n, shape[0] * shape[1]))
    for i, img in enumerate(originals):
        if not isinstance(img, (GrayImage, BinaryPattern)):
            raise TypeError("originals must be GrayImage or BinaryPattern")
        if img.shape != shape:
            raise ValueError("originals must share dims")
        flat[i] = img.data.astype(np.float64).ravel()
    y = np.empty((n, 64))
    for i, fv in enumerate(templates):
        if not isinstance(fv, FeatureVector):
            raise TypeError("templates must be FeatureVector")
        y[i] = fv.components
    axes = _leakage_axes(flat.shape[1], seed)
    proj = flat @ axes.T                                     # (n, 8)
    x_levels = np.stack([_equalize(proj[:, a], X_LEVELS) for a in range(X_AXES)], axis=1)
    x16 = (x_levels * JOINT_BINS) // X_LEVELS
    h_x = []
    for a in range(X_AXES):
        counts = np.bincount(x16[:, a], minlength=JOINT_BINS) / n
        nz = counts > 0
        h_x.append(float(-(counts[nz] * np.log(counts[nz])).sum()))
    h_mean = float(np.mean(h_x))
    if h_mean <= 1e-12:
        raise ValueError("originals carry no entropy under the estimator")
    mis = []
    for j in range(64):
        col = y[:, j]
        lo, hi = col.min(), col.max()
        if hi - lo <= 0:
            mis.append(0.0)
            continue
        y16 = np.minimum(
            ((col - lo) / (hi - lo) * JOINT_BINS).astype(np.int64), JOINT_BINS - 1
        )
        mis.append(_pair_mutual_information(x16[:, j % X_AXES], y16, JOINT_BINS))
    rate = 1.0 - float(np.mean(mis)) / h_mean
    return float(np.clip(rate, 0.0, 1.0))
