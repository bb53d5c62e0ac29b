"""JIT-compiled inner loops with a pure-Python/NumPy fallback.

The hot kernels (line tracking, curvature profile scans, the propagation
stencil) are compiled with numba when available.  Setting the environment
variable ``COLORVEIN_DISABLE_NUMBA=1`` forces the fallback path; the two
paths run the same scalar logic over the same inputs and produce identical
results, the fallback is just slower.  ``python -m colorvein.bench`` times
both paths side by side.
"""

from __future__ import annotations

import os

import numpy as np


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and not _env_flag("COLORVEIN_DISABLE_NUMBA")


def maybe_njit(func):
    """Compile ``func`` with numba unless the fallback path is forced."""
    if NUMBA_ENABLED:
        return numba.njit(cache=True)(func)
    return func


# ---------------------------------------------------------------------------
# Curvature profile scan (maximum-curvature extractor)
# ---------------------------------------------------------------------------

@maybe_njit
def scan_curvature_runs(kappa, dy, dx, starts_y, starts_x, score):
    """Walk lines through ``kappa`` with step (dy, dx) and score each maximal
    positive run: every pixel of the run receives kappa_max * run_length,
    which marks the full valley cross-section instead of only its center.
    """
    h, w = kappa.shape
    for s in range(starts_y.shape[0]):
        y = starts_y[s]
        x = starts_x[s]
        run_len = 0
        run_max = 0.0
        ry = 0
        rx = 0
        while 0 <= y < h and 0 <= x < w:
            k = kappa[y, x]
            if k > 0.0:
                if run_len == 0:
                    ry = y
                    rx = x
                run_len += 1
                if k > run_max:
                    run_max = k
            else:
                if run_len > 0:
                    val = run_max * run_len
                    yy = ry
                    xx = rx
                    for _ in range(run_len):
                        score[yy, xx] += val
                        yy += dy
                        xx += dx
                    run_len = 0
                    run_max = 0.0
            y += dy
            x += dx
        if run_len > 0:
            val = run_max * run_len
            yy = ry
            xx = rx
            for _ in range(run_len):
                score[yy, xx] += val
                yy += dy
                xx += dx


# ---------------------------------------------------------------------------
# Repeated line tracking
# ---------------------------------------------------------------------------

# 8-neighbourhood steps and, for each step, an integer direction
# perpendicular to it (used to probe the valley cross-section).
_DY8 = np.array([-1, -1, -1, 0, 0, 1, 1, 1], dtype=np.int64)
_DX8 = np.array([-1, 0, 1, -1, 1, -1, 0, 1], dtype=np.int64)
_PY8 = np.array([-1, 0, 1, 1, 1, 1, 0, -1], dtype=np.int64)
_PX8 = np.array([1, 1, 1, 0, 0, 1, 1, 1], dtype=np.int64)


@maybe_njit
def rlt_locus(img, starts_y, starts_x, attr_rand, step_rand, radius,
              max_steps, depth_min, locus, visited):
    """Accumulate the locus counts of repeated dark-line tracking.

    Each track starts at ``(starts_y[t], starts_x[t])`` and repeatedly moves
    to the neighbour with the deepest valley cross-section (probed ``radius``
    pixels to either side, perpendicular to the step).  ``attr_rand`` fixes
    the per-track direction attribute, ``step_rand`` drives the per-step
    choice between attribute-restricted and full neighbourhoods.  All
    randomness is passed in precomputed so the numba and fallback paths
    produce identical loci.
    """
    h, w = img.shape
    n_tracks = starts_y.shape[0]
    margin = radius + 1
    for t in range(n_tracks):
        for i in range(h):
            for j in range(w):
                visited[i, j] = 0
        y = starts_y[t]
        x = starts_x[t]
        # Direction attributes: prefer left/right or up/down neighbours.
        horiz = attr_rand[t, 0] < 0.5
        for s in range(max_steps):
            visited[y, x] = 1
            u = step_rand[t, s]
            # 0: restrict to the track's attribute directions, 1: all 8.
            restricted = u < 0.5
            best_depth = depth_min
            best_k = -1
            for k in range(8):
                if restricted:
                    if horiz and _DX8[k] == 0:
                        continue
                    if not horiz and _DY8[k] == 0:
                        continue
                ny = y + _DY8[k]
                nx = x + _DX8[k]
                if ny < margin or ny >= h - margin:
                    continue
                if nx < margin or nx >= w - margin:
                    continue
                if visited[ny, nx]:
                    continue
                py = _PY8[k]
                px = _PX8[k]
                side_a = img[ny + radius * py, nx + radius * px]
                side_b = img[ny - radius * py, nx - radius * px]
                depth = 0.5 * (side_a + side_b) - img[ny, nx]
                if depth > best_depth:
                    best_depth = depth
                    best_k = k
            if best_k < 0:
                break
            y = y + _DY8[best_k]
            x = x + _DX8[best_k]
            locus[y, x] += 1


# ---------------------------------------------------------------------------
# Propagation stencil (conjugate-gradient matvec)
# ---------------------------------------------------------------------------

@maybe_njit
def propagation_matvec(x, w4, diag, out, tmp):
    """out = (I - W)^T (I - W) x + diag * x.

    ``w4[i, j, d]`` holds the row-normalized affinity from pixel (i, j) to
    its neighbour in direction d (0: up, 1: down, 2: left, 3: right); the
    weight is zero where the neighbour does not exist.
    """
    h, w = x.shape
    # tmp = (I - W) x
    for i in range(h):
        for j in range(w):
            acc = x[i, j]
            if i > 0:
                acc -= w4[i, j, 0] * x[i - 1, j]
            if i < h - 1:
                acc -= w4[i, j, 1] * x[i + 1, j]
            if j > 0:
                acc -= w4[i, j, 2] * x[i, j - 1]
            if j < w - 1:
                acc -= w4[i, j, 3] * x[i, j + 1]
            tmp[i, j] = acc
    # out = (I - W)^T tmp + diag * x
    for i in range(h):
        for j in range(w):
            acc = tmp[i, j]
            if i > 0:
                acc -= w4[i - 1, j, 1] * tmp[i - 1, j]
            if i < h - 1:
                acc -= w4[i + 1, j, 0] * tmp[i + 1, j]
            if j > 0:
                acc -= w4[i, j - 1, 3] * tmp[i, j - 1]
            if j < w - 1:
                acc -= w4[i, j + 1, 2] * tmp[i, j + 1]
            out[i, j] = acc + diag[i, j] * x[i, j]
