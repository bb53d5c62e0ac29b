"""Token-bound pseudo-random color hints and their alignment to a vein mask.

Every random quantity is drawn from a counter-based keyed stream (Philox)
derived from the identity token, with independent substreams for positions,
chroma, lightness, and undertone, so re-derivation is reproducible and the
fields are not order-coupled.
"""

from __future__ import annotations

import dataclasses
import hashlib

import numpy as np

from .imaging import BinaryPattern

ALIGN_RANGE = 30  # +/- pixels searched horizontally and vertically

LIGHTNESS_LO = 0.2
LIGHTNESS_HI = 0.9


@dataclasses.dataclass(frozen=True)
class IdentityToken:
    """Seed-bearing cancelable identity bound to one application."""

    identity_id: str
    application_id: str
    seed: int  # 128-bit unsigned

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 128:
            raise ValueError("seed must be a 128-bit unsigned integer")

    def fingerprint(self) -> str:
        return hashlib.sha256(self._material("fingerprint")).hexdigest()[:16]

    def _material(self, label: str) -> bytes:
        text = f"{self.identity_id}\x1f{self.application_id}\x1f{self.seed:032x}\x1f{label}"
        return text.encode("utf-8")

    def stream(self, label: str) -> np.random.Generator:
        """Independent keyed substream for one derived field."""
        digest = hashlib.sha256(self._material(label)).digest()
        key = int.from_bytes(digest[:16], "big")
        return np.random.Generator(np.random.Philox(key=key))


@dataclasses.dataclass(frozen=True)
class Hint:
    """A pixel position with its bounded chroma value."""

    x: int
    y: int
    chroma_a: float
    chroma_b: float

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError("hint position must be non-negative")
        for c in (self.chroma_a, self.chroma_b):
            if not -1.0 <= c <= 1.0:
                raise ValueError("hint chroma must lie in [-1, 1]")


@dataclasses.dataclass(frozen=True)
class HintSet:
    """Derived hint points plus region lightness and vein undertone."""

    hints: tuple[Hint, ...]
    region_lightness: float
    undertone: tuple[float, float]
    token_fingerprint: str

    def __post_init__(self):
        if len(self.hints) < 1:
            raise ValueError("a HintSet needs at least one hint")
        positions = {(h.y, h.x) for h in self.hints}
        if len(positions) != len(self.hints):
            raise ValueError("hints must occupy distinct pixels")
        if not LIGHTNESS_LO <= self.region_lightness <= LIGHTNESS_HI:
            raise ValueError(
                f"region lightness must lie in [{LIGHTNESS_LO}, {LIGHTNESS_HI}]"
            )
        if any(not -1.0 <= u <= 1.0 for u in self.undertone):
            raise ValueError("undertone must lie in [-1, 1] per channel")

    def __len__(self) -> int:
        return len(self.hints)

    def positions(self) -> np.ndarray:
        """(m, 2) array of (y, x) positions."""
        return np.array([(h.y, h.x) for h in self.hints], dtype=np.int64)

    def chroma(self) -> np.ndarray:
        """(m, 2) array of (a, b) chroma values."""
        return np.array([(h.chroma_a, h.chroma_b) for h in self.hints])


def derive_hints(token: IdentityToken, mask: BinaryPattern, m: int) -> HintSet:
    """Derive ``m`` token-bound hints on vein pixels of ``mask``.

    Positions are sampled uniformly without replacement over the vein pixels
    enumerated row-major; chroma, region lightness, and undertone come from
    the token's independent substreams, so they do not depend on the mask.
    """
    if m < 1:
        raise ValueError("hint count m must be >= 1")
    vein_flat = np.flatnonzero(mask.data.ravel())
    if vein_flat.size < m:
        raise ValueError(
            f"mask has {vein_flat.size} vein pixels, fewer than m={m}"
        )
    pos_rng = token.stream("positions")
    chosen = vein_flat[pos_rng.choice(vein_flat.size, size=m, replace=False)]
    ys, xs = np.divmod(chosen, mask.width)
    chroma = token.stream("chroma").uniform(-1.0, 1.0, size=(m, 2))
    lightness = float(token.stream("lightness").uniform(LIGHTNESS_LO, LIGHTNESS_HI))
    undertone = token.stream("undertone").uniform(-1.0, 1.0, size=2)
    hints = tuple(
        Hint(x=int(x), y=int(y), chroma_a=float(ca), chroma_b=float(cb))
        for y, x, (ca, cb) in zip(ys, xs, chroma)
    )
    return HintSet(
        hints=hints,
        region_lightness=lightness,
        undertone=(float(undertone[0]), float(undertone[1])),
        token_fingerprint=token.fingerprint(),
    )


def count_on_vein(hset: HintSet, mask: BinaryPattern) -> int:
    """Number of hints that land on vein pixels of ``mask``."""
    pos = hset.positions()
    inb = (
        (pos[:, 0] >= 0) & (pos[:, 0] < mask.height)
        & (pos[:, 1] >= 0) & (pos[:, 1] < mask.width)
    )
    count = 0
    if inb.any():
        count = int(mask.data[pos[inb, 0], pos[inb, 1]].sum())
    return count


def align_hints(hset: HintSet, probe_mask: BinaryPattern) -> tuple[HintSet, tuple[int, int]]:
    """Translate the hints by the +/-30 px offset maximizing on-vein count.

    Ties break by smallest |dx|+|dy|, then row-major (dy, dx).  Hints pushed
    out of bounds by the winning offset are dropped; hints landing in bounds
    but off vein are kept.
    """
    h, w = probe_mask.shape
    pos = hset.positions()
    offs = np.arange(-ALIGN_RANGE, ALIGN_RANGE + 1)
    dys, dxs = np.meshgrid(offs, offs, indexing="ij")
    dys = dys.ravel()
    dxs = dxs.ravel()
    ny = pos[None, :, 0] + dys[:, None]
    nx = pos[None, :, 1] + dxs[:, None]
    valid = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
    on_vein = np.zeros(ny.shape, dtype=np.int64)
    mask_data = probe_mask.data
    on_vein[valid] = mask_data[ny[valid], nx[valid]]
    counts = on_vein.sum(axis=1)
    # Lexicographic preference: max count, then min |dx|+|dy|, then (dy, dx).
    order = np.lexsort((dxs, dys, np.abs(dxs) + np.abs(dys), -counts))
    best = order[0]
    dy, dx = int(dys[best]), int(dxs[best])
    moved = []
    for hint in hset.hints:
        x, y = hint.x + dx, hint.y + dy
        if 0 <= y < h and 0 <= x < w:
            moved.append(Hint(x=x, y=y, chroma_a=hint.chroma_a, chroma_b=hint.chroma_b))
    if not moved:
        # The winning offset keeps at least the unshifted in-bounds hints
        # whenever the derivation mask and probe share dims; an empty result
        # can only happen for pathological dim mismatches.
        raise ValueError("alignment pushed every hint out of bounds")
    aligned = HintSet(
        hints=tuple(moved),
        region_lightness=hset.region_lightness,
        undertone=hset.undertone,
        token_fingerprint=hset.token_fingerprint,
    )
    return aligned, (dx, dy)
