"""Seeded synthetic vein imagery with ground truth, plus dataset manifests.

The generator renders random branching vessel trees as dark Gaussian-profile
valleys on a textured background.  It exists so the full recognition and
security evaluation can run at desk scale without any licensed vein dataset;
manifests describe real datasets with the same split semantics but no data
is ever bundled.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import math
from pathlib import Path

import numpy as np

from .imaging import BinaryPattern, GrayImage, load_gray, write_pgm

SPLITS = ("enrolled_train", "enrolled_test", "stolen_train", "stolen_test")

MAX_JITTER_PX = 5.0
MAX_JITTER_DEG = 3.0
NOISE_SIGMA = 0.02


class ManifestError(ValueError):
    """Raised for malformed manifests or split violations."""


def _subkey(*parts) -> int:
    """128-bit stream key derived from the given parts."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "big")


def _rng(*parts) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=_subkey(*parts)))


@dataclasses.dataclass(frozen=True)
class VesselBranch:
    """Polyline skeleton segment with a rendering width in pixels."""

    points: np.ndarray  # (n, 2) float (y, x)
    width: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        object.__setattr__(self, "points", pts)


@dataclasses.dataclass(frozen=True)
class SyntheticSubject:
    subject_id: str
    seed: int
    base_tree: tuple[VesselBranch, ...]
    samples: tuple[GrayImage, ...]
    ground_truth: tuple[BinaryPattern, ...]


def _grow_polyline(rng, start, direction, length, step, wander_deg, dims):
    h, w = dims
    pts = [np.asarray(start, dtype=np.float64)]
    ang = math.atan2(direction[0], direction[1])
    travelled = 0.0
    while travelled < length:
        ang += math.radians(rng.uniform(-wander_deg, wander_deg))
        nxt = pts[-1] + step * np.array([math.sin(ang), math.cos(ang)])
        pts.append(nxt)
        travelled += step
        if not (-0.2 * h <= nxt[0] <= 1.2 * h and -0.2 * w <= nxt[1] <= 1.2 * w):
            break
    return np.array(pts)


def _make_tree(rng, dims) -> tuple[VesselBranch, ...]:
    h, w = dims
    n_branches = int(rng.integers(3, 8))
    scale = min(h, w)
    # Trunk: starts near one border, heads inward.
    side = int(rng.integers(4))
    if side == 0:  # left
        start = (rng.uniform(0.2 * h, 0.8 * h), rng.uniform(0, 0.1 * w))
        base_ang = rng.uniform(-0.5, 0.5)
    elif side == 1:  # right
        start = (rng.uniform(0.2 * h, 0.8 * h), rng.uniform(0.9 * w, w))
        base_ang = math.pi + rng.uniform(-0.5, 0.5)
    elif side == 2:  # top
        start = (rng.uniform(0, 0.1 * h), rng.uniform(0.2 * w, 0.8 * w))
        base_ang = math.pi / 2 + rng.uniform(-0.5, 0.5)
    else:  # bottom
        start = (rng.uniform(0.9 * h, h), rng.uniform(0.2 * w, 0.8 * w))
        base_ang = -math.pi / 2 + rng.uniform(-0.5, 0.5)
    direction = (math.sin(base_ang), math.cos(base_ang))
    trunk_pts = _grow_polyline(
        rng, start, direction, length=rng.uniform(0.9, 1.3) * scale,
        step=scale / 12.0, wander_deg=10.0, dims=dims,
    )
    branches = [VesselBranch(trunk_pts, width=float(rng.uniform(3.0, 7.0)))]
    parents = [trunk_pts]
    for _ in range(n_branches - 1):
        parent = parents[int(rng.integers(len(parents)))]
        if len(parent) < 3:
            continue
        idx = int(rng.integers(1, len(parent) - 1))
        seg = parent[idx + 1] - parent[idx - 1]
        parent_ang = math.atan2(seg[0], seg[1])
        sign = 1.0 if rng.uniform() < 0.5 else -1.0
        child_ang = parent_ang + sign * math.radians(rng.uniform(25.0, 60.0))
        child_pts = _grow_polyline(
            rng, parent[idx], (math.sin(child_ang), math.cos(child_ang)),
            length=rng.uniform(0.35, 0.7) * scale, step=scale / 12.0,
            wander_deg=10.0, dims=dims,
        )
        branches.append(VesselBranch(child_pts, width=float(rng.uniform(3.0, 7.0))))
        parents.append(child_pts)
    return tuple(branches)


def _transform_points(pts, angle_rad, shift, center):
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    rel = pts - center
    rot = np.empty_like(rel)
    rot[:, 0] = s * rel[:, 1] + c * rel[:, 0]
    rot[:, 1] = c * rel[:, 1] - s * rel[:, 0]
    return rot + center + shift


def _segment_depth(depth, gt, p0, p1, width, dims):
    """Stamp one skeleton segment: Gaussian valley profile and dilated mask."""
    h, w = dims
    half = width / 2.0
    sigma = width / 2.355  # FWHM equals the nominal vessel width
    reach = max(3.0 * sigma, half + 1.0)
    y_lo = max(int(math.floor(min(p0[0], p1[0]) - reach)), 0)
    y_hi = min(int(math.ceil(max(p0[0], p1[0]) + reach)) + 1, h)
    x_lo = max(int(math.floor(min(p0[1], p1[1]) - reach)), 0)
    x_hi = min(int(math.ceil(max(p0[1], p1[1]) + reach)) + 1, w)
    if y_lo >= y_hi or x_lo >= x_hi:
        return
    yy, xx = np.mgrid[y_lo:y_hi, x_lo:x_hi]
    d = p1 - p0
    seg_len2 = float(d @ d)
    if seg_len2 < 1e-12:
        dist = np.hypot(yy - p0[0], xx - p0[1])
    else:
        t = ((yy - p0[0]) * d[0] + (xx - p0[1]) * d[1]) / seg_len2
        t = np.clip(t, 0.0, 1.0)
        dist = np.hypot(yy - (p0[0] + t * d[0]), xx - (p0[1] + t * d[1]))
    profile = np.exp(-(dist ** 2) / (2.0 * sigma ** 2))
    np.maximum(depth[y_lo:y_hi, x_lo:x_hi], profile,
               out=depth[y_lo:y_hi, x_lo:x_hi])
    gt[y_lo:y_hi, x_lo:x_hi] |= dist <= half


def _render(tree, dims, rng, contrast, angle_rad, shift):
    h, w = dims
    center = np.array([h / 2.0, w / 2.0])
    depth = np.zeros(dims)
    gt = np.zeros(dims, dtype=bool)
    for branch in tree:
        pts = _transform_points(branch.points, angle_rad, shift, center)
        for i in range(len(pts) - 1):
            _segment_depth(depth, gt, pts[i], pts[i + 1], branch.width, dims)
    # Smooth low-frequency background texture in [0.55, 0.8].
    coarse = rng.uniform(0.0, 1.0, size=(5, 5))
    bg = 0.55 + 0.25 * _upsample(coarse, dims)
    img = bg - contrast * depth
    img = img + rng.normal(0.0, NOISE_SIGMA, size=dims)
    return np.clip(img, 0.0, 1.0), gt


def _upsample(small, dims):
    from .imaging import normalize_roi

    # GrayImage requires at least 8x8: nearest-upsample the coarse grid
    # first, then smooth bilinearly to the target dims.
    reps = (math.ceil(8 / small.shape[0]), math.ceil(8 / small.shape[1]))
    near = np.repeat(np.repeat(small, reps[0], axis=0), reps[1], axis=1)
    return normalize_roi(GrayImage(near), dims).data


def generate_subject(seed: int, n_samples: int, dims: tuple[int, int]) -> SyntheticSubject:
    """Deterministically generate one subject: a vessel tree rendered
    ``n_samples`` times with bounded per-sample affine jitter."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    h, w = int(dims[0]), int(dims[1])
    if h < 64 or w < 64:
        raise ValueError(f"dims must be at least 64x64, got {h}x{w}")
    tree_rng = _rng("tree", seed)
    tree = _make_tree(tree_rng, (h, w))
    contrast = float(tree_rng.uniform(0.28, 0.4))
    samples = []
    truths = []
    for i in range(n_samples):
        s_rng = _rng("sample", seed, i)
        angle = math.radians(s_rng.uniform(-MAX_JITTER_DEG, MAX_JITTER_DEG))
        shift = s_rng.uniform(-MAX_JITTER_PX, MAX_JITTER_PX, size=2)
        img, gt = _render(tree, (h, w), s_rng, contrast, angle, shift)
        samples.append(GrayImage(img))
        truths.append(BinaryPattern(gt.astype(np.uint8)))
    return SyntheticSubject(
        subject_id=f"S{seed:04d}" if seed < 10000 else f"S{seed}",
        seed=seed,
        base_tree=tree,
        samples=tuple(samples),
        ground_truth=tuple(truths),
    )


def subject_seed(master_seed: int, subject_id: str) -> int:
    """Independent per-subject stream seed."""
    return _subkey("subject", master_seed, subject_id)


# ---------------------------------------------------------------------------
# Manifests (Table-2 style split semantics)
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class ManifestEntry:
    path: str
    subject_id: str
    sample_idx: int
    split: str


@dataclasses.dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    split: dict[str, frozenset]

    def subjects(self, split_name: str) -> tuple[str, ...]:
        return tuple(sorted(self.split[split_name]))

    def entries_for(self, subject_id: str) -> tuple[ManifestEntry, ...]:
        return tuple(
            sorted(
                (e for e in self.entries if e.subject_id == subject_id),
                key=lambda e: e.sample_idx,
            )
        )


def _validate_manifest(entries) -> DatasetManifest:
    if not entries:
        raise ManifestError("manifest is empty")
    split_members: dict[str, set] = {name: set() for name in SPLITS}
    seen: dict[str, str] = {}
    for e in entries:
        if e.split not in SPLITS:
            raise ManifestError(f"unknown split {e.split!r} for subject {e.subject_id}")
        prior = seen.get(e.subject_id)
        if prior is not None and prior != e.split:
            raise ManifestError(
                f"subject {e.subject_id} appears in splits {prior!r} and {e.split!r}"
            )
        seen[e.subject_id] = e.split
        split_members[e.split].add(e.subject_id)
    return DatasetManifest(
        entries=tuple(entries),
        split={name: frozenset(members) for name, members in split_members.items()},
    )


def load_manifest(path, check_files: bool = True) -> DatasetManifest:
    """Load and validate a manifest CSV (columns path,subject_id,sample_idx,split)."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    entries = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"path", "subject_id", "sample_idx", "split"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ManifestError(f"manifest must have columns {sorted(required)}")
        for row in reader:
            try:
                sample_idx = int(row["sample_idx"])
            except ValueError as exc:
                raise ManifestError(f"bad sample_idx in row {row!r}") from exc
            entry = ManifestEntry(
                path=row["path"], subject_id=row["subject_id"],
                sample_idx=sample_idx, split=row["split"],
            )
            if check_files and not (path.parent / entry.path).exists():
                raise ManifestError(f"missing file: {entry.path}")
            entries.append(entry)
    return _validate_manifest(entries)


def export_corpus(out_dir, master_seed: int, n_enrolled: int, n_stolen: int,
                  n_samples: int, dims: tuple[int, int]) -> DatasetManifest:
    """Render a corpus to disk: sample PGMs, ground-truth masks, manifest.csv.

    Enrolled subjects carry the ``enrolled_train`` label (their samples are
    split into enrollment/probe halves by sample index at protocol time);
    stolen-pool subjects are split evenly into stolen_train/stolen_test.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    entries = []
    n_stolen_train = n_stolen // 2
    for idx in range(n_enrolled + n_stolen):
        if idx < n_enrolled:
            subject_id, split = f"subj{idx:03d}", "enrolled_train"
        elif idx < n_enrolled + n_stolen_train:
            subject_id, split = f"subj{idx:03d}", "stolen_train"
        else:
            subject_id, split = f"subj{idx:03d}", "stolen_test"
        subj = generate_subject(subject_seed(master_seed, subject_id), n_samples, dims)
        for i, (img, gt) in enumerate(zip(subj.samples, subj.ground_truth)):
            rel = f"images/{subject_id}_{i:02d}.pgm"
            write_pgm(img, out / rel)
            write_pgm(gt, out / f"masks/{subject_id}_{i:02d}.pgm")
            entries.append(ManifestEntry(rel, subject_id, i, split))
    manifest = _validate_manifest(entries)
    with (out / "manifest.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "subject_id", "sample_idx", "split"])
        for e in manifest.entries:
            writer.writerow([e.path, e.subject_id, e.sample_idx, e.split])
    return manifest


def load_corpus_images(manifest: DatasetManifest, root) -> dict[str, list[GrayImage]]:
    """Load every manifest entry, keyed by subject, ordered by sample index."""
    root = Path(root)
    images: dict[str, list[GrayImage]] = {}
    for e in sorted(manifest.entries, key=lambda e: (e.subject_id, e.sample_idx)):
        images.setdefault(e.subject_id, []).append(load_gray(root / e.path))
    return images
