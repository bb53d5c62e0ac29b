"""Dataset splits, token derivation, and training-corpus construction.

Split semantics: enrolled subjects keep all their samples, split per subject
into an enrollment half (sample indices below n/2, used for training and
template building) and a probe half; stolen-pool subjects are disjoint from
the enrolled set, with a train/test partition at subject granularity.
"""

from __future__ import annotations

import dataclasses
import hashlib

import numpy as np

from .embedding import (
    KIND_ANCHOR,
    KIND_CROSS_APP,
    KIND_STOLEN,
    CorpusRow,
    TrainingCorpus,
)
from .hints import IdentityToken
from .imaging import GrayImage, normalize_roi
from .pipeline import PipelineParams, protect_image
from .synth import DatasetManifest, generate_subject, load_corpus_images, subject_seed


def token_for(master_seed: int, subject_id: str, application_id: str) -> IdentityToken:
    """Deterministic 128-bit token for (subject, application)."""
    text = f"token\x1f{master_seed}\x1f{subject_id}\x1f{application_id}"
    seed = int.from_bytes(hashlib.sha256(text.encode()).digest()[:16], "big")
    return IdentityToken(subject_id, application_id, seed)


@dataclasses.dataclass(frozen=True)
class SplitDataset:
    """In-memory corpus with the enrolled / stolen split."""

    images: dict[str, tuple[GrayImage, ...]]
    enrolled: tuple[str, ...]
    stolen_train: tuple[str, ...]
    stolen_test: tuple[str, ...]

    def __post_init__(self):
        pools = (set(self.enrolled), set(self.stolen_train), set(self.stolen_test))
        for i in range(3):
            for j in range(i + 1, 3):
                overlap = pools[i] & pools[j]
                if overlap:
                    raise ValueError(f"subject pools overlap: {sorted(overlap)}")
        for subject in (*self.enrolled, *self.stolen_train, *self.stolen_test):
            if subject not in self.images:
                raise ValueError(f"no images for subject {subject!r}")

    def enroll_samples(self, subject: str) -> tuple[GrayImage, ...]:
        samples = self.images[subject]
        return samples[: len(samples) // 2]

    def probe_samples(self, subject: str) -> tuple[GrayImage, ...]:
        samples = self.images[subject]
        return samples[len(samples) // 2 :]


def synthetic_dataset(master_seed: int, n_enrolled: int, n_stolen: int,
                      n_samples: int, dims: tuple[int, int]) -> SplitDataset:
    """Generate a fully in-memory synthetic split dataset."""
    images: dict[str, tuple[GrayImage, ...]] = {}
    names = [f"subj{i:03d}" for i in range(n_enrolled + n_stolen)]
    for name in names:
        subj = generate_subject(subject_seed(master_seed, name), n_samples, dims)
        images[name] = subj.samples
    n_stolen_train = n_stolen // 2
    return SplitDataset(
        images=images,
        enrolled=tuple(names[:n_enrolled]),
        stolen_train=tuple(names[n_enrolled : n_enrolled + n_stolen_train]),
        stolen_test=tuple(names[n_enrolled + n_stolen_train :]),
    )


def dataset_from_manifest(manifest: DatasetManifest, root) -> SplitDataset:
    """Load a manifest-described corpus from disk."""
    images = {
        subject: tuple(samples)
        for subject, samples in load_corpus_images(manifest, root).items()
    }
    enrolled = manifest.subjects("enrolled_train") + manifest.subjects("enrolled_test")
    return SplitDataset(
        images=images,
        enrolled=enrolled,
        stolen_train=manifest.subjects("stolen_train"),
        stolen_test=manifest.subjects("stolen_test"),
    )


class MaskCache:
    """Per-(subject, sample) segmentation cache shared across tokens."""

    def __init__(self, dataset: SplitDataset, params: PipelineParams,
                 input_hw: tuple[int, int]):
        self.dataset = dataset
        self.params = params
        self.input_hw = input_hw
        self._masks: dict[tuple[str, int], object] = {}
        self._resized: dict[tuple[str, int], GrayImage] = {}

    def image(self, subject: str, sample_idx: int) -> GrayImage:
        key = (subject, sample_idx)
        if key not in self._resized:
            img = self.dataset.images[subject][sample_idx]
            self._resized[key] = normalize_roi(img, self.input_hw)
        return self._resized[key]

    def mask(self, subject: str, sample_idx: int):
        key = (subject, sample_idx)
        if key not in self._masks:
            from .extraction import segment

            self._masks[key] = segment(self.image(subject, sample_idx),
                                       self.params.methods)
        return self._masks[key]


def build_training_corpus(
    dataset: SplitDataset,
    input_hw: tuple[int, int],
    params: PipelineParams,
    master_seed: int,
    n_cross_alternates: int = 2,
    cache: MaskCache | None = None,
) -> TrainingCorpus:
    """Colorize every training variant once.

    Anchors: each enrolled subject's enrollment samples under the subject's
    main token.  Cross-application negatives: the same samples under
    ``n_cross_alternates`` training-only alternate tokens.  Stolen negatives:
    stolen_train enrollment samples colorized under each enrolled subject's
    main token.
    """
    if not dataset.stolen_train:
        raise ValueError("training needs a nonempty stolen_train pool")
    if len(dataset.enrolled) < 2:
        raise ValueError("training needs at least two enrolled subjects")
    cache = cache or MaskCache(dataset, params, input_hw)
    pipeline_params = dataclasses.replace(params, target_hw=None)
    inputs: list[np.ndarray] = []
    rows: list[CorpusRow] = []

    def add_row(kind, class_id, subject, sample_idx, token):
        img = cache.image(subject, sample_idx)
        mask = cache.mask(subject, sample_idx)
        cv = protect_image(img, token, pipeline_params, mask=mask)
        inputs.append(cv.as_tensor())
        rows.append(CorpusRow(
            kind=kind, class_id=class_id, biometric_subject=subject,
            sample_idx=sample_idx, token_fingerprint=token.fingerprint(),
        ))

    enrolled = dataset.enrolled
    for class_id, subject in enumerate(enrolled):
        main = token_for(master_seed, subject, "main")
        n_enroll = len(dataset.enroll_samples(subject))
        for i in range(n_enroll):
            add_row(KIND_ANCHOR, class_id, subject, i, main)
        for alt in range(n_cross_alternates):
            alt_token = token_for(master_seed, subject, f"train-alt{alt}")
            for i in range(n_enroll):
                add_row(KIND_CROSS_APP, class_id, subject, i, alt_token)
        for stolen_subject in dataset.stolen_train:
            n_stolen = len(dataset.enroll_samples(stolen_subject))
            for i in range(n_stolen):
                add_row(KIND_STOLEN, class_id, stolen_subject, i, main)
    return TrainingCorpus(
        inputs=np.stack(inputs),
        rows=tuple(rows),
        class_names=tuple(enrolled),
        enrolled_subjects=frozenset(enrolled),
        stolen_subjects=frozenset(dataset.stolen_train) | frozenset(dataset.stolen_test),
    )
