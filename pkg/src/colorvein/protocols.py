"""Evaluation protocols: normal, stolen-token, cross-application/revocability,
and linkability score generation over a trained system."""

from __future__ import annotations

import dataclasses

import numpy as np

from .corpus import MaskCache, SplitDataset, token_for
from .embedding import EmbeddingModel, embed
from .hints import IdentityToken
from .imaging import FeatureVector, quantize_template
from .matching import match_score
from .metrics import ScoreSet
from .pipeline import PipelineParams, protect_image

SCENARIOS = ("normal", "stolen", "cross_app", "revocability", "linkability")

N_EVAL_ALT_TOKENS = 2   # pseudo-impostor tokens per subject
N_LINK_PAIRS = 5        # linkability token pairs per subject


@dataclasses.dataclass(frozen=True)
class RecognitionSystem:
    """A trained extractor plus the pipeline parameters it was built with."""

    model: EmbeddingModel
    params: PipelineParams = PipelineParams()


class ProtocolRunner:
    """Shared caches (masks, protected vectors, templates) across scenarios.

    Deterministic: tokens derive from the seed, iteration orders are sorted,
    and every protected vector is memoized by (subject, sample, token).
    """

    def __init__(self, system: RecognitionSystem, dataset: SplitDataset, seed: int):
        self.system = system
        self.dataset = dataset
        self.seed = seed
        self.cache = MaskCache(dataset, system.params, system.model.arch.input_hw)
        self._vectors: dict[tuple[str, int, str], FeatureVector] = {}
        self._templates: dict[str, FeatureVector] = {}
        self._pipeline_params = dataclasses.replace(system.params, target_hw=None)

    # -- primitives ---------------------------------------------------------
    def token(self, subject: str, application_id: str = "main") -> IdentityToken:
        return token_for(self.seed, subject, application_id)

    def vector(self, subject: str, sample_idx: int, token: IdentityToken) -> FeatureVector:
        key = (subject, sample_idx, token.fingerprint())
        if key not in self._vectors:
            cv = protect_image(
                self.cache.image(subject, sample_idx), token,
                self._pipeline_params, mask=self.cache.mask(subject, sample_idx),
            )
            self._vectors[key] = embed(cv, self.system.model)
        return self._vectors[key]

    def template(self, subject: str, token: IdentityToken | None = None) -> FeatureVector:
        """Mean of the subject's enrollment-sample vectors, re-quantized."""
        token = token or self.token(subject)
        key = f"{subject}\x1f{token.fingerprint()}"
        if key not in self._templates:
            n_enroll = len(self.dataset.enroll_samples(subject))
            vectors = [
                self.vector(subject, i, token).components for i in range(n_enroll)
            ]
            self._templates[key] = quantize_template(np.mean(vectors, axis=0))
        return self._templates[key]

    def _probe_indices(self, subject: str) -> range:
        samples = self.dataset.images[subject]
        return range(len(samples) // 2, len(samples))

    # -- scenarios ------------------------------------------------------------
    def genuine_scores(self) -> np.ndarray:
        scores = []
        for subject in self.dataset.enrolled:
            template = self.template(subject)
            token = self.token(subject)
            for i in self._probe_indices(subject):
                scores.append(match_score(self.vector(subject, i, token), template))
        return np.array(scores)

    def impostor_scores(self) -> np.ndarray:
        """Different subject, each presenting with their own token."""
        scores = []
        for probe_subject in self.dataset.enrolled:
            token = self.token(probe_subject)
            for i in self._probe_indices(probe_subject):
                vec = self.vector(probe_subject, i, token)
                for target in self.dataset.enrolled:
                    if target == probe_subject:
                        continue
                    scores.append(match_score(vec, self.template(target)))
        return np.array(scores)

    def stolen_scores(self) -> np.ndarray:
        """Stolen-pool biometrics colorized under each victim's token."""
        if not self.dataset.stolen_test:
            raise ValueError("stolen scenario needs a stolen_test pool")
        scores = []
        for adversary in self.dataset.stolen_test:
            for i in range(len(self.dataset.images[adversary])):
                for victim in self.dataset.enrolled:
                    token = self.token(victim)
                    vec = self.vector(adversary, i, token)
                    scores.append(match_score(vec, self.template(victim)))
        return np.array(scores)

    def pseudo_impostor_scores(self) -> np.ndarray:
        """Same biometric under fresh application tokens vs the enrolled template."""
        scores = []
        for subject in self.dataset.enrolled:
            template = self.template(subject)
            for alt in range(N_EVAL_ALT_TOKENS):
                token = self.token(subject, f"eval-alt{alt}")
                for i in self._probe_indices(subject):
                    scores.append(match_score(self.vector(subject, i, token), template))
        return np.array(scores)

    def linkability_scores(self) -> tuple[np.ndarray, np.ndarray]:
        """Template-vs-template mated and non-mated cross-token scores."""
        mated = []
        non_mated = []
        enrolled = self.dataset.enrolled
        for pair in range(N_LINK_PAIRS):
            templates_a = {}
            templates_b = {}
            for subject in enrolled:
                tok_a = self.token(subject, f"link{pair}-a")
                tok_b = self.token(subject, f"link{pair}-b")
                templates_a[subject] = self.template(subject, tok_a)
                templates_b[subject] = self.template(subject, tok_b)
            for subject in enrolled:
                mated.append(match_score(templates_a[subject], templates_b[subject]))
            for s1 in enrolled:
                for s2 in enrolled:
                    if s1 != s2:
                        non_mated.append(match_score(templates_a[s1], templates_b[s2]))
        return np.array(mated), np.array(non_mated)

    def run(self, scenario: str) -> ScoreSet:
        if scenario == "normal":
            return ScoreSet(genuine=self.genuine_scores(),
                            impostor=self.impostor_scores())
        if scenario == "stolen":
            return ScoreSet(genuine=self.genuine_scores(),
                            impostor=self.stolen_scores())
        if scenario in ("cross_app", "revocability"):
            return ScoreSet(
                genuine=self.genuine_scores(),
                impostor=self.impostor_scores(),
                pseudo_impostor=self.pseudo_impostor_scores(),
            )
        if scenario == "linkability":
            mated, non_mated = self.linkability_scores()
            return ScoreSet(mated=mated, non_mated=non_mated)
        raise ValueError(f"unknown scenario {scenario!r} (expected one of {SCENARIOS})")


def run_protocol(system: RecognitionSystem, dataset: SplitDataset,
                 scenario: str, seed: int) -> ScoreSet:
    """One-shot protocol run (a fresh runner; see ProtocolRunner to share
    caches across scenarios)."""
    return ProtocolRunner(system, dataset, seed).run(scenario)
