"""Brute-force and false-accept attack simulations against stored templates."""

from __future__ import annotations

import dataclasses
import hashlib

import numpy as np

from .imaging import (
    TEMPLATE_LEN,
    TEMPLATE_MAX,
    TEMPLATE_SCALE,
    FeatureVector,
)
from .matching import match_score
from .store import TemplateRecord

_GRID_MAX = int(TEMPLATE_MAX) * TEMPLATE_SCALE  # 100000: grid is [-10, 10] at 1e-4


def _rng(*parts) -> np.random.Generator:
    text = "\x1f".join(str(p) for p in parts)
    key = int.from_bytes(hashlib.sha256(text.encode()).digest()[:16], "big")
    return np.random.Generator(np.random.Philox(key=key))


@dataclasses.dataclass(frozen=True)
class AttackReport:
    attack_kind: str
    n_probes: int
    scores: np.ndarray
    seed: int
    known_fraction: float | None = None

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.shape != (self.n_probes,):
            raise ValueError("scores length must equal n_probes")
        object.__setattr__(self, "scores", scores)

    def acceptance_rate_at(self, tau: float) -> float:
        rate = float((self.scores >= tau).mean())
        return rate

    def to_dict(self) -> dict:
        out = {
            "attack_kind": self.attack_kind,
            "n_probes": self.n_probes,
            "seed": self.seed,
            "score_mean": float(self.scores.mean()),
            "score_max": float(self.scores.max()),
        }
        if self.known_fraction is not None:
            out["known_fraction"] = self.known_fraction
        return out


def _target_vector(target) -> FeatureVector:
    if isinstance(target, TemplateRecord):
        return target.template
    if isinstance(target, FeatureVector):
        return target
    raise TypeError("target must be a TemplateRecord or FeatureVector")


def _uniform_grid(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform draws over the quantized template grid."""
    return rng.integers(-_GRID_MAX, _GRID_MAX + 1, size=shape) / TEMPLATE_SCALE


def _score_all(probes: np.ndarray, target: FeatureVector) -> np.ndarray:
    return np.array(
        [match_score(FeatureVector(p), target) for p in probes]
    )


def brute_force_attack(target, n: int, seed: int) -> AttackReport:
    """Score ``n`` templates drawn uniformly over the quantized grid."""
    if n < 1:
        raise ValueError("n must be >= 1")
    fv = _target_vector(target)
    rng = _rng("brute-force", seed)
    probes = _uniform_grid(rng, (n, TEMPLATE_LEN))
    return AttackReport(
        attack_kind="brute_force", n_probes=n, scores=_score_all(probes, fv), seed=seed
    )


def false_accept_attack(target, known_fraction: float, n: int, seed: int,
                        fixed_positions: bool = False) -> AttackReport:
    """Probes copy floor(N * 64) target components and randomize the rest.

    Known-component positions are drawn per probe by default; with
    ``fixed_positions`` one position set is shared by every probe (an
    adversary with located leakage).
    """
    if not 0.0 <= known_fraction <= 1.0:
        raise ValueError("known_fraction must lie in [0, 1]")
    if n < 1:
        raise ValueError("n must be >= 1")
    fv = _target_vector(target)
    k = int(known_fraction * TEMPLATE_LEN)
    rng = _rng("false-accept", seed)
    probes = _uniform_grid(rng, (n, TEMPLATE_LEN))
    if k > 0:
        if fixed_positions:
            positions = rng.choice(TEMPLATE_LEN, size=k, replace=False)
            probes[:, positions] = fv.components[positions]
        else:
            for i in range(n):
                positions = rng.choice(TEMPLATE_LEN, size=k, replace=False)
                probes[i, positions] = fv.components[positions]
    return AttackReport(
        attack_kind="false_accept", n_probes=n, scores=_score_all(probes, fv),
        seed=seed, known_fraction=known_fraction,
    )
