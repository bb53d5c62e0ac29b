"""Composition of the protection stages: image + token -> protected ColorVein.

Both enrollment and verification run the same path: segment the probe,
derive the token's hints on the probe's own mask, run the alignment search
against that mask, build the token lightness, propagate chroma, compose.
Verification has only the probe's mask available, so alignment always
targets it.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .colorize import (
    ColorVein,
    background_lightness_for,
    build_lightness,
    colorize,
    compose_lab,
)
from .extraction import ExtractionMethod, segment
from .hints import IdentityToken, align_hints, derive_hints
from .imaging import GrayImage, normalize_roi


@dataclasses.dataclass(frozen=True)
class PipelineParams:
    """Everything the protection pipeline needs besides the token."""

    m: int = 10
    target_hw: tuple[int, int] | None = None
    methods: tuple[ExtractionMethod, ...] | None = None
    lam_hint: float = 100.0
    lam_tone: float = 0.1
    sigma: float = 0.1


def protect_image(
    img: GrayImage,
    token: IdentityToken,
    params: PipelineParams = PipelineParams(),
    mask=None,
) -> ColorVein:
    """Run segmentation, hint derivation/alignment, and colorization.

    ``mask`` short-circuits segmentation when the caller already has it
    (protocol runs segment each probe once and reuse the mask across tokens).
    """
    if params.target_hw is not None:
        img = normalize_roi(img, params.target_hw)
    if mask is None:
        mask = segment(img, params.methods)
    if mask.shape != img.shape:
        raise ValueError("mask dims differ from image dims")
    hset = derive_hints(token, mask, params.m)
    aligned, offset = align_hints(hset, mask)
    lightness = build_lightness(
        mask,
        (aligned.region_lightness,
         background_lightness_for(aligned.region_lightness)),
    )
    chroma = colorize(
        lightness, aligned, mask=mask,
        lam_hint=params.lam_hint, lam_tone=params.lam_tone, sigma=params.sigma,
    )
    return compose_lab(lightness, chroma, aligned, offset)
