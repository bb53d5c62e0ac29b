"""Cosine matching, enrollment, verification, and revocation/reissue."""

from __future__ import annotations

import math

import numpy as np

from .embedding import EmbeddingModel, embed
from .hints import IdentityToken
from .imaging import FeatureVector, GrayImage, quantize_template
from .pipeline import PipelineParams, protect_image
from .store import StoreError, TemplateRecord, TemplateStore, TokenVault, _now


def match_score(a: FeatureVector, b: FeatureVector) -> float:
    """Cosine similarity of two templates.

    A zero-norm template signals a broken pipeline and is an error rather
    than a score of 0.
    """
    va, vb = a.components, b.components
    num = float(np.dot(va, vb))
    na2 = float(np.dot(va, va))
    nb2 = float(np.dot(vb, vb))
    if na2 == 0.0 or nb2 == 0.0:
        raise ValueError("cannot match a zero-norm template")
    return num / math.sqrt(na2 * nb2)


def protected_template(
    img: GrayImage,
    token: IdentityToken,
    model: EmbeddingModel,
    params: PipelineParams,
    mask=None,
) -> FeatureVector:
    """Full protection path for one image: pipeline then embedding."""
    effective = params
    if params.target_hw is None:
        effective = PipelineParams(
            m=params.m, target_hw=model.arch.input_hw, methods=params.methods,
            lam_hint=params.lam_hint, lam_tone=params.lam_tone, sigma=params.sigma,
        )
    cv = protect_image(img, token, effective, mask=mask)
    return embed(cv, model)


def enroll(
    identity_id: str,
    images,
    token: IdentityToken,
    model: EmbeddingModel,
    store: TemplateStore,
    vault: TokenVault | None = None,
    params: PipelineParams = PipelineParams(),
) -> TemplateRecord:
    """Enroll one identity from one or more samples.

    The stored template is the re-quantized mean of the per-sample vectors.
    """
    images = list(images)
    if not images:
        raise ValueError("enrollment needs at least one image")
    if token.identity_id != identity_id:
        raise ValueError("token identity does not match the enrollment identity")
    if store.has_live(identity_id, token.application_id):
        raise StoreError(
            f"({identity_id!r}, {token.application_id!r}) already has a live record"
        )
    vectors = [protected_template(img, token, model, params) for img in images]
    mean = np.mean([v.components for v in vectors], axis=0)
    record = TemplateRecord(
        identity_id=identity_id,
        application_id=token.application_id,
        token_fingerprint=token.fingerprint(),
        template=quantize_template(mean),
        created_at=_now(),
    )
    store.append(record)
    if vault is not None:
        vault.add(token, params.m)
    return record


def verify(
    probe: GrayImage,
    identity_id: str,
    application_id: str,
    threshold: float,
    model: EmbeddingModel,
    store: TemplateStore,
    vault: TokenVault,
    params: PipelineParams = PipelineParams(),
) -> tuple[bool, float]:
    """Score a probe against the claimed identity's template."""
    record = store.fetch(identity_id, application_id)
    token, m = vault.fetch(identity_id, application_id)
    if token.fingerprint() != record.token_fingerprint:
        raise StoreError("vault token does not match the enrolled fingerprint")
    effective = PipelineParams(
        m=m, target_hw=params.target_hw, methods=params.methods,
        lam_hint=params.lam_hint, lam_tone=params.lam_tone, sigma=params.sigma,
    )
    vector = protected_template(probe, token, model, effective)
    score = match_score(vector, record.template)
    return score >= threshold, score


def revoke_reissue(
    identity_id: str,
    application_id: str,
    new_seed: int,
    store: TemplateStore,
    vault: TokenVault,
    images,
    model: EmbeddingModel,
    params: PipelineParams = PipelineParams(),
) -> TemplateRecord:
    """Tombstone the live record and enroll a fresh token with ``new_seed``.

    Enrollment images must be re-presented (the store never retains them).
    """
    store.fetch(identity_id, application_id)  # raises if nothing to revoke
    old_token, _ = vault.fetch(identity_id, application_id)
    if old_token.seed == new_seed:
        raise ValueError("new seed must differ from the revoked token's seed")
    store.tombstone(identity_id, application_id)
    new_token = IdentityToken(identity_id, application_id, new_seed)
    return enroll(identity_id, images, new_token, model, store, vault, params)
