"""Append-only JSON-lines template store and token vault.

Both files start with a format-version header line.  Template components
are encoded as 4-decimal fixed-point strings, which round-trips the
quantized values bit-exactly.  Revocation appends a tombstone record; the
revoked template stays on disk for audit but is excluded from matching.
"""

from __future__ import annotations

import dataclasses
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .hints import IdentityToken
from .imaging import FeatureVector

STORE_FORMAT = "colorvein-store"
VAULT_FORMAT = "colorvein-vault"
FORMAT_VERSION = 1


class StoreError(RuntimeError):
    """Raised for malformed files, missing records, or duplicate enrollment."""


@dataclasses.dataclass(frozen=True)
class TemplateRecord:
    identity_id: str
    application_id: str
    token_fingerprint: str
    template: FeatureVector
    created_at: str
    version: int = FORMAT_VERSION

    def key(self) -> tuple[str, str]:
        return (self.identity_id, self.application_id)


def _encode_template(fv: FeatureVector) -> list[str]:
    return [f"{v:.4f}" for v in fv.components]


def _decode_template(values) -> FeatureVector:
    return FeatureVector(np.array([float(v) for v in values]))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class _JsonLinesFile:
    def __init__(self, path, format_name: str):
        self.path = Path(path)
        self.format_name = format_name

    def _header(self) -> dict:
        return {"format": self.format_name, "version": FORMAT_VERSION}

    def _read_lines(self) -> list[dict]:
        if not self.path.exists():
            return []
        lines = self.path.read_text().splitlines()
        if not lines:
            return []
        header = json.loads(lines[0])
        if header.get("format") != self.format_name:
            raise StoreError(
                f"{self.path}: expected format {self.format_name!r}, "
                f"got {header.get('format')!r}"
            )
        if header.get("version") != FORMAT_VERSION:
            raise StoreError(f"{self.path}: unsupported version {header.get('version')}")
        return [json.loads(line) for line in lines[1:] if line.strip()]

    def _append(self, record: dict) -> None:
        new_file = not self.path.exists() or self.path.stat().st_size == 0
        with self.path.open("a") as fh:
            if new_file:
                fh.write(json.dumps(self._header(), sort_keys=True) + "\n")
            fh.write(json.dumps(record, sort_keys=True) + "\n")


class TemplateStore(_JsonLinesFile):
    """Single-writer append-only store; reads see a consistent snapshot."""

    def __init__(self, path):
        super().__init__(path, STORE_FORMAT)

    def append(self, record: TemplateRecord) -> None:
        self._append({
            "record_type": "template",
            "identity_id": record.identity_id,
            "application_id": record.application_id,
            "token_fingerprint": record.token_fingerprint,
            "template": _encode_template(record.template),
            "created_at": record.created_at,
            "version": record.version,
        })

    def tombstone(self, identity_id: str, application_id: str) -> None:
        self._append({
            "record_type": "tombstone",
            "identity_id": identity_id,
            "application_id": application_id,
            "created_at": _now(),
        })

    def _replay(self) -> dict[tuple[str, str], TemplateRecord]:
        live: dict[tuple[str, str], TemplateRecord] = {}
        for raw in self._read_lines():
            key = (raw["identity_id"], raw["application_id"])
            if raw["record_type"] == "template":
                live[key] = TemplateRecord(
                    identity_id=raw["identity_id"],
                    application_id=raw["application_id"],
                    token_fingerprint=raw["token_fingerprint"],
                    template=_decode_template(raw["template"]),
                    created_at=raw["created_at"],
                    version=raw["version"],
                )
            elif raw["record_type"] == "tombstone":
                live.pop(key, None)
        return live

    def fetch(self, identity_id: str, application_id: str) -> TemplateRecord:
        record = self._replay().get((identity_id, application_id))
        if record is None:
            raise StoreError(
                f"no live template for ({identity_id!r}, {application_id!r})"
            )
        return record

    def has_live(self, identity_id: str, application_id: str) -> bool:
        return (identity_id, application_id) in self._replay()

    def live_records(self) -> list[TemplateRecord]:
        return sorted(self._replay().values(), key=lambda r: r.key())


class TokenVault(_JsonLinesFile):
    """One JSON record per token: identity, application, 128-bit seed, m."""

    def __init__(self, path):
        super().__init__(path, VAULT_FORMAT)

    def add(self, token: IdentityToken, m: int) -> None:
        self._append({
            "identity_id": token.identity_id,
            "application_id": token.application_id,
            "seed": f"{token.seed:032x}",
            "m": int(m),
        })

    def _replay(self) -> dict[tuple[str, str], tuple[IdentityToken, int]]:
        latest: dict[tuple[str, str], tuple[IdentityToken, int]] = {}
        for raw in self._read_lines():
            token = IdentityToken(
                identity_id=raw["identity_id"],
                application_id=raw["application_id"],
                seed=int(raw["seed"], 16),
            )
            latest[(token.identity_id, token.application_id)] = (token, int(raw["m"]))
        return latest

    def fetch(self, identity_id: str, application_id: str) -> tuple[IdentityToken, int]:
        entry = self._replay().get((identity_id, application_id))
        if entry is None:
            raise StoreError(f"no token for ({identity_id!r}, {application_id!r})")
        return entry
