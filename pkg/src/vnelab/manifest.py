"""Run manifests: canonical run descriptions hashed into every output.

A manifest plus the scenario file pins everything a run depends on, so
equal manifests are a promise of byte-equal outputs.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__


def build_manifest(kind: str, **fields) -> dict:
    """Assemble a manifest for one run kind; fields must be JSON-ready."""
    manifest = {"tool": "vnelab", "version": __version__, "kind": kind}
    manifest.update(fields)
    return manifest


def manifest_hash(manifest: dict) -> str:
    """sha256 over the canonical JSON form (sorted keys, tight separators)."""
    canonical = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def file_fingerprint(path: str | Path) -> str:
    """sha256 of a file's bytes.

    Manifests reference input files by content, not by path, so moving a
    scenario or checkpoint does not change what a run declares it ran on.
    """
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(manifest: dict, path: str | Path) -> str:
    """Write the manifest with its own hash added; returns the hash."""
    digest = manifest_hash(manifest)
    payload = dict(manifest)
    payload["hash"] = digest
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return digest
