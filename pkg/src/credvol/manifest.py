"""Reproducibility records for command-line runs.

Every output directory gets exactly one ``manifest.json`` describing
how its contents were produced: the subcommand, the fully resolved
configuration, the seeds actually used, a sha256 digest of every input
file, the package version and the wall-clock duration. Reading a
manifest back re-hashes the recorded inputs, so silent edits to input
data are caught before stale results are trusted.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

MANIFEST_NAME = "manifest.json"

__all__ = ["RunManifest", "MANIFEST_NAME", "sha256_digest", "write_manifest", "read_manifest"]


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: dict
    seeds: dict
    inputs: dict  # input path -> sha256 hex digest
    package_version: str
    duration_seconds: float


def sha256_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(manifest, outdir):
    """Serialize into outdir/manifest.json, replacing any previous one."""
    path = Path(outdir) / MANIFEST_NAME
    with open(path, "w") as fh:
        json.dump(asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_manifest(outdir, verify=True):
    """Load the manifest of a run directory.

    With ``verify`` (the default), every recorded input file is
    re-hashed; a missing file or a digest mismatch raises ValueError,
    since results in the directory can no longer be traced to the
    inputs on disk.
    """
    path = Path(outdir) / MANIFEST_NAME
    with open(path) as fh:
        data = json.load(fh)
    try:
        manifest = RunManifest(**data)
    except TypeError as exc:
        raise ValueError(f"{path}: malformed manifest: {exc}") from exc
    if verify:
        for inp, recorded in manifest.inputs.items():
            if not Path(inp).exists():
                raise ValueError(f"recorded input {inp!r} no longer exists")
            actual = sha256_digest(inp)
            if actual != recorded:
                raise ValueError(
                    f"digest mismatch for {inp!r}: manifest has {recorded[:12]}..., "
                    f"file hashes to {actual[:12]}..."
                )
    return manifest
