"""Run manifests: config snapshot, per-run provenance, hashed file inventory."""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ManifestError

MANIFEST_NAME = "manifest.json"
FORMAT = "distill-audit-run/1"


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    config: dict
    runs: list
    files: dict = field(default_factory=dict)   # relative path -> sha256
    root: str = ""

    @property
    def failures(self):
        return [r for r in self.runs if r.get("status") != "ok"]

    def checkpoint_dirs(self):
        return sorted({p.split("/")[1] for p in self.files if p.startswith("checkpoints/")})

    def count(self, prefix):
        return sum(1 for p in self.files if p.startswith(prefix))

    def to_dict(self):
        return {"format": FORMAT, "config": self.config, "runs": self.runs,
                "files": dict(sorted(self.files.items()))}


def inventory(root, exclude=(MANIFEST_NAME,)):
    root = Path(root)
    out = {}
    for path in sorted(root.rglob("*")):
        rel = path.relative_to(root).as_posix()
        if path.is_file() and rel not in exclude:
            out[rel] = file_sha256(path)
    return out


def write_manifest(manifest, root):
    root = Path(root)
    text = json.dumps(manifest.to_dict(), indent=2, sort_keys=True, allow_nan=True)
    (root / MANIFEST_NAME).write_text(text + "\n", encoding="utf-8")
    manifest.root = str(root)
    return root / MANIFEST_NAME


def load_manifest(root, verify=True):
    """Read ``manifest.json`` under ``root``; verify every listed file's hash."""
    root = Path(root)
    path = root / MANIFEST_NAME if root.is_dir() else root
    root = path.parent
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as err:
        raise ManifestError(f"cannot read manifest {path}: {err.strerror or err}") from None
    except json.JSONDecodeError as err:
        raise ManifestError(f"manifest {path} is not valid JSON: {err}") from None
    if data.get("format") != FORMAT:
        raise ManifestError(f"{path}: unexpected format {data.get('format')!r}")
    manifest = RunManifest(data["config"], data["runs"], data["files"], str(root))
    if verify:
        for rel, digest in manifest.files.items():
            target = root / rel
            if not target.is_file():
                raise ManifestError(f"missing file listed in manifest: {rel}")
            if file_sha256(target) != digest:
                raise ManifestError(f"hash mismatch for {rel}")
    return manifest
