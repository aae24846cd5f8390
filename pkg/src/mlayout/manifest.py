"""Run manifests: one per output directory."""

from __future__ import annotations

import hashlib
import json
import platform
from datetime import datetime, timezone
from pathlib import Path

MANIFEST = "manifest.json"


def sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def versions() -> dict:
    import numba
    import numpy
    import pandas
    import scipy

    from . import __version__

    return {"mlayout": __version__, "python": platform.python_version(), "numpy": numpy.__version__,
            "scipy": scipy.__version__, "pandas": pandas.__version__, "numba": numba.__version__}


def now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out_dir: str | Path, *, command: str, flags: dict, seeds: dict | None = None,
                   inputs=(), started: str | None = None) -> Path:
    """Write ``manifest.json`` listing inputs and every other file under ``out_dir`` with hashes.

    Timestamps live only here, so the reports themselves stay byte-stable.
    """
    out = Path(out_dir)
    outputs = {
        p.relative_to(out).as_posix(): sha256(p)
        for p in sorted(out.rglob("*")) if p.is_file() and p.name != MANIFEST
    }
    manifest = {
        "command": command,
        "flags": flags,
        "seeds": seeds or {},
        "inputs": {str(p): sha256(p) for p in inputs},
        "outputs": outputs,
        "versions": versions(),
        "timestamps": {"started": started or now(), "finished": now()},
    }
    path = out / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n", encoding="utf-8")
    return path
