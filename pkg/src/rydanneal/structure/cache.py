"""On-disk cache of molecular curves.

Each entry is ``<key>.npz`` (arrays) plus ``<key>.json`` (metadata and the
sha256 of the npz). The key is the sha256 of the canonical metadata, so a
hit requires an exact metadata match.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path

import numpy as np

from .pair import MolecularCurve

log = logging.getLogger(__name__)

CACHE_ENV = "RYDANNEAL_CACHE_DIR"


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "rydanneal" / "curves"


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def metadata_key(meta: dict) -> str:
    return hashlib.sha256(canonical(meta).encode()).hexdigest()


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class CurveCache:
    def __init__(self, root: Path | str | None = None):
        self.root = Path(root) if root is not None else default_cache_dir()

    def _paths(self, key):
        return self.root / f"{key}.npz", self.root / f"{key}.json"

    def store(self, meta: dict, curve: MolecularCurve) -> str:
        self.root.mkdir(parents=True, exist_ok=True)
        key = metadata_key(meta)
        npz, js = self._paths(key)
        tmp = npz.with_suffix(".tmp.npz")
        np.savez(tmp, r_grid=curve.r_grid, energies=curve.energies, overlaps=curve.overlaps,
                 labels=np.array(curve.labels, dtype=str))
        os.replace(tmp, npz)
        record = {"key": key, "metadata": meta, "npz_sha256": _file_hash(npz),
                  "theta": curve.theta, "phi": curve.phi, "b_field": curve.b_field}
        tmp_js = js.with_suffix(".tmp")
        tmp_js.write_text(json.dumps(record, indent=2, sort_keys=True))
        os.replace(tmp_js, js)
        return key

    def load(self, meta: dict) -> MolecularCurve | None:
        """Return the cached curve, or None on a miss. Corrupt entries are never reused."""
        key = metadata_key(meta)
        npz, js = self._paths(key)
        if not (npz.exists() and js.exists()):
            return None
        problems = self._check(key)
        if problems:
            log.warning("cache entry %s is corrupt (%s); recomputing", key[:12], "; ".join(problems))
            return None
        record = json.loads(js.read_text())
        with np.load(npz) as data:
            return MolecularCurve(data["r_grid"], data["energies"], data["overlaps"], record["theta"],
                                  record["phi"], record["b_field"], [str(x) for x in data["labels"]])

    def _check(self, key: str) -> list[str]:
        npz, js = self._paths(key)
        problems = []
        try:
            record = json.loads(js.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            return [f"unreadable metadata: {exc}"]
        if metadata_key(record.get("metadata", {})) != key:
            problems.append("metadata hash mismatch")
        if not npz.exists():
            problems.append("missing array file")
        elif _file_hash(npz) != record.get("npz_sha256"):
            problems.append("array file hash mismatch")
        return problems

    def keys(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.stem for p in self.root.glob("*.json"))

    def list(self) -> list[dict]:
        out = []
        for key in self.keys():
            try:
                meta = json.loads(self._paths(key)[1].read_text()).get("metadata", {})
            except (OSError, json.JSONDecodeError):
                meta = {}
            out.append({"key": key, "metadata": meta})
        return out

    def verify(self) -> dict[str, list[str]]:
        """Map of key to problems; an empty list means the entry is intact."""
        return {key: self._check(key) for key in self.keys()}

    def clear(self) -> int:
        n = 0
        for key in self.keys():
            for p in self._paths(key):
                if p.exists():
                    p.unlink()
            n += 1
        return n
