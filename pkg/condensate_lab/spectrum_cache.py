"""
Spectrum Cache - JSON documents of bulk spectra keyed by parameter fingerprint
One file per fingerprint; writers go through a temp file and an atomic rename,
so concurrent readers never see a partial document.
"""

import hashlib
import json
import logging
import os
import tempfile
import threading
from pathlib import Path
from typing import Optional, Union

from .bulk_spectrum import Spectrum, WireParams, fd2d_spectrum, separable_spectrum
from .config import CACHE_DIR

logger = logging.getLogger(__name__)

METHODS = ('separable', 'fd2d')


def spectrum_fingerprint(wire: WireParams, method: str, solver_params: dict) -> str:
    """sha256 over the canonical JSON of (wire, method, solver params); floats kept bit-exact."""
    doc = {'wire': wire.to_dict(), 'method': method, 'params': dict(sorted(solver_params.items()))}
    canonical = json.dumps(doc, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _compute(wire: WireParams, method: str, solver_params: dict) -> Spectrum:
    if method == 'separable':
        return separable_spectrum(wire, solver_params['cutoff_energy'])
    if method == 'fd2d':
        return fd2d_spectrum(wire, solver_params['h'], solver_params['n_lowest'])
    raise ValueError(f"Unknown bulk method: {method}")


class SpectrumCache:
    """Directory-backed cache of bulk spectra."""

    def __init__(self, cache_dir: Optional[Union[str, Path]] = None):
        self.cache_dir = Path(cache_dir) if cache_dir is not None else CACHE_DIR
        self.hits = 0
        self.misses = 0
        self.recomputed = 0
        self._lock = threading.Lock()

    def path_for(self, fingerprint: str) -> Path:
        return self.cache_dir / f"{fingerprint}.json"

    def _load(self, path: Path, fingerprint: str) -> Optional[Spectrum]:
        if not path.exists():
            return None
        try:
            with open(path, 'r', encoding='utf-8') as f:
                doc = json.load(f)
            if doc.get('fingerprint') != fingerprint:
                raise ValueError("fingerprint mismatch")
            return Spectrum.from_dict(doc)
        except (OSError, ValueError, KeyError, TypeError) as e:
            logger.warning(f"Corrupt cache entry {path.name} ({e}); recomputing")
            with self._lock:
                self.recomputed += 1
            return None

    def _save(self, path: Path, fingerprint: str, wire: WireParams,
              method: str, solver_params: dict, spectrum: Spectrum):
        doc = {
            'fingerprint': fingerprint,
            'params': {'wire': wire.to_dict(), 'method': method, 'solver': solver_params},
            **spectrum.to_dict(),
        }
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix='.tmp-', suffix='.json', dir=self.cache_dir)
        try:
            with os.fdopen(fd, 'w', encoding='utf-8') as f:
                json.dump(doc, f, sort_keys=True)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp_name, path)
        except OSError:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise

    def fetch_or_compute(self, wire: WireParams, method: str, **solver_params) -> Spectrum:
        """
        Return the cached spectrum for these exact parameters, or compute,
        persist and return it.
        """
        if method not in METHODS:
            raise ValueError(f"Unknown bulk method: {method}")
        fingerprint = spectrum_fingerprint(wire, method, solver_params)
        path = self.path_for(fingerprint)

        cached = self._load(path, fingerprint)
        if cached is not None:
            with self._lock:
                self.hits += 1
            logger.debug(f"Cache hit {fingerprint[:12]} ({method}, L={wire.L})")
            return cached

        with self._lock:
            self.misses += 1
        spectrum = _compute(wire, method, solver_params)
        spectrum.metadata['fingerprint'] = fingerprint
        self._save(path, fingerprint, wire, method, solver_params, spectrum)
        logger.info(f"Cached {method} spectrum {fingerprint[:12]} (L={wire.L}, {len(spectrum)} levels)")
        return spectrum

    def clear(self) -> int:
        """Delete every cached document; returns the number removed."""
        if not self.cache_dir.exists():
            return 0
        removed = 0
        for path in self.cache_dir.glob('*.json'):
            path.unlink()
            removed += 1
        logger.info(f"Removed {removed} cached spectra from {self.cache_dir}")
        return removed

    def get_stats(self) -> dict:
        with self._lock:
            return {
                'cache_dir': str(self.cache_dir),
                'hits': self.hits,
                'misses': self.misses,
                'recomputed': self.recomputed,
            }


def spectrum_cache_fetch_or_compute(wire: WireParams, method: str, solver_params: dict,
                                    cache_dir: Optional[Union[str, Path]] = None) -> Spectrum:
    return SpectrumCache(cache_dir).fetch_or_compute(wire, method, **solver_params)
