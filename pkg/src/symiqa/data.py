"""Dataset records, loaders and the on-disk feature cache."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .aggd import FEATURE_NAMES, featurize
from .features import EXTRACTOR_CONSTANTS, extract_all
from .imaging import load_image

log = logging.getLogger(__name__)

CACHE_SCHEMA = "symiqa-feature-cache/1"
MANIFEST_COLUMNS = ("ref_path", "dist_path", "mos", "reference_id", "distortion_id", "level")
TID_NAME = re.compile(r"^(i\d+)_(\d+)_(\d+)\.bmp$", re.IGNORECASE)
TID_LISTING = "mos_with_names.txt"


class IngestionError(ValueError):
    """A listing or manifest cannot be loaded as a whole."""


class CacheError(ValueError):
    """A feature cache is stale, malformed or incomplete."""


@dataclass(frozen=True)
class PairRecord:
    ref_path: str
    dist_path: str
    mos: float
    reference_id: str
    distortion_id: int
    level: int

    @property
    def key(self) -> str:
        return f"{self.reference_id}/{Path(self.dist_path).name}"


def _check_record(rec: PairRecord, where: str) -> None:
    if not math.isfinite(rec.mos):
        raise IngestionError(f"{where}: mos is not finite")
    if rec.distortion_id < 1:
        raise IngestionError(f"{where}: distortion_id must be >= 1")
    for path in (rec.ref_path, rec.dist_path):
        if not os.path.isfile(path):
            raise IngestionError(f"{where}: missing image file {path}")


def _check_unique(records: Sequence[PairRecord]) -> None:
    seen: set[str] = set()
    for rec in records:
        if rec.key in seen:
            raise IngestionError(f"duplicate pair key {rec.key}")
        seen.add(rec.key)


# --- TID2013 -------------------------------------------------------------------

def parse_tid_name(name: str) -> tuple[str, int, int]:
    """``"i03_07_1.bmp"`` -> ``("i03", 7, 1)``; case-insensitive."""
    m = TID_NAME.match(name.strip())
    if m is None:
        raise ValueError(f"not a TID2013 image name: {name!r}")
    return m.group(1).lower(), int(m.group(2)), int(m.group(3))


def _index_dir(path: Path) -> dict[str, Path]:
    if not path.is_dir():
        raise IngestionError(f"missing image directory {path}")
    return {p.name.lower(): p for p in path.iterdir() if p.is_file()}


def _find_dir(root: Path, name: str) -> Path:
    for p in root.iterdir():
        if p.is_dir() and p.name.lower() == name:
            return p
    raise IngestionError(f"missing directory {name!r} under {root}")


def load_tid2013(root) -> list[PairRecord]:
    """Parse ``mos_with_names.txt`` and pair every distorted image with its
    reference. File names are matched case-insensitively; the casing found
    on disk is logged."""
    root = Path(root)
    listing = next((p for p in root.iterdir() if p.name.lower() == TID_LISTING), None) if root.is_dir() else None
    if listing is None:
        raise IngestionError(f"no {TID_LISTING} under {root}")
    refs = _index_dir(_find_dir(root, "reference_images"))
    dists = _index_dir(_find_dir(root, "distorted_images"))
    if refs:
        sample = next(iter(sorted(p.name for p in refs.values())))
        log.info("reference file naming convention: %s", "upper" if sample[:1].isupper() else "lower")

    records = []
    with open(listing, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            try:
                if len(parts) != 2:
                    raise ValueError("expected '<mos> <image-name>'")
                mos = float(parts[0])
                ref_id, dist_id, level = parse_tid_name(parts[1])
            except ValueError as exc:
                raise IngestionError(f"{listing.name} line {lineno}: {exc}") from None
            dist_path = dists.get(parts[1].lower())
            if dist_path is None:
                raise IngestionError(f"{listing.name} line {lineno}: missing image file {parts[1]}")
            ref_path = refs.get(f"{ref_id}.bmp")
            if ref_path is None:
                raise IngestionError(f"{listing.name} line {lineno}: missing reference {ref_id}.bmp")
            rec = PairRecord(str(ref_path), str(dist_path), mos, ref_id, dist_id, level)
            _check_record(rec, f"{listing.name} line {lineno}")
            records.append(rec)
    _check_unique(records)
    return records


# --- manifests -------------------------------------------------------------

def load_manifest(path) -> list[PairRecord]:
    """Read a CSV manifest with columns ``MANIFEST_COLUMNS``. Relative image
    paths resolve against the manifest's directory."""
    path = Path(path)
    base = Path(os.path.abspath(path.parent))
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in MANIFEST_COLUMNS if c not in (reader.fieldnames or ())]
        if missing:
            raise IngestionError(f"{path.name}: missing columns {', '.join(missing)}")
        for rowno, row in enumerate(reader, 1):
            where = f"{path.name} row {rowno}"
            try:
                rec = PairRecord(
                    os.path.normpath(base / row["ref_path"]),
                    os.path.normpath(base / row["dist_path"]),
                    float(row["mos"]),
                    row["reference_id"],
                    int(row["distortion_id"]),
                    int(row["level"]),
                )
            except (TypeError, ValueError) as exc:
                raise IngestionError(f"{where}: {exc}") from None
            _check_record(rec, where)
            records.append(rec)
    _check_unique(records)
    return records


def write_manifest(path, records: Iterable[PairRecord]) -> None:
    """Write records with paths relative to the manifest location when possible."""
    path = Path(path)
    base = os.path.abspath(path.parent)

    def rel(p: str) -> str:
        try:
            return os.path.relpath(os.path.abspath(p), base)
        except ValueError:  # different drive on Windows
            return os.path.abspath(p)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for r in records:
            w.writerow([rel(r.ref_path), rel(r.dist_path), repr(float(r.mos)),
                        r.reference_id, r.distortion_id, r.level])


def load_records(source: str) -> list[PairRecord]:
    """A TID2013 root directory or a manifest CSV."""
    return load_tid2013(source) if Path(source).is_dir() else load_manifest(source)


# --- feature cache -------------------------------------------------------------

def extractor_hash() -> str:
    """Hash of every extractor constant and the feature schema."""
    payload = json.dumps({"schema": CACHE_SCHEMA, "constants": EXTRACTOR_CONSTANTS,
                          "names": list(FEATURE_NAMES)}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class FeatureCache:
    config_hash: str
    rows: dict[str, np.ndarray]

    def matrix(self, records: Sequence[PairRecord]) -> np.ndarray:
        missing = [r.key for r in records if r.key not in self.rows]
        if missing:
            raise CacheError(f"no cached features for pair {missing[0]} ({len(missing)} missing)")
        return np.stack([self.rows[r.key] for r in records]) if records else np.empty((0, len(FEATURE_NAMES)))


def _header_line(config_hash: str) -> str:
    return f"# {CACHE_SCHEMA} config_hash={config_hash}"


def read_cache(path, expected_hash: str | None = None) -> FeatureCache:
    expected_hash = extractor_hash() if expected_hash is None else expected_hash
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        m = re.fullmatch(r"# (\S+) config_hash=(\S+)", first)
        if m is None or m.group(1) != CACHE_SCHEMA:
            raise CacheError(f"{path}: not a feature cache (bad first header line)")
        if m.group(2) != expected_hash:
            raise CacheError(f"{path}: extractor config hash {m.group(2)} != current {expected_hash}")
        reader = csv.reader(fh)
        columns = next(reader, None)
        if columns is None or tuple(columns) != ("key", *FEATURE_NAMES):
            raise CacheError(f"{path}: column header does not match the feature schema")
        rows = {}
        for lineno, row in enumerate(reader, 3):
            if len(row) != len(columns):
                raise CacheError(f"{path} line {lineno}: expected {len(columns)} fields, got {len(row)}")
            try:
                rows[row[0]] = np.array([float(v) for v in row[1:]])
            except ValueError as exc:
                raise CacheError(f"{path} line {lineno}: {exc}") from None
    return FeatureCache(m.group(2), rows)


def write_cache(path, cache: FeatureCache) -> None:
    """Write all rows sorted by key, atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        fh.write(_header_line(cache.config_hash) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("key", *FEATURE_NAMES))
        for key in sorted(cache.rows):
            w.writerow([key, *(repr(float(v)) for v in cache.rows[key])])
    os.replace(tmp, path)


def pair_features(ref_path: str, dist_path: str) -> np.ndarray:
    return featurize(extract_all(load_image(ref_path), load_image(dist_path))).values


def _extract_one(rec: PairRecord) -> tuple[str, np.ndarray | None, str | None]:
    try:
        return rec.key, pair_features(rec.ref_path, rec.dist_path), None
    except Exception as exc:  # recorded per pair; the run continues
        return rec.key, None, f"{type(exc).__name__}: {exc}"


@dataclass
class ExtractionResult:
    cache: FeatureCache
    extracted: int
    failures: dict[str, str]


def extract_and_cache(records: Sequence[PairRecord], cache_path, workers: int = 1) -> ExtractionResult:
    """Extract features for records not yet cached and rewrite the cache.

    Existing rows are kept when the extractor hash matches; a mismatched
    cache is an error rather than being silently overwritten.
    """
    cache_path = Path(cache_path)
    current = extractor_hash()
    cache = read_cache(cache_path, current) if cache_path.exists() else FeatureCache(current, {})
    todo = [r for r in records if r.key not in cache.rows]
    failures: dict[str, str] = {}

    def collect(key, values, err):
        if err is not None:
            log.warning("extraction failed for %s: %s", key, err)
            failures[key] = err
        else:
            cache.rows[key] = values

    if workers <= 1 or len(todo) <= 1:
        for rec in todo:
            collect(*_extract_one(rec))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_extract_one, rec) for rec in todo]
            for fut in as_completed(futures):
                collect(*fut.result())
    if todo or not cache_path.exists():
        write_cache(cache_path, cache)
    return ExtractionResult(cache, len(todo) - len(failures), failures)
