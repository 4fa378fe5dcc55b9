"""Turning manifests into network inputs and feature caches."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..texture.cache import read_cache, write_cache
from ..texture.descriptor import DescriptorSettings, DescriptorVector, describe_image
from .manifest import ManifestRecord
from .preprocess import PreprocessSpec, preprocess, read_image, to_network_input


@dataclass
class CacheReport:
    written: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"written": self.written,
                "failures": [{"path": p, "error": e} for p, e in self.failures]}


def _describe_one(args) -> tuple[str, DescriptorVector | None, str | None]:
    path, root, spec, settings = args
    try:
        face = preprocess(read_image(Path(root) / path), spec, source=path)
        return path, describe_image(face, settings), None
    except Exception as exc:  # collected per record, run continues
        return path, None, f"{type(exc).__name__}: {exc}"


def build_feature_cache(records: list[ManifestRecord], root, cache_path,
                        spec: PreprocessSpec = PreprocessSpec(),
                        settings: DescriptorSettings = DescriptorSettings(),
                        meta: dict | None = None, workers: int = 1) -> CacheReport:
    """Describe every manifest image and write the cache in manifest order."""
    jobs = [(r.path, str(root), spec, settings) for r in records]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_describe_one, jobs, chunksize=16))
    else:
        results = [_describe_one(j) for j in jobs]
    report = CacheReport()
    entries = []
    for path, vec, err in results:
        if vec is None:
            report.failures.append((path, err))
        else:
            entries.append((path, vec))
    full_meta = {"descriptor": settings.to_dict(),
                 "preprocess": {"margin": spec.margin, "side": spec.side}}
    full_meta.update(meta or {})
    write_cache(cache_path, entries, full_meta)
    report.written = len(entries)
    return report


@dataclass
class Arrays:
    ids: list[str]
    images: np.ndarray | None
    features: np.ndarray | None
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, idx) -> "Arrays":
        idx = np.asarray(idx)
        return Arrays([self.ids[i] for i in idx],
                      None if self.images is None else self.images[idx],
                      None if self.features is None else self.features[idx],
                      self.labels[idx])


def load_arrays(records: list[ManifestRecord], root, spec: PreprocessSpec = PreprocessSpec(),
                settings: DescriptorSettings = DescriptorSettings(), cache_path=None,
                need_images: bool = True, need_features: bool = True) -> Arrays:
    """Preprocessed images in [0, 1] and descriptor vectors, in manifest order."""
    cached = {}
    if cache_path is not None and need_features:
        entries, _ = read_cache(cache_path)
        cached = {ident: vec.values for ident, vec in entries}
    images, feats = [], []
    for r in records:
        face = None
        if need_images or (need_features and r.path not in cached):
            face = preprocess(read_image(Path(root) / r.path), spec, source=r.path)
        if need_images:
            images.append(to_network_input(face))
        if need_features:
            feats.append(cached[r.path] if r.path in cached else describe_image(face, settings).values)
    labels = np.array([r.label for r in records], dtype=np.float32)
    return Arrays([r.path for r in records],
                  np.stack(images) if images else None,
                  np.stack(feats).astype(np.float32) if feats else None,
                  labels)


def arrays_from_images(images: list[np.ndarray], labels, ids=None,
                       spec: PreprocessSpec = PreprocessSpec(),
                       settings: DescriptorSettings = DescriptorSettings()) -> Arrays:
    """Same as :func:`load_arrays` for in-memory rasters."""
    faces = [preprocess(img, spec) for img in images]
    ids = list(ids) if ids is not None else [str(i) for i in range(len(images))]
    return Arrays(ids,
                  np.stack([to_network_input(f) for f in faces]),
                  np.stack([describe_image(f, settings).values for f in faces]).astype(np.float32),
                  np.asarray(labels, dtype=np.float32))
