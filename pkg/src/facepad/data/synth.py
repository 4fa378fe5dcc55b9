"""Deterministic synthetic genuine/spoof face images for desk-scale runs.

Genuine samples are procedurally shaded face-like blobs with fine skin
texture and sensor noise. Spoof samples start from a genuine render and add
one artifact: a moire grating, a recapture chain (blur, per-channel affine
colour shift, noise) or posterisation banding. Two profiles ("A", "B") vary
palette, lighting and artifact strength so cross-fixture tests are possible.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .manifest import ManifestRecord, write_manifest
from .preprocess import write_image

ATTACKS = ("synthetic-moire", "synthetic-recapture", "synthetic-posterize")


@dataclass(frozen=True)
class SynthProfile:
    skin_lo: tuple[float, float, float]
    skin_hi: tuple[float, float, float]
    background_lo: float
    background_hi: float
    texture_sigma: tuple[float, float]
    moire_freq: tuple[float, float]  # cycles per pixel
    moire_amp: tuple[float, float]
    blur_sigma: tuple[float, float]
    color_gain: tuple[float, float]
    posterize_levels: tuple[int, int]


PROFILES = {
    "A": SynthProfile((170, 110, 90), (235, 180, 150), 30, 200, (3.0, 6.0),
                      (0.18, 0.35), (6.0, 14.0), (0.9, 1.6), (0.85, 1.1), (6, 12)),
    "B": SynthProfile((120, 80, 60), (210, 160, 130), 60, 240, (2.5, 5.0),
                      (0.12, 0.28), (5.0, 12.0), (0.8, 1.4), (0.8, 1.15), (8, 16)),
}


def _face(rng: np.random.Generator, size: int, prof: SynthProfile, subject: np.random.Generator):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / (size - 1)
    skin = subject.uniform(prof.skin_lo, prof.skin_hi)
    bg = rng.uniform(prof.background_lo, prof.background_hi, 3)
    bg_tilt = rng.uniform(-40, 40, 3)
    img = bg + bg_tilt * (xx[..., None] - 0.5)

    cx, cy = 0.5 + rng.uniform(-0.06, 0.06, 2)
    rx, ry = subject.uniform(0.28, 0.36), subject.uniform(0.36, 0.44)
    d = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2
    mask = 1.0 / (1.0 + np.exp((d - 1.0) * 12.0))
    light = rng.uniform(-1, 1, 2)
    shade = 0.75 + 0.25 * (light[0] * (xx - cx) / rx + light[1] * (yy - cy) / ry)
    shade -= 0.15 * np.clip(d, 0, 1)
    face = skin * shade[..., None]
    for ex in (-0.12, 0.12):  # eyes
        e = ((xx - cx - ex) / 0.05) ** 2 + ((yy - cy + 0.1) / 0.03) ** 2
        face *= 1.0 - 0.6 * np.exp(-e)[..., None]
    m = ((xx - cx) / 0.12) ** 2 + ((yy - cy - 0.18) / 0.03) ** 2
    face *= 1.0 - 0.4 * np.exp(-m)[..., None]
    img = img * (1 - mask[..., None]) + face * mask[..., None]

    # fine skin texture, then sensor noise
    tex = gaussian_filter(rng.standard_normal((size, size)), 0.7)
    img += rng.uniform(*prof.texture_sigma) * tex[..., None] / (tex.std() + 1e-9)
    img += rng.normal(0.0, 2.0, img.shape)
    return img


def _moire(img, rng, prof: SynthProfile):
    size = img.shape[0]
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    theta = rng.uniform(0, np.pi)
    f1 = rng.uniform(*prof.moire_freq)
    f2 = f1 * rng.uniform(1.03, 1.12)
    phase = xx * np.cos(theta) + yy * np.sin(theta)
    beat = np.sin(2 * np.pi * f1 * phase) + np.sin(2 * np.pi * f2 * (phase + rng.uniform(0, 5)))
    tint = rng.uniform(0.7, 1.3, 3)
    return img + rng.uniform(*prof.moire_amp) * 0.5 * beat[..., None] * tint


def _recapture(img, rng, prof: SynthProfile):
    sigma = rng.uniform(*prof.blur_sigma)
    out = np.stack([gaussian_filter(img[..., c], sigma) for c in range(3)], axis=-1)
    gain = rng.uniform(*prof.color_gain, 3)
    bias = rng.uniform(-15, 15, 3)
    out = out * gain + bias
    return out + rng.normal(0.0, rng.uniform(1.5, 3.5), out.shape)


def _posterize(img, rng, prof: SynthProfile):
    levels = int(rng.integers(prof.posterize_levels[0], prof.posterize_levels[1] + 1))
    step = 256.0 / levels
    out = np.floor(np.clip(img, 0, 255) / step) * step + step / 2
    return out + rng.normal(0.0, 1.0, out.shape)


_ARTIFACTS = {"synthetic-moire": _moire, "synthetic-recapture": _recapture,
              "synthetic-posterize": _posterize}


def render(seed: int, index: int, label: int, size: int = 64, profile: str = "A",
           n_subjects: int = 20, subject_offset: int = 0) -> tuple[np.ndarray, str, str]:
    """One sample as ``(rgb uint8, subject id, attack type)``; pure in its arguments."""
    prof = PROFILES[profile]
    rng = np.random.default_rng([seed, index, label])
    subject_id = subject_offset + int(rng.integers(n_subjects))
    subject = np.random.default_rng([10_000 + subject_id])
    img = _face(rng, size, prof, subject)
    attack = "none"
    if label == 1:
        attack = ATTACKS[int(rng.integers(len(ATTACKS)))]
        img = _ARTIFACTS[attack](img, rng, prof)
    pixels = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    return pixels, f"{profile}{subject_id:03d}", attack


def synth_dataset(n_genuine: int, n_spoof: int, seed: int, size: int = 64, profile: str = "A",
                  split: str = "train", n_subjects: int = 20, prefix: str = "",
                  subject_offset: int = 0):
    """Images and manifest records; genuine first, then spoof, deterministic in ``seed``."""
    if n_genuine < 1 or n_spoof < 1:
        raise ValueError("n_genuine and n_spoof must both be >= 1")
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    images, records = [], []
    for label, count in ((0, n_genuine), (1, n_spoof)):
        for i in range(count):
            pixels, subject, attack = render(seed, i, label, size, profile, n_subjects,
                                             subject_offset)
            kind = "spoof" if label else "live"
            path = f"{prefix}{split}/{kind}_{i:05d}.png"
            images.append(pixels)
            records.append(ManifestRecord(path, label, subject, attack, split))
    return images, records


def write_synth_dataset(out_dir, splits: dict[str, tuple[int, int]], seed: int, size: int = 64,
                        profile: str = "A", n_subjects: int = 20,
                        comment: str | None = None) -> list[ManifestRecord]:
    """Write PNGs plus ``manifest.csv`` under ``out_dir``; each split gets its own seed stream."""
    out_dir = Path(out_dir)
    all_records = []
    for k, (split, (n_gen, n_spoof)) in enumerate(sorted(splits.items())):
        split_seed = int(np.random.SeedSequence([seed, k]).generate_state(1)[0])
        # subject-disjoint splits
        images, records = synth_dataset(n_gen, n_spoof, split_seed, size, profile, split,
                                        n_subjects, "images/", k * n_subjects)
        for img, rec in zip(images, records):
            write_image(out_dir / rec.path, img)
        all_records += records
    write_manifest(out_dir / "manifest.csv", all_records, comment)
    return all_records
