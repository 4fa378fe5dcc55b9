"""Dataset manifests: CSV with header ``path,label,subject,attack_type,split``."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .._io import atomic_write_text
from ..errors import ParseError, ValidationError

HEADER = ("path", "label", "subject", "attack_type", "split")
ATTACK_TYPES = ("none", "print", "replay", "mask", "synthetic-moire", "synthetic-recapture",
                "synthetic-posterize")
SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    label: int  # 0 genuine, 1 spoof
    subject: str
    attack_type: str
    split: str

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValidationError(f"{self.path}: label must be 0 or 1, got {self.label!r}")
        if self.attack_type not in ATTACK_TYPES:
            raise ValidationError(f"{self.path}: unknown attack type {self.attack_type!r}")
        if (self.label == 0) != (self.attack_type == "none"):
            raise ValidationError(f"{self.path}: label {self.label} inconsistent with "
                                  f"attack type {self.attack_type!r}")
        if self.split not in SPLITS:
            raise ValidationError(f"{self.path}: unknown split {self.split!r}")


def parse_manifest(text: str, source: str = "<manifest>") -> list[ManifestRecord]:
    """Parse manifest CSV; ``#`` comment lines and blank lines are ignored."""
    # blank out comments rather than dropping them so line numbers stay true
    lines = ["" if ln.lstrip().startswith("#") else ln for ln in text.splitlines()]
    reader = csv.reader(io.StringIO("\n".join(lines)))
    header = None
    for row in reader:
        if row and any(c.strip() for c in row):
            header = row
            break
    if header is None:
        raise ParseError(f"{source}: empty manifest, expected header {','.join(HEADER)}")
    if tuple(h.strip() for h in header) != HEADER:
        raise ParseError(f"{source}:{reader.line_num}: header must be {','.join(HEADER)}, "
                         f"got {','.join(header)}")
    records, seen = [], set()
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(HEADER):
            raise ParseError(f"{source}:{line}: expected {len(HEADER)} fields, got {len(row)}")
        path, label, subject, attack, split = (c.strip() for c in row)
        try:
            label_value = int(label)
        except ValueError:
            raise ParseError(f"{source}:{line}: label {label!r} is not an integer") from None
        try:
            rec = ManifestRecord(path, label_value, subject, attack, split)
        except ValidationError as exc:
            raise ValidationError(f"{source}:{line}: {exc}") from None
        if path in seen:
            raise ValidationError(f"{source}:{line}: duplicate path {path!r}")
        seen.add(path)
        records.append(rec)
    return records


def load_manifest(path) -> list[ManifestRecord]:
    path = Path(path)
    return parse_manifest(path.read_text(encoding="utf-8"), str(path))


def format_manifest(records: Iterable[ManifestRecord], comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for r in records:
        writer.writerow([r.path, r.label, r.subject, r.attack_type, r.split])
    return buf.getvalue()


def write_manifest(path, records: Iterable[ManifestRecord], comment: str | None = None) -> None:
    atomic_write_text(path, format_manifest(records, comment))


def by_split(records: Iterable[ManifestRecord], split: str) -> list[ManifestRecord]:
    return [r for r in records if r.split == split]


def subject_overlap(records: Iterable[ManifestRecord]) -> dict[str, set[str]]:
    """Subjects appearing in more than one split, mapped to those splits."""
    where: dict[str, set[str]] = {}
    for r in records:
        where.setdefault(r.subject, set()).add(r.split)
    return {s: splits for s, splits in where.items() if len(splits) > 1}
