"""ROC, EER and HTER for spoof scores (higher score = more likely spoof).

At threshold ``t`` a sample is called spoof when ``score > t``:
FAR is the fraction of genuine samples above ``t``, FRR the fraction of
spoof samples at or below ``t``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .._io import atomic_write_text
from ..errors import InsufficientDataError, ParseError, ValidationError


@dataclass
class ScoreSet:
    ids: list[str]
    labels: np.ndarray
    scores: np.ndarray
    groups: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.ids = [str(i) for i in self.ids]
        if not self.groups:
            self.groups = list(self.ids)
        n = len(self.ids)
        if self.labels.shape != (n,) or self.scores.shape != (n,) or len(self.groups) != n:
            raise ValidationError("ids, labels, scores and groups must have equal length")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValidationError("labels must be 0 (genuine) or 1 (spoof)")
        if not np.all(np.isfinite(self.scores)):
            raise ValidationError("scores must be finite")
        if np.any((self.scores < 0) | (self.scores > 1)):
            raise ValidationError("scores must lie in [0, 1]")

    @classmethod
    def from_arrays(cls, labels, scores, ids=None, groups=None) -> "ScoreSet":
        labels = np.asarray(labels)
        ids = list(ids) if ids is not None else [str(i) for i in range(len(labels))]
        return cls(ids, labels, scores, list(groups) if groups is not None else [])

    def __len__(self) -> int:
        return len(self.ids)


def _split(labels, scores) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    genuine = np.sort(scores[labels == 0])
    spoof = np.sort(scores[labels == 1])
    if genuine.size == 0 or spoof.size == 0:
        raise InsufficientDataError("ROC needs at least one genuine and one spoof score")
    return genuine, spoof


def _unpack(scores) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(scores, ScoreSet):
        return scores.labels, scores.scores
    labels, values = scores
    return np.asarray(labels), np.asarray(values, dtype=np.float64)


def rates_at(labels, scores, threshold: float) -> tuple[float, float]:
    genuine, spoof = _split(labels, scores)
    far = (genuine.size - np.searchsorted(genuine, threshold, side="right")) / genuine.size
    frr = np.searchsorted(spoof, threshold, side="right") / spoof.size
    return float(far), float(frr)


@dataclass
class Roc:
    thresholds: np.ndarray  # ascending; first -inf, last +inf
    far: np.ndarray
    frr: np.ndarray

    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.far.tolist(), self.frr.tolist()))


def roc_curve(scores) -> Roc:
    """Rates at every distinct score plus -inf/+inf sentinels.

    ``scores`` is a :class:`ScoreSet` or a ``(labels, scores)`` pair.
    """
    labels, values = _unpack(scores)
    genuine, spoof = _split(labels, values)
    thr = np.concatenate([[-np.inf], np.unique(values), [np.inf]])
    far = (genuine.size - np.searchsorted(genuine, thr, side="right")) / genuine.size
    frr = np.searchsorted(spoof, thr, side="right") / spoof.size
    return Roc(thr, far.astype(np.float64), frr.astype(np.float64))


def _finite_mix(t0: float, t1: float, w: float) -> float:
    if math.isinf(t0) and math.isinf(t1):
        return 0.5
    if math.isinf(t0):
        return float(t1)
    if math.isinf(t1):
        return float(t0)
    return float(t0 + w * (t1 - t0))


def eer_from_roc(roc: Roc) -> tuple[float, float]:
    d = roc.far - roc.frr  # non-increasing
    equal = np.flatnonzero(d == 0)
    if equal.size:
        lo, hi = roc.thresholds[equal[0]], roc.thresholds[equal[-1]]
        return float(roc.far[equal[0]]), _finite_mix(lo, hi, 0.5)
    i = int(np.argmax(d < 0))
    w = d[i - 1] / (d[i - 1] - d[i])
    rate = roc.far[i - 1] + w * (roc.far[i] - roc.far[i - 1])
    return float(rate), _finite_mix(roc.thresholds[i - 1], roc.thresholds[i], w)


def eer(scores) -> tuple[float, float]:
    """Equal error rate and its threshold, interpolating linearly between ROC points."""
    return eer_from_roc(roc_curve(scores))


def operating_threshold(roc: Roc) -> float:
    """ROC threshold closest to the equal-error point.

    Always one of the observed scores (or a sentinel), so applying it elsewhere
    commutes with any strictly increasing transform of the scores. Ties go to
    the smaller FAR+FRR, then to the lower threshold.
    """
    gap = np.abs(roc.far - roc.frr)
    total = roc.far + roc.frr
    order = np.lexsort((roc.thresholds, total, gap))
    return float(roc.thresholds[order[0]])


@dataclass
class EvalReport:
    eer: float
    eer_threshold: float
    hter: float
    threshold: float
    far: float
    frr: float
    roc: list[tuple[float, float, float]]
    counts: dict[str, int]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["roc"] = [[_enc(t), f, r] for t, f, r in self.roc]
        for k in ("eer_threshold", "threshold"):
            d[k] = _enc(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        d = dict(d)
        d["roc"] = [(_dec(t), float(f), float(r)) for t, f, r in d["roc"]]
        for k in ("eer_threshold", "threshold"):
            d[k] = _dec(d[k])
        return cls(**d)


def _enc(x: float):
    return ("inf" if x > 0 else "-inf") if math.isinf(x) else x


def _dec(x) -> float:
    return float(x)


def hter(dev, test, threshold: float | None = None) -> EvalReport:
    """HTER on ``test`` at the operating threshold fixed on ``dev``.

    Pass ``threshold`` to apply an explicit threshold instead (``dev`` may then be None).
    """
    if threshold is None:
        threshold = operating_threshold(roc_curve(dev))
    labels, values = _unpack(test)
    roc = roc_curve((labels, values))
    e, e_thr = eer_from_roc(roc)
    far, frr = rates_at(labels, values, threshold)
    return EvalReport(e, e_thr, (far + frr) / 2, float(threshold), far, frr, roc.points(),
                      {"genuine": int(np.sum(labels == 0)), "spoof": int(np.sum(labels == 1))})


def evaluate(scores) -> EvalReport:
    """Single-set report: threshold chosen on the same scores."""
    return hter(scores, scores)


def aggregate_by_group(scores: ScoreSet) -> ScoreSet:
    """Mean frame score per group (e.g. per video)."""
    order: dict[str, list[int]] = {}
    for i, g in enumerate(scores.groups):
        order.setdefault(g, []).append(i)
    ids, labels, values = [], [], []
    for g, idx in order.items():
        lab = set(scores.labels[idx].tolist())
        if len(lab) != 1:
            raise ValidationError(f"group {g!r} mixes genuine and spoof frames")
        ids.append(g)
        labels.append(lab.pop())
        values.append(float(np.mean(scores.scores[idx])))
    return ScoreSet(ids, np.array(labels), np.array(values), list(ids))


# -- score files -------------------------------------------------------------

SCORE_HEADER = ("identifier", "group", "label", "score")


def format_scores(scores: ScoreSet, comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCORE_HEADER)
    for i, g, lab, s in zip(scores.ids, scores.groups, scores.labels, scores.scores):
        w.writerow([i, g, int(lab), repr(float(s))])
    return buf.getvalue()


def write_scores(path, scores: ScoreSet, comment: str | None = None) -> None:
    atomic_write_text(path, format_scores(scores, comment))


def read_scores(path) -> ScoreSet:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows or tuple(rows[0]) != SCORE_HEADER:
        raise ParseError(f"{path}: score file header must be {','.join(SCORE_HEADER)}")
    ids, groups, labels, values = [], [], [], []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != 4:
            raise ParseError(f"{path}:{n}: expected 4 fields")
        try:
            labels.append(int(row[2]))
            values.append(float(row[3]))
        except ValueError as exc:
            raise ParseError(f"{path}:{n}: {exc}") from None
        ids.append(row[0])
        groups.append(row[1])
    return ScoreSet(ids, np.array(labels, dtype=np.int64), np.array(values), groups)


def write_roc_csv(path, roc: list[tuple[float, float, float]]) -> None:
    buf = io.StringIO()
    buf.write("threshold,far,frr\n")
    for t, f, r in roc:
        buf.write(f"{t!r},{f!r},{r!r}\n")
    atomic_write_text(path, buf.getvalue())
