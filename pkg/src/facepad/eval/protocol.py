"""Intra/cross-dataset evaluation: train-set dev threshold, eval-set test scores."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import ValidationError
from .metrics import EvalReport, ScoreSet, aggregate_by_group, hter

MODES = ("frame", "video")


@dataclass
class CrossEvalEntry:
    method: str
    train: str
    evaluated: str
    mode: str
    report: EvalReport

    def to_dict(self) -> dict:
        return {"method": self.method, "train": self.train, "eval": self.evaluated,
                "mode": self.mode, "report": self.report.to_dict()}


@dataclass
class CrossEvalResult:
    entries: list[CrossEvalEntry] = field(default_factory=list)

    def get(self, method: str, train: str, evaluated: str, mode: str = "frame") -> EvalReport:
        for e in self.entries:
            if (e.method, e.train, e.evaluated, e.mode) == (method, train, evaluated, mode):
                return e.report
        raise KeyError((method, train, evaluated, mode))

    def methods(self) -> list[str]:
        return list(dict.fromkeys(e.method for e in self.entries))

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "CrossEvalResult":
        return cls([CrossEvalEntry(e["method"], e["train"], e["eval"], e["mode"],
                                   EvalReport.from_dict(e["report"])) for e in d["entries"]])

    def matrix(self, method: str, mode: str = "frame") -> str:
        """Train rows by eval columns, each cell ``EER / HTER`` in percent."""
        rows = [e for e in self.entries if e.method == method and e.mode == mode]
        trains = list(dict.fromkeys(e.train for e in rows))
        evals = list(dict.fromkeys(e.evaluated for e in rows))
        width = max([16] + [len(x) + 2 for x in evals])
        lines = [f"{method} ({mode}): EER% / HTER%",
                 "train \\ eval".ljust(14) + "".join(x.rjust(width) for x in evals)]
        for t in trains:
            cells = []
            for x in evals:
                try:
                    r = self.get(method, t, x, mode)
                    cells.append(f"{100 * r.eer:.2f} / {100 * r.hter:.2f}".rjust(width))
                except KeyError:
                    cells.append("-".rjust(width))
            lines.append(t.ljust(14) + "".join(cells))
        return "\n".join(lines)

    def ablation(self, mode: str = "frame") -> str:
        """Method rows by (train -> eval) columns, EER% only."""
        pairs = list(dict.fromkeys((e.train, e.evaluated) for e in self.entries if e.mode == mode))
        heads = [f"{t}->{x}" for t, x in pairs]
        width = max([10] + [len(h) + 2 for h in heads])
        lines = [f"ablation ({mode}): EER%",
                 "method".ljust(10) + "".join(h.rjust(width) for h in heads)]
        for m in self.methods():
            cells = []
            for t, x in pairs:
                try:
                    cells.append(f"{100 * self.get(m, t, x, mode).eer:.2f}".rjust(width))
                except KeyError:
                    cells.append("-".rjust(width))
            lines.append(m.ljust(10) + "".join(cells))
        return "\n".join(lines)

    def render(self) -> str:
        modes = list(dict.fromkeys(e.mode for e in self.entries))
        blocks = [self.matrix(m, mode) for mode in modes for m in self.methods()]
        if len(self.methods()) > 1:
            blocks += [self.ablation(mode) for mode in modes]
        return "\n\n".join(blocks)


def cross_eval(scores: dict[str, dict[str, dict[str, dict[str, ScoreSet]]]],
               trained_on: dict[str, str] | None = None,
               modes: tuple[str, ...] = MODES) -> CrossEvalResult:
    """Build the evaluation matrix from precomputed scores.

    ``scores[method][train][dataset][split]`` holds the scores that the model
    of ``method`` trained on ``train`` gives to ``split`` of ``dataset``.
    The threshold comes from the ``dev`` split of the training dataset; every
    dataset (including eval-only ones) contributes its ``test`` split.
    """
    for mode in modes:
        if mode not in MODES:
            raise ValidationError(f"unknown aggregation mode {mode!r}")
    result = CrossEvalResult()
    for method, by_train in scores.items():
        for train, by_data in by_train.items():
            dev = by_data.get(train, {}).get("dev")
            if dev is None:
                raise ValidationError(f"{method}: training dataset {train!r} has no dev split scores")
            for dataset, splits in by_data.items():
                test = splits.get("test")
                if test is None:
                    raise ValidationError(f"{method}: dataset {dataset!r} has no test split scores")
                for mode in modes:
                    d, t = (dev, test) if mode == "frame" else (aggregate_by_group(dev),
                                                                aggregate_by_group(test))
                    result.entries.append(CrossEvalEntry(method, train, dataset, mode, hter(d, t)))
    return result
