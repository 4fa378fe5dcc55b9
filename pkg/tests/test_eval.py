import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facepad.errors import InsufficientDataError, ParseError, ValidationError
from facepad.eval import (
    CrossEvalResult,
    EvalReport,
    ScoreSet,
    aggregate_by_group,
    cross_eval,
    eer,
    evaluate,
    hter,
    read_scores,
    roc_curve,
    write_scores,
)

import oracles


def random_set(rng, n=None, levels=None):
    n = n or int(rng.integers(2, 40))
    labels = rng.integers(0, 2, n)
    labels[:2] = [0, 1]
    scores = rng.random(n)
    if levels:
        scores = np.round(scores * levels) / levels  # force ties
    return ScoreSet.from_arrays(labels, scores)


def test_separated_classes():
    s = ScoreSet.from_arrays([0, 1], [0.1, 0.9])
    assert eer(s)[0] == 0.0
    assert evaluate(s).hter == 0.0


def test_identical_scores_sum_to_one():
    s = ScoreSet.from_arrays([0, 0, 1, 1], [0.5] * 4)
    for _, far, frr in roc_curve(s).points():
        assert far + frr == 1.0
    assert eer(s)[0] == 0.5


def test_small_hand_example():
    s = ScoreSet.from_arrays([0, 0, 1, 1], [0.4, 0.6, 0.5, 0.7])
    assert eer(s) == (0.5, 0.5)
    assert eer(s)[0] == oracles.eer_brute(s.labels.tolist(), s.scores.tolist())


def test_interpolated_crossing():
    # FAR/FRR cross strictly between two ROC points
    s = ScoreSet.from_arrays([0, 0, 0, 1, 1], [0.1, 0.5, 0.6, 0.3, 0.9])
    value, thr = eer(s)
    assert value == pytest.approx(oracles.eer_brute(s.labels.tolist(), s.scores.tolist()), abs=1e-12)
    assert 0.3 <= thr <= 0.5


def test_shuffled_labels_give_half():
    rng = np.random.default_rng(0)
    s = ScoreSet.from_arrays(rng.integers(0, 2, 10_000), rng.random(10_000))
    assert abs(eer(s)[0] - 0.5) <= 0.02


def test_hter_at_fixed_threshold():
    test = ScoreSet.from_arrays([0, 1], [0.6, 0.4])
    rep = hter(None, test, threshold=0.5)
    assert (rep.far, rep.frr, rep.hter) == (1.0, 1.0, 1.0)


def test_single_label_raises():
    with pytest.raises(InsufficientDataError):
        eer(ScoreSet.from_arrays([0, 0], [0.1, 0.2]))


@pytest.mark.parametrize("labels,scores", [([0, 2], [0.1, 0.2]), ([0, 1], [0.1, 1.5]),
                                           ([0, 1], [0.1, np.nan]), ([0], [0.1, 0.2])])
def test_scoreset_validation(labels, scores):
    with pytest.raises(ValidationError):
        ScoreSet.from_arrays(labels, scores)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([None, 3, 10]))
def test_eer_and_hter_match_brute_force(seed, levels):
    rng = np.random.default_rng(seed)
    dev, test = random_set(rng, levels=levels), random_set(rng, levels=levels)
    assert abs(eer(dev)[0] - oracles.eer_brute(dev.labels.tolist(), dev.scores.tolist())) <= 1e-9
    h, t = oracles.hter_brute(dev.labels.tolist(), dev.scores.tolist(),
                              test.labels.tolist(), test.scores.tolist())
    rep = hter(dev, test)
    assert rep.threshold == t and abs(rep.hter - h) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_far_frr_monotone_in_threshold(seed):
    roc = roc_curve(random_set(np.random.default_rng(seed), levels=5))
    assert np.all(np.diff(roc.far) <= 0) and np.all(np.diff(roc.frr) >= 0)
    assert (roc.far[0], roc.frr[0], roc.far[-1], roc.frr[-1]) == (1, 0, 0, 1)


TRANSFORMS = [lambda s: s ** 3, lambda s: np.sqrt(s), lambda s: 0.5 * s + 0.25,
              lambda s: 1 / (1 + np.exp(-20 * (s - 0.5)))]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(range(len(TRANSFORMS))))
def test_monotone_transform_invariance(seed, k):
    rng = np.random.default_rng(seed)
    dev, test = random_set(rng, levels=8), random_set(rng, levels=8)
    f = TRANSFORMS[k]
    g = lambda s: ScoreSet.from_arrays(s.labels, f(s.scores))
    assert eer(g(dev))[0] == eer(dev)[0]
    a, b = hter(dev, test), hter(g(dev), g(test))
    assert (a.far, a.frr, a.hter) == (b.far, b.frr, b.hter)


def test_report_round_trip():
    rng = np.random.default_rng(4)
    rep = evaluate(random_set(rng, 30))
    back = EvalReport.from_dict(json.loads(json.dumps(rep.to_dict())))
    assert back == rep


def test_score_file_round_trip(tmp_path):
    s = ScoreSet(["a", "b", "c"], np.array([0, 1, 1]), np.array([0.1, 1 / 3, 0.7]), ["v1", "v2", "v2"])
    write_scores(tmp_path / "s.csv", s, comment='{"seed": 1}')
    back = read_scores(tmp_path / "s.csv")
    assert back.ids == s.ids and back.groups == s.groups
    assert back.scores.tobytes() == s.scores.tobytes() and np.array_equal(back.labels, s.labels)
    (tmp_path / "bad.csv").write_text("identifier,group,label,score\na,g,0,x\n")
    with pytest.raises(ParseError):
        read_scores(tmp_path / "bad.csv")


def test_aggregate_by_group_means():
    s = ScoreSet(["a", "b", "c"], np.array([1, 1, 0]), np.array([0.2, 0.4, 0.9]), ["v", "v", "w"])
    agg = aggregate_by_group(s)
    assert agg.ids == ["v", "w"] and agg.scores.tolist() == pytest.approx([0.3, 0.9])
    with pytest.raises(ValidationError):
        aggregate_by_group(ScoreSet(["a", "b"], np.array([0, 1]), np.array([0.1, 0.2]), ["v", "v"]))


def _fixture(rng, shift):
    n = 40
    labels = np.repeat([0, 1], n // 2)
    scores = np.clip(rng.normal(0.35 + shift * labels, 0.15), 0, 1)
    groups = [f"g{i // 4}_{labels[i]}" for i in range(n)]
    return ScoreSet([f"f{i}" for i in range(n)], labels, scores, groups)


def test_cross_eval_matrix_two_by_two():
    rng = np.random.default_rng(7)
    scores = {"dual": {t: {d: {"dev": _fixture(rng, 0.3), "test": _fixture(rng, 0.3 if d == t else 0.1)}
                           for d in ("A", "B")} for t in ("A", "B")}}
    res = cross_eval(scores)
    assert len(res.entries) == 2 * 2 * 2
    rep = res.get("dual", "A", "B", "video")
    dev_video = aggregate_by_group(scores["dual"]["A"]["A"]["dev"])
    assert rep == hter(dev_video, aggregate_by_group(scores["dual"]["A"]["B"]["test"]))
    text = res.matrix("dual", "frame")
    assert "A" in text and "B" in text
    assert CrossEvalResult.from_dict(json.loads(res.to_json())).to_dict() == res.to_dict()


def test_cross_eval_needs_dev_and_test():
    s = _fixture(np.random.default_rng(0), 0.3)
    with pytest.raises(ValidationError):
        cross_eval({"m": {"A": {"A": {"test": s}}}})
    with pytest.raises(ValidationError):
        cross_eval({"m": {"A": {"A": {"dev": s, "test": s}, "B": {"dev": s}}}})
