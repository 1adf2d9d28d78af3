import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symenc.model import Modality, NoteEvent, PedalEvent, PieceDoc
from symenc.segmentation import SplitPlan, leakage_audit, make_folds, segment, slice_window, window_sides
from symenc.testing import random_score


def lasting(seconds):
    return PieceDoc(Modality.PERFORMANCE, [NoteEvent(60, 0.0, seconds, velocity=64)], piece_id="p")


def spans(windows):
    return [(w.start, w.end) for w in windows]


def test_segment_examples():
    assert spans(segment(lasting(150.0))) == [(0, 60), (60, 120), (120, 150)]
    assert spans(segment(lasting(125.0))) == [(0, 60), (60, 125)]
    assert spans(segment(lasting(60.0))) == [(0, 60)]
    assert [w.index for w in segment(lasting(150.0))] == [0, 1, 2]


def test_score_windows_are_120_beats():
    doc = PieceDoc(Modality.SCORE, [NoteEvent(60, 0.0, 300.0, voice=1)])
    assert spans(segment(doc)) == [(0, 120), (120, 240), (240, 300)]


@given(st.floats(0.5, 1000))
def test_windows_tile_the_piece(total):
    ws = segment(lasting(total))
    assert ws[0].start == 0 and ws[-1].end == pytest.approx(total)
    for a, b in zip(ws, ws[1:]):
        assert a.end == pytest.approx(b.start)
    assert all(w.length >= 15 or len(ws) == 1 for w in ws)


def test_slice_window_rebases_time_and_context():
    doc = random_score(np.random.default_rng(3), 80, measures=40)
    w = segment(doc, 30.0)[1]
    part = slice_window(doc, w)
    assert all(0 <= n.onset < w.length for n in part.notes)
    assert len(part.notes) == sum(w.start <= n.onset < w.end for n in doc.notes)
    if part.notes:
        assert min(n.measure_index for n in part.notes) == 0
        assert part.time_signatures[0][0] == 0


def test_slice_window_clips_pedals():
    doc = PieceDoc(Modality.PERFORMANCE, [NoteEvent(60, 0.0, 130.0, velocity=64)],
                   pedals=[PedalEvent("sustain", 50.0, 20.0)])
    second = slice_window(doc, segment(doc)[1])
    assert [(p.onset, p.duration) for p in second.pedals] == [(0.0, pytest.approx(10.0))]


def test_fold_sizes_and_determinism():
    pieces = [(f"p{i}", i % 3) for i in range(100)]
    plan = make_folds(pieces, k=8, seed=4)
    assert plan.num_folds == 8
    assert all(abs(len(f["test"]) - 15) <= 1 for f in plan.folds)
    assert make_folds(pieces, k=8, seed=4).dumps() == plan.dumps()
    assert make_folds(pieces, k=8, seed=5).dumps() != plan.dumps()


def test_performances_of_one_piece_stay_together():
    pieces = [("X", 0), ("X", 0)] + [(f"p{i}", 0) for i in range(30)]
    plan = make_folds(pieces, seed=1)
    for f in plan.folds:
        assert ("X" in f["test"]) != ("X" in f["train"])


def test_too_few_pieces():
    with pytest.raises(ValueError):
        make_folds([("a", 0)] * 3, k=8)


def test_audit_reports():
    pieces = [(f"p{i}", 0) for i in range(20)]
    plan = make_folds(pieces)
    assert leakage_audit(plan, [p for p, _ in pieces]).clean
    plan.folds[3]["train"].add("p0")
    plan.folds[3]["test"].add("p0")
    report = leakage_audit(plan, [p for p, _ in pieces])
    assert report.leaks == [(3, "p0")]
    unknown = leakage_audit(make_folds(pieces), [p for p, _ in pieces] + ["ghost"])
    assert {pid for _, pid in unknown.unassigned} == {"ghost"}


def test_plan_serialization_and_window_sides():
    plan = make_folds([(f"p{i}", 0) for i in range(20)], seed=2)
    assert SplitPlan.from_dict(plan.to_dict()).to_dict() == plan.to_dict()
    doc = lasting(150.0).replace(piece_id=sorted(plan.folds[0]["test"])[0])
    sides = window_sides(plan, segment(doc), 0)
    assert set(sides.values()) == {"test"}


@given(st.integers(8, 300), st.integers(1, 6), st.integers(0, 2**31), st.booleans())
def test_folds_never_leak(n, classes, seed, stratify):
    rng = np.random.default_rng(seed)
    pieces = [(f"p{int(rng.integers(n))}", int(rng.integers(classes))) for _ in range(n)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if len({p for p, _ in pieces}) < 8:
            return
        plan = make_folds(pieces, seed=seed, stratify=stratify)
    ids = {p for p, _ in pieces}
    assert leakage_audit(plan, ids).clean
    for f in plan.folds:
        assert f["train"] | f["test"] == ids
        assert abs(len(f["test"]) - 0.15 * len(ids)) <= 1
