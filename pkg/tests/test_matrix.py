import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symenc.errors import ParseError, UnsupportedCombination
from symenc.matrix import (MatrixConfig, build_roll, decode_roll, encode_segments, payload_size,
                           roll_from_bytes, roll_to_bytes, sidecar)
from symenc.model import FeatureLevel, Modality, NoteEvent, PedalEvent, PieceDoc, canonicalize
from symenc.testing import random_performance, random_score


def one_note(modality=Modality.PERFORMANCE, **kw):
    extra = {"velocity": 80} if modality is Modality.PERFORMANCE else {"voice": 2}
    extra.update(kw)
    return PieceDoc(modality, [NoteEvent(60, 0.0, 1.0, **extra)])


def test_performance_example():
    roll = build_roll(one_note(), 0.0, MatrixConfig(resolution=600))
    onset, frame = roll.channel("onset"), roll.channel("frame")
    assert onset[60, 0] == 1 and onset.sum() == 1
    assert (frame[60, :10] == 80).all() and frame.sum() == 800


def test_score_uses_voice():
    roll = build_roll(one_note(Modality.SCORE), 0.0, MatrixConfig(resolution=600, window_length=60.0))
    frame = roll.channel("frame")
    assert (frame[60, :10] == 2).all() and frame.sum() == 20


def test_basic_level_binarizes_frame():
    roll = build_roll(one_note(), 0.0, MatrixConfig(resolution=600, feature_level=FeatureLevel.BASIC))
    assert roll.channel("frame").max() == 1


def test_empty_window_is_zero_with_fixed_shape():
    roll = build_roll(one_note(), 500.0, MatrixConfig(resolution=400))
    assert roll.shape == (2, 128, 400) and not roll.values.any()


def test_abutting_notes_do_not_share_columns():
    doc = canonicalize(PieceDoc(Modality.PERFORMANCE, [NoteEvent(60, 0.0, 0.1, velocity=10),
                                                        NoteEvent(60, 0.1, 0.1, velocity=20)]))
    frame = build_roll(doc, 0.0, MatrixConfig(resolution=600)).channel("frame")
    assert frame[60, :3].tolist() == [10, 20, 0]


def test_collision_keeps_maximum_and_carry_in_has_no_onset():
    doc = canonicalize(PieceDoc(Modality.PERFORMANCE, [NoteEvent(60, 59.5, 1.0, velocity=30),
                                                        NoteEvent(60, 60.0, 0.05, velocity=90)]))
    roll = build_roll(doc, 60.0, MatrixConfig(resolution=600))
    assert roll.channel("frame")[60, :5].tolist() == [90, 30, 30, 30, 30]
    assert roll.channel("onset")[60].sum() == 1


def test_pedal_rows():
    doc = canonicalize(PieceDoc(Modality.PERFORMANCE, [NoteEvent(60, 0.0, 1.0, velocity=80)],
                                pedals=[PedalEvent("sustain", 0.0, 0.5), PedalEvent("una_corda", 0.2, 0.1)]))
    roll = build_roll(doc, 0.0, MatrixConfig(resolution=600, include_pedal_rows=True))
    frame = roll.channel("frame")
    assert roll.shape == (2, 131, 600)
    assert frame[130, :5].tolist() == [1] * 5 and frame[130, 5] == 0
    assert frame[128, 2] == 1 and frame[129].sum() == 0
    assert roll.channel("onset")[128:].sum() == 0
    with pytest.raises(UnsupportedCombination):
        build_roll(one_note(Modality.SCORE), 0.0, MatrixConfig(include_pedal_rows=True))


def test_config_validation():
    with pytest.raises(ValueError):
        MatrixConfig(resolution=0)
    with pytest.raises(ValueError):
        MatrixConfig(channels=())
    assert MatrixConfig(channels=("frame",)).channels == ("frame",)


def test_size_identity_and_container():
    roll = build_roll(one_note(), 0.0, MatrixConfig(resolution=800))
    data = roll_to_bytes(roll)
    assert payload_size(data) == 819_200 == roll.nbytes
    assert data[:4] == b"SYMR"
    np.testing.assert_array_equal(roll_from_bytes(data), roll.values)
    with pytest.raises(ParseError):
        roll_from_bytes(b"XXXX" + data[4:])
    with pytest.raises(ParseError):
        roll_from_bytes(data[:-4])
    assert '"channels"' in sidecar(roll, "p", 0)


@given(st.integers(0, 2**31), st.sampled_from([400, 600, 800]), st.booleans())
def test_roll_invariants(seed, resolution, score):
    rng = np.random.default_rng(seed)
    doc = random_score(rng, 40) if score else random_performance(rng, 40, span=80.0)
    start = float(rng.choice([0.0, 13.7]))
    roll = build_roll(doc, start, MatrixConfig(resolution=resolution))
    onset, frame = roll.channel("onset"), roll.channel("frame")
    assert roll.shape[2] == resolution
    assert set(np.unique(onset)) <= {0, 1}
    top = 8 if score else 127
    assert frame.max(initial=0) <= top
    length = 120.0 if score else 60.0
    starting = {(n.pitch, int(np.floor((n.onset - start) * resolution / length + 1e-9)))
                for n in doc.notes if start <= n.onset < start + length}
    assert onset.sum() == len(starting)
    again = encode_segments(decode_roll(roll), roll.shape, roll.channels)
    np.testing.assert_array_equal(again, roll.values)
