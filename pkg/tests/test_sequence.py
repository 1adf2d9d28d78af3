import warnings
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symenc.errors import DecodeError, QuantizationWarning, UnsupportedCombination
from symenc.model import FeatureLevel, Modality, NoteEvent, PieceDoc
from symenc.sequence import (BpeModel, QuantSpec, TokenSequence, bpe_apply, bpe_decode, bpe_train,
                             build_vocabulary, detokenize, length_reduction, sequence_record, tokenize)
from symenc.testing import random_performance, random_score
from symenc.verify import roundtrip_violations

HUNDRED_SHIFTS = tuple(round(0.01 * i, 2) for i in range(1, 101))


def tokens(seq, vocab):
    return [vocab.token(i) for i in seq.ids]


def perf_note():
    return PieceDoc(Modality.PERFORMANCE, [NoteEvent(60, 0.0, 1.0, velocity=80)])


def score_note():
    return PieceDoc(Modality.SCORE, [NoteEvent(60, 0.0, 1.0, voice=1, measure_index=0)],
                    time_signatures=[(0, 4, 4)])


def test_midilike_vocabulary_size():
    quant = QuantSpec(velocity_bins=32, time_shift_bins=HUNDRED_SHIFTS, duration_bins=HUNDRED_SHIFTS)
    vocab = build_vocabulary("MIDILike", "performance", quant)
    fam = Counter(vocab.families)
    assert (fam["NoteOn"], fam["NoteOff"], fam["Velocity"], fam["TimeShift"], fam["Special"]) == (128, 128, 32, 100, 3)
    assert len(vocab) == 391
    assert [vocab.token(i) for i in range(3)] == ["PAD", "BOS", "EOS"]


def test_remi_score_adds_keysig_and_voice():
    vocab = build_vocabulary("REMI", "score")
    fam = Counter(vocab.families)
    assert fam["KeySig"] == 15 and fam["Voice"] == 8
    assert not vocab.has_family("Voice") or "Velocity" not in fam
    basic = build_vocabulary("REMI", "score", feature_level=FeatureLevel.BASIC)
    assert not basic.has_family("Voice")


def test_vocabulary_is_deterministic():
    a = build_vocabulary("CPWord", "score").to_json()
    b = build_vocabulary("CPWord", "score").to_json()
    assert a == b
    assert build_vocabulary("REMI", "performance").from_json(a).to_json() == a


def test_midilike_rejects_scores():
    with pytest.raises(UnsupportedCombination):
        build_vocabulary("MIDILike", "score")
    vocab = build_vocabulary("MIDILike", "performance")
    with pytest.raises(UnsupportedCombination):
        tokenize(score_note(), vocab)


def test_midilike_single_note():
    vocab = build_vocabulary("MIDILike", "performance")
    assert tokens(tokenize(perf_note(), vocab), vocab) == [
        "BOS", "Velocity_78", "NoteOn_60", "TimeShift_1", "NoteOff_60", "EOS"]


def test_velocity_decodes_to_bin_center():
    vocab = build_vocabulary("MIDILike", "performance")
    q = vocab.quant
    b = q.velocity_bin(80)
    members = [v for v in range(1, 128) if q.velocity_bin(v) == b]
    (n,) = detokenize(tokenize(perf_note(), vocab), vocab).notes
    assert n.velocity == (members[0] + members[-1]) // 2
    assert (n.pitch, n.onset, n.duration) == (60, 0.0, 1.0)


def test_remi_score_single_note():
    vocab = build_vocabulary("REMI", "score")
    assert tokens(tokenize(score_note(), vocab), vocab) == [
        "BOS", "Bar", "Position_0", "Voice_1", "Pitch_60", "Duration_1", "EOS"]


def test_cpword_single_note_tuples():
    vocab = build_vocabulary("CPWord", "score")
    seq = tokenize(score_note(), vocab)
    rows = [[vocab.token(i) for i in t] for t in seq.ids]
    assert rows[0][0] == "BOS" and rows[-1][0] == "EOS"
    note_rows = [r for r in rows if "Pitch_60" in r]
    assert len(note_rows) == 1 and "Duration_1" in note_rows[0]
    assert seq.nbytes == 4 * len(seq) * len(vocab.slots)


def test_empty_doc_and_decode_errors():
    for scheme in ("MIDILike", "REMI"):
        vocab = build_vocabulary(scheme, "performance")
        seq = tokenize(PieceDoc(Modality.PERFORMANCE), vocab)
        assert tokens(seq, vocab) == ["BOS", "EOS"]
        assert detokenize(seq, vocab).notes == ()
    vocab = build_vocabulary("MIDILike", "performance")
    bad = TokenSequence([vocab.id("BOS"), vocab.id("NoteOff_60"), vocab.id("EOS")], vocab.scheme, vocab.modality)
    with pytest.raises(DecodeError) as info:
        detokenize(bad, vocab)
    assert info.value.index == 1


def test_clamped_values_warn():
    vocab = build_vocabulary("REMI", "performance")
    doc = PieceDoc(Modality.PERFORMANCE, [NoteEvent(60, 0.0, 50.0, velocity=80)])
    with pytest.warns(QuantizationWarning):
        tokenize(doc, vocab)


def test_signature_tokens_mark_changes_only():
    vocab = build_vocabulary("REMI", "score", QuantSpec(time_signatures=((4, 4), (3, 4))))
    doc = PieceDoc(Modality.SCORE, [NoteEvent(60, 0.0, 1.0, voice=1, measure_index=0),
                                    NoteEvent(62, 4.0, 1.0, voice=1, measure_index=1)],
                   time_signatures=[(0, 4, 4), (1, 3, 4)], key_signatures=[(0, 2)])
    toks = tokens(tokenize(doc, vocab), vocab)
    assert toks[:3] == ["BOS", "Bar", "KeySig_2"]
    assert toks[toks.index("Bar", 2):][:2] == ["Bar", "TimeSig_3/4"]
    back = detokenize(tokenize(doc, vocab), vocab)
    assert back.time_signatures == ((1, 3, 4),) and back.key_signatures == ((0, 2),)


def test_unknown_time_signature_rejected():
    vocab = build_vocabulary("REMI", "score")
    doc = PieceDoc(Modality.SCORE, [NoteEvent(60, 0.0, 1.0, voice=1, measure_index=0)],
                   time_signatures=[(0, 7, 8)])
    with pytest.raises(UnsupportedCombination):
        tokenize(doc, vocab)


def test_sequence_record_shape():
    vocab = build_vocabulary("REMI", "score")
    rec = sequence_record("p", {"index": 0}, tokenize(score_note(), vocab))
    assert set(rec) == {"piece_id", "window", "scheme", "ids"}


QUANT = QuantSpec(time_signatures=((4, 4), (3, 4), (6, 8)))
CASES = [("MIDILike", "performance"), ("REMI", "performance"), ("REMI", "score"), ("CPWord", "score")]


@pytest.mark.parametrize("scheme,modality", CASES)
@given(seed=st.integers(0, 2**31), level=st.sampled_from(list(FeatureLevel)))
def test_roundtrip_within_one_bin(scheme, modality, seed, level):
    rng = np.random.default_rng(seed)
    vocab = build_vocabulary(scheme, modality, QUANT, level)
    doc = random_score(rng, 30) if modality == "score" else random_performance(rng, 30, span=15.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", QuantizationWarning)
        back = detokenize(tokenize(doc, vocab), vocab)
    assert roundtrip_violations(doc, back, vocab) == []


@given(st.integers(0, 2**31))
def test_cpword_shorter_than_remi(seed):
    doc = random_score(np.random.default_rng(seed), 20)
    remi = tokenize(doc, build_vocabulary("REMI", "score", QUANT))
    cp = tokenize(doc, build_vocabulary("CPWord", "score", QUANT))
    assert len(cp) < len(remi)


# -- BPE ------------------------------------------------------------------------------------

A, B, C = 3, 4, 5


def seq(ids):
    return TokenSequence(list(ids), "REMI", "performance")


def test_bpe_single_merge_example():
    model = bpe_train([seq([A, B, A, B, C])], base_vocab_size=6, max_merges=1)
    assert model.merges == [(A, B, 6)]
    out = bpe_apply(seq([A, B, A, B, C]), model)
    assert out.ids == [6, 6, C]
    assert bpe_decode(out, model).ids == [A, B, A, B, C]


def test_bpe_tie_break_prefers_smaller_pair():
    model = bpe_train([seq([A, B, C, 0, A, B, C])], base_vocab_size=6, max_merges=1)
    assert model.merges[0][:2] == (A, B)


def test_bpe_no_mergeable_pairs_unchanged():
    model = bpe_train([seq([A, B, A, B])], base_vocab_size=6, max_merges=1)
    assert bpe_apply(seq([C, A, C]), model).ids == [C, A, C]


def test_bpe_specials_never_merge_and_budget():
    model = bpe_train([seq([1, 3, 2] * 10)], base_vocab_size=6, multiplier=4)
    assert all(a >= 3 and b >= 3 for a, b, _ in model.merges)
    assert model.vocab_size <= 24


def test_bpe_errors_and_json():
    with pytest.raises(ValueError):
        bpe_train([], 6)
    model = bpe_train([seq([A, B, A, B, C])], 6)
    with pytest.raises(ValueError):
        bpe_decode(seq([model.vocab_size]), model)
    assert BpeModel.from_json(model.to_json()).merges == model.merges
    cp = tokenize(score_note(), build_vocabulary("CPWord", "score"))
    with pytest.raises(UnsupportedCombination):
        bpe_apply(cp, model)


def test_length_reduction():
    assert length_reduction([seq([1] * 10)], [seq([1] * 4)]) == pytest.approx(0.6)


@given(st.lists(st.lists(st.integers(3, 9), max_size=30), min_size=1, max_size=8), st.integers(1, 4))
def test_bpe_identity_and_never_longer(corpus, multiplier):
    seqs = [seq(s) for s in corpus]
    model = bpe_train(seqs, 10, multiplier=multiplier)
    for s in seqs + [seq([3, 4, 5, 3, 4])]:
        out = bpe_apply(s, model)
        assert len(out) <= len(s)
        assert bpe_decode(out, model).ids == s.ids
