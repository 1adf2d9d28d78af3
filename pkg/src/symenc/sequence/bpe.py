"""Byte-pair encoding over token-id sequences."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from .._backend import backend
from ..errors import UnsupportedCombination
from .tokenizer import TokenSequence
from .vocab import SPECIALS, Scheme

SEPARATOR = -1


@dataclass
class BpeModel:
    merges: list  # [(a, b, new_id)] in learned order
    base_vocab_size: int
    target_multiplier: int = 4
    expansion: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.merges = [tuple(int(x) for x in m) for m in self.merges]
        self.expansion = {}
        for a, b, new in self.merges:
            self.expansion[new] = self._expand(a) + self._expand(b)

    def _expand(self, token_id: int) -> tuple:
        return self.expansion.get(token_id, (token_id,))

    @property
    def vocab_size(self) -> int:
        return self.base_vocab_size + len(self.merges)

    def to_json(self) -> str:
        return json.dumps({
            "base_vocab_size": self.base_vocab_size,
            "target_multiplier": self.target_multiplier,
            "merges": [list(m) for m in self.merges],
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "BpeModel":
        data = json.loads(text)
        return cls([tuple(m) for m in data["merges"]], int(data["base_vocab_size"]),
                   int(data["target_multiplier"]))


def _flat_ids(seq) -> np.ndarray:
    ids = seq.ids if isinstance(seq, TokenSequence) else seq
    if isinstance(seq, TokenSequence) and seq.scheme is Scheme.CPWORD:
        raise UnsupportedCombination("CPWord tuples are not BPE-merged")
    return np.asarray(ids, dtype=np.int64).reshape(-1)


def bpe_train(corpus, base_vocab_size: int, multiplier: int = 4,
              max_merges: int | None = None) -> BpeModel:
    """Learn merges until the vocabulary reaches ``multiplier * base_vocab_size``.

    Each step merges the globally most frequent adjacent pair (ties: lower
    first id, then lower second id). Training stops early once no pair
    occurs at least twice. Special ids never merge.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("cannot train BPE on an empty corpus")
    parts = []
    for seq in corpus:
        parts.append(_flat_ids(seq))
        parts.append(np.array([SEPARATOR], dtype=np.int64))
    flat = np.concatenate(parts)
    if flat.size and flat.max() >= base_vocab_size:
        raise ValueError("corpus contains ids outside the base vocabulary")
    budget = multiplier * base_vocab_size - base_vocab_size
    if max_merges is not None:
        budget = min(budget, max_merges)
    stride = base_vocab_size + max(budget, 0)
    # pair-count scratch for the compiled kernel
    counts = np.zeros(stride * stride if backend() == "numba" else 1, dtype=np.int64)
    merges = []
    next_id = base_vocab_size
    for _ in range(max(budget, 0)):
        code, count = kernels.best_pair(flat, stride, len(SPECIALS), counts)
        if count < 2:
            break
        a, b = divmod(int(code), stride)
        flat = kernels.merge_pair(flat, a, b, next_id)
        merges.append((a, b, next_id))
        next_id += 1
    return BpeModel(merges, base_vocab_size, multiplier)


def _check_ids(ids: np.ndarray, limit: int):
    bad = np.flatnonzero((ids < 0) | (ids >= limit))
    if bad.size:
        raise ValueError(f"token id {int(ids[bad[0]])} at position {int(bad[0])} is outside the vocabulary")


def bpe_apply(seq: TokenSequence, model: BpeModel) -> TokenSequence:
    """Segment ``seq`` with the learned merges, in learned order."""
    ids = _flat_ids(seq)
    _check_ids(ids, model.base_vocab_size)
    if model.merges and ids.size > 1:
        m = np.asarray(model.merges, dtype=np.int64)
        present = np.zeros(model.vocab_size, dtype=np.int64)
        ids = kernels.apply_merges(ids, m[:, 0].copy(), m[:, 1].copy(), m[:, 2].copy(), present)
    return TokenSequence(ids.tolist(), seq.scheme, seq.modality, dict(seq.meta))


def bpe_decode(seq: TokenSequence, model: BpeModel) -> TokenSequence:
    """Expand merged ids back to base-vocabulary ids."""
    ids = _flat_ids(seq)
    _check_ids(ids, model.vocab_size)
    out = []
    for t in ids.tolist():
        out.extend(model._expand(t))
    return TokenSequence(out, seq.scheme, seq.modality, dict(seq.meta))


def length_reduction(before, after) -> float:
    """Fractional reduction in total token count, e.g. 0.6 for 60% shorter."""
    total = sum(len(s) for s in before)
    return 1.0 - sum(len(s) for s in after) / total if total else 0.0
