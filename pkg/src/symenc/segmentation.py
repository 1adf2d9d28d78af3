"""Fixed-length windowing and piece-disjoint cross-validation splits."""

from __future__ import annotations

import dataclasses
import json
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .model import WINDOW_LENGTH, PieceDoc

REMAINDER_FRACTION = 0.25


@dataclass(frozen=True)
class Window:
    piece_id: str
    start: float
    length: float
    index: int

    @property
    def end(self) -> float:
        return self.start + self.length

    def to_dict(self) -> dict:
        return {"index": self.index, "start": self.start, "length": self.length}


def segment(doc: PieceDoc, window_length: float | None = None) -> list[Window]:
    """Tile ``[0, doc.end_time)`` with windows of the modality's length.

    A trailing remainder shorter than 25% of a window is merged into the
    previous window; otherwise it becomes a short final window.
    """
    length = window_length or WINDOW_LENGTH[doc.modality]
    total = doc.end_time
    if total <= length:
        return [Window(doc.piece_id, 0.0, total, 0)]
    n_full = int(math.floor(total / length))
    remainder = total - n_full * length
    windows = [Window(doc.piece_id, i * length, length, i) for i in range(n_full)]
    if remainder >= REMAINDER_FRACTION * length:
        windows.append(Window(doc.piece_id, n_full * length, remainder, n_full))
    elif remainder > 0:
        last = windows[-1]
        windows[-1] = Window(doc.piece_id, last.start, total - last.start, last.index)
    return windows


def slice_window(doc: PieceDoc, window: Window) -> PieceDoc:
    """Notes with onset inside ``window``, re-timed so the window starts at 0.

    Score context is rebased too: the time and key signature in force at the
    window's first measure become measure 0. Pedals are clipped.
    """
    start, end = window.start, window.end
    notes = [n for n in doc.notes if start <= n.onset < end]
    shifted = []
    base_measure = None
    if doc.is_score and notes:
        base_measure = min(n.measure_index or 0 for n in notes)
    for n in notes:
        changes = {"onset": n.onset - start}
        if base_measure is not None and n.measure_index is not None:
            changes["measure_index"] = n.measure_index - base_measure
        shifted.append(_replace(n, **changes))
    pedals = []
    for p in doc.pedals:
        lo, hi = max(p.onset, start), min(p.offset, end)
        if hi > lo:
            pedals.append(type(p)(p.kind, lo - start, hi - lo))
    time_sigs, key_sigs = (), ()
    if doc.is_score and base_measure is not None:
        time_sigs = _rebase(doc.time_signatures, base_measure)
        key_sigs = _rebase(doc.key_signatures, base_measure)
    return doc.replace(notes=tuple(shifted), pedals=tuple(pedals),
                       time_signatures=time_sigs, key_signatures=key_sigs)


def _replace(note, **changes):
    return dataclasses.replace(note, **changes)


def _rebase(entries, base):
    """Keep the entry in force at ``base`` (as measure 0) and later changes."""
    out = []
    current = None
    for entry in sorted(entries):
        if entry[0] <= base:
            current = entry
        else:
            out.append((entry[0] - base,) + tuple(entry[1:]))
    if current is not None:
        out.insert(0, (0,) + tuple(current[1:]))
    return tuple(out)


# -- splits -------------------------------------------------------------------

@dataclass
class SplitPlan:
    num_folds: int
    seed: int
    folds: list = field(default_factory=list)  # [{"train": set, "test": set}]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "num_folds": self.num_folds,
            "folds": [{"train": sorted(f["train"]), "test": sorted(f["test"])} for f in self.folds],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "SplitPlan":
        folds = [{"train": set(f["train"]), "test": set(f["test"])} for f in data["folds"]]
        return cls(int(data["num_folds"]), int(data["seed"]), folds)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _allocate(sizes: dict, total: int) -> dict:
    """Split ``total`` across classes proportionally (largest remainder)."""
    n = sum(sizes.values())
    quotas = {c: total * s / n for c, s in sizes.items()}
    alloc = {c: min(int(math.floor(q)), sizes[c]) for c, q in quotas.items()}
    left = total - sum(alloc.values())
    order = sorted(sizes, key=lambda c: (-(quotas[c] - math.floor(quotas[c])), str(c)))
    while left > 0:
        progressed = False
        for c in order:
            if left and alloc[c] < sizes[c]:
                alloc[c] += 1
                left -= 1
                progressed = True
        if not progressed:
            break
    return alloc


def make_folds(pieces, k: int = 8, test_frac: float = 0.15, seed: int = 0,
               stratify: bool = True) -> SplitPlan:
    """Draw ``k`` seeded piece-level holdout splits.

    ``pieces`` is an iterable of ``(piece_id, label)``; repeated piece ids
    (several performances of one piece) collapse to a single unit, so they
    always land on the same side. Each fold tests ``round(test_frac * P)``
    distinct pieces, stratified by label unless ``stratify`` is false.
    """
    labels = {}
    for piece_id, label in pieces:
        labels.setdefault(piece_id, label)
    ids = sorted(labels)
    if len(ids) < k:
        raise ValueError(f"need at least {k} pieces, got {len(ids)}")
    n_test = _round_half_up(test_frac * len(ids))
    by_class = defaultdict(list)
    for pid in ids:
        by_class[labels[pid]].append(pid)
    small = sorted(str(c) for c, members in by_class.items() if len(members) < k)
    if small:
        warnings.warn(f"classes with fewer pieces than folds: {', '.join(small)}", stacklevel=2)

    rng = np.random.default_rng(seed)
    folds = []
    classes = sorted(by_class, key=str)
    for _ in range(k):
        if stratify:
            alloc = _allocate({c: len(by_class[c]) for c in classes}, n_test)
            test = set()
            for c in classes:
                members = by_class[c]
                pick = rng.permutation(len(members))[: alloc[c]]
                test.update(members[i] for i in pick)
        else:
            test = {ids[i] for i in rng.permutation(len(ids))[:n_test]}
        folds.append({"train": set(ids) - test, "test": test})
    return SplitPlan(num_folds=k, seed=seed, folds=folds)


@dataclass
class AuditReport:
    leaks: list = field(default_factory=list)  # (fold, piece_id)
    unassigned: list = field(default_factory=list)  # (fold, piece_id)

    @property
    def clean(self) -> bool:
        return not self.leaks and not self.unassigned

    def to_dict(self) -> dict:
        return {"leaks": [list(x) for x in self.leaks], "unassigned": [list(x) for x in self.unassigned],
                "clean": self.clean}


def leakage_audit(plan: SplitPlan, corpus) -> AuditReport:
    """List pieces on both sides of a fold and corpus pieces a fold misses.

    ``corpus`` is an iterable of piece ids or of documents with ``piece_id``.
    """
    ids = sorted({getattr(item, "piece_id", item) for item in corpus})
    report = AuditReport()
    for f, fold in enumerate(plan.folds):
        train, test = set(fold["train"]), set(fold["test"])
        for pid in sorted(train & test):
            report.leaks.append((f, pid))
        for pid in ids:
            if pid not in train and pid not in test:
                report.unassigned.append((f, pid))
    return report


def window_sides(plan: SplitPlan, windows, fold: int) -> dict:
    """Assign each window to the side of its piece in ``fold``."""
    f = plan.folds[fold]
    out = {}
    for w in windows:
        out[(w.piece_id, w.index)] = "test" if w.piece_id in f["test"] else "train"
    return out

