"""Numeric inner loops, each with a numba and a pure-numpy implementation.

The public names at the bottom dispatch on the active backend (see
:mod:`symenc._backend`). Both implementations of a kernel must return
identical arrays; ``tests/test_kernels.py`` checks this on random input.
All times are integer ticks (see :func:`symenc.model.to_ticks`).
"""

from __future__ import annotations

import numpy as np

from ._backend import dispatch, njit

# -- piano roll ---------------------------------------------------------------


@njit
def _fill_roll_numba(rows, start, stop, values, onset_mask, frame, onset):
    for i in range(rows.shape[0]):
        r = rows[i]
        for c in range(start[i], stop[i] + 1):
            if values[i] > frame[r, c]:
                frame[r, c] = values[i]
        if onset_mask[i]:
            onset[r, start[i]] = 1


def _fill_roll_numpy(rows, start, stop, values, onset_mask, frame, onset):
    """Write note spans into ``frame`` (max on collision) and ``onset`` in place.

    Span ``i`` covers columns ``start[i]..stop[i]`` inclusive of row ``rows[i]``.
    """
    lengths = stop - start + 1
    if lengths.size:
        rr = np.repeat(rows, lengths)
        offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
        cc = np.repeat(start, lengths) + offsets
        np.maximum.at(frame, (rr, cc), np.repeat(values, lengths).astype(frame.dtype))
        onset[rows[onset_mask], start[onset_mask]] = 1


# -- graph relations ----------------------------------------------------------
# ``on`` is sorted ascending. ``tol`` is a strict tick tolerance: two
# instants match when |a - b| < tol, so tol == 1 means exact equality.


@njit
def _onset_pairs_numba(on, tol):
    n = on.shape[0]
    lo = np.searchsorted(on, on - tol + 1, side="left")
    hi = np.searchsorted(on, on + tol - 1, side="right")
    total = 0
    for v in range(n):
        for u in range(lo[v], hi[v]):
            if u != v:
                total += 1
    src = np.empty(total, np.int64)
    dst = np.empty(total, np.int64)
    k = 0
    for v in range(n):
        for u in range(lo[v], hi[v]):
            if u != v:
                src[k] = u
                dst[k] = v
                k += 1
    return src, dst


def _onset_pairs_numpy(on, tol):
    """Pairs (u, v), u != v, with |on[u] - on[v]| < tol."""
    lo = np.searchsorted(on, on - tol + 1, side="left")
    hi = np.searchsorted(on, on + tol - 1, side="right")
    src, dst = _expand_ranges(lo, hi, np.arange(on.shape[0]))
    keep = src != dst
    return src[keep], dst[keep]


@njit
def _consecutive_pairs_numba(on, off, tol):
    order = np.argsort(off, kind="mergesort")
    offs = off[order]
    lo = np.searchsorted(offs, on - tol + 1, side="left")
    hi = np.searchsorted(offs, on + tol - 1, side="right")
    n = on.shape[0]
    total = 0
    for v in range(n):
        for j in range(lo[v], hi[v]):
            if order[j] != v:
                total += 1
    src = np.empty(total, np.int64)
    dst = np.empty(total, np.int64)
    k = 0
    for v in range(n):
        for j in range(lo[v], hi[v]):
            if order[j] != v:
                src[k] = order[j]
                dst[k] = v
                k += 1
    return src, dst


def _consecutive_pairs_numpy(on, off, tol):
    """Pairs (u, v), u != v, with |off[u] - on[v]| < tol."""
    order = np.argsort(off, kind="mergesort")
    offs = off[order]
    lo = np.searchsorted(offs, on - tol + 1, side="left")
    hi = np.searchsorted(offs, on + tol - 1, side="right")
    pos, dst = _expand_ranges(lo, hi, np.arange(on.shape[0]))
    src = order[pos]
    keep = src != dst
    return src[keep], dst[keep]


@njit
def _overlap_pairs_numba(on, off):
    n = on.shape[0]
    active = np.empty(n, np.int64)
    cap = 16
    src = np.empty(cap, np.int64)
    dst = np.empty(cap, np.int64)
    k = 0
    n_active = 0
    i = 0
    while i < n:
        t = on[i]
        j = i
        while j < n and on[j] == t:
            j += 1
        # drop notes that ended at or before t
        m = 0
        for a in range(n_active):
            if off[active[a]] > t:
                active[m] = active[a]
                m += 1
        n_active = m
        for v in range(i, j):
            for a in range(n_active):
                if k == cap:
                    cap *= 2
                    src2 = np.empty(cap, np.int64)
                    dst2 = np.empty(cap, np.int64)
                    src2[:k] = src[:k]
                    dst2[:k] = dst[:k]
                    src = src2
                    dst = dst2
                src[k] = active[a]
                dst[k] = v
                k += 1
        for v in range(i, j):
            active[n_active] = v
            n_active += 1
        i = j
    return src[:k].copy(), dst[:k].copy()


def _overlap_pairs_numpy(on, off):
    """Pairs (u, v) with on[u] < on[v] < off[u], by an onset-ordered sweep."""
    n = on.shape[0]
    starts = np.flatnonzero(np.r_[True, on[1:] != on[:-1]]) if n else np.empty(0, np.int64)
    bounds = np.r_[starts, n]
    active = np.empty(0, np.int64)
    srcs, dsts = [], []
    for g in range(starts.shape[0]):
        i, j = bounds[g], bounds[g + 1]
        t = on[i]
        active = active[off[active] > t]
        if active.size:
            srcs.append(np.tile(active, j - i))
            dsts.append(np.repeat(np.arange(i, j), active.size))
        active = np.concatenate([active, np.arange(i, j)])
    if not srcs:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(srcs).astype(np.int64), np.concatenate(dsts).astype(np.int64)


@njit
def _silence_pairs_numba(on, off, tol, blocked):
    order = np.argsort(off, kind="mergesort")
    offs = off[order]
    n = on.shape[0]
    hi = np.searchsorted(offs, on, side="right")
    lo = np.zeros(n, np.int64)
    total = 0
    for v in range(n):
        if blocked[v] or hi[v] == 0:
            continue
        m = offs[hi[v] - 1]
        lo[v] = np.searchsorted(offs, m - tol + 1, side="left")
        total += hi[v] - lo[v]
    src = np.empty(total, np.int64)
    dst = np.empty(total, np.int64)
    k = 0
    for v in range(n):
        if blocked[v] or hi[v] == 0:
            continue
        for j in range(lo[v], hi[v]):
            src[k] = order[j]
            dst[k] = v
            k += 1
    return src, dst


def _silence_pairs_numpy(on, off, tol, blocked):
    """For each unblocked v, pairs (u, v) where off[u] is within tol of the
    latest offset not after on[v]."""
    order = np.argsort(off, kind="mergesort")
    offs = off[order]
    hi = np.searchsorted(offs, on, side="right")
    ok = (~blocked) & (hi > 0)
    latest = offs[np.maximum(hi - 1, 0)]
    lo = np.searchsorted(offs, latest - tol + 1, side="left")
    lo = np.where(ok, lo, 0)
    hi = np.where(ok, hi, 0)
    pos, dst = _expand_ranges(lo, hi, np.arange(on.shape[0]))
    return order[pos], dst


def _expand_ranges(lo, hi, owner):
    """Flatten ranges [lo[i], hi[i]) into (position, owner[i]) arrays."""
    counts = np.maximum(hi - lo, 0)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    first = np.repeat(lo - (np.cumsum(counts) - counts), counts)
    pos = first + np.arange(total)
    return pos.astype(np.int64), np.repeat(owner, counts).astype(np.int64)


# -- byte-pair encoding -------------------------------------------------------
# Sequences are concatenated with -1 separators. Ids below ``first_id`` are
# special tokens and never take part in a merge.


@njit
def _best_pair_numba(seq, stride, first_id, counts):
    best = -1
    best_count = 0
    for i in range(seq.shape[0] - 1):
        a = seq[i]
        b = seq[i + 1]
        if a >= first_id and b >= first_id:
            code = a * stride + b
            c = counts[code] + 1
            counts[code] = c
            if c > best_count or (c == best_count and code < best):
                best_count = c
                best = code
    for i in range(seq.shape[0] - 1):
        a = seq[i]
        b = seq[i + 1]
        if a >= first_id and b >= first_id:
            counts[a * stride + b] = 0
    return best, best_count


def _best_pair_numpy(seq, stride, first_id, counts):
    """Most frequent adjacent pair code ``a * stride + b`` and its count.

    Ties go to the smallest code, i.e. lower first id, then lower second id.
    ``counts`` is a scratch buffer used only by the numba kernel.
    """
    a, b = seq[:-1], seq[1:]
    valid = (a >= first_id) & (b >= first_id)
    if not valid.any():
        return -1, 0
    tally = np.bincount(a[valid] * stride + b[valid])
    best = int(np.argmax(tally))
    return best, int(tally[best])


@njit
def _merge_pair_numba(seq, a, b, new):
    out = np.empty_like(seq)
    n = seq.shape[0]
    i = 0
    k = 0
    while i < n:
        if i + 1 < n and seq[i] == a and seq[i + 1] == b:
            out[k] = new
            i += 2
        else:
            out[k] = seq[i]
            i += 1
        k += 1
    return out[:k].copy()


def _merge_pair_numpy(seq, a, b, new):
    """Replace non-overlapping (a, b) occurrences, scanning left to right."""
    if seq.shape[0] < 2:
        return seq.copy()
    hit = (seq[:-1] == a) & (seq[1:] == b)
    if a == b:
        # inside a run of a's only pairs starting at even run offsets merge
        is_a = seq == a
        idx = np.arange(seq.shape[0])
        run_start = np.maximum.accumulate(np.where(is_a & ~np.r_[False, is_a[:-1]], idx, 0))
        hit &= ((idx[:-1] - run_start[:-1]) % 2) == 0
    starts = np.flatnonzero(hit)
    if starts.size == 0:
        return seq.copy()
    out = seq.copy()
    out[starts] = new
    return np.delete(out, starts + 1)


@njit
def _apply_merges_numba(seq, pair_a, pair_b, new_ids, present):
    seq = seq.copy()
    for j in range(seq.shape[0]):
        present[seq[j]] += 1
    for m in range(pair_a.shape[0]):
        a = pair_a[m]
        b = pair_b[m]
        if present[a] == 0 or present[b] == 0:
            continue
        n = seq.shape[0]
        i = 0
        k = 0
        while i < n:
            if i + 1 < n and seq[i] == a and seq[i + 1] == b:
                seq[k] = new_ids[m]
                present[a] -= 1
                present[b] -= 1
                present[new_ids[m]] += 1
                i += 2
            else:
                seq[k] = seq[i]
                i += 1
            k += 1
        seq = seq[:k]
    for j in range(seq.shape[0]):
        present[seq[j]] = 0
    return seq.copy()


def _apply_merges_numpy(seq, pair_a, pair_b, new_ids, present):
    """Apply merges in learned order, skipping merges whose ids are absent."""
    seq = seq.copy()
    counts = np.bincount(seq, minlength=present.shape[0]) if seq.size else np.zeros(present.shape[0], np.int64)
    for a, b, new in zip(pair_a.tolist(), pair_b.tolist(), new_ids.tolist()):
        if counts[a] == 0 or counts[b] == 0:
            continue
        before = seq.shape[0]
        seq = _merge_pair_numpy(seq, a, b, new)
        merged = before - seq.shape[0]
        counts[a] -= merged
        counts[b] -= merged
        counts[new] += merged
    return seq


fill_roll = dispatch(_fill_roll_numba, _fill_roll_numpy)
onset_pairs = dispatch(_onset_pairs_numba, _onset_pairs_numpy)
consecutive_pairs = dispatch(_consecutive_pairs_numba, _consecutive_pairs_numpy)
overlap_pairs = dispatch(_overlap_pairs_numba, _overlap_pairs_numpy)
silence_pairs = dispatch(_silence_pairs_numba, _silence_pairs_numpy)
best_pair = dispatch(_best_pair_numba, _best_pair_numpy)
merge_pair = dispatch(_merge_pair_numba, _merge_pair_numpy)
apply_merges = dispatch(_apply_merges_numba, _apply_merges_numpy)
