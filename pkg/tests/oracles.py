"""Independent reference implementations used by the tests."""

import numpy as np


def grid(values):
    # nanosecond (or 1e-9 beat) integers
    return np.array([int(round(v * 1e9)) for v in values], dtype=np.int64)


def edge_oracle(notes, score, t_tol=0.030, silence=False, voice=False, inverse=False):
    """All typed edge sets by dense pairwise predicate evaluation."""
    n = len(notes)
    on = grid([x.onset for x in notes])
    off = grid([x.onset + x.duration for x in notes])
    tol = 0 if score else int(round(t_tol * 1e9))

    def close(a, b):
        d = np.abs(a - b)
        return d == 0 if tol == 0 else d < tol

    eye = np.eye(n, dtype=bool)
    onset = close(on[:, None], on[None, :]) & ~eye
    cons = close(off[:, None], on[None, :]) & ~eye
    # row = covering (earlier) note, column = later note
    over = (on[:, None] < on[None, :]) & (on[None, :] < off[:, None])
    out = {"onset": onset, "consecutive": cons, "overlap": over}
    if silence:
        sil = np.zeros((n, n), dtype=bool)
        incoming = cons.any(axis=0)
        for v in range(n):
            before = off <= on[v]
            if incoming[v] or not before.any():
                continue
            latest = off[before].max()
            sil[:, v] = before & close(off, latest)
        out["silence"] = sil
    if voice:
        key = np.array([hash((x.part or 0, x.measure_index, x.voice)) for x in notes])
        out["voice"] = (key[:, None] == key[None, :]) & ~eye
    sets = {k: set(zip(*map(lambda a: a.tolist(), np.nonzero(m)))) for k, m in out.items()}
    if inverse:
        sets["consecutive_inv"] = {(b, a) for a, b in sets["consecutive"]}
        sets["overlap_inv"] = {(b, a) for a, b in sets["overlap"]}
    return sets


def pearson_two_pass(x, y):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    mx, my = x.sum() / x.size, y.sum() / y.size
    dx, dy = x - mx, y - my
    return float((dx * dy).sum() / np.sqrt((dx * dx).sum() * (dy * dy).sum()))
