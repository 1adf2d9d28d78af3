import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symenc import kernels
from symenc._backend import HAS_NUMBA, backend, set_backend, use_backend
from symenc.graph import GraphConfig, build_graph
from symenc.matrix import MatrixConfig, build_roll
from symenc.sequence import TokenSequence, bpe_apply, bpe_train
from symenc.testing import random_performance, random_score

pytestmark = pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")


def both(fn):
    with use_backend("numpy"):
        a = fn()
    with use_backend("numba"):
        b = fn()
    return a, b


@given(st.integers(0, 2**31), st.booleans(), st.sampled_from([0.0, 0.03, 0.1]))
def test_graph_backends_agree(seed, score, t_tol):
    rng = np.random.default_rng(seed)
    doc = random_score(rng, 80) if score else random_performance(rng, 80, span=10.0)
    cfg = GraphConfig(t_tol=t_tol, include_silence_edges=True, inverse_edges=True)
    a, b = both(lambda: build_graph(doc, None, cfg).edges)
    assert a.keys() == b.keys()
    for k in a:
        np.testing.assert_array_equal(a[k], b[k])


@given(st.integers(0, 2**31), st.booleans())
def test_roll_backends_agree(seed, pedals):
    doc = random_performance(np.random.default_rng(seed), 60, span=70.0)
    cfg = MatrixConfig(resolution=400, include_pedal_rows=pedals)
    a, b = both(lambda: build_roll(doc, 5.0, cfg).values)
    np.testing.assert_array_equal(a, b)


@given(st.lists(st.lists(st.integers(0, 11), max_size=40), min_size=1, max_size=6), st.integers(1, 4))
def test_bpe_backends_agree(corpus, multiplier):
    seqs = [TokenSequence(s, "REMI", "performance") for s in corpus]
    ma, mb = both(lambda: bpe_train(seqs, 12, multiplier))
    assert ma.merges == mb.merges
    a, b = both(lambda: [bpe_apply(s, ma).ids for s in seqs])
    assert a == b


def test_onset_pairs_nonpositive_tolerance():
    on = np.array([0, 0, 5, 5, 9], dtype=np.int64)
    a, b = both(lambda: sorted(zip(*[x.tolist() for x in kernels.onset_pairs(on, 0)])))
    assert a == b == []


def test_backend_switching():
    start = backend()
    with use_backend("numpy"):
        assert backend() == "numpy"
    assert backend() == start
    with pytest.raises(ValueError):
        set_backend("cuda")


def test_environment_flag():
    code = "from symenc._backend import backend; print(backend())"
    env = dict(os.environ, SYMENC_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["SYMENC_BACKEND"] = "fortran"
    bad = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert bad.returncode != 0 and "SYMENC_BACKEND" in bad.stderr
