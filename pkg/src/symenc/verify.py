"""Self-checks run by ``symenc verify``.

Each suite returns a :class:`SuiteResult`; a suite that cannot find its
inputs fails with a :class:`FixtureMissing` message instead of passing.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FixtureMissing, QuantizationWarning
from .graph import GraphConfig, brute_force_edges, build_graph, to_homogeneous
from .midi import read_midi
from .musicxml import read_musicxml
from .nn import ModelConfig, grad_check, init_params
from .segmentation import leakage_audit, make_folds
from .sequence import QuantSpec, bpe_apply, bpe_decode, bpe_train, build_vocabulary, detokenize, tokenize
from .testing import random_performance, random_score

FIXTURE_DIR = Path(__file__).parent / "fixtures"
FIXTURES = ("etude.mid", "etude.musicxml")
T_TOLS = (0.0, 0.015, 0.030, 0.100)
GRAD_TOL = 1e-4


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "detail": self.detail,
                "seconds": round(self.seconds, 3)}


def suite_fixtures(fixture_dir: Path = FIXTURE_DIR) -> str:
    missing = [name for name in FIXTURES if not (Path(fixture_dir) / name).is_file()]
    if missing:
        raise FixtureMissing(f"missing fixtures in {fixture_dir}: {', '.join(missing)}")
    perf = read_midi(Path(fixture_dir) / "etude.mid")
    score = read_musicxml(Path(fixture_dir) / "etude.musicxml")
    return f"{len(perf.notes)} performance notes, {len(score.notes)} score notes"


def suite_graph_oracle(rng, pieces: int = 100) -> str:
    checked = 0
    for i in range(pieces):
        score = i % 2 == 1
        n = int(rng.integers(1, 201))
        doc = random_score(rng, n) if score else random_performance(rng, n)
        for t_tol in ((0.030,) if score else T_TOLS):
            cfg = GraphConfig(t_tol=t_tol, inverse_edges=True, include_silence_edges=True,
                              include_voice_edges=score)
            graph = build_graph(doc, None, cfg)
            expected = brute_force_edges(doc, None, cfg)
            for kind, edges in expected.items():
                if graph.edge_set(kind) != edges:
                    raise AssertionError(f"piece {i} t_tol={t_tol}: {kind} edges differ from brute force")
            union = set().union(*expected.values())
            if to_homogeneous(graph).edge_set("edge") != union:
                raise AssertionError(f"piece {i}: homogeneous edges differ from the typed union")
            checked += 1
    return f"{checked} graphs match brute force"


def _bin_width(bins, value):
    bins = np.asarray(bins)
    i = int(np.clip(np.searchsorted(bins, value), 1, len(bins) - 1))
    return float(bins[i] - bins[i - 1])


def roundtrip_violations(original, decoded, vocab) -> list[str]:
    """Differences beyond one quantization bin between two note lists."""
    q = vocab.quant
    score = original.is_score
    on_bin = 1.0 / q.positions_per_quarter if score else q.grid
    dur_bins = q.score_duration_bins if score else q.duration_bins
    vel_bin = math.ceil(127 / q.velocity_bins)
    if len(original.notes) != len(decoded.notes):
        return [f"note count {len(original.notes)} != {len(decoded.notes)}"]

    advanced = vocab.feature_level.value == "advanced"

    def key(n):
        voice = (n.voice or 0) if advanced else 0
        return (n.pitch, voice, round(n.onset / on_bin), -n.duration)

    out = []
    for a, b in zip(sorted(original.notes, key=key), sorted(decoded.notes, key=key)):
        if a.pitch != b.pitch:
            out.append(f"pitch {a.pitch} != {b.pitch}")
        if abs(a.onset - b.onset) > on_bin + 1e-9:
            out.append(f"onset {a.onset} vs {b.onset}")
        width = q.grid if vocab.scheme.value == "MIDILike" else _bin_width(dur_bins, a.duration)
        if abs(a.duration - b.duration) > width + 1e-9:
            out.append(f"duration {a.duration} vs {b.duration}")
        if advanced and not score and abs(a.velocity - b.velocity) > vel_bin:
            out.append(f"velocity {a.velocity} vs {b.velocity}")
        if advanced and score and a.voice != b.voice:
            out.append(f"voice {a.voice} vs {b.voice}")
    return out


def suite_tokenizer(rng, pieces: int = 100) -> str:
    quant = QuantSpec(time_signatures=((4, 4), (3, 4), (6, 8)))
    cases = [("MIDILike", "performance"), ("REMI", "performance"), ("REMI", "score"), ("CPWord", "score")]
    total = 0
    for scheme, modality in cases:
        vocab = build_vocabulary(scheme, modality, quant)
        for i in range(pieces):
            n = int(rng.integers(1, 120))
            doc = random_score(rng, n) if modality == "score" else random_performance(rng, n, span=20.0)
            with warnings.catch_warnings():
                warnings.simplefilter("error", QuantizationWarning)
                decoded = detokenize(tokenize(doc, vocab), vocab)
            bad = roundtrip_violations(doc, decoded, vocab)
            if bad:
                raise AssertionError(f"{scheme}/{modality} piece {i}: {bad[0]}")
            total += 1
    return f"{total} round trips within one bin"


def suite_bpe(rng, pieces: int = 100) -> str:
    vocab = build_vocabulary("REMI", "performance")
    seqs = [tokenize(random_performance(rng, int(rng.integers(5, 80)), span=20.0), vocab) for _ in range(pieces)]
    model = bpe_train(seqs, len(vocab), multiplier=4)
    before = after = 0
    for s in seqs:
        merged = bpe_apply(s, model)
        if len(merged) > len(s):
            raise AssertionError("bpe_apply lengthened a sequence")
        if bpe_decode(merged, model).ids != s.ids:
            raise AssertionError("bpe_decode(bpe_apply(s)) != s")
        before += len(s)
        after += len(merged)
    return f"{len(model.merges)} merges, identity on {pieces} sequences, length -{1 - after / before:.1%}"


def suite_splits(rng, corpora: int = 20) -> str:
    for c in range(corpora):
        n = int(rng.integers(8, 200))
        pieces = [(f"p{i}", int(rng.integers(0, 4))) for i in range(n)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # small classes are expected here
            plan = make_folds(pieces, seed=int(rng.integers(2**31)))
        report = leakage_audit(plan, [p for p, _ in pieces])
        if not report.clean:
            raise AssertionError(f"corpus {c}: {report.to_dict()}")
        for fold in plan.folds:
            if abs(len(fold["test"]) - 0.15 * n) > 1:
                raise AssertionError(f"corpus {c}: test size {len(fold['test'])} for {n} pieces")
    return f"{corpora} corpora, no leakage"


def suite_grad(rng, inject_fault: float | None = None) -> str:
    docs = [random_performance(rng, int(rng.integers(10, 31)), span=5.0) for _ in range(2)]
    graphs = [build_graph(d, None, GraphConfig(include_silence_edges=True)) for d in docs]
    cfg = ModelConfig(input_dim=graphs[0].features.shape[1], num_classes=3)
    params = init_params(cfg, int(rng.integers(2**31)))
    report = grad_check(params, [graphs], [int(rng.integers(3))], cfg, seed=int(rng.integers(2**31)),
                        inject_fault=inject_fault)
    detail = f"max relative error {report.max_rel_err:.3g} over {report.entries_checked} entries"
    if not report.passed(GRAD_TOL):
        raise AssertionError(detail)
    return detail


def run_all(seed: int = 0, scale: int = 1, inject_grad_fault: float | None = None,
            fixture_dir: Path = FIXTURE_DIR) -> list[SuiteResult]:
    suites = [
        ("fixtures", lambda rng: suite_fixtures(fixture_dir)),
        ("graph-oracle", lambda rng: suite_graph_oracle(rng, 20 * scale)),
        ("tokenizer-roundtrip", lambda rng: suite_tokenizer(rng, 20 * scale)),
        ("bpe-identity", lambda rng: suite_bpe(rng, 20 * scale)),
        ("split-leakage", lambda rng: suite_splits(rng, 20 * scale)),
        ("grad-check", lambda rng: suite_grad(rng, inject_grad_fault)),
    ]
    results = []
    for i, (name, fn) in enumerate(suites):
        rng = np.random.default_rng([seed, i])
        start = time.perf_counter()
        try:
            detail, ok = fn(rng), True
        except FixtureMissing as exc:
            detail, ok = f"FixtureMissing: {exc}", False
        except Exception as exc:  # a failing suite is reported, not raised
            detail, ok = f"{type(exc).__name__}: {exc}", False
        results.append(SuiteResult(name, ok, detail, time.perf_counter() - start))
    return results
