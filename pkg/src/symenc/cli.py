"""``symenc`` command-line interface.

Outputs live under ``--out`` as ``canonical/``, ``encoded/<rep>/``,
``splits/`` and ``reports/``. Exit codes: 0 success, 1 processing
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import glob
import json
import logging
import statistics
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SymencError, ZeroVariance
from .graph import GraphConfig, NoteGraph, build_graph
from .matrix import MatrixConfig, build_roll, payload_size, roll_to_bytes, sidecar
from .midi import read_midi
from .model import WINDOW_LENGTH, FeatureLevel, Modality, dumps, loads
from .musicxml import read_musicxml
from .nn import aggregated_adjacency, attention_adjacency_correlation
from .segmentation import SplitPlan, leakage_audit, make_folds, segment, slice_window
from .sequence import (QuantSpec, TokenSequence, bpe_apply, bpe_train, build_vocabulary,
                       length_reduction, sequence_record, tokenize)
from .sequence.vocab import Scheme

log = logging.getLogger("symenc")

MIDI_SUFFIXES = {".mid", ".midi"}
XML_SUFFIXES = {".xml", ".musicxml", ".mxl"}
REPS = ("matrix", "sequence", "graph")
COMMON_TIME_SIGNATURES = ((2, 2), (3, 2), (2, 4), (3, 4), (4, 4), (5, 4), (6, 4), (3, 8), (6, 8), (9, 8), (12, 8))

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "keep_going": False,
    "feature_level": "advanced",
    "matrix": MatrixConfig().to_dict(),
    "graph": GraphConfig().to_dict(),
    "sequence": {"scheme": "REMI", "quant": QuantSpec(time_signatures=COMMON_TIME_SIGNATURES).to_dict()},
    "bpe": {"multiplier": 4},
    "split": {"folds": 8, "test_frac": 0.15, "stratify": True},
}


class UsageError(Exception):
    pass


# -- config ---------------------------------------------------------------------

def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def effective_config(args) -> dict:
    """Defaults, then the ``--config`` file, then explicit flags."""
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        try:
            cfg = _merge(cfg, json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    flags = {
        "seed": args.seed,
        "jobs": args.jobs,
        "keep_going": args.keep_going or None,
        "feature_level": getattr(args, "feature_level", None),
    }
    cfg.update({k: v for k, v in flags.items() if v is not None})
    m, g, s = cfg["matrix"], cfg["graph"], cfg["sequence"]
    for src, dst, key in [
        ("resolution", m, "resolution"), ("channels", m, "channels"), ("pedal_rows", m, "include_pedal_rows"),
        ("window_length", m, "window_length"),
        ("t_tol", g, "t_tol"), ("inverse_edges", g, "inverse_edges"), ("silence_edges", g, "include_silence_edges"),
        ("voice_edges", g, "include_voice_edges"), ("scheme", s, "scheme"),
        ("velocity_bins", s["quant"], "velocity_bins"), ("positions_per_quarter", s["quant"], "positions_per_quarter"),
        ("multiplier", cfg["bpe"], "multiplier"), ("folds", cfg["split"], "folds"),
        ("test_frac", cfg["split"], "test_frac"),
    ]:
        value = getattr(args, src, None)
        if value is not None:
            dst[key] = value
    if getattr(args, "homogeneous", False):
        g["heterogeneous"] = False
    m["feature_level"] = g["feature_level"] = cfg["feature_level"]
    if cfg["jobs"] < 1:
        raise UsageError("--jobs must be at least 1")
    try:
        _matrix_cfg(cfg), _graph_cfg(cfg), _quant(cfg), Scheme.parse(s["scheme"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc
    return cfg


def _matrix_cfg(cfg) -> MatrixConfig:
    d = dict(cfg["matrix"])
    d["channels"] = tuple(d["channels"])
    return MatrixConfig(**d)


def _graph_cfg(cfg) -> GraphConfig:
    return GraphConfig(**cfg["graph"])


def _quant(cfg) -> QuantSpec:
    return QuantSpec.from_dict(cfg["sequence"]["quant"])


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def _echo_config(directory: Path, cfg: dict, command: str) -> None:
    _write_json(directory / "config.json", {"command": command, "version": __version__, **cfg})


def _read_jsonl(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def _write_jsonl(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))


def _map(fn, items, jobs: int):
    """Ordered map; a process pool when ``jobs > 1``."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- ingest -------------------------------------------------------------------------

def _collect_inputs(paths) -> list[Path]:
    files = []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            files.extend(f for f in path.rglob("*") if f.suffix.lower() in MIDI_SUFFIXES | XML_SUFFIXES)
        elif any(ch in p for ch in "*?["):
            files.extend(Path(f) for f in glob.glob(p, recursive=True)
                         if Path(f).suffix.lower() in MIDI_SUFFIXES | XML_SUFFIXES)
        else:
            files.append(path)
    return sorted(set(files))


def _piece_ids(files: list[Path]) -> list[str]:
    """File stems, disambiguated with a numeric suffix on collision."""
    seen: dict[str, int] = {}
    out = []
    for f in files:
        stem = f.stem
        seen[stem] = seen.get(stem, 0) + 1
        out.append(stem if seen[stem] == 1 else f"{stem}-{seen[stem]}")
    return out


def _ingest_one(job):
    path, piece_id, out_dir = job
    path = Path(path)
    suffix = path.suffix.lower()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            if suffix in MIDI_SUFFIXES:
                doc = read_midi(path, piece_id)
            elif suffix in XML_SUFFIXES:
                doc = read_musicxml(path, piece_id)
            else:
                raise SymencError(f"unsupported file type {suffix!r}")
        except (SymencError, OSError, ValueError) as exc:
            return {"piece_id": piece_id, "source": str(path), "ok": False,
                    "error": f"{type(exc).__name__}: {exc}"}
    target = Path(out_dir) / f"{piece_id}.json"
    target.write_text(dumps(doc))
    return {
        "piece_id": piece_id, "source": str(path), "ok": True, "modality": doc.modality.value,
        "notes": len(doc.notes), "duration": doc.end_time, "path": target.name,
        "warnings": sorted({str(w.message) for w in caught}),
    }


def cmd_ingest(args, cfg) -> int:
    files = _collect_inputs(args.paths)
    if not files:
        raise UsageError("no input files found")
    out = Path(cfg["out"]) / "canonical"
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(str(f), pid, str(out)) for f, pid in zip(files, _piece_ids(files))]
    rows = sorted(_map(_ingest_one, jobs, cfg["jobs"]), key=lambda r: r["piece_id"])
    manifest = {"pieces": [r for r in rows if r["ok"]], "failures": [r for r in rows if not r["ok"]]}
    _write_json(out / "manifest.json", manifest)
    _echo_config(out, cfg, "ingest")
    for f in manifest["failures"]:
        log.error("%s: %s", f["source"], f["error"])
    print(f"ingested {len(manifest['pieces'])} of {len(rows)} files into {out}")
    return 0 if not manifest["failures"] or cfg["keep_going"] else 1


# -- encode -----------------------------------------------------------------------

def _load_manifest(path) -> tuple[Path, list[dict]]:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}") from exc
    return path.parent, data["pieces"]


def _encode_windows(rep, doc, cfg, out_dir: Path):
    """Encode every window of ``doc``; returns index rows."""
    rows = []
    windows = segment(doc)
    if rep == "matrix":
        mcfg = _matrix_cfg(cfg)
        base = mcfg.window_length or WINDOW_LENGTH[doc.modality]
        piece_dir = out_dir / doc.piece_id
        piece_dir.mkdir(parents=True, exist_ok=True)
        for w in windows:
            # a merged tail window keeps every note by stretching the columns
            wcfg = dataclasses.replace(mcfg, window_length=w.length) if w.length > base else mcfg
            roll = build_roll(doc, w.start, wcfg)
            data = roll_to_bytes(roll)
            name = f"{doc.piece_id}/{w.index:04d}.symr"
            (out_dir / name).write_bytes(data)
            (out_dir / name).with_suffix(".json").write_text(sidecar(roll, doc.piece_id, w.index) + "\n")
            rows.append({"piece_id": doc.piece_id, "window": w.index, "path": name, "bytes": payload_size(data)})
    elif rep == "sequence":
        vocab = build_vocabulary(cfg["sequence"]["scheme"], doc.modality, _quant(cfg), cfg["feature_level"])
        records = []
        for w in windows:
            seq = tokenize(slice_window(doc, w), vocab)
            records.append(sequence_record(doc.piece_id, w.to_dict(), seq))
            rows.append({"piece_id": doc.piece_id, "window": w.index, "path": f"{doc.piece_id}.jsonl",
                         "bytes": seq.nbytes, "tokens": len(seq), "modality": doc.modality.value})
        _write_jsonl(out_dir / f"{doc.piece_id}.jsonl", records)
    else:
        gcfg = _graph_cfg(cfg)
        piece_dir = out_dir / doc.piece_id
        piece_dir.mkdir(parents=True, exist_ok=True)
        for w in windows:
            graph = build_graph(doc, w, gcfg)
            name = f"{doc.piece_id}/{w.index:04d}.json"
            (out_dir / name).write_text(graph.to_json() + "\n")
            rows.append({"piece_id": doc.piece_id, "window": w.index, "path": name, "bytes": graph.nbytes,
                         "nodes": graph.num_nodes, "edges": graph.num_edges})
    return rows


def _encode_one(job):
    rep, doc_path, cfg, out_dir = job
    try:
        doc = loads(Path(doc_path).read_text())
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return _encode_windows(rep, doc, cfg, Path(out_dir)), None
    except (SymencError, OSError, ValueError) as exc:
        return [], f"{type(exc).__name__}: {exc}"


def cmd_encode(args, cfg) -> int:
    rep = args.rep
    canon_dir, pieces = _load_manifest(args.manifest)
    out = Path(cfg["out"]) / "encoded" / rep
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(rep, str(canon_dir / p["path"]), cfg, str(out)) for p in pieces]
    results = _map(_encode_one, jobs, cfg["jobs"])
    index, failures = [], []
    for p, (rows, error) in zip(pieces, results):
        index.extend(rows)
        if error:
            failures.append({"piece_id": p["piece_id"], "error": error})
            log.error("%s: %s", p["piece_id"], error)
    index.sort(key=lambda r: (r["piece_id"], r["window"]))
    _write_jsonl(out / "index.jsonl", index)
    _write_json(out / "failures.json", sorted(failures, key=lambda f: f["piece_id"]))
    if rep == "sequence":
        vocabs = {}
        for modality in sorted({p["modality"] for p in pieces}):
            try:
                v = build_vocabulary(cfg["sequence"]["scheme"], modality, _quant(cfg), cfg["feature_level"])
                vocabs[modality] = json.loads(v.to_json())
            except SymencError:
                continue
        _write_json(out / "vocab.json", vocabs)
    _echo_config(out, cfg, f"encode {rep}")
    print(f"encoded {len(index)} windows from {len(pieces) - len(failures)} of {len(pieces)} pieces into {out}")
    return 0 if not failures or cfg["keep_going"] else 1


# -- bpe ----------------------------------------------------------------------------

def cmd_bpe_train(args, cfg) -> int:
    seq_dir = Path(args.sequences) if args.sequences else Path(cfg["out"]) / "encoded" / "sequence"
    try:
        vocabs = json.loads((seq_dir / "vocab.json").read_text())
        index = _read_jsonl(seq_dir / "index.jsonl")
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"no encoded sequences in {seq_dir}: {exc}") from exc
    modality = args.modality or (next(iter(vocabs)) if len(vocabs) == 1 else None)
    if modality not in vocabs:
        raise UsageError(f"choose --modality from {sorted(vocabs)}")
    vocab_data = vocabs[modality]
    scheme = Scheme.parse(vocab_data["scheme"])
    if scheme is Scheme.CPWORD:
        log.error("CPWord tuples are not BPE-merged")
        return 1
    seqs = []
    for name in sorted({r["path"] for r in index if r["modality"] == modality}):
        for rec in _read_jsonl(seq_dir / name):
            seqs.append(TokenSequence(rec["ids"], scheme, Modality(modality)))
    if not seqs:
        log.error("no sequences to train on")
        return 1
    model = bpe_train(seqs, len(vocab_data["tokens"]), multiplier=int(cfg["bpe"]["multiplier"]))
    merged = [bpe_apply(s, model) for s in seqs]
    out = Path(cfg["out"]) / "encoded" / "sequence_bpe"
    out.mkdir(parents=True, exist_ok=True)
    (out / "bpe.json").write_text(model.to_json() + "\n")
    _write_jsonl(out / "sequences.jsonl", [{"ids": list(m.ids)} for m in merged])
    report = {
        "sequences": len(seqs), "base_vocab_size": model.base_vocab_size, "vocab_size": model.vocab_size,
        "merges": len(model.merges), "tokens_before": sum(map(len, seqs)),
        "tokens_after": sum(map(len, merged)), "length_reduction": length_reduction(seqs, merged),
    }
    _write_json(Path(cfg["out"]) / "reports" / "bpe.json", report)
    _echo_config(out, cfg, "bpe-train")
    print(f"{len(model.merges)} merges; vocabulary {model.base_vocab_size} -> {model.vocab_size}; "
          f"length reduction {report['length_reduction']:.1%}")
    return 0


# -- splits -------------------------------------------------------------------------

def cmd_split(args, cfg) -> int:
    _, pieces = _load_manifest(args.manifest)
    labels, groups = {}, {}
    if args.labels:
        labels = json.loads(Path(args.labels).read_text())
    if args.groups:
        groups = json.loads(Path(args.groups).read_text())
    units = [(groups.get(p["piece_id"], p["piece_id"]), labels.get(p["piece_id"], 0)) for p in pieces]
    split = cfg["split"]
    try:
        plan = make_folds(units, k=int(split["folds"]), test_frac=float(split["test_frac"]), seed=int(cfg["seed"]),
                          stratify=bool(split["stratify"]))
    except ValueError as exc:
        log.error("%s", exc)
        return 1
    out = Path(cfg["out"]) / "splits"
    out.mkdir(parents=True, exist_ok=True)
    data = plan.to_dict()
    data["members"] = {p["piece_id"]: groups.get(p["piece_id"], p["piece_id"]) for p in pieces}
    (out / "plan.json").write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    _echo_config(out, cfg, "split")
    print(f"{plan.num_folds} folds over {len({u for u, _ in units})} pieces written to {out / 'plan.json'}")
    return 0


def cmd_audit(args, cfg) -> int:
    data = json.loads(Path(args.plan).read_text())
    plan = SplitPlan.from_dict(data)
    if args.manifest:
        _, pieces = _load_manifest(args.manifest)
        members = data.get("members", {})
        corpus = [members.get(p["piece_id"], p["piece_id"]) for p in pieces]
    else:
        corpus = sorted(set().union(*(f["train"] | f["test"] for f in plan.folds)))
    report = leakage_audit(plan, corpus)
    _write_json(Path(cfg["out"]) / "reports" / "audit.json", report.to_dict())
    print(f"leaks: {len(report.leaks)}, unassigned: {len(report.unassigned)}")
    return 0 if report.clean else 1


# -- stats ----------------------------------------------------------------------------

def _mean_std(values) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    return statistics.fmean(values), statistics.pstdev(values) if len(values) > 1 else 0.0


def size_report(encoded_dir: Path) -> dict:
    """KB (1000 bytes) per segment and per piece for each encoded representation."""
    report = {}
    for rep in REPS + ("sequence_bpe",):
        index_path = encoded_dir / rep / "index.jsonl"
        if not index_path.is_file():
            continue
        rows = _read_jsonl(index_path)
        if not rows:
            continue
        per_segment = [r["bytes"] / 1000 for r in rows]
        per_piece: dict[str, float] = {}
        for r in rows:
            per_piece[r["piece_id"]] = per_piece.get(r["piece_id"], 0.0) + r["bytes"] / 1000
        seg_mean, seg_std = _mean_std(per_segment)
        piece_mean, piece_std = _mean_std(list(per_piece.values()))
        report[rep] = {
            "segments": len(rows), "pieces": len(per_piece),
            "kb_per_segment": {"mean": seg_mean, "std": seg_std},
            "kb_per_piece": {"mean": piece_mean, "std": piece_std},
        }
    return report


def format_size_report(report: dict) -> str:
    lines = [f"{'representation':<16}{'KB/segment':>22}{'KB/piece':>24}"]
    for rep, r in report.items():
        s, p = r["kb_per_segment"], r["kb_per_piece"]
        lines.append(f"{rep:<16}{s['mean']:>12.1f} ± {s['std']:<7.1f}{p['mean']:>14.1f} ± {p['std']:<7.1f}")
    return "\n".join(lines)


def cmd_stats(args, cfg) -> int:
    encoded = Path(args.encoded) if args.encoded else Path(cfg["out"]) / "encoded"
    report = size_report(encoded)
    _write_json(Path(cfg["out"]) / "reports" / "sizes.json", report)
    print(format_size_report(report))
    return 0


# -- verify / correlate ---------------------------------------------------------------

def cmd_verify(args, cfg) -> int:
    from .verify import FIXTURE_DIR, run_all

    fixtures = Path(args.fixtures) if args.fixtures else FIXTURE_DIR
    results = run_all(seed=int(cfg["seed"]), scale=args.scale, inject_grad_fault=args.inject_grad_fault,
                      fixture_dir=fixtures)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<20} {r.detail} ({r.seconds:.1f}s)")
    _write_json(Path(cfg["out"]) / "reports" / "verify.json", [r.to_dict() for r in results])
    return 0 if all(r.passed for r in results) else 1


def _load_matrix(path: Path) -> np.ndarray:
    try:
        if path.suffix == ".npy":
            return np.load(path)
        return np.asarray(json.loads(path.read_text()), dtype=np.float64)
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot read matrix {path}: {exc}") from exc


def cmd_correlate(args, cfg) -> int:
    attn = _load_matrix(Path(args.attention))
    if args.graph:
        adj = aggregated_adjacency(NoteGraph.from_json(Path(args.graph).read_text()))
    else:
        adj = _load_matrix(Path(args.adjacency))
    try:
        r = attention_adjacency_correlation(attn, adj)
    except ZeroVariance as exc:
        log.error("%s", exc)
        return 1
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _write_json(Path(cfg["out"]) / "reports" / "correlation.json", {"pearson_r": r, "n": int(attn.shape[0])})
    print(f"pearson r = {r:.6f}")
    return 0


# -- argument parsing -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("--keep-going", action="store_true", help="exit 0 despite per-file failures")
    common.add_argument("--out", default="out", help="output root (default: ./out)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="symenc", description="Symbolic music encoders.")
    parser.add_argument("--version", action="version", version=f"symenc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse MIDI/MusicXML into canonical JSON")
    p.add_argument("paths", nargs="+", help="files, directories or glob patterns")

    p = sub.add_parser("encode", parents=[common], help="encode ingested pieces")
    p.add_argument("manifest", help="canonical/ directory or its manifest.json")
    p.add_argument("--rep", choices=REPS, required=True)
    p.add_argument("--feature-level", choices=[f.value for f in FeatureLevel])
    p.add_argument("--resolution", type=int)
    p.add_argument("--channels", nargs="+", choices=["onset", "frame"])
    p.add_argument("--pedal-rows", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--window-length", type=float)
    p.add_argument("--scheme", type=str.lower, choices=["midilike", "remi", "cpword"])
    p.add_argument("--velocity-bins", type=int)
    p.add_argument("--positions-per-quarter", type=int)
    p.add_argument("--t-tol", type=float, help="performance onset tolerance in seconds")
    p.add_argument("--inverse-edges", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--silence-edges", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--voice-edges", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--homogeneous", action="store_true")

    p = sub.add_parser("bpe-train", parents=[common], help="learn BPE merges over encoded sequences")
    p.add_argument("sequences", nargs="?", help="encoded/sequence directory (default: under --out)")
    p.add_argument("--multiplier", type=int)
    p.add_argument("--modality", choices=[m.value for m in Modality], help="required for mixed corpora")

    p = sub.add_parser("split", parents=[common], help="piece-disjoint cross-validation folds")
    p.add_argument("manifest")
    p.add_argument("--labels", help="JSON object piece_id -> class label")
    p.add_argument("--groups", help="JSON object piece_id -> underlying piece (performances of one work)")
    p.add_argument("--folds", type=int)
    p.add_argument("--test-frac", type=float)

    p = sub.add_parser("audit", parents=[common], help="check a split plan for leakage")
    p.add_argument("plan")
    p.add_argument("--manifest")

    p = sub.add_parser("stats", parents=[common], help="representation size report")
    p.add_argument("encoded", nargs="?", help="encoded/ directory (default: under --out)")

    p = sub.add_parser("verify", parents=[common], help="run the built-in verification suites")
    p.add_argument("--scale", type=int, default=1, help="multiply suite sizes")
    p.add_argument("--fixtures", help="fixture directory")
    p.add_argument("--inject-grad-fault", type=float, metavar="FRACTION")

    p = sub.add_parser("correlate", parents=[common], help="attention/adjacency Pearson correlation")
    p.add_argument("attention", help="T x T matrix (.npy or JSON)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--adjacency", help="T x T matrix (.npy or JSON)")
    src.add_argument("--graph", help="graph JSON written by encode --rep graph")
    return parser


COMMANDS = {
    "ingest": cmd_ingest, "encode": cmd_encode, "bpe-train": cmd_bpe_train, "split": cmd_split,
    "audit": cmd_audit, "stats": cmd_stats, "verify": cmd_verify, "correlate": cmd_correlate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    logging.captureWarnings(True)
    try:
        cfg = effective_config(args)
        cfg["out"] = args.out
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"symenc: error: {exc}", file=sys.stderr)
        return 2
    except (SymencError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
