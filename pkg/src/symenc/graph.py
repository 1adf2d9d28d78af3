"""Note graphs: one node per note, typed directed edges between notes.

Relations for notes u, v (times on the integer tick grid):

* ``onset``: u and v start together (both directions)
* ``consecutive`` u -> v: u ends where v starts
* ``overlap`` u -> v: v starts strictly inside u
* ``silence`` u -> v: v has no incoming consecutive edge and u is among the
  latest notes to end at or before v's onset
* ``voice``: same part, measure and voice label (scores, both directions)

Scores compare instants exactly. Performances treat two instants as equal
when they differ by less than ``t_tol`` seconds (``t_tol == 0`` means exact).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .errors import UnsupportedCombination
from .model import ARTICULATIONS, PEDAL_KINDS, WINDOW_LENGTH, FeatureLevel, Modality, PieceDoc, to_ticks
from .segmentation import Window


class EdgeType(str, Enum):
    ONSET = "onset"
    CONSECUTIVE = "consecutive"
    OVERLAP = "overlap"
    SILENCE = "silence"
    VOICE = "voice"
    CONSECUTIVE_INV = "consecutive_inv"
    OVERLAP_INV = "overlap_inv"


INVERSE_OF = {EdgeType.CONSECUTIVE: EdgeType.CONSECUTIVE_INV, EdgeType.OVERLAP: EdgeType.OVERLAP_INV}
HOMOGENEOUS_KEY = "edge"
MAX_VOICE = 8
NUM_OCTAVES = 10


@dataclass(frozen=True)
class GraphConfig:
    t_tol: float = 0.030
    inverse_edges: bool = False
    heterogeneous: bool = True
    include_silence_edges: bool = False
    include_voice_edges: bool = False
    feature_level: FeatureLevel = FeatureLevel.ADVANCED

    def __post_init__(self):
        if self.t_tol < 0:
            raise ValueError("t_tol must be non-negative")
        object.__setattr__(self, "feature_level", FeatureLevel(self.feature_level))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["feature_level"] = self.feature_level.value
        return d


@dataclass
class NoteGraph:
    num_nodes: int
    features: np.ndarray  # float32 [N, k]
    feature_names: list
    edges: dict  # type name -> int64 [E, 2], rows sorted
    heterogeneous: bool = True
    meta: dict = field(default_factory=dict)

    def edge_set(self, kind: str) -> set:
        return {tuple(e) for e in self.edges.get(kind, np.empty((0, 2), np.int64)).tolist()}

    @property
    def num_edges(self) -> int:
        return int(sum(e.shape[0] for e in self.edges.values()))

    @property
    def nbytes(self) -> int:
        """float32 features plus int64 edge indices, as a PyG-style tensor pair."""
        return int(self.features.astype(np.float32).nbytes + 16 * self.num_edges)

    def to_json(self) -> str:
        return json.dumps({
            "piece_id": self.meta.get("piece_id", ""),
            "window": self.meta.get("window"),
            "config": self.meta.get("config", {}),
            "num_nodes": self.num_nodes,
            "feature_names": list(self.feature_names),
            "features": self.features.astype(float).tolist(),
            "edges": {k: v.tolist() for k, v in self.edges.items()},
        })

    @classmethod
    def from_json(cls, text: str) -> "NoteGraph":
        data = json.loads(text)
        edges = {k: np.asarray(v, dtype=np.int64).reshape(-1, 2) for k, v in data["edges"].items()}
        k = len(data["feature_names"])
        features = np.asarray(data["features"], dtype=np.float32).reshape(-1, k)
        meta = {"piece_id": data.get("piece_id", ""), "window": data.get("window"), "config": data.get("config", {})}
        return cls(int(data["num_nodes"]), features, list(data["feature_names"]), edges,
                   HOMOGENEOUS_KEY not in edges, meta)


def _pairs(src, dst) -> np.ndarray:
    """Stack into sorted, de-duplicated [E, 2] rows."""
    if len(src) == 0:
        return np.empty((0, 2), dtype=np.int64)
    return np.unique(np.stack([np.asarray(src, np.int64), np.asarray(dst, np.int64)], axis=1), axis=0)


def _tolerance_ticks(doc: PieceDoc, cfg: GraphConfig) -> int:
    # tol is strict: |a - b| < tol, so 1 tick means exact equality
    if doc.is_score:
        return 1
    return max(int(to_ticks(cfg.t_tol)), 1)


def _window_notes(doc: PieceDoc, window: Window | None):
    if window is None:
        return list(doc.notes), WINDOW_LENGTH[doc.modality]
    notes = [n for n in doc.notes if window.start <= n.onset < window.end]
    return notes, window.length


def _ticks(notes):
    on = to_ticks([n.onset for n in notes]) if notes else np.empty(0, np.int64)
    off = to_ticks([n.offset for n in notes]) if notes else np.empty(0, np.int64)
    return on.reshape(-1), off.reshape(-1)


def build_graph(doc: PieceDoc, window: Window | None = None, cfg: GraphConfig | None = None) -> NoteGraph:
    """Graph of the notes of ``doc`` whose onset lies in ``window``.

    Node ``i`` is the i-th such note in canonical order. With
    ``cfg.heterogeneous`` false the typed lists are merged into one.
    """
    cfg = cfg or GraphConfig()
    if cfg.include_voice_edges and not (doc.is_score and cfg.feature_level is FeatureLevel.ADVANCED):
        raise UnsupportedCombination("voice edges need a score at the advanced feature level")
    notes, length = _window_notes(doc, window)
    on, off = _ticks(notes)
    tol = _tolerance_ticks(doc, cfg)
    edges = {}
    edges[EdgeType.ONSET.value] = _pairs(*kernels.onset_pairs(on, tol))
    edges[EdgeType.CONSECUTIVE.value] = _pairs(*kernels.consecutive_pairs(on, off, tol))
    edges[EdgeType.OVERLAP.value] = _pairs(*kernels.overlap_pairs(on, off))
    features, names = node_features(notes, doc, cfg.feature_level, length)
    meta = {
        "piece_id": doc.piece_id,
        "window": window.to_dict() if window is not None else None,
        "config": cfg.to_dict(),
    }
    graph = NoteGraph(len(notes), features, names, edges, True, meta)
    if cfg.include_silence_edges:
        graph = add_silence_edges(graph, notes, tol)
    if cfg.include_voice_edges:
        graph = add_voice_edges(graph, doc, notes)
    if cfg.inverse_edges:
        graph = add_inverse_edges(graph)
    return graph if cfg.heterogeneous else to_homogeneous(graph)


def add_silence_edges(graph: NoteGraph, notes, tol: int = 1) -> NoteGraph:
    """Bridge gaps: link each note lacking an incoming consecutive edge to the
    notes that ended last before it (within ``tol`` ticks of that offset)."""
    on, off = _ticks(notes)
    blocked = np.zeros(len(notes), dtype=np.bool_)
    cons = graph.edges.get(EdgeType.CONSECUTIVE.value, np.empty((0, 2), np.int64))
    blocked[cons[:, 1]] = True
    edges = dict(graph.edges)
    edges[EdgeType.SILENCE.value] = _pairs(*kernels.silence_pairs(on, off, tol, blocked))
    return NoteGraph(graph.num_nodes, graph.features, graph.feature_names, edges, graph.heterogeneous, graph.meta)


def add_voice_edges(graph: NoteGraph, doc: PieceDoc, notes=None) -> NoteGraph:
    """Connect same-voice notes within a measure (and part), both directions."""
    if not doc.is_score:
        raise UnsupportedCombination("voice edges exist only for scores")
    notes = doc.notes if notes is None else notes
    groups: dict = {}
    for i, n in enumerate(notes):
        groups.setdefault((n.part or 0, n.measure_index, n.voice or 1), []).append(i)
    src, dst = [], []
    for members in groups.values():
        m = np.asarray(members, dtype=np.int64)
        if m.size > 1:
            s, d = np.meshgrid(m, m, indexing="ij")
            keep = s != d
            src.append(s[keep])
            dst.append(d[keep])
    edges = dict(graph.edges)
    edges[EdgeType.VOICE.value] = _pairs(np.concatenate(src) if src else [], np.concatenate(dst) if dst else [])
    return NoteGraph(graph.num_nodes, graph.features, graph.feature_names, edges, graph.heterogeneous, graph.meta)


def add_inverse_edges(graph: NoteGraph) -> NoteGraph:
    edges = dict(graph.edges)
    for base, inv in INVERSE_OF.items():
        e = edges.get(base.value, np.empty((0, 2), np.int64))
        edges[inv.value] = _pairs(e[:, 1], e[:, 0])
    return NoteGraph(graph.num_nodes, graph.features, graph.feature_names, edges, graph.heterogeneous, graph.meta)


def to_homogeneous(graph: NoteGraph) -> NoteGraph:
    """Single edge list holding the de-duplicated union of all typed lists."""
    lists = [e for e in graph.edges.values() if e.shape[0]]
    union = np.unique(np.concatenate(lists), axis=0) if lists else np.empty((0, 2), np.int64)
    return NoteGraph(graph.num_nodes, graph.features, graph.feature_names, {HOMOGENEOUS_KEY: union},
                     False, graph.meta)


def feature_names(modality, level) -> list:
    names = [f"pc_{i}" for i in range(12)] + [f"octave_{i}" for i in range(NUM_OCTAVES)] + ["duration"]
    if FeatureLevel(level) is FeatureLevel.ADVANCED:
        if Modality(modality) is Modality.SCORE:
            names += [f"voice_{i}" for i in range(1, MAX_VOICE + 1)]
            names += list(ARTICULATIONS) + ["dynamic", "grace"]
        else:
            names += ["velocity"] + list(PEDAL_KINDS)
    return names


def node_features(notes, doc: PieceDoc, level=FeatureLevel.ADVANCED, window_length: float | None = None):
    """Feature matrix (float32) and column names for ``notes`` of ``doc``.

    Basic: pitch-class and octave one-hots plus duration over window
    length. Advanced adds velocity and pedal state at onset (performance)
    or voice one-hot, articulation flags, dynamics and grace (score).
    """
    level = FeatureLevel(level)
    names = feature_names(doc.modality, level)
    length = window_length or WINDOW_LENGTH[doc.modality]
    n = len(notes)
    x = np.zeros((n, len(names)), dtype=np.float32)
    if n == 0:
        return x, names
    pitch = np.array([m.pitch for m in notes], dtype=np.int64)
    rows = np.arange(n)
    x[rows, pitch % 12] = 1.0
    x[rows, 12 + np.minimum(pitch // 12, NUM_OCTAVES - 1)] = 1.0
    x[:, 22] = [m.duration / length for m in notes]
    if level is FeatureLevel.BASIC:
        return x, names
    if doc.is_score:
        voice = np.clip([m.voice or 1 for m in notes], 1, MAX_VOICE)
        x[rows, 23 + voice - 1] = 1.0
        col = 23 + MAX_VOICE
        for j, art in enumerate(ARTICULATIONS):
            x[:, col + j] = [art in m.articulation_flags for m in notes]
        x[:, col + 3] = [(m.dynamic_level or 0) / 7.0 for m in notes]
        x[:, col + 4] = [m.grace for m in notes]
    else:
        x[:, 23] = [(m.velocity or 0) / 127.0 for m in notes]
        onsets = np.array([m.onset for m in notes])
        for j, kind in enumerate(PEDAL_KINDS):
            active = np.zeros(n, dtype=bool)
            for p in doc.pedals:
                if p.kind == kind:
                    active |= (p.onset <= onsets) & (onsets < p.offset)
            x[:, 24 + j] = active
    return x, names


def brute_force_edges(doc: PieceDoc, window: Window | None = None, cfg: GraphConfig | None = None) -> dict:
    """Typed edge sets by direct O(N^2) evaluation of each pairwise predicate.

    Independent of the sweep kernels; used as a correctness oracle.
    """
    cfg = cfg or GraphConfig()
    notes, _ = _window_notes(doc, window)
    on, off = _ticks(notes)
    tol = _tolerance_ticks(doc, cfg)
    n = len(notes)
    u = np.arange(n)[:, None]
    v = np.arange(n)[None, :]
    distinct = u != v
    ou, ov = on[:, None], on[None, :]
    fu = off[:, None]
    rel = {
        "onset": distinct & (np.abs(ou - ov) < tol),
        "consecutive": distinct & (np.abs(fu - ov) < tol),
        "overlap": (ou < ov) & (ov < fu),
    }
    out = {k: {(int(a), int(b)) for a, b in zip(*np.nonzero(m))} for k, m in rel.items()}
    if cfg.include_silence_edges:
        has_in = rel["consecutive"].any(axis=0)
        sil = set()
        for j in range(n):
            if has_in[j]:
                continue
            prior = off <= on[j]
            if not prior.any():
                continue
            latest = off[prior].max()
            for i in np.nonzero(prior & (latest - off < tol))[0]:
                sil.add((int(i), j))
        out["silence"] = sil
    if cfg.include_voice_edges:
        key = [(m.part or 0, m.measure_index, m.voice or 1) for m in notes]
        out["voice"] = {(i, j) for i in range(n) for j in range(n) if i != j and key[i] == key[j]}
    if cfg.inverse_edges:
        out["consecutive_inv"] = {(b, a) for a, b in out["consecutive"]}
        out["overlap_inv"] = {(b, a) for a, b in out["overlap"]}
    return out


def mean_adjacency(graph: NoteGraph, kind: str) -> np.ndarray:
    """Dense row-normalized in-neighbour matrix: A[v, u] = 1/deg(v) for u -> v."""
    a = np.zeros((graph.num_nodes, graph.num_nodes))
    e = graph.edges.get(kind)
    if e is not None and e.shape[0]:
        a[e[:, 1], e[:, 0]] = 1.0
        deg = a.sum(axis=1, keepdims=True)
        a = np.divide(a, deg, out=np.zeros_like(a), where=deg > 0)
    return a
