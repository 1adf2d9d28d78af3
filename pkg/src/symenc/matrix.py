"""Piano-roll encoding: channels x pitch rows x time columns of uint32."""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import ParseError, UnsupportedCombination
from .model import WINDOW_LENGTH, FeatureLevel, PieceDoc, to_ticks

CHANNELS = ("onset", "frame")
PITCH_ROWS = 128
# pedal rows follow the pitch rows in this order
PEDAL_ROWS = {"una_corda": 128, "sostenuto": 129, "sustain": 130}
MAGIC = b"SYMR"
FORMAT_VERSION = 1
DTYPE = np.dtype("<u4")


@dataclass(frozen=True)
class MatrixConfig:
    resolution: int = 800
    channels: tuple = ("onset", "frame")
    include_pedal_rows: bool = False
    window_length: float | None = None  # None: modality default
    feature_level: FeatureLevel = FeatureLevel.ADVANCED

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        chans = tuple(c for c in CHANNELS if c in set(self.channels))
        if not chans or len(chans) != len(set(self.channels)):
            raise ValueError(f"channels must be a non-empty subset of {CHANNELS}, got {self.channels}")
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "feature_level", FeatureLevel(self.feature_level))

    @property
    def num_rows(self) -> int:
        return PITCH_ROWS + (len(PEDAL_ROWS) if self.include_pedal_rows else 0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        d["feature_level"] = self.feature_level.value
        return d


@dataclass
class PianoRoll:
    values: np.ndarray  # [channels, rows, resolution], uint32
    channels: tuple
    window_start: float = 0.0
    window_length: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape

    def channel(self, name: str) -> np.ndarray:
        return self.values[self.channels.index(name)]

    @property
    def nbytes(self) -> int:
        return int(self.values.nbytes)


def _columns(on_t, off_t, w0, length_t, resolution):
    """First and last occupied column of each span (half-open in time)."""
    start = ((on_t - w0) * resolution) // length_t
    stop = ((off_t - w0 - 1) * resolution) // length_t
    return np.clip(start, 0, resolution - 1), np.clip(stop, 0, resolution - 1)


def build_roll(doc: PieceDoc, window_start: float, cfg: MatrixConfig) -> PianoRoll:
    """Encode the notes of ``doc`` sounding in ``[window_start, window_start + L)``.

    ``L`` is ``cfg.window_length`` or the modality default (60 s / 120 beats);
    each column spans ``L / cfg.resolution``. The frame channel holds the
    velocity (performance) or voice index (score) with basic feature level
    reducing it to 1; the onset channel marks the first column of notes
    starting inside the window. Colliding values keep the maximum.
    """
    if cfg.include_pedal_rows and doc.is_score:
        raise UnsupportedCombination("pedal rows exist only for performances")
    length = cfg.window_length or WINDOW_LENGTH[doc.modality]
    res = cfg.resolution
    frame = np.zeros((cfg.num_rows, res), dtype=DTYPE)
    onset = np.zeros((cfg.num_rows, res), dtype=DTYPE)
    w0 = int(to_ticks(window_start))
    length_t = int(to_ticks(length))
    w1 = w0 + length_t

    if doc.notes:
        arr = doc.arrays()
        on_t = to_ticks(arr["onset"])
        off_t = to_ticks(arr["onset"] + arr["duration"])
        inside = (off_t > w0) & (on_t < w1)
        if cfg.feature_level is FeatureLevel.BASIC:
            values = np.ones(len(doc.notes), dtype=np.int64)
        else:
            values = arr["voice"] if doc.is_score else arr["velocity"]
        values = np.maximum(values, 1)
        start, stop = _columns(on_t[inside], off_t[inside], w0, length_t, res)
        kernels.fill_roll(
            arr["pitch"][inside], start, stop, values[inside],
            on_t[inside] >= w0, frame, onset,
        )
    if cfg.include_pedal_rows and doc.pedals:
        p_on = to_ticks([p.onset for p in doc.pedals])
        p_off = to_ticks([p.offset for p in doc.pedals])
        rows = np.array([PEDAL_ROWS[p.kind] for p in doc.pedals], dtype=np.int64)
        inside = (p_off > w0) & (p_on < w1)
        start, stop = _columns(p_on[inside], p_off[inside], w0, length_t, res)
        # pedal rows live only in the frame channel
        kernels.fill_roll(rows[inside], start, stop, np.ones(int(inside.sum()), np.int64),
                          np.zeros(int(inside.sum()), bool), frame, onset)

    planes = {"onset": onset, "frame": frame}
    values = np.stack([planes[c] for c in cfg.channels])
    return PianoRoll(values, cfg.channels, window_start, length, {"config": cfg.to_dict()})


class RollSegment(NamedTuple):
    row: int
    start: int
    length: int
    value: int
    onset: bool


def decode_roll(roll: PianoRoll) -> list[RollSegment]:
    """Run-length decode the frame channel.

    Runs split where the value changes or where the onset channel (when
    present) marks a new note.
    """
    frame = roll.channel("frame")
    marks = roll.channel("onset") if "onset" in roll.channels else np.zeros_like(frame)
    out = []
    for row in np.flatnonzero(frame.any(axis=1)):
        line, mark = frame[row], marks[row]
        col, n = 0, line.shape[0]
        while col < n:
            value = int(line[col])
            if value == 0:
                col += 1
                continue
            end = col + 1
            while end < n and line[end] == value and not mark[end]:
                end += 1
            out.append(RollSegment(int(row), col, end - col, value, bool(mark[col])))
            col = end
    return out


def encode_segments(segments, shape: tuple, channels: tuple) -> np.ndarray:
    """Inverse of :func:`decode_roll`: rebuild the roll values array."""
    _, rows, cols = shape
    frame = np.zeros((rows, cols), dtype=DTYPE)
    onset = np.zeros((rows, cols), dtype=DTYPE)
    for seg in segments:
        frame[seg.row, seg.start:seg.start + seg.length] = seg.value
        if seg.onset:
            onset[seg.row, seg.start] = 1
    planes = {"onset": onset, "frame": frame}
    return np.stack([planes[c] for c in channels])


# -- binary container ---------------------------------------------------------

def roll_to_bytes(roll: PianoRoll) -> bytes:
    c, r, w = roll.values.shape
    header = MAGIC + struct.pack("<H", FORMAT_VERSION) + struct.pack("<III", c, r, w)
    return header + np.ascontiguousarray(roll.values, dtype=DTYPE).tobytes()


def roll_from_bytes(data: bytes) -> np.ndarray:
    if data[:4] != MAGIC:
        raise ParseError("not a SYMR container", offset=0)
    (version,) = struct.unpack("<H", data[4:6])
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported SYMR version {version}", offset=4)
    c, r, w = struct.unpack("<III", data[6:18])
    payload = data[18:]
    if len(payload) != c * r * w * DTYPE.itemsize:
        raise ParseError("payload size does not match dimensions", offset=18)
    return np.frombuffer(payload, dtype=DTYPE).reshape(c, r, w).copy()


def payload_size(data: bytes) -> int:
    return len(data) - 18


def sidecar(roll: PianoRoll, piece_id: str, window_index: int) -> str:
    return json.dumps(
        {
            "piece_id": piece_id,
            "window": {"index": window_index, "start": roll.window_start, "length": roll.window_length},
            "channels": list(roll.channels),
            "shape": list(roll.values.shape),
            "pedal_rows": dict(PEDAL_ROWS) if roll.values.shape[1] > PITCH_ROWS else {},
            "config": roll.meta.get("config", {}),
        },
        indent=1,
        sort_keys=True,
    )

