"""Quantization settings and token vocabularies for the three schemes."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import UnsupportedCombination
from ..model import FeatureLevel, Modality

PAD, BOS, EOS = 0, 1, 2
SPECIALS = ("PAD", "BOS", "EOS")


class Scheme(str, Enum):
    MIDILIKE = "MIDILike"
    REMI = "REMI"
    CPWORD = "CPWord"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, Scheme):
            return value
        lookup = {s.value.lower(): s for s in cls}
        lookup["cp"] = cls.CPWORD
        try:
            return lookup[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown tokenization scheme {value!r}") from None


def _steps(start, stop, step):
    n = int(round((stop - start) / step))
    return [round(start + i * step, 6) for i in range(n + 1)]


DEFAULT_TIME_BINS = tuple(_steps(0.01, 1.0, 0.01) + _steps(1.1, 10.0, 0.1))
DEFAULT_SCORE_DURATION_BINS = tuple(_steps(0.25, 8.0, 0.25) + _steps(9.0, 32.0, 1.0))


@dataclass(frozen=True)
class QuantSpec:
    """Quantization grid shared by tokenizer and detokenizer.

    Performance times use ``time_shift_bins`` (seconds; the smallest bin
    is the time grid and every bin must be a multiple of it). Score times
    use ``positions_per_quarter`` steps per beat.
    """

    velocity_bins: int = 32
    time_shift_bins: tuple = DEFAULT_TIME_BINS
    duration_bins: tuple = DEFAULT_TIME_BINS
    score_duration_bins: tuple = DEFAULT_SCORE_DURATION_BINS
    positions_per_quarter: int = 4
    perf_bar_seconds: float = 2.0
    max_voice: int = 8
    time_signatures: tuple = ((4, 4),)

    def __post_init__(self):
        if not 1 <= self.velocity_bins <= 127:
            raise ValueError("velocity_bins must be within 1..127")
        for name in ("time_shift_bins", "duration_bins", "score_duration_bins", "time_signatures"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "time_signatures", tuple(sorted({tuple(t) for t in self.time_signatures})))
        ticks = self.time_shift_ticks
        if np.any(np.diff(ticks) <= 0) or ticks[0] != 1:
            raise ValueError("time_shift_bins must be increasing multiples of the smallest bin")

    @property
    def grid(self) -> float:
        return self.time_shift_bins[0]

    @property
    def time_shift_ticks(self) -> np.ndarray:
        ratio = np.asarray(self.time_shift_bins) / self.time_shift_bins[0]
        ticks = np.rint(ratio).astype(np.int64)
        if not np.allclose(ratio, ticks, atol=1e-6):
            raise ValueError("time_shift_bins must be multiples of the smallest bin")
        return ticks

    @property
    def perf_positions(self) -> int:
        return int(round(self.perf_bar_seconds / self.grid))

    def bar_positions(self, num: int, den: int) -> int:
        return int(math.ceil(self.positions_per_quarter * 4 * num / den))

    # velocity bins split 1..127 into equal-width intervals (integer arithmetic)
    def velocity_bin(self, velocity: int) -> int:
        v = min(127, max(1, int(velocity)))
        return (v - 1) * self.velocity_bins // 127

    def _bin_low(self, index: int) -> int:
        return 1 + -(-index * 127 // self.velocity_bins)

    def velocity_value(self, index: int) -> int:
        """Representative velocity of a bin: middle of its integer members."""
        lo, hi = self._bin_low(index), self._bin_low(index + 1) - 1
        return (lo + hi) // 2

    def to_dict(self) -> dict:
        return {
            "velocity_bins": self.velocity_bins,
            "time_shift_bins": list(self.time_shift_bins),
            "duration_bins": list(self.duration_bins),
            "score_duration_bins": list(self.score_duration_bins),
            "positions_per_quarter": self.positions_per_quarter,
            "perf_bar_seconds": self.perf_bar_seconds,
            "max_voice": self.max_voice,
            "time_signatures": [list(t) for t in self.time_signatures],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QuantSpec":
        data = dict(data)
        data["time_signatures"] = tuple(tuple(t) for t in data.get("time_signatures", ((4, 4),)))
        return cls(**data)


def fmt(value: float) -> str:
    return f"{value:.6g}"


def slots_for(modality: Modality, level: FeatureLevel) -> tuple:
    """CPWord tuple layout: one slot per token family."""
    slots = ["Family", "Bar", "Position", "Pitch"]
    if level is FeatureLevel.ADVANCED:
        slots.append("Voice" if modality is Modality.SCORE else "Velocity")
    slots.append("Duration")
    if modality is Modality.SCORE:
        slots += ["TimeSig", "KeySig"]
    return tuple(slots)


@dataclass
class Vocabulary:
    scheme: Scheme
    modality: Modality
    feature_level: FeatureLevel
    quant: QuantSpec
    tokens: list = field(default_factory=list)
    families: list = field(default_factory=list)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate token names")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id(self, token: str) -> int:
        return self.index[token]

    def token(self, token_id: int) -> str:
        return self.tokens[token_id]

    def family(self, token_id: int) -> str:
        return self.families[token_id]

    @property
    def slots(self) -> tuple:
        return slots_for(self.modality, self.feature_level)

    def has_family(self, name: str) -> bool:
        return name in self.families

    def to_json(self) -> str:
        return json.dumps(
            {
                "scheme": self.scheme.value,
                "modality": self.modality.value,
                "feature_level": self.feature_level.value,
                "quant": self.quant.to_dict(),
                "tokens": [[t, f] for t, f in zip(self.tokens, self.families)],
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        data = json.loads(text)
        return cls(
            scheme=Scheme.parse(data["scheme"]),
            modality=Modality(data["modality"]),
            feature_level=FeatureLevel(data["feature_level"]),
            quant=QuantSpec.from_dict(data["quant"]),
            tokens=[t for t, _ in data["tokens"]],
            families=[f for _, f in data["tokens"]],
        )


def build_vocabulary(scheme, modality, quant: QuantSpec | None = None,
                     feature_level=FeatureLevel.ADVANCED) -> Vocabulary:
    """Deterministic vocabulary for ``scheme`` on ``modality`` documents.

    Ids 0-2 are PAD, BOS, EOS. Velocity (performance) and Voice (score)
    tokens only exist at the advanced feature level.
    """
    scheme = Scheme.parse(scheme)
    modality = Modality(modality)
    level = FeatureLevel(feature_level)
    quant = quant or QuantSpec()
    if scheme is Scheme.MIDILIKE and modality is Modality.SCORE:
        raise UnsupportedCombination("MIDILike tokenization is not defined for scores")

    entries: list[tuple[str, str]] = [(s, "Special") for s in SPECIALS]
    score = modality is Modality.SCORE
    advanced = level is FeatureLevel.ADVANCED

    def add(family, names, ignore=False):
        if ignore:
            entries.append((f"Ignore_{family}", family))
        entries.extend((f"{family}_{n}", family) for n in names)

    velocities = [quant.velocity_value(i) for i in range(quant.velocity_bins)]
    if score:
        positions = max(quant.bar_positions(n, d) for n, d in quant.time_signatures)
        durations = [fmt(b) for b in quant.score_duration_bins]
    else:
        positions = quant.perf_positions
        durations = [fmt(b) for b in quant.duration_bins]
    timesigs = [f"{n}/{d}" for n, d in quant.time_signatures]
    keysigs = list(range(-7, 8))

    if scheme is Scheme.MIDILIKE:
        add("NoteOn", range(128))
        add("NoteOff", range(128))
        if advanced:
            add("Velocity", velocities)
        add("TimeShift", [fmt(b) for b in quant.time_shift_bins])
    elif scheme is Scheme.REMI:
        entries.append(("Bar", "Bar"))
        add("Position", range(positions))
        if advanced:
            if score:
                add("Voice", range(1, quant.max_voice + 1))
            else:
                add("Velocity", velocities)
        add("Pitch", range(128))
        add("Duration", durations)
        if score:
            add("TimeSig", timesigs)
            add("KeySig", keysigs)
    else:
        entries += [("Family_Metric", "Family"), ("Family_Note", "Family")]
        entries += [("Ignore_Bar", "Bar"), ("Bar", "Bar")]
        add("Position", range(positions), ignore=True)
        add("Pitch", range(128), ignore=True)
        if advanced:
            if score:
                add("Voice", range(1, quant.max_voice + 1), ignore=True)
            else:
                add("Velocity", velocities, ignore=True)
        add("Duration", durations, ignore=True)
        if score:
            add("TimeSig", timesigs, ignore=True)
            add("KeySig", keysigs, ignore=True)

    return Vocabulary(
        scheme=scheme,
        modality=modality,
        feature_level=level,
        quant=quant,
        tokens=[t for t, _ in entries],
        families=[f for _, f in entries],
    )
