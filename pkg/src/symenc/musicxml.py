"""Partwise MusicXML reader producing beat-timed score documents."""

from __future__ import annotations

import io
import warnings
import xml.etree.ElementTree as ET
import zipfile
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import IngestWarning, ParseError, UnsupportedFormat
from .model import DYNAMIC_LEVELS, Modality, NoteEvent, PieceDoc, canonicalize

STEP_SEMITONES = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
ARTICULATION_TAGS = {
    "staccato": "staccato",
    "staccatissimo": "staccato",
    "spiccato": "staccato",
    "accent": "accent",
    "strong-accent": "accent",
    "tenuto": "tenuto",
}


@dataclass(frozen=True)
class MeasureContext:
    part: int
    measure_index: int
    divisions: int
    start_beat: Fraction
    length: Fraction
    time_signature: tuple


@dataclass
class _Pending:
    """A note under construction; tied continuations extend ``end``."""

    pitch: int
    start: Fraction
    end: Fraction
    voice: int
    staff: int
    part: int
    measure_index: int
    articulations: frozenset
    grace: bool


def _strip_ns(root):
    for el in root.iter():
        if isinstance(el.tag, str) and "}" in el.tag:
            el.tag = el.tag.split("}", 1)[1]
    return root


def _int_text(el, default=None):
    if el is None or el.text is None:
        return default
    return int(el.text.strip())


def _pitch(note_el, pos_line=None) -> int | None:
    pitch = note_el.find("pitch")
    if pitch is None:
        return None
    step = pitch.findtext("step", "").strip().upper()
    if step not in STEP_SEMITONES:
        raise ParseError(f"bad pitch step {step!r}", line=pos_line)
    alter = float(pitch.findtext("alter", "0") or 0)
    octave = int(pitch.findtext("octave", "4"))
    return (octave + 1) * 12 + STEP_SEMITONES[step] + int(round(alter))


def _ties(note_el) -> tuple[bool, bool]:
    types = {t.get("type") for t in note_el.findall("tie")}
    types |= {t.get("type") for t in note_el.findall("notations/tied")}
    return "start" in types or "continue" in types, "stop" in types or "continue" in types


def _articulations(note_el) -> frozenset:
    flags = set()
    for art in note_el.findall("notations/articulations/*"):
        if art.tag in ARTICULATION_TAGS:
            flags.add(ARTICULATION_TAGS[art.tag])
    return frozenset(flags)


def _dynamic_marks(el) -> list[int]:
    return [DYNAMIC_LEVELS[d.tag] for d in el.findall(".//dynamics/*") if d.tag in DYNAMIC_LEVELS]


def _parse_root(root) -> tuple[PieceDoc, list[MeasureContext], list[str]]:
    pending_notes: list[_Pending] = []
    contexts: list[MeasureContext] = []
    issues: list[str] = []
    time_sigs, key_sigs = {}, {}
    dynamics: list[tuple[int, Fraction, int]] = []  # (part, beat, level)
    max_divisions = 1

    for part_index, part in enumerate(root.findall("part")):
        divisions = None
        time_sig = (4, 4)
        measure_start = Fraction(0)
        open_ties: dict[int, _Pending] = {}
        for m_index, measure in enumerate(part.findall("measure")):
            cursor = Fraction(0)
            furthest = Fraction(0)
            last_onset = Fraction(0)
            voice_time: dict[int, Fraction] = {}
            tied_out = Fraction(0)
            for el in measure:
                tag = el.tag
                if tag == "attributes":
                    d = _int_text(el.find("divisions"))
                    if d is not None:
                        if d <= 0:
                            raise ParseError(f"divisions must be positive in measure {m_index}")
                        divisions = d
                        max_divisions = max(max_divisions, d)
                    ts = el.find("time")
                    if ts is not None and ts.find("beats") is not None:
                        beats = ts.findtext("beats").strip()
                        # additive signatures like "3+2" sum their parts
                        num = sum(int(b) for b in beats.split("+"))
                        time_sig = (num, int(ts.findtext("beat-type")))
                        time_sigs.setdefault(m_index, time_sig)
                    key = el.find("key")
                    if key is not None and key.find("fifths") is not None:
                        key_sigs.setdefault(m_index, int(key.findtext("fifths")))
                elif tag in ("backup", "forward"):
                    if divisions is None:
                        raise ParseError(f"{tag} before divisions in measure {m_index}")
                    amount = Fraction(_int_text(el.find("duration"), 0), divisions)
                    cursor = cursor - amount if tag == "backup" else cursor + amount
                    if cursor < 0:
                        issues.append(f"part {part_index} measure {m_index}: backup before measure start")
                        cursor = Fraction(0)
                    furthest = max(furthest, cursor)
                elif tag == "direction":
                    for level in _dynamic_marks(el):
                        offset = Fraction(0)
                        if divisions is not None and el.find("offset") is not None:
                            offset = Fraction(_int_text(el.find("offset"), 0), divisions)
                        dynamics.append((part_index, measure_start + cursor + offset, level))
                elif tag == "note":
                    if divisions is None:
                        raise ParseError(f"note before divisions in measure {m_index}")
                    grace = el.find("grace") is not None
                    is_chord = el.find("chord") is not None
                    duration = Fraction(_int_text(el.find("duration"), 0), divisions)
                    if grace:
                        duration = Fraction(0)
                    onset = last_onset if is_chord else cursor
                    voice = _int_text(el.find("voice"), 1)
                    staff = _int_text(el.find("staff"), 1)
                    for level in _dynamic_marks(el):
                        dynamics.append((part_index, measure_start + onset, level))
                    if not is_chord and not grace:
                        voice_time[voice] = voice_time.get(voice, Fraction(0)) + duration
                        cursor = onset + duration
                        last_onset = onset
                    furthest = max(furthest, cursor)
                    pitch = _pitch(el)
                    if pitch is None:  # rest or unpitched
                        continue
                    tie_start, tie_stop = _ties(el)
                    start = measure_start + onset
                    end = start + duration
                    current = open_ties.get(pitch) if tie_stop and not grace else None
                    if current is not None and current.end == start:
                        current.end = end
                        if not tie_start:
                            del open_ties[pitch]
                        else:
                            tied_out += duration
                        continue
                    pn = _Pending(
                        pitch=pitch,
                        start=start,
                        end=end,
                        voice=voice,
                        staff=staff,
                        part=part_index,
                        measure_index=m_index,
                        articulations=_articulations(el),
                        grace=grace,
                    )
                    pending_notes.append(pn)
                    if tie_start and not grace:
                        open_ties[pitch] = pn
                        tied_out += duration
            nominal = Fraction(4 * time_sig[0], time_sig[1])
            length = furthest if furthest > 0 else nominal
            for voice, total in voice_time.items():
                if total > nominal + tied_out:
                    issues.append(
                        f"part {part_index} measure {m_index} voice {voice}: "
                        f"{float(total)} beats exceed measure length {float(nominal)}"
                    )
            contexts.append(MeasureContext(part_index, m_index, divisions or 0, measure_start, length, time_sig))
            measure_start += length

    if not root.findall("part"):
        raise ParseError("score has no parts")

    quantum = Fraction(1, max_divisions)
    dyn_by_part: dict[int, list] = {}
    for part_index, beat, level in sorted(dynamics, key=lambda d: (d[0], d[1])):
        dyn_by_part.setdefault(part_index, []).append((beat, level))

    notes = []
    for pn in pending_notes:
        level = None
        for beat, lv in dyn_by_part.get(pn.part, ()):
            if beat <= pn.start:
                level = lv
            else:
                break
        start = float(pn.start)
        # durations are differences of exact positions, so ties/chords stay exact
        duration = float(quantum) if pn.grace else float(pn.end) - start
        notes.append(
            NoteEvent(
                pitch=pn.pitch,
                onset=start,
                duration=duration,
                voice=pn.voice,
                measure_index=pn.measure_index,
                articulation_flags=pn.articulations,
                dynamic_level=level,
                grace=pn.grace,
                staff=pn.staff,
                part=pn.part,
            )
        )
    doc = PieceDoc(
        modality=Modality.SCORE,
        notes=notes,
        time_signatures=[(m, n, d) for m, (n, d) in sorted(time_sigs.items())],
        key_signatures=sorted(key_sigs.items()),
        quantum=float(quantum),
    )
    return doc, contexts, issues


def parse_musicxml_detailed(text, piece_id: str = ""):
    """Parse and return ``(doc, measure_contexts, issues)`` without warning."""
    try:
        root = ET.parse(io.StringIO(text) if isinstance(text, str) else io.BytesIO(text)).getroot()
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc.msg if hasattr(exc, 'msg') else exc}", line=exc.position[0]) from exc
    root = _strip_ns(root)
    if root.tag == "score-timewise":
        raise UnsupportedFormat("score-timewise MusicXML is not supported")
    if root.tag != "score-partwise":
        raise ParseError(f"unexpected root element <{root.tag}>", line=1)
    doc, contexts, issues = _parse_root(root)
    doc = canonicalize(doc.replace(piece_id=piece_id))
    return doc, contexts, issues


def parse_musicxml(text, piece_id: str = "") -> PieceDoc:
    """Parse partwise MusicXML text into a canonical score document.

    All parts are merged into one note stream (``part`` and ``staff`` are
    kept on each note). Tied chains become one note. Measure-level
    duration inconsistencies are reported as :class:`IngestWarning`.
    """
    doc, _, issues = parse_musicxml_detailed(text, piece_id)
    for issue in issues:
        warnings.warn(issue, IngestWarning, stacklevel=2)
    return doc


def _read_mxl(path: Path) -> bytes:
    with zipfile.ZipFile(path) as zf:
        names = zf.namelist()
        target = None
        if "META-INF/container.xml" in names:
            container = _strip_ns(ET.fromstring(zf.read("META-INF/container.xml")))
            rootfile = container.find(".//rootfile")
            if rootfile is not None:
                target = rootfile.get("full-path")
        if target is None:
            candidates = [n for n in names if n.endswith((".xml", ".musicxml")) and not n.startswith("META-INF")]
            if not candidates:
                raise ParseError(f"{path.name}: no MusicXML rootfile in archive")
            target = candidates[0]
        return zf.read(target)


def read_musicxml(path, piece_id: str | None = None) -> PieceDoc:
    path = Path(path)
    pid = piece_id if piece_id is not None else path.stem
    if path.suffix.lower() == ".mxl":
        return parse_musicxml(_read_mxl(path), pid)
    return parse_musicxml(path.read_bytes(), pid)


def measure_of(onset: float, contexts: list[MeasureContext], part: int = 0) -> int:
    """Index of the measure of ``part`` containing ``onset``."""
    starts = [c for c in contexts if c.part == part]
    index = 0
    for c in starts:
        if float(c.start_beat) <= onset + 1e-12:
            index = c.measure_index
        else:
            break
    return index

