import io
import zipfile

import pytest

from symenc.errors import IngestWarning, ParseError, UnsupportedFormat
from symenc.musicxml import parse_musicxml, parse_musicxml_detailed, read_musicxml
from symenc.verify import FIXTURE_DIR


def score(measures: str, divisions: int = 1) -> str:
    return f"""<?xml version="1.0"?>
<score-partwise version="3.1">
  <part-list><score-part id="P1"><part-name>P</part-name></score-part></part-list>
  <part id="P1">{measures.replace("<attributes>", f"<attributes><divisions>{divisions}</divisions>", 1)}</part>
</score-partwise>"""


def pitch_note(step, octave, duration, extra="", voice=1):
    return (f"<note>{extra}<pitch><step>{step}</step><octave>{octave}</octave></pitch>"
            f"<duration>{duration}</duration><voice>{voice}</voice></note>")


FOUR_FOUR = "<attributes><time><beats>4</beats><beat-type>4</beat-type></time></attributes>"


def test_single_quarter_note():
    doc = parse_musicxml(score(f'<measure number="1">{FOUR_FOUR}{pitch_note("C", 4, 1)}</measure>'))
    (n,) = doc.notes
    assert (n.pitch, n.onset, n.duration, n.voice, n.measure_index) == (60, 0.0, 1.0, 1, 0)
    assert doc.time_signatures == ((0, 4, 4),)


def test_tie_across_barline_merges():
    tie_start = '<tie type="start"/>'
    tie_stop = '<tie type="stop"/>'
    m1 = (f'<measure number="1">{FOUR_FOUR}<note><rest/><duration>3</duration></note>'
          f'<note><pitch><step>C</step><octave>4</octave></pitch><duration>1</duration>{tie_start}</note></measure>')
    m2 = (f'<measure number="2"><note><pitch><step>C</step><octave>4</octave></pitch>'
          f'<duration>1</duration>{tie_stop}</note><note><rest/><duration>3</duration></note></measure>')
    (n,) = parse_musicxml(score(m1 + m2)).notes
    assert (n.onset, n.duration, n.measure_index) == (3.0, 2.0, 0)


def test_chord_shares_onset():
    body = pitch_note("C", 4, 1) + pitch_note("E", 4, 1, "<chord/>")
    doc = parse_musicxml(score(f'<measure number="1">{FOUR_FOUR}{body}</measure>'))
    assert [n.onset for n in doc.notes] == [0.0, 0.0]


def test_divisions_and_backup():
    body = pitch_note("C", 4, 4) + "<backup><duration>4</duration></backup>" + pitch_note("C", 3, 2, voice=2)
    doc = parse_musicxml(score(f'<measure number="1">{FOUR_FOUR}{body}</measure>', divisions=4))
    assert [(n.pitch, n.onset, n.duration, n.voice) for n in doc.notes] == [(48, 0.0, 0.5, 2), (60, 0.0, 1.0, 1)]


def test_malformed_xml_has_line():
    with pytest.raises(ParseError) as info:
        parse_musicxml("<score-partwise>\n<part>\n</score-partwise>")
    assert info.value.line is not None


def test_timewise_rejected():
    with pytest.raises(UnsupportedFormat):
        parse_musicxml('<?xml version="1.0"?><score-timewise/>')


def test_overfull_measure_warns():
    body = pitch_note("C", 4, 4) + pitch_note("D", 4, 4)
    with pytest.warns(IngestWarning):
        parse_musicxml(score(f'<measure number="1">{FOUR_FOUR}{body}</measure>'))
    _, _, issues = parse_musicxml_detailed(score(f'<measure number="1">{FOUR_FOUR}{body}</measure>'))
    assert issues


def test_fixture_contents():
    doc = read_musicxml(FIXTURE_DIR / "etude.musicxml")
    assert doc.piece_id == "etude"
    assert len(doc.notes) == 9
    assert doc.time_signatures == ((0, 4, 4), (1, 3, 4))
    assert doc.key_signatures == ((0, -1),)
    tied = [n for n in doc.notes if n.pitch == 65]
    assert [n.duration for n in tied] == [2.0]
    grace = [n for n in doc.notes if n.grace]
    assert [n.pitch for n in grace] == [70]
    assert {n.voice for n in doc.notes} == {1, 5}
    assert {n.dynamic_level for n in doc.notes} >= {2, 5}
    flags = set().union(*(n.articulation_flags for n in doc.notes))
    assert flags == {"staccato", "accent", "tenuto"}


def test_compressed_mxl(tmp_path):
    text = (FIXTURE_DIR / "etude.musicxml").read_bytes()
    path = tmp_path / "etude.mxl"
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("META-INF/container.xml",
                    '<container><rootfiles><rootfile full-path="score.xml"/></rootfiles></container>')
        zf.writestr("score.xml", text)
    path.write_bytes(buf.getvalue())
    assert read_musicxml(path).notes == read_musicxml(FIXTURE_DIR / "etude.musicxml").notes
