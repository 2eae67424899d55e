import pytest

from posnec import logio
from posnec.robot import LogEvent


def _events():
    return [
        LogEvent("r1", 0, "SEG_FREE", (0.5, 0.5), (1.7, 0.5), (0.0, 0.0), (0.0125, 0.055), 0.0),
        LogEvent("r1", 1, "TURN", (1.7, 0.5), (1.7, 0.5), (0.0125, 0.055), (0.055, 0.0125), 90.0, turn=90.0),
        LogEvent("r1", 2, "WALL_START", (1.7, 0.5), (1.7, 0.6), (0.06, 0.02), (0.06, 0.02), 90.0,
                 side="left", standoff=0.08),
        LogEvent("r1", 3, "SINGULAR", (1.9, 0.6), (1.9, 0.6), (0.06, 0.02), (0.06, 0.02), 90.0, singular="corner"),
        LogEvent("r2", 0, "MEET", (0.1, 0.2), (0.1, 0.2), (0.0, 0.0), (0.0, 0.0), 0.0, peer="r1"),
    ]


def test_round_trip():
    text = logio.dumps_log(_events())
    assert text.startswith("poslog v1\n")
    assert logio.loads_log(text) == _events()
    assert logio.dumps_log(logio.loads_log(text)) == text


def test_dump_sorted_by_key():
    text = logio.dumps_log(reversed(_events()))
    assert [e.key for e in logio.loads_log(text)] == [e.key for e in _events()]


def test_file_round_trip(tmp_path):
    p = tmp_path / "a.log"
    logio.write_log(p, _events())
    assert logio.read_log(p) == _events()


def test_blank_lines_skipped():
    text = logio.dumps_log(_events()[:1]) + "\n\n"
    assert len(logio.loads_log(text)) == 1


@pytest.mark.parametrize("bad, line", [
    ("nonsense\n", 1),
    ("poslog v1\n0\tSEG_FREE\n", 2),
    ("poslog v1\n0\tJUMP\tr\t0\t0\t0\t0\t0\t0\t0\t0\th=0\n", 2),
    ("poslog v1\n" + "0\tTURN\tr\t0\t0\t0\t0\t0\t0\t0\t0\th=0\n" + "x\tTURN\tr\t0\t0\t0\t0\t0\t0\t0\t0\th=0\n", 3),
    ("poslog v1\n0\tTURN\tr\t0\t0\t0\t0\t0\t0\t0\t0\tturn=90\n", 2),
    ("poslog v1\n0\tTURN\tr\t0\t0\t0\t0\t0\t0\t0\t0\th=0;oops\n", 2),
])
def test_errors_name_file_and_line(tmp_path, bad, line):
    p = tmp_path / "bad.log"
    p.write_text(bad)
    with pytest.raises(logio.LogFormatError) as info:
        logio.read_log(p)
    assert info.value.line == line
    assert str(info.value).startswith(f"{p}:{line}:")
