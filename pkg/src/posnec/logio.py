"""Text serialisation of robot event logs (``poslog v1``).

One event per line, tab separated::

    seq kind robot_id x0 y0 x1 y1 ea0 ep0 ea1 ep1 extra

Numbers use 9 significant digits; ``extra`` is a ``;``-separated list of
``key=value`` pairs and always carries the error-frame heading ``h``.
"""

from __future__ import annotations

from .robot import EVENT_KINDS, LogEvent

HEADER = "poslog v1"


class LogFormatError(ValueError):
    def __init__(self, message, path=None, line=None):
        where = ":".join(str(p) for p in (path, line) if p is not None)
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line


def _g(v: float) -> str:
    return format(float(v), ".9g")


def format_event(ev: LogEvent) -> str:
    extra = [f"h={_g(ev.heading)}"]
    if ev.turn is not None:
        extra.append(f"turn={_g(ev.turn)}")
    if ev.side is not None:
        extra.append(f"side={ev.side}")
    if ev.standoff is not None:
        extra.append(f"standoff={_g(ev.standoff)}")
    if ev.singular is not None:
        extra.append(f"singular={ev.singular}")
    if ev.peer is not None:
        extra.append(f"peer={ev.peer}")
    nums = (*ev.start, *ev.end, *ev.err_start, *ev.err_end)
    return "\t".join([str(ev.seq), ev.kind, ev.robot_id, *map(_g, nums), ";".join(extra)])


def parse_event(line: str, path=None, lineno=None) -> LogEvent:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 12:
        raise LogFormatError(f"expected 12 tab-separated fields, got {len(parts)}", path, lineno)
    seq, kind, rid = parts[:3]
    if kind not in EVENT_KINDS:
        raise LogFormatError(f"unknown event kind {kind!r}", path, lineno)
    try:
        seq = int(seq)
        x0, y0, x1, y1, a0, p0, a1, p1 = map(float, parts[3:11])
    except ValueError as exc:
        raise LogFormatError(str(exc), path, lineno) from None
    fields = {}
    for item in parts[11].split(";"):
        if not item:
            continue
        key, sep, value = item.partition("=")
        if not sep:
            raise LogFormatError(f"bad extra field {item!r}", path, lineno)
        fields[key] = value
    if "h" not in fields:
        raise LogFormatError("extra field lacks heading 'h='", path, lineno)
    try:
        kw = dict(
            heading=float(fields["h"]),
            turn=float(fields["turn"]) if "turn" in fields else None,
            side=fields.get("side"),
            standoff=float(fields["standoff"]) if "standoff" in fields else None,
            singular=fields.get("singular"),
            peer=fields.get("peer"),
        )
    except ValueError as exc:
        raise LogFormatError(str(exc), path, lineno) from None
    return LogEvent(rid, seq, kind, (x0, y0), (x1, y1), (a0, p0), (a1, p1), **kw)


def dumps_log(events) -> str:
    evs = sorted(events, key=lambda e: e.key)
    return "\n".join([HEADER] + [format_event(e) for e in evs]) + "\n"


def loads_log(text: str, path=None) -> list[LogEvent]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise LogFormatError(f"missing '{HEADER}' header", path, 1)
    out = []
    for k, line in enumerate(lines[1:], start=2):
        if line.strip():
            out.append(parse_event(line, path, k))
    return out


def write_log(path, events) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_log(events))


def read_log(path) -> list[LogEvent]:
    with open(path, encoding="utf-8") as fh:
        return loads_log(fh.read(), path)
