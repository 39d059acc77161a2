"""Line-delimited JSON trace files.

The first line is a header ``{"N", "K", "T", "zero_count_class"}`` (plus
``"loss_mode": "real"`` for real-valued traces); every following line is one
round ``{"t", "available", "loss"}`` with ``loss`` aligned to ``available``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import IO, Iterable

from .core import BINARY, REAL, Environment, RoundTrace


class TraceParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _num(x: float) -> int | float:
    return int(x) if float(x).is_integer() else float(x)


def header_record(env: Environment) -> dict:
    rec = {"N": env.N, "K": env.K, "T": env.T, "zero_count_class": env.zero_count_class}
    if env.loss_mode == REAL:
        rec["loss_mode"] = REAL
    return rec


def round_record(r: RoundTrace) -> dict:
    return {"t": r.t, "available": list(r.available), "loss": [_num(x) for x in r.losses]}


def dumps(env: Environment) -> str:
    lines = [json.dumps(header_record(env), separators=(",", ":"))]
    lines += [json.dumps(round_record(r), separators=(",", ":")) for r in env.rounds]
    return "\n".join(lines) + "\n"


def write_trace(env: Environment, path: str | Path) -> None:
    Path(path).write_text(dumps(env), encoding="utf-8")


def parse_lines(lines: Iterable[str]) -> Environment:
    header = None
    rounds: list[RoundTrace] = []
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceParseError(lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise TraceParseError(lineno, "record is not an object")
        if header is None:
            missing = [k for k in ("N", "K", "T", "zero_count_class") if k not in rec]
            if missing:
                raise TraceParseError(lineno, f"header missing fields {missing}")
            header = rec
            continue
        try:
            t, avail, loss = rec["t"], rec["available"], rec["loss"]
        except KeyError as exc:
            raise TraceParseError(lineno, f"round missing field {exc.args[0]!r}") from None
        if not isinstance(avail, list) or not isinstance(loss, list):
            raise TraceParseError(lineno, "available and loss must be arrays")
        if len(avail) != len(loss):
            raise TraceParseError(lineno, "loss array not aligned with available")
        if not all(isinstance(a, int) and not isinstance(a, bool) for a in avail):
            raise TraceParseError(lineno, "available must hold integers")
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in loss):
            raise TraceParseError(lineno, "loss must hold numbers")
        if not avail or any(a >= b for a, b in zip(avail, avail[1:])):
            raise TraceParseError(lineno, "available must be nonempty, sorted and duplicate-free")
        if avail[0] < 0 or avail[-1] >= int(header["N"]):
            raise TraceParseError(lineno, f"action id outside [0, {header['N']})")
        rounds.append(RoundTrace(int(t), tuple(avail), tuple(loss)))
    if header is None:
        raise TraceParseError(1, "empty trace")
    if int(header["T"]) != len(rounds):
        raise TraceParseError(1, f"header declares T={header['T']} but {len(rounds)} rounds follow")
    return Environment(
        N=int(header["N"]),
        K=int(header["K"]),
        rounds=tuple(rounds),
        zero_count_class=str(header["zero_count_class"]),
        loss_mode=str(header.get("loss_mode", BINARY)),
    )


def loads(text: str) -> Environment:
    return parse_lines(text.splitlines())


def read_trace(path: str | Path) -> Environment:
    with open(path, encoding="utf-8") as fh:
        return parse_lines(fh)


def dump(env: Environment, fh: IO[str]) -> None:
    fh.write(dumps(env))
