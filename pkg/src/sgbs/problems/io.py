"""Line-oriented instance files.

    PROBLEM TSP            PROBLEM CVRP             PROBLEM FFSP
    N <n>                  N <n> CAP <c>            JOBS <j> STAGES <s>
    x y   (n lines)        DEPOT x y                MACHINES <m>
                           x y demand (n lines)     <j ints>  (m lines, per stage)

A batch file holds several instances separated by blank lines.  Floats are
written with ``repr`` so parsing gives back the exact doubles.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .cvrp import CvrpInstance
from .ffsp import FfspInstance
from .tsp import TspInstance


class InstanceFormatError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def _f(x) -> str:
    return repr(float(x))


def format_instance(inst) -> str:
    lines = [f"PROBLEM {inst.kind}"]
    if isinstance(inst, TspInstance):
        lines.append(f"N {inst.n}")
        lines += [f"{_f(x)} {_f(y)}" for x, y in inst.coords]
    elif isinstance(inst, CvrpInstance):
        lines.append(f"N {inst.n} CAP {inst.capacity}")
        lines.append(f"DEPOT {_f(inst.depot[0])} {_f(inst.depot[1])}")
        lines += [f"{_f(x)} {_f(y)} {int(d)}" for (x, y), d in zip(inst.coords, inst.demands)]
    elif isinstance(inst, FfspInstance):
        lines.append(f"JOBS {inst.num_jobs} STAGES {inst.num_stages}")
        for st in inst.stages:
            lines.append(f"MACHINES {st.shape[0]}")
            lines += [" ".join(str(int(v)) for v in row) for row in st]
    else:
        raise TypeError(f"cannot serialize {type(inst).__name__}")
    return "\n".join(lines) + "\n"


def format_batch(instances) -> str:
    return "\n".join(format_instance(i) for i in instances)


class _Lines:
    def __init__(self, block: list[tuple[int, str]]):
        self.block = block
        self.pos = 0

    def next(self, what: str) -> tuple[int, list[str]]:
        if self.pos >= len(self.block):
            last = self.block[-1][0] if self.block else 0
            raise InstanceFormatError(last + 1, f"unexpected end of instance, expected {what}")
        no, text = self.block[self.pos]
        self.pos += 1
        return no, text.split()

    def keyword(self, toks, no, *names):
        # expects "NAME value NAME value ..."
        if len(toks) != 2 * len(names) or [toks[i] for i in range(0, len(toks), 2)] != list(names):
            raise InstanceFormatError(no, f"expected '{' '.join(n + ' <value>' for n in names)}'")
        return [toks[i] for i in range(1, len(toks), 2)]


def _num(tok: str, no: int, kind=float):
    try:
        return kind(tok)
    except ValueError:
        raise InstanceFormatError(no, f"malformed number {tok!r}") from None


def _parse_block(block: list[tuple[int, str]]):
    rd = _Lines(block)
    no, toks = rd.next("PROBLEM header")
    (kind,) = rd.keyword(toks, no, "PROBLEM")
    try:
        if kind == "TSP":
            no, toks = rd.next("N header")
            (n,) = rd.keyword(toks, no, "N")
            n = _num(n, no, int)
            pts = []
            for _ in range(n):
                no, toks = rd.next(f"{n} coordinate lines")
                if len(toks) != 2:
                    raise InstanceFormatError(no, "expected 'x y'")
                pts.append([_num(t, no) for t in toks])
            inst = TspInstance(np.array(pts).reshape(-1, 2))
        elif kind == "CVRP":
            no, toks = rd.next("N/CAP header")
            n, cap = (_num(v, no, int) for v in rd.keyword(toks, no, "N", "CAP"))
            no, toks = rd.next("DEPOT line")
            if len(toks) != 3 or toks[0] != "DEPOT":
                raise InstanceFormatError(no, "expected 'DEPOT x y'")
            depot = [_num(t, no) for t in toks[1:]]
            pts, dem = [], []
            for _ in range(n):
                no, toks = rd.next(f"{n} customer lines")
                if len(toks) != 3:
                    raise InstanceFormatError(no, "expected 'x y demand'")
                pts.append([_num(t, no) for t in toks[:2]])
                d = _num(toks[2], no, int)
                if d > cap:
                    raise InstanceFormatError(no, f"demand {d} exceeds capacity {cap}")
                dem.append(d)
            inst = CvrpInstance(depot, np.array(pts).reshape(-1, 2), dem, cap)
        elif kind == "FFSP":
            no, toks = rd.next("JOBS/STAGES header")
            j, s = (_num(v, no, int) for v in rd.keyword(toks, no, "JOBS", "STAGES"))
            stages = []
            for _ in range(s):
                no, toks = rd.next("MACHINES line")
                (m,) = rd.keyword(toks, no, "MACHINES")
                m = _num(m, no, int)
                rows = []
                for _ in range(m):
                    no, toks = rd.next(f"{m} machine lines")
                    if len(toks) != j:
                        raise InstanceFormatError(no, f"expected {j} processing times, got {len(toks)}")
                    rows.append([_num(t, no, int) for t in toks])
                stages.append(np.array(rows, dtype=np.int64).reshape(m, j))
            inst = FfspInstance(j, tuple(stages))
        else:
            raise InstanceFormatError(no, f"unknown problem {kind!r}")
    except InstanceFormatError:
        raise
    except ValueError as e:
        raise InstanceFormatError(block[0][0], str(e)) from None
    if rd.pos != len(block):
        raise InstanceFormatError(block[rd.pos][0], "unexpected extra line")
    return inst


def parse_text(text: str) -> list:
    blocks, cur = [], []
    for no, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            cur.append((no, line))
        elif cur:
            blocks.append(cur)
            cur = []
    if cur:
        blocks.append(cur)
    return [_parse_block(b) for b in blocks]


def serialize_instance(path, inst) -> None:
    Path(path).write_text(format_instance(inst), encoding="utf-8")


def serialize_batch(path, instances) -> None:
    Path(path).write_text(format_batch(instances), encoding="utf-8")


def parse_instance(path):
    insts = parse_text(Path(path).read_text(encoding="utf-8"))
    if len(insts) != 1:
        raise InstanceFormatError(1, f"expected one instance, found {len(insts)}")
    return insts[0]


def parse_batch(path) -> list:
    return parse_text(Path(path).read_text(encoding="utf-8"))
