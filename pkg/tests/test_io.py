import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sgbs.problems import (
    CvrpInstance,
    InstanceFormatError,
    TspInstance,
    format_instance,
    parse_batch,
    parse_instance,
    parse_text,
    serialize_batch,
    serialize_instance,
)

from conftest import instances


def same(a, b):
    return type(a) is type(b) and a == b


@given(instances())
def test_roundtrip(inst):
    (back,) = parse_text(format_instance(inst))
    assert same(back, inst)
    assert format_instance(back) == format_instance(inst)


@given(st.lists(instances(), min_size=1, max_size=4))
def test_batch_roundtrip(batch):
    text = "\n".join(format_instance(x) for x in batch)
    back = parse_text(text)
    assert len(back) == len(batch)
    assert all(same(a, b) for a, b in zip(back, batch))


def test_file_roundtrip(tmp_path):
    x = TspInstance(np.array([[0.1, 0.2], [0.3, 1 / 3], [0.99, 0.0]]))
    serialize_instance(tmp_path / "t.txt", x)
    assert same(parse_instance(tmp_path / "t.txt"), x)
    serialize_batch(tmp_path / "b.txt", [x, x])
    assert len(parse_batch(tmp_path / "b.txt")) == 2


def test_fixture_file():
    x = parse_instance("tests/data/cvrp5.txt")
    assert isinstance(x, CvrpInstance)
    assert x.n == 5 and x.capacity == 10
    assert list(x.demands) == [4, 8, 5, 1, 7]
    assert x.depot[0] == 0.6369616873214543


def error_line(text):
    with pytest.raises(InstanceFormatError) as info:
        parse_text(text)
    return info.value.line, str(info.value)


def test_missing_coordinate_line():
    text = "PROBLEM TSP\nN 5\n0.1 0.1\n0.2 0.2\n0.3 0.3\n0.4 0.4\n"
    line, msg = error_line(text)
    assert line == 7
    assert "unexpected end" in msg


def test_demand_over_capacity():
    text = "PROBLEM CVRP\nN 2 CAP 5\nDEPOT 0.5 0.5\n0.1 0.1 3\n0.2 0.2 6\n"
    line, msg = error_line(text)
    assert line == 5
    assert "exceeds capacity" in msg


def test_extra_line():
    text = "PROBLEM TSP\nN 3\n0.1 0.1\n0.2 0.2\n0.3 0.3\n0.4 0.4\n"
    line, msg = error_line(text)
    assert line == 6
    assert "extra" in msg


@pytest.mark.parametrize(
    "text,line",
    [
        ("PROBLEM VRPTW\nN 3\n", 1),
        ("PROBLEM TSP\nN three\n", 2),
        ("PROBLEM TSP\nM 3\n", 2),
        ("PROBLEM TSP\nN 3\n0.1 0.1\n0.2 x\n0.3 0.3\n", 4),
        ("PROBLEM TSP\nN 3\n0.1 0.1 0.1\n0.2 0.2\n0.3 0.3\n", 3),
        ("PROBLEM FFSP\nJOBS 2 STAGES 1\nMACHINES 1\n1 2 3\n", 4),
        ("PROBLEM CVRP\nN 1 CAP 5\n0.5 0.5\n0.1 0.1 1\n", 3),
        ("PROBLEM TSP\nN 3\n0.1 0.1\n0.2 0.2\n1.5 0.3\n", 1),
    ],
)
def test_malformed(text, line):
    got, _ = error_line(text)
    assert got == line


def test_errors_in_second_block_report_absolute_lines():
    good = "PROBLEM TSP\nN 3\n0.1 0.1\n0.2 0.2\n0.3 0.3\n"
    bad = "PROBLEM TSP\nN 3\n0.1 0.1\n0.2 0.2\n"
    line, _ = error_line(good + "\n" + bad)
    assert line == 11


def test_parse_instance_requires_single(tmp_path):
    x = TspInstance(np.array([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]]))
    serialize_batch(tmp_path / "b.txt", [x, x])
    with pytest.raises(InstanceFormatError):
        parse_instance(tmp_path / "b.txt")
