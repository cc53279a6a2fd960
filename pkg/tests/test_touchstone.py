import numpy as np
import pytest
from hypothesis import given, strategies as st

from ferroq.network import Metadata, Network
from ferroq.touchstone import (TouchstoneError, parse_touchstone, read_touchstone, save_touchstone,
                               write_touchstone)

from touchstone_corpus import MALFORMED, random_touchstone


@pytest.mark.parametrize("seed", range(100))
def test_corpus_round_trip(seed):
    a = parse_touchstone(random_touchstone(seed))
    b = parse_touchstone(write_touchstone(a))
    assert np.array_equal(a.freqs, b.freqs)
    assert np.array_equal(np.nan_to_num(a.s), np.nan_to_num(b.s))
    assert a.meta == b.meta and a.z0 == b.z0 and a.n_ports == b.n_ports


@pytest.mark.parametrize("name,text,line", MALFORMED, ids=[m[0] for m in MALFORMED])
def test_malformed(name, text, line):
    with pytest.raises(TouchstoneError) as exc:
        parse_touchstone(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_formats_agree():
    ri = "# MHz S RI R 50\n100 0 0.5\n"
    ma = "# MHz S MA R 50\n100 0.5 90\n"
    db = f"# MHz S DB R 50\n100 {float(20 * np.log10(0.5))!r} 90\n"
    vals = [parse_touchstone(t, n_ports=1).s11[0] for t in (ri, ma, db)]
    assert np.allclose(vals, 0.5j)
    assert parse_touchstone(ri).freqs[0] == 100e6


def test_two_port_column_order():
    net = parse_touchstone("# Hz S RI R 50\n1 1 0 2 0 3 0 4 0\n")
    assert (net.s11[0], net.s21[0], net.s12[0], net.s22[0]) == (1, 2, 3, 4)


def test_metadata_comments_and_file_io(tmp_path):
    net = Network([1e9, 2e9], np.full((2, 2, 2), 0.1 + 0.2j), 50.0,
                  Metadata(bias_voltage=-3.0, sweep_direction="backward", temperature=300.0, label="dut 7"))
    p = tmp_path / "x.s2p"
    save_touchstone(net, p)
    back = read_touchstone(p)
    assert back.meta == net.meta
    assert np.array_equal(back.s, net.s)


def test_s1p_extension_forces_one_port(tmp_path):
    p = tmp_path / "a.s1p"
    p.write_text("# GHz S RI R 50\n1 0.1 0.2\n2 0.3 0.4\n")
    assert read_touchstone(p).n_ports == 1


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=20),
       st.floats(1e-3, 1e3))
def test_write_parse_property(vals, z0):
    n = len(vals)
    s = np.array([complex(a, b) for a, b in vals])
    net = Network(np.arange(1, n + 1) * 1e6, s, z0, n_ports=1)
    back = parse_touchstone(write_touchstone(net))
    assert np.array_equal(back.s11, net.s11) and back.z0 == net.z0
