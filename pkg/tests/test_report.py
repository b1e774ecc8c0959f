import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nullgeo.report import Report, format_value, parse_report, same_number

anyfloat = st.floats(allow_nan=True, allow_infinity=True)


def _same(a, b):
    if isinstance(a, np.ndarray):
        return a.shape == b.shape and all(same_number(float(x), float(y)) for x, y in zip(a.ravel(), b.ravel()))
    return same_number(a, b)


@given(anyfloat, arrays(float, st.integers(1, 5), elements=anyfloat),
       arrays(float, st.tuples(st.integers(1, 4), st.integers(1, 4)), elements=anyfloat),
       st.integers(-10**12, 10**12))
def test_round_trip_is_bit_exact(x, vec, mat, n):
    r = Report("test").add("x", x).add("vec", vec).add("mat", mat).add("n", n).add("flag", True)
    back = parse_report(r.render())
    assert back["command"] == "test"
    assert isinstance(back["x"], float) and _same(back["x"], x)
    if not math.isnan(x):
        assert np.float64(back["x"]).tobytes() == np.float64(x).tobytes()
    assert _same(back["vec"], vec)
    assert _same(back["mat"], mat)
    assert back["n"] == n and back["flag"] is True


def test_keys_are_validated():
    r = Report()
    r.add("a.b-c:d_1", 1)
    with pytest.raises(ValueError):
        r.add("a.b-c:d_1", 2)
    for key in ("", "has space", "eq=ual", "semi;colon"):
        with pytest.raises(ValueError):
            r.add(key, 1)


@pytest.mark.parametrize("text", ["a;b", "x|y", "1.5", "nan", "true", "line\nbreak"])
def test_ambiguous_text_is_rejected(text):
    with pytest.raises(ValueError):
        format_value(text)


def test_header_and_comments():
    r = Report("inspect").add("verdict", "totally_geodesic")
    text = r.render()
    assert text.startswith("# nullgeo report v1\n")
    back = parse_report(text.replace("verdict=", "# a comment\nverdict="))
    assert back["verdict"] == "totally_geodesic"
    with pytest.raises(ValueError):
        parse_report("command=x\n")
    with pytest.raises(ValueError):
        format_value(np.zeros((2, 2, 2)))


def test_single_element_vector_stays_a_vector():
    back = parse_report(Report().add("v", [2.5]).render())
    assert isinstance(back["v"], np.ndarray) and back["v"].tolist() == [2.5]
