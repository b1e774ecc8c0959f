import dataclasses

import numpy as np
import pytest

from nullgeo.errors import DefinitionError
from nullgeo.golden import CASES, QUANTITIES, load_case, parse_expectations, run_golden


@pytest.mark.parametrize("name", CASES)
def test_bundled_cases_pass(name):
    rep = run_golden(load_case(name))
    assert rep.passed, rep.diff_table()
    assert rep.rows and all(r.status in ("pass", "info") for r in rep.rows)


@pytest.mark.parametrize("name", CASES)
def test_every_quantity_is_known(name):
    assert all(ex.quantity in QUANTITIES for ex in load_case(name).expected)


def test_published_sign_is_flagged_as_a_conflict():
    rep = run_golden(load_case("lightcone"))
    flagged = {r.quantity for r in rep.rows if r.paper_conflict}
    assert flagged == {"lambda", "dbar_P_xi", "dbar_P_P"}
    assert all(r.status == "pass" for r in rep.rows if r.paper_conflict)


def test_a_wrong_expectation_fails_with_a_diff():
    case = load_case("plane")
    bad = dataclasses.replace(case.expected[2], value=1.0)
    rep = run_golden(dataclasses.replace(case, expected=[bad]))
    assert not rep.passed
    assert "max_abs_B @ o" in rep.diff_table()


def test_unknown_quantity_fails():
    case = load_case("plane")
    bad = dataclasses.replace(case.expected[0], quantity="no_such_thing")
    rep = run_golden(dataclasses.replace(case, expected=[bad]))
    assert rep.rows[0].message == "unknown quantity"


def test_info_rows_never_fail():
    case = load_case("plane")
    row = dataclasses.replace(case.expected[2], value=123.0, tol="info")
    rep = run_golden(dataclasses.replace(case, expected=[row]))
    assert rep.passed and rep.rows[0].status == "info"


def test_expectation_parsing():
    ex = parse_expectations("nullgeo-expect v1\n# c\nlambda | r1 | 1; 2 | 1e-3 | DERIVED\n")
    np.testing.assert_array_equal(ex[0].value, [1.0, 2.0])
    assert ex[0].tol == 1e-3 and ex[0].line == 3
    for text, line in [
        ("lambda | r1 | 1 | 1e-3 | GUESSED", 2),
        ("lambda | r1 | 1 | 1e-3 | PAPER", 2),
        ("lambda | r1 | 1 | loose | DERIVED", 2),
        ("lambda | r1 | 1", 2),
    ]:
        with pytest.raises(DefinitionError) as exc:
            parse_expectations("nullgeo-expect v1\n" + text + "\n")
        assert exc.value.line == line
    with pytest.raises(DefinitionError):
        parse_expectations("lambda | r1 | 1 | 1e-3 | DERIVED\n")
