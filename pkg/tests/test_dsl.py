import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bifurclab.dsl import (DualFamily, dual_family, eval_expr, parse_expr, parse_family, to_text,
                           words_as_matrix)
from bifurclab.errors import (ConfigError, DeterminantError, DimensionError, DslSyntaxError,
                              PoleError, SingularError, UnknownSymbol)

VALID = [
    ("1", lambda l: 1),
    ("l", lambda l: l),
    ("-l", lambda l: -l),
    ("l + 1/l", lambda l: l + 1 / l),
    ("2*l - 3", lambda l: 2 * l - 3),
    ("l^2", lambda l: l ** 2),
    ("-l^2", lambda l: -(l ** 2)),
    ("(l + 1)^3", lambda l: (l + 1) ** 3),
    ("l^-2", lambda l: l ** -2),
    ("2^-1", lambda l: 0.5),
    ("0.1i", lambda l: 0.1j),
    ("i*l", lambda l: 1j * l),
    ("1 - 2i", lambda l: 1 - 2j),
    ("3/4*l", lambda l: 0.75 * l),
    ("l/2/3", lambda l: l / 6),
    ("1 - 2 - 3", lambda l: -4),
    ("(l + 1/l)/2", lambda l: (l + 1 / l) / 2),
    ("1.5e2 + l", lambda l: 150 + l),
    ("+l * -l", lambda l: -(l * l)),
    ("((l))", lambda l: l),
]

MALFORMED = [
    ("", 0),
    ("l +", 3),
    ("* l", 0),
    ("(l + 1", 6),
    ("l + 1)", 5),
    ("l ^ 1.5", 4),
    ("l $ 2", 2),
    ("x + 1", 0),
    ("l^2^3", 3),
    ("()", 1),
]


@pytest.mark.parametrize("text,ref", VALID)
def test_valid_expressions_round_trip(text, ref):
    e = parse_expr(text)
    e2 = parse_expr(to_text(e))
    for lam in (0.7 + 0.2j, -1.3 + 2j, 2.0):
        assert eval_expr(e, lam) == pytest.approx(ref(lam), rel=1e-14, abs=1e-14)
        assert eval_expr(e2, lam) == eval_expr(e, lam)


@pytest.mark.parametrize("text,pos", MALFORMED)
def test_malformed_expressions_report_position(text, pos):
    with pytest.raises(SyntaxError) as info:
        parse_expr(text)
    assert isinstance(info.value, DslSyntaxError)
    assert info.value.pos == pos
    assert f"position {pos}" in str(info.value)


def test_unknown_symbol_is_a_syntax_error():
    with pytest.raises(UnknownSymbol) as info:
        parse_expr("2*l + mu")
    assert info.value.pos == 6


def test_negative_exponent_of_compound_base_rejected():
    with pytest.raises(DslSyntaxError):
        parse_expr("(l + 1)^-1")


def test_precedence_power_binds_tighter_than_unary_minus():
    assert eval_expr(parse_expr("-2^2"), 0) == -4
    assert eval_expr(parse_expr("2*3^2"), 0) == 18


def test_vectorised_evaluation():
    lams = np.array([1.0, 2.0, 1j])
    np.testing.assert_allclose(eval_expr(parse_expr("l + 1/l"), lams), lams + 1 / lams)


# random expression trees against Python complex arithmetic
def _exprs():
    leaf = st.one_of(
        st.just(("l", lambda l: l)),
        st.integers(1, 9).map(lambda k: (str(k), lambda l, k=k: k)),
        st.sampled_from([("0.5i", lambda l: 0.5j), ("2.25", lambda l: 2.25)]),
    )

    def extend(children):
        bin_ = st.tuples(children, st.sampled_from("+-*"), children).map(
            lambda t: (f"({t[0][0]}) {t[1]} ({t[2][0]})",
                       (lambda a, op, b: (lambda l: a(l) + b(l)) if op == "+" else
                        (lambda l: a(l) - b(l)) if op == "-" else (lambda l: a(l) * b(l)))(
                           t[0][1], t[1], t[2][1])))
        neg = children.map(lambda c: (f"-({c[0]})", lambda l, f=c[1]: -f(l)))
        pw = st.tuples(children, st.integers(0, 3)).map(
            lambda t: (f"({t[0][0]})^{t[1]}", lambda l, f=t[0][1], p=t[1]: f(l) ** p))
        return st.one_of(bin_, neg, pw)
    return st.recursive(leaf, extend, max_leaves=8)


@given(_exprs(), st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False))
def test_random_expressions_match_python(expr, lam):
    text, ref = expr
    got = eval_expr(parse_expr(text), lam)
    want = ref(lam)
    assert abs(got - want) <= 1e-9 * max(1.0, abs(want))
    assert eval_expr(parse_expr(to_text(parse_expr(text))), lam) == pytest.approx(got, rel=1e-12, abs=1e-12)


# -- families ------------------------------------------------------------------

DIAG = {"dimension": 2, "generators": {"a": [["l", "0"], ["0", "1/l"]]}, "poles": [[0, 0]]}


def test_family_evaluation_and_inverse():
    fam = parse_family(DIAG)
    m = fam.matrix("a", 2.0)
    np.testing.assert_allclose(m, np.diag([2.0, 0.5]))
    np.testing.assert_allclose(fam.matrix("A", 2.0), np.diag([0.5, 2.0]))
    assert fam.slot_of("a") == 0 and fam.slot_of("A") == 1 and fam.slot_of(-1) == 1


def test_determinant_violation_rejected():
    bad = {"dimension": 2, "generators": {"a": [["l", "1"], ["0", "1"]]}}
    with pytest.raises(DeterminantError):
        parse_family(bad)


def test_dimension_mismatch_rejected():
    with pytest.raises(DimensionError):
        parse_family({"dimension": 2, "generators": {"a": [["1", "0", "0"], ["0", "1", "0"]]}})
    with pytest.raises(DimensionError):
        parse_family({"dimension": 1, "generators": {"a": [["1"]]}})


def test_config_errors():
    with pytest.raises(ConfigError):
        parse_family("{not json")
    with pytest.raises(ConfigError):
        parse_family({"dimension": 2})
    with pytest.raises(ConfigError):
        parse_family({"dimension": 2, "generators": {"A": [["1", "0"], ["0", "1"]]}})


def test_pole_guard():
    fam = parse_family(DIAG)
    with pytest.raises(PoleError):
        fam.slot_images(np.array([0.0]), strict=True)
    images, bad = fam.slot_images(np.array([0.0, 1.0]), strict=False)
    assert bad.tolist() == [True, False]
    np.testing.assert_array_equal(images[:, 0], np.broadcast_to(np.eye(2), (2, 2, 2)))


def test_dual_family_is_inverse_transpose(load):
    fam, _ = load("schottky")
    dual = dual_family(fam)
    assert isinstance(dual, DualFamily)
    for g in ("a", "b"):
        m = fam.matrix(g, 2.3 + 0.4j)
        np.testing.assert_allclose(dual.matrix(g, 2.3 + 0.4j), np.linalg.inv(m).T, atol=1e-12)
    assert dual_family(dual) is fam


def test_words_as_matrix_order(load):
    fam, _ = load("schottky")
    lam = 2.5
    a, b = fam.matrix("a", lam), fam.matrix("b", lam)
    np.testing.assert_allclose(words_as_matrix(fam, [1, 2, -1], lam), a @ b @ np.linalg.inv(a))


def test_top_level_config_accepted(load):
    from bifurclab import families
    fam = parse_family(families.config("riley"))
    assert fam.generators == ("a", "b")


def test_singular_inverse_detected():
    from bifurclab.dsl import _invert_checked
    mats = np.array([[[1.0, 2.0], [2.0, 4.0]], [[1.0, 0.0], [0.0, 1.0]]], dtype=complex)
    inv, bad = _invert_checked(mats, strict=False)
    assert bad.tolist() == [True, False]
    with pytest.raises(SingularError):
        _invert_checked(mats, strict=True)
