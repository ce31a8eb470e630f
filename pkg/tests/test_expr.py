import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genericlab import taylor
from genericlab.errors import DomainError, ParseError, UnknownIdentifierError
from genericlab.expr import Expression, evaluate, evaluate_jet, evaluate_many, parse, share_subexpressions

TXYZ = ["t", "x", "y", "z"]


def test_polynomial_value():
    assert evaluate(parse("t^2 + 2*x", TXYZ), [1, 1, 0, 0]) == 3.0


def test_double_angle_identity():
    e = parse("sin(x)*cos(x)", TXYZ)
    assert abs(evaluate(e, [0, 0.3, 0, 0]) - 0.5 * np.sin(0.6)) <= 1e-14


def test_undeclared_parameter_is_reported_with_position():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("1 - 2*m/r", ["t", "r", "th", "ph"])
    assert info.value.position == 6
    assert "'m'" in str(info.value)


def test_constants_resolve_parameters():
    e = parse("1 - 2*m/r", ["t", "r", "th", "ph"], {"m": 1.0})
    assert evaluate(e, [0, 10, 1, 0]) == pytest.approx(0.8)


@pytest.mark.parametrize(
    "text, pos",
    [("x +", 3), ("(x + y", 6), ("x ^ 0.5", 4), ("2 ** y", 5), ("x $ y", 2), ("foo(x)", 0), ("sin x", 0)],
)
def test_syntax_errors_carry_positions(text, pos):
    with pytest.raises(ParseError) as info:
        parse(text, TXYZ)
    assert info.value.position == pos


def test_precedence():
    cases = {
        "-x^2": -4.0,
        "2*3^2": 18.0,
        "2^3^2": 512.0,
        "8/2/2": 2.0,
        "1 - 2 - 3": -4.0,
        "-(x)*-(x)": 4.0,
        "x**2": 4.0,
        "2^-1": 0.5,
        "pi": np.pi,
    }
    for text, value in cases.items():
        assert evaluate(parse(text, ["x"]), [2.0]) == pytest.approx(value), text


def test_exp_series():
    jet = evaluate_jet(parse("exp(x)", ["x"]), [0.0], 4)
    assert np.allclose(jet.coefficients, [1, 1, 1 / 2, 1 / 6, 1 / 24], rtol=1e-15)


def test_sin_xy_against_finite_differences():
    e = parse("sin(x*y)", ["x", "y"])
    p = np.array([0.7, -0.4])
    jet = evaluate_jet(e, p, 3)
    h = 1e-3

    def f(dx, dy):
        return evaluate(e, p + h * np.array([dx, dy]))

    fd = {
        (1, 0): (f(1, 0) - f(-1, 0)) / (2 * h),
        (0, 1): (f(0, 1) - f(0, -1)) / (2 * h),
        (2, 0): (f(1, 0) - 2 * f(0, 0) + f(-1, 0)) / h**2,
        (1, 1): (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / (4 * h * h),
        (0, 2): (f(0, 1) - 2 * f(0, 0) + f(0, -1)) / h**2,
        (3, 0): (f(2, 0) - 2 * f(1, 0) + 2 * f(-1, 0) - f(-2, 0)) / (2 * h**3),
        (2, 1): ((f(1, 1) - 2 * f(0, 1) + f(-1, 1)) - (f(1, -1) - 2 * f(0, -1) + f(-1, -1))) / (2 * h**3),
    }
    for alpha, value in fd.items():
        assert jet.derivative(alpha) == pytest.approx(value, rel=1e-6, abs=1e-9 if sum(alpha) < 3 else 1e-5)


def test_domain_errors_name_the_subexpression():
    with pytest.raises(DomainError) as info:
        evaluate_jet(parse("log(x - 1)", ["x"]), [1.0], 2)
    assert "log" in str(info.value)
    with pytest.raises(DomainError):
        evaluate(parse("1/(x - 2)", ["x"]), [2.0])
    with pytest.raises(DomainError):
        evaluate_jet(parse("sqrt(x)", ["x"]), [-1.0], 1)


def test_constant_jet_has_no_higher_coefficients():
    jet = evaluate_jet(parse("3.5 + 0*x", ["x", "y"]), [0.2, 0.1], 3)
    assert jet.coefficients[0] == 3.5
    assert not np.any(jet.coefficients[1:])


def test_float_dual_and_jet_modes_agree():
    exprs = [parse(s, TXYZ) for s in ("exp(t)*x^2", "log(2+y)/cosh(z)", "sqrt(3 + t*x*y) - sin(z)^3")]
    pts = np.array([[0.1, 0.2, 0.3, -0.4], [0.5, -0.2, 0.1, 0.9]])
    fl = evaluate_many(exprs, pts, mode="float")
    du = evaluate_many(exprs, pts, mode="dual")
    jt = evaluate_many(exprs, pts, mode="jet", k=1)
    for f, (v, grad), j in zip(fl, du, jt):
        assert np.allclose(f, v, rtol=1e-15)
        assert np.allclose(j[..., 0], v, rtol=1e-15)
        assert np.allclose(j[..., 1:], grad, rtol=1e-13)


@st.composite
def formulas(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(st.sampled_from(["x", "y", "0.5", "2", "1.5"]))
    kind = draw(st.sampled_from(["+", "-", "*", "f", "^"]))
    if kind == "f":
        return f"{draw(st.sampled_from(['exp', 'sin', 'cos', 'sinh', 'cosh']))}({draw(formulas(depth - 1))})"
    if kind == "^":
        return f"({draw(formulas(depth - 1))})^{draw(st.integers(0, 3))}"
    return f"({draw(formulas(depth - 1))} {kind} {draw(formulas(depth - 1))})"


@settings(max_examples=60, deadline=None)
@given(formulas(), formulas())
def test_product_rule_in_jets(a, b):
    p = np.array([0.3, -0.2])
    ea, eb = parse(a, ["x", "y"]), parse(b, ["x", "y"])
    prod = parse(f"({a})*({b})", ["x", "y"])
    ja, jb, jp = (evaluate_jet(e, p, 3).coefficients for e in (ea, eb, prod))
    ref = taylor.jet_mul(ja, jb, 2, 3)
    scale = max(1.0, np.max(np.abs(ref)))
    assert np.max(np.abs(jp - ref)) <= 1e-13 * scale


@settings(max_examples=60, deadline=None)
@given(formulas())
def test_printed_form_reparses_to_same_values(a):
    e = parse(a, ["x", "y"])
    again = parse(str(e.root), ["x", "y"])
    p = np.array([0.4, 0.7])
    assert evaluate(again, p) == pytest.approx(evaluate(e, p), rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=10, max_size=10), st.lists(st.floats(-0.5, 0.5), min_size=2, max_size=2))
def test_polynomial_jets_are_exact(coeffs, offset):
    terms = ["1", "x", "y", "x^2", "x*y", "y^2", "x^3", "x^2*y", "x*y^2", "y^3"]
    text = " + ".join(f"({c!r})*{t}" for c, t in zip(coeffs, terms))
    e = parse(text, ["x", "y"])
    p = np.array([0.2, -0.3])
    jet = evaluate_jet(e, p, 3)
    q = p + np.array(offset)
    direct = evaluate(e, q)
    assert jet.polynomial(q) == pytest.approx(direct, rel=1e-12, abs=1e-12)


def test_shared_subexpressions_keep_values():
    a = parse("exp(x*y) + (x*y)^2", ["x", "y"])
    b = parse("sin(x*y) - exp(x*y)", ["x", "y"])
    ra, rb = share_subexpressions([a.root, b.root])
    p = [0.3, 0.8]
    shared = [Expression(ra, a.coords), Expression(rb, b.coords)]
    assert evaluate_many(shared, p) == pytest.approx(evaluate_many([a, b], p), rel=1e-15)
    # x*y appears once after sharing
    assert ra.left.arg is ra.right.base


def test_batched_evaluation_shapes():
    e = parse("t*x + y", TXYZ)
    pts = np.zeros((3, 5, 4))
    assert evaluate(e, pts).shape == (3, 5)
    assert evaluate_jet(e, np.zeros(4), 2).coefficients.shape == (15,)
