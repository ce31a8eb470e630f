"""Formula parsing and evaluation with exact truncated-Taylor derivatives.

Grammar (precedence high to low)::

    atom    := NUMBER | NAME | NAME '(' sum ')' | '(' sum ')'
    power   := atom ['^' unary]          # right-associative, integer exponent
    unary   := ('-' | '+') unary | power
    product := unary (('*' | '/') unary)*
    sum     := product (('+' | '-') product)*

``**`` is accepted as a synonym for ``^``.  Names resolve to declared
coordinates, then to supplied constants (plus ``pi``), then to the functions
``exp log sqrt sin cos sinh cosh``.

One evaluator walks the AST for three algebras: plain floats, first-order
duals (value + gradient, used by the geodesic integrator), and full Taylor
jets.  Every algebra broadcasts over leading batch axes of the point array.
For the hot float and dual paths, :func:`compile_expressions` turns a set of
expressions into straight-line numpy code once.
"""
import math
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import taylor
from .errors import DomainError, ParseError, UnknownIdentifierError

__all__ = [
    "Node",
    "Const",
    "Var",
    "Neg",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Pow",
    "Func",
    "Expression",
    "FUNCTIONS",
    "parse",
    "evaluate",
    "evaluate_jet",
    "evaluate_many",
    "compile_expressions",
]

FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos", "sinh", "cosh")
BUILTIN_CONSTANTS = {"pi": math.pi}


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


class Node:
    """Immutable AST node.  Arithmetic operators build new nodes with constant folding."""

    __slots__ = ()

    def children(self):
        return ()

    def __add__(self, other):
        return make_add(self, _lift(other))

    def __radd__(self, other):
        return make_add(_lift(other), self)

    def __sub__(self, other):
        return make_sub(self, _lift(other))

    def __rsub__(self, other):
        return make_sub(_lift(other), self)

    def __mul__(self, other):
        return make_mul(self, _lift(other))

    def __rmul__(self, other):
        return make_mul(_lift(other), self)

    def __truediv__(self, other):
        return make_div(self, _lift(other))

    def __rtruediv__(self, other):
        return make_div(_lift(other), self)

    def __neg__(self):
        return make_neg(self)

    def __pow__(self, exponent):
        return make_pow(self, exponent)


@dataclass(frozen=True, eq=False)
class Const(Node):
    value: float

    def __str__(self):
        v = float(self.value)
        return repr(v) if v >= 0 else f"({v!r})"


@dataclass(frozen=True, eq=False)
class Var(Node):
    index: int
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True, eq=False)
class Neg(Node):
    arg: Node

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"-({self.arg})"


@dataclass(frozen=True, eq=False)
class _Binary(Node):
    left: Node
    right: Node
    symbol = "?"

    def children(self):
        return (self.left, self.right)

    def __str__(self):
        return f"({self.left} {self.symbol} {self.right})"


class Add(_Binary):
    symbol = "+"


class Sub(_Binary):
    symbol = "-"


class Mul(_Binary):
    symbol = "*"


class Div(_Binary):
    symbol = "/"


@dataclass(frozen=True, eq=False)
class Pow(Node):
    base: Node
    exponent: int

    def children(self):
        return (self.base,)

    def __str__(self):
        base = str(self.base)
        if not isinstance(self.base, (Var, Func)):
            base = f"({base})"
        return f"{base}^{self.exponent}"


@dataclass(frozen=True, eq=False)
class Func(Node):
    name: str
    arg: Node

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unsupported function '{self.name}'")

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"{self.name}({self.arg})"


def _lift(x):
    if isinstance(x, Node):
        return x
    if isinstance(x, Expression):
        return x.root
    return Const(float(x))


def _is_const(node, value=None):
    return isinstance(node, Const) and (value is None or node.value == value)


def make_add(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def make_sub(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return make_neg(b)
    return Sub(a, b)


def make_mul(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Mul(a, b)


def make_div(a, b):
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is_const(b, 1.0):
        return a
    return Div(a, b)


def make_neg(a):
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def make_pow(a, exponent):
    exponent = int(exponent)
    if _is_const(a) and not (a.value == 0.0 and exponent < 0):
        return Const(a.value**exponent)
    if exponent == 1:
        return a
    if exponent == 0:
        return Const(1.0)
    return Pow(a, exponent)


def make_func(name, a):
    if _is_const(a):
        try:
            value = _FLOAT_FUNCS[name](a.value)
        except (ValueError, OverflowError):
            return Func(name, a)
        return Const(value)
    return Func(name, a)


_FLOAT_FUNCS = {
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "sin": math.sin,
    "cos": math.cos,
    "sinh": math.sinh,
    "cosh": math.cosh,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text=text)
        kind = m.lastgroup
        start = m.start(kind)
        value = m.group(kind)
        if kind == "op" and value == "**":
            value = "^"
        tokens.append((kind, value, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, coords, constants):
        self.text = text
        self.coords = {name: i for i, name in enumerate(coords)}
        self.constants = {**BUILTIN_CONSTANTS, **(constants or {})}
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, pos=None, cls=ParseError):
        if pos is None:
            pos = self.peek()[2]
        raise cls(message, pos, text=self.text)

    def expect(self, value):
        kind, tok, pos = self.peek()
        if tok != value or kind == "end":
            found = "end of input" if kind == "end" else repr(tok)
            self.fail(f"expected {value!r}, found {found}")
        self.take()

    def parse(self):
        if self.peek()[0] == "end":
            self.fail("empty formula")
        node = self.sum()
        kind, tok, pos = self.peek()
        if kind != "end":
            self.fail(f"unexpected {tok!r}")
        return node

    def sum(self):
        node = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.product()
            node = make_add(node, rhs) if op == "+" else make_sub(node, rhs)
        return node

    def product(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = make_mul(node, rhs) if op == "*" else make_div(node, rhs)
        return node

    def unary(self):
        kind, tok, _ = self.peek()
        if kind == "op" and tok == "-":
            self.take()
            return make_neg(self.unary())
        if kind == "op" and tok == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        kind, tok, pos = self.peek()
        if kind == "op" and tok == "^":
            self.take()
            exp_pos = self.peek()[2]
            exponent = self.unary()
            if not isinstance(exponent, Const) or exponent.value != int(exponent.value):
                self.fail("exponent must be an integer constant (use sqrt/exp/log otherwise)", exp_pos)
            if _is_const(base, 0.0) and exponent.value < 0:
                self.fail("zero raised to a negative power", pos)
            return make_pow(base, int(exponent.value))
        return base

    def atom(self):
        kind, tok, pos = self.take()
        if kind == "num":
            return Const(float(tok))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if tok not in FUNCTIONS:
                    self.fail(f"unknown function '{tok}'", pos, UnknownIdentifierError)
                self.take()
                arg = self.sum()
                self.expect(")")
                return make_func(tok, arg)
            if tok in self.coords:
                return Var(self.coords[tok], tok)
            if tok in self.constants:
                return Const(float(self.constants[tok]))
            if tok in FUNCTIONS:
                self.fail(f"function '{tok}' needs an argument in parentheses", pos)
            self.fail(f"unknown identifier '{tok}'", pos, UnknownIdentifierError)
        if kind == "op" and tok == "(":
            node = self.sum()
            self.expect(")")
            return node
        if kind == "end":
            self.fail("unexpected end of input", pos)
        self.fail(f"unexpected {tok!r}", pos)


class Expression:
    """A parsed scalar formula over named coordinates.

    Instances are immutable and safe to share between threads.
    """

    def __init__(self, root, coords, text=None):
        self.root = root
        self.coords = tuple(coords)
        self.text = text if text is not None else str(root)
        _check_variables(self.root, len(self.coords))

    @property
    def n(self):
        return len(self.coords)

    @cached_property
    def is_constant(self):
        return isinstance(self.root, Const)

    def evaluate(self, point):
        return evaluate(self, point)

    def jet(self, point, k):
        return evaluate_jet(self, point, k)

    def _combine(self, other, op):
        if isinstance(other, Expression) and other.coords != self.coords:
            raise ValueError("expressions are over different coordinates")
        return Expression(op(self.root, _lift(other)), self.coords)

    def __add__(self, other):
        return self._combine(other, make_add)

    def __sub__(self, other):
        return self._combine(other, make_sub)

    def __mul__(self, other):
        return self._combine(other, make_mul)

    def __truediv__(self, other):
        return self._combine(other, make_div)

    def __radd__(self, other):
        return Expression(make_add(_lift(other), self.root), self.coords)

    def __rmul__(self, other):
        return Expression(make_mul(_lift(other), self.root), self.coords)

    def __neg__(self):
        return Expression(make_neg(self.root), self.coords)

    def __str__(self):
        return self.text

    def __repr__(self):
        return f"Expression({self.text!r}, coords={self.coords})"


def _check_variables(root, n):
    stack = [root]
    seen = set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, Var) and not 0 <= node.index < n:
            raise ValueError(f"variable {node.name} outside the {n} declared coordinates")
        stack.extend(node.children())


def share_subexpressions(roots):
    """Rebuild ``roots`` so structurally equal subtrees are one shared node.

    The evaluators memoize by node identity, so sharing turns repeated
    subformulas (a conformal factor written in every component, say) into a
    single evaluation.
    """
    table = {}
    done = {}

    def key_of(node, kids):
        if isinstance(node, Const):
            return ("c", node.value)
        if isinstance(node, Var):
            return ("v", node.index)
        if isinstance(node, Pow):
            return ("p", node.exponent) + kids
        if isinstance(node, Func):
            return ("f", node.name) + kids
        return (type(node).__name__,) + kids

    def rebuild(node):
        if id(node) in done:
            return done[id(node)]
        new_kids = [rebuild(c) for c in node.children()]
        key = key_of(node, tuple(id(c) for c in new_kids))
        if key not in table:
            if isinstance(node, (Const, Var)):
                table[key] = node
            elif isinstance(node, Pow):
                table[key] = Pow(new_kids[0], node.exponent)
            elif isinstance(node, Func):
                table[key] = Func(node.name, new_kids[0])
            elif isinstance(node, Neg):
                table[key] = Neg(new_kids[0])
            else:
                table[key] = type(node)(*new_kids)
        done[id(node)] = table[key]
        return table[key]

    return [rebuild(r) for r in roots]


def parse(text, coords, constants=None):
    """Parse ``text`` into an :class:`Expression` over ``coords``.

    ``constants`` maps extra names (chart parameters such as a mass) to numbers.
    Raises :class:`ParseError` (with position) or :class:`UnknownIdentifierError`.
    """
    coords = tuple(coords)
    if len(set(coords)) != len(coords):
        raise ValueError("duplicate coordinate names")
    clash = set(coords) & set(FUNCTIONS)
    if clash:
        raise ValueError(f"coordinate names collide with functions: {sorted(clash)}")
    root = _Parser(text, coords, constants).parse()
    return Expression(root, coords, text)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


class _FloatAlgebra:
    def __init__(self, point):
        self.point = point

    def var(self, i):
        return self.point[..., i]

    def shift(self, a, c):
        return a + c

    def scale(self, a, c):
        return a * c

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def recip(self, a, node):
        if np.any(a == 0.0):
            raise DomainError("division by zero", node)
        return 1.0 / a

    def func(self, name, a, node):
        if name == "log" and np.any(a <= 0.0):
            raise DomainError("log of non-positive value", node)
        if name == "sqrt" and np.any(a < 0.0):
            raise DomainError("sqrt of negative value", node)
        return getattr(np, name)(a)


class _DualAlgebra:
    """First-order forward mode: values are ``(value, gradient)`` pairs."""

    def __init__(self, point):
        self.point = point
        self.n = point.shape[-1]

    def var(self, i):
        grad = np.zeros(self.point.shape)
        grad[..., i] = 1.0
        return (self.point[..., i], grad)

    def shift(self, a, c):
        return (a[0] + c, a[1])

    def scale(self, a, c):
        return (a[0] * c, a[1] * c)

    def add(self, a, b):
        return (a[0] + b[0], a[1] + b[1])

    def sub(self, a, b):
        return (a[0] - b[0], a[1] - b[1])

    def neg(self, a):
        return (-a[0], -a[1])

    def mul(self, a, b):
        return (a[0] * b[0], _bc(a[0]) * b[1] + _bc(b[0]) * a[1])

    def recip(self, a, node):
        v = a[0]
        if np.any(v == 0.0):
            raise DomainError("division by zero", node)
        inv = 1.0 / v
        return (inv, -_bc(inv * inv) * a[1])

    def func(self, name, a, node):
        v = a[0]
        _check_domain(name, v, node)
        f = getattr(np, name)(v)
        if name == "exp":
            d = f
        elif name == "log":
            d = 1.0 / v
        elif name == "sqrt":
            d = 0.5 / f
        elif name == "sin":
            d = np.cos(v)
        elif name == "cos":
            d = -np.sin(v)
        elif name == "sinh":
            d = np.cosh(v)
        else:
            d = np.sinh(v)
        return (f, _bc(d) * a[1])


def _bc(x):
    return x[..., None] if np.ndim(x) else x


class _JetAlgebra:
    def __init__(self, point, k):
        self.point = point
        self.n = point.shape[-1]
        self.k = k

    def var(self, i):
        return taylor.variable_jet(self.point, i, self.n, self.k)

    def shift(self, a, c):
        out = a.copy()
        out[..., 0] += c
        return out

    def scale(self, a, c):
        return a * c

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return taylor.jet_mul(a, b, self.n, self.k)

    def recip(self, a, node):
        return taylor.jet_reciprocal(a, self.n, self.k, where=node)

    def func(self, name, a, node):
        base = a[..., 0]
        _check_domain(name, base, node, strict_sqrt=self.k > 0)
        coeffs = taylor.series_coefficients(name, base, self.k)
        return taylor.jet_compose(a, coeffs, self.n, self.k)


def _check_domain(name, v, node, strict_sqrt=True):
    if name == "log" and np.any(v <= 0.0):
        raise DomainError("log of non-positive value", node)
    if name == "sqrt" and (np.any(v <= 0.0) if strict_sqrt else np.any(v < 0.0)):
        raise DomainError("sqrt of non-positive value", node)


def _run(roots, alg):
    memo = {}

    def visit(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Const):
            out = node.value
        elif isinstance(node, Var):
            out = alg.var(node.index)
        elif isinstance(node, Neg):
            a = visit(node.arg)
            out = -a if isinstance(a, float) else alg.neg(a)
        elif isinstance(node, (Add, Sub)):
            a, b = visit(node.left), visit(node.right)
            sign = 1.0 if isinstance(node, Add) else -1.0
            if isinstance(a, float) and isinstance(b, float):
                out = a + sign * b
            elif isinstance(b, float):
                out = alg.shift(a, sign * b)
            elif isinstance(a, float):
                out = alg.shift(b if sign > 0 else alg.neg(b), a)
            else:
                out = alg.add(a, b) if sign > 0 else alg.sub(a, b)
        elif isinstance(node, Mul):
            a, b = visit(node.left), visit(node.right)
            if isinstance(a, float) and isinstance(b, float):
                out = a * b
            elif isinstance(b, float):
                out = alg.scale(a, b)
            elif isinstance(a, float):
                out = alg.scale(b, a)
            else:
                out = alg.mul(a, b)
        elif isinstance(node, Div):
            a, b = visit(node.left), visit(node.right)
            if isinstance(b, float):
                if b == 0.0:
                    raise DomainError("division by zero", node)
                out = a / b if isinstance(a, float) else alg.scale(a, 1.0 / b)
            else:
                inv = alg.recip(b, node)
                out = alg.scale(inv, a) if isinstance(a, float) else alg.mul(a, inv)
        elif isinstance(node, Pow):
            a = visit(node.base)
            out = _power(alg, a, node.exponent, node)
        elif isinstance(node, Func):
            a = visit(node.arg)
            if isinstance(a, float):
                try:
                    out = _FLOAT_FUNCS[node.name](a)
                except ValueError as exc:
                    raise DomainError(str(exc), node) from None
            else:
                out = alg.func(node.name, a, node)
        else:  # pragma: no cover - closed set of node kinds
            raise TypeError(f"unknown node {node!r}")
        memo[key] = out
        return out

    return [visit(r) for r in roots]


def _power(alg, a, p, node):
    if isinstance(a, float):
        if a == 0.0 and p < 0:
            raise DomainError("division by zero", node)
        return a**p
    if p < 0:
        a = alg.recip(a, node)
        p = -p
    result = None
    square = a
    while p:
        if p & 1:
            result = square if result is None else alg.mul(result, square)
        p >>= 1
        if p:
            square = alg.mul(square, square)
    return 1.0 if result is None else result


def _as_points(point, n):
    point = np.asarray(point, dtype=float)
    if point.shape[-1:] != (n,):
        raise ValueError(f"point must have trailing dimension {n}, got shape {point.shape}")
    return point


def _broadcast_value(value, batch_shape, alg_kind, n=None, k=None):
    # constants come back as python floats; give them the algebra's shape
    if alg_kind == "float":
        return np.full(batch_shape, value) if not isinstance(value, np.ndarray) else value
    if alg_kind == "dual":
        if isinstance(value, tuple):
            v, g = value
            return np.broadcast_to(v, batch_shape).copy(), np.broadcast_to(g, batch_shape + (n,)).copy()
        return np.full(batch_shape, value), np.zeros(batch_shape + (n,))
    if isinstance(value, np.ndarray):
        return value
    out = np.zeros(batch_shape + (taylor.num_coefficients(n, k),))
    out[..., 0] = value
    return out


def evaluate(e, point):
    """Value of ``e`` at ``point`` (shape ``(n,)`` or a batch ``(..., n)``)."""
    pts = _as_points(point, e.n)
    (val,) = _run([e.root], _FloatAlgebra(pts))
    val = _broadcast_value(val, pts.shape[:-1], "float")
    return float(val) if pts.ndim == 1 else val


def evaluate_many(exprs, point, mode="float", k=None):
    """Evaluate several expressions sharing common subexpressions in one pass.

    ``mode`` is ``"float"``, ``"dual"`` (value and gradient) or ``"jet"``
    (coefficient arrays of order ``k``).
    """
    exprs = list(exprs)
    n = exprs[0].n
    pts = _as_points(point, n)
    batch = pts.shape[:-1]
    if mode == "float":
        alg = _FloatAlgebra(pts)
    elif mode == "dual":
        alg = _DualAlgebra(pts)
    elif mode == "jet":
        alg = _JetAlgebra(pts, int(k))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    values = _run([e.root for e in exprs], alg)
    return [_broadcast_value(v, batch, mode, n, k) for v in values]


def evaluate_jet(e, point, k):
    """Taylor jet of order ``k`` of ``e`` at ``point``.

    Coefficients are propagated through the AST in truncated Taylor
    arithmetic; there is no numerical differencing anywhere.
    """
    if k < 0:
        raise ValueError("jet order must be non-negative")
    pts = _as_points(point, e.n)
    if pts.ndim != 1:
        raise ValueError("evaluate_jet takes a single point; use evaluate_many for batches")
    (coeffs,) = evaluate_many([e], pts, mode="jet", k=k)
    return taylor.TaylorJet(pts, k, coeffs)


# ---------------------------------------------------------------------------
# Straight-line compilation (float and dual modes)
# ---------------------------------------------------------------------------

_DERIVATIVE = {
    "exp": "{v}",
    "log": "1.0 / {a}",
    "sqrt": "0.5 / {v}",
    "sin": "np.cos({a})",
    "cos": "-np.sin({a})",
    "sinh": "np.cosh({a})",
    "cosh": "np.sinh({a})",
}


def _check_zero(v, node):
    if np.any(v == 0.0):
        raise DomainError("division by zero", node)


def _order(roots):
    # post-order over the DAG, each shared node once
    seen, order = set(), []
    stack = [(r, False) for r in reversed(roots)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded:
            seen.add(id(node))
            order.append(node)
            continue
        stack.append((node, True))
        stack.extend((c, False) for c in reversed(node.children()) if id(c) not in seen)
    return order


class CompiledExpressions:
    """Several expressions compiled into one numpy function.

    Calling it returns what :func:`evaluate_many` returns in the same mode:
    value arrays of the batch shape, or ``(value, gradient)`` pairs with the
    gradient axis last.  Subtrees without variables are folded to constants.
    """

    def __init__(self, exprs, mode="float"):
        if mode not in ("float", "dual"):
            raise ValueError("only 'float' and 'dual' modes are compiled")
        exprs = list(exprs)
        self.n = exprs[0].n
        self.mode = mode
        self._build([e.root for e in exprs])

    def _build(self, roots):
        dual = self.mode == "dual"
        names, consts, nodes, lines = {}, {}, [], []
        for node in _order(roots):
            kids = node.children()
            if all(id(c) in consts for c in kids) and not isinstance(node, Var):
                (consts[id(node)],) = _run([node], _FloatAlgebra(np.zeros(self.n)))
                continue
            i = len(names)
            names[id(node)] = i
            nodes.append(node)
            v, d = f"v{i}", f"d{i}"

            def val(c):
                return repr(float(consts[id(c)])) if id(c) in consts else f"v{names[id(c)]}"

            def grad(c):
                return None if id(c) in consts else f"d{names[id(c)]}"

            if isinstance(node, Var):
                lines.append(f"{v} = x[..., {node.index}]")
                if dual:
                    lines.append(f"{d} = e[{node.index}]")
            elif isinstance(node, Neg):
                lines.append(f"{v} = -{val(node.arg)}")
                if dual:
                    lines.append(f"{d} = -{grad(node.arg)}")
            elif isinstance(node, (Add, Sub)):
                op = "+" if isinstance(node, Add) else "-"
                a, b = node.left, node.right
                lines.append(f"{v} = {val(a)} {op} {val(b)}")
                if dual:
                    ga, gb = grad(a), grad(b)
                    if ga is None:
                        lines.append(f"{d} = {op}{gb}" if op == "-" else f"{d} = {gb}")
                    elif gb is None:
                        lines.append(f"{d} = {ga}")
                    else:
                        lines.append(f"{d} = {ga} {op} {gb}")
            elif isinstance(node, Mul):
                a, b = node.left, node.right
                lines.append(f"{v} = {val(a)} * {val(b)}")
                if dual:
                    ga, gb = grad(a), grad(b)
                    terms = [f"{val(a)} * {gb}" if gb else None, f"{val(b)} * {ga}" if ga else None]
                    lines.append(f"{d} = " + " + ".join(t for t in terms if t))
            elif isinstance(node, Div):
                a, b = node.left, node.right
                if id(b) in consts:
                    if consts[id(b)] == 0.0:
                        raise DomainError("division by zero", node)
                    lines.append(f"{v} = {val(a)} / {val(b)}")
                    if dual:
                        lines.append(f"{d} = {grad(a)} / {val(b)}")
                else:
                    lines.append(f"_check_zero({val(b)}, nodes[{i}])")
                    lines.append(f"{v} = {val(a)} / {val(b)}")
                    if dual:
                        ga = grad(a)
                        num = f"{ga} - {v} * {grad(b)}" if ga else f"-{v} * {grad(b)}"
                        lines.append(f"{d} = ({num}) / {val(b)}")
            elif isinstance(node, Pow):
                a, p = node.base, node.exponent
                if p < 0:
                    lines.append(f"_check_zero({val(a)}, nodes[{i}])")
                    lines.append(f"{v} = 1.0 / {val(a)} ** {-p}")
                else:
                    lines.append(f"{v} = {val(a)} ** {p}")
                if dual:
                    lines.append(f"{d} = ({float(p)!r} * {val(a)} ** {p - 1}) * {grad(node.base)}"
                                 if p not in (0, 1) else (f"{d} = {grad(a)}" if p == 1 else f"{d} = 0.0 * {grad(a)}"))
            elif isinstance(node, Func):
                a = val(node.arg)
                lines.append(f"_check_domain({node.name!r}, {a}, nodes[{i}])")
                lines.append(f"{v} = np.{node.name}({a})")
                if dual:
                    lines.append(f"{d} = ({_DERIVATIVE[node.name].format(v=v, a=a)}) * {grad(node.arg)}")
            else:  # pragma: no cover - closed set of node kinds
                raise TypeError(f"unknown node {node!r}")

        outs = []
        for j, r in enumerate(roots):
            if id(r) in consts:
                outs.append(f"V[{j}] = {float(consts[id(r)])!r}")
            else:
                outs.append(f"V[{j}] = v{names[id(r)]}")
                if dual:
                    outs.append(f"G[{j}] = d{names[id(r)]}")
        head = ["def _compiled(x, V, G, nodes):"]
        if dual:
            head.append(f"    e = np.eye({self.n}).reshape(({self.n}, {self.n}) + (1,) * (x.ndim - 1))")
        body = head + ["    " + ln for ln in lines + outs]
        self.source = "\n".join(body)
        namespace = {"np": np, "_check_zero": _check_zero, "_check_domain": _check_domain}
        exec(compile(self.source, "<genericlab compiled expressions>", "exec"), namespace)
        self._fn = namespace["_compiled"]
        self._nodes = nodes
        self.count = len(roots)

    def stacked(self, point):
        """Values ``(m, *batch)`` and, in dual mode, gradients ``(m, n, *batch)``."""
        pts = _as_points(point, self.n)
        batch = pts.shape[:-1]
        V = np.empty((self.count,) + batch)
        G = np.zeros((self.count, self.n) + batch) if self.mode == "dual" else None
        self._fn(pts, V, G, self._nodes)
        return V, G

    def __call__(self, point):
        V, G = self.stacked(point)
        if self.mode == "float":
            return list(V)
        return [(V[j], np.moveaxis(G[j], 0, -1)) for j in range(self.count)]


def compile_expressions(exprs, mode="float"):
    """Compile expressions over the same coordinates into a :class:`CompiledExpressions`."""
    return CompiledExpressions(exprs, mode)
