"""Symbolic scalar expressions over named coordinates.

Expressions are immutable trees (``Constant``, ``Variable``, ``Sum``,
``Product``, ``Power``, ``Exp``, ``Sin``, ``Cos``, ``Neg``).  Every tree has a
canonical form: an expanded sum of monomials, each monomial a coefficient times
sorted integer powers of variables and ``sin``/``cos`` atoms, times a single
merged ``exp`` factor.  Zero testing is exact inside that class and
conservative outside it (a negative power of a multi-term sum is kept as an
opaque atom).

Rational coefficients are exact (``fractions.Fraction``); floating point
coefficients are treated as zero below ``FLOAT_TOL``.
"""

from __future__ import annotations

import ast
import math
from fractions import Fraction
from typing import Iterable, Mapping, Union

import numpy as np

FLOAT_TOL = 1e-12

Number = Union[int, float, Fraction]
Coeff = Union[Fraction, float]


class ExprError(Exception):
    pass


class UndeclaredVariableError(ExprError):
    pass


class MissingAssignmentError(ExprError, KeyError):
    pass


class DomainError(ExprError, ArithmeticError):
    pass


class ParseError(ExprError, ValueError):
    pass


def _coeff(x: Number) -> Coeff:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        return float(x)
    raise TypeError(f"not a numeric coefficient: {x!r}")


def _is_zero_coeff(c: Coeff) -> bool:
    if isinstance(c, Fraction):
        return c == 0
    return abs(c) <= FLOAT_TOL


def _fmt_coeff(c: Coeff) -> str:
    if isinstance(c, Fraction):
        n, d = c.numerator, c.denominator
        if d == 1:
            return str(n)
        k = next((k for k in range(3, 25) if 10 ** k % d == 0), None)
        if d > 100 and k is not None:
            digits = str(abs(n) * (10 ** k // d)).rjust(k + 1, "0")
            text = f"{digits[:-k]}.{digits[-k:]}".rstrip("0")
            return f"-{text}" if n < 0 else text
        return f"{n}/{d}"
    return repr(c)


# ---------------------------------------------------------------------------
# canonical polynomial representation
#
# Mono = (factors, exparg): factors is a sorted tuple of (atom, exponent) with
# nonzero integer exponents; atom is ("v", name) | ("sin", Poly) | ("cos", Poly)
# | ("pow", Poly).  exparg is the merged exponent Poly or None.


def _atom_key(atom):
    kind, payload = atom
    if kind == "v":
        return (0, payload)
    order = {"sin": 1, "cos": 2, "pow": 3}[kind]
    return (order, payload.key)


def _mono_key(mono) -> str:
    factors, exparg = mono
    parts = []
    for atom, k in factors:
        parts.append(_fmt_atom(atom, k))
    if exparg is not None:
        parts.append(f"exp({exparg.key})")
    return "*".join(parts)


def _fmt_atom(atom, k: int) -> str:
    kind, payload = atom
    if kind == "v":
        base = payload
    elif kind == "pow":
        base = f"({payload.key})"
    else:
        base = f"{kind}({payload.key})"
    if k == 1:
        return base
    if k < 0:
        return f"{base}^({k})"
    return f"{base}^{k}"


def _merge_factors(fa, fb):
    if not fa:
        return fb
    if not fb:
        return fa
    d = dict(fa)
    for atom, k in fb:
        n = d.get(atom, 0) + k
        if n == 0:
            d.pop(atom, None)
        else:
            d[atom] = n
    return tuple(sorted(d.items(), key=lambda it: _atom_key(it[0])))


def _mono_mul(a, b):
    fa, ea = a
    fb, eb = b
    if ea is None:
        e = eb
    elif eb is None:
        e = ea
    else:
        e = (ea + eb).as_arg()
        if e.is_zero():
            e = None
    return (_merge_factors(fa, fb), e)


_ONE_MONO = ((), None)


class Poly:
    """Canonical expanded form; immutable and hashable."""

    __slots__ = ("terms", "_hash", "_key", "_vars")

    def __init__(self, terms: Mapping | None = None):
        self.terms = dict(terms) if terms else {}
        self._hash = None
        self._key = None
        self._vars = None

    # construction -------------------------------------------------------
    @staticmethod
    def const(c: Number) -> "Poly":
        c = _coeff(c)
        return Poly() if _is_zero_coeff(c) else Poly({_ONE_MONO: c})

    @staticmethod
    def var(name: str) -> "Poly":
        return Poly({(((("v", name), 1),), None): Fraction(1)})

    @staticmethod
    def atom(kind: str, arg: "Poly") -> "Poly":
        return Poly({((((kind, arg.as_arg()), 1),), None): Fraction(1)})

    @staticmethod
    def exp(arg: "Poly") -> "Poly":
        arg = arg.as_arg()
        if arg.is_zero():
            return Poly.const(1)
        return Poly({((), arg): Fraction(1)})

    def as_arg(self) -> "Poly":
        # float coefficients become their shortest-decimal rational so that
        # printed-and-reparsed arguments hash equal to the originals
        if all(isinstance(c, Fraction) for c in self.terms.values()):
            return self
        out = {}
        for m, c in self.terms.items():
            if isinstance(c, float):
                if abs(c) <= FLOAT_TOL:
                    continue
                c = Fraction(repr(c))
            out[m] = c
        return Poly(out)

    # protocol -----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    @property
    def key(self) -> str:
        if self._key is None:
            parts = []
            for m in sorted(self.terms, key=_mono_key):
                c = self.terms[m]
                mk = _mono_key(m)
                parts.append(f"{_fmt_coeff(c)}*{mk}" if mk else _fmt_coeff(c))
            self._key = " + ".join(parts) if parts else "0"
        return self._key

    def __repr__(self):
        return f"Poly({self.key})"

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda it: _mono_key(it[0]))

    def constant_value(self) -> Coeff | None:
        if not self.terms:
            return Fraction(0)
        if len(self.terms) == 1 and _ONE_MONO in self.terms:
            return self.terms[_ONE_MONO]
        return None

    def free_vars(self) -> frozenset:
        if self._vars is None:
            names = set()
            for (factors, exparg) in self.terms:
                for (kind, payload), _ in factors:
                    if kind == "v":
                        names.add(payload)
                    else:
                        names |= payload.free_vars()
                if exparg is not None:
                    names |= exparg.free_vars()
            self._vars = frozenset(names)
        return self._vars

    # arithmetic ---------------------------------------------------------
    def __add__(self, other: "Poly") -> "Poly":
        if not other.terms:
            return self
        if not self.terms:
            return other
        out = dict(self.terms)
        for m, c in other.terms.items():
            if m in out:
                n = out[m] + c
                if _is_zero_coeff(n):
                    del out[m]
                else:
                    out[m] = n
            else:
                out[m] = c
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def scale(self, c: Number) -> "Poly":
        c = _coeff(c)
        if _is_zero_coeff(c):
            return Poly()
        out = {}
        for m, v in self.terms.items():
            n = v * c
            if not _is_zero_coeff(n):
                out[m] = n
        return Poly(out)

    def __mul__(self, other: "Poly") -> "Poly":
        if not self.terms or not other.terms:
            return Poly()
        out: dict = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                m = _mono_mul(ma, mb)
                out[m] = out.get(m, 0) + ca * cb
        return Poly({m: c for m, c in out.items() if not _is_zero_coeff(c)})

    def pow(self, k: int) -> "Poly":
        if not isinstance(k, (int, np.integer)):
            raise ExprError(f"only integer exponents are supported, got {k!r}")
        k = int(k)
        if k == 0:
            return Poly.const(1)
        if k > 0:
            result, base = Poly.const(1), self
            while k:
                if k & 1:
                    result = result * base
                k >>= 1
                if k:
                    base = base * base
            return result
        if not self.terms:
            raise DomainError("zero raised to a negative power")
        if len(self.terms) == 1:
            (factors, exparg), c = next(iter(self.terms.items()))
            inv_c = Fraction(1) / c if isinstance(c, Fraction) else 1.0 / c
            inv = Poly({(tuple((a, -e) for a, e in factors),
                         None if exparg is None else (-exparg).as_arg()): inv_c})
            return inv.pow(-k)
        # opaque atom; pull the leading coefficient out so c*P and P share a key
        lead_m = sorted(self.terms, key=_mono_key)[0]
        lead = self.terms[lead_m]
        base = self.scale(Fraction(1) / lead if isinstance(lead, Fraction) else 1.0 / lead)
        atom = (("pow", base.as_arg()), k)
        scale = (Fraction(1) / lead) ** (-k) if isinstance(lead, Fraction) else lead ** k
        return Poly({((atom,), None): scale})

    # calculus -----------------------------------------------------------
    def diff(self, v: str) -> "Poly":
        if v not in self.free_vars():
            return Poly()
        total = Poly()
        for mono, c in self.terms.items():
            factors, exparg = mono
            if exparg is not None:
                de = exparg.diff(v)
                if de.terms:
                    total = total + Poly({mono: c}) * de
            for idx, (atom, k) in enumerate(factors):
                kind, payload = atom
                rest = list(factors)
                if k - 1 == 0:
                    del rest[idx]
                else:
                    rest[idx] = (atom, k - 1)
                lowered = Poly({(tuple(rest), exparg): c * k})
                if kind == "v":
                    if payload == v:
                        total = total + lowered
                    continue
                dinner = payload.diff(v)
                if not dinner.terms:
                    continue
                if kind == "sin":
                    chain = Poly.atom("cos", payload) * dinner
                elif kind == "cos":
                    chain = -(Poly.atom("sin", payload) * dinner)
                else:
                    chain = dinner
                total = total + lowered * chain
        return total

    def subs(self, mapping: Mapping[str, "Poly"]) -> "Poly":
        if not (self.free_vars() & mapping.keys()):
            return self
        total = Poly()
        for (factors, exparg), c in self.terms.items():
            term = Poly({_ONE_MONO: c})
            for (kind, payload), k in factors:
                if kind == "v":
                    base = mapping.get(payload)
                    if base is None:
                        base = Poly.var(payload)
                    term = term * base.pow(k)
                elif kind == "pow":
                    term = term * payload.subs(mapping).pow(k)
                else:
                    term = term * Poly.atom(kind, payload.subs(mapping)).pow(k)
            if exparg is not None:
                term = term * Poly.exp(exparg.subs(mapping))
            total = total + term
        return total

    def eval(self, point: Mapping[str, object]):
        total = 0.0
        for (factors, exparg), c in self.terms.items():
            val = float(c)
            for (kind, payload), k in factors:
                if kind == "v":
                    try:
                        x = point[payload]
                    except KeyError:
                        raise MissingAssignmentError(payload) from None
                elif kind == "sin":
                    x = np.sin(payload.eval(point))
                elif kind == "cos":
                    x = np.cos(payload.eval(point))
                else:
                    x = payload.eval(point)
                if k < 0 and np.any(np.asarray(x) == 0):
                    raise DomainError(f"division by zero in {_fmt_atom((kind, payload), k)}")
                val = val * (np.asarray(x, dtype=float) ** k if isinstance(x, np.ndarray) else float(x) ** k)
            if exparg is not None:
                val = val * np.exp(exparg.eval(point))
            total = total + val
        if isinstance(total, np.ndarray):
            return total
        return float(total)

    def split_by(self, names: Iterable[str]) -> tuple["Poly", "Poly"]:
        """Split into (terms free of ``names``, terms depending on ``names``)."""
        names = set(names)
        free, dep = {}, {}
        for m, c in self.terms.items():
            target = dep if Poly({m: c}).free_vars() & names else free
            target[m] = c
        return Poly(free), Poly(dep)


# ---------------------------------------------------------------------------
# expression trees


class Expr:
    """Immutable symbolic scalar expression."""

    __slots__ = ("_poly",)

    def __init__(self):
        self._poly = None

    def poly(self) -> Poly:
        if self._poly is None:
            self._poly = self._build()
        return self._poly

    def _build(self) -> Poly:  # pragma: no cover - abstract
        raise NotImplementedError

    # arithmetic builds trees; canonicalization is lazy
    def __add__(self, other):
        return Sum((self, as_expr(other)))

    def __radd__(self, other):
        return Sum((as_expr(other), self))

    def __sub__(self, other):
        return Sum((self, Neg(as_expr(other))))

    def __rsub__(self, other):
        return Sum((as_expr(other), Neg(self)))

    def __mul__(self, other):
        return Product((self, as_expr(other)))

    def __rmul__(self, other):
        return Product((as_expr(other), self))

    def __truediv__(self, other):
        return Product((self, Power(as_expr(other), -1)))

    def __rtruediv__(self, other):
        return Product((as_expr(other), Power(self, -1)))

    def __pow__(self, k):
        return Power(self, k)

    def __neg__(self):
        return Neg(self)

    def __pos__(self):
        return self

    # equality is equality of canonical forms
    def __eq__(self, other):
        if isinstance(other, (int, float, Fraction)):
            other = Constant(other)
        if not isinstance(other, Expr):
            return NotImplemented
        return self.poly() == other.poly()

    def __hash__(self):
        return hash(self.poly())

    def __repr__(self):
        return f"{type(self).__name__}({self})"

    def diff(self, v: str, declared=None) -> "Expr":
        return diff(self, v, declared)

    def eval(self, point: Mapping[str, object]):
        return evaluate(self, point)

    def subs(self, mapping: Mapping[str, object]) -> "Expr":
        return subs(self, mapping)

    def is_zero(self) -> bool:
        return self.poly().is_zero()

    def free_variables(self) -> frozenset:
        return self.poly().free_vars()


def _wrap(s: str, node: Expr) -> str:
    return f"({s})" if isinstance(node, (Sum, Neg)) or (isinstance(node, Constant) and node.value < 0) else s


class Constant(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Number):
        super().__init__()
        self.value = _coeff(value)

    def _build(self):
        return Poly.const(self.value)

    def __str__(self):
        return _fmt_coeff(self.value)


class Variable(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        super().__init__()
        if not name.isidentifier():
            raise ExprError(f"invalid variable name {name!r}")
        self.name = name

    def _build(self):
        return Poly.var(self.name)

    def __str__(self):
        return self.name


class Sum(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms):
        super().__init__()
        self.terms = tuple(terms)

    def _build(self):
        total = Poly()
        for t in self.terms:
            total = total + t.poly()
        return total

    def __str__(self):
        if not self.terms:
            return "0"
        out = str(self.terms[0])
        for t in self.terms[1:]:
            if isinstance(t, Neg):
                out += f" - {_wrap(str(t.arg), t.arg)}"
            else:
                out += f" + {t}"
        return out


class Product(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors):
        super().__init__()
        self.factors = tuple(factors)

    def _build(self):
        total = Poly.const(1)
        for f in self.factors:
            total = total * f.poly()
        return total

    def __str__(self):
        if not self.factors:
            return "1"
        return "*".join(_wrap(str(f), f) for f in self.factors)


class Power(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: int):
        super().__init__()
        if isinstance(exponent, float) and exponent.is_integer():
            exponent = int(exponent)
        if not isinstance(exponent, (int, np.integer)):
            raise ExprError(f"only integer exponents are supported, got {exponent!r}")
        self.base = as_expr(base)
        self.exponent = int(exponent)

    def _build(self):
        return self.base.poly().pow(self.exponent)

    def __str__(self):
        b = str(self.base)
        if not isinstance(self.base, (Variable, Exp, Sin, Cos)):
            b = f"({b})"
        return f"{b}^{self.exponent}" if self.exponent >= 0 else f"{b}^({self.exponent})"


class _Unary(Expr):
    __slots__ = ("arg",)
    fname = ""

    def __init__(self, arg: Expr):
        super().__init__()
        self.arg = as_expr(arg)

    def __str__(self):
        return f"{self.fname}({self.arg})"


class Exp(_Unary):
    __slots__ = ()
    fname = "exp"

    def _build(self):
        return Poly.exp(self.arg.poly())


class Sin(_Unary):
    __slots__ = ()
    fname = "sin"

    def _build(self):
        a = self.arg.poly()
        return Poly() if a.is_zero() else Poly.atom("sin", a)


class Cos(_Unary):
    __slots__ = ()
    fname = "cos"

    def _build(self):
        a = self.arg.poly()
        return Poly.const(1) if a.is_zero() else Poly.atom("cos", a)


class Neg(_Unary):
    __slots__ = ()

    def _build(self):
        return -self.arg.poly()

    def __str__(self):
        return f"-{_wrap(str(self.arg), self.arg)}"


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return parse(x)
    return Constant(x)


def var(name: str) -> Variable:
    return Variable(name)


def variables(names: str | Iterable[str]) -> tuple[Variable, ...]:
    if isinstance(names, str):
        names = names.replace(",", " ").split()
    return tuple(Variable(n) for n in names)


def exp(e) -> Exp:
    return Exp(as_expr(e))


def sin(e) -> Sin:
    return Sin(as_expr(e))


def cos(e) -> Cos:
    return Cos(as_expr(e))


ZERO = Constant(0)
ONE = Constant(1)


# ---------------------------------------------------------------------------
# canonical trees


def from_poly(p: Poly) -> Expr:
    """Build the canonical tree of ``p``; the tree carries ``p`` as its cache."""
    terms = []
    for (factors, exparg), c in p.sorted_terms():
        fs: list[Expr] = []
        for (kind, payload), k in factors:
            if kind == "v":
                base: Expr = Variable(payload)
            elif kind == "pow":
                base = from_poly(payload)
            else:
                base = (Sin if kind == "sin" else Cos)(from_poly(payload))
            fs.append(base if k == 1 else Power(base, k))
        if exparg is not None:
            fs.append(Exp(from_poly(exparg)))
        neg = (c < 0)
        mag = -c if neg else c
        if not fs:
            node: Expr = Constant(mag)
        elif mag == 1:
            node = fs[0] if len(fs) == 1 else Product(fs)
        else:
            node = Product([Constant(mag)] + fs)
        terms.append(Neg(node) if neg else node)
    if not terms:
        out: Expr = Constant(0)
    elif len(terms) == 1:
        out = terms[0]
    else:
        out = Sum(terms)
    out._poly = p
    return out


def canonical(e) -> Expr:
    return from_poly(as_expr(e).poly())


def diff(e, v: str, declared: Iterable[str] | None = None) -> Expr:
    """Exact partial derivative of ``e`` with respect to ``v``, canonicalized."""
    if declared is not None and v not in set(declared):
        raise UndeclaredVariableError(f"{v!r} is not a declared chart variable")
    return from_poly(as_expr(e).poly().diff(v))


def evaluate(e, point: Mapping[str, object]):
    """Numeric value of ``e``; point values may be floats or numpy arrays."""
    return as_expr(e).poly().eval(point)


def is_zero(e) -> bool:
    return as_expr(e).poly().is_zero()


def subs(e, mapping: Mapping[str, object]) -> Expr:
    polys = {k: as_expr(v).poly() for k, v in mapping.items()}
    return from_poly(as_expr(e).poly().subs(polys))


def free_variables(e) -> frozenset:
    return as_expr(e).poly().free_vars()


def lambdify(e, names: Iterable[str] | None = None):
    """Return ``f(**values)`` evaluating ``e``; accepts arrays."""
    p = as_expr(e).poly()
    needed = p.free_vars()

    def f(point: Mapping[str, object]):
        if not needed:
            const = p.eval({})
            shapes = [np.shape(v) for v in point.values() if np.ndim(v)]
            return np.full(shapes[0], const) if shapes else const
        return p.eval(point)

    return f


# ---------------------------------------------------------------------------
# parsing

_FUNCS = {"exp": Exp, "sin": Sin, "cos": Cos}
_CONSTS = {"pi": math.pi, "e_const": math.e}


def parse(text: str) -> Expr:
    """Parse infix text such as ``0.5*p^2`` or ``c*exp(0.5*t)``.

    ``^`` and ``**`` both denote integer powers.  Decimal literals become
    exact rationals.
    """
    if not isinstance(text, str):
        raise ParseError(f"expected text, got {type(text).__name__}")
    src = text.replace("^", "**").strip()
    if not src:
        raise ParseError("empty expression")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as err:
        raise ParseError(f"cannot parse {text!r}: {err.msg}") from None
    return _from_ast(tree.body, text)


def _literal(node, text):
    if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
        raise ParseError(f"unsupported literal {node.value!r} in {text!r}")
    if isinstance(node.value, int):
        return Constant(node.value)
    return Constant(Fraction(repr(node.value)))


def _int_exponent(node, text) -> int:
    e = _from_ast(node, text).poly().constant_value()
    if e is None or (isinstance(e, Fraction) and e.denominator != 1) or (
            isinstance(e, float) and not e.is_integer()):
        raise ParseError(f"exponent must be an integer constant in {text!r}")
    return int(e)


def _from_ast(node, text) -> Expr:
    if isinstance(node, ast.Constant):
        return _literal(node, text)
    if isinstance(node, ast.Name):
        if node.id in _CONSTS:
            return Constant(_CONSTS[node.id])
        return Variable(node.id)
    if isinstance(node, ast.UnaryOp):
        inner = _from_ast(node.operand, text)
        if isinstance(node.op, ast.USub):
            return Neg(inner)
        if isinstance(node.op, ast.UAdd):
            return inner
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            return Power(_from_ast(node.left, text), _int_exponent(node.right, text))
        left, right = _from_ast(node.left, text), _from_ast(node.right, text)
        if isinstance(node.op, ast.Add):
            return Sum((left, right))
        if isinstance(node.op, ast.Sub):
            return Sum((left, Neg(right)))
        if isinstance(node.op, ast.Mult):
            return Product((left, right))
        if isinstance(node.op, ast.Div):
            return Product((left, Power(right, -1)))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
        if len(node.args) != 1 or node.keywords:
            raise ParseError(f"{node.func.id} takes one argument in {text!r}")
        return _FUNCS[node.func.id](_from_ast(node.args[0], text))
    raise ParseError(f"unsupported syntax {ast.dump(node)[:40]!r} in {text!r}")
