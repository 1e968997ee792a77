"""Exterior algebra on a single coordinate chart.

A :class:`DifferentialForm` is a sparse map from strictly increasing index
tuples (into the chart's coordinate list) to symbolic coefficients.  Symbols
that are not chart coordinates are treated as constant parameters.

The Lichnerowicz differential is ``d - theta^``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .symexpr import Constant, Expr, Poly, as_expr, from_poly


class FormError(Exception):
    pass


class ChartMismatchError(FormError):
    pass


class DegreeError(FormError):
    pass


class ChartError(FormError):
    pass


def _poly(x) -> Poly:
    return as_expr(x).poly()


def _perm_sign(seq) -> int:
    """Sign of the permutation sorting ``seq`` (which has distinct entries)."""
    sign = 1
    seq = list(seq)
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


# ---------------------------------------------------------------------------
# charts

BUNDLE_KINDS = ("E", "J1*", "L2")


@dataclass(frozen=True)
class ChartSpec:
    """Adapted chart on E, J^1pi* or the multimomentum bundle (kind ``"L2"``).

    Coordinates are ordered base, fields, [``p``], momenta; momenta run
    base-index-major.  With one field the momentum conjugate to base
    coordinate ``t`` is named ``pt``; with several fields ``pt_u1`` etc.
    """

    m: int
    N: int
    kind: str = "J1*"
    base: tuple = None
    fields: tuple = None
    metric: tuple = None
    volume: Expr = None

    def __post_init__(self):
        if self.kind not in BUNDLE_KINDS:
            raise ChartError(f"unknown chart kind {self.kind!r}")
        if self.m < 1 or self.N < 1:
            raise ChartError("need m >= 1 and N >= 1")
        base = self.base
        if base is None:
            base = ("t",) if self.m == 1 else tuple(f"x{i}" for i in range(self.m))
        fields = self.fields
        if fields is None:
            fields = ("u",) if self.N == 1 else tuple(f"u{a + 1}" for a in range(self.N))
        base, fields = tuple(base), tuple(fields)
        if len(base) != self.m or len(fields) != self.N:
            raise ChartError("base/field name counts do not match m, N")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "fields", fields)

        metric = self.metric
        if metric is None:
            metric = tuple(tuple(Constant(1 if i == j else 0) for j in range(self.m))
                           for i in range(self.m))
        metric = tuple(tuple(as_expr(g) for g in row) for row in metric)
        if len(metric) != self.m or any(len(r) != self.m for r in metric):
            raise ChartError("metric must be m x m")
        for i in range(self.m):
            for j in range(i + 1, self.m):
                if metric[i][j] != metric[j][i]:
                    raise ChartError(f"metric not symmetric at ({i},{j})")
        object.__setattr__(self, "metric", metric)

        volume = self.volume
        if volume is None:
            volume = _constant_volume(metric)
        object.__setattr__(self, "volume", as_expr(volume))

        names = self.coords
        if len(set(names)) != len(names):
            raise ChartError(f"coordinate names collide: {names}")

    # naming
    def momentum(self, i: int, alpha: int) -> str:
        b = self.base[i]
        return f"p{b}" if self.N == 1 else f"p{b}_{self.fields[alpha]}"

    @property
    def momenta(self) -> tuple:
        return tuple(self.momentum(i, a) for i in range(self.m) for a in range(self.N))

    @property
    def coords(self) -> tuple:
        out = self.base + self.fields
        if self.kind == "L2":
            out = out + ("p",)
        if self.kind in ("J1*", "L2"):
            out = out + self.momenta
        return out

    def with_kind(self, kind: str) -> "ChartSpec":
        return ChartSpec(self.m, self.N, kind, self.base, self.fields, self.metric, self.volume)

    @property
    def ndim(self) -> int:
        return len(self.coords)

    def volume_form(self) -> "DifferentialForm":
        """``d_m x = dx^0 ^ ... ^ dx^{m-1}`` (coordinate volume)."""
        return DifferentialForm(self.coords, self.m, {tuple(range(self.m)): Poly.const(1)})

    def hook(self, i: int) -> "DifferentialForm":
        """``d/dx^i`` contracted into ``d_m x``."""
        idx = tuple(j for j in range(self.m) if j != i)
        return DifferentialForm(self.coords, self.m - 1, {idx: Poly.const((-1) ** i)})

    def __str__(self):
        return f"ChartSpec({self.kind}, m={self.m}, N={self.N}, coords={self.coords})"


def _constant_volume(metric) -> Expr:
    m = len(metric)
    vals = []
    for row in metric:
        r = []
        for g in row:
            c = g.poly().constant_value()
            if c is None:
                raise ChartError("non-constant metric needs an explicit volume factor")
            r.append(c)
        vals.append(r)
    det = _det(vals)
    det = abs(det)
    if det == 0:
        raise ChartError("degenerate metric")
    if isinstance(det, Fraction):
        n, d = math.isqrt(det.numerator), math.isqrt(det.denominator)
        if n * n == det.numerator and d * d == det.denominator:
            return Constant(Fraction(n, d))
    return Constant(math.sqrt(float(det)))


def _det(a):
    n = len(a)
    if n == 1:
        return a[0][0]
    return sum((-1) ** j * a[0][j] * _det([row[:j] + row[j + 1:] for row in a[1:]])
               for j in range(n))


def forms_bundle_coords(base: Sequence[str], k: int) -> tuple:
    """Coordinates on the bundle of k-forms over a chart with ``base`` names."""
    import itertools
    fibre = tuple("q_" + "".join(base[i] for i in I) for I in itertools.combinations(range(len(base)), k))
    return tuple(base) + fibre


def tautological_form(base: Sequence[str], k: int) -> "DifferentialForm":
    """Canonical k-form ``sum_I q_I dy^I`` on the bundle of k-forms."""
    import itertools
    coords = forms_bundle_coords(base, k)
    n = len(base)
    terms = {}
    for pos, I in enumerate(itertools.combinations(range(n), k)):
        terms[I] = Poly.var(coords[n + pos])
    return DifferentialForm(coords, k, terms)


def form_as_section(kappa: "DifferentialForm", base: Sequence[str]) -> "SectionMap":
    """The section of the k-form bundle determined by a k-form on the base."""
    import itertools
    base = tuple(base)
    if kappa.coords != base:
        raise ChartMismatchError("form must live on the base chart")
    k = kappa.degree
    coords = forms_bundle_coords(base, k)
    images = {}
    for pos, I in enumerate(itertools.combinations(range(len(base)), k)):
        images[coords[len(base) + pos]] = from_poly(kappa._terms.get(I, Poly()))
    return SectionMap(base, coords, images)


# ---------------------------------------------------------------------------
# vector fields


class VectorField:
    """Components ``name -> Expr`` on a chart; absent names are zero."""

    __slots__ = ("coords", "_comp")

    def __init__(self, coords: Sequence[str], components: Mapping[str, object]):
        self.coords = tuple(coords)
        comp = {}
        for name, val in components.items():
            if name not in self.coords:
                raise ChartMismatchError(f"{name!r} is not a coordinate of {self.coords}")
            p = _poly(val)
            if not p.is_zero():
                comp[name] = p
        self._comp = comp

    @classmethod
    def coordinate(cls, coords: Sequence[str], name: str) -> "VectorField":
        return cls(coords, {name: 1})

    def __getitem__(self, name: str) -> Expr:
        return from_poly(self._comp.get(name, Poly()))

    @property
    def components(self) -> dict:
        return {k: from_poly(v) for k, v in self._comp.items()}

    def __add__(self, other: "VectorField") -> "VectorField":
        _check_same(self.coords, other.coords)
        out = dict(self._comp)
        for k, v in other._comp.items():
            out[k] = out.get(k, Poly()) + v
        return VectorField(self.coords, {k: from_poly(v) for k, v in out.items()})

    def scale(self, f) -> "VectorField":
        fp = _poly(f)
        return VectorField(self.coords, {k: from_poly(v * fp) for k, v in self._comp.items()})

    def __repr__(self):
        inner = ", ".join(f"{k}: {from_poly(v)}" for k, v in self._comp.items())
        return f"VectorField({{{inner}}})"


def _check_same(a, b):
    if tuple(a) != tuple(b):
        raise ChartMismatchError(f"charts differ: {a} vs {b}")


# ---------------------------------------------------------------------------
# forms


class DifferentialForm:
    __slots__ = ("coords", "degree", "_terms")

    def __init__(self, coords: Sequence[str], degree: int, terms: Mapping | None = None):
        self.coords = tuple(coords)
        self.degree = int(degree)
        if self.degree < 0:
            raise DegreeError("negative degree")
        clean = {}
        n = len(self.coords)
        for idx, c in (terms or {}).items():
            p = c if isinstance(c, Poly) else _poly(c)
            if p.is_zero():
                continue
            idx = tuple(idx)
            if len(idx) != self.degree or any(b <= a for a, b in zip(idx, idx[1:])):
                raise DegreeError(f"basis {idx} is not a strictly increasing {self.degree}-subset")
            if idx and (idx[0] < 0 or idx[-1] >= n):
                raise DegreeError(f"basis {idx} out of range")
            clean[idx] = p
        self._terms = clean

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, coords, degree: int) -> "DifferentialForm":
        return cls(coords, degree)

    @classmethod
    def function(cls, coords, f) -> "DifferentialForm":
        return cls(coords, 0, {(): _poly(f)})

    @classmethod
    def d_coord(cls, coords, name: str) -> "DifferentialForm":
        coords = tuple(coords)
        return cls(coords, 1, {(coords.index(name),): Poly.const(1)})

    @classmethod
    def from_basis(cls, coords, terms: Mapping[tuple, object]) -> "DifferentialForm":
        """Build from ``{("t", "u"): coeff}``; basis names in any order."""
        coords = tuple(coords)
        out: dict = {}
        degree = None
        for names, c in terms.items():
            if isinstance(names, str):
                names = (names,)
            idx = [coords.index(n) for n in names]
            if len(set(idx)) != len(idx):
                continue
            degree = len(idx) if degree is None else degree
            if len(idx) != degree:
                raise DegreeError("mixed degrees in from_basis")
            key = tuple(sorted(idx))
            out[key] = out.get(key, Poly()) + _poly(c).scale(_perm_sign(idx))
        return cls(coords, degree or 0, out)

    # access -------------------------------------------------------------
    @property
    def terms(self) -> dict:
        return {k: from_poly(v) for k, v in self._terms.items()}

    def coefficient(self, *names: str) -> Expr:
        idx = [self.coords.index(n) for n in names]
        if len(set(idx)) != len(idx):
            return from_poly(Poly())
        key = tuple(sorted(idx))
        return from_poly(self._terms.get(key, Poly()).scale(_perm_sign(idx)))

    def is_zero(self) -> bool:
        return not self._terms

    def free_variables(self) -> frozenset:
        out = set()
        for p in self._terms.values():
            out |= p.free_vars()
        return frozenset(out)

    def to_pairs(self) -> list:
        """``[(basis names, coefficient text), ...]`` in sorted basis order."""
        return [(tuple(self.coords[i] for i in idx), str(from_poly(p)))
                for idx, p in sorted(self._terms.items())]

    def evaluate(self, point: Mapping[str, object]) -> dict:
        return {tuple(self.coords[i] for i in idx): p.eval(point)
                for idx, p in self._terms.items()}

    def __repr__(self):
        if not self._terms:
            return f"0 ({self.degree}-form)"
        parts = []
        for names, text in self.to_pairs():
            basis = "^".join("d" + n for n in names) or "1"
            parts.append(f"({text}) {basis}")
        return " + ".join(parts)

    # linear structure ----------------------------------------------------
    def _same(self, other: "DifferentialForm"):
        _check_same(self.coords, other.coords)
        if self.degree != other.degree:
            raise DegreeError(f"degree {self.degree} vs {other.degree}")

    def __add__(self, other):
        if other == 0:
            return self
        self._same(other)
        out = dict(self._terms)
        for k, v in other._terms.items():
            out[k] = out.get(k, Poly()) + v
        return DifferentialForm(self.coords, self.degree, out)

    __radd__ = __add__

    def __neg__(self):
        return DifferentialForm(self.coords, self.degree, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, f):
        if isinstance(f, DifferentialForm):
            return wedge(self, f)
        fp = _poly(f)
        return DifferentialForm(self.coords, self.degree, {k: v * fp for k, v in self._terms.items()})

    def __rmul__(self, f):
        return self.__mul__(f)

    def __xor__(self, other):
        return wedge(self, other)

    def __eq__(self, other):
        if isinstance(other, int) and other == 0:
            return self.is_zero()
        if not isinstance(other, DifferentialForm):
            return NotImplemented
        return (self.coords == other.coords and self.degree == other.degree
                and self._terms == other._terms)

    __hash__ = None

    def map_coefficients(self, fn) -> "DifferentialForm":
        """Apply ``fn: Poly -> Poly`` to every coefficient."""
        return DifferentialForm(self.coords, self.degree, {k: fn(v) for k, v in self._terms.items()})


# ---------------------------------------------------------------------------
# operations


def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    _check_same(a.coords, b.coords)
    deg = a.degree + b.degree
    out: dict = {}
    if deg <= len(a.coords):
        for I, pa in a._terms.items():
            sI = set(I)
            for J, pb in b._terms.items():
                if sI.intersection(J):
                    continue
                sign = 1
                for i in I:
                    for j in J:
                        if j < i:
                            sign = -sign
                key = tuple(sorted(I + J))
                prod = pa * pb
                out[key] = out.get(key, Poly()) + (prod if sign > 0 else -prod)
    return DifferentialForm(a.coords, deg, out)


def exterior_derivative(a: DifferentialForm) -> DifferentialForm:
    coords = a.coords
    pos = {n: i for i, n in enumerate(coords)}
    out: dict = {}
    for I, p in a._terms.items():
        for v in p.free_vars():
            c = pos.get(v)
            if c is None or c in I:
                continue
            dp = p.diff(v)
            if dp.is_zero():
                continue
            below = sum(1 for i in I if i < c)
            key = tuple(sorted(I + (c,)))
            out[key] = out.get(key, Poly()) + (dp if below % 2 == 0 else -dp)
    return DifferentialForm(coords, a.degree + 1, out)


d = exterior_derivative


def interior_product(V: VectorField, a: DifferentialForm) -> DifferentialForm:
    """``i_V a``: contraction in the first slot."""
    _check_same(V.coords, a.coords)
    if a.degree < 1:
        raise DegreeError("interior product of a 0-form")
    comp = {a.coords.index(k): v for k, v in V._comp.items()}
    out: dict = {}
    for I, p in a._terms.items():
        for r, i in enumerate(I):
            vi = comp.get(i)
            if vi is None:
                continue
            key = I[:r] + I[r + 1:]
            term = vi * p
            out[key] = out.get(key, Poly()) + (term if r % 2 == 0 else -term)
    return DifferentialForm(a.coords, a.degree - 1, out)


def lichnerowicz(a: DifferentialForm, theta: DifferentialForm) -> DifferentialForm:
    """``d_theta a = d a - theta ^ a``."""
    if theta.degree != 1:
        raise DegreeError("Lee form must be a 1-form")
    return exterior_derivative(a) - wedge(theta, a)


@dataclass
class SectionMap:
    """Map between charts given by coordinate images.

    ``images[target_name]`` is an expression in the source coordinates;
    target names absent from ``images`` but present in the source map
    identically.
    """

    source: tuple
    target: tuple
    images: dict = field(default_factory=dict)
    base: tuple = ()

    def __post_init__(self):
        self.source = tuple(self.source)
        self.target = tuple(self.target)
        imgs = {}
        for name in self.target:
            if name in self.images:
                imgs[name] = as_expr(self.images[name])
            elif name in self.source:
                imgs[name] = from_poly(Poly.var(name))
            else:
                raise ChartMismatchError(f"no image given for target coordinate {name!r}")
        extra = set(self.images) - set(self.target)
        if extra:
            raise ChartMismatchError(f"images for unknown coordinates {sorted(extra)}")
        for b in self.base:
            if imgs[b].poly() != Poly.var(b):
                raise ChartMismatchError(f"base coordinate {b!r} must map identically")
        self.images = imgs

    def image_polys(self) -> dict:
        return {k: v.poly() for k, v in self.images.items()}

    def compose(self, inner: "SectionMap") -> "SectionMap":
        """``self o inner``."""
        _check_same(inner.target, self.source)
        sub = inner.image_polys()
        images = {k: from_poly(v.poly().subs(sub)) for k, v in self.images.items()}
        return SectionMap(inner.source, self.target, images)

    def __call__(self, point: Mapping[str, object]) -> dict:
        return {k: v.poly().eval(point) for k, v in self.images.items()}


def pullback(s: SectionMap, a: DifferentialForm) -> DifferentialForm:
    _check_same(s.target, a.coords)
    src = s.source
    imgs = s.image_polys()
    # total differential of each target coordinate, as {source index: Poly}
    dmap = {}
    for ti, name in enumerate(s.target):
        p = imgs[name]
        dmap[ti] = {si: p.diff(sn) for si, sn in enumerate(src) if sn in p.free_vars()}
        dmap[ti] = {k: v for k, v in dmap[ti].items() if not v.is_zero()}
    out: dict = {}
    for I, coeff in a._terms.items():
        c = coeff.subs(imgs)
        if c.is_zero():
            continue
        acc = {(): c}
        for ti in I:
            nxt: dict = {}
            for J, pj in acc.items():
                for si, dp in dmap[ti].items():
                    if si in J:
                        continue
                    below = sum(1 for j in J if j > si)
                    key = tuple(sorted(J + (si,)))
                    term = pj * dp
                    nxt[key] = nxt.get(key, Poly()) + (term if below % 2 == 0 else -term)
            acc = {k: v for k, v in nxt.items() if not v.is_zero()}
            if not acc:
                break
        for J, pj in acc.items():
            out[J] = out.get(J, Poly()) + pj
    return DifferentialForm(src, a.degree, out)


def contract_connection(h, a: DifferentialForm) -> DifferentialForm:
    """``sum_j dx^j ^ i_{h_j} a`` for a connection ``h = dx^j (x) h_j``.

    ``h`` must provide ``coords`` and ``horizontal_lifts()`` returning
    ``{base name: VectorField}``.
    """
    _check_same(h.coords, a.coords)
    if a.degree < 1:
        raise DegreeError("cannot contract a connection into a 0-form")
    total = DifferentialForm.zero(a.coords, a.degree)
    for name, lift in h.horizontal_lifts().items():
        total = total + wedge(DifferentialForm.d_coord(a.coords, name), interior_product(lift, a))
    return total


def one_form(coords: Sequence[str], components: Mapping[str, object]) -> DifferentialForm:
    return DifferentialForm.from_basis(coords, {(k,): v for k, v in components.items()})


def random_polynomial_form(coords: Sequence[str], degree: int, rng, *, max_terms: int = 4,
                           max_deg: int = 2, params: Iterable[str] = ()) -> DifferentialForm:
    """Random form with small-integer polynomial coefficients (for property checks)."""
    import itertools
    coords = tuple(coords)
    bases = list(itertools.combinations(range(len(coords)), degree))
    names = list(coords) + list(params)
    terms = {}
    if not bases:
        return DifferentialForm(coords, degree)
    for _ in range(int(rng.integers(1, max_terms + 1))):
        I = bases[int(rng.integers(len(bases)))]
        p = Poly()
        for _ in range(int(rng.integers(1, 4))):
            mono = Poly.const(int(rng.integers(-3, 4)))
            for _ in range(int(rng.integers(0, max_deg + 1))):
                mono = mono * Poly.var(names[int(rng.integers(len(names)))])
            p = p + mono
        terms[I] = terms.get(I, Poly()) + p
    return DifferentialForm(coords, degree, terms)
