"""Residual checks for the two defining axioms of divergence operators.

An operator D is a divergence when it turns brackets into directional
derivatives, D([X, Y]) = X(D(Y)) - Y(D(X)), and satisfies the product rule
D(fX) = f D(X) + X(f) (with the scalar term weighted for the s-density
variants).  The checker samples both residuals over a battery of fields and
scalars; symbolic operators are differentiated exactly, opaque ones through
central differences along the field direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ValidationError
from .expr import Expr, const, var
from .geometry import (
    Chart,
    VectorField,
    VolumeForm,
    apply_field,
    bracket,
    sample_points,
)
from .operators import DivOperator

__all__ = [
    "GENERATOR_VERSION",
    "CheckConfig",
    "AxiomEntry",
    "ResidualReport",
    "library_fields",
    "random_fields",
    "random_scalars",
    "cocycle_residual",
    "leibniz_residual",
    "cartan_identity_residual",
    "check_axioms",
]

# Bump when the field/scalar generators change, so frozen manifests notice.
GENERATOR_VERSION = 1

MAX_SKIP_RATE = 0.10


@dataclass(frozen=True)
class CheckConfig:
    seed: int = 0
    n_points: int = 100
    n_fields: int = 8
    n_scalars: int = 4
    tol: float | None = None  # defaults by operator kind
    fd_step_scale: float = 1e-5

    def __post_init__(self):
        if self.n_points < 1 or self.n_fields < 0 or self.n_scalars < 0:
            raise ValidationError("check sizes must be positive")
        if self.tol is not None and not self.tol > 0:
            raise ValidationError("tolerance must be positive")


@dataclass(frozen=True)
class AxiomEntry:
    axiom: str
    label: str
    max_residual: float
    argmax_point: tuple | None
    samples: int
    skipped: int


@dataclass(frozen=True)
class ResidualReport:
    """Outcome of a full axiom sweep for one operator."""

    tolerance: float
    entries: tuple[AxiomEntry, ...]
    manifest: dict

    @property
    def samples(self) -> int:
        return sum(e.samples for e in self.entries)

    @property
    def skipped(self) -> int:
        return sum(e.skipped for e in self.entries)

    @property
    def skip_rate(self) -> float:
        total = self.samples
        return self.skipped / total if total else 1.0

    @property
    def max_residual(self) -> float:
        best = 0.0
        seen = False
        for e in self.entries:
            if e.samples > e.skipped:
                seen = True
                best = max(best, e.max_residual)
        return best if seen else math.inf

    @property
    def argmax(self) -> AxiomEntry | None:
        live = [e for e in self.entries if e.samples > e.skipped]
        if not live:
            return None
        return max(live, key=lambda e: e.max_residual)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance and self.skip_rate <= MAX_SKIP_RATE


# ---------------------------------------------------------------------------
# field and scalar batteries


def library_fields(chart: Chart) -> list[tuple[str, VectorField]]:
    """Deterministic named fields: coordinate units, a swirl, the dilation,
    and a trigonometric mix."""
    names = chart.coords
    n = chart.dim
    out: list[tuple[str, VectorField]] = []
    for i, nm in enumerate(names):
        comps = tuple(const(1.0) if j == i else const(0.0) for j in range(n))
        out.append((f"unit_{nm}", VectorField(chart, comps)))
    if n >= 2:
        comps = [const(0.0)] * n
        comps[0] = -var(names[1])
        comps[1] = var(names[0])
        out.append(("swirl", VectorField(chart, tuple(comps))))
    out.append(("dilation", VectorField(chart, tuple(var(nm) for nm in names))))
    trig = tuple(Expr("sin", (var(names[(i + 1) % n]),)) if i % 2 == 0
                 else Expr("cos", (var(names[(i + 1) % n]),))
                 for i in range(n))
    out.append(("trig", VectorField(chart, trig)))
    return out


def _monomials(names: Sequence[str], degree: int):
    if not names:
        yield const(1.0), 0
        return
    head, tail = names[0], names[1:]
    for rest, used in _monomials(tail, degree):
        yield rest, used
        term = rest
        for power in range(1, degree - used + 1):
            term = term * var(head) if not (rest == const(1.0) and power == 1) \
                else var(head)
            yield term, used + power


def _random_polynomial(chart: Chart, rng, degree: int = 3) -> Expr:
    total = None
    for mono, _ in _monomials(chart.coords, degree):
        coeff = float(rng.uniform(-2.0, 2.0))
        term = const(coeff) * mono
        total = term if total is None else total + term
    return total.simplify()


def random_fields(chart: Chart, count: int, rng) -> list[tuple[str, VectorField]]:
    """Polynomial fields of degree at most 3 with coefficients in [-2, 2]."""
    out = []
    for k in range(count):
        comps = tuple(_random_polynomial(chart, rng) for _ in range(chart.dim))
        out.append((f"poly{k}", VectorField(chart, comps)))
    return out


def random_scalars(chart: Chart, count: int, rng) -> list[tuple[str, Expr]]:
    return [(f"f{k}", _random_polynomial(chart, rng)) for k in range(count)]


# ---------------------------------------------------------------------------
# residual machinery

_TINY = 1e-300


def _flat_divergence(field: VectorField) -> Expr:
    acc = const(0.0)
    for comp, nm in zip(field.components, field.chart.coords):
        acc = acc + comp.diff(nm)
    return acc


def _lie_coefficient(field: VectorField, density: Expr) -> Expr:
    """X(rho) + rho * div_flat(X) for an arbitrary (not necessarily positive)
    density expression."""
    acc = const(0.0)
    for comp, nm in zip(field.components, field.chart.coords):
        acc = acc + comp * density.diff(nm)
        acc = acc + density * comp.diff(nm)
    return acc


class _SymbolCache:
    """Per-run cache of operator images and their coordinate gradients."""

    def __init__(self, op: DivOperator):
        self.op = op
        self.images: dict[int, Expr] = {}
        self.grads: dict[int, tuple[Expr, ...]] = {}

    def image(self, field: VectorField) -> Expr:
        key = id(field)
        if key not in self.images:
            self.images[key] = self.op.symbolic(field)
        return self.images[key]

    def grad(self, field: VectorField) -> tuple[Expr, ...]:
        key = id(field)
        if key not in self.grads:
            img = self.image(field)
            self.grads[key] = tuple(img.diff(nm) for nm in self.op.chart.coords)
        return self.grads[key]


def _cocycle_residuals_symbolic(op, cache, x, y, pts_arrays):
    lhs = op.symbolic(bracket(x, y))
    expr = lhs
    for comp, d in zip(x.components, cache.grad(y)):
        expr = expr - comp * d
    for comp, d in zip(y.components, cache.grad(x)):
        expr = expr + comp * d
    vals = expr.eval_many(pts_arrays)
    return np.abs(vals)


def _directional_fd(op, along: VectorField, of: VectorField, pts: np.ndarray,
                    h0: float):
    """Derivative of p -> D(of)(p) along the field, by central differences on
    the normalised direction.  Returns (values, valid mask)."""
    chart = op.chart
    arrays = chart.arrays(pts)
    comps = np.stack([c.eval_many(arrays) for c in along.components], axis=1)
    norms = np.linalg.norm(comps, axis=1)
    m = pts.shape[0]
    values = np.zeros(m)
    valid = np.ones(m, dtype=bool)
    moving = norms > _TINY
    if not np.any(moving):
        return values, valid
    unit = np.zeros_like(comps)
    unit[moving] = comps[moving] / norms[moving, None]
    h = np.full(m, h0)

    def shifted(step):
        up = pts + step[:, None] * unit
        dn = pts - step[:, None] * unit
        ok = chart.contains_mask(chart.arrays(up)) & chart.contains_mask(chart.arrays(dn))
        return up, dn, ok

    up, dn, ok = shifted(h)
    retry = moving & ~ok
    if np.any(retry):  # one shrink near the boundary, then give up
        h = np.where(retry, h / 10.0, h)
        up, dn, ok = shifted(h)
    usable = moving & ok
    valid = ~moving | usable
    if np.any(usable):
        g_up = op.apply_many(of, up[usable])
        g_dn = op.apply_many(of, dn[usable])
        values[usable] = (g_up - g_dn) / (2.0 * h[usable]) * norms[usable]
    return values, valid


def _cocycle_residuals_fd(op, x, y, pts, h0):
    term = op.apply_many(bracket(x, y), pts)
    dxy, ok_x = _directional_fd(op, x, y, pts, h0)
    dyx, ok_y = _directional_fd(op, y, x, pts, h0)
    vals = np.abs(term - (dxy - dyx))
    valid = ok_x & ok_y & np.isfinite(vals)
    return vals, valid


def _leibniz_residuals(op, cache, f: Expr, x: VectorField, weight: float,
                       pts: np.ndarray):
    chart = op.chart
    arrays = chart.arrays(pts)
    fx = VectorField(chart, tuple((f * c).simplify() for c in x.components))
    xf = apply_field(x, f)
    if op.is_symbolic:
        expr = op.symbolic(fx) - f * cache.image(x) - const(weight) * xf
        return np.abs(expr.eval_many(arrays))
    dfx = op.apply_many(fx, pts)
    dx = op.apply_many(x, pts)
    return np.abs(dfx - f.eval_many(arrays) * dx - weight * xf.eval_many(arrays))


# ---------------------------------------------------------------------------
# public single-point residuals


def cocycle_residual(op: DivOperator, x: VectorField, y: VectorField,
                     point: Sequence[float],
                     fd_step_scale: float = 1e-5) -> float:
    """|D([X,Y]) - (X(D(Y)) - Y(D(X)))| at one point."""
    op.chart.require_inside(point)
    pts = np.asarray([point], dtype=float)
    if op.is_symbolic:
        cache = _SymbolCache(op)
        vals = _cocycle_residuals_symbolic(op, cache, x, y, op.chart.arrays(pts))
        val, ok = float(vals[0]), math.isfinite(float(vals[0]))
    else:
        vals, valid = _cocycle_residuals_fd(op, x, y, pts,
                                            fd_step_scale * op.chart.min_side)
        val, ok = float(vals[0]), bool(valid[0])
    if not ok:
        raise DomainError("residual could not be evaluated at this point")
    return val


def leibniz_residual(op: DivOperator, f: Expr, x: VectorField,
                     point: Sequence[float], weight: float | None = None) -> float:
    """|D(fX) - f D(X) - weight * X(f)| at one point; the weight defaults to
    the operator's own."""
    op.chart.require_inside(point)
    w = op.weight if weight is None else float(weight)
    pts = np.asarray([point], dtype=float)
    cache = _SymbolCache(op) if op.is_symbolic else None
    vals = _leibniz_residuals(op, cache, f, x, w, pts)
    val = float(vals[0])
    if not math.isfinite(val):
        raise DomainError("residual could not be evaluated at this point")
    return val


def cartan_identity_residual(x: VectorField, y: VectorField, volume: VolumeForm,
                             point: Sequence[float]) -> float:
    """|L_[X,Y] - (L_X L_Y - L_Y L_X)| applied to the volume, at one point."""
    volume.chart.require_inside(point)
    rho = volume.density
    lhs = _lie_coefficient(bracket(x, y), rho)
    rhs = _lie_coefficient(x, _lie_coefficient(y, rho)) \
        - _lie_coefficient(y, _lie_coefficient(x, rho))
    env = volume.chart.env(point)
    return abs((lhs - rhs).eval(env))


# ---------------------------------------------------------------------------
# the sweep


def check_axioms(op: DivOperator, config: CheckConfig | None = None,
                 fields: Sequence[tuple[str, VectorField]] | None = None,
                 scalars: Sequence[tuple[str, Expr]] | None = None) -> ResidualReport:
    """Sample both axiom residuals for an operator over a field battery.

    Fields are the configured number of random degree-3 polynomial fields
    plus the deterministic library; scalars are random polynomials.  Passing
    explicit batteries overrides generation.
    """
    config = config or CheckConfig()
    chart = op.chart
    rng = np.random.default_rng(config.seed)
    if fields is None:
        fields = random_fields(chart, config.n_fields, rng) + library_fields(chart)
    else:
        fields = list(fields)
    if scalars is None:
        scalars = random_scalars(chart, config.n_scalars, rng)
    else:
        scalars = list(scalars)
    pts = np.asarray(sample_points(chart, config.n_points, config.seed), dtype=float)
    arrays = chart.arrays(pts)
    tol = config.tol if config.tol is not None else (1e-9 if op.is_symbolic else 1e-6)
    h0 = config.fd_step_scale * chart.min_side

    cache = _SymbolCache(op) if op.is_symbolic else None
    entries: list[AxiomEntry] = []

    def finish(axiom, label, vals, valid):
        vals = np.asarray(vals, dtype=float)
        valid = valid & np.isfinite(vals)
        skipped = int(vals.size - valid.sum())
        if np.any(valid):
            live = np.where(valid, vals, -1.0)
            k = int(np.argmax(live))
            entries.append(AxiomEntry(axiom, label, float(vals[k]),
                                      tuple(pts[k]), int(vals.size), skipped))
        else:
            entries.append(AxiomEntry(axiom, label, math.inf, None,
                                      int(vals.size), skipped))

    for a in range(len(fields)):
        for b in range(a + 1, len(fields)):
            name_x, x = fields[a]
            name_y, y = fields[b]
            label = f"cocycle({name_x},{name_y})"
            if op.is_symbolic:
                vals = _cocycle_residuals_symbolic(op, cache, x, y, arrays)
                finish("cocycle", label, vals, np.isfinite(vals))
            else:
                vals, valid = _cocycle_residuals_fd(op, x, y, pts, h0)
                finish("cocycle", label, vals, valid)

    for fname, f in scalars:
        for name_x, x in fields:
            vals = _leibniz_residuals(op, cache, f, x, op.weight, pts)
            finish("leibniz", f"leibniz({fname},{name_x})", vals, np.isfinite(vals))

    manifest = {
        "seed": config.seed,
        "n_points": config.n_points,
        "n_fields": config.n_fields,
        "n_scalars": config.n_scalars,
        "fields": [nm for nm, _ in fields],
        "generator_version": GENERATOR_VERSION,
        "mode": "symbolic" if op.is_symbolic else "finite-difference",
        "fd_step": None if op.is_symbolic else h0,
        "tolerance": tol,
    }
    return ResidualReport(tolerance=tol, entries=tuple(entries), manifest=manifest)
