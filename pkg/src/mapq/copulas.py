"""Bivariate copula families, the Markov star-product, and transition extraction.

The star-product characterizes the Markov property purely in dependence
terms; extracting a transition matrix from a copula and a state
distribution is the engine of the dependence-control loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr, ndtri

from .errors import IncompatibleCopula, OutOfUnitInterval, ZeroMassState


def _check_unit(*values):
    for u in values:
        if not 0.0 <= u <= 1.0:
            raise OutOfUnitInterval(f"copula argument {u!r} outside [0, 1]")


class CopulaSpec:
    """A bivariate copula evaluable on the unit square."""

    def eval(self, u: float, v: float) -> float:
        raise NotImplementedError

    def eval_grid(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Values on the product lattice u x v."""
        out = np.empty((len(u), len(v)))
        for i, ui in enumerate(u):
            for j, vj in enumerate(v):
                out[i, j] = self.eval(float(ui), float(vj))
        return out


@dataclass(frozen=True)
class Comonotone(CopulaSpec):
    """M(u, v) = min(u, v), extremal positive dependence."""

    def eval(self, u, v):
        _check_unit(u, v)
        return min(u, v)

    def eval_grid(self, u, v):
        return np.minimum.outer(np.asarray(u), np.asarray(v))


@dataclass(frozen=True)
class Countermonotone(CopulaSpec):
    """W(u, v) = max(u + v - 1, 0), extremal negative dependence."""

    def eval(self, u, v):
        _check_unit(u, v)
        return max(u + v - 1.0, 0.0)

    def eval_grid(self, u, v):
        return np.maximum(np.add.outer(np.asarray(u), np.asarray(v)) - 1.0, 0.0)


@dataclass(frozen=True)
class Product(CopulaSpec):
    """P(u, v) = u v, independence."""

    def eval(self, u, v):
        _check_unit(u, v)
        return u * v

    def eval_grid(self, u, v):
        return np.outer(np.asarray(u), np.asarray(v))


@dataclass(frozen=True)
class Frechet(CopulaSpec):
    """Convex combination w_w W + w_p P + w_m M; closed under the star-product."""

    w_w: float
    w_p: float
    w_m: float

    def __post_init__(self):
        w = (self.w_w, self.w_p, self.w_m)
        if any(x < -1e-15 for x in w):
            raise ValueError(f"Frechet weights must be nonnegative, got {w}")
        if abs(sum(w) - 1.0) > 1e-12:
            raise ValueError(f"Frechet weights sum to {sum(w)!r}, not 1")

    def eval(self, u, v):
        _check_unit(u, v)
        return (
            self.w_w * max(u + v - 1.0, 0.0) + self.w_p * u * v + self.w_m * min(u, v)
        )

    def eval_grid(self, u, v):
        u = np.asarray(u)
        v = np.asarray(v)
        return (
            self.w_w * np.maximum(np.add.outer(u, v) - 1.0, 0.0)
            + self.w_p * np.outer(u, v)
            + self.w_m * np.minimum.outer(u, v)
        )


def one_param_frechet(alpha: float) -> Frechet:
    """One-parameter Frechet family: alpha near +1/-1 is strong positive/negative
    dependence, alpha near 0 is independence."""
    if not -1.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [-1, 1], got {alpha!r}")
    w_w = alpha * alpha * (1.0 - alpha) / 2.0
    w_m = alpha * alpha * (1.0 + alpha) / 2.0
    return Frechet(w_w, 1.0 - alpha * alpha, w_m)


def bvn_cdf(a: float, b: float, rho: float) -> float:
    """Bivariate standard normal CDF Phi2(a, b; rho).

    Uses the tetrachoric reduction Phi(a) Phi(b) + int_0^rho phi2(a, b; r) dr,
    accurate to well under 1e-7 absolute.
    """
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (-1, 1), got {rho!r}")
    if a == -math.inf or b == -math.inf:
        return 0.0
    if a == math.inf:
        return float(ndtr(b))
    if b == math.inf:
        return float(ndtr(a))
    base = float(ndtr(a) * ndtr(b))
    if rho == 0.0:
        return base

    def density(r):
        om = 1.0 - r * r
        return math.exp(-(a * a - 2.0 * r * a * b + b * b) / (2.0 * om)) / (
            2.0 * math.pi * math.sqrt(om)
        )

    corr, _ = quad(density, 0.0, rho, epsabs=1e-10, epsrel=1e-10, limit=200)
    return min(max(base + corr, 0.0), 1.0)


@dataclass(frozen=True)
class Gaussian2(CopulaSpec):
    """Gaussian copula with correlation rho in (-1, 1)."""

    rho: float

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho!r}")

    def eval(self, u, v):
        _check_unit(u, v)
        if u == 0.0 or v == 0.0:
            return 0.0
        if u == 1.0:
            return v
        if v == 1.0:
            return u
        return bvn_cdf(float(ndtri(u)), float(ndtri(v)), self.rho)


@dataclass(frozen=True)
class GridCopula(CopulaSpec):
    """Checkerboard copula: bilinear interpolation of node values on a uniform
    lattice, which preserves the copula axioms."""

    values: np.ndarray  # (N+1) x (N+1) node values, values[i, j] = C(i/N, j/N)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1] or vals.shape[0] < 2:
            raise ValueError("grid values must be a square (N+1) x (N+1) array")
        object.__setattr__(self, "values", vals)
        vals.setflags(write=False)

    @property
    def grid_n(self):
        return self.values.shape[0] - 1

    def eval(self, u, v):
        _check_unit(u, v)
        n = self.grid_n
        x = min(int(u * n), n - 1)
        y = min(int(v * n), n - 1)
        fx = u * n - x
        fy = v * n - y
        c = self.values
        return float(
            (1 - fx) * (1 - fy) * c[x, y]
            + fx * (1 - fy) * c[x + 1, y]
            + (1 - fx) * fy * c[x, y + 1]
            + fx * fy * c[x + 1, y + 1]
        )

    def eval_grid(self, u, v):
        out = np.empty((len(u), len(v)))
        for i, ui in enumerate(u):
            for j, vj in enumerate(v):
                out[i, j] = self.eval(float(ui), float(vj))
        return out


def frechet_homogeneous(h: float) -> Frechet:
    """Frechet member of the homogeneous Markov semigroup at lag h >= 0."""
    if h < 0:
        raise ValueError(f"lag must be nonnegative, got {h!r}")
    alpha = math.exp(-2.0 * h) * (1.0 - math.exp(-h)) / 2.0
    beta = math.exp(-2.0 * h) * (1.0 + math.exp(-h)) / 2.0
    return Frechet(alpha, 1.0 - alpha - beta, beta)


def frechet_compose(c1, c2):
    """Star-composition in Frechet weight space: (alpha, beta) pairs in, pair out."""
    a1, b1 = c1
    a2, b2 = c2
    return (b1 * a2 + a1 * b2, a1 * a2 + b1 * b2)


def star(a: CopulaSpec, b: CopulaSpec, grid_n: int = 512) -> GridCopula:
    """Darsow star-product (A * B)(x, y) = int_0^1 dA/dxi(x, xi) dB/dxi(xi, y) dxi.

    Partial derivatives by central differences on the lattice, integral by
    trapezoid; the integrand is bounded by 1 so O(1/N^2) error covers the
    1e-3 family-identity contracts at the default grid.
    """
    if grid_n < 64:
        raise ValueError("grid_n must be at least 64")
    t = np.linspace(0.0, 1.0, grid_n + 1)
    grid_a = a.eval_grid(t, t)
    grid_b = b.eval_grid(t, t)
    da = np.gradient(grid_a, t, axis=1)  # d/dxi A(x_i, xi_k)
    db = np.gradient(grid_b, t, axis=0)  # d/dxi B(xi_k, y_j)
    w = np.full(grid_n + 1, 1.0 / grid_n)
    w[0] *= 0.5
    w[-1] *= 0.5
    values = (da * w) @ db
    np.clip(values, 0.0, 1.0, out=values)
    return GridCopula(values)


@dataclass(frozen=True)
class MarginalLadder:
    """CDF of an ordered finite state space: cumulative masses ending at 1."""

    state_count: int
    cdf_levels: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.cdf_levels, dtype=float)
        if levels.shape != (self.state_count,):
            raise ValueError("cdf_levels length must equal state_count")
        if np.any(levels <= 0) or np.any(np.diff(levels) < 0):
            raise ValueError("cdf_levels must be positive and nondecreasing")
        if abs(levels[-1] - 1.0) > 1e-12:
            raise ValueError(f"final cdf level is {levels[-1]!r}, not 1")
        object.__setattr__(self, "cdf_levels", levels)
        levels.setflags(write=False)

    @classmethod
    def from_masses(cls, varpi) -> "MarginalLadder":
        varpi = np.asarray(varpi, dtype=float)
        return cls(len(varpi), np.cumsum(varpi))


def transition_from_copula(copula: CopulaSpec, varpi) -> tuple:
    """Extract (P, varpi_next) so the copula couples consecutive state levels.

    Solves sum_{s<=x} varpi(s) P(s, s'<=y) = C(F(x), F(y)) in closed form by
    double differencing of G(x, y) = C(F(x), F(y)); the uniform second
    margin forces row-stochasticity and varpi P = varpi.
    """
    varpi = np.asarray(varpi, dtype=float)
    if np.any(varpi <= 0.0):
        raise ZeroMassState(f"every state needs positive mass, got {varpi.tolist()}")
    n = len(varpi)

    # shortcut rows that are exact consequences of the family
    if isinstance(copula, Product):
        p = np.tile(varpi, (n, 1))
        return p, varpi.copy()
    if isinstance(copula, Comonotone):
        return np.eye(n), varpi.copy()

    ladder = MarginalLadder.from_masses(varpi).cdf_levels
    levels = np.concatenate(([0.0], ladder))
    g = copula.eval_grid(levels, levels)
    mass = g[1:, 1:] - g[:-1, 1:] - g[1:, :-1] + g[:-1, :-1]
    p = mass / varpi[:, None]
    if np.any(p < -1e-9):
        raise IncompatibleCopula(
            f"copula/marginal pair yields transition entry {p.min()!r} < -1e-9"
        )
    np.clip(p, 0.0, None, out=p)
    row_err = np.max(np.abs(p.sum(axis=1) - 1.0))
    if row_err > 1e-9:
        raise IncompatibleCopula(f"row sums off by {row_err!r} > 1e-9")
    p = p / p.sum(axis=1, keepdims=True)
    return p, varpi @ p


@dataclass(frozen=True)
class DimensionPlan:
    transitions: tuple  # P_0 .. P_{t-1}
    distributions: tuple  # varpi_0 .. varpi_t


@dataclass(frozen=True)
class ControlPlan:
    horizon: int
    per_dimension: tuple  # of DimensionPlan

    def __post_init__(self):
        for dim in self.per_dimension:
            for j, p in enumerate(dim.transitions):
                if np.max(np.abs(np.sum(p, axis=1) - 1.0)) > 1e-9:
                    raise ValueError(f"step {j} transition is not row-stochastic")
                step = dim.distributions[j] @ p
                if np.max(np.abs(step - dim.distributions[j + 1])) > 1e-12:
                    raise ValueError(f"step {j} distribution update inconsistent")


def dependence_control(temporal_copulas, varpi0, horizon: int) -> ControlPlan:
    """Per-step transition matrices realizing the requested temporal copulas.

    temporal_copulas: per controllable dimension, either one CopulaSpec
    (homogeneous in time) or a sequence of length `horizon`.  Dimensions are
    treated independently (product spatial copula).
    """
    dims = []
    for copulas, w0 in zip(temporal_copulas, varpi0):
        if isinstance(copulas, CopulaSpec):
            copulas = [copulas] * horizon
        if len(copulas) != horizon:
            raise ValueError("need one copula per step (or a single homogeneous one)")
        w = np.asarray(w0, dtype=float)
        transitions = []
        distributions = [w]
        for c in copulas:
            p, w = transition_from_copula(c, w)
            transitions.append(p)
            distributions.append(w)
        dims.append(DimensionPlan(tuple(transitions), tuple(distributions)))
    return ControlPlan(horizon, tuple(dims))


@dataclass(frozen=True)
class GrangerReport:
    max_deviation: float
    grid_n: int


def granger_product_check(joint, temporal_marginal: CopulaSpec, grid_n: int) -> GrangerReport:
    """Sup-norm check of the product-spatial no-Granger identity.

    The identity: the 4-argument copula with the second next-step argument
    saturated equals v1 times the temporal copula of the first coordinate.
    `joint` is a callable (u1, v1, u2, v2) -> value or a 4-d lattice array.
    """
    t = np.linspace(0.0, 1.0, grid_n + 1)
    if callable(joint):
        lhs = np.empty((grid_n + 1,) * 3)
        for i, u1 in enumerate(t):
            for j, v1 in enumerate(t):
                for k, u2 in enumerate(t):
                    lhs[i, j, k] = joint(u1, v1, u2, 1.0)
    else:
        joint = np.asarray(joint, dtype=float)
        if joint.shape != (grid_n + 1,) * 4:
            raise ValueError("lattice joint must be (N+1)^4 with matching grid_n")
        lhs = joint[:, :, :, -1]
    temporal = temporal_marginal.eval_grid(t, t)
    rhs = t[None, :, None] * temporal[:, None, :]
    return GrangerReport(float(np.max(np.abs(lhs - rhs))), grid_n)
