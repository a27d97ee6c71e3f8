"""Analytic delay/backlog tail bounds for Markov additive arrival and service.

All bounds share the positive root theta* of the stability equation
kappa^A(theta) + kappa^{-S}(theta) = 0; the delay tail decays at rate
kappa^A(theta*) and the backlog tail at rate theta*.  Upper and lower
bounds differ only by level-independent constants built from the Perron
eigenvector spreads of the two chains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    MgfDiverged,
    NoDerivativeRoot,
    NoFixedPoint,
    NoRootInDomain,
    UnstableQueue,
)
from .laws import Constant
from .spectral import (
    MapKernel,
    StabilityRoot,
    cgf,
    cgf_derivative,
    mean_rate,
    negate,
    perron,
    single_state_kernel,
    stability_root,
)


@dataclass(frozen=True)
class BoundReport:
    level: float
    lower: float
    upper: float
    theta_star: float
    h_plus: float
    h_minus: float
    conditioning: str
    lower_raw: float
    upper_raw: float


@dataclass(frozen=True)
class HorizonBoundReport:
    level: float
    y: float
    theta: float
    theta_y: float
    y_gamma: float
    branch: str
    bound: float
    bound_raw: float


@dataclass(frozen=True)
class DccReport:
    value: float
    theta_opt: float
    asymptotic_cap: float
    value_at_root: float


def _clamp(x):
    return min(max(x, 0.0), 1.0)


def decay_rates(arrival: MapKernel, service: MapKernel):
    """(delay_rate, backlog_rate) = (kappa^A(theta*), theta*)."""
    root = stability_root(arrival, service)
    return root.kappa_arrival, root.theta_star


@dataclass(frozen=True)
class _BoundContext:
    root: StabilityRoot
    h_a: np.ndarray
    h_s: np.ndarray
    pi_a_labels: tuple
    pi_s_labels: tuple
    varpi_a0: np.ndarray
    varpi_s0: np.ndarray
    transition_a: np.ndarray


def _context(arrival: MapKernel, service: MapKernel) -> _BoundContext:
    root = stability_root(arrival, service)
    h_a = perron(arrival, root.theta_star).h
    h_s = perron(negate(service), root.theta_star).h
    return _BoundContext(
        root,
        h_a,
        h_s,
        arrival.state_labels,
        service.state_labels,
        arrival.initial_dist,
        service.initial_dist,
        arrival.transition,
    )


def _h_constants_delay(ctx):
    h_plus = (ctx.h_a.max() / ctx.h_a.min()) / ctx.h_s.min()
    h_minus = (
        math.exp(-ctx.root.kappa_arrival)
        * (ctx.h_a.min() / ctx.h_a.max()) ** 2
        / ctx.h_s.max()
    )
    return h_plus, h_minus

def _h_constants_backlog(ctx):
    h_plus = 1.0 / (ctx.h_a.min() * ctx.h_s.min())
    h_minus = (
        math.exp(-ctx.root.kappa_arrival)
        * ctx.h_a.min()
        / (ctx.h_a.max() ** 2 * ctx.h_s.max())
    )
    return h_plus, h_minus


def delay_bounds(arrival: MapKernel, service: MapKernel, d_range) -> list:
    """Double-sided P(D > d) bounds, per initial-state pair and averaged.

    The conditioning pairs the arrival chain state at time d with the
    service chain state at time 0; the arrival state distribution at d is
    propagated as varpi_0 P^d.  The bound value itself depends on the
    service state only, through h^{-S}_{J_0}.
    """
    ctx = _context(arrival, service)
    h_plus, h_minus = _h_constants_delay(ctx)
    kappa = ctx.root.kappa_arrival
    theta = ctx.root.theta_star
    out = []
    for d in d_range:
        decay = math.exp(-kappa * d)
        varpi_a_d = ctx.varpi_a0 @ np.linalg.matrix_power(ctx.transition_a, int(round(d)))
        for ia, la in enumerate(ctx.pi_a_labels):
            for i_s, ls in enumerate(ctx.pi_s_labels):
                lo = h_minus * ctx.h_s[i_s] * decay
                up = h_plus * ctx.h_s[i_s] * decay
                out.append(
                    BoundReport(d, _clamp(lo), _clamp(up), theta, h_plus, h_minus,
                                f"A[{la}]@d,S[{ls}]@0", lo, up)
                )
        weights = np.outer(varpi_a_d, ctx.varpi_s0)
        lo = float(np.sum(weights * (h_minus * ctx.h_s[None, :] * decay)))
        up = float(np.sum(weights * (h_plus * ctx.h_s[None, :] * decay)))
        out.append(BoundReport(d, _clamp(lo), _clamp(up), theta, h_plus, h_minus,
                               "average", lo, up))
    return out


def backlog_bounds(arrival: MapKernel, service: MapKernel, b_range) -> list:
    """Double-sided P(B > b) bounds with factor h^A_{J_0} h^{-S}_{J_0} e^{-theta b}."""
    ctx = _context(arrival, service)
    h_plus, h_minus = _h_constants_backlog(ctx)
    theta = ctx.root.theta_star
    out = []
    for b in b_range:
        decay = math.exp(-theta * b)
        for ia, la in enumerate(ctx.pi_a_labels):
            for i_s, ls in enumerate(ctx.pi_s_labels):
                factor = ctx.h_a[ia] * ctx.h_s[i_s] * decay
                lo, up = h_minus * factor, h_plus * factor
                out.append(BoundReport(b, _clamp(lo), _clamp(up), theta, h_plus, h_minus,
                                       f"A[{la}]@0,S[{ls}]@0", lo, up))
        weights = np.outer(ctx.varpi_a0, ctx.varpi_s0)
        factor = float(np.sum(weights * np.outer(ctx.h_a, ctx.h_s))) * decay
        lo, up = h_minus * factor, h_plus * factor
        out.append(BoundReport(b, _clamp(lo), _clamp(up), theta, h_plus, h_minus,
                               "average", lo, up))
    return out


def _derivative_root(g, what):
    """Root of an increasing function g on theta > 0 by doubling bracket."""
    lo, hi = 1e-8, 1e-3
    try:
        g_lo = g(lo)
    except MgfDiverged as exc:
        raise NoDerivativeRoot(f"{what}: cgf derivative diverged near zero") from exc
    if g_lo > 0:
        raise NoDerivativeRoot(f"{what}: no positive root, derivative equation starts positive")
    for _ in range(96):
        try:
            g_hi = g(hi)
        except MgfDiverged as exc:
            raise NoDerivativeRoot(f"{what}: left the MGF domain before a sign change") from exc
        if g_hi >= 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NoDerivativeRoot(f"{what}: no sign change found in the bracket scan")
    from scipy.optimize import brentq

    return float(brentq(g, lo, hi, xtol=1e-14, rtol=8.9e-16))


def horizon_delay_bound(arrival: MapKernel, service: MapKernel, y: float, d: float) -> HorizonBoundReport:
    """Finite-horizon delay bound with horizon multiplier y > 1.

    theta solves y kappa'^{-S}(theta) = -(y-1) kappa'^A(theta); the branch
    records whether the bound applies to P(D(t)>d; t<=yd) (y < y_gamma) or
    to the long-horizon remainder (y > y_gamma).
    """
    if y <= 1:
        raise ValueError("horizon multiplier y must exceed 1 for the delay bound")
    ctx = _context(arrival, service)
    neg_service = negate(service)
    gamma = ctx.root.theta_star
    da_g = cgf_derivative(arrival, gamma)
    ds_g = cgf_derivative(neg_service, gamma)
    y_gamma = da_g / (da_g + ds_g)

    theta = _derivative_root(
        lambda t: y * cgf_derivative(neg_service, t) + (y - 1) * cgf_derivative(arrival, t),
        "horizon delay",
    )
    theta_y = -y * cgf(neg_service, theta) - (y - 1) * cgf(arrival, theta)
    h_a = perron(arrival, theta).h
    h_s = perron(neg_service, theta).h
    h_plus = (h_a.max() / h_a.min()) / h_s.min()
    factor = float(ctx.varpi_s0 @ h_s)
    raw = h_plus * factor * math.exp(-d * theta_y)
    branch = "short-horizon" if y < y_gamma else "long-horizon-remainder"
    return HorizonBoundReport(d, y, theta, theta_y, y_gamma, branch, _clamp(raw), raw)


def horizon_backlog_bound(arrival: MapKernel, service: MapKernel, y: float, b: float) -> HorizonBoundReport:
    """Finite-horizon backlog bound with horizon multiplier y > 0."""
    if y <= 0:
        raise ValueError("horizon multiplier y must be positive")
    ctx = _context(arrival, service)
    neg_service = negate(service)
    gamma = ctx.root.theta_star
    y_gamma = 1.0 / (cgf_derivative(arrival, gamma) + cgf_derivative(neg_service, gamma))

    theta = _derivative_root(
        lambda t: y * (cgf_derivative(arrival, t) + cgf_derivative(neg_service, t)) - 1.0,
        "horizon backlog",
    )
    theta_y = theta - y * (cgf(arrival, theta) + cgf(neg_service, theta))
    h_a = perron(arrival, theta).h
    h_s = perron(neg_service, theta).h
    h_plus = 1.0 / (h_a.min() * h_s.min())
    factor = float(ctx.varpi_a0 @ h_a) * float(ctx.varpi_s0 @ h_s)
    raw = h_plus * factor * math.exp(-b * theta_y)
    branch = "short-horizon" if y < y_gamma else "long-horizon-remainder"
    return HorizonBoundReport(b, y, theta, theta_y, y_gamma, branch, _clamp(raw), raw)


def _constant_arrival_context(lam: float, service: MapKernel):
    if lam >= mean_rate(service):
        raise UnstableQueue(lam, mean_rate(service))
    arrival = single_state_kernel(Constant(lam), label="const")
    root = stability_root(arrival, service)
    # h(-theta): right eigenvector of the service transform at -theta*
    h = perron(negate(service), root.theta_star).h
    return root.theta_star, h


def constant_arrival_bounds(lam: float, service: MapKernel, d_range) -> list:
    """Constant-arrival specialization: per-state and averaged delay bounds."""
    theta, h = _constant_arrival_context(lam, service)
    varpi = service.initial_dist
    out = []
    for d in d_range:
        decay = math.exp(-theta * lam * d)
        for i, label in enumerate(service.state_labels):
            lo = math.exp(-theta * lam) * h[i] * decay / h.max()
            up = h[i] * decay / h.min()
            out.append(BoundReport(d, _clamp(lo), _clamp(up), theta,
                                   1.0 / h.min(), math.exp(-theta * lam) / h.max(),
                                   f"S[{label}]@0", lo, up))
        avg = float(varpi @ h)
        lo = math.exp(-theta * lam) * avg * decay / h.max()
        up = avg * decay / h.min()
        out.append(BoundReport(d, _clamp(lo), _clamp(up), theta,
                               1.0 / h.min(), math.exp(-theta * lam) / h.max(),
                               "average", lo, up))
    return out


def constant_arrival_backlog_bounds(lam: float, service: MapKernel, b_range) -> list:
    """P(B > b) = P(D > b/lam) under constant fluid arrival."""
    if lam <= 0.0:
        raise NoRootInDomain("zero arrival rate: backlog tail bounds degenerate")
    b_range = list(b_range)
    reports = constant_arrival_bounds(lam, service, [b / lam for b in b_range])
    per_level = len(reports) // len(b_range)
    out = []
    for k, r in enumerate(reports):
        b = b_range[k // per_level]
        out.append(BoundReport(b, r.lower, r.upper, r.theta_star, r.h_plus, r.h_minus,
                               r.conditioning, r.lower_raw, r.upper_raw))
    return out


def _dcc_value(theta, d, epsilon, arrival, neg_service, varpi_s):
    h_a = perron(arrival, theta).h
    h_s = perron(neg_service, theta).h
    h_plus = (h_a.max() / h_a.min()) / h_s.min()
    vals = (-1.0 / (theta * d)) * np.log(epsilon / (h_plus * h_s))
    return float(varpi_s @ vals)


def dcc_upper(arrival: MapKernel, service: MapKernel, d: float, epsilon: float) -> DccReport:
    """Upper bound on delay-constrained capacity, optimized over theta.

    Evaluates the conditional bound averaged over the service initial
    distribution on a 200-point log grid in (0, theta_max) that always
    contains theta*, then refines around the grid argmin by golden-section.
    The asymptotic cap kappa^A(theta*)/theta* is reported alongside.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    root = stability_root(arrival, service)
    neg_service = negate(service)
    varpi_s = service.initial_dist
    theta_star = root.theta_star

    theta_max = 8.0 * theta_star
    while theta_max > theta_star:
        try:
            _dcc_value(theta_max, d, epsilon, arrival, neg_service, varpi_s)
            break
        except MgfDiverged:
            theta_max *= 0.5
    grid = np.geomspace(theta_star / 100.0, theta_max, 200)
    grid = np.unique(np.append(grid, theta_star))
    values = []
    for t in grid:
        try:
            values.append(_dcc_value(t, d, epsilon, arrival, neg_service, varpi_s))
        except MgfDiverged:
            values.append(math.inf)
    k = int(np.argmin(values))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    e = a + inv_phi * (b - a)
    fc = _dcc_value(c, d, epsilon, arrival, neg_service, varpi_s)
    fe = _dcc_value(e, d, epsilon, arrival, neg_service, varpi_s)
    for _ in range(80):
        if fc < fe:
            b, e, fe = e, c, fc
            c = b - inv_phi * (b - a)
            fc = _dcc_value(c, d, epsilon, arrival, neg_service, varpi_s)
        else:
            a, c, fc = c, e, fe
            e = a + inv_phi * (b - a)
            fe = _dcc_value(e, d, epsilon, arrival, neg_service, varpi_s)
        if b - a < 1e-12 * max(1.0, b):
            break
    theta_opt = c if fc < fe else e
    best = min(values[k], fc, fe)
    cap = root.kappa_arrival / theta_star
    at_root = _dcc_value(theta_star, d, epsilon, arrival, neg_service, varpi_s)
    return DccReport(max(best, 0.0), float(theta_opt), cap, at_root)


def constant_dcc_interval(service: MapKernel, d: float, epsilon: float, varpi) -> tuple:
    """Two-sided admissible-rate interval (lambda_lo, lambda_hi) for constant traffic.

    Each endpoint solves its displayed bound at equality, with -theta the
    negative root of kappa(theta) = 0 for S(t) - lambda t.  The sign of
    log(bound) - log(epsilon) is scanned over a log-spaced rate grid and the
    first change is bisected; rates whose queue has no positive root have a
    vanishing tail and count as satisfying the bound.  If every stable rate
    satisfies it the endpoint clamps just below the mean service rate, and
    if none does the coupled equality has no solution.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    varpi = np.asarray(varpi, dtype=float)
    mu = mean_rate(service)
    lam_max = 0.999999 * mu
    log_eps = math.log(epsilon)

    def violates(lam, endpoint):
        try:
            theta, h = _constant_arrival_context(lam, service)
        except NoRootInDomain:
            return False
        avg = float(varpi @ h)
        if endpoint == "hi":
            log_bound = math.log(avg / h.min()) - theta * lam * d
        else:
            log_bound = math.log(avg / h.max()) - theta * lam * (1.0 + d)
        return log_bound > log_eps

    def solve(endpoint):
        grid = np.geomspace(1e-5 * mu, lam_max, 400)
        flags = [violates(lam, endpoint) for lam in grid]
        try:
            k = next(i for i in range(len(grid) - 1) if flags[i] != flags[i + 1])
        except StopIteration:
            if not any(flags):
                return lam_max  # every stable rate satisfies the bound
            raise NoFixedPoint(
                f"lambda_{endpoint}: the bound exceeds epsilon at every stable rate"
            ) from None
        lo, hi = float(grid[k]), float(grid[k + 1])
        side = flags[k]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if violates(mid, endpoint) == side:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-13 * max(1.0, hi):
                break
        return 0.5 * (lo + hi)

    lam_lo = solve("lo")
    lam_hi = solve("hi")
    return min(lam_lo, lam_hi), max(lam_lo, lam_hi)
