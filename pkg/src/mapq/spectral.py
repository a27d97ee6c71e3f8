"""Markov additive kernels and their Perron-Frobenius spectral quantities.

A kernel couples a finite irreducible Markov chain with per-transition
increment laws.  The transform matrix at theta has entries
p_ij * E[e^{theta X}] under the (i, j) law; its log spectral radius is the
cumulant generating function kappa(theta) of the additive part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import MgfDiverged, NoConvergence, NoRootInDomain, UnstableQueue
from .laws import IncrementLaw, Negated

_DENSE_LIMIT = 64
_EIG_TOL = 1e-12
_EIG_CAP = 100_000


@dataclass(frozen=True)
class MapKernel:
    state_labels: tuple
    transition: np.ndarray
    increments: tuple  # tuple of tuples of IncrementLaw, indexed (source, dest)
    initial_dist: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.transition, dtype=float)
        w = np.asarray(self.initial_dist, dtype=float)
        n = len(self.state_labels)
        if p.shape != (n, n):
            raise ValueError(f"transition must be {n}x{n}, got {p.shape}")
        if np.any(p < 0):
            raise ValueError("transition entries must be nonnegative")
        if np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("transition rows must sum to 1 within 1e-12")
        if w.shape != (n,) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("initial_dist must be a length-n probability vector")
        if len(self.increments) != n or any(len(row) != n for row in self.increments):
            raise ValueError("increments must be an n x n matrix of laws")
        for row in self.increments:
            for law in row:
                if not isinstance(law, IncrementLaw):
                    raise ValueError(f"not an increment law: {law!r}")
        if not _irreducible(p):
            raise ValueError("transition matrix must be irreducible")
        object.__setattr__(self, "state_labels", tuple(self.state_labels))
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "increments", tuple(tuple(r) for r in self.increments))
        object.__setattr__(self, "initial_dist", w)
        self.transition.setflags(write=False)
        self.initial_dist.setflags(write=False)

    @property
    def n_states(self):
        return len(self.state_labels)

    def law(self, i, j) -> IncrementLaw:
        return self.increments[i][j]


def _irreducible(p: np.ndarray) -> bool:
    # breadth-first reachability on the support graph, both directions
    n = p.shape[0]
    adj = p > 0
    for mat in (adj, adj.T):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            i = frontier.pop()
            for j in np.nonzero(mat[i])[0]:
                if not seen[j]:
                    seen[j] = True
                    frontier.append(j)
        if not seen.all():
            return False
    return True


def single_state_kernel(law: IncrementLaw, label="s0") -> MapKernel:
    return MapKernel((label,), np.array([[1.0]]), ((law,),), np.array([1.0]))


@dataclass(frozen=True)
class SpectralSolution:
    theta: float
    kappa: float
    h: np.ndarray
    v: np.ndarray
    pi: np.ndarray
    residual: float = field(default=0.0)


@dataclass(frozen=True)
class StabilityRoot:
    theta_star: float
    kappa_arrival: float
    residual: float


def transform_matrix(kernel: MapKernel, theta: float) -> np.ndarray:
    """F_hat[theta] with entries p_ij * mgf_{H_ij}(theta)."""
    n = kernel.n_states
    p = kernel.transition
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if p[i, j] > 0:
                out[i, j] = p[i, j] * kernel.law(i, j).mgf(theta)
    if not np.all(np.isfinite(out)):
        raise MgfDiverged(f"transform matrix not finite at theta={theta}")
    return out


def _transform_derivative(kernel: MapKernel, theta: float) -> np.ndarray:
    """Entrywise theta-derivative: p_ij * E[X e^{theta X}]."""
    n = kernel.n_states
    p = kernel.transition
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if p[i, j] > 0:
                out[i, j] = p[i, j] * kernel.law(i, j).tilted_mean(theta)
    if not np.all(np.isfinite(out)):
        raise MgfDiverged(f"transform derivative not finite at theta={theta}")
    return out


def stationary_distribution(kernel: MapKernel) -> np.ndarray:
    p = kernel.transition
    n = p.shape[0]
    if n == 1:
        return np.array([1.0])
    # left null space of (P - I), with the normalization row appended
    a = np.vstack([p.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _power_pair(f: np.ndarray):
    n = f.shape[0]
    h = np.full(n, 1.0 / n)
    v = np.full(n, 1.0 / n)
    lam = 0.0
    for _ in range(_EIG_CAP):
        h_new = f @ h
        v_new = v @ f
        lam = float(np.linalg.norm(h_new))
        h_new = h_new / lam
        v_new = v_new / np.linalg.norm(v_new)
        res = max(np.max(np.abs(h_new - h)), np.max(np.abs(v_new - v)))
        h, v = h_new, v_new
        if res < _EIG_TOL:
            return lam, h, v
    raise NoConvergence(f"power iteration residual {res!r} above {_EIG_TOL}")


def perron(kernel: MapKernel, theta: float) -> SpectralSolution:
    """Dominant eigentriple of the transform matrix at theta.

    h and v are scaled so that pi . h = 1 and v . h = 1; at theta = 0 this
    reduces to h = ones and v = pi.
    """
    f = transform_matrix(kernel, theta)
    n = f.shape[0]
    if n <= _DENSE_LIMIT:
        eigvals, right = np.linalg.eig(f)
        k = int(np.argmax(np.abs(eigvals)))
        lam = float(eigvals[k].real)
        h = right[:, k].real
        eigvals_l, left = np.linalg.eig(f.T)
        kl = int(np.argmax(np.abs(eigvals_l)))
        v = left[:, kl].real
    else:
        lam, h, v = _power_pair(f)
    if lam <= 0:
        raise NoConvergence(f"nonpositive dominant eigenvalue {lam!r}")
    if np.sum(h) < 0:
        h = -h
    if np.sum(v) < 0:
        v = -v
    if np.any(h <= 0) or np.any(v <= 0):
        raise NoConvergence("Perron eigenvectors are not strictly positive")
    pi = stationary_distribution(kernel)
    h = h / float(pi @ h)
    v = v / float(v @ h)
    residual = max(
        float(np.max(np.abs(f @ h - lam * h)) / (lam * np.max(np.abs(h)))),
        float(np.max(np.abs(v @ f - lam * v)) / (lam * np.max(np.abs(v)))),
    )
    if residual > 1e-10:
        raise NoConvergence(f"eigen residual {residual!r} above 1e-10")
    return SpectralSolution(theta, math.log(lam), h, v, pi, residual)


def cgf(kernel: MapKernel, theta: float) -> float:
    """kappa(theta): the log Perron eigenvalue of the transform matrix."""
    return perron(kernel, theta).kappa


def cgf_derivative(kernel: MapKernel, theta: float) -> float:
    """kappa'(theta) = v . F_hat'[theta] . h * e^{-kappa(theta)}."""
    sol = perron(kernel, theta)
    fprime = _transform_derivative(kernel, theta)
    return float(sol.v @ fprime @ sol.h) * math.exp(-sol.kappa)


def mean_rate(kernel: MapKernel) -> float:
    """Long-run mean increment per slot: kappa'(0) = sum_ij pi_i p_ij E[H_ij]."""
    return cgf_derivative(kernel, 0.0)


def negate(kernel: MapKernel) -> MapKernel:
    """Sign-flip every increment law; cgf(negate(k), theta) = cgf(k, -theta)."""
    increments = tuple(
        tuple(law.inner if isinstance(law, Negated) else Negated(law) for law in row)
        for row in kernel.increments
    )
    return MapKernel(kernel.state_labels, kernel.transition, increments, kernel.initial_dist)


def stability_root(
    arrival: MapKernel, service: MapKernel, residual_tol: float = 1e-10
) -> StabilityRoot:
    """Positive root theta* of kappa^A(theta) + kappa^{-S}(theta) = 0.

    kappa is convex through the origin with negative drift at a stable
    queue, so there is at most one positive root; we bracket by doubling
    from 1e-3 and then bisect.
    """
    drift_a = mean_rate(arrival)
    drift_s = mean_rate(service)
    if drift_a >= drift_s:
        raise UnstableQueue(drift_a, drift_s)
    neg_service = negate(service)

    def f(theta):
        return cgf(arrival, theta) + cgf(neg_service, theta)

    lo, hi = 0.0, 1e-3
    f_hi = None
    for _ in range(128):
        try:
            f_hi = f(hi)
        except MgfDiverged as exc:
            raise NoRootInDomain(
                f"combined cgf diverged at theta={hi} before recrossing zero"
            ) from exc
        except NoConvergence as exc:
            # the service transform underflowed to a zero eigenvalue: the
            # combined cgf is still far below zero and no larger theta is
            # representable, so no positive recrossing exists
            raise NoRootInDomain(
                f"combined cgf underflowed at theta={hi} before recrossing zero"
            ) from exc
        if f_hi > 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NoRootInDomain("combined cgf never recrossed zero within the bracket scan")

    # brentq is the hybrid bisection/secant step; the bracket scan above
    # guarantees exactly one sign change because kappa is convex in theta.
    theta = float(brentq(f, lo if lo > 0 else 1e-300, hi, xtol=1e-15, rtol=8.9e-16))
    residual = abs(f(theta))
    if residual > residual_tol:
        raise NoRootInDomain(f"root residual {residual!r} above {residual_tol}")
    return StabilityRoot(theta, cgf(arrival, theta), residual)
