"""Elementwise proximity operators: Poisson fidelity, sparsity, positivity.

The Poisson anti-log-likelihood of intensities eta against counts y is

    f(eta) = sum_i  -y_i log(eta_i) + eta_i        (y_i > 0, eta_i > 0)
                    eta_i                          (y_i = 0, eta_i >= 0)

and +inf as soon as any component leaves its domain (0 log 0 = 0 by the
0! = 1 convention). Its scaled prox has the closed form of a per-pixel
quadratic root. Sparsity penalties are even convex scalar functions psi with
psi(0) = 0 and a positive right derivative at zero; their prox thresholds at
gamma * psi'(0+) and otherwise solves p + gamma psi'(p) = alpha, which for
psi = |.| collapses to plain soft-thresholding.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, DomainError, RootFindingError

Array = np.ndarray


def _pair64(a, b, context: str) -> tuple[Array, Array]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise DimensionMismatchError(expected=a.size, actual=b.size, context=context)
    return a, b


def _validate_counts(y: Array, context: str) -> None:
    if y.size and (np.min(y) < 0.0 or np.any(y != np.rint(y))):
        raise ValueError(f"{context}: counts must be non-negative integers")


def eval_poisson(eta, counts) -> float:
    """Poisson anti-log-likelihood; +inf outside the domain, never NaN."""
    eta, y = _pair64(eta, counts, "eval_poisson")
    _validate_counts(y, "eval_poisson")
    pos = y > 0.0
    if np.any(eta[pos] <= 0.0) or np.any(eta[~pos] < 0.0):
        return math.inf
    total = float(np.sum(eta))
    ep = eta[pos]
    if ep.size:
        total -= float(np.sum(y[pos] * np.log(ep)))
    return total

def grad_poisson(eta, counts) -> Array:
    """Gradient 1 - y/eta where y > 0, and 1 where y = 0.

    Requires eta > 0 on positive-count pixels and eta >= 0 elsewhere;
    violations raise DomainError carrying the first offending index.
    """
    eta, y = _pair64(eta, counts, "grad_poisson")
    _validate_counts(y, "grad_poisson")
    pos = y > 0.0
    bad = (pos & (eta <= 0.0)) | (~pos & (eta < 0.0))
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise DomainError(idx, "gradient undefined: intensity outside the Poisson domain")
    g = np.ones_like(eta)
    g[pos] = 1.0 - y[pos] / eta[pos]
    return g


def prox_poisson(x, beta: float, counts) -> Array:
    """prox of beta * (Poisson fidelity) at x, elementwise.

    prox(x)_i = (x_i - beta + sqrt((x_i - beta)^2 + 4 beta y_i)) / 2,
    which reduces to max(x_i - beta, 0) on zero-count pixels. Output is
    always inside the domain (non-negative, positive where y_i > 0).
    """
    if not beta > 0.0:
        raise ValueError(f"prox scale beta must be > 0, got {beta}")
    x, y = _pair64(x, counts, "prox_poisson")
    _validate_counts(y, "prox_poisson")
    d = x - beta
    return 0.5 * (d + np.sqrt(d * d + 4.0 * beta * y))


class ScalarPenalty(ABC):
    """Even convex scalar penalty, smooth on (0, inf), psi(0) = 0."""

    @abstractmethod
    def value(self, t: float) -> float: ...

    @abstractmethod
    def deriv(self, t: float) -> float:
        """psi'(t) for t > 0 (extended by odd symmetry to t < 0)."""

    @abstractmethod
    def deriv2(self, t: float) -> float:
        """psi''(t) for t > 0; used by the Newton step."""

    @property
    @abstractmethod
    def right_deriv_at_zero(self) -> float:
        """psi'(0+) > 0; sets the dead zone of the prox."""

    def total(self, coeffs) -> float:
        c = np.asarray(coeffs, dtype=np.float64).ravel()
        return float(sum(self.value(abs(t)) for t in c))


class AbsValue(ScalarPenalty):
    """psi(t) = |t|; prox is soft-thresholding."""

    def value(self, t: float) -> float:
        return abs(t)

    def deriv(self, t: float) -> float:
        return math.copysign(1.0, t)

    def deriv2(self, t: float) -> float:
        return 0.0

    @property
    def right_deriv_at_zero(self) -> float:
        return 1.0

    def total(self, coeffs) -> float:
        return float(np.sum(np.abs(coeffs)))


def soft_threshold(values, threshold: float) -> Array:
    if threshold < 0.0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    v = np.asarray(values, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


def _penalty_root(magnitude: float, gamma: float, psi: ScalarPenalty,
                  tol: float = 1e-12, max_iter: int = 200) -> float:
    """Solve p + gamma psi'(p) = magnitude on (0, magnitude].

    Newton from the upper end, safeguarded by bisection on the bracket
    [0, magnitude]; the root exists and is unique because the left side is
    strictly increasing with limit gamma psi'(0+) < magnitude at 0+.
    """
    lo, hi = 0.0, magnitude
    p = magnitude
    for _ in range(max_iter):
        g = p + gamma * psi.deriv(p) - magnitude
        if abs(g) <= tol * max(1.0, magnitude):
            return p
        if g > 0.0:
            hi = p
        else:
            lo = p
        slope = 1.0 + gamma * psi.deriv2(p)
        step_to = p - g / slope if slope > 0.0 else math.nan
        if not (lo < step_to < hi):
            step_to = 0.5 * (lo + hi)
        p = step_to
    raise RootFindingError(
        "penalty prox root finding stalled",
        magnitude=magnitude, gamma=gamma, bracket=(lo, hi), last=p,
    )


def prox_penalty(values, threshold: float, psi: ScalarPenalty) -> Array:
    """prox of threshold * sum_i psi(.) applied elementwise.

    Components with |v| <= threshold * psi'(0+) map to zero; the rest solve
    the scalar stationarity equation, exactly soft-thresholding for psi=|.|.
    threshold == 0 returns the input unchanged.
    """
    if threshold < 0.0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    v = np.asarray(values, dtype=np.float64)
    if threshold == 0.0:
        return v.copy()
    if isinstance(psi, AbsValue):
        return soft_threshold(v, threshold)
    flat = v.ravel()
    out = np.zeros_like(flat)
    dead = threshold * psi.right_deriv_at_zero
    for i, t in enumerate(flat):
        m = abs(t)
        if m > dead:
            out[i] = math.copysign(_penalty_root(m, threshold, psi), t)
    return out.reshape(v.shape)


def project_positive(x) -> Array:
    """Euclidean projection onto the non-negative orthant."""
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


@dataclass(frozen=True)
class PoissonFidelity:
    """Poisson anti-log-likelihood bound to a fixed count image."""

    counts: Array

    def __post_init__(self):
        y = np.asarray(self.counts, dtype=np.float64).ravel()
        _validate_counts(y, "PoissonFidelity")
        object.__setattr__(self, "counts", y)

    def value(self, eta) -> float:
        return eval_poisson(eta, self.counts)

    def grad(self, eta) -> Array:
        return grad_poisson(eta, self.counts)

    def prox(self, x, beta: float) -> Array:
        return prox_poisson(x, beta, self.counts)


@dataclass(frozen=True)
class SparsityPenalty:
    """Separable penalty gamma * sum_i psi(coeff_i)."""

    gamma: float
    psi: ScalarPenalty = field(default_factory=AbsValue)

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")

    def value(self, coeffs) -> float:
        return self.gamma * self.psi.total(coeffs)

    def prox(self, coeffs, scale: float = 1.0) -> Array:
        return prox_penalty(coeffs, scale * self.gamma, self.psi)
