"""Slowly varying scale machinery behind the critical branching mechanisms.

Every mechanism handled by this package has the shape

    f(1 - y) = y * decay_rate(y),        decay_rate(y) = y**nu * sv(1/y),

for 0 < nu < 1, where ``sv`` is slowly varying at infinity, so the offspring
law is critical with infinite variance. ``decay_rate`` is literally the
instantaneous relative decay rate of the tail of the extinction probability:
d(log R)/dt = -decay_rate(R) along the backward flow.

The local index of ``decay_rate`` drifts away from ``nu`` by

    index_drift(y) = y * decay_rate'(y) / decay_rate(y) - nu,

which tends to 0 as y -> 0, and the elasticity of the slowly varying part is
sv_elasticity(x) = x * sv'(x) / sv(x) = -index_drift(1/x).

Three built-in families provide independent exact oracles:

``constant``
    sv(x) = a0 identically, index_drift = 0. Everything is closed form.

``coupled_drift``
    The index drift coincides with the decay rate itself. Integrating the
    index relation y*D'(y)/D(y) = nu + D(y) with D(1) = a0 gives the unique
    rational closed form

        decay_rate(y) = nu*a0*y**nu / (nu + a0*(1 - y**nu)).

``binary_split``
    Finite-variance quadratic mechanism f(s) = a0*(1-s)**2, the classical
    baseline; nu is pinned to 1 and index_drift = 0.

The normalizer N(t) used by the survival asymptotics is defined implicitly by
N**nu * sv((nu*t)**(1/nu) / N) = 1, equivalently N = (nu*t)**(1/nu) * y* with
decay_rate(y*) = 1/(nu*t), which is how ``solve_normalizer`` computes it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError, ParameterError, SolverError

__all__ = [
    "Family",
    "ModelParams",
    "ScaleFunction",
    "Normalizer",
    "make_scale_function",
    "remainder_rho",
    "solve_normalizer",
    "invariant_measure_M",
    "time_to_level",
    "level_at_time",
    "perturbation_ratio",
]


class Family(str, Enum):
    """Built-in scale-function families."""

    CONSTANT = "constant"
    COUPLED_DRIFT = "coupled_drift"
    BINARY_SPLIT = "binary_split"


@dataclass(frozen=True)
class ModelParams:
    """Tail index, base intensity and family tag; fully determines f.

    ``nu`` must lie in (0, 1) for the two slowly varying families; the
    binary-split baseline pins nu = 1 internally regardless of the input.
    """

    nu: float
    a0: float
    family: Family = Family.CONSTANT

    def __post_init__(self):
        if not (self.a0 > 0.0 and math.isfinite(self.a0)):
            raise ParameterError(f"a0 must be positive and finite, got {self.a0}")
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if fam is Family.BINARY_SPLIT:
            object.__setattr__(self, "nu", 1.0)
        elif not (0.0 < self.nu < 1.0):
            raise ParameterError(
                f"nu must lie in (0, 1) for family {fam.value!r}, got {self.nu}"
            )


@dataclass(frozen=True)
class Normalizer:
    """Value of the implicit normalizer N(t) at one time point."""

    t: float
    value: float


class ScaleFunction:
    """Evaluable bundle (sv, decay_rate, index_drift, sv_elasticity) for one family.

    Subclasses supply closed forms; the exact-oracle hooks (``decay_inverse``,
    ``invariant_measure_closed``, ``normalizer_closed``) are what the solvers
    cross-validate against.
    """

    def __init__(self, params: ModelParams):
        self.params = params

    @property
    def nu(self) -> float:
        return self.params.nu

    @property
    def a0(self) -> float:
        return self.params.a0

    @property
    def family(self) -> Family:
        return self.params.family

    # required evaluators -------------------------------------------------
    def sv(self, x):
        """Slowly varying component at infinity, defined on x >= 1."""
        raise NotImplementedError

    def decay_rate(self, y):
        """decay_rate(y) = y**nu * sv(1/y) on y in (0, 1]."""
        raise NotImplementedError

    def index_drift(self, y):
        """Local-index deviation of decay_rate at y in (0, 1]."""
        raise NotImplementedError

    def sv_elasticity(self, x):
        """x * sv'(x) / sv(x) = -index_drift(1/x) on x >= 1."""
        return -self.index_drift(1.0 / np.asarray(x, dtype=float))

    def decay_inverse(self, z):
        """Inverse of decay_rate on (0, a0]."""
        raise NotImplementedError

    def f(self, s):
        """Infinitesimal generating function on [0, 1)."""
        s = np.asarray(s, dtype=float)
        if np.any(s >= 1.0) or np.any(s < 0.0):
            raise DomainError("f(s) requires 0 <= s < 1; the limit at 1- is 0")
        y = 1.0 - s
        val = y * self.decay_rate(y)
        return float(val) if np.ndim(val) == 0 else val

    # optional exact hooks -------------------------------------------------
    def invariant_measure_closed(self, s: float) -> float | None:
        return None

    def normalizer_closed(self, t: float) -> float | None:
        return None


class ConstantScale(ScaleFunction):
    """sv(x) = a0; all derived quantities in closed form."""

    def sv(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.float64(self.a0), x.shape).copy() if x.ndim else float(self.a0)

    def decay_rate(self, y):
        return self.a0 * np.asarray(y, dtype=float) ** self.nu

    def index_drift(self, y):
        y = np.asarray(y, dtype=float)
        return np.zeros(y.shape) if y.ndim else 0.0

    def decay_inverse(self, z):
        return (np.asarray(z, dtype=float) / self.a0) ** (1.0 / self.nu)

    def invariant_measure_closed(self, s):
        return ((1.0 - s) ** (-self.nu) - 1.0) / (self.nu * self.a0)

    def normalizer_closed(self, t):
        return self.a0 ** (-1.0 / self.nu)


class CoupledDriftScale(ScaleFunction):
    """Family with index_drift(y) = decay_rate(y).

    The index relation integrates to the rational form
    decay_rate(y) = nu*a0*y**nu / (nu + a0*(1 - y**nu)), hence
    sv(x) = nu*a0 / (nu + a0*(1 - x**(-nu))), which decreases from a0 at
    x = 1 to nu*a0/(nu + a0) at infinity.
    """

    def sv(self, x):
        x = np.asarray(x, dtype=float)
        val = self.nu * self.a0 / (self.nu + self.a0 * (1.0 - x ** (-self.nu)))
        return float(val) if val.ndim == 0 else val

    def decay_rate(self, y):
        y = np.asarray(y, dtype=float)
        ypow = y**self.nu
        val = self.nu * self.a0 * ypow / (self.nu + self.a0 * (1.0 - ypow))
        return float(val) if val.ndim == 0 else val

    def index_drift(self, y):
        return self.decay_rate(y)

    def decay_inverse(self, z):
        z = np.asarray(z, dtype=float)
        ypow = z * (self.nu + self.a0) / (self.a0 * (self.nu + z))
        val = ypow ** (1.0 / self.nu)
        return float(val) if val.ndim == 0 else val

    def invariant_measure_closed(self, s):
        nu, a0 = self.nu, self.a0
        return (nu + a0) * ((1.0 - s) ** (-nu) - 1.0) / (nu * nu * a0) + math.log1p(-s) / nu


class BinarySplitScale(ScaleFunction):
    """Quadratic mechanism f(s) = a0*(1-s)**2 with finite variance (nu = 1)."""

    def sv(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.float64(self.a0), x.shape).copy() if x.ndim else float(self.a0)

    def decay_rate(self, y):
        return self.a0 * np.asarray(y, dtype=float)

    def index_drift(self, y):
        y = np.asarray(y, dtype=float)
        return np.zeros(y.shape) if y.ndim else 0.0

    def decay_inverse(self, z):
        return np.asarray(z, dtype=float) / self.a0

    def invariant_measure_closed(self, s):
        return s / (self.a0 * (1.0 - s))

    def normalizer_closed(self, t):
        return 1.0 / self.a0


_FAMILY_CLASSES = {
    Family.CONSTANT: ConstantScale,
    Family.COUPLED_DRIFT: CoupledDriftScale,
    Family.BINARY_SPLIT: BinarySplitScale,
}


def make_scale_function(params: ModelParams) -> ScaleFunction:
    """Build the evaluable scale bundle for one parameter set.

    Raises ParameterError for nu outside (0, 1) on the slowly varying
    families or a0 <= 0 (enforced by ModelParams itself).
    """
    return _FAMILY_CLASSES[Family(params.family)](params)


def remainder_rho(sf: ScaleFunction, lam: float, x: float) -> float:
    """Slow-variation remainder sv(lam*x)/sv(x) - 1 for lam > 0, x >= 1.

    Both arguments of ``sv`` must stay >= 1, so lam*x >= 1 is required too.
    """
    if x < 1.0:
        raise DomainError(f"remainder_rho requires x >= 1, got {x}")
    if lam <= 0.0 or lam * x < 1.0:
        raise DomainError(f"remainder_rho requires lam > 0 and lam*x >= 1, got lam={lam}")
    return float(sf.sv(lam * x) / sf.sv(x) - 1.0)


def solve_normalizer(sf: ScaleFunction, t: float) -> Normalizer:
    """Solve N**nu * sv((nu*t)**(1/nu)/N) = 1 to relative tolerance 1e-12.

    Equivalent to N = (nu*t)**(1/nu) * y* with decay_rate(y*) = 1/(nu*t),
    which is solved on y in (0, 1]; the constant family short-circuits to
    the exact a0**(-1/nu). Requires 1/(nu*t) <= a0, i.e. t >= 1/(nu*a0),
    otherwise the defining equation has no root with sv evaluated on x >= 1.
    """
    if not t > 0.0:
        raise DomainError(f"solve_normalizer requires t > 0, got {t}")
    closed = sf.normalizer_closed(t)
    if closed is not None:
        return Normalizer(t, float(closed))
    nu = sf.nu
    target = 1.0 / (nu * t)
    if target > sf.a0:
        raise SolverError(
            f"normalizer undefined for t={t}: needs t >= 1/(nu*a0) = {1.0/(nu*sf.a0):g}"
        )
    ystar = float(sf.decay_inverse(target))
    # decay_inverse is the analytic inverse for the built-in families; fall
    # back to a bracketed solve if a subclass does not provide it.
    resid = sf.decay_rate(ystar) * nu * t - 1.0
    if not abs(resid) <= 1e-12:
        try:
            ystar = brentq(
                lambda y: sf.decay_rate(y) - target, 1e-300, 1.0, xtol=5e-324, rtol=8.9e-16
            )
        except ValueError as exc:
            raise SolverError(f"normalizer bracket failed at t={t}: {exc}") from exc
    return Normalizer(t, float((nu * t) ** (1.0 / nu) * ystar))


def invariant_measure_M(sf: ScaleFunction, s: float) -> float:
    """Generating function of the invariant measure of the branching process.

    Adaptive quadrature of integral_1^{1/(1-s)} dx / (x**(1-nu) * sv(x)),
    carried out in log space, relative tolerance 1e-10. M(0) = 0.
    """
    if not (0.0 <= s < 1.0):
        raise DomainError(f"invariant_measure_M requires 0 <= s < 1, got {s}")
    if s == 0.0:
        return 0.0
    vmax = -math.log1p(-s)  # log of the upper endpoint 1/(1-s)
    nu = sf.nu

    def integrand(v):
        x = math.exp(v)
        return x**nu / sf.sv(x)

    val, err = quad(integrand, 0.0, vmax, epsabs=1e-15, epsrel=1e-10, limit=200)
    if not math.isfinite(val):
        raise SolverError(f"invariant measure quadrature failed at s={s}")
    return float(val)


def time_to_level(sf: ScaleFunction, x: float) -> float:
    """Elapsed time for 1/R to climb from 1 to x along the backward flow.

    Equals M(1 - 1/x): the invariant-measure value advances linearly in
    time along the flow, so this is the exact time-change of the level.
    Strictly increasing on x >= 1 with value 0 at x = 1.
    """
    if x < 1.0:
        raise DomainError(f"time_to_level requires x >= 1, got {x}")
    return invariant_measure_M(sf, 1.0 - 1.0 / x)


def level_at_time(sf: ScaleFunction, y: float) -> float:
    """Monotone inverse of time_to_level: 1/R(y; 0); rejects y < 0."""
    if y < 0.0:
        raise DomainError(f"level_at_time requires y >= 0, got {y}")
    if y == 0.0:
        return 1.0
    hi = 2.0
    for _ in range(600):
        if time_to_level(sf, hi) >= y:
            break
        hi *= 4.0
    else:
        raise SolverError(f"level_at_time could not bracket y={y}")
    return float(brentq(lambda x: time_to_level(sf, x) - y, 1.0, hi, rtol=8.9e-16, maxiter=200))


def perturbation_ratio(sf: ScaleFunction, y: float, K: Callable[[float], float]) -> float:
    """Normalized slow-variation increment under argument perturbation.

    With phi(y) = y - y*K(y) and K(y) -> 0 as y -> 0, returns

        (sv(1/phi(y)) / sv(1/y) - 1) / decay_rate(y),

    which stays bounded as y -> 0 for the coupled-drift family (and is
    identically 0 whenever sv is constant).
    """
    if not (0.0 < y < 1.0):
        raise DomainError(f"perturbation_ratio requires y in (0, 1), got {y}")
    k = float(K(y))
    if not (0.0 <= k < 1.0):
        raise DomainError(f"perturbation_ratio requires 0 <= K(y) < 1, got K({y}) = {k}")
    phi = y * (1.0 - k)
    num = sf.sv(1.0 / phi) / sf.sv(1.0 / y) - 1.0
    return float(num / sf.decay_rate(y))
