"""Acceptance checks: every quantitative band the artifact commits to.

Each criterion returns a CriterionResult with pass/fail, runtime, report
rows and human-readable details. ``run_all`` drives them in order; the CLI
``verify`` command and the pytest acceptance module are both thin wrappers
around this module, so the bands live in exactly one place.

Two checks are expected to fail on desk hardware and fail with full
diagnostics rather than being weakened:

* ``laplace-sup-rate``: the stated normalization of the sup-distance over
  theta converges to the profile maximum (< 4/27 for every nu), not to 1;
  the companion profile-normalized measurement is reported alongside.
* ``mc-ks-rate``: sampling the conditioned chain at t = 1e3 with n = 1e6
  needs >= 1e12 events once censoring is held below the DKW band, because
  the conditioned population has infinite mean; the check runs a measured
  pilot and reports the projection that rules the workload out.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import (
    baseline_checks,
    d_limit,
    default_theta_grid,
    delta_sup,
    laplace_sup_profile_max,
    normalized_error_p11,
    normalized_error_q,
    pi_coeffs,
    qproc_gf_ratio,
    qproc_gf_second_order,
    tauberian_ratio,
)
from .branching_model import mechanism_series
from .kolmogorov_engine import (
    SolveConfig,
    evolve_series,
    identity_residual,
    solve_F,
    survival_q,
    transition_matrix,
)
from .simulator import (
    build_sim_model,
    dkw_band,
    empirical_D,
    estimate_survival,
    ks_distance,
    population_at,
)
from .sv_kernel import Family, ModelParams, make_scale_function
from . import _series

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all"]

_NU, _A0 = 0.5, 1.0
_TIGHT = SolveConfig(rel_tol=1e-12, abs_tol=1e-14)
_SERIES_CFG = SolveConfig(rel_tol=1e-11, abs_tol=1e-13)


@dataclass
class CriterionResult:
    cid: str
    tag: str
    passed: bool
    runtime: float = 0.0
    details: list = field(default_factory=list)
    rows: list = field(default_factory=list)  # (experiment, tag, t, exact, predicted, err, method, stderr)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.cid} [{self.tag}] ({self.runtime:.1f}s): {self.details[0] if self.details else ''}"


def _sf(family: Family, nu: float = _NU, a0: float = _A0):
    return make_scale_function(ModelParams(nu, a0, family))


def c1_closed_form_q() -> CriterionResult:
    """ODE survival matches the constant-family closed form to 1e-8."""
    res = CriterionResult("C1", "closed-form-q", True)
    sf = _sf(Family.CONSTANT)
    worst = 0.0
    for t in (0.1, 1.0, 10.0, 100.0, 1000.0):
        q_ode = solve_F(sf, 0.0, t, _TIGHT).value
        q_exact = (1.0 + t / 2.0) ** (-2.0)
        rel = abs(q_ode - q_exact) / q_exact
        worst = max(worst, rel)
        res.rows.append(("closed-form", "q", t, q_exact, q_ode, rel, "ode", ""))
    res.passed = worst <= 1e-8
    res.details.append(f"max relative error {worst:.3e} (band 1e-8)")
    return res


def c2_exact_identity() -> CriterionResult:
    """Integral identity residual <= 1e-6 for both slowly varying families."""
    res = CriterionResult("C2", "exact-identity", True)
    worst = 0.0
    for fam in (Family.CONSTANT, Family.COUPLED_DRIFT):
        sf = _sf(fam)
        for s in (0.0, 0.5, 0.9):
            for t in (1.0, 10.0, 100.0, 1000.0):
                r = abs(identity_residual(sf, s, t, _SERIES_CFG))
                worst = max(worst, r)
                res.rows.append((fam.value, "exact-identity", t, 0.0, r, r, "ode", ""))
    res.passed = worst <= 1e-6
    res.details.append(f"max |residual| {worst:.3e} (band 1e-6)")
    return res


def c3_semigroup() -> CriterionResult:
    """|F(t+tau;s) - F(tau;F(t;s))| <= 1e-8 on a 5x5x3 grid."""
    res = CriterionResult("C3", "semigroup", True)
    sf = _sf(Family.COUPLED_DRIFT)
    grid = (0.25, 0.5, 1.0, 2.0, 4.0)
    worst = 0.0
    for s in (0.0, 0.5, 0.9):
        for t in grid:
            f_t = solve_F(sf, s, t, _TIGHT).F
            for tau in grid:
                lhs = solve_F(sf, s, t + tau, _TIGHT).F
                rhs = solve_F(sf, f_t, tau, _TIGHT).F
                d = abs(lhs - rhs)
                worst = max(worst, d)
                res.rows.append(("semigroup", "F", t + tau, lhs, rhs, d, "ode", ""))
    res.passed = worst <= 1e-8
    res.details.append(f"max |defect| {worst:.3e} (band 1e-8)")
    return res


def c4_survival_second_order() -> CriterionResult:
    """Normalized survival error in [0.9, 1.1] at t=1e8, monotone toward 1."""
    res = CriterionResult("C4", "survival-second-order", True)
    sf = _sf(Family.COUPLED_DRIFT)
    ts = [1e4, 1e5, 1e6, 1e7, 1e8]
    Es = [normalized_error_q(sf, t) for t in ts]
    for t, E in zip(ts, Es):
        res.rows.append(("survival", "survival-second-order", t, 1.0, E, E - 1.0, "oracle", ""))
    gaps = [abs(E - 1.0) for E in Es]
    monotone = all(g1 > g2 for g1, g2 in zip(gaps, gaps[1:]))
    in_band = 0.9 <= Es[-1] <= 1.1
    res.passed = monotone and in_band
    res.details.append(
        f"E(1e8)={Es[-1]:.4f} (band [0.9,1.1]); E over decades: "
        + ", ".join(f"{e:.4f}" for e in Es)
    )
    return res


def c5_p11_second_order() -> CriterionResult:
    """Normalized single-survivor error within [0.85, 1.15] at t=1e8."""
    res = CriterionResult("C5", "p11-second-order", True)
    sf = _sf(Family.COUPLED_DRIFT)
    E = normalized_error_p11(sf, 1e8)
    res.rows.append(("p11", "p11-second-order", 1e8, 1.0, E, E - 1.0, "oracle", ""))
    res.passed = 0.85 <= E <= 1.15
    res.details.append(f"E2(1e8)={E:.4f} (band [0.85,1.15])")
    return res


def c6_qproc_gf() -> CriterionResult:
    """Conditioned-chain GF ratio within 2% at t=1e6; second order within 20%."""
    res = CriterionResult("C6", "qproc-gf", True)
    sf = _sf(Family.COUPLED_DRIFT)
    t = 1e6
    ok = True
    msgs = []
    for s in (0.25, 0.5, 0.75):
        ratio = qproc_gf_ratio(sf, s, t)
        second = qproc_gf_second_order(sf, s, t)
        ok &= abs(ratio - 1.0) <= 0.02 and 0.8 <= second <= 1.2
        msgs.append(f"s={s}: ratio={ratio:.6f}, second={second:.3f}")
        res.rows.append((f"s={s}", "qproc-gf", t, 1.0, ratio, ratio - 1.0, "oracle", ""))
        res.rows.append((f"s={s}", "qproc-gf-second", t, 1.0, second, second - 1.0, "oracle", ""))
    res.passed = ok
    res.details.append("; ".join(msgs) + " (bands 2% / [0.8,1.2])")
    return res


def c7_laplace_sup_rate() -> CriterionResult:
    """Stated band on delta_sup * nu^3 t / ((1+nu) log t) at t=1e6.

    The stated normalization converges to the theta-profile maximum
    (27/256 at nu=1/2), so the band [0.8, 1.2] is not attainable; the
    check is asserted as stated and reports the profile-normalized value,
    which does land in [0.8, 1.2], as the code-correctness companion.
    """
    res = CriterionResult("C7", "laplace-sup-rate", True)
    sf = _sf(Family.COUPLED_DRIFT)
    nu = sf.nu
    grid = default_theta_grid(200)
    sups = {}
    for t in (1e3, 1e4, 1e5, 1e6, 1e7):
        sup, arg = delta_sup(sf, t, grid)
        sups[t] = sup
        stated = sup * nu**3 * t / ((1.0 + nu) * math.log(t))
        profile = sup / (laplace_sup_profile_max(nu) * (1.0 + nu) / nu**3 * math.log(t) / t)
        res.rows.append(("sup", "laplace-sup-rate", t, stated, profile, stated - 1.0, "oracle", ""))
    t = 1e6
    stated = sups[t] * nu**3 * t / ((1.0 + nu) * math.log(t))
    profile = sups[t] / (laplace_sup_profile_max(nu) * (1.0 + nu) / nu**3 * math.log(t) / t)
    decreasing = all(sups[a] > sups[b] for a, b in zip((1e3, 1e4, 1e5, 1e6), (1e4, 1e5, 1e6, 1e7)))
    res.passed = (0.8 <= stated <= 1.2) and decreasing
    res.details.append(
        f"stated normalization {stated:.4f} (band [0.8,1.2]); profile-normalized "
        f"{profile:.4f}; sup decreasing over 1e3..1e7: {decreasing}. The stated "
        f"normalization tends to the theta-profile maximum "
        f"{laplace_sup_profile_max(nu):.4f}, which is < 0.8 for every nu in (0,1), "
        f"so this band cannot be met; the profile-normalized companion is the "
        f"code-correctness check."
    )
    return res


def _invariance_residuals(fam: Family, J: int = 1024, jmax: int = 50):
    sf = _sf(fam)
    state = evolve_series(sf, J, 1.0, _SERIES_CFG)
    P = transition_matrix(state)
    one = np.zeros(J + 1)
    one[0] = 1.0
    inv_f = _series.div(one, mechanism_series(sf, J))
    mu = np.zeros(J + 1)
    mu[1:] = inv_f[:-1] / np.arange(1, J + 1)
    mu_res = float(np.max(np.abs((mu @ P)[1 : jmax + 1] - mu[1 : jmax + 1])))
    pi = mu * np.arange(J + 1)
    jj = np.arange(J + 1, dtype=float)
    Q = P * jj[None, :]
    Q[0] = 0.0
    Q[1:] /= jj[1:, None]
    pi_res = float(np.max(np.abs((pi @ Q)[1 : jmax + 1] - pi[1 : jmax + 1])))
    pi_series = pi_coeffs(sf, jmax).coeffs
    pi_match = float(np.max(np.abs(pi_series[1 : jmax + 1] - pi[1 : jmax + 1])))
    return mu_res, pi_res, pi_match


def c8_invariant_measures() -> CriterionResult:
    """Both invariance identities to 1e-6 at J=1024, columns j <= 50."""
    res = CriterionResult("C8", "invariant-measures", True)
    worst = 0.0
    for fam in (Family.CONSTANT, Family.COUPLED_DRIFT):
        mu_res, pi_res, pi_match = _invariance_residuals(fam)
        worst = max(worst, mu_res, pi_res)
        res.details.append(
            f"{fam.value}: mu-residual {mu_res:.2e}, pi-residual {pi_res:.2e}, "
            f"pi-series agreement {pi_match:.2e}"
        )
        res.rows.append((fam.value, "invariant-mu", 1.0, 0.0, mu_res, mu_res, "series", ""))
        res.rows.append((fam.value, "invariant-pi", 1.0, 0.0, pi_res, pi_res, "series", ""))
    res.passed = worst <= 1e-6
    res.details.insert(0, f"max residual {worst:.3e} (band 1e-6)")
    return res


def c9_tauberian() -> CriterionResult:
    """Partial-sum ratio within [0.95, 1.05] at n = 1e4."""
    res = CriterionResult("C9", "tauberian-partial-sums", True)
    ok = True
    for fam in (Family.CONSTANT, Family.COUPLED_DRIFT):
        r = tauberian_ratio(_sf(fam), 10**4)
        ok &= 0.95 <= r <= 1.05
        res.details.append(f"{fam.value}: ratio {r:.5f}")
        res.rows.append((fam.value, "tauberian", 1e4, 1.0, r, r - 1.0, "series", ""))
    res.passed = ok
    res.details.insert(0, "band [0.95, 1.05]")
    return res


def c10_mc_triangle() -> CriterionResult:
    """Monte Carlo agreement: survival at t=2 and conditioned cells at t=1."""
    res = CriterionResult("C10", "mc-triangle", True)
    sf = _sf(Family.CONSTANT)
    model = build_sim_model(sf)
    est = estimate_survival(model, [2.0], 10**5, seed=20240811)[0]
    gap = abs(est.value - 0.25)
    q_ok = gap <= 3.0 * est.stderr
    res.rows.append(("mc-q", "mc-q", 2.0, 0.25, est.value, gap, "mc", est.stderr))
    sample = population_at(model, [1.0], 10**5, seed=20240812, conditioned=True, pop_cap=10**4)
    state = evolve_series(sf, 64, 1.0, _SERIES_CFG)
    q_row = state.coeffs * np.arange(65)
    W = sample.sizes[:, 0]
    worst_z = 0.0
    for j in range(1, 11):
        pj = float(q_row[j])
        fj = float(np.mean(W == j))
        sd = math.sqrt(pj * (1.0 - pj) / len(W))
        worst_z = max(worst_z, abs(fj - pj) / sd)
        res.rows.append((f"j={j}", "mc-qcell", 1.0, pj, fj, (fj - pj) / sd, "mc", sd))
    cells_ok = worst_z <= 4.0
    res.passed = q_ok and cells_ok
    res.details.append(
        f"survival gap {gap:.2e} vs 3*stderr {3*est.stderr:.2e}; worst cell z {worst_z:.2f} (band 4)"
    )
    return res


def c11_mc_ks_rate(event_budget: int = 4 * 10**7) -> CriterionResult:
    """Empirical-law convergence at t in {10, 100, 1000}, n=1e6, 10 minutes.

    The conditioned population has infinite mean (tail index nu), so the
    event cost of one trajectory grows without bound unless censored; a
    censoring cap small enough to stay within the event budget drives the
    censored fraction far above the DKW band. The check runs a measured
    pilot at t=10, calibrates the projection and fails with the numbers
    when (as on any desk machine) the stated workload cannot finish in
    10 minutes at DKW-compatible censoring.
    """
    res = CriterionResult("C11", "mc-ks-rate", True)
    sf = _sf(Family.CONSTANT)
    nu, a0 = sf.nu, sf.a0
    model = build_sim_model(sf)
    n_stated = 10**6
    eps = dkw_band(n_stated)
    c_tail = (1.0 + 1.0 / nu) / math.gamma(1.0 - nu)

    # pilot: measured event throughput and cost at a small, capped workload
    n_pilot, t_pilot, cap_pilot = 2000, 10.0, 10**4
    t0 = time.time()
    pilot = population_at(
        model, [t_pilot], n_pilot, seed=20240813, conditioned=True,
        pop_cap=cap_pilot, max_events=event_budget,
    )
    wall = time.time() - t0
    rate_meas = pilot.events / max(wall, 1e-9)

    def formula(t, n, cap):
        # E[W(u) ^ cap] ~ c_tail * cap**(1-nu) * q(u)**(-nu) / (1-nu);
        # for the constant family q(u)**(-nu) = 1 + nu*a0*u.
        return n * model.rate * c_tail * cap ** (1.0 - nu) / (1.0 - nu) * (
            t + nu * a0 * t * t / 2.0
        )

    calib = pilot.events / formula(t_pilot, n_pilot, cap_pilot)
    total = 0.0
    lines = []
    for t in (10.0, 100.0, 1000.0):
        q = survival_q(sf, t)
        cap_needed = (c_tail / eps) ** (1.0 / nu) / q  # censored fraction <= DKW
        ev = calib * formula(t, n_stated, cap_needed)
        total += ev
        lines.append(f"t={t:g}: cap>={cap_needed:.2e}, projected events {ev:.2e}")
    projected_seconds = total / rate_meas
    ceiling_seconds = total / 1e8  # generous single-node event-rate ceiling
    res.rows.append(
        ("projection", "mc-ks-rate", 1000.0, 600.0, projected_seconds, pilot.events, "mc", "")
    )
    res.passed = ceiling_seconds <= 600.0
    res.details.append(
        f"projected {total:.2e} events ~ {projected_seconds:.0f}s at measured "
        f"{rate_meas:.2e} events/s, still {ceiling_seconds:.0f}s at an optimistic "
        f"1e8 events/s (budget 600s); pilot: n={n_pilot}, t={t_pilot:g}, "
        f"cap={cap_pilot:g}, {pilot.events} events in {wall:.1f}s, "
        f"{int(pilot.censored.sum())} censored. "
        + "; ".join(lines)
        + ". The conditioned population has infinite mean, so this workload is "
        "not reachable by exact event simulation; the Laplace-domain check (C7 "
        "rows) is the quantitative rate check at large t. Scaled-down evidence "
        "of the KS decrease runs in the regular test suite."
    )
    return res


def c12_baselines() -> CriterionResult:
    """Quadratic-mechanism identity and the first-order survival ratio."""
    res = CriterionResult("C12", "baselines", True)
    bs = _sf(Family.BINARY_SPLIT, nu=1.0)
    worst = 0.0
    for s in (0.0, 0.5, 0.9):
        rep = baseline_checks(bs, [1.0, 10.0, 100.0], s, _TIGHT)
        for t, exact, pred, err in rep.records:
            worst = max(worst, abs(err))
            res.rows.append((f"s={s}", "quadratic-baseline", t, exact, pred, err, "ode", ""))
    bin_ok = worst <= 1e-9
    zol_ok = True
    for fam in (Family.CONSTANT, Family.COUPLED_DRIFT):
        rep = baseline_checks(_sf(fam), [1e6], 0.0)
        ratio = rep.records[0][1]
        zol_ok &= abs(ratio - 1.0) <= 0.01
        res.details.append(f"{fam.value} first-order ratio {ratio:.6f}")
        res.rows.append((fam.value, "first-order-ratio", 1e6, 1.0, ratio, ratio - 1.0, "oracle", ""))
    res.passed = bin_ok and zol_ok
    res.details.insert(0, f"quadratic-mechanism residual {worst:.2e} (band 1e-9); ratio band 1%")
    return res


CRITERIA = {
    "C1": c1_closed_form_q,
    "C2": c2_exact_identity,
    "C3": c3_semigroup,
    "C4": c4_survival_second_order,
    "C5": c5_p11_second_order,
    "C6": c6_qproc_gf,
    "C7": c7_laplace_sup_rate,
    "C8": c8_invariant_measures,
    "C9": c9_tauberian,
    "C10": c10_mc_triangle,
    "C11": c11_mc_ks_rate,
    "C12": c12_baselines,
}

_TAG_TO_CID = {
    "closed-form-q": "C1",
    "exact-identity": "C2",
    "semigroup": "C3",
    "survival-second-order": "C4",
    "p11-second-order": "C5",
    "qproc-gf": "C6",
    "laplace-sup-rate": "C7",
    "invariant-measures": "C8",
    "tauberian-partial-sums": "C9",
    "mc-triangle": "C10",
    "mc-ks-rate": "C11",
    "baselines": "C12",
}


def run_criterion(key: str) -> CriterionResult:
    """Run one criterion by id (C1..C12) or by catalog tag."""
    cid = key if key in CRITERIA else _TAG_TO_CID.get(key)
    if cid is None:
        raise KeyError(f"unknown criterion {key!r}")
    fn = CRITERIA[cid]
    t0 = time.time()
    out = fn()
    out.runtime = time.time() - t0
    return out


def run_all(only: str | None = None) -> list[CriterionResult]:
    if only is not None:
        return [run_criterion(only)]
    return [run_criterion(cid) for cid in CRITERIA]
