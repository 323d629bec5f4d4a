"""Event simulation: determinism, exactness at small scale, conditioning.

The engine oracle provides every expected value; Monte Carlo assertions use
fixed seeds so runs are reproducible bit for bit.
"""

import math

import numpy as np
import pytest

from critlab import (
    Family,
    ModelParams,
    OffspringDistribution,
    ParameterError,
    SolveConfig,
    build_sim_model,
    d_limit,
    dkw_band,
    empirical_D,
    estimate_survival,
    evolve_series,
    ks_distance,
    make_scale_function,
    population_at,
    qprocess_kernel_row,
    simulate_mbp,
    simulate_qprocess,
    survival_q,
)

CONST = make_scale_function(ModelParams(0.5, 1.0, Family.CONSTANT))


@pytest.fixture(scope="module")
def model():
    return build_sim_model(CONST, order=2**14)


def test_seed_determinism(model):
    a = population_at(model, [1.0, 2.0], 2000, seed=42, conditioned=False)
    b = population_at(model, [1.0, 2.0], 2000, seed=42, conditioned=False)
    assert np.array_equal(a.sizes, b.sizes)
    assert np.array_equal(a.extinction_time, b.extinction_time)
    c = population_at(model, [1.0, 2.0], 2000, seed=43, conditioned=False)
    assert not np.array_equal(a.sizes, c.sizes)


def test_thread_count_does_not_change_results(model):
    a = population_at(model, [2.0], 2000, seed=7, threads=1)
    b = population_at(model, [2.0], 2000, seed=7, threads=2)
    assert np.array_equal(a.sizes, b.sizes)


def test_seed_mandatory(model):
    with pytest.raises(ParameterError):
        population_at(model, [1.0], 10, seed=None)


def test_pure_death_extinction_times():
    # all offspring mass on k = 0: lifetime of the single individual is
    # exponential with the table's total rate
    dist = OffspringDistribution(
        probs=np.array([1.0, 0.0]), tail_cutoff=1, tail_exponent=2.5,
        tail_mass=0.0, total_rate=2.0,
    )
    dead = build_sim_model(CONST, order=4)
    dead.offspring = dist
    sample = population_at(dead, [50.0], 20000, seed=3, conditioned=False)
    times = sample.extinction_time
    assert np.all(np.isfinite(times))
    mean = float(times.mean())
    assert abs(mean - 0.5) <= 3.0 * times.std() / math.sqrt(len(times))


def test_survival_against_closed_form(model):
    est = estimate_survival(model, [2.0], 20000, seed=11)[0]
    assert abs(est.value - 0.25) <= 4.0 * est.stderr
    assert est.stderr == pytest.approx(math.sqrt(est.value * (1 - est.value) / 20000))


def test_survival_from_several_ancestors(model):
    # P{alive at t | i0 = 3} = 1 - (1 - q(t))^3 by branching independence
    est = estimate_survival(model, [2.0], 20000, seed=13, i0=3)[0]
    expect = 1.0 - 0.75**3
    assert abs(est.value - expect) <= 3.0 * est.stderr


def test_martingale_mean_population(model):
    # criticality keeps E[pop(t)] = i0; the infinite offspring variance
    # makes the sample z-score heavy-tailed, so this is a seeded smoke check
    sample = population_at(model, [1.0], 100000, seed=101, conditioned=False)
    z = sample.sizes[:, 0].astype(float)
    assert abs(z.mean() - 1.0) <= 4.0 * z.std() / math.sqrt(len(z))


def test_qprocess_kernel_mixture_identity(model):
    # (i+k-1) a_k / (i |a1|) = (i-1)/i * p_k + (1/i) * k p_k and rows add to
    # one up to the table's tail mass, for every i up to 1e3
    p = model.offspring.probs
    sb = model.size_biased.probs
    kmax = model.coeffs.order
    for i in (1, 2, 17, 1000):
        row = qprocess_kernel_row(model, i, kmax)
        mix = (i - 1.0) / i * p + sb / i
        assert np.allclose(row, mix, rtol=1e-12, atol=1e-15)
        tail = (i - 1.0) / i * model.offspring.tail_mass + model.size_biased.tail_mass / i
        assert row.sum() == pytest.approx(1.0 - tail, abs=1e-9)


def test_qprocess_never_absorbs(model):
    sample = population_at(model, [0.5, 1.0, 2.0], 5000, seed=17, conditioned=True,
                           pop_cap=10**4)
    assert int(sample.sizes.min()) >= 1


def test_qprocess_jump_from_one_is_size_biased(model):
    rng = np.random.default_rng(19)
    traj = simulate_qprocess(model, 1, 0.5, rng)
    # first jump from state 1 must go up (k >= 2 under the size-biased law)
    if len(traj.sizes) > 1:
        assert traj.sizes[1] >= 2


def test_qprocess_cells_match_engine(model):
    sample = population_at(model, [1.0], 20000, seed=23, conditioned=True, pop_cap=10**4)
    state = evolve_series(CONST, 64, 1.0, SolveConfig(rel_tol=1e-11, abs_tol=1e-13))
    q_row = state.coeffs * np.arange(65)
    W = sample.sizes[:, 0]
    for j in range(1, 11):
        pj = float(q_row[j])
        sd = math.sqrt(pj * (1 - pj) / len(W))
        assert abs(float(np.mean(W == j)) - pj) <= 5.0 * sd


def test_trajectory_structure(model):
    rng = np.random.default_rng(29)
    traj = simulate_mbp(model, 2, 10.0, rng)
    assert np.all(np.diff(traj.times) > 0.0)
    jumps = np.diff(traj.sizes)
    assert np.all(jumps != 0)  # k = 1 never occurs
    assert np.all(traj.sizes >= 0)
    if traj.extinction_time is not None:
        assert traj.sizes[-1] == 0
        assert not traj.censored


def test_event_budget_censors_explicitly(model):
    sample = population_at(model, [5.0], 500, seed=31, conditioned=True,
                           pop_cap=10**6, max_events=2000)
    assert sample.budget_exhausted
    assert sample.censored.sum() > 0


def test_event_count_grows_with_horizon(model):
    e1 = population_at(model, [0.5], 3000, seed=37, conditioned=True, pop_cap=10**4)
    e2 = population_at(model, [2.0], 3000, seed=37, conditioned=True, pop_cap=10**4)
    assert e2.events > e1.events


def test_empirical_law_mass_above_zero(model):
    e = empirical_D(model, 1.0, 5000, seed=41, pop_cap=10**4)
    assert np.all(e.values > 0.0)  # W >= 1 always
    assert e.n == 5000
    assert e.dkw() == pytest.approx(dkw_band(5000))


def test_empirical_law_converges_to_limit(model):
    # scaled-down evidence for the distributional convergence: the
    # Kolmogorov distance to the inverted limit law decreases along t
    xs = np.concatenate([[1e-9], np.logspace(-4, 6, 300)])
    dv, _ = d_limit(0.5, xs[1:])
    dv = np.concatenate([[0.0], dv])

    def cdf(x):
        return np.interp(np.log10(np.maximum(x, 1e-9)), np.log10(xs), dv)

    cap = 10**4
    ks = []
    for t in (1.0, 2.0, 5.0):
        e = empirical_D(model, t, 6000, seed=43, pop_cap=cap)
        ks.append(ks_distance(e, cdf, xmax=0.5 * e.scale_q * cap))
    assert all(a > b for a, b in zip(ks, ks[1:]))
    assert ks[0] > 5.0 * dkw_band(6000)  # far from the limit at t = 1


def test_mc_engine_oracle_triangle(model):
    # three-way agreement at t = 2: closed form, ODE solver, Monte Carlo
    from critlab import solve_F

    q_closed = 0.25
    q_ode = solve_F(CONST, 0.0, 2.0, SolveConfig(rel_tol=1e-12, abs_tol=1e-14)).value
    est = estimate_survival(model, [2.0], 20000, seed=47)[0]
    assert q_ode == pytest.approx(q_closed, rel=1e-10)
    assert abs(est.value - q_closed) <= 4.0 * est.stderr
    assert survival_q(CONST, 2.0) == pytest.approx(q_closed, rel=1e-14)
