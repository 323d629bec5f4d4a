"""Acceptance suite: every committed band at its stated tolerance.

One test per criterion; each prints its PASS/FAIL line (run pytest with -s
to see them inline) and asserts the stated band plus the runtime budget.

Two criteria fail by design of the underlying mathematics and hardware, and
the failures are asserted as stated rather than weakened:

* C7: the stated sup-distance normalization converges to the theta-profile
  maximum (27/256 for nu = 1/2), below the [0.8, 1.2] band for every nu;
  the profile-normalized companion value (reported in the failure message
  and checked in test_asymptotics) is the code-correctness check.
* C11: the conditioned population has infinite mean, so the stated Monte
  Carlo workload (n = 1e6 at t up to 1e3 under the DKW censoring bar)
  costs >= 1e17 events; the criterion runs a measured pilot and reports
  the projection. Scaled-down convergence evidence lives in
  test_simulator.py::test_empirical_law_converges_to_limit.
"""

import pytest

from critlab.acceptance import run_criterion

RUNTIME_BUDGETS = {
    "C1": 1.0,
    "C2": 30.0,
    "C3": 10.0,
    "C4": 5.0,
    "C5": 5.0,
    "C6": 30.0,
    "C7": 60.0,
    "C8": 120.0,
    "C9": 10.0,
    "C10": 120.0,
    "C11": 600.0,
    "C12": 5.0,
}


def _run(cid: str):
    res = run_criterion(cid)
    print()
    print(res.line())
    assert res.runtime <= RUNTIME_BUDGETS[cid], (
        f"{cid} exceeded its runtime budget: {res.runtime:.1f}s > {RUNTIME_BUDGETS[cid]}s"
    )
    assert res.passed, "; ".join(res.details)
    return res


def test_c1_closed_form_equivalence():
    _run("C1")


def test_c2_exact_integral_identity():
    _run("C2")


def test_c3_semigroup():
    _run("C3")


def test_c4_survival_second_order():
    _run("C4")


def test_c5_p11_second_order():
    _run("C5")


def test_c6_conditioned_gf_expansion():
    _run("C6")


def test_c7_laplace_sup_rate():
    # expected honest failure: see module docstring
    _run("C7")


def test_c8_invariant_measures():
    _run("C8")


def test_c9_tauberian_partial_sums():
    _run("C9")


def test_c10_monte_carlo_triangle():
    _run("C10")


def test_c11_monte_carlo_ks_rate():
    # expected honest failure: see module docstring
    _run("C11")


def test_c12_baselines():
    _run("C12")
