"""Monte-Carlo engine tests: determinism, thread invariance, agreement with
the closed forms, and agreement between the vectorized and interface-level
engines."""

import numpy as np
import pytest

from reflect_lab import rng as rng_mod
from reflect_lab.metrics import binomial_zscore
from reflect_lab.sim import (
    SimplifiedParams,
    auto_budget,
    crossover_scan,
    simulate_accuracy,
    simulate_length,
    wilson_ci,
)
from reflect_lab.theory import (
    PosteriorParams,
    posterior_rho_rmtp,
    posterior_rtbs_table,
    rho_nonreflective,
    rho_rmtp,
    rho_rtbs,
)

# Fixed seed under which the 450-point random-grid agreement check below
# holds at 3 standard deviations (max |z| observed: 2.77).  Joint 3-sigma
# tests fail for a fair fraction of seeds by chance alone, so the seed is
# pinned and the check is exact regression, not a flaky hypothesis.
GRID_SEED = 42


# --- Wilson interval ---


def test_wilson_ci_basic_properties():
    lo, hi = wilson_ci(80, 100)
    assert 0.0 <= lo < 0.8 < hi <= 1.0
    assert wilson_ci(0, 0) == (0.0, 1.0)
    assert wilson_ci(0, 50)[0] == 0.0
    assert wilson_ci(50, 50)[1] == 1.0


def test_wilson_ci_width_shrinks_like_root_n():
    w1 = np.diff(wilson_ci(400, 1000))[0]
    w2 = np.diff(wilson_ci(800, 2000))[0]
    assert w2 == pytest.approx(w1 / np.sqrt(2.0), rel=0.05)


# --- budgets and validation ---


def test_auto_budget_shapes(ref_params):
    assert auto_budget(ref_params, 12, "none", None) == 12
    assert auto_budget(ref_params, 0, "none", None) == 1
    rmtp_b = auto_budget(ref_params, 10, "rmtp", None)
    assert rmtp_b > 10
    assert auto_budget(ref_params, 20, "rmtp", None) > rmtp_b
    assert auto_budget(ref_params, 10, "rtbs", 4) == min(rmtp_b * 4, 1_000_000)
    assert auto_budget(ref_params, 10, "rtbs", 10_000) <= 1_000_000


def test_simulate_accuracy_argument_validation(ref_params):
    with pytest.raises(ValueError):
        simulate_accuracy(ref_params, 3, "bogus", 10, 0)
    with pytest.raises(ValueError):
        simulate_accuracy(ref_params, 3, "rtbs", 10, 0)  # width missing
    with pytest.raises(ValueError):
        simulate_accuracy(ref_params, 3, "rmtp", 10, 0, m=4)  # width meaningless
    with pytest.raises(ValueError):
        simulate_accuracy(ref_params, 3, "rmtp", 0, 0)
    with pytest.raises(ValueError):
        simulate_accuracy(ref_params, -1, "rmtp", 10, 0)
    with pytest.raises(ValueError):
        simulate_accuracy(ref_params, 3, "rmtp", 10, 0, engine="gpu")


# --- determinism ---


def test_same_seed_same_result(ref_params):
    a = simulate_accuracy(ref_params, 6, "rmtp", 5000, 123, threads=1)
    b = simulate_accuracy(ref_params, 6, "rmtp", 5000, 123, threads=1)
    assert a.successes == b.successes
    assert a.budget_exhausted == b.budget_exhausted
    c = simulate_accuracy(ref_params, 6, "rmtp", 5000, 124, threads=1)
    assert c.successes != a.successes  # different stream, almost surely


def test_thread_count_does_not_change_results(ref_params, monkeypatch):
    # 70k episodes span three fixed-size chunks; scheduling must not matter.
    a = simulate_accuracy(ref_params, 5, "rtbs", 70_000, 9, m=4, threads=1)
    b = simulate_accuracy(ref_params, 5, "rtbs", 70_000, 9, m=4, threads=4)
    assert a.successes == b.successes
    monkeypatch.setenv("REFLECT_LAB_THREADS", "3")
    c = simulate_accuracy(ref_params, 5, "rtbs", 70_000, 9, m=4)
    assert c.successes == a.successes


# --- agreement with closed forms ---


def test_mc_matches_theory_on_random_grid():
    """50 random non-trivial tuples, n in {1, 3, 8}, all modes, |z| <= 3."""
    draw = rng_mod.stream(GRID_SEED, 999)
    episodes = 20_000
    index = 0
    for _ in range(50):
        params = SimplifiedParams(
            mu=float(draw.uniform(0.55, 0.95)),
            e_minus=float(draw.uniform(0.05, 0.45)),
            e_plus=float(draw.uniform(0.05, 0.45)),
            f=float(draw.uniform(0.3, 0.95)),
        )
        for n in (1, 3, 8):
            for mode, m in (("none", None), ("rmtp", None), ("rtbs", 3)):
                if mode == "none":
                    theory = rho_nonreflective(params, n)
                elif mode == "rmtp":
                    theory = rho_rmtp(params, n)
                else:
                    theory = rho_rtbs(params, m, n)
                result = simulate_accuracy(
                    params,
                    n,
                    mode,
                    episodes,
                    rng_mod.derive_key(GRID_SEED, index)[1],
                    m=m,
                    threads=1,
                )
                index += 1
                z = binomial_zscore(result.successes, episodes, theory)
                assert abs(z) <= 3.0, (params, n, mode, result.accuracy_hat, theory, z)


def test_interface_engine_agrees_with_vector_engine(ref_params):
    # The slow per-episode engine drives the real executors; the vectorized
    # engine must land within sampling error of it and of the closed form.
    theory = rho_rmtp(ref_params, 5)
    ep = simulate_accuracy(ref_params, 5, "rmtp", 20_000, 31, engine="episode")
    vec = simulate_accuracy(ref_params, 5, "rmtp", 20_000, 32, engine="vector", threads=1)
    assert abs(binomial_zscore(ep.successes, ep.episodes, theory)) <= 3.0
    assert abs(binomial_zscore(vec.successes, vec.episodes, theory)) <= 3.0


def test_interface_engine_agrees_for_backtracking(ref_params):
    theory = rho_rtbs(ref_params, 2, 5)
    ep = simulate_accuracy(ref_params, 5, "rtbs", 20_000, 33, m=2, engine="episode")
    assert abs(binomial_zscore(ep.successes, ep.episodes, theory)) <= 3.0


# --- root attempt semantics ---


def test_unlimited_root_beats_capped_root(ref_params):
    capped = simulate_accuracy(ref_params, 10, "rtbs", 50_000, 7, m=4, threads=1)
    unlimited = simulate_accuracy(
        ref_params, 10, "rtbs", 50_000, 7, m=4, threads=1, root_unlimited=True
    )
    # The gap is ~3.7 points here, far beyond MC noise at 50k episodes.
    assert unlimited.accuracy_hat - capped.accuracy_hat > 0.02


def test_capped_root_matches_closed_form_unlimited_does_not(ref_params):
    theory = rho_rtbs(ref_params, 4, 10)
    capped = simulate_accuracy(ref_params, 10, "rtbs", 50_000, 7, m=4, threads=1)
    unlimited = simulate_accuracy(
        ref_params, 10, "rtbs", 50_000, 7, m=4, threads=1, root_unlimited=True
    )
    assert abs(binomial_zscore(capped.successes, capped.episodes, theory)) <= 3.0
    assert binomial_zscore(unlimited.successes, unlimited.episodes, theory) > 10.0


# --- budget exhaustion ---


def test_budget_exhaustion_is_flagged(ref_params):
    tight = simulate_accuracy(ref_params, 8, "rmtp", 4000, 5, budget=9, threads=1)
    assert tight.budget_exhausted > 0
    assert tight.budget_dominated
    roomy = simulate_accuracy(ref_params, 8, "rmtp", 4000, 5, threads=1)
    assert roomy.budget_exhausted == 0
    assert not roomy.budget_dominated
    assert tight.accuracy_hat < roomy.accuracy_hat


# --- conditional solution length ---


def test_mean_length_matches_closed_form(ref_params):
    # n / (beta + gamma) = 10 / 0.6 at the reference point.
    mean = simulate_length(ref_params, 10, 50_000, 11, threads=1)
    assert mean == pytest.approx(10.0 / 0.6, rel=0.02)


def test_simulate_length_requires_successes():
    stuck = SimplifiedParams(mu=0.0, e_minus=0.5, e_plus=0.0, f=0.9)
    with pytest.raises(ValueError):
        simulate_length(stuck, 3, 200, 0, budget=50, threads=1)


# --- crossover scan ---


def test_crossover_scan_reference_point(ref_params):
    res = crossover_scan(ref_params, 4, 30, episodes=4000, seed=13, threads=1)
    assert res.n_star == 3  # first scale where width-4 search wins
    assert res.checked_n == 8
    assert res.mc_confirmed is True
    assert res.mc_rtbs.accuracy_hat > res.mc_rmtp.accuracy_hat


def test_crossover_scan_theory_only(ref_params):
    res = crossover_scan(ref_params, 4, 30, episodes=0, seed=0)
    assert res.n_star == 3
    assert res.mc_confirmed is None and res.mc_rtbs is None


def test_crossover_scan_no_crossover(ref_params):
    # Width one never overtakes retry-in-place at these rates.
    res = crossover_scan(ref_params, 1, 50, episodes=1000, seed=0)
    assert res.n_star is None
    assert res.mc_confirmed is None


# --- attempt-indexed rates in the vector engine ---


def test_constant_posterior_reproduces_plain_run(ref_params):
    plain = simulate_accuracy(ref_params, 6, "rmtp", 30_000, 21, threads=1)
    const = PosteriorParams(
        mu=(ref_params.mu,), e_minus=(ref_params.e_minus,), e_plus=(ref_params.e_plus,), f=ref_params.f
    )
    post = simulate_accuracy(ref_params, 6, "rmtp", 30_000, 21, threads=1, posterior=const)
    assert post.successes == plain.successes  # identical draws, identical path


def test_posterior_mc_matches_posterior_theory():
    pparams = PosteriorParams(
        mu=(0.9, 0.6, 0.4), e_minus=(0.1, 0.1, 0.1), e_plus=(0.05, 0.05, 0.05), f=0.8
    )
    base = SimplifiedParams(0.9, 0.1, 0.05, 0.8)
    n, episodes = 5, 30_000
    rmtp = simulate_accuracy(base, n, "rmtp", episodes, 22, threads=1, posterior=pparams)
    z = binomial_zscore(rmtp.successes, episodes, posterior_rho_rmtp(pparams, n))
    assert abs(z) <= 3.0

    table = posterior_rtbs_table(pparams, 3, n)
    theory_rtbs = float(np.prod(table.sigma[1 : n + 1]))
    rtbs = simulate_accuracy(
        base, n, "rtbs", episodes, 23, m=3, threads=1, posterior=pparams
    )
    z = binomial_zscore(rtbs.successes, episodes, theory_rtbs)
    assert abs(z) <= 3.0


def test_decaying_rates_hurt_accuracy(ref_params):
    decaying = PosteriorParams(
        mu=(0.8, 0.4), e_minus=(0.3, 0.3), e_plus=(0.2, 0.2), f=0.8
    )
    plain = simulate_accuracy(ref_params, 6, "rmtp", 30_000, 24, threads=1)
    post = simulate_accuracy(ref_params, 6, "rmtp", 30_000, 24, threads=1, posterior=decaying)
    assert post.accuracy_hat < plain.accuracy_hat - 0.02


def test_posterior_requires_vector_engine(ref_params):
    const = PosteriorParams(
        mu=(ref_params.mu,), e_minus=(ref_params.e_minus,), e_plus=(ref_params.e_plus,), f=ref_params.f
    )
    with pytest.raises(ValueError):
        simulate_accuracy(ref_params, 3, "rmtp", 100, 0, posterior=const, engine="episode")
