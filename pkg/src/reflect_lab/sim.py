"""Synthetic testbed: the abstract scale-n task and its Monte-Carlo engines.

A synthetic state is (scale, polarity).  Scale counts the steps still needed;
polarity says whether the chain is still on track.  The self-verifying policy
realizes the rate model of `theory`: on-track proposals stay on track with
probability mu, the verifier false-alarms with e_minus, misses with e_plus,
and rejects everything at derailed states with probability f.

Two engines estimate success probabilities.  The interface engine drives the
generic executors episode by episode and produces full event logs.  The
vector engine simulates the same event chain for whole batches of episodes in
numpy and exists purely for throughput; equivalence of the two is pinned by
tests.  Unless asked otherwise the backtracking mode charges the root its m
attempts like every other state, which is the convention the closed-form
curves price in.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng as rng_mod
from .engines import ReflectConfig, run_rmtp, run_rtbs
from .mtp import (
    Disposition,
    Outcome,
    Query,
    SelfVerifying,
    Step,
    TaskHooks,
    TaskName,
    Verification,
    register_task,
    run_nonreflective,
)
from .theory import PosteriorParams, SimplifiedParams, derived_rates

Z_99 = 2.5758293035489004  # two-sided 99% normal quantile

_CHUNK = 32768
_MODES = ("none", "rmtp", "rtbs")

THREADS_ENV_VAR = "REFLECT_LAB_THREADS"


@dataclass(frozen=True)
class SyntheticState:
    """scale: steps still required; positive: chain still on track."""

    scale: int
    positive: bool


@dataclass(frozen=True)
class SyntheticPolicy:
    """Proposes the next step; the step records which polarity it leads to."""

    params: SimplifiedParams

    def sample(self, state: SyntheticState, rng: np.random.Generator) -> Step:
        if state.scale == 0:
            # Degenerate scale-0 query: restate the already-reached answer.
            return Step(content=state.positive, is_answer=True)
        leads_positive = state.positive and bool(rng.random() < self.params.mu)
        return Step(content=leads_positive, is_answer=state.scale == 1)


@dataclass(frozen=True)
class SyntheticVerifier:
    """Noisy single-label verifier with the model's conditional error rates.

    Conditioning on the proposal's true polarity reproduces the joint law of
    (step quality, verdict) at on-track states branch for branch.
    """

    params: SimplifiedParams

    def verify(
        self, state: SyntheticState, step: Step, rng: np.random.Generator
    ) -> Verification:
        p = self.params
        if not state.positive:
            reject = bool(rng.random() < p.f)
        elif step.content:
            reject = bool(rng.random() < p.e_minus)
        else:
            reject = not bool(rng.random() < p.e_plus)
        return Verification((not reject,))


class SyntheticTransition:
    def apply(self, state: SyntheticState, step: Step) -> SyntheticState:
        return SyntheticState(state.scale - 1, bool(step.content))


def synthetic_self_verifying(params: SimplifiedParams) -> SelfVerifying:
    return SelfVerifying(SyntheticPolicy(params), SyntheticVerifier(params))


def _synthetic_initial(query: Query) -> SyntheticState:
    return SyntheticState(int(query.payload), True)


def _synthetic_check(query: Query, answer: Step) -> bool:
    return bool(answer.content)


def _synthetic_validate(query: Query) -> None:
    if not isinstance(query.payload, int) or isinstance(query.payload, bool):
        raise ValueError("synthetic query payload must be an int scale")
    if query.payload < 0:
        raise ValueError("synthetic scale must be >= 0")


register_task(
    TaskName.SYNTHETIC,
    TaskHooks(
        initial_state=_synthetic_initial,
        check_answer=_synthetic_check,
        validate=_synthetic_validate,
    ),
)


def wilson_ci(successes: int, trials: int, z: float = Z_99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return (0.0, 1.0)
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class SimResult:
    """Monte-Carlo estimate of one (params, n, mode) point."""

    params: SimplifiedParams
    n: int
    mode: str
    m: Optional[int]
    episodes: int
    successes: int
    accuracy_hat: float
    wilson_ci: tuple[float, float]
    mean_length_correct: Optional[float]
    budget_exhausted: int
    seed: int

    @property
    def budget_dominated(self) -> bool:
        """True when more than 0.1% of episodes hit the proposal budget."""
        return self.budget_exhausted > 0.001 * self.episodes


def _threads(threads: Optional[int]) -> int:
    if threads is not None:
        if threads < 1:
            raise ValueError("threads must be >= 1")
        return threads
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def auto_budget(params: SimplifiedParams, n: int, mode: str, m: Optional[int]) -> int:
    """Proposal budget that makes exhaustion negligible for sane rates.

    Scales with the mean retry counts at both polarities; capped so that
    pathological rates degrade into flagged exhaustion instead of hangs.
    """
    if mode == "none":
        return max(n, 1)
    rates = derived_rates(params)
    retry_pos = 1.0 / max(1.0 - rates.alpha, 0.01)
    retry_neg = 1.0 / max(1.0 - params.f, 0.01)
    base = int(48 + 8 * max(n, 1) * (retry_pos + retry_neg))
    if mode == "rtbs":
        base *= max(1, min(int(m or 1), 64))
    return min(base, 1_000_000)


def _posterior_luts(
    posterior: Optional[PosteriorParams],
    params: SimplifiedParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-attempt (beta, beta+gamma) lookup tables; length 1 when constant."""
    if posterior is None:
        r = derived_rates(params)
        return (np.array([r.beta]), np.array([r.beta + r.gamma]))
    beta = np.asarray(posterior.beta, dtype=np.float64)
    gamma = np.asarray(posterior.gamma, dtype=np.float64)
    return (beta, beta + gamma)


def _mc_chunk(
    params: SimplifiedParams,
    n: int,
    mode: str,
    m: Optional[int],
    budget: int,
    root_unlimited: bool,
    episodes: int,
    rng: np.random.Generator,
    posterior: Optional[PosteriorParams],
) -> tuple[int, int, int, int]:
    """Simulate one batch; returns (successes, correct_len_sum, exhausted, done).

    Event-for-event the same chain law as the interface engine: one uniform
    draw decides each proposal's fate, attempts are tracked per state, and
    backtracking pops stored (polarity, attempts) frames.
    """
    if n == 0:
        # One restating answer step per episode, always on track.
        return (episodes, episodes, 0, episodes)
    beta_lut, bg_lut = _posterior_luts(posterior, params)
    lut_top = len(beta_lut) - 1
    one_minus_f = 1.0 - (posterior.f if posterior is not None else params.f)
    track_attempts = mode == "rtbs" or lut_top > 0
    rtbs = mode == "rtbs"
    m_eff = int(m or 1)

    depth = np.zeros(episodes, dtype=np.int32)
    cur_pol = np.ones(episodes, dtype=bool)
    att = np.zeros(episodes, dtype=np.int32)
    proposals = np.zeros(episodes, dtype=np.int32)
    if rtbs:
        att_stack = np.zeros((episodes, n), dtype=np.int32)
        pol_stack = np.zeros((episodes, n), dtype=bool)
        pol_stack[:, 0] = True
    alive = np.ones(episodes, dtype=bool)
    alive_count = episodes

    successes = 0
    correct_len_sum = 0
    exhausted = 0
    done = 0

    while alive_count > 0:
        size = depth.shape[0]
        u = rng.random(size)
        if mode == "none":
            advance = alive & cur_pol & (u < params.mu)
            accepted = alive.copy()
        else:
            if lut_top > 0:
                b = beta_lut[np.minimum(att, lut_top)]
                bg = bg_lut[np.minimum(att, lut_top)]
            else:
                b = beta_lut[0]
                bg = bg_lut[0]
            on_track = alive & cur_pol
            off_track = alive & ~cur_pol
            advance = on_track & (u < b)
            derail = on_track & ~advance & (u < bg)
            accept_neg = off_track & (u < one_minus_f)
            accepted = advance | derail | accept_neg
        np.add(proposals, 1, out=proposals, where=alive)

        last_level = depth == (n - 1)
        finishing = accepted & last_level
        succ_now = finishing & advance
        desc = accepted & ~last_level
        di = np.flatnonzero(desc)
        if di.size:
            if rtbs:
                att_stack[di, depth[di]] = att[di] + 1
                pol_stack[di, depth[di] + 1] = advance[di]
            depth[di] += 1
            cur_pol[di] = advance[di]
            if track_attempts:
                att[di] = 0

        dead_now = np.zeros(size, dtype=bool)
        if mode != "none":
            rejected = alive & ~accepted
            if track_attempts:
                ri = np.flatnonzero(rejected)
                if ri.size:
                    att[ri] += 1
            if rtbs:
                over = rejected & (att >= m_eff)
                if not root_unlimited:
                    dead_now |= over & (depth == 0)
                ni = np.flatnonzero(over & (depth > 0))
                while ni.size:
                    depth[ni] -= 1
                    d = depth[ni]
                    att[ni] = att_stack[ni, d]
                    cur_pol[ni] = pol_stack[ni, d]
                    again = att[ni] >= m_eff
                    at_root = d == 0
                    if not root_unlimited:
                        dr = ni[again & at_root]
                        dead_now[dr] = True
                    ni = ni[again & ~at_root]

        out_of_budget = alive & (proposals >= budget) & ~finishing & ~dead_now

        n_succ = int(np.count_nonzero(succ_now))
        successes += n_succ
        if n_succ:
            correct_len_sum += int(proposals[succ_now].sum())
        exhausted += int(np.count_nonzero(out_of_budget))
        closing = finishing | dead_now | out_of_budget
        n_closing = int(np.count_nonzero(closing))
        if n_closing:
            done += n_closing
            alive &= ~closing
            alive_count -= n_closing
            if alive_count and alive_count <= 0.75 * size:
                keep = alive
                depth = depth[keep]
                cur_pol = cur_pol[keep]
                att = att[keep]
                proposals = proposals[keep]
                if rtbs:
                    att_stack = att_stack[keep]
                    pol_stack = pol_stack[keep]
                alive = np.ones(alive_count, dtype=bool)
    return (successes, correct_len_sum, exhausted, done)


def _validate_mode(mode: str, m: Optional[int]) -> None:
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    if mode == "rtbs":
        if m is None or m < 1:
            raise ValueError("rtbs mode needs a width m >= 1")
    elif m is not None:
        raise ValueError(f"mode {mode!r} takes no width")


def _episode_engine(
    params: SimplifiedParams,
    n: int,
    mode: str,
    m: Optional[int],
    budget: int,
    root_unlimited: bool,
    episodes: int,
    seed: int,
) -> tuple[int, int, int]:
    """Interface-level reference engine; returns (successes, len_sum, exhausted)."""
    query = Query(TaskName.SYNTHETIC, n)
    sv = synthetic_self_verifying(params)
    transition = SyntheticTransition()
    config = ReflectConfig(
        reflective_budget=budget,
        total_budget=budget,
        rtbs_width=m if mode == "rtbs" else budget + 1,
        root_unlimited=root_unlimited,
    )
    successes = 0
    len_sum = 0
    exhausted = 0
    for episode in range(episodes):
        erng = rng_mod.stream(seed, episode)
        if mode == "none":
            record = run_nonreflective(sv.policy, transition, query, max(n, 1), erng)
        elif mode == "rmtp":
            record = run_rmtp(sv, transition, query, config, erng)
        else:
            record = run_rtbs(sv, transition, query, config, erng)
        if record.outcome is Outcome.CORRECT:
            successes += 1
            len_sum += sum(
                1 for e in record.events if e.disposition is not Disposition.TRACEBACK
            )
        elif record.outcome is Outcome.BUDGET_EXHAUSTED:
            exhausted += 1
    return (successes, len_sum, exhausted)


def simulate_accuracy(
    params: SimplifiedParams,
    n: int,
    mode: str,
    episodes: int,
    seed: int,
    *,
    m: Optional[int] = None,
    budget: Optional[int] = None,
    threads: Optional[int] = None,
    engine: str = "vector",
    posterior: Optional[PosteriorParams] = None,
    root_unlimited: bool = False,
) -> SimResult:
    """Estimate the success probability of one executor mode at scale n.

    Episodes are split into fixed-size batches, each on its own derived
    random stream, so results do not depend on the thread count.  The budget
    defaults high enough that exhaustion stays a rounding error for sane
    rates; exhausted episodes count as failures and are tallied in the
    result.
    """
    _validate_mode(mode, m)
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    if engine not in ("vector", "episode"):
        raise ValueError("engine must be 'vector' or 'episode'")
    if posterior is not None and engine != "vector":
        raise ValueError("per-attempt rates are supported by the vector engine only")
    budget = budget if budget is not None else auto_budget(params, n, mode, m)

    if engine == "episode":
        successes, len_sum, exhausted = _episode_engine(
            params, n, mode, m, budget, root_unlimited, episodes, seed
        )
    else:
        spans = [
            (i, min(_CHUNK, episodes - start))
            for i, start in enumerate(range(0, episodes, _CHUNK))
        ]

        def run_span(span: tuple[int, int]) -> tuple[int, int, int, int]:
            index, count = span
            return _mc_chunk(
                params,
                n,
                mode,
                m,
                budget,
                root_unlimited,
                count,
                rng_mod.stream(seed, index),
                posterior,
            )

        workers = min(_threads(threads), len(spans))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(run_span, spans))
        else:
            parts = [run_span(s) for s in spans]
        successes = sum(p[0] for p in parts)
        len_sum = sum(p[1] for p in parts)
        exhausted = sum(p[2] for p in parts)

    return SimResult(
        params=params,
        n=n,
        mode=mode,
        m=m,
        episodes=episodes,
        successes=successes,
        accuracy_hat=successes / episodes,
        wilson_ci=wilson_ci(successes, episodes),
        mean_length_correct=(len_sum / successes) if successes else None,
        budget_exhausted=exhausted,
        seed=seed,
    )


def simulate_length(
    params: SimplifiedParams,
    n: int,
    episodes: int,
    seed: int,
    *,
    budget: Optional[int] = None,
    threads: Optional[int] = None,
) -> float:
    """Mean proposal count among retry-in-place episodes that end correctly.

    Counts every proposal, rejected ones included.  Raises when no episode
    succeeds; callers should confirm the success rate is workable first.
    """
    result = simulate_accuracy(
        params, n, "rmtp", episodes, seed, budget=budget, threads=threads
    )
    if result.successes == 0:
        raise ValueError("no correct episodes observed; cannot estimate length")
    assert result.mean_length_correct is not None
    return result.mean_length_correct


@dataclass(frozen=True)
class CrossoverResult:
    """Smallest scale at which width-m backtracking overtakes retry-in-place."""

    n_star: Optional[int]
    checked_n: Optional[int]
    mc_confirmed: Optional[bool]
    mc_rtbs: Optional[SimResult]
    mc_rmtp: Optional[SimResult]


def crossover_scan(
    params: SimplifiedParams,
    m: int,
    n_max: int,
    episodes: int,
    seed: int,
    *,
    threads: Optional[int] = None,
) -> CrossoverResult:
    """Scan scales 1..n_max for the first backtracking advantage.

    The scan itself runs on the closed-form curves; when episodes > 0 the
    ordering is additionally confirmed by Monte-Carlo a little past the
    crossover (at n_star + 5, clamped to n_max).
    """
    from .theory import rho_rmtp, rtbs_table

    table = rtbs_table(params, m, n_max)
    rtbs_acc = 1.0
    n_star: Optional[int] = None
    for n in range(1, n_max + 1):
        rtbs_acc *= float(table.sigma[n])
        if rtbs_acc > rho_rmtp(params, n):
            n_star = n
            break
    if n_star is None or episodes <= 0:
        return CrossoverResult(n_star, None, None, None, None)
    checked_n = min(n_star + 5, n_max)
    mc_rtbs = simulate_accuracy(
        params, checked_n, "rtbs", episodes, seed, m=m, threads=threads
    )
    mc_rmtp = simulate_accuracy(params, checked_n, "rmtp", episodes, seed + 1, threads=threads)
    return CrossoverResult(
        n_star=n_star,
        checked_n=checked_n,
        mc_confirmed=mc_rtbs.accuracy_hat > mc_rmtp.accuracy_hat,
        mc_rtbs=mc_rtbs,
        mc_rmtp=mc_rmtp,
    )
