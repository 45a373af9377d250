"""Closed-form accuracy theory for the synthetic self-verification model.

The model: solving a scale-n problem takes n consecutive steps.  At an
on-track ("positive") state the policy proposes a step that stays on track
with probability mu; a verifier rejects on-track steps with probability
e_minus and accepts derailing steps with probability e_plus.  At a derailed
("negative") state every proposal derails further and is rejected with
probability f.  Rejected proposals are retried in place (unbounded retries)
or, under width-limited backtracking, charged against a per-state attempt
cap m with failures propagating to the parent state.

Everything here is exact arithmetic on those transition rates: success
probabilities for the plain, retry-in-place, and backtracking executors,
the recursions behind the backtracking curve, asymptotic comparison
predicates, expected solution length, and per-attempt ("posterior")
generalizations where the rates depend on how many attempts a state has
already consumed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

_SERIES_TOL = 1e-15
_SERIES_MAX_TERMS = 10**6
_BISECT_TOL = 1e-12


def _check_prob(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must be in [0, 1], got {value!r}")


@dataclass(frozen=True)
class SimplifiedParams:
    """Rates of the synthetic model.

    mu: chance a proposal from an on-track state stays on track.
    e_minus: chance the verifier rejects an on-track proposal (false alarm).
    e_plus: chance the verifier accepts a derailing proposal (miss).
    f: chance the verifier rejects any proposal at a derailed state.
    """

    mu: float
    e_minus: float
    e_plus: float
    f: float

    def __post_init__(self) -> None:
        for name in ("mu", "e_minus", "e_plus", "f"):
            _check_prob(name, getattr(self, name))


@dataclass(frozen=True)
class DerivedRates:
    """Per-proposal branch probabilities at an on-track state.

    alpha: proposal rejected (either kind), state unchanged.
    beta: on-track step accepted, chain advances correctly.
    gamma: derailing step accepted, chain derails.
    The three sum to one.
    """

    alpha: float
    beta: float
    gamma: float


def derived_rates(params: SimplifiedParams) -> DerivedRates:
    mu, em, ep = params.mu, params.e_minus, params.e_plus
    beta = mu * (1.0 - em)
    gamma = (1.0 - mu) * ep
    alpha = mu * em + (1.0 - mu) * (1.0 - ep)
    return DerivedRates(alpha=alpha, beta=beta, gamma=gamma)


def rho_nonreflective(params: SimplifiedParams, n: int) -> float:
    """Success probability of the unverified chain: all n steps on track."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return params.mu**n


def rho_rmtp(params: SimplifiedParams, n: int) -> float:
    """Success probability of retry-in-place with unbounded attempts.

    Each advance is on track with probability beta/(1 - alpha); a single
    accepted derail is unrecoverable.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 1.0
    rates = derived_rates(params)
    denom = 1.0 - rates.alpha
    if denom <= 0.0:
        warnings.warn(
            "every proposal is rejected (alpha = 1); the chain never advances",
            RuntimeWarning,
            stacklevel=2,
        )
        return 0.0
    return (rates.beta / denom) ** n


def log_rho_rmtp(params: SimplifiedParams, n: int) -> float:
    """log of rho_rmtp, safe for n large enough to underflow the product."""
    if n == 0:
        return 0.0
    rates = derived_rates(params)
    denom = 1.0 - rates.alpha
    if denom <= 0.0 or rates.beta == 0.0:
        return -math.inf
    return n * math.log(rates.beta / denom)


def _geometric_sum(ratio: float, terms: int) -> float:
    """sum_{i=0}^{terms-1} ratio^i with the ratio-one singularity removed."""
    if ratio <= 0.0:
        return 1.0
    if ratio >= 1.0:
        return float(terms)
    # 1 - ratio**terms via expm1 to keep precision when ratio is near one.
    return -math.expm1(terms * math.log(ratio)) / (1.0 - ratio)


@dataclass(frozen=True)
class RtbsRecursionTable:
    """Recursion values for width-m backtracking, indexed by scale 0..n_max.

    delta[t]: chance one attempt at an on-track scale-t state fails
        (instant rejection, or acceptance whose subtree later fails).
    epsilon[t]: same for a derailed scale-t state.
    sigma[t]: chance a scale-t state advances on track within its m
        attempts; the backtracking success probability at scale n is the
        product of sigma over scales 1..n.
    phi, psi: delta**m and epsilon**m (whole-state failure chances).
    """

    params: SimplifiedParams
    m: int
    delta: np.ndarray
    epsilon: np.ndarray
    sigma: np.ndarray
    phi: np.ndarray
    psi: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.delta) - 1


def rtbs_table(params: SimplifiedParams, m: int, n_max: int) -> RtbsRecursionTable:
    """Tabulate the backtracking recursion up to scale n_max."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    rates = derived_rates(params)
    f = params.f
    delta = np.zeros(n_max + 1)
    epsilon = np.zeros(n_max + 1)
    for t in range(1, n_max + 1):
        phi_prev = delta[t - 1] ** m
        psi_prev = epsilon[t - 1] ** m
        delta[t] = rates.alpha + rates.beta * phi_prev + rates.gamma * psi_prev
        epsilon[t] = f + (1.0 - f) * psi_prev
    sigma = np.array([rates.beta * _geometric_sum(d, m) for d in delta])
    return RtbsRecursionTable(
        params=params,
        m=m,
        delta=delta,
        epsilon=epsilon,
        sigma=sigma,
        phi=delta**m,
        psi=epsilon**m,
    )


def rho_rtbs(params: SimplifiedParams, m: int, n: int) -> float:
    """Success probability of width-m backtracking at scale n.

    Every state, the root included, is charged at most m attempts.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    table = rtbs_table(params, m, n)
    return float(np.prod(table.sigma[1 : n + 1]))


def log_rho_rtbs(params: SimplifiedParams, m: int, n: int) -> float:
    """log of rho_rtbs, safe for large n."""
    table = rtbs_table(params, m, n)
    sig = table.sigma[1 : n + 1]
    if np.any(sig <= 0.0):
        return -math.inf
    return float(np.sum(np.log(sig)))


def rmtp_improves(params: SimplifiedParams) -> bool:
    """Retry-in-place beats (or ties) the plain chain iff the two verifier
    error rates sum to at most one."""
    return params.e_minus + params.e_plus <= 1.0


def rtbs_asymptotically_beats_rmtp(params: SimplifiedParams, m: int) -> bool:
    """Width-m backtracking eventually beats retry-in-place iff derailed
    states are rejected more often than on-track attempts fail (f > alpha)
    and the width exceeds the mean retry count 1/(1 - alpha)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rates = derived_rates(params)
    if rates.alpha >= 1.0:
        return False
    return params.f > rates.alpha and m > 1.0 / (1.0 - rates.alpha)


def expected_solution_length(params: SimplifiedParams, n: int) -> float:
    """Mean number of proposals in a retry-in-place run that ends correctly.

    Each of the n advances costs a geometric number of attempts with success
    rate 1 - alpha.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    rates = derived_rates(params)
    denom = rates.beta + rates.gamma  # equals 1 - alpha
    if denom <= 0.0:
        raise ValueError(
            "every proposal is rejected; a correct answer is never reached"
        )
    return n / denom


def sigma_stability_band(params: SimplifiedParams) -> tuple[float, float]:
    """Width interval [1/beta, 1/(1-f)] on which the per-scale advance
    probability sigma converges to one as the scale grows.

    Raises when beta is zero or when the interval is empty (beta < 1 - f).
    """
    rates = derived_rates(params)
    if rates.beta <= 0.0:
        raise ValueError("advance rate beta is zero; no width can stabilize")
    lo = 1.0 / rates.beta
    hi = math.inf if params.f >= 1.0 else 1.0 / (1.0 - params.f)
    if lo > hi:
        raise ValueError(
            f"stability band is empty: 1/beta = {lo:.6g} exceeds 1/(1-f) = {hi:.6g}"
        )
    return (lo, hi)


def epsilon_fixed_point(f: float, m: int) -> float:
    """Smallest solution of x = f + (1-f) * x**m in [0, 1].

    This is the limiting per-attempt failure rate at derailed states.  The
    fixed point is strictly below one iff f < (m-1)/m; at or above that
    threshold the only root in [0, 1] is one.  Solved by bisection to 1e-12.
    """
    _check_prob("f", f)
    if m < 1:
        raise ValueError("m must be >= 1")
    if f == 0.0:
        return 0.0
    if m == 1 or f >= (m - 1) / m:
        return 1.0
    # The objective f + (1-f) x^m - x is positive at x = f, has its minimum
    # at x_min = (m (1-f))^(-1/(m-1)) where it is negative, and returns to
    # zero at x = 1.  The smallest root therefore lies in (f, x_min).
    lo = f
    hi = (1.0 / (m * (1.0 - f))) ** (1.0 / (m - 1))

    def objective(x: float) -> float:
        return f + (1.0 - f) * x**m - x

    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if objective(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class PosteriorParams:
    """Per-attempt rates: attempt i at a state has its own mu and errors.

    The sequences share one length; attempts beyond it reuse the final
    entry.  Verifier behavior at derailed states keeps a single rate f.
    The induced advance rates must be nonincreasing and the induced derail
    rates nondecreasing in the attempt index (later attempts are never more
    promising).  `decay_floor` optionally pins the known lower bound on the
    ratio of consecutive advance rates; when absent it is measured from the
    sequences.
    """

    mu: tuple[float, ...]
    e_minus: tuple[float, ...]
    e_plus: tuple[float, ...]
    f: float
    decay_floor: Optional[float] = None

    def __post_init__(self) -> None:
        if not (len(self.mu) == len(self.e_minus) == len(self.e_plus)):
            raise ValueError("per-attempt sequences must share one length")
        if len(self.mu) == 0:
            raise ValueError("per-attempt sequences must be non-empty")
        for seq, name in ((self.mu, "mu"), (self.e_minus, "e_minus"), (self.e_plus, "e_plus")):
            for v in seq:
                _check_prob(name, v)
        _check_prob("f", self.f)
        if self.decay_floor is not None and not (0.0 < self.decay_floor <= 1.0):
            raise ValueError("decay_floor must be in (0, 1]")
        beta = self.beta
        gamma = self.gamma
        if any(b1 > b0 + 1e-12 for b0, b1 in zip(beta, beta[1:])):
            raise ValueError("induced advance rates must be nonincreasing")
        if any(g1 < g0 - 1e-12 for g0, g1 in zip(gamma, gamma[1:])):
            raise ValueError("induced derail rates must be nondecreasing")

    @cached_property
    def alpha(self) -> tuple[float, ...]:
        return tuple(
            m * em + (1.0 - m) * (1.0 - ep)
            for m, em, ep in zip(self.mu, self.e_minus, self.e_plus)
        )

    @cached_property
    def beta(self) -> tuple[float, ...]:
        return tuple(m * (1.0 - em) for m, em in zip(self.mu, self.e_minus))

    @cached_property
    def gamma(self) -> tuple[float, ...]:
        return tuple((1.0 - m) * ep for m, ep in zip(self.mu, self.e_plus))

    def at(self, attempt: int) -> tuple[float, float, float]:
        """(alpha, beta, gamma) for 1-based attempt index, tail-extended."""
        i = min(attempt, len(self.mu)) - 1
        if i < 0:
            raise ValueError("attempt index must be >= 1")
        return (self.alpha[i], self.beta[i], self.gamma[i])


def posterior_rho_rmtp(pparams: PosteriorParams, n: int) -> float:
    """Retry-in-place success probability with attempt-indexed rates.

    The per-advance success rate is the series
    beta_1 + sum_{i >= 2} beta_i * prod_{j < i} alpha_j, truncated once the
    remaining mass is provably below 1e-15.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    per_step = 0.0
    prefix = 1.0  # prod of alpha_j over attempts strictly before i
    i = 1
    while i <= _SERIES_MAX_TERMS:
        alpha_i, beta_i, _ = pparams.at(i)
        per_step += beta_i * prefix
        prefix *= alpha_i
        i += 1
        if i >= len(pparams.mu):
            alpha_tail, beta_tail, _ = pparams.at(i)
            if beta_tail == 0.0:
                break
            if alpha_tail < 1.0 and prefix * beta_tail / (1.0 - alpha_tail) < _SERIES_TOL:
                break
        if prefix < _SERIES_TOL:
            break
    return per_step**n


@dataclass(frozen=True)
class PosteriorRtbsTable:
    """Backtracking recursion with attempt-indexed rates.

    delta has shape (n_max+1, m): column i-1 is the failure chance of the
    i-th attempt at an on-track state of that scale.  epsilon and sigma are
    as in the constant-rate table.
    """

    pparams: PosteriorParams
    m: int
    delta: np.ndarray
    epsilon: np.ndarray
    sigma: np.ndarray


def posterior_rtbs_table(
    pparams: PosteriorParams, m: int, n_max: int
) -> PosteriorRtbsTable:
    """Tabulate the attempt-indexed backtracking recursion up to n_max."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    abg = [pparams.at(i) for i in range(1, m + 1)]
    f = pparams.f
    delta = np.zeros((n_max + 1, m))
    epsilon = np.zeros(n_max + 1)
    sigma = np.zeros(n_max + 1)
    sigma[0] = abg[0][1]
    for t in range(1, n_max + 1):
        subtree_fail = float(np.prod(delta[t - 1]))
        psi_prev = epsilon[t - 1] ** m
        for i in range(m):
            alpha_i, beta_i, gamma_i = abg[i]
            delta[t, i] = alpha_i + beta_i * subtree_fail + gamma_i * psi_prev
        epsilon[t] = f + (1.0 - f) * psi_prev
        acc = abg[0][1]
        running = 1.0
        for j in range(1, m):
            running *= delta[t, j - 1]
            acc += abg[j][1] * running
        sigma[t] = acc
    return PosteriorRtbsTable(pparams=pparams, m=m, delta=delta, epsilon=epsilon, sigma=sigma)


def posterior_sufficient_condition(pparams: PosteriorParams) -> bool:
    """Sufficient test for retry-in-place to beat the plain chain when rates
    decay with the attempt index:
    e_minus_1 / (k * (1 - mu_1)) + sup_i e_plus_i < 1, with k the smallest
    ratio of consecutive advance rates."""
    mu1 = pparams.mu[0]
    if mu1 >= 1.0:
        raise ValueError("mu_1 must be < 1 for the sufficient condition")
    if pparams.decay_floor is not None:
        k = pparams.decay_floor
    else:
        beta = pparams.beta
        ratios = [b1 / b0 for b0, b1 in zip(beta, beta[1:]) if b0 > 0.0]
        # Attempts beyond the sequence reuse the last entry (ratio one).
        k = min(ratios + [1.0])
    if k <= 0.0:
        return False
    return pparams.e_minus[0] / (k * (1.0 - mu1)) + max(pparams.e_plus) < 1.0


def curve_table(
    params: SimplifiedParams, m_list: tuple[int, ...], n_max: int
) -> str:
    """CSV of accuracy curves: n, plain chain, retry-in-place, and one
    backtracking column per width in m_list."""
    tables = {m: rtbs_table(params, m, n_max) for m in m_list}
    header = ["n", "rho", "rho_rmtp"] + [f"rho_rtbs_m{m}" for m in m_list]
    lines = [",".join(header)]
    rtbs_running = {m: 1.0 for m in m_list}
    for n in range(n_max + 1):
        if n >= 1:
            for m in m_list:
                rtbs_running[m] *= float(tables[m].sigma[n])
        row = [str(n), repr(rho_nonreflective(params, n)), repr(rho_rmtp(params, n))]
        row += [repr(rtbs_running[m]) for m in m_list]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
