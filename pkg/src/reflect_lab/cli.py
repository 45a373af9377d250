"""Command-line front end for reproducible desk-scale experiments.

Every command resolves its flags into a config, writes its output file(s),
and drops a `<out>.manifest.json` next to them holding the full resolved
config, the seed, and the package version.  Re-running a command with the
flags recorded in a manifest reproduces the output byte for byte.

Exit codes: 0 on success, 3 when a result is statistically degenerate
(budget exhaustion above one episode in a thousand), and click's usage
errors otherwise.
"""

from __future__ import annotations

import json
import sys
from typing import Optional

import click

from . import __version__
from . import rng as rng_mod
from .corpus import (
    DEFAULT_EXAMPLE_COUNTS,
    CorpusSpec,
    CotStyle,
    generate_corpus,
    write_examples,
    write_records,
    read_records,
)
from .engines import ReflectConfig, run_rmtp, run_rtbs
from .metrics import (
    accuracy_table,
    binomial_zscore,
    estimate_verification_errors,
    report_to_csv,
    theory_vs_sim_rows,
)
from .mtp import (
    DifficultyTier,
    Outcome,
    SelfVerifying,
    TaskName,
    run_nonreflective,
)
from .sim import simulate_accuracy
from .tasks import (
    OracleVerifier,
    binary_verifier,
    detailed_verifier,
    expert_policy,
    gen_query,
    make_noisy_policy,
    make_noisy_verifier,
    step_leads_positive,
    transition_for,
)
from .theory import SimplifiedParams, curve_table, rho_nonreflective, rho_rmtp, rho_rtbs

_TIER_CHOICES = [t.value for t in DifficultyTier]
_TASK_CHOICES = [TaskName.MULT.value, TaskName.SUDOKU.value]
_STYLE_CHOICES = [s.value for s in CotStyle]

_params_options = [
    click.option("--mu", type=float, required=True, help="On-track proposal rate."),
    click.option("--e-minus", type=float, required=True, help="False rejection rate."),
    click.option("--e-plus", type=float, required=True, help="False acceptance rate."),
    click.option("--f", type=float, required=True, help="Rejection rate at derailed states."),
]


def _with_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


def _write_manifest(out: str, command: str, config: dict) -> None:
    manifest = {"command": command, "version": __version__, **config}
    with open(f"{out}.manifest.json", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, indent=2))
        fh.write("\n")


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _check_format(fmt: str, allowed: str) -> None:
    if fmt != allowed:
        raise click.BadParameter(f"this command writes {allowed} output only")


def _parse_tier_mix(text: str) -> tuple[tuple[DifficultyTier, float], ...]:
    mix = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        name, sep, value = part.partition("=")
        if not sep:
            raise click.BadParameter(
                f"tier mix entries look like id_easy=0.5, got {part!r}"
            )
        try:
            mix.append((DifficultyTier(name.strip()), float(value)))
        except ValueError as exc:
            raise click.BadParameter(str(exc)) from exc
    if not mix:
        raise click.BadParameter("tier mix must name at least one tier")
    return tuple(mix)


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Desk-scale experiments on reflective step-wise reasoning."""


@main.command("theory-curve")
@_with_options(_params_options)
@click.option("--m", "m_list", type=int, multiple=True, default=(1, 2, 4, 16, 64),
              show_default=True, help="Backtracking widths, one column each.")
@click.option("--n", "n_max", type=int, default=30, show_default=True,
              help="Largest scale tabulated.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["csv"]), default="csv")
def cmd_theory_curve(mu, e_minus, e_plus, f, m_list, n_max, out, fmt) -> None:
    """Tabulate the closed-form accuracy curves to CSV."""
    _check_format(fmt, "csv")
    params = SimplifiedParams(mu=mu, e_minus=e_minus, e_plus=e_plus, f=f)
    _write_text(out, curve_table(params, tuple(m_list), n_max))
    _write_manifest(out, "theory-curve", {
        "mu": mu, "e_minus": e_minus, "e_plus": e_plus, "f": f,
        "m": list(m_list), "n": n_max, "out": out, "format": fmt,
    })


@main.command("simulate")
@_with_options(_params_options)
@click.option("--mode", type=click.Choice(["none", "rmtp", "rtbs"]), required=True)
@click.option("--m", type=int, default=None, help="Backtracking width (rtbs only).")
@click.option("--n", type=int, required=True, help="Problem scale.")
@click.option("--episodes", type=int, default=200_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--budget", type=int, default=None,
              help="Proposal budget per episode; default scales with the rates.")
@click.option("--threads", type=int, default=None,
              help="Worker threads; REFLECT_LAB_THREADS, then all cores.")
@click.option("--engine", type=click.Choice(["vector", "episode"]), default="vector",
              show_default=True)
@click.option("--root-unlimited", is_flag=True, default=False,
              help="Give the backtracking root unlimited attempts (deployed "
                   "behavior; the closed forms assume a capped root).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["csv"]), default="csv")
def cmd_simulate(mu, e_minus, e_plus, f, mode, m, n, episodes, seed, budget,
                 threads, engine, root_unlimited, out, fmt) -> None:
    """Monte-Carlo estimate of one (params, n, mode) point, with theory."""
    _check_format(fmt, "csv")
    params = SimplifiedParams(mu=mu, e_minus=e_minus, e_plus=e_plus, f=f)
    result = simulate_accuracy(
        params, n, mode, episodes, seed, m=m, budget=budget, threads=threads,
        engine=engine, root_unlimited=root_unlimited,
    )
    if mode == "none":
        theory = rho_nonreflective(params, n)
    elif mode == "rmtp":
        theory = rho_rmtp(params, n)
    else:
        theory = rho_rtbs(params, m, n)
    z = binomial_zscore(result.successes, episodes, theory)
    lines = ["n,mode,m,episodes,acc_hat,ci_lo,ci_hi,theory,zscore"]
    m_text = "" if m is None else str(m)
    lines.append(
        f"{n},{mode},{m_text},{episodes},{result.accuracy_hat!r},"
        f"{result.wilson_ci[0]!r},{result.wilson_ci[1]!r},{theory!r},{z!r}"
    )
    _write_text(out, "\n".join(lines) + "\n")
    _write_manifest(out, "simulate", {
        "mu": mu, "e_minus": e_minus, "e_plus": e_plus, "f": f,
        "mode": mode, "m": m, "n": n, "episodes": episodes, "seed": seed,
        "budget": budget, "threads": threads, "engine": engine,
        "root_unlimited": root_unlimited, "out": out, "format": fmt,
    })
    if result.budget_dominated:
        click.echo(
            f"warning: {result.budget_exhausted} of {episodes} episodes hit "
            "the proposal budget; estimate is budget-dominated", err=True,
        )
        sys.exit(3)


@main.command("gen-data")
@click.option("--task", type=click.Choice(_TASK_CHOICES), required=True)
@click.option("--style", type=click.Choice(_STYLE_CHOICES), default="binary",
              show_default=True)
@click.option("--count", type=int, default=None,
              help="Examples to generate; defaults to the task's training size.")
@click.option("--noise", type=float, default=None,
              help="Chance a step is corrupted; default 0.2 (0 for style none).")
@click.option("--tier-mix", default="id_easy=0.5,id_hard=0.5", show_default=True,
              help="Comma list of tier=weight pairs over the training tiers.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["jsonl"]), default="jsonl")
def cmd_gen_data(task, style, count, noise, tier_mix, seed, out, fmt) -> None:
    """Generate a labeled chain-of-thought corpus as JSONL (gzip by .gz)."""
    _check_format(fmt, "jsonl")
    task_name = TaskName(task)
    style_enum = CotStyle(style)
    if noise is None:
        noise = 0.0 if style_enum is CotStyle.NONE else 0.2
    spec = CorpusSpec(
        task=task_name,
        example_count=count if count is not None else DEFAULT_EXAMPLE_COUNTS[task_name],
        tier_mix=_parse_tier_mix(tier_mix),
        style=style_enum,
        proposal_noise=noise,
        seed=seed,
    )
    written = write_examples(generate_corpus(spec), out)
    _write_manifest(out, "gen-data", {
        "task": task, "style": style, "count": spec.example_count,
        "noise": noise, "tier_mix": tier_mix, "seed": seed,
        "out": out, "format": fmt,
    })
    click.echo(f"wrote {written} examples to {out}")


@main.command("run-task")
@click.option("--task", type=click.Choice(_TASK_CHOICES), required=True)
@click.option("--tier", type=click.Choice(_TIER_CHOICES), required=True)
@click.option("--mode", type=click.Choice(["none", "rmtp", "rtbs"]), default="rmtp",
              show_default=True)
@click.option("--m", type=int, default=4, show_default=True,
              help="Backtracking width (rtbs mode).")
@click.option("--episodes", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--noise", type=float, default=0.0, show_default=True,
              help="Policy corruption probability.")
@click.option("--e-minus", type=float, default=0.0, show_default=True,
              help="Injected false rejection rate on the verifier.")
@click.option("--e-plus", type=float, default=0.0, show_default=True,
              help="Injected false acceptance rate on the verifier.")
@click.option("--verifier", type=click.Choice(["binary", "detailed", "oracle"]),
              default="binary", show_default=True)
@click.option("--reflective-budget", type=int, default=64, show_default=True,
              help="Verified proposals before reverting to non-reflective.")
@click.option("--budget", type=int, default=96, show_default=True,
              help="Total proposals per episode.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["jsonl"]), default="jsonl")
def cmd_run_task(task, tier, mode, m, episodes, seed, noise, e_minus, e_plus,
                 verifier, reflective_budget, budget, out, fmt) -> None:
    """Run task episodes, write the records as JSONL, print the accuracy."""
    _check_format(fmt, "jsonl")
    task_name = TaskName(task)
    tier_enum = DifficultyTier(tier)
    transition = transition_for(task_name)
    base_policy = expert_policy(task_name)
    policy = make_noisy_policy(base_policy, noise) if noise > 0 else base_policy
    config = ReflectConfig(
        reflective_budget=reflective_budget,
        total_budget=budget,
        rtbs_width=m if mode == "rtbs" else budget + 1,
    )

    def episode(index: int):
        erng = rng_mod.stream(seed, index)
        query = gen_query(task_name, tier_enum, erng)
        if verifier == "oracle":
            base_verifier = OracleVerifier(query)
        elif verifier == "detailed":
            base_verifier = detailed_verifier(task_name)
        else:
            base_verifier = binary_verifier(task_name)
        if e_minus > 0 or e_plus > 0:
            base_verifier = make_noisy_verifier(base_verifier, e_minus, e_plus)
        sv = SelfVerifying(policy, base_verifier)
        if mode == "none":
            return run_nonreflective(policy, transition, query, budget, erng)
        if mode == "rmtp":
            return run_rmtp(sv, transition, query, config, erng)
        return run_rtbs(sv, transition, query, config, erng)

    records = [episode(i) for i in range(episodes)]
    write_records(records, out)
    _write_manifest(out, "run-task", {
        "task": task, "tier": tier, "mode": mode, "m": m,
        "episodes": episodes, "seed": seed, "noise": noise,
        "e_minus": e_minus, "e_plus": e_plus, "verifier": verifier,
        "reflective_budget": reflective_budget, "budget": budget,
        "out": out, "format": fmt,
    })
    click.echo(accuracy_table(records), nl=False)


@main.command("estimate-errors")
@click.option("--records", "records_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Episode records written by run-task.")
@click.option("--oracle", type=click.Choice(["rule", "truth"]), default="rule",
              show_default=True,
              help="rule: the task's exact rule verifier; truth: solvability "
                   "of the state the step leads to.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["csv"]), default="csv")
def cmd_estimate_errors(records_path, oracle, out, fmt) -> None:
    """Measure first-attempt verifier error rates from episode records."""
    _check_format(fmt, "csv")
    if oracle == "truth":
        oracle_fn = step_leads_positive
    else:
        def oracle_fn(query, state, step):
            return not binary_verifier(query.task).rule(state, step).rejected

    estimate = estimate_verification_errors(read_records(records_path), oracle_fn)
    lines = [
        "e_minus_hat,e_plus_hat,n_first_attempts,n_oracle_positive,n_oracle_negative",
        ",".join([
            "" if estimate.e_minus_hat is None else repr(estimate.e_minus_hat),
            "" if estimate.e_plus_hat is None else repr(estimate.e_plus_hat),
            str(estimate.n_first_attempts),
            str(estimate.n_oracle_positive),
            str(estimate.n_oracle_negative),
        ]),
    ]
    _write_text(out, "\n".join(lines) + "\n")
    _write_manifest(out, "estimate-errors", {
        "records": records_path, "oracle": oracle, "out": out, "format": fmt,
    })


@main.command("report")
@_with_options(_params_options)
@click.option("--mode", "modes", type=click.Choice(["none", "rmtp", "rtbs"]),
              multiple=True, default=("none", "rmtp", "rtbs"), show_default=True)
@click.option("--m", "m_list", type=int, multiple=True, default=(4,),
              show_default=True, help="Backtracking widths (rtbs rows).")
@click.option("--n", "n_values", type=int, multiple=True, required=True,
              help="Scales, one row set each.")
@click.option("--episodes", type=int, default=200_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["csv"]), default="csv")
def cmd_report(mu, e_minus, e_plus, f, modes, m_list, n_values, episodes, seed,
               threads, out, fmt) -> None:
    """Theory-vs-Monte-Carlo comparison table over (n, mode, width)."""
    _check_format(fmt, "csv")
    params = SimplifiedParams(mu=mu, e_minus=e_minus, e_plus=e_plus, f=f)
    rows = theory_vs_sim_rows(
        params, tuple(modes), tuple(n_values), tuple(m_list), episodes, seed,
        threads=threads,
    )
    _write_text(out, report_to_csv(rows))
    _write_manifest(out, "report", {
        "mu": mu, "e_minus": e_minus, "e_plus": e_plus, "f": f,
        "mode": list(modes), "m": list(m_list), "n": list(n_values),
        "episodes": episodes, "seed": seed, "threads": threads,
        "out": out, "format": fmt,
    })
    degenerate = [r for r in rows if r.result.budget_dominated]
    if degenerate:
        click.echo(
            f"warning: {len(degenerate)} of {len(rows)} points are "
            "budget-dominated", err=True,
        )
        sys.exit(3)


if __name__ == "__main__":
    main()
