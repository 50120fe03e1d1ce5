"""Command-line surface: config parsing, subcommands, and machine-readable
output.

Subcommands: ``optimize`` searches for the minimum-risk plan, ``evaluate``
prices a given plan, ``decide`` applies the posterior accept/reject rule to an
observed dataset, ``fit`` computes maximum-likelihood estimates, ``simulate``
generates synthetic test runs, and ``mc-risk`` cross-checks the analytic risk
by simulation.

Configuration lives in an INI file with sections [priors], [costs], [loss]
and optionally [search]; see ``_load_config``. Data files are CSV with header
``time,cause`` (causes numbered from 1). Results go to stdout, diagnostics to
stderr; the exit status is nonzero on any error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from .datalab import (
    RawDataset,
    fit_mle,
    mc_bayes_risk,
    reliability_curve,
    simulate_dataset,
    suff_stats,
)
from .decision import posterior_expected_loss
from .model import (
    ACCEPT,
    REJECT,
    ConfigurationError,
    CostModel,
    LossPoly,
    Plan,
    PriorSpec,
    Theta,
)
from .numerics import DomainError
from .optimizer import (
    MODE_ACCELERATED,
    MODE_ADAPTIVE,
    MODE_CONVENTIONAL,
    SearchConfig,
    compare_modes,
    optimize_plan,
)
from .risk import bayes_risk

__all__ = ["main", "RunConfig"]

_MODE_NAMES = {
    "aabsp": MODE_ADAPTIVE,
    "acbsp": MODE_ACCELERATED,
    "cbsp": MODE_CONVENTIONAL,
}
_FAMILY_LABELS = {
    MODE_ADAPTIVE: "AABSP",
    MODE_ACCELERATED: "ACBSP",
    MODE_CONVENTIONAL: "CBSP",
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs: the statistical model, the economics, and the
    search settings."""

    priors: PriorSpec
    costs: CostModel
    loss: LossPoly
    search: SearchConfig


def _section(parser: configparser.ConfigParser, name: str) -> dict[str, str]:
    if not parser.has_section(name):
        raise ConfigurationError(f"config is missing the [{name}] section")
    return dict(parser.items(name))


def _indexed_values(sec: dict[str, str], prefix: str, section: str) -> list[float]:
    vals: dict[int, float] = {}
    for key, raw in sec.items():
        parts = key.split("_")
        if len(parts) == 2 and parts[0] == prefix and parts[1].isdigit():
            vals[int(parts[1])] = float(raw)
    if not vals or sorted(vals) != list(range(1, len(vals) + 1)):
        raise ConfigurationError(
            f"[{section}] must define {prefix}_1 .. {prefix}_J consecutively"
        )
    return [vals[i] for i in range(1, len(vals) + 1)]


def _load_config(path: str, n_max_override: int | None = None) -> RunConfig:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep key case so C_s and c_s read identically
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"cannot read config file {path!r}")

    pri = _section(parser, "priors")
    alpha = _indexed_values(pri, "alpha", "priors")
    beta = _indexed_values(pri, "beta", "priors")
    l = _indexed_values(pri, "l", "priors")
    if not len(alpha) == len(beta) == len(l):
        raise ConfigurationError("[priors] alpha_j, beta_j, l_j counts differ")
    priors = PriorSpec(alpha=tuple(alpha), beta=tuple(beta), l=tuple(l))
    j = priors.n_risks

    cst = {k.lower(): v for k, v in _section(parser, "costs").items()}
    try:
        costs = CostModel(
            c_s=float(cst["c_s"]),
            v_s=float(cst["v_s"]),
            c_t=float(cst["c_t"]),
            c_a=float(cst["c_a"]),
            c_r=float(cst["c_r"]),
        )
    except KeyError as exc:
        raise ConfigurationError(f"[costs] is missing key {exc.args[0]!r}") from exc

    los = _section(parser, "loss")
    if "a_0" not in los:
        raise ConfigurationError("[loss] must define a_0")
    a0 = float(los["a_0"])
    lin = [0.0] * j
    quad = [[0.0] * j for _ in range(j)]
    for key, raw in los.items():
        if key == "a_0":
            continue
        parts = key.split("_")
        if len(parts) == 2 and parts[0] == "a" and parts[1].isdigit():
            idx = int(parts[1])
            if not 1 <= idx <= j:
                raise ConfigurationError(f"[loss] index out of range in {key!r}")
            lin[idx - 1] = float(raw)
        elif len(parts) == 3 and parts[0] == "a" and parts[1].isdigit() and parts[2].isdigit():
            i, k = int(parts[1]), int(parts[2])
            if not 1 <= i <= k <= j:
                raise ConfigurationError(f"[loss] indices in {key!r} must satisfy 1 <= i <= j")
            quad[i - 1][k - 1] = float(raw)
        else:
            raise ConfigurationError(f"[loss] has unrecognized key {key!r}")
    loss = LossPoly(a0=a0, a=tuple(lin), quad=tuple(tuple(row) for row in quad))

    skw: dict[str, object] = {}
    if parser.has_section("search"):
        sec = {k.lower(): v for k, v in parser.items("search")}
        for key, conv in (
            ("n_max", int),
            ("tau1_hi", float),
            ("grid_points", int),
            ("tau_tol", float),
            ("stall_limit", int),
            ("bound_seed", int),
            ("bound_draws", int),
        ):
            if key in sec:
                skw[key] = conv(sec[key])
        if "prune" in sec:
            skw["prune"] = sec["prune"].strip().lower() in ("1", "true", "yes", "on")
    if n_max_override is not None:
        skw["n_max"] = n_max_override
    search = SearchConfig(**skw)
    return RunConfig(priors=priors, costs=costs, loss=loss, search=search)


def _read_data_csv(path: str, n_risks: int) -> tuple[list[float], list[int]]:
    """Read a ``time,cause`` CSV; causes are 1-based in the file."""
    times: list[float] = []
    causes: list[int] = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigurationError(f"cannot read data file {path!r}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ConfigurationError(f"{path}: empty data file")
        cols = [c.strip().lower() for c in header]
        if "time" not in cols or "cause" not in cols:
            raise ConfigurationError(f"{path}: header must contain 'time' and 'cause' columns")
        ti, ci = cols.index("time"), cols.index("cause")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                t = float(row[ti])
                c = int(row[ci])
            except (ValueError, IndexError) as exc:
                raise ConfigurationError(f"{path}: malformed row at line {lineno}: {row!r}") from exc
            if not 1 <= c <= n_risks:
                raise ConfigurationError(
                    f"{path}: line {lineno}: cause {c} outside 1..{n_risks}"
                )
            times.append(t)
            causes.append(c - 1)
    if not times:
        raise ConfigurationError(f"{path}: no data rows")
    return times, causes


def _plan_from_args(args: argparse.Namespace) -> Plan:
    return Plan(n=args.n, r=args.r, m=args.m, tau1=args.tau1)


def _emit(payload: dict, as_json: bool, lines: list[str]) -> None:
    if as_json:
        print(json.dumps(payload, indent=2))
    else:
        for line in lines:
            print(line)


def _evaluation_dict(ev) -> dict:
    return {
        "plan": dataclasses.asdict(ev.plan),
        "risk": ev.risk,
        "item_cost": ev.item_cost,
        "accel_cost": ev.accel_cost,
        "time_cost": ev.time_cost,
        "decision_risk": ev.decision_risk,
        "expected_stress_count": ev.expected_stress_count,
        "expected_duration": ev.expected_duration,
    }


def _plan_line(label: str, ev) -> str:
    p = ev.plan
    return (
        f"{label:<6} n={p.n:<3d} r={p.r:<3d} m={p.m:<3d} tau1={p.tau1:<10.6g} "
        f"risk={ev.risk:.6f}"
    )


def cmd_optimize(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config, args.n_max)
    if args.compare:
        comp = compare_modes(
            cfg.priors, cfg.loss, cfg.costs, fixed_tau1=args.fixed_tau, config=cfg.search
        )
        payload = {
            "aabsp": _evaluation_dict(comp.adaptive.best),
            "acbsp": _evaluation_dict(comp.accelerated.best),
            "cbsp": _evaluation_dict(comp.conventional.best),
            "rrs1_percent": comp.rrs.vs_accelerated,
            "rrs2_percent": comp.rrs.vs_conventional,
        }
        lines = [
            _plan_line("AABSP", comp.adaptive.best),
            _plan_line("ACBSP", comp.accelerated.best),
            _plan_line("CBSP", comp.conventional.best),
            f"RRS1={comp.rrs.vs_accelerated:.3f}%  RRS2={comp.rrs.vs_conventional:.3f}%",
        ]
        _emit(payload, args.json, lines)
        return 0
    mode = _MODE_NAMES[args.mode]
    result = optimize_plan(
        cfg.priors, cfg.loss, cfg.costs, mode=mode, fixed_tau1=args.fixed_tau, config=cfg.search
    )
    payload = {
        "mode": args.mode,
        "best": _evaluation_dict(result.best),
        "n_cap": result.n_cap,
        "per_n": [list(pair) for pair in result.per_n],
    }
    _emit(payload, args.json, [_plan_line(_FAMILY_LABELS[mode], result.best)])
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    ev = bayes_risk(_plan_from_args(args), cfg.priors, cfg.loss, cfg.costs)
    lines = [
        _plan_line("plan", ev),
        f"  item_cost={ev.item_cost:.6f} accel_cost={ev.accel_cost:.6f} "
        f"time_cost={ev.time_cost:.6f} decision_risk={ev.decision_risk:.6f}",
        f"  expected_stress_count={ev.expected_stress_count:.6f} "
        f"expected_duration={ev.expected_duration:.6f}",
    ]
    _emit(_evaluation_dict(ev), args.json, lines)
    return 0


def _dataset_from_file(args: argparse.Namespace, plan: Plan, n_risks: int) -> RawDataset:
    times, causes = _read_data_csv(args.data, n_risks)
    if len(times) != plan.r:
        raise ConfigurationError(
            f"plan stops at r={plan.r} failures but the file records {len(times)}"
        )
    reached_tau1 = times[-1] > plan.tau1
    d1 = sum(1 for t in times if t <= plan.tau1)
    changed = reached_tau1 and d1 < plan.m
    return RawDataset(
        n=plan.n,
        n_risks=n_risks,
        tau1=plan.tau1,
        times=tuple(times),
        causes=tuple(causes),
        stress_changed=changed,
    )


def cmd_decide(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    plan = _plan_from_args(args)
    dataset = _dataset_from_file(args, plan, cfg.priors.n_risks)
    stats = suff_stats(dataset)
    phi = posterior_expected_loss(stats, cfg.priors, cfg.loss)
    e = phi - cfg.costs.c_r
    decision = ACCEPT if e <= 0 else REJECT
    payload = {
        "w1": stats.w1,
        "w2": stats.w2,
        "d1": list(stats.counts.d1),
        "d2": list(stats.counts.d2),
        "stress_changed": bool(stats.delta),
        "posterior_loss": phi,
        "e": e,
        "decision": decision,
    }
    lines = [
        f"w1={stats.w1:.6f} w2={stats.w2:.6f} d1={list(stats.counts.d1)} "
        f"d2={list(stats.counts.d2)} stress_changed={bool(stats.delta)}",
        f"posterior_loss={phi:.6f} e={e:.6f} decision={decision}",
    ]
    _emit(payload, args.json, lines)
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    times, causes = _read_data_csv(args.data, args.n_risks)
    end = args.tau2 if args.tau2 is not None else times[-1]
    changed = (not args.no_stress_change) and end > args.tau1
    dataset = RawDataset(
        n=args.n,
        n_risks=args.n_risks,
        tau1=args.tau1,
        times=tuple(times),
        causes=tuple(causes),
        stress_changed=changed,
        censor_time=args.tau2,
    )
    result = fit_mle(dataset)
    payload = {
        "lam": list(result.lam),
        "phi": list(result.phi),
        "lam_defined": list(result.lam_defined),
        "phi_defined": list(result.phi_defined),
        "w1": result.stats.w1,
        "w2": result.stats.w2,
        "d1": list(result.stats.counts.d1),
        "d2": list(result.stats.counts.d2),
    }
    lines = [
        f"w1={result.stats.w1:.6f} w2={result.stats.w2:.6f} "
        f"d1={list(result.stats.counts.d1)} d2={list(result.stats.counts.d2)}",
        "lam_hat=" + " ".join(f"{v:.6g}" for v in result.lam),
        "phi_hat=" + " ".join(f"{v:.6g}" for v in result.phi),
    ]
    if args.curve:
        grid = [float(t) for t in args.curve.split(",")]
        if not all(result.lam_defined):
            raise ConfigurationError("reliability curve needs every rate identified")
        phi_ok = [p if ok else 2.0 for p, ok in zip(result.phi, result.phi_defined)]
        curve = reliability_curve(Theta(lam=result.lam, phi=tuple(phi_ok)), grid)
        payload["curve"] = {"t": grid, "reliability": [float(v) for v in curve]}
        lines.append("t          reliability")
        lines.extend(f"{t:<10.6g} {v:.6f}" for t, v in zip(grid, curve))
    _emit(payload, args.json, lines)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    plan = _plan_from_args(args)
    lam = tuple(float(v) for v in args.lam.split(","))
    phi = tuple(float(v) for v in args.phi.split(","))
    theta = Theta(lam=lam, phi=phi)
    if theta.n_risks != cfg.priors.n_risks:
        raise ConfigurationError("theta dimension does not match the configured priors")
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for i in range(args.reps):
        dataset = simulate_dataset(plan, theta, seed=[args.seed, i])
        stats = suff_stats(dataset)
        phi_post = posterior_expected_loss(stats, cfg.priors, cfg.loss)
        e = phi_post - cfg.costs.c_r
        rows.append(
            {
                "rep": i + 1,
                "d1": list(stats.counts.d1),
                "d2": list(stats.counts.d2),
                "stress_changed": bool(stats.delta),
                "w1": stats.w1,
                "w2": stats.w2,
                "e": e,
                "decision": ACCEPT if e <= 0 else REJECT,
            }
        )
        if out_dir is not None:
            with open(out_dir / f"rep_{i + 1:03d}.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["time", "cause"])
                for t, c in zip(dataset.times, dataset.causes):
                    writer.writerow([repr(t), c + 1])

    lines = ["rep  d1            d2            changed  w1         w2         e          decision"]
    for row in rows:
        lines.append(
            f"{row['rep']:<4d} {str(row['d1']):<13} {str(row['d2']):<13} "
            f"{'Yes' if row['stress_changed'] else 'No':<8} "
            f"{row['w1']:<10.4f} {row['w2']:<10.4f} {row['e']:<10.4f} {row['decision']}"
        )
    _emit({"plan": dataclasses.asdict(plan), "replications": rows}, args.json, lines)
    return 0


def cmd_mc_risk(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    plan = _plan_from_args(args)
    est = mc_bayes_risk(plan, cfg.priors, cfg.loss, cfg.costs, reps=args.reps, seed=args.seed)
    payload = {
        "plan": dataclasses.asdict(plan),
        "risk": est.risk,
        "std_error": est.std_error,
        "reps": est.reps,
        "item_cost": est.item_cost,
        "accel_cost": est.accel_cost,
        "time_cost": est.time_cost,
        "decision_risk": est.decision_risk,
    }
    lines = [
        f"mc_risk={est.risk:.6f} +/- {est.std_error:.6f} (reps={est.reps})",
    ]
    if args.analytic:
        ev = bayes_risk(plan, cfg.priors, cfg.loss, cfg.costs)
        gap = abs(ev.risk - est.risk)
        tol = 3.0 * est.std_error
        verdict = "PASS" if gap <= tol else "FAIL"
        payload.update(
            {"analytic_risk": ev.risk, "abs_difference": gap, "three_se": tol, "verdict": verdict}
        )
        lines.append(f"analytic_risk={ev.risk:.6f} |diff|={gap:.6f} 3*SE={tol:.6f} -> {verdict}")
    _emit(payload, args.json, lines)
    return 0


def _add_plan_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--n", type=int, required=True, help="sample size")
    sub.add_argument("--r", type=int, required=True, help="failures at which the test stops")
    sub.add_argument("--m", type=int, required=True, help="stress-change failure threshold")
    sub.add_argument("--tau1", type=float, default=0.0, help="stress-change inspection time")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bsplan",
        description=(
            "Design and execute Bayesian reliability acceptance sampling plans "
            "for step-stress accelerated life tests with competing risks."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="search for the minimum-risk plan")
    p_opt.add_argument("--config", required=True, help="INI config file")
    p_opt.add_argument("--mode", choices=sorted(_MODE_NAMES), default="aabsp")
    p_opt.add_argument("--fixed-tau", dest="fixed_tau", type=float, default=None)
    p_opt.add_argument("--compare", action="store_true", help="optimize all three families")
    p_opt.add_argument("--n-max", dest="n_max", type=int, default=None)
    p_opt.add_argument("--json", action="store_true")
    p_opt.set_defaults(func=cmd_optimize)

    p_ev = sub.add_parser("evaluate", help="compute the Bayes risk of one plan")
    p_ev.add_argument("--config", required=True)
    _add_plan_flags(p_ev)
    p_ev.add_argument("--json", action="store_true")
    p_ev.set_defaults(func=cmd_evaluate)

    p_dec = sub.add_parser("decide", help="accept or reject from observed data")
    p_dec.add_argument("--config", required=True)
    p_dec.add_argument("--data", required=True, help="CSV file with time,cause rows")
    _add_plan_flags(p_dec)
    p_dec.add_argument("--json", action="store_true")
    p_dec.set_defaults(func=cmd_decide)

    p_fit = sub.add_parser("fit", help="maximum-likelihood estimates from data")
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--n", type=int, required=True, help="units on test")
    p_fit.add_argument("--n-risks", dest="n_risks", type=int, required=True)
    p_fit.add_argument("--tau1", type=float, required=True)
    p_fit.add_argument("--tau2", type=float, default=None, help="stopping time if time-stopped")
    p_fit.add_argument(
        "--no-stress-change",
        dest="no_stress_change",
        action="store_true",
        help="the test never elevated stress",
    )
    p_fit.add_argument("--curve", default=None, help="comma-separated times for the fitted curve")
    p_fit.add_argument("--json", action="store_true")
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="simulate test runs at fixed parameters")
    p_sim.add_argument("--config", required=True)
    _add_plan_flags(p_sim)
    p_sim.add_argument("--lam", required=True, help="comma-separated true rates")
    p_sim.add_argument("--phi", required=True, help="comma-separated acceleration factors")
    p_sim.add_argument("--reps", type=int, default=7)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", default=None, help="directory for per-replication CSV files")
    p_sim.add_argument("--json", action="store_true")
    p_sim.set_defaults(func=cmd_simulate)

    p_mc = sub.add_parser("mc-risk", help="Monte Carlo estimate of a plan's risk")
    p_mc.add_argument("--config", required=True)
    _add_plan_flags(p_mc)
    p_mc.add_argument("--reps", type=int, default=200_000)
    p_mc.add_argument("--seed", type=int, default=0)
    p_mc.add_argument("--analytic", action="store_true", help="compare with the analytic risk")
    p_mc.add_argument("--json", action="store_true")
    p_mc.set_defaults(func=cmd_mc_risk)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
