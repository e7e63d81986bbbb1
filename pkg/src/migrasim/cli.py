"""Command line entry point: simulation runs, sweeps, audits, couplings,
and reproducible outputs with a manifest per run.

Exit codes: 0 success, 1 validation/usage error, 2 numerical failure,
3 pathwise coupling violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from . import analytic
from .conservation import (audit_docs, audit_routing_docs, audit_sis,
                           audit_tl, report_json)
from .core import (ModelParams, NumericalError, RngSeed, ValidationError,
                   derive_params)
from .couplings import (CouplingViolationError, coupled_alpha_monotonicity,
                        coupled_beta_monotonicity, coupled_p_monotonicity,
                        three_color_run)
from .fixedpoint import estimate_g, estimate_g_prime0, find_eta_c, find_p_star
from .network import (extinction_time, simulate_closed, simulate_meanfield,
                      simulate_routing_docs_meanfield, write_extinction_csv,
                      write_trajectory_csv)
from .reactor import (ReactorKind, Variant, palm_estimates, run_busy_cycles,
                      simulate_reactor, write_event_log)

SWEEP_HEADER = ("alpha", "eta_c_sis", "eta_c_sis_se", "eta_c_docs",
                "eta_c_air")
GPRIME_HEADER = ("mu", "gprime0", "gprime0_se")
GMAP_HEADER = ("p", "g_hat", "g_se", "time_avg")
MOMENTS_HEADER = ("moment", "value", "std_error")


def parse_grid(text: str) -> list[float]:
    """Grid syntax lo:hi:logN or lo:hi:linN (N points, endpoints included)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError(f"grid must be lo:hi:logN or lo:hi:linN: {text}")
    lo, hi = float(parts[0]), float(parts[1])
    kind, count = parts[2][:3], parts[2][3:]
    if kind not in ("log", "lin") or not count.isdigit():
        raise ValidationError(f"bad grid spec: {text}")
    n = int(count)
    if n < 1 or hi < lo:
        raise ValidationError(f"bad grid spec: {text}")
    if n == 1:
        return [lo]
    if kind == "lin":
        step = (hi - lo) / (n - 1)
        return [lo + i * step for i in range(n)]
    if lo <= 0:
        raise ValidationError("log grid needs lo > 0")
    ratio = (hi / lo) ** (1.0 / (n - 1))
    return [lo * ratio ** i for i in range(n)]


def _workers(n_tasks: int) -> int:
    cap = os.environ.get("MIGRASIM_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_tasks))


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="migrasim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, eta_default=None):
        p.add_argument("--config", help="JSON file with flag defaults")
        p.add_argument("--mu", type=float, default=1.0)
        p.add_argument("--alpha", type=float, default=1.0)
        p.add_argument("--beta", type=float, default=1.0)
        p.add_argument("--nu", type=float, default=None)
        p.add_argument("--eta", type=float, default=eta_default)
        p.add_argument("--lam", type=float, default=None)
        p.add_argument("--p", type=float, default=0.5)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--ci", type=float, default=0.95)
        p.add_argument("--out", default=None, help="output file path")
        return p

    p = common(sub.add_parser("simulate", help="one reactor run"), 1.0)
    p.add_argument("--variant", choices=[v.value for v in Variant],
                   default="sis")
    p.add_argument("--horizon", type=float, default=10_000.0)
    p.add_argument("--y-param", type=float, default=0.0)
    p.add_argument("--log", default=None, help="event log CSV path")
    p.add_argument("--fig", default=None, help="render moments figure here")

    p = common(sub.add_parser("cycles", help="busy-cycle statistics"), 1.0)
    p.add_argument("--variant", choices=[v.value for v in Variant],
                   default="sis")
    p.add_argument("--n-cycles", type=int, default=10_000)

    p = common(sub.add_parser("gmap", help="estimate g on a p-grid"), 1.0)
    p.add_argument("--p-grid", default="0:1:lin11")
    p.add_argument("--n-cycles", type=int, default=10_000)
    p.add_argument("--fig", default=None)

    p = common(sub.add_parser("pstar", help="fixed point of g"), 1.0)
    p.add_argument("--variant", choices=["sis", "air"], default="sis")
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--n-cycles", type=int, default=20_000)

    p = common(sub.add_parser("threshold", help="critical density"), None)
    p.add_argument("--variant", choices=[v.value for v in Variant],
                   required=True)
    p.add_argument("--budget", type=int, default=200_000)
    p.add_argument("--precision", type=float, default=None)

    p = common(sub.add_parser("analytic", help="closed forms as JSON"), 1.0)

    p = common(sub.add_parser("closed", help="closed-network run"), 1.0)
    p.add_argument("--variant", choices=[v.value for v in Variant],
                   default="sis")
    p.add_argument("--N", type=int, default=20)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--horizon", type=float, default=1000.0)
    p.add_argument("--extinction", action="store_true")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--cap", type=float, default=1000.0)
    p.add_argument("--fig", default=None)

    p = common(sub.add_parser("meanfield", help="mean-field particle scheme"),
               1.0)
    p.add_argument("--scheme", choices=["sis", "routing-docs"], default="sis")
    p.add_argument("--M", type=int, default=1000)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--p0", type=float, default=0.5)
    p.add_argument("--horizon", type=float, default=100.0)
    p.add_argument("--closed-tl", action="store_true")
    p.add_argument("--fig", default=None)

    p = common(sub.add_parser("audit", help="conservation identity audit"),
               1.0)
    p.add_argument("--variant",
                   choices=["sis", "docs", "routing", "tl"], default="sis")
    p.add_argument("--events", type=float, default=1e6)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--M", type=int, default=2000)
    p.add_argument("--p-star", type=float, default=None)

    p = common(sub.add_parser("couple", help="pathwise coupling checks"), 1.0)
    p.add_argument("--kind",
                   choices=["p", "alpha", "beta", "three-color"], default="p")
    p.add_argument("--p-hat", type=float, default=None)
    p.add_argument("--r", type=float, default=0.2)
    p.add_argument("--alpha2", type=float, default=None)
    p.add_argument("--beta2", type=float, default=None)
    p.add_argument("--n-cycles", type=int, default=10_000)
    p.add_argument("--n-events", type=int, default=10_000)
    p.add_argument("--closed", action="store_true")
    p.add_argument("--N", type=int, default=10)
    p.add_argument("--K", type=int, default=None)

    p = common(sub.add_parser("sweep", help="sweep one parameter"), 1.0)
    p.add_argument("--variant", choices=["sis"], default="sis")
    p.add_argument("--sweep", choices=["alpha", "mu"], required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--quantity", choices=["eta_c", "gprime0"],
                   default="eta_c")
    p.add_argument("--budget", type=int, default=200_000)
    p.add_argument("--fig", default=None)
    return ap


def _resolve(args: argparse.Namespace, argv: list[str]) -> argparse.Namespace:
    """Apply config-file defaults: flags explicitly given override the file."""
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            conf = json.load(fh)
        given = {a.lstrip("-").split("=")[0].replace("-", "_")
                 for a in argv if a.startswith("--")}
        for key, value in conf.items():
            attr = key.replace("-", "_")
            if attr in ("command",):
                continue
            if hasattr(args, attr) and attr not in given:
                setattr(args, attr, value)
    return args


def _params(args: argparse.Namespace) -> ModelParams:
    eta = args.eta
    lam = args.lam
    if lam is None:
        if eta is None:
            raise ValidationError("provide --eta or --lam")
        lam = eta * args.mu
    return derive_params(lam=lam, mu=args.mu, alpha=args.alpha,
                         beta=args.beta, p=args.p, nu=args.nu)


def _write_manifest(args: argparse.Namespace, path_hint: str | None) -> None:
    keys = {k: v for k, v in vars(args).items()
            if k not in ("config",) and not k.startswith("_")}
    manifest = {"tool": "migrasim", "manifest_version": 1, **keys}
    base = path_hint or getattr(args, "out", None)
    directory = os.path.dirname(os.path.abspath(base)) if base else os.getcwd()
    with open(os.path.join(directory, "manifest.json"), "w",
              encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: str | None, header, rows) -> None:
    fh = open(path, "w", newline="", encoding="utf-8") if path else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if path:
            fh.close()


def _maybe_figure(fig_path: str | None, draw) -> None:
    if not fig_path:
        return
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(7, 4.5))
    draw(ax)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)


def cmd_simulate(args) -> int:
    params = _params(args)
    kind = ReactorKind(Variant(args.variant), y_param=args.y_param)
    if args.log:
        run, log = simulate_reactor(kind, params, args.horizon,
                                    RngSeed(args.seed), record=True)
        write_event_log(args.log, log)
    else:
        run = simulate_reactor(kind, params, args.horizon, RngSeed(args.seed))
    rows = []
    for name in run.moments.batches:
        est = run.moments.estimate(name, args.ci)
        rows.append((name, f"{est.value:.10g}", f"{est.std_error:.4g}"))
    _write_csv(args.out, MOMENTS_HEADER, rows)
    _write_manifest(args, args.out)

    def draw(ax):
        names = [r[0] for r in rows]
        ax.bar(names, [float(r[1]) for r in rows],
               yerr=[float(r[2]) for r in rows], capsize=3)
        ax.set_ylabel("time average")
        ax.set_title(f"{args.variant} reactor moments")
    _maybe_figure(getattr(args, "fig", None), draw)
    return 0


def cmd_cycles(args) -> int:
    params = _params(args)
    cycles = run_busy_cycles(ReactorKind(Variant(args.variant)), params,
                             args.n_cycles, RngSeed(args.seed))
    rows = [(i, f"{c.duration:.10g}", c.departures, c.infected_departures)
            for i, c in enumerate(cycles)]
    _write_csv(args.out, ("cycle", "duration", "departures",
                          "infected_departures"), rows)
    _write_manifest(args, args.out)
    return 0


def cmd_gmap(args) -> int:
    params = _params(args)
    grid = parse_grid(args.p_grid)
    rows = []
    for i, p in enumerate(grid):
        if not 0 <= p <= 1:
            raise ValidationError(f"gmap grid point out of [0,1]: {p}")
        g = estimate_g(p, params, args.n_cycles,
                       RngSeed(args.seed).child(i), args.ci)
        rows.append((f"{p:.10g}", f"{g.p_out.value:.10g}",
                     f"{g.p_out.std_error:.4g}",
                     f"{g.time_average.value:.10g}"))
    _write_csv(args.out, GMAP_HEADER, rows)
    _write_manifest(args, args.out)

    def draw(ax):
        ps = [float(r[0]) for r in rows]
        gs = [float(r[1]) for r in rows]
        ses = [float(r[2]) for r in rows]
        ax.errorbar(ps, gs, yerr=[1.96 * s for s in ses], fmt="o-",
                    capsize=3, label="g(p)")
        ax.plot([0, 1], [0, 1], "k--", lw=0.8, label="identity")
        ax.set_xlabel("p")
        ax.set_ylabel("g(p)")
        ax.legend()
    _maybe_figure(getattr(args, "fig", None), draw)
    return 0


def cmd_pstar(args) -> int:
    params = _params(args)
    res = find_p_star(params, tol=args.tol, seed=RngSeed(args.seed),
                      n_cycles=args.n_cycles, ci_level=args.ci,
                      variant=Variant(args.variant))
    payload = {"p_star": res.estimate.value, "se": res.estimate.std_error,
               "iterations": res.iterations, "converged": res.converged,
               "message": res.message}
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    _write_manifest(args, args.out)
    if not res.converged:
        return 2
    return 0


def cmd_threshold(args) -> int:
    variant = Variant(args.variant)
    if variant is Variant.DOCS:
        print(f"{analytic.docs_tl_threshold(args.mu, args.alpha, args.beta):.10f}")
        return 0
    if variant is Variant.AIR:
        print(f"{analytic.air_threshold(args.alpha, args.beta):.10f}")
        return 0
    base = derive_params(lam=args.mu, mu=args.mu, alpha=args.alpha,
                         beta=args.beta, p=args.p, nu=args.nu)
    res = find_eta_c(base, ci_level=args.ci, budget=args.budget,
                     seed=RngSeed(args.seed), precision=args.precision)
    payload = {"eta_c": res.eta_c.value, "se": res.eta_c.std_error,
               "bracket": list(res.bracket), "iterations": res.iterations,
               "verdicts": [[e, v] for e, v in res.verdicts]}
    print(json.dumps(payload, indent=2, sort_keys=True))
    _write_manifest(args, args.out)
    return 0


def cmd_analytic(args) -> int:
    params = _params(args)
    ex, ey = analytic.air_amf_means(params)
    tl = analytic.air_tl_stationary(params)
    bq = analytic.branching_quantities(params)
    lower, upper = analytic.sis_threshold_bounds(args.mu, args.alpha,
                                                 args.beta)
    payload = {
        "eta_c_air": analytic.air_threshold(args.alpha, args.beta),
        "eta_c_docs": analytic.docs_tl_threshold(args.mu, args.alpha,
                                                 args.beta),
        "eta_c_sis_lower": lower,
        "eta_c_sis_upper": upper,
        "docs_mean_x": analytic.docs_mean_x(params),
        "docs_tl_fixed_point": analytic.docs_tl_fixed_point(params),
        "air_amf_mean_x": ex, "air_amf_mean_y": ey,
        "air_tl_mean_x": tl.mean_x, "air_tl_mean_y": tl.mean_y,
        "air_tl_p_star": tl.p_star, "air_tl_survival": tl.survival,
        "branching_fast_motion": bq.n_fast_motion,
        "branching_fast_epidemic": bq.m_fast_epidemic,
        "p_star_upper_bound": analytic.p_star_upper_bound(params),
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    _write_manifest(args, args.out)
    return 0


def cmd_closed(args) -> int:
    params = _params(args)
    variant = Variant(args.variant)
    K = args.K if args.K is not None else round(params.eta * args.N)
    if args.extinction:
        res = extinction_time(variant, args.N, K, params, args.reps,
                              args.cap, RngSeed(args.seed))
        if args.out:
            write_extinction_csv(args.out, res)
        else:
            for rep, (t, c) in enumerate(zip(res.times, res.censored)):
                print(f"{rep},{t},{int(c)}")
        _write_manifest(args, args.out)
        return 0
    run = simulate_closed(variant, args.N, K, params, args.horizon,
                          RngSeed(args.seed))
    if args.out:
        write_trajectory_csv(args.out, run.trajectory)
    frac = run.infected_fraction
    print(json.dumps({"infected_fraction": frac.value,
                      "se": frac.std_error, "events": run.events,
                      "extinct": run.extinct}, sort_keys=True))
    _write_manifest(args, args.out)

    def draw(ax):
        ts = [r[0] for r in run.trajectory]
        ys = [r[1] for r in run.trajectory]
        ax.plot(ts, ys)
        ax.set_xlabel("t")
        ax.set_ylabel("total infected")
    _maybe_figure(getattr(args, "fig", None), draw)
    return 0


def cmd_meanfield(args) -> int:
    params = _params(args)
    if args.scheme == "sis":
        tr = simulate_meanfield(Variant.SIS, args.M, args.h, params,
                                args.p0, args.horizon, RngSeed(args.seed))
        rows = [(f"{t:.10g}", f"{x + y:.10g}", f"{x:.10g}", f"{y:.10g}")
                for t, x, y in zip(tr.times, tr.mean_x, tr.mean_y)]
        _write_csv(args.out, ("t", "total_infected", "mean_x", "mean_y"),
                   rows)
        _write_manifest(args, args.out)

        def draw(ax):
            ax.plot(tr.times, tr.mean_y, label="mean infected")
            ax.plot(tr.times, tr.mean_x, label="mean susceptible")
            ax.set_xlabel("t")
            ax.legend()
        _maybe_figure(getattr(args, "fig", None), draw)
        return 0
    res = simulate_routing_docs_meanfield(args.M, params, args.horizon,
                                          RngSeed(args.seed), h=args.h,
                                          closed_tl=args.closed_tl,
                                          p0=args.p0)
    rows = []
    for name in res.moments.batches:
        est = res.moments.estimate(name, args.ci)
        rows.append((name, f"{est.value:.10g}", f"{est.std_error:.4g}"))
    ps = res.p_star
    rows.append(("p_star", f"{ps.value:.10g}", f"{ps.std_error:.4g}"))
    _write_csv(args.out, MOMENTS_HEADER, rows)
    _write_manifest(args, args.out)
    return 0


def _audit_horizon(args, params: ModelParams) -> float:
    if args.horizon is not None:
        return args.horizon
    # Rough stationary event rate; good enough to size the run.
    rate = params.lam + params.mu * params.eta \
        + params.beta * params.eta * params.p \
        + params.alpha * params.eta ** 2 * params.p
    return float(args.events) / max(rate, 1e-9)


def cmd_audit(args) -> int:
    params = _params(args)
    seed = RngSeed(args.seed)
    if args.variant == "sis":
        checks = audit_sis(params, _audit_horizon(args, params), seed,
                           ci_level=args.ci)
    elif args.variant == "docs":
        checks = audit_docs(params, _audit_horizon(args, params), seed,
                            ci_level=args.ci)
    elif args.variant == "routing":
        res = simulate_routing_docs_meanfield(args.M, params,
                                              args.horizon or 150.0, seed)
        checks = audit_routing_docs(res.moments, params, ci_level=args.ci)
    else:
        p_star = args.p_star
        if p_star is None:
            p_star = find_p_star(params, seed=seed.child(1)).estimate.value
        run_params = params.replace(p=p_star) if p_star > 0 else params
        horizon = args.horizon or 50_000.0
        run = simulate_reactor(ReactorKind(Variant.SIS), run_params, horizon,
                               seed)
        palm = palm_estimates(run_params, horizon, seed.child(2)) \
            if p_star > 0 else None
        checks = audit_tl(run.moments, params, p_star, palm,
                          ci_level=args.ci)
    text = report_json(checks)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    _write_manifest(args, args.out)
    return 0


def cmd_couple(args) -> int:
    params = _params(args)
    seed = RngSeed(args.seed)
    if args.kind == "p":
        p_hat = args.p_hat if args.p_hat is not None else min(
            1.0, params.p + 0.3)
        tr = coupled_p_monotonicity(params.p, p_hat, params, args.n_cycles,
                                    seed)
        payload = {"kind": "p", "violations": tr.violations,
                   "strict_fraction": tr.strict_fraction,
                   "d_i_low": tr.d_i_low, "d_i_high": tr.d_i_high}
    elif args.kind == "alpha":
        a2 = args.alpha2 if args.alpha2 is not None else 2 * params.alpha
        tr = coupled_alpha_monotonicity(params.alpha, a2, params,
                                        args.n_events, seed,
                                        closed=args.closed, N=args.N,
                                        K=args.K or round(params.eta * args.N))
        payload = {"kind": "alpha", "violations": tr.violations,
                   "strict_fraction": tr.strict_fraction}
    elif args.kind == "beta":
        b2 = args.beta2 if args.beta2 is not None else params.beta / 2
        tr = coupled_beta_monotonicity(params.beta, b2, params,
                                       args.n_events, seed,
                                       closed=args.closed, N=args.N,
                                       K=args.K or round(params.eta * args.N))
        payload = {"kind": "beta", "violations": tr.violations,
                   "strict_fraction": tr.strict_fraction}
    else:
        p_hat = args.p_hat if args.p_hat is not None else min(
            1.0 - args.r, params.p + 0.2)
        tr = three_color_run(params.p, args.r, params, args.n_cycles, seed,
                             p_hat=p_hat)
        payload = {"kind": "three-color", "violations": tr.violations,
                   "gap_low": tr.gap_low, "gap_high": tr.gap_high,
                   "strict_cycles": tr.strict_events,
                   "merge_checks": tr.merge_checks}
    print(json.dumps(payload, indent=2, sort_keys=True))
    _write_manifest(args, args.out)
    return 0


def _sweep_point(task) -> tuple[int, tuple]:
    index, quantity, value, args_dict = task
    if quantity == "eta_c":
        base = derive_params(lam=args_dict["mu"], mu=args_dict["mu"],
                             alpha=value, beta=args_dict["beta"], p=0.5)
        res = find_eta_c(base, budget=args_dict["budget"],
                         seed=RngSeed(args_dict["seed"], stream_id=index))
        row = (f"{value:.10g}", f"{res.eta_c.value:.10g}",
               f"{res.eta_c.std_error:.6g}",
               f"{analytic.docs_tl_threshold(args_dict['mu'], value, args_dict['beta']):.10g}",
               f"{analytic.air_threshold(value, args_dict['beta']):.10g}")
    else:
        params = derive_params(lam=args_dict["eta"] * value, mu=value,
                               alpha=args_dict["alpha"],
                               beta=args_dict["beta"], p=0.5)
        est = estimate_g_prime0(params, method="excursion",
                                budget=max(args_dict["budget"], 10_000),
                                seed=RngSeed(args_dict["seed"],
                                             stream_id=index))
        row = (f"{value:.10g}", f"{est.value:.10g}",
               f"{est.std_error:.6g}")
    return index, row


def cmd_sweep(args) -> int:
    grid = parse_grid(args.grid)
    if args.quantity == "eta_c" and args.sweep != "alpha":
        raise ValidationError("eta_c sweeps run over alpha")
    if args.quantity == "gprime0" and args.sweep != "mu":
        raise ValidationError("gprime0 sweeps run over mu")
    args_dict = {"mu": args.mu, "beta": args.beta, "alpha": args.alpha,
                 "eta": args.eta if args.eta is not None else 1.0,
                 "budget": args.budget, "seed": args.seed}
    tasks = [(i, args.quantity, v, args_dict) for i, v in enumerate(grid)]
    n_workers = _workers(len(tasks))
    if n_workers == 1:
        results = [_sweep_point(t) for t in tasks]
    else:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_sweep_point, tasks))
    results.sort(key=lambda pair: pair[0])
    rows = [row for _, row in results]
    header = SWEEP_HEADER if args.quantity == "eta_c" else GPRIME_HEADER
    _write_csv(args.out, header, rows)
    _write_manifest(args, args.out)

    def draw(ax):
        xs = [float(r[0]) for r in rows]
        ys = [float(r[1]) for r in rows]
        ses = [float(r[2]) for r in rows]
        ax.errorbar(xs, ys, yerr=[1.96 * s for s in ses], fmt="o-",
                    capsize=3)
        ax.set_xlabel(args.sweep)
        ax.set_ylabel(args.quantity)
        if args.quantity == "eta_c":
            ax.plot(xs, [float(r[3]) for r in rows], "s--", label="docs")
            ax.plot(xs, [float(r[4]) for r in rows], "^--", label="air")
            ax.set_xscale("log")
            ax.legend()
    _maybe_figure(getattr(args, "fig", None), draw)
    return 0


_COMMANDS = {
    "simulate": cmd_simulate, "cycles": cmd_cycles, "gmap": cmd_gmap,
    "pstar": cmd_pstar, "threshold": cmd_threshold, "analytic": cmd_analytic,
    "closed": cmd_closed, "meanfield": cmd_meanfield, "audit": cmd_audit,
    "couple": cmd_couple, "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit:
        return 1
    try:
        args = _resolve(args, argv)
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except CouplingViolationError as exc:
        print(f"coupling violation: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
