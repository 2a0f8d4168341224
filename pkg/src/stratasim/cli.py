"""``stratasim <respond|optimize|example1|study> --config PATH [--out DIR] [--seed N]``.

Exit codes: 0 ok, 2 config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ._io import atomic_write_text, fmt, write_csv
from .analysis import classify_regions
from .bias import Identity
from .config import ConfigError, RunConfig, load_config
from .costs import PiecewiseLinear, parse_cost
from .experiments import (
    gamma_scan,
    run_example1,
    scan_crossover,
    scenario_panels,
    solve_study,
    study_scenarios,
)
from .firm import DeploymentMode, loss_under_response, optimize_threshold
from .population import Population, load_csv, sample_gaussian, sample_sigmoid_labeled
from .response import respond_population
from .svg import Panel, scatter_svg

log = logging.getLogger("stratasim")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def build_population(cfg: RunConfig) -> Population:
    pc = cfg.population
    if pc is None:
        raise ConfigError("population", "this command needs a [population] section")
    if pc.source == "gaussian":
        return sample_gaussian(pc.gaussian)
    if pc.source == "sigmoid":
        return sample_sigmoid_labeled(pc.sigmoid, pc.sigmoid_weights, pc.seed)
    return load_csv(pc.csv_path)


def cmd_respond(cfg: RunConfig) -> list[Path]:
    if cfg.classifier is None:
        raise ConfigError("classifier.classifier", "respond needs a deployed classifier")
    pop = build_population(cfg)
    c = cfg.classifier
    if len(pop) and pop.dim != c.dim:
        raise ConfigError("classifier.classifier", f"classifier has {c.dim} weights for {pop.dim} features")
    n = c.dim
    outs = respond_population(pop, c, cfg.bias, cfg.params, cfg.sort_descending)
    if cfg.cost.analytic and len(pop):
        regions = classify_regions(pop.X, c, cfg.bias, cfg.cost, cfg.params.budget, cfg.sort_descending)
    else:
        regions = [""] * len(pop)
    header = (
        [f"x0_{i + 1}" for i in range(n)] + ["y"] + [f"x_post_{i + 1}" for i in range(n)]
        + [f"delta_{i + 1}" for i in range(n)] + ["cost", "acted", "accepted_true", "accepted_perceived", "region"]
    )
    rows = (
        [*o.x0, int(y), *o.x_post, *o.delta, o.cost_incurred, o.acted, o.accepted_true, o.accepted_perceived, str(r)]
        for o, y, r in zip(outs, pop.y, regions)
    )
    path = cfg.out / "responses.csv"
    write_csv(path, header, rows)
    return [path]


def _optimize(cfg: RunConfig, pop: Population, mode: DeploymentMode, extra=()):
    return optimize_threshold(pop, mode, cfg.loss, cfg.search, cfg.params, extra_candidates=extra,
                              sort_descending=cfg.sort_descending, keep_grid=True)


def cmd_optimize(cfg: RunConfig) -> list[Path]:
    pop = build_population(cfg)
    res = _optimize(cfg, pop, cfg.mode)
    n = pop.dim
    grid_path = cfg.out / "grid.csv"
    write_csv(grid_path, [f"theta_{i + 1}" for i in range(n)] + ["theta0", "loss"],
              ([*p.theta, p.theta0, p.loss] for p in res.grid))
    lines = [
        "theta=" + ",".join(fmt(float(t)) for t in res.classifier.theta),
        f"theta0={fmt(res.classifier.theta0)}",
        f"loss={fmt(res.loss.mean)}",
        f"loss_total={fmt(res.loss.total)}",
        f"mode={cfg.mode.kind.value}",
    ]
    paths = [grid_path]
    if cfg.compare_modes:
        bias = cfg.bias
        nb = _optimize(cfg, pop, DeploymentMode.aware_rational()).classifier
        b = _optimize(cfg, pop, DeploymentMode.aware_biased(bias), extra=[nb]).classifier
        obl = _optimize(cfg, pop, DeploymentMode.oblivious()).classifier
        l_nb = loss_under_response(pop, nb, Identity(), cfg.params, cfg.loss).mean
        l_wnb = loss_under_response(pop, nb, bias, cfg.params, cfg.loss).mean
        l_wb = loss_under_response(pop, b, bias, cfg.params, cfg.loss).mean
        modes_path = cfg.out / "modes.csv"
        write_csv(
            modes_path,
            [f"theta_{i + 1}" for i in range(n)] + ["theta0", "mode", "loss_rational", "loss_biased", "loss_unmoved"],
            (
                [*c.theta, c.theta0, name,
                 loss_under_response(pop, c, Identity(), cfg.params, cfg.loss).mean,
                 loss_under_response(pop, c, bias, cfg.params, cfg.loss).mean,
                 loss_under_response(pop, c, None, cfg.params, cfg.loss).mean]
                for name, c in (("oblivious", obl), ("aware_rational", nb), ("aware_biased", b))
            ),
        )
        paths.append(modes_path)
        lines += [
            f"loss_rational_at_nb={fmt(l_nb)}",
            f"loss_biased_at_b={fmt(l_wb)}",
            f"loss_biased_at_nb={fmt(l_wnb)}",
            f"ordering_nb_le_b_le_wnb={int(l_nb <= l_wb <= l_wnb)}",
            f"aware_biased_le_biased_at_nb={int(l_wb <= l_wnb)}",
        ]
    opt_path = cfg.out / "optimum.txt"
    atomic_write_text(opt_path, "\n".join(lines) + "\n")
    return [opt_path] + paths


def cmd_example1(cfg: RunConfig) -> list[Path]:
    e = cfg.example1
    if not cfg.cost.analytic:
        raise ConfigError("agent.cost", "example1 needs an analytic cost family")
    res = run_example1(cfg.seed, e.n_per_label, e.scale, e.gamma, e.budget_12, e.budget_3, e.oblivious_fit,
                       cfg.search, cfg.loss, cfg.cost)
    paths = []
    loss_path = cfg.out / "example1_losses.csv"
    write_csv(
        loss_path,
        ["scenario", "deployment", "response", "theta_1", "theta_2", "theta0", "loss", "tp", "fp"],
        ([k, l.deployment, l.response, *l.classifier.theta, l.classifier.theta0, l.loss, l.tp, l.fp]
         for k, sr in res.scenarios.items() for l in sr.losses),
    )
    paths.append(loss_path)
    prop_path = cfg.out / "example1_conditions.csv"
    write_csv(
        prop_path,
        ["scenario", "side", "lhs", "rhs", "lhs_se", "rhs_se", "holds", "ordering_observed"],
        ([k, r.side, r.lhs, r.rhs, r.lhs_se, r.rhs_se, r.holds, r.ordering_observed]
         for k, sr in res.scenarios.items() for r in sr.prop2.records),
    )
    paths.append(prop_path)
    check_path = cfg.out / "example1_checks.csv"
    write_csv(check_path, ["check", "holds"], sorted(res.checks().items()))
    paths.append(check_path)
    for k, sr in res.scenarios.items():
        panels = scenario_panels(sr, e.gamma, cfg.cost)
        pts_path = cfg.out / f"example1_scenario{k}_points.csv"
        write_csv(pts_path, ["panel", "x1", "x2", "y"],
                  ([name, x[0], x[1], int(y)] for name, X, _ in panels for x, y in zip(X, sr.population.y)))
        svg_path = cfg.out / f"example1_scenario{k}.svg"
        atomic_write_text(svg_path, scatter_svg([
            Panel(f"scenario {k}: {name} (loss {sr.loss(*_panel_key(k, name)):.4f})", X, sr.population.y,
                  [(c.theta, c.theta0, "#000000")])
            for name, X, c in panels
        ]))
        paths += [pts_path, svg_path]
    return paths


def _panel_key(k: int, name: str) -> tuple[str, str]:
    if name == "pre":
        return ("nb", "none") if k in (1, 2) else ("nb", "rational")
    if name == "rational":
        return ("nb", "rational")
    return ("nb", "biased") if k in (1, 2) else ("b", "biased")


def cmd_study(cfg: RunConfig) -> list[Path]:
    st = cfg.study
    cost = parse_cost(st.tiers)
    assert isinstance(cost, PiecewiseLinear)
    rows = []
    for s in study_scenarios(st):
        r = solve_study(s, st.hours, st.gamma, cost)
        rows.append([
            s.name, ";".join(fmt(float(v)) for v in s.weights), ";".join(fmt(float(v)) for v in s.x0),
            ";".join(fmt(float(h)) for h in r.allocation), r.objective, r.oracle_objective,
            r.objective == r.oracle_objective, len(r.oracle_allocations), r.max_hours_optimal,
            ";".join(fmt(float(h)) for h in r.biased_allocation), r.biased_objective,
            r.oracle_objective - r.biased_objective,
        ])
    study_path = cfg.out / "study.csv"
    write_csv(study_path, [
        "scenario", "weights", "x0", "hours", "objective", "oracle_objective", "matches_oracle",
        "n_optimal", "max_hours_optimal", "biased_hours", "biased_objective", "biased_gap",
    ], rows)
    gammas = np.round(np.arange(st.gamma_min, st.gamma_max + 1e-9, st.gamma_step), 10)
    scan_rows = []
    crossover = {}
    for s in study_scenarios(st):
        if "unbalanced" not in s.name:
            continue
        scan = gamma_scan(s.weights, st.hours, gammas, cost)
        crossover[s.name] = scan_crossover(scan)
        scan_rows += [[s.name, g, ";".join(fmt(float(h)) for h in a), d] for g, a, d in scan]
    scan_path = cfg.out / "gamma_scan.csv"
    write_csv(scan_path, ["scenario", "gamma", "biased_hours", "differs_from_rational"], scan_rows)
    summary = cfg.out / "study_summary.txt"
    atomic_write_text(summary, "".join(
        f"{name}_crossover_gamma={'none' if g is None else fmt(g)}\n" for name, g in crossover.items()
    ))
    return [study_path, scan_path, summary]


COMMANDS = {"respond": cmd_respond, "optimize": cmd_optimize, "example1": cmd_example1, "study": cmd_study}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="stratasim", description="Strategic responses of biased agents.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="run config file")
    parser.add_argument("--out", help="output directory (overrides run.out)")
    parser.add_argument("--seed", type=int, help="seed (overrides run.seed and population.seed)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.seed, args.out)
        paths = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"stratasim: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"stratasim: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for p in paths:
        log.info("wrote %s", p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
