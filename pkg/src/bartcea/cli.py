"""Command-line interface: ``bartcea fit`` and ``bartcea simulate``.

Every artifact is rendered in memory first and written only once all
stages have succeeded; if writing fails part-way, files already written
are removed again.  Errors exit with status 1 and a message naming the
failing stage.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .bart import BartConfig, estimate_ps, fit_probit_bart
from .cea import (
    DEFAULT_WTP,
    build_counterfactual_design,
    compute_ate_draws,
    compute_ceac,
    compute_inb,
    lambda_grid,
    summarize,
)
from .data import Schema, encode, load_csv
from .simulation import EXPERIMENT_BART, HIST_BINS, HIST_RANGE, Assignment, SimScenario, run_experiment
from .subart import SubartConfig, fit_subart


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage} failed: {cause}")
        self.stage = stage


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - every failure is reported with its stage
        raise StageError(name, exc) from exc


def _split(text: str | None) -> tuple[str, ...]:
    if not text:
        return ()
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _num(x) -> str:
    return repr(float(x))


def _csv(header, rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode()


def _json(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode()


def write_outputs(out_dir: Path, files: dict[str, bytes]) -> None:
    with stage("writing outputs"):
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        try:
            for name, content in files.items():
                path = out_dir / name
                path.write_bytes(content)
                written.append(path)
        except BaseException:
            for path in written:
                path.unlink(missing_ok=True)
            raise


# ---------------------------------------------------------------- fit


def cmd_fit(args) -> dict[str, bytes]:
    with stage("configuration"):
        if args.lambda_min > args.lambda_max:
            raise ValueError("--lambda-min exceeds --lambda-max")
        if args.ps_clip is not None and not 0 < args.ps_clip < 0.5:
            raise ValueError("--ps-clip must lie in (0, 0.5)")
        schema = Schema(args.treatment, args.cost, args.health, _split(args.covariates),
                        _split(args.factors))
        if not schema.covariates:
            raise ValueError("no covariates given")
        ps_seed, out_seed = (int(s) for s in np.random.SeedSequence(args.seed).generate_state(2))
        ps_config = BartConfig(n_tree=args.n_tree, n_mcmc=args.n_mcmc, n_burn=args.n_burn,
                               seed=ps_seed)
        out_config = SubartConfig(n_tree=args.n_tree, n_mcmc=args.n_mcmc, n_burn=args.n_burn,
                                  seed=out_seed)
        grid = lambda_grid(args.lambda_min, args.lambda_max, args.lambda_points)

    with stage("loading data"):
        dataset = load_csv(args.data, schema, na_codes=_split(args.na_codes))

    with stage("encoding confounders"):
        confounders = encode(dataset, include_treatment=False)

    with stage("propensity model"):
        ps_post = fit_probit_bart(confounders.values, dataset.treatment, ps_config)
        ps = estimate_ps(ps_post)
        if args.ps_clip is not None:
            ps = np.clip(ps, args.ps_clip, 1.0 - args.ps_clip)

    with stage("encoding outcome design"):
        design = encode(dataset, {"ps": ps})
        stacked = build_counterfactual_design(design, dataset.treatment_name)

    with stage("outcome model"):
        post = fit_subart(design.values, dataset.outcomes, stacked.values, out_config,
                          missing_mask=dataset.missing_mask)

    with stage("effect summaries"):
        draws = compute_ate_draws(post, dataset.n)
        curve = compute_ceac(draws, grid)
        summary = summarize(draws, DEFAULT_WTP)
        inb = [compute_inb(draws, lam) for lam in DEFAULT_WTP]

    with stage("rendering outputs"):
        files = {
            "ate_draws.csv": _csv(
                ["delta_c", "delta_q"] + [f"inb_{lam:g}" for lam in DEFAULT_WTP],
                ([_num(dc), _num(dq)] + [_num(col[i]) for col in inb]
                 for i, (dc, dq) in enumerate(zip(draws.delta_c, draws.delta_q))),
            ),
            "ceac.csv": _csv(["lambda", "probability"],
                             ([_num(lam), _num(p)] for lam, p in zip(curve.lam, curve.p))),
            "ps.csv": _csv(["row", "ps"], ([i + 1, _num(p)] for i, p in enumerate(ps))),
        }
        sigma_mean = post.sigma_draws.mean(axis=0)
        files["summary.json"] = _json({
            "command": "fit",
            "version": __version__,
            "seed": args.seed,
            "config": {
                "data": str(args.data),
                "treatment": schema.treatment,
                "cost": schema.cost,
                "health": schema.health,
                "covariates": list(schema.covariates),
                "factors": list(schema.factors),
                "na_codes": list(_split(args.na_codes)),
                "lambda_min": args.lambda_min,
                "lambda_max": args.lambda_max,
                "lambda_points": args.lambda_points,
                "ps_clip": args.ps_clip,
                "propensity_model": asdict(ps_config),
                "outcome_model": asdict(out_config),
            },
            "data": {
                "n": dataset.n,
                "n_treated": int(dataset.treatment.sum()),
                "missing_cost": int(dataset.missing_mask[:, 0].sum()),
                "missing_health": int(dataset.missing_mask[:, 1].sum()),
                "design_columns": list(design.column_names),
            },
            "propensity": {"min": float(ps.min()), "max": float(ps.max()),
                           "mean": float(ps.mean())},
            "error_covariance_mean": sigma_mean.tolist(),
            "error_correlation_mean": float(post.correlation_draws().mean()),
            "effects": summary.to_dict(),
        })
        if args.svg:
            from .plots import ce_plane_svg, ceac_svg

            files["ce_plane.svg"] = ce_plane_svg(draws)
            files["ceac.svg"] = ceac_svg(curve)
    return files


# ----------------------------------------------------------- simulate


def cmd_simulate(args) -> dict[str, bytes]:
    with stage("configuration"):
        names = ["randomized", "confounded"] if args.scenario == "both" else [args.scenario]
        estimators = _split(args.estimators)
        unknown = set(estimators) - {"ols", "bart"}
        if not estimators or unknown:
            raise ValueError(f"estimators must be drawn from ols,bart (got {args.estimators!r})")
        config = BartConfig(n_tree=args.n_tree, n_mcmc=args.n_mcmc, n_burn=args.n_burn,
                            seed=args.seed)
        scenarios = [SimScenario(Assignment(s), n=args.n, n_sim=args.n_sim, seed=args.seed,
                                 shared_x=not args.per_replication_x) for s in names]

    results = []
    for sc in scenarios:
        with stage(f"{sc.assignment.value} experiment"):
            results.append(run_experiment(sc, estimators, config, n_jobs=args.n_jobs))

    with stage("rendering outputs"):
        est_rows, hist_rows, summaries = [], [], {}
        for res in results:
            name = res.scenario.assignment.value
            for est in estimators:
                for rep, value in enumerate(res.estimates[est]):
                    est_rows.append([rep + 1, name, est, _num(value)])
                counts, edges, outside = res.histogram(est)
                for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                    hist_rows.append([name, est, _num(lo), _num(hi), int(c)])
            summaries[name] = {
                "estimators": res.summary(),
                "outside_histogram_range": {e: res.histogram(e)[2] for e in estimators},
                "treated_fraction_mean": float(res.treated_fraction.mean()),
            }
        files = {
            "estimates.csv": _csv(["replication", "scenario", "estimator", "ate_estimate"],
                                  est_rows),
            "histogram.csv": _csv(["scenario", "estimator", "bin_left", "bin_right", "count"],
                                  hist_rows),
            "summary.json": _json({
                "command": "simulate",
                "version": __version__,
                "seed": args.seed,
                "config": {
                    "scenarios": names,
                    "estimators": list(estimators),
                    "n": args.n,
                    "n_sim": args.n_sim,
                    "shared_x": not args.per_replication_x,
                    "histogram_range": list(HIST_RANGE),
                    "histogram_bins": HIST_BINS,
                    "bart": asdict(config),
                },
                "results": summaries,
            }),
        }
    return files


# ------------------------------------------------------------ parser


def _sampler_flags(p: argparse.ArgumentParser, defaults: BartConfig, seed: int) -> None:
    p.add_argument("--n-tree", type=int, default=defaults.n_tree)
    p.add_argument("--n-mcmc", type=int, default=defaults.n_mcmc,
                   help="total sweeps including burn-in")
    p.add_argument("--n-burn", type=int, default=defaults.n_burn)
    p.add_argument("--seed", type=int, default=seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bartcea", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="propensity + suBART cost-effectiveness pipeline")
    fit.add_argument("--data", required=True, type=Path)
    fit.add_argument("--out", required=True, type=Path)
    fit.add_argument("--treatment", default="t")
    fit.add_argument("--cost", default="c")
    fit.add_argument("--health", default="q")
    fit.add_argument("--covariates", required=True, help="comma-separated column names")
    fit.add_argument("--factors", default="", help="covariates to treat as categorical")
    fit.add_argument("--na-codes", default="", help="extra missing-value codes, e.g. -99")
    _sampler_flags(fit, SubartConfig(), seed=42)
    fit.add_argument("--lambda-min", type=float, default=0.0)
    fit.add_argument("--lambda-max", type=float, default=50000.0)
    fit.add_argument("--lambda-points", type=int, default=1000)
    fit.add_argument("--ps-clip", type=float, default=None,
                     help="clip propensity scores to [eps, 1 - eps]; off by default")
    fit.add_argument("--svg", action="store_true", help="also write ce_plane.svg and ceac.svg")
    fit.set_defaults(handler=cmd_fit)

    sim = sub.add_parser("simulate", help="OLS vs BART misspecification experiment")
    sim.add_argument("--out", required=True, type=Path)
    sim.add_argument("--scenario", choices=["randomized", "confounded", "both"], default="both")
    sim.add_argument("--estimators", default="ols,bart")
    sim.add_argument("--n-sim", type=int, default=100)
    sim.add_argument("--n", type=int, default=200, help="sample size per replication")
    sim.add_argument("--per-replication-x", action="store_true",
                     help="draw a fresh covariate per replication instead of sharing one")
    sim.add_argument("--n-jobs", type=int, default=1)
    _sampler_flags(sim, EXPERIMENT_BART, seed=0)
    sim.set_defaults(handler=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        files = args.handler(args)
        write_outputs(args.out, files)
    except StageError as exc:
        print(f"bartcea {args.command}: {exc}", file=sys.stderr)
        return 1
    for name in files:
        print(args.out / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
