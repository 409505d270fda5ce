"""Batch command-line interface.

Subcommands mirror the pipeline stages (simulate, fit, importance,
target, cate), the two simulation experiments (exp1, exp2), and the
end-to-end real-data mode (pipeline). Outputs are plain CSV/JSON with
deterministic formatting: the same seed always produces byte-identical
metric files. Exit codes: 0 success, 1 validation problem, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import pathlib
import sys

import numpy as np

from . import __version__
from .cate import stratify
from .cohort import read_cohort_csv, write_cohort_csv
from .config import ConfigError, RunConfig
from .dgp import DgpParams, generate_cohort
from .effects import EffectSurface, estimate_ite, fit_outcome_models, nrmse_curve
from .exceptions import (CohortValidationError, InvalidBreaks, SurvhteError)
from .experiments import (calibrated_r, module_seed, run_experiment1,
                          run_experiment2, run_pipeline)
from .importance import ppv_tpr, score_features, select_features
from .tmle import fit_nuisances, one_step_target, simultaneous_band

TRUE_FEATURES = (0, 1, 2, 3, 4)


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)


def _load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        config = RunConfig.from_dict({**json.loads(config.canonical_json()),
                                      "seed": args.seed})
    return config


def _out_dir(args) -> pathlib.Path:
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    config = _load_config(args)
    scen = config.scenarios()[0]
    r = args.r if args.r is not None else calibrated_r(scen, config.horizon)
    params = DgpParams(n=scen["n"], d=scen["d"], beta=scen["beta"], r=r,
                       horizon=config.horizon, seed=config.seed)
    cohort, truth = generate_cohort(params)
    out = _out_dir(args)
    write_cohort_csv(out / "cohort.csv", cohort)
    meta = {
        "params": {"n": params.n, "d": params.d, "beta": params.beta,
                   "r": params.r, "horizon": params.horizon,
                   "seed": params.seed},
        "event_rate_target": scen["event_rate"] if args.r is None else None,
        "true_ate": [truth.ate(t) for t in range(1, config.horizon + 1)],
        "config_hash": config.config_hash(),
    }
    _write_json(out / "simulate_meta.json", meta)
    print(f"wrote {out / 'cohort.csv'} (n={cohort.n}, d={cohort.dim})")
    return 0


def _load_truth_ite(meta_path, cohort, horizon):
    with open(meta_path) as fh:
        meta = json.load(fh)
    r = meta["params"]["r"]
    from .dgp import tau

    tgrid = np.arange(1, horizon + 1, dtype=np.float64)
    s1 = np.exp(-tgrid[None, :] * tau(1, cohort.x, r)[:, None])
    s0 = np.exp(-tgrid[None, :] * tau(0, cohort.x, r)[:, None])
    return s1 - s0


def _write_effects(path, cohort, surface):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "t", "s1", "s0", "psi_hat"])
        for i in range(cohort.n):
            for t in range(1, surface.s1.shape[1] + 1):
                writer.writerow([cohort.ids[i], t,
                                 _fmt(surface.s1[i, t - 1]),
                                 _fmt(surface.s0[i, t - 1]),
                                 _fmt(surface.psi_hat[i, t - 1])])


def _read_effects(path, cohort, horizon) -> EffectSurface:
    s1 = np.empty((cohort.n, horizon))
    s0 = np.empty((cohort.n, horizon))
    index = {sid: i for i, sid in enumerate(cohort.ids)}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            i = index[rec["id"]]
            t = int(rec["t"])
            s1[i, t - 1] = float(rec["s1"])
            s0[i, t - 1] = float(rec["s0"])
    return EffectSurface(s1=s1, s0=s0)


def cmd_fit(args) -> int:
    config = _load_config(args)
    cohort = read_cohort_csv(args.cohort, config.horizon)
    models = fit_outcome_models(cohort, config.learner_specs(),
                                seed=module_seed(config.seed, 0, 0, "outcome"))
    surface = estimate_ite(models, cohort)
    out = _out_dir(args)
    _write_effects(out / "effects.csv", cohort, surface)
    summary = {
        "config_hash": config.config_hash(),
        "stacks": {
            arm: {
                "weights": dict(zip(stack.names, map(float, stack.weights))),
                "cv_loss": dict(zip(stack.names, map(float, stack.cv_loss))),
                "stack_cv_loss": float(stack.stack_cv_loss),
                "dropped": stack.dropped,
            }
            for arm, stack in (("treated", models.model_treated),
                               ("control", models.model_control))
        },
        "ate_initial": [surface.ate(t) for t in range(1, config.horizon + 1)],
    }
    _write_json(out / "fit_summary.json", summary)
    if args.truth:
        psi_true = _load_truth_ite(args.truth, cohort, config.horizon)
        _write_json(out / "nrmse.json",
                    {"nrmse": [float(v) for v in nrmse_curve(surface, psi_true)]})
    print(f"wrote {out / 'effects.csv'}")
    return 0


def cmd_importance(args) -> int:
    config = _load_config(args)
    cohort = read_cohort_csv(args.cohort, config.horizon)
    surface = _read_effects(args.effects, cohort, config.horizon)
    imp_seed = module_seed(config.seed, 0, 0, "importance")
    payload = {"config_hash": config.config_hash(), "methods": {}}
    for k, method in enumerate(config.importance_methods):
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=imp_seed, spawn_key=(k,)))
        curve = score_features(surface.psi_hat[:, -1], cohort.x, method, rng,
                               config.scorers.get(method))
        result = select_features(curve)
        entry = {
            "scores": {cohort.feature_names[j]: float(curve.scores[j])
                       for j in range(cohort.dim)},
            "ranks": {cohort.feature_names[j]: int(curve.ranks[j])
                      for j in range(cohort.dim)},
            "knee_rank": result.knee_rank,
            "no_knee": result.no_knee,
            "selected": [cohort.feature_names[j] for j in result.selected],
        }
        if args.truth:
            ppv, tpr, hits = ppv_tpr(result.selected, TRUE_FEATURES)
            entry["ppv"] = ppv
            entry["tpr"] = tpr
            entry["hits"] = {cohort.feature_names[j]: v for j, v in hits.items()}
        payload["methods"][method] = entry
    out = _out_dir(args)
    _write_json(out / "importance.json", payload)
    print(f"wrote {out / 'importance.json'}")
    return 0


def cmd_target(args) -> int:
    config = _load_config(args)
    cohort = read_cohort_csv(args.cohort, config.horizon)
    surface = _read_effects(args.effects, cohort, config.horizon)
    fits = fit_nuisances(cohort, config.learner_specs(),
                         seed=module_seed(config.seed, 0, 0, "nuisance"))
    target = one_step_target(cohort, fits, surface,
                             step_size=config.tmle.get("step_size", 1e-3),
                             max_steps=config.tmle.get("max_steps", 5000))
    out = _out_dir(args)
    with open(out / "targeted_curves.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "t", "s1", "s0", "psi_star"])
        for i in range(cohort.n):
            for t in range(1, config.horizon + 1):
                writer.writerow([cohort.ids[i], t,
                                 _fmt(target.survival[1][i, t - 1]),
                                 _fmt(target.survival[0][i, t - 1]),
                                 _fmt(target.psi_star[i, t - 1])])
    eic = target.eic_ate()
    with open(out / "eic_ate.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "t", "value"])
        for i in range(cohort.n):
            for t in range(1, config.horizon + 1):
                writer.writerow([cohort.ids[i], t, _fmt(eic[i, t - 1])])
    band = simultaneous_band(eic, level=0.95,
                             seed=module_seed(config.seed, 0, 0, "tmle"))
    with open(out / "targeted_ate.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "estimate", "half_width", "lower", "upper",
                         "ci_star"])
        for t in range(1, config.horizon + 1):
            est = target.ate(t)
            hw = float(band["half_width"][t - 1])
            writer.writerow([t, _fmt(est), _fmt(hw), _fmt(est - hw),
                             _fmt(est + hw), _fmt(hw)])
    _write_json(out / "target_diagnostics.json", {
        "config_hash": config.config_hash(),
        "steps": target.steps,
        "converged": target.converged,
        "max_steps_exceeded": target.max_steps_exceeded,
        "max_abs_score": target.diagnostics["max_abs_score"],
        "band_multiplier": band["multiplier"],
        "positivity_warning": fits.positivity_warning,
        "clamped_share": fits.clamped_share,
    })
    print(f"wrote {out / 'targeted_ate.csv'} "
          f"(steps={target.steps}, converged={target.converged})")
    return 0


def _read_targeted(path, cohort, horizon):
    s1 = np.empty((cohort.n, horizon))
    s0 = np.empty((cohort.n, horizon))
    index = {sid: i for i, sid in enumerate(cohort.ids)}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            i = index[rec["id"]]
            t = int(rec["t"])
            s1[i, t - 1] = float(rec["s1"])
            s0[i, t - 1] = float(rec["s0"])
    return s1, s0


def cmd_cate(args) -> int:
    config = _load_config(args)
    cohort = read_cohort_csv(args.cohort, config.horizon)
    if args.feature not in cohort.feature_names:
        raise InvalidBreaks(f"feature '{args.feature}' not in cohort")
    feature = cohort.feature_names.index(args.feature)
    s1, s0 = _read_targeted(args.targeted, cohort, config.horizon)
    eic = np.empty((cohort.n, config.horizon))
    index = {sid: i for i, sid in enumerate(cohort.ids)}
    with open(args.eic, newline="") as fh:
        for rec in csv.DictReader(fh):
            eic[index[rec["id"]], int(rec["t"]) - 1] = float(rec["value"])
    breaks = [float(v) for v in args.breaks.split(",")] if args.breaks else None
    strata = stratify(cohort, feature, q=args.q, breaks=breaks, mode=args.mode)
    psi = s1 - s0
    out = _out_dir(args)
    rows = []
    rng_seed = module_seed(config.seed, 0, 0, "tmle")
    for st in strata:
        curve = psi[st.members].mean(axis=0)
        member_eic = eic[st.members]
        sd = member_eic.std(axis=0, ddof=1) if st.size > 1 else \
            np.zeros(config.horizon)
        live = sd > 0
        if live.any():
            from .tmle import simultaneous_band as _band

            band = _band(member_eic, level=0.95, seed=rng_seed)
            hw = band["half_width"]
        else:
            hw = np.zeros(config.horizon)
        for t in range(1, config.horizon + 1):
            rows.append([args.feature, st.q, st.label, t,
                         _fmt(curve[t - 1]), _fmt(curve[t - 1] - hw[t - 1]),
                         _fmt(curve[t - 1] + hw[t - 1]), st.size])
    with open(out / "cate.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "stratum", "label", "t", "estimate",
                         "lower", "upper", "h_q"])
        writer.writerows(rows)
    print(f"wrote {out / 'cate.csv'} ({len(strata)} strata)")
    return 0


def cmd_exp(args, which: str) -> int:
    config = _load_config(args)
    threads = config.resolved_threads(args.threads)
    runner = run_experiment1 if which == "exp1" else run_experiment2
    report = runner(config, threads=threads)
    out = _out_dir(args)
    path = report.write(out, which)
    print(f"wrote {path} ({len(report.rows)} rows, "
          f"{len(report.failures)} failed replicates)")
    return 0


def cmd_pipeline(args) -> int:
    config = _load_config(args)
    cohort = read_cohort_csv(args.cohort, config.horizon)
    result = run_pipeline(cohort, config, with_bootstrap=args.bootstrap)
    out = _out_dir(args)
    _write_json(out / "pipeline_report.json",
                {**result, "config_hash": config.config_hash()})
    print(f"wrote {out / 'pipeline_report.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="survhte",
        description="Heterogeneous survival treatment effects, batch pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, cohort=False):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out-dir", default=".", help="output directory")
        if cohort:
            p.add_argument("--cohort", required=True, help="cohort CSV")

    p = sub.add_parser("simulate", help="generate a synthetic cohort")
    common(p)
    p.add_argument("--r", type=float, help="survival scale (skips calibration)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit hazard stacks, write effect surface")
    common(p, cohort=True)
    p.add_argument("--truth", help="simulate_meta.json for NRMSE")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("importance", help="score and select features")
    common(p, cohort=True)
    p.add_argument("--effects", required=True, help="effects.csv from fit")
    p.add_argument("--truth", help="simulate_meta.json enables PPV/TPR")
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("target", help="one-step targeting of survival curves")
    common(p, cohort=True)
    p.add_argument("--effects", required=True, help="effects.csv from fit")
    p.set_defaults(func=cmd_target)

    p = sub.add_parser("cate", help="stratified effects from targeted curves")
    common(p, cohort=True)
    p.add_argument("--targeted", required=True, help="targeted_curves.csv")
    p.add_argument("--eic", required=True, help="eic_ate.csv from target")
    p.add_argument("--feature", required=True)
    p.add_argument("--q", type=int, default=10)
    p.add_argument("--breaks", help="comma-separated explicit break points")
    p.add_argument("--mode", default="quantile", choices=["equal", "quantile"])
    p.set_defaults(func=cmd_cate)

    for which in ("exp1", "exp2"):
        p = sub.add_parser(which, help=f"simulation experiment {which[-1]}")
        common(p)
        p.add_argument("--threads", type=int, help="worker processes")
        p.set_defaults(func=lambda a, w=which: cmd_exp(a, w))

    p = sub.add_parser("pipeline", help="steps 1-3 on an ingested cohort")
    common(p, cohort=True)
    p.add_argument("--bootstrap", action="store_true",
                   help="add bootstrap stability counts")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CohortValidationError, ConfigError, InvalidBreaks) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except (SurvhteError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
