"""Seeded experiment runners and report emission.

Every replicate owns a seed derived from (master seed, scenario index,
replicate index, module slot), so reports are identical whether
replicates run serially or across processes. Failed replicates are
recorded and excluded from aggregates without aborting the grid.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .cate import mcate_curve, pct_bias, stratify
from .cohort import Cohort
from .config import RunConfig
from .dgp import DgpParams, calibrate_rate, generate_cohort
from .effects import estimate_ite, fit_outcome_models, nrmse_curve
from .exceptions import DegenerateDenominator
from .importance import (bootstrap_stability, ppv_tpr, score_features,
                         select_features)
from .tmle import fit_nuisances, one_step_target

TRUE_FEATURES = (0, 1, 2, 3, 4)  # x1..x5 drive the simulated heterogeneity

_SLOTS = {"dgp": 0, "outcome": 1, "importance": 2, "nuisance": 3, "tmle": 4,
          "bootstrap": 5}


def module_seed(master: int, scenario_id: int, replicate: int, slot: str) -> int:
    ss = np.random.SeedSequence(entropy=master,
                                spawn_key=(scenario_id, replicate, _SLOTS[slot]))
    return int(ss.generate_state(1)[0])


_CAL_CACHE: dict = {}


def calibrated_r(scenario: dict, horizon: int) -> float:
    key = (scenario["d"], scenario["event_rate"], horizon)
    if key not in _CAL_CACHE:
        params = DgpParams(n=1, d=scenario["d"], beta=scenario["beta"],
                           target_rate=scenario["event_rate"], horizon=horizon,
                           seed=0)
        _CAL_CACHE[key] = calibrate_rate(scenario["event_rate"], params)
    return _CAL_CACHE[key]


def _simulate(scenario: dict, replicate: int, config: RunConfig):
    r = calibrated_r(scenario, config.horizon)
    params = DgpParams(n=scenario["n"], d=scenario["d"], beta=scenario["beta"],
                       r=r, horizon=config.horizon,
                       seed=module_seed(config.seed, scenario["scenario_id"],
                                        replicate, "dgp"))
    return generate_cohort(params)


def _row(scenario, replicate, metric, value, method="", feature="", t=""):
    return {
        "scenario_id": scenario["scenario_id"], "n": scenario["n"],
        "d": scenario["d"], "beta": scenario["beta"],
        "event_rate": scenario["event_rate"], "m_strata": scenario["m_strata"],
        "replicate": replicate, "metric": metric, "method": method,
        "feature": feature, "t": t, "value": value,
    }


def _step12_rows(scenario, replicate, config, cohort, truth, surface):
    rows = []
    theta = config.horizon
    psi = surface.psi_hat
    psi_true = truth.ite_matrix(theta)
    for t in range(1, theta + 1):
        rows.append(_row(scenario, replicate, "var_psi",
                         float(psi[:, t - 1].var()), t=t))
        rows.append(_row(scenario, replicate, "ate_initial",
                         float(psi[:, t - 1].mean()), t=t))
        rows.append(_row(scenario, replicate, "ate_true",
                         float(psi_true[:, t - 1].mean()), t=t))
        try:
            bias = pct_bias(float(psi[:, t - 1].mean()),
                            float(psi_true[:, t - 1].mean()))
            rows.append(_row(scenario, replicate, "ate_pct_bias_initial",
                             bias, t=t))
        except DegenerateDenominator:
            pass
    for t, value in enumerate(nrmse_curve(surface, psi_true), start=1):
        rows.append(_row(scenario, replicate, "nrmse", float(value), t=t))

    base_seed = module_seed(config.seed, scenario["scenario_id"], replicate,
                            "importance")
    psi_theta = psi[:, -1]
    for k, method in enumerate(config.importance_methods):
        # per-method stream: adding or removing methods leaves the others'
        # scores untouched
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=base_seed, spawn_key=(k,)))
        curve = score_features(psi_theta, cohort.x, method, rng,
                               config.scorers.get(method))
        result = select_features(curve)
        ppv, tpr, hits = ppv_tpr(result.selected, TRUE_FEATURES)
        rows.append(_row(scenario, replicate, "ppv", ppv, method=method))
        rows.append(_row(scenario, replicate, "tpr", tpr, method=method))
        rows.append(_row(scenario, replicate, "n_selected",
                         float(len(result.selected)), method=method))
        for j in range(cohort.dim):
            rows.append(_row(scenario, replicate, "selected",
                             float(j in result.selected), method=method,
                             feature=cohort.feature_names[j]))
    return rows


def run_replicate_exp1(scenario: dict, replicate: int, config: RunConfig):
    cohort, truth = _simulate(scenario, replicate, config)
    models = fit_outcome_models(cohort, config.learner_specs(),
                                seed=module_seed(config.seed,
                                                 scenario["scenario_id"],
                                                 replicate, "outcome"))
    surface = estimate_ite(models, cohort)
    return _step12_rows(scenario, replicate, config, cohort, truth, surface)


def _stratum_for(config: RunConfig, cohort: Cohort, scenario: dict):
    spec = dict(config.stratum)
    name = spec.get("feature", "x2")
    if name not in cohort.feature_names:
        raise ValueError(f"stratum feature '{name}' not in cohort")
    feature = cohort.feature_names.index(name)
    strata = stratify(cohort, feature, q=scenario["m_strata"], mode="equal")
    wanted = spec.get("q", 1)
    for st in strata:
        if st.q == wanted:
            return st
    raise ValueError(f"stratum q={wanted} is empty")


def run_replicate_exp2(scenario: dict, replicate: int, config: RunConfig):
    cohort, truth = _simulate(scenario, replicate, config)
    models = fit_outcome_models(cohort, config.learner_specs(),
                                seed=module_seed(config.seed,
                                                 scenario["scenario_id"],
                                                 replicate, "outcome"))
    surface = estimate_ite(models, cohort)
    rows = _step12_rows(scenario, replicate, config, cohort, truth, surface)

    fits = fit_nuisances(cohort, config.learner_specs(),
                         seed=module_seed(config.seed,
                                          scenario["scenario_id"],
                                          replicate, "nuisance"))
    step = config.tmle.get("step_size", 1e-3)
    max_steps = config.tmle.get("max_steps", 5000)
    psi_true = truth.ite_matrix(config.horizon)

    target_global = one_step_target(cohort, fits, surface, step_size=step,
                                    max_steps=max_steps)
    rows.append(_row(scenario, replicate, "tmle_steps",
                     float(target_global.steps)))
    rows.append(_row(scenario, replicate, "tmle_converged",
                     float(target_global.converged)))
    for t in range(1, config.horizon + 1):
        est = target_global.ate(t)
        rows.append(_row(scenario, replicate, "ate_adjusted", est, t=t))
        try:
            rows.append(_row(scenario, replicate, "ate_pct_bias_adjusted",
                             pct_bias(est, float(psi_true[:, t - 1].mean())),
                             t=t))
        except DegenerateDenominator:
            pass

    stratum = _stratum_for(config, cohort, scenario)
    if scenario["m_strata"] > 1 and \
            config.tmle.get("stratum_targeting", "global") == "subset":
        # optional mode: re-solve the influence equation inside the stratum
        target_stratum = one_step_target(cohort, fits, surface, step_size=step,
                                         max_steps=max_steps,
                                         subset=stratum.members)
    else:
        target_stratum = target_global
    est_curve = mcate_curve(target_stratum, stratum)
    true_curve = psi_true[stratum.members].mean(axis=0)
    rows.append(_row(scenario, replicate, "stratum_size",
                     float(stratum.size)))
    for t in range(1, config.horizon + 1):
        rows.append(_row(scenario, replicate, "stratum_estimate",
                         float(est_curve[t - 1]), t=t))
        try:
            rows.append(_row(scenario, replicate, "stratum_pct_bias",
                             pct_bias(float(est_curve[t - 1]),
                                      float(true_curve[t - 1])), t=t))
        except DegenerateDenominator:
            pass
    return rows


def _run_one(args):
    which, scenario, replicate, config = args
    runner = run_replicate_exp1 if which == "exp1" else run_replicate_exp2
    try:
        rows = runner(scenario, replicate, config)
        return (scenario["scenario_id"], replicate), rows, None
    except Exception as exc:
        return (scenario["scenario_id"], replicate), \
            [_row(scenario, replicate, "replicate_failed", 1.0)], \
            f"{type(exc).__name__}: {exc}"


@dataclass
class ExperimentReport:
    rows: list
    config_hash: str
    seed: int
    failures: list = field(default_factory=list)

    def summary(self) -> dict:
        groups: dict = {}
        for row in self.rows:
            key = (row["scenario_id"], row["metric"], row["method"],
                   row["feature"], row["t"])
            groups.setdefault(key, []).append(row["value"])
        agg = []
        for key in sorted(groups, key=repr):
            vals = np.asarray(groups[key], dtype=np.float64)
            scenario_id, metric, method, feature, t = key
            agg.append({
                "scenario_id": scenario_id, "metric": metric, "method": method,
                "feature": feature, "t": t, "mean": float(vals.mean()),
                "se": float(vals.std(ddof=1) / np.sqrt(len(vals)))
                if len(vals) > 1 else 0.0,
                "replicates": int(len(vals)),
            })
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "package_version": __version__,
            "numpy_version": np.__version__,
            "failed_replicates": self.failures,
            "n_failures": len(self.failures),
            "aggregates": agg,
        }

    def write(self, out_dir, stem: str):
        import pathlib

        out = pathlib.Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{stem}_metrics.csv"
        cols = ["scenario_id", "n", "d", "beta", "event_rate", "m_strata",
                "replicate", "metric", "method", "feature", "t", "value"]
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=cols)
            writer.writeheader()
            for row in self.rows:
                row = dict(row)
                row["value"] = repr(float(row["value"]))
                writer.writerow(row)
        with open(out / f"{stem}_summary.json", "w") as fh:
            json.dump(self.summary(), fh, sort_keys=True, indent=1)
        return csv_path


def _run_grid(which: str, config: RunConfig, threads: int) -> ExperimentReport:
    tasks = [(which, scen, rep, config)
             for scen in config.scenarios()
             for rep in range(config.replicates)]
    results = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    results.sort(key=lambda item: item[0])
    rows, failures = [], []
    for key, rep_rows, err in results:
        rows.extend(rep_rows)
        if err is not None:
            failures.append({"scenario_id": key[0], "replicate": key[1],
                             "error": err})
    return ExperimentReport(rows=rows, config_hash=config.config_hash(),
                            seed=config.seed, failures=failures)


def run_experiment1(config: RunConfig, threads: int = 1) -> ExperimentReport:
    """Feature-identification accuracy over the configured grid."""
    return _run_grid("exp1", config, threads)


def run_experiment2(config: RunConfig, threads: int = 1) -> ExperimentReport:
    """Effect-estimation accuracy (with targeting) over the configured grid."""
    return _run_grid("exp2", config, threads)


def run_pipeline(cohort: Cohort, config: RunConfig, seed: int | None = None,
                 with_bootstrap: bool = False) -> dict:
    """Steps 1-3 on an ingested cohort, without truth-dependent metrics."""
    master = seed if seed is not None else config.seed
    specs = config.learner_specs()
    models = fit_outcome_models(cohort, specs,
                                seed=module_seed(master, 0, 0, "outcome"))
    surface = estimate_ite(models, cohort)
    imp_seed = module_seed(master, 0, 0, "importance")
    selections = {}
    for k, method in enumerate(config.importance_methods):
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=imp_seed, spawn_key=(k,)))
        curve = score_features(surface.psi_hat[:, -1], cohort.x, method, rng,
                               config.scorers.get(method))
        result = select_features(curve)
        selections[method] = {
            "scores": [float(v) for v in curve.scores],
            "knee_rank": result.knee_rank,
            "no_knee": result.no_knee,
            "selected": [cohort.feature_names[j] for j in result.selected],
        }
    fits = fit_nuisances(cohort, specs, seed=module_seed(master, 0, 0,
                                                         "nuisance"))
    target = one_step_target(cohort, fits, surface,
                             step_size=config.tmle.get("step_size", 1e-3),
                             max_steps=config.tmle.get("max_steps", 5000))
    out = {
        "n": cohort.n,
        "selections": selections,
        "ate_adjusted": [target.ate(t) for t in range(1, config.horizon + 1)],
        "ate_initial": [surface.ate(t) for t in range(1, config.horizon + 1)],
        "tmle": {"steps": target.steps, "converged": target.converged,
                 "positivity_warning": fits.positivity_warning},
        "stacks": {
            arm: {
                "weights": dict(zip(stack.names, map(float, stack.weights))),
                "cv_loss": dict(zip(stack.names, map(float, stack.cv_loss))),
                "stack_cv_loss": float(stack.stack_cv_loss),
            }
            for arm, stack in (("treated", models.model_treated),
                               ("control", models.model_control))
        },
    }
    if with_bootstrap:
        b = config.bootstrap.get("replicates", 30)
        m = min(config.bootstrap.get("sample_size", 8000), cohort.n)
        stability = bootstrap_stability(
            cohort, config.importance_methods, b=b, m=m,
            seed=module_seed(master, 0, 0, "bootstrap"),
            learner_specs=specs, scorer_params=config.scorers)
        out["bootstrap"] = {
            "replicates": stability["replicates"],
            "sample_size": stability["sample_size"],
            "failures": stability["failures"],
            "counts": {meth: {cohort.feature_names[j]: int(c)
                              for j, c in enumerate(counts) if c > 0}
                       for meth, counts in stability["counts"].items()},
        }
    return out
