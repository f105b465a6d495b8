"""Monte Carlo evaluation of testing procedures on simulated data.

Every replication draws its data from a generator seeded with (master seed, replication index), applies every method
at every FDR level and records the false discovery proportion V / max(R, 1) and the true positive rate against the
simulation ground truth. Results are reduced in replication order, so the report does not depend on the number of
workers.

Attributes:
    method_lookup (dict): Lookup with the method name (str) as key and the method function as value.
    method_names (list[str]): Names of the methods.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats
from uncertainties import ufloat

from adapt_gmm.baselines.fdr import bh, storey_bh
from adapt_gmm.classifier.models import ClassifierConfig
from adapt_gmm.engine.engine import RunResult, run
from adapt_gmm.engine.oracle import OraclePolicy
from adapt_gmm.masking.hypotheses import HypothesisTable
from adapt_gmm.masking.masking import default_params, mask_array, symmetric_params
from adapt_gmm.simlab.scenarios import LogisticSimConfig, SimData, get_scenario
from adapt_gmm.simlab.utilities import perform_parallel_simulation, perform_trivial_simulation, \
    replication_columns, replication_rng
from adapt_gmm.workmodel.gmm import EMConfig
from adapt_gmm.workmodel.policy import GmmRevealPolicy
from adapt_gmm.workmodel.selection import default_candidates


logger = logging.getLogger(__name__)


def _gmm_policy(sim: SimData, config: LogisticSimConfig, seed: int) -> GmmRevealPolicy:
    has_covariates = sim.table.x.shape[1] > 0
    candidates = default_candidates(config.classes, config.spline_dfs, config.classifier,
                                    has_covariates=has_covariates)
    em_config = EMConfig(seed=seed, classifier=ClassifierConfig(seed=seed))
    return GmmRevealPolicy(candidates=candidates, criterion=config.criterion, config=em_config)


def method_bh(sim: SimData, alpha: float, config: LogisticSimConfig, seed: int) -> np.ndarray:
    return bh(sim.table.p, alpha).indices


def method_storey(sim: SimData, alpha: float, config: LogisticSimConfig, seed: int) -> np.ndarray:
    return storey_bh(sim.table.p, alpha).indices


def method_adaptg(sim: SimData, alpha: float, config: LogisticSimConfig, seed: int) -> np.ndarray:
    params = default_params(len(sim.table), alpha, null=sim.table.null)
    return run(sim.table, params, alpha, _gmm_policy(sim, config, seed)).rejected


def method_adaptg_symmetric(sim: SimData, alpha: float, config: LogisticSimConfig, seed: int) -> np.ndarray:
    return run(sim.table, symmetric_params(), alpha, _gmm_policy(sim, config, seed)).rejected


def method_adaptg_oracle(sim: SimData, alpha: float, config: LogisticSimConfig, seed: int) -> np.ndarray:
    if sim.truth is None:
        raise ValueError("The oracle method needs a scenario with known density.")
    params = default_params(len(sim.table), alpha, null=sim.table.null)
    return run(sim.table, params, alpha, OraclePolicy(sim.truth)).rejected


method_lookup = {
    "bh": method_bh,
    "storey": method_storey,
    "adaptg": method_adaptg,
    "adaptg-symmetric": method_adaptg_symmetric,
    "adaptg-oracle": method_adaptg_oracle,
}

method_names = list(method_lookup)


def rejection_metrics(rejected: np.ndarray, is_null: np.ndarray) -> dict:
    """FDP, TPR, R and V of one rejection set."""
    rejected = np.asarray(rejected, dtype=int)
    R = len(rejected)
    V = int(np.sum(is_null[rejected]))
    n_nonnull = int(np.sum(~is_null))
    true_rejections = R - V
    return {
        "fdp": V / max(R, 1),
        "tpr": true_rejections / n_nonnull if n_nonnull > 0 else 0.0,
        "rejections": R,
        "false_discoveries": V,
    }


def _replication(args: dict) -> dict:
    """Runs every method at every level on one dataset. Takes a single argument for the process pool."""
    config, replication = args["config"], args["replication"]
    scenario = get_scenario(args["scenario"])
    sim = scenario.generate(config, replication_rng(config.seed, replication))
    seed = int(replication_rng(config.seed, replication, stream=1).integers(2 ** 31))

    rows, errors = [], []
    for method in args["methods"]:
        for alpha in config.alpha_grid:
            try:
                rejected = method_lookup[method](sim, alpha, config, seed)
            except Exception as error:
                logger.warning("Method %s failed on replication %d at alpha=%g: %s", method, replication, alpha,
                               error)
                errors.append({"method": method, "alpha": alpha, "replication": replication, "error": repr(error)})
                continue
            rows.append({"method": method, "alpha": alpha, "replication": replication,
                         **rejection_metrics(rejected, sim.is_null)})
    return {"replication": replication, "rows": rows, "errors": errors}


@dataclass(frozen=True, eq=False)
class EvalReport:
    """Results of evaluate().

        Attributes:
            frame (pd.DataFrame): One row per method, alpha and replication with the columns replication_columns.
            errors (pd.DataFrame): One row per failed method run.
            scenario (str): Scenario name.
            config (LogisticSimConfig): Settings of the study.
            methods (tuple): Methods evaluated.
    """

    frame: pd.DataFrame
    errors: pd.DataFrame
    scenario: str
    config: LogisticSimConfig
    methods: tuple = field(default_factory=tuple)

    def summary(self) -> pd.DataFrame:
        """Mean FDR and TPR with Monte Carlo standard errors per method and alpha."""
        rows = []
        for method in self.methods:
            for alpha in self.config.alpha_grid:
                part = self.frame[(self.frame["method"] == method) & (self.frame["alpha"] == alpha)]
                count = len(part)
                failed = int(np.sum((self.errors["method"] == method) & (self.errors["alpha"] == alpha))) \
                    if len(self.errors) else 0
                rows.append({
                    "method": method,
                    "alpha": alpha,
                    "fdr": float(part["fdp"].mean()) if count else float("nan"),
                    "fdr_se": _standard_error(part["fdp"]),
                    "tpr": float(part["tpr"].mean()) if count else float("nan"),
                    "tpr_se": _standard_error(part["tpr"]),
                    "replications": count,
                    "errors": failed,
                })
        return pd.DataFrame(rows)

    def to_json_summary(self) -> dict:
        """Summary as lookup, with every estimate rendered as "mean+/-se"."""
        summary = self.summary()
        results = {}
        for row in summary.itertuples(index=False):
            results.setdefault(row.method, {})[f"{row.alpha:g}"] = {
                "fdr": _render(row.fdr, row.fdr_se),
                "tpr": _render(row.tpr, row.tpr_se),
                "fdr_mean": row.fdr,
                "fdr_se": row.fdr_se,
                "tpr_mean": row.tpr,
                "tpr_se": row.tpr_se,
                "replications": row.replications,
                "errors": row.errors,
            }
        return {"scenario": self.scenario, "config": self.config.to_dict(), "methods": list(self.methods),
                "results": results}

    def save(self, folder: str, prefix: str="report") -> tuple:
        """Writes <prefix>.csv (long format) and <prefix>.json (summary); returns both paths."""
        os.makedirs(folder, exist_ok=True)
        csv_path = os.path.join(folder, f"{prefix}.csv")
        json_path = os.path.join(folder, f"{prefix}.json")
        self.frame.to_csv(csv_path, index=False, float_format="%.10g")
        with open(json_path, "w", encoding="utf8") as file:
            json.dump(self.to_json_summary(), file, indent=2, sort_keys=True)
        logger.info("Saved report to %s and %s.", csv_path, json_path)
        return csv_path, json_path


def _standard_error(values: pd.Series) -> float:
    if len(values) < 2:
        return float("nan")
    return float(values.std(ddof=1) / np.sqrt(len(values)))


def _render(mean: float, se: float) -> str:
    if not np.isfinite(mean):
        return "nan"
    return f"{ufloat(mean, se if np.isfinite(se) else 0.0)}"


def evaluate(methods: Sequence[str],
             config: LogisticSimConfig,
             scenario: str="logistic-onesided",
             parallel: bool=True,
             max_workers: Optional[int]=None) -> EvalReport:
    """Evaluates the methods on config.replications seeded datasets of the scenario.

    Args:
        methods (Sequence[str]): Names from method_names.
        config (LogisticSimConfig): Size, levels, replications and seed.
        scenario (str): Scenario name.
        parallel (bool): Whether to use a process pool.
        max_workers (int): Maximal number of workers.

    Returns:
        The EvalReport.
    """
    methods = tuple(methods)
    if not methods:
        raise ValueError("Expected at least one method.")
    unknown = [method for method in methods if method not in method_lookup]
    if unknown:
        raise ValueError(f"Unknown methods {unknown}. Expected names from {method_names}.")
    get_scenario(scenario)

    args = [{"scenario": scenario, "config": config, "methods": methods, "replication": r}
            for r in range(config.replications)]
    runner = perform_parallel_simulation if parallel else perform_trivial_simulation
    results = runner(args=args, simulation=_replication, max_workers=max_workers)

    rows = [row for result in results for row in result["rows"]]
    errors = [error for result in results for error in result["errors"]]
    frame = pd.DataFrame(rows, columns=replication_columns)
    frame = frame.sort_values(["method", "alpha", "replication"], kind="mergesort").reset_index(drop=True)
    error_frame = pd.DataFrame(errors, columns=["method", "alpha", "replication", "error"])
    if len(error_frame):
        logger.warning("%d method runs failed and are excluded.", len(error_frame))
    return EvalReport(frame=frame, errors=error_frame, scenario=scenario, config=config, methods=methods)


@dataclass(frozen=True)
class PairedComparison:
    """Paired TPR difference of two methods at one level.

        Attributes:
            mean_difference (float): Mean of TPR_a - TPR_b over replications where both ran.
            standard_error (float): Standard error of the mean difference.
            p_value (float): One-sided p-value of the paired t-test for a positive difference.
            replications (int): Number of paired replications.
    """

    mean_difference: float
    standard_error: float
    p_value: float
    replications: int


def paired_comparison(report: EvalReport, method_a: str, method_b: str, alpha: float,
                      metric: str="tpr") -> PairedComparison:
    """Tests whether method_a has a larger metric than method_b, paired over replications."""
    frame = report.frame[np.isclose(report.frame["alpha"], alpha)]
    a = frame[frame["method"] == method_a].set_index("replication")[metric]
    b = frame[frame["method"] == method_b].set_index("replication")[metric]
    a, b = a.align(b, join="inner")
    if len(a) < 2:
        raise ValueError(f"Expected at least two paired replications but found {len(a)}.")

    difference = (a - b).to_numpy()
    se = float(np.std(difference, ddof=1) / np.sqrt(len(difference)))
    if se == 0:
        p_value = 0.0 if np.mean(difference) > 0 else 1.0
    else:
        p_value = float(stats.ttest_rel(a.to_numpy(), b.to_numpy(), alternative="greater").pvalue)
    return PairedComparison(float(np.mean(difference)), se, p_value, len(difference))


def summary_metrics(report: EvalReport, baselines: Sequence[str]=("bh", "storey"), epsilon: float=1e-3) \
        -> pd.DataFrame:
    """Aggregate performance of every method over the FDR levels.

    Columns:
        fdr_violation: fraction of levels with FDR above alpha + 3 SE.
        mean_tpr_rank: mean rank of the TPR among the methods, 1 is best.
        below_baseline: fraction of levels with TPR below the best baseline.
        log_ratio_sd: standard deviation over replications of log((TPR + eps) / (best baseline TPR + eps)),
            averaged over the levels.

    Args:
        report (EvalReport): Evaluation results.
        baselines (Sequence[str]): Methods forming the baseline, those present in the report are used.
        epsilon (float): Offset of the log ratio.

    Returns:
        DataFrame with one row per method.
    """
    summary = report.summary()
    summary["rank"] = summary.groupby("alpha")["tpr"].rank(ascending=False, method="average")
    baselines = [b for b in baselines if b in report.methods]
    frame = report.frame

    if baselines:
        best = frame[frame["method"].isin(baselines)].groupby(["alpha", "replication"])["tpr"].max()
        best_mean = summary[summary["method"].isin(baselines)].groupby("alpha")["tpr"].max()

    rows = []
    for method in report.methods:
        own = summary[summary["method"] == method]
        violation = own["fdr"] > own["alpha"] + 3 * own["fdr_se"].fillna(0.0)
        row = {
            "method": method,
            "fdr_violation": float(np.mean(violation)),
            "mean_tpr_rank": float(own["rank"].mean()),
            "below_baseline": float("nan"),
            "log_ratio_sd": float("nan"),
        }
        if baselines:
            row["below_baseline"] = float(np.mean(own["tpr"].to_numpy() < best_mean.reindex(own["alpha"]).to_numpy()))
            tpr = frame[frame["method"] == method].set_index(["alpha", "replication"])["tpr"]
            tpr, reference = tpr.align(best, join="inner")
            ratio = np.log((tpr + epsilon) / (reference + epsilon))
            spread = ratio.groupby(level="alpha").std(ddof=1)
            row["log_ratio_sd"] = float(spread.mean())
        rows.append(row)
    return pd.DataFrame(rows)


def null_diagnostics(result: RunResult, table: HypothesisTable, is_null: np.ndarray) -> pd.DataFrame:
    """Masked red nulls V_t and masked blue nulls U_t after every reveal of a finished run.

    Args:
        result (RunResult): Outcome of engine.run().
        table (HypothesisTable): The hypotheses of the run.
        is_null (np.ndarray): Ground-truth null status.

    Returns:
        DataFrame with the columns step, v_count and u_count, starting with step 0.
    """
    _, maskable, bits = mask_array(table.p, result.params)
    is_null = np.asarray(is_null, dtype=bool)
    red_null = (maskable & is_null & (bits == 0)).astype(int)
    blue_null = (maskable & is_null & (bits == 1)).astype(int)

    order = np.asarray(result.reveal_order, dtype=int)
    v = red_null.sum() - np.concatenate([[0], np.cumsum(red_null[order])])
    u = blue_null.sum() - np.concatenate([[0], np.cumsum(blue_null[order])])
    return pd.DataFrame({"step": np.arange(len(order) + 1), "v_count": v, "u_count": u})
