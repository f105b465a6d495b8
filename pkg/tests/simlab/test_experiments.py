import pytest
import numpy as np
import pandas as pd

from adapt_gmm.engine.engine import run
from adapt_gmm.engine.policies import IndexOrderPolicy
from adapt_gmm.masking.hypotheses import HypothesisTable
from adapt_gmm.masking.masking import MaskingParams
from adapt_gmm.simlab.experiments import EvalReport, evaluate, null_diagnostics, paired_comparison, \
    rejection_metrics, summary_metrics
from adapt_gmm.simlab.scenarios import LogisticSimConfig, get_scenario
from adapt_gmm.simlab.utilities import perform_trivial_simulation, replication_columns, replication_rng


small_config = LogisticSimConfig(n=400, replications=4, alpha_grid=(0.05, 0.1, 0.2), seed=7)


def test_rejection_metrics():
    is_null = np.array([True, True, False, False, False])
    result = rejection_metrics([0, 2, 3], is_null)
    assert result == {"fdp": 1 / 3, "tpr": 2 / 3, "rejections": 3, "false_discoveries": 1}, \
        f"Expected FDP 1/3 and TPR 2/3 but found {result}."
    empty = rejection_metrics([], is_null)
    assert empty["fdp"] == 0.0 and empty["tpr"] == 0.0, f"Expected zero FDP without rejections but found {empty}."


def test_replication_rng_streams():
    first = replication_rng(3, 5).random(4)
    assert np.array_equal(first, replication_rng(3, 5).random(4)), "Expected equal streams for equal seeds."
    assert not np.array_equal(first, replication_rng(3, 6).random(4)), "Expected different replications to differ."
    assert not np.array_equal(first, replication_rng(3, 5, stream=1).random(4)), "Expected the streams to differ."


def test_trivial_simulation_orders_by_replication():
    args = [{"replication": r} for r in (2, 0, 1)]
    result = perform_trivial_simulation(args, lambda arg: {"replication": arg["replication"]})
    assert [r["replication"] for r in result] == [0, 1, 2], f"Expected replication order but found {result}."


def test_evaluate_baselines():
    report = evaluate(["bh", "storey"], small_config, parallel=False)
    assert list(report.frame.columns) == replication_columns, \
        f"Expected the columns {replication_columns} but found {list(report.frame.columns)}."
    assert len(report.frame) == 2 * 3 * 4, \
        f"Expected one row per method, alpha and replication but found {len(report.frame)}."
    assert np.all(report.frame["false_discoveries"] <= report.frame["rejections"]), "Expected V <= R."

    summary = report.summary()
    assert len(summary) == 6 and set(summary["replications"]) == {4}, f"Expected three levels per method: {summary}."
    storey = report.frame[report.frame["method"] == "storey"]["rejections"].to_numpy()
    plain = report.frame[report.frame["method"] == "bh"]["rejections"].to_numpy()
    assert np.all(storey >= plain), "Expected Storey to reject at least as many hypotheses as BH."


def test_true_and_false_rejections_add_up():
    config = LogisticSimConfig(n=300, replications=1, seed=3)
    sim = get_scenario("logistic-onesided").generate(config, replication_rng(config.seed, 0))
    report = evaluate(["bh"], config, parallel=False)
    row = report.frame[report.frame["alpha"] == 0.1].iloc[0]
    true_rejections = row["tpr"] * sim.n_nonnull
    assert row["false_discoveries"] + true_rejections == pytest.approx(row["rejections"]), \
        f"Expected V + true rejections = R but found {row}."


def test_evaluate_is_reproducible(tmp_path):
    first = evaluate(["bh", "adaptg-oracle"], small_config, parallel=False)
    second = evaluate(["bh", "adaptg-oracle"], small_config, parallel=False)
    pd.testing.assert_frame_equal(first.frame, second.frame)

    first.save(str(tmp_path / "a"))
    second.save(str(tmp_path / "b"))
    for name in ("report.csv", "report.json"):
        with open(tmp_path / "a" / name, "rb") as a, open(tmp_path / "b" / name, "rb") as b:
            assert a.read() == b.read(), f"Expected byte-identical {name} files."
    with open(tmp_path / "a" / "report.csv", encoding="utf8") as file:
        header = file.readline().strip()
    assert header == "method,alpha,replication,fdp,tpr,rejections,false_discoveries", \
        f"Expected the long-format header but found {header}."


def test_evaluate_records_method_errors():
    config = LogisticSimConfig(n=50, replications=2, alpha_grid=(0.1,))
    report = evaluate(["bh", "adaptg-oracle"], config, scenario="small-sample", parallel=False)
    assert len(report.errors) == 2 and set(report.errors["method"]) == {"adaptg-oracle"}, \
        f"Expected two failed oracle runs but found {report.errors}."
    summary = report.summary().set_index("method")
    assert summary.loc["adaptg-oracle", "errors"] == 2 and summary.loc["adaptg-oracle", "replications"] == 0, \
        f"Expected the failures to be counted but found {summary}."
    assert report.to_json_summary()["results"]["adaptg-oracle"]["0.1"]["fdr"] == "nan", \
        "Expected a missing estimate to be rendered as nan."


@pytest.mark.parametrize(
    "kwargs",
    [{"methods": []},
     {"methods": ["bh", "knockoff"]},
     {"methods": ["bh"], "scenario": "yeast"}]
)
def test_evaluate_validation(kwargs):
    with pytest.raises(ValueError):
        evaluate(config=small_config, parallel=False, **kwargs)


def synthetic_report() -> EvalReport:
    rows = []
    for replication in range(10):
        rows.append({"method": "a", "alpha": 0.1, "replication": replication, "fdp": 0.05,
                     "tpr": 0.5 + 0.01 * replication, "rejections": 20, "false_discoveries": 1})
        rows.append({"method": "bh", "alpha": 0.1, "replication": replication, "fdp": 0.08,
                     "tpr": 0.3 + 0.02 * (replication % 3), "rejections": 10, "false_discoveries": 1})
    frame = pd.DataFrame(rows, columns=replication_columns)
    errors = pd.DataFrame(columns=["method", "alpha", "replication", "error"])
    config = LogisticSimConfig(n=100, replications=10, alpha_grid=(0.1,))
    return EvalReport(frame=frame, errors=errors, scenario="logistic-onesided", config=config, methods=("a", "bh"))


def test_paired_comparison():
    comparison = paired_comparison(synthetic_report(), "a", "bh", 0.1)
    assert comparison.replications == 10 and comparison.mean_difference > 0.15, \
        f"Expected a clear positive difference but found {comparison}."
    assert comparison.p_value < 0.01, f"Expected a significant difference but found p={comparison.p_value}."
    with pytest.raises(ValueError):
        paired_comparison(synthetic_report(), "a", "storey", 0.1)


def test_summary_metrics():
    metrics = summary_metrics(synthetic_report()).set_index("method")
    assert metrics.loc["a", "mean_tpr_rank"] == 1.0 and metrics.loc["bh", "mean_tpr_rank"] == 2.0, \
        f"Expected method a to rank first but found {metrics}."
    assert metrics.loc["a", "below_baseline"] == 0.0 and metrics.loc["a", "fdr_violation"] == 0.0, \
        f"Expected method a to beat the baseline within the level but found {metrics}."


def test_json_summary_renders_uncertainties():
    results = synthetic_report().to_json_summary()["results"]
    assert "+/-" in results["a"]["0.1"]["tpr"], f"Expected a mean+/-se rendering but found {results['a']['0.1']}."


def test_null_diagnostics():
    p = np.array([0.5, 0.01, 0.6, 1e-9, 0.02])
    table = HypothesisTable.from_arrays(p=p)
    result = run(table, MaskingParams(0.04, 0.04, 0.9), 0.04, IndexOrderPolicy(), batch_size=1)
    frame = null_diagnostics(result, table, np.array([True, True, True, False, True]))
    assert frame.iloc[0].tolist() == [0, 2, 2], f"Expected V_0=2 and U_0=2 but found {frame.iloc[0].tolist()}."
    assert frame["u_count"].is_monotonic_decreasing and frame["v_count"].is_monotonic_decreasing, \
        "Expected the masked null counts never to grow."
    assert len(frame) == len(result.reveal_order) + 1, "Expected one row per reveal plus the initial state."


@pytest.mark.slow
@pytest.mark.parametrize("scenario", ["logistic-onesided", "logistic-point", "logistic-interval"])
def test_fdr_control_and_power(scenario):
    config = get_scenario(scenario).default_config(replications=50, classes=(2, 3), spline_dfs=(2, 3))
    report = evaluate(["bh", "storey", "adaptg"], config, scenario=scenario)
    summary = report.summary()
    adaptg = summary[summary["method"] == "adaptg"]
    assert np.all(adaptg["fdr"] <= adaptg["alpha"] + 3 * adaptg["fdr_se"]), f"Expected FDR control but found {adaptg}."
    for baseline in ("bh", "storey"):
        comparison = paired_comparison(report, "adaptg", baseline, 0.1)
        assert comparison.mean_difference > 0 and comparison.p_value < 0.01, \
            f"Expected a significant power gain over {baseline} but found {comparison}."


@pytest.mark.slow
def test_oracle_controls_fdr():
    config = get_scenario("logistic-onesided").default_config(replications=50)
    summary = evaluate(["adaptg-oracle"], config, scenario="logistic-onesided").summary()
    assert np.all(summary["fdr"] <= summary["alpha"] + 3 * summary["fdr_se"]), \
        f"Expected the oracle policy to control the FDR but found {summary}."


@pytest.mark.slow
def test_small_sample_rejections():
    config = get_scenario("small-sample").default_config(replications=200, alpha_grid=(0.05,))
    frame = evaluate(["adaptg", "adaptg-symmetric"], config, scenario="small-sample").frame
    adaptg = frame[frame["method"] == "adaptg"]
    symmetric = frame[frame["method"] == "adaptg-symmetric"]
    assert np.mean(adaptg["rejections"] >= 1) >= 0.9, \
        f"Expected at least one rejection in 90% of the runs but found {np.mean(adaptg['rejections'] >= 1)}."
    assert np.all(symmetric["rejections"] == 0), "Expected no rejections with symmetric masking."


@pytest.mark.slow
def test_spike_at_one_robustness():
    config = get_scenario("spike-at-one").default_config(replications=50, alpha_grid=(0.1,), classes=(2, 3),
                                                          spline_dfs=(2, 3))
    report = evaluate(["adaptg", "adaptg-symmetric"], config, scenario="spike-at-one")
    comparison = paired_comparison(report, "adaptg", "adaptg-symmetric", 0.1)
    assert comparison.mean_difference >= 0, f"Expected no power loss against symmetric masking but found {comparison}."
