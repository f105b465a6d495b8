import json

import pytest
import numpy as np
import pandas as pd

from adapt_gmm.baselines.fdr import bh
from adapt_gmm.cli.main import EXIT_INPUT_ERROR, EXIT_NO_REJECTIONS, EXIT_OK, build_parser, main
from adapt_gmm.configuration import defaults
from adapt_gmm.engine.engine import trace_columns


def write_csv(folder, text: str, name: str="input.csv") -> str:
    path = folder / name
    path.write_text(text, encoding="utf8")
    return str(path)


def test_toy_file_end_to_end(tmp_path):
    path = write_csv(tmp_path, "id,p\nh1,1e-9\nh2,0.001\nh3,0.5\nh4,0.6\n")
    out = tmp_path / "out"
    code = main(["test", "--input", path, "--alpha", "0.1", "--mask-alpha-m", "0.04", "--out-dir", str(out)])
    assert code == EXIT_OK, f"Expected exit code {EXIT_OK} but found {code}."

    rejections = pd.read_csv(out / "rejections.csv")
    assert rejections["rejected"].tolist() == [1, 1, 0, 0], \
        f"Expected the two red hypotheses to be rejected but found {rejections['rejected'].tolist()}."
    with open(out / "rejections.csv", encoding="utf8") as file:
        assert file.readline().strip() == "id,p,z,rejected", "Expected the rejections header id,p,z,rejected."
    with open(out / "trace.csv", encoding="utf8") as file:
        assert file.readline().strip() == ",".join(trace_columns), \
            f"Expected the trace header {','.join(trace_columns)}."
    with open(out / "diagnostics.json", encoding="utf8") as file:
        diagnostics = json.load(file)
    assert diagnostics["stop_step"] == 0 and diagnostics["rejections"] == 2, \
        f"Expected to stop before any reveal with two rejections but found {diagnostics}."
    assert diagnostics["masking"]["alpha_m"] == 0.04, f"Expected the override alpha_m=0.04 but found {diagnostics}."


@pytest.mark.parametrize("method", ["bh", "storey"])
def test_baseline_delegation(tmp_path, method):
    p = np.random.default_rng(100).beta(0.3, 2.0, 200)
    rows = "\n".join(f"h{i},{v:.12g}" for i, v in enumerate(p))
    path = write_csv(tmp_path, f"id,p\n{rows}\n")
    out = tmp_path / method
    code = main(["test", "--input", path, "--alpha", "0.1", "--method", method, "--out-dir", str(out)])
    flags = pd.read_csv(out / "rejections.csv")["rejected"].to_numpy()
    assert code == (EXIT_OK if flags.sum() > 0 else EXIT_NO_REJECTIONS), f"Expected a consistent exit code: {code}."
    assert not (out / "trace.csv").exists(), "Expected no trace for a baseline."
    if method == "bh":
        expected = bh(np.array([float(f"{v:.12g}") for v in p]), 0.1).indices
        assert np.flatnonzero(flags).tolist() == expected.tolist(), \
            f"Expected the Benjamini-Hochberg rejections {expected} but found {np.flatnonzero(flags)}."


def test_no_rejections_exit_code(tmp_path):
    path = write_csv(tmp_path, "id,p\na,0.95\nb,0.97\nc,0.99\n")
    code = main(["test", "--input", path, "--out-dir", str(tmp_path / "out")])
    assert code == EXIT_NO_REJECTIONS, f"Expected exit code {EXIT_NO_REJECTIONS} but found {code}."
    assert pd.read_csv(tmp_path / "out" / "rejections.csv")["rejected"].sum() == 0, "Expected no rejection flags."


def test_interval_null_without_se_fails_before_computation(tmp_path, capsys):
    path = write_csv(tmp_path, "id,z\na,3.0\nb,0.1\n")
    out = tmp_path / "out"
    code = main(["test", "--input", path, "--null", "interval:1", "--out-dir", str(out)])
    assert code == EXIT_INPUT_ERROR, f"Expected exit code {EXIT_INPUT_ERROR} but found {code}."
    assert not out.exists(), "Expected no output for an invalid configuration."
    assert "interval null" in capsys.readouterr().err, "Expected the error to name the interval null."


def test_parse_error_names_row_and_column(tmp_path, capsys):
    path = write_csv(tmp_path, "id,p\na,0.1\nb,zero\n")
    code = main(["test", "--input", path, "--out-dir", str(tmp_path / "out")])
    assert code == EXIT_INPUT_ERROR, f"Expected exit code {EXIT_INPUT_ERROR} but found {code}."
    assert "Row 2, column 'p'" in capsys.readouterr().err, "Expected the offending row and column in the error."


def test_test_defaults_match_module_defaults():
    args = build_parser().parse_args(["test", "--input", "x.csv"])
    assert args.alpha == defaults.ALPHA and args.criterion == defaults.CRITERION and args.seed == defaults.SEED, \
        f"Expected the module defaults but found {args}."
    assert tuple(args.classes) == defaults.CLASSES and args.classifier == defaults.CLASSIFIER, \
        f"Expected the default model grid but found {args}."
    assert args.mask_alpha_m is None and args.mask_lambda is None and args.mask_nu is None, \
        "Expected the masking parameters to default to auto."


def test_simulate_is_deterministic(tmp_path):
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = main(["simulate", "--scenario", "logistic-onesided", "--reps", "2", "--n", "200", "--seed", "7",
                     "--methods", "bh,storey", "--alpha-grid", "0.05,0.1,0.2", "--workers", "1",
                     "--out-dir", str(out)])
        assert code == EXIT_OK, f"Expected exit code {EXIT_OK} but found {code}."
        outputs.append(((out / "report.csv").read_bytes(), (out / "report.json").read_bytes()))
    assert outputs[0] == outputs[1], "Expected identical reports for identical seeds."

    summary = json.loads(outputs[0][1])
    assert sorted(summary["results"]["bh"]) == ["0.05", "0.1", "0.2"], \
        f"Expected three alpha rows per method but found {summary['results']['bh']}."
    assert summary["config"]["seed"] == 7 and summary["config"]["replications"] == 2, \
        f"Expected the flags in the configuration but found {summary['config']}."


def test_simulate_from_config_file(tmp_path):
    config = {"name": "tiny", "content": {"scenario": "small-sample", "n": 40, "replications": 2,
                                          "alpha_grid": [0.1], "methods": ["bh"]}}
    path = write_csv(tmp_path, json.dumps(config), name="tiny.json")
    out = tmp_path / "out"
    code = main(["simulate", "--config", path, "--workers", "1", "--out-dir", str(out)])
    assert code == EXIT_OK, f"Expected exit code {EXIT_OK} but found {code}."
    frame = pd.read_csv(out / "report.csv")
    assert set(frame["method"]) == {"bh"} and len(frame) == 2, f"Expected two bh rows but found {frame}."


def test_simulate_rejects_unknown_scenario():
    with pytest.raises(SystemExit):
        main(["simulate", "--scenario", "yeast"])


def test_simulate_rejects_unknown_method(tmp_path, capsys):
    code = main(["simulate", "--methods", "knockoff", "--reps", "1", "--out-dir", str(tmp_path)])
    assert code == EXIT_INPUT_ERROR, f"Expected exit code {EXIT_INPUT_ERROR} but found {code}."
    assert "knockoff" in capsys.readouterr().err, "Expected the unknown method in the error."
