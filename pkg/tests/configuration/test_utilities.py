import json
import multiprocessing
import os

import pytest

from adapt_gmm.configuration.utilities import THREADS_VARIABLE, get_thread_count, load_config
from adapt_gmm.simlab.experiments import method_names
from adapt_gmm.simlab.scenarios import LogisticSimConfig, get_scenario


simulations_folder = os.path.join(os.path.dirname(__file__), "..", "..", "configuration", "simulations")


def test_load_config_defaults_name(tmp_path):
    (tmp_path / "simulations").mkdir()
    (tmp_path / "simulations" / "tiny.json").write_text(json.dumps({"content": {"n": 10}}), encoding="utf8")
    config = load_config("simulations/tiny.json", folder=str(tmp_path))
    assert config == {"name": "tiny", "content": {"n": 10}}, f"Expected the file name as name but found {config}."


def test_load_config_requires_content(tmp_path):
    (tmp_path / "bad.json").write_text(json.dumps({"name": "bad"}), encoding="utf8")
    with pytest.raises(AssertionError):
        load_config("bad.json", folder=str(tmp_path))


@pytest.mark.parametrize(
    "filename",
    ["ci_onesided.json", "ci_point.json", "ci_interval.json", "full_onesided.json", "spike_at_one.json",
     "small_sample.json"]
)
def test_shipped_simulation_configurations(filename):
    config = load_config(filename, folder=simulations_folder)
    content = dict(config["content"])
    scenario = get_scenario(content.pop("scenario"))
    assert all(method in method_names for method in content.pop("methods")), f"Expected known methods in {filename}."
    sim_config = LogisticSimConfig.from_dict({**scenario.default_config().to_dict(), **content})
    assert sim_config.replications >= 50, f"Expected at least 50 replications in {filename} but found {sim_config}."


@pytest.mark.parametrize(
    "value,expected",
    [(None, max(1, int(0.5 * multiprocessing.cpu_count()))),
     ("1", 1),
     ("0", 1),
     (str(4 * multiprocessing.cpu_count()), max(1, int(0.5 * multiprocessing.cpu_count()))),
     ("many", max(1, int(0.5 * multiprocessing.cpu_count())))]
)
def test_get_thread_count(monkeypatch, value, expected):
    if value is None:
        monkeypatch.delenv(THREADS_VARIABLE, raising=False)
    else:
        monkeypatch.setenv(THREADS_VARIABLE, value)
    result = get_thread_count()
    assert result == expected, f"Expected {expected} workers for {THREADS_VARIABLE}={value} but found {result}."
