""" Run the shipped simulation studies and store the long-format reports together with their configuration.
"""

import json
import logging

from adapt_gmm.configuration.utilities import load_config
from adapt_gmm.simlab.experiments import evaluate, summary_metrics
from adapt_gmm.simlab.scenarios import LogisticSimConfig, get_scenario


def main(run: str):
    """Executes all computations for a run of the experiment.

    Args:
        run (str): Name of the run, a file in configuration/simulations.
    """

    # Configuration
    config = load_config(f"simulations/{run}.json")
    content = dict(config["content"])
    scenario = get_scenario(content.pop("scenario"))
    methods = content.pop("methods", scenario.methods)
    sim_config = LogisticSimConfig.from_dict({**scenario.default_config().to_dict(), **content})

    # Execute simulations
    report = evaluate(methods, sim_config, scenario=scenario.name)
    folder = f"results/simulations/{run}"
    report.save(folder)
    summary_metrics(report).to_csv(f"{folder}/metrics.csv", index=False)
    print(report.summary().to_string(index=False))

    # Save configuration
    with open(f"{folder}/{run}_config.json", 'w', encoding='utf8') as file:
        json.dump(config, file, indent=6)

    return


if __name__ == "__main__":

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    runs = ["ci_onesided", "ci_point", "ci_interval", "spike_at_one", "small_sample"]

    for run in runs:
        print(f"Start run with configuration {run}")
        main(run=run)
