"""Loading of run configurations and process-level settings.
"""

import os
import json
import logging
import multiprocessing


logger = logging.getLogger(__name__)

THREADS_VARIABLE = "ADAPTG_THREADS"


def load_config(filename: str, folder: str="configuration") -> dict:
    """Loads a run configuration stored as json.

    Args:
        filename (str): Path of the file relative to the folder, for example "simulations/ci_onesided.json".
        folder (str): Folder containing the configurations.

    Returns:
        The configuration as lookup with the keys "name" and "content".
    """
    path = filename if os.path.isabs(filename) else os.path.join(folder, filename)
    with open(path, "r", encoding="utf8") as file:
        config = json.load(file)

    assert "content" in config, f"Expected a configuration with key 'content' in {path} but found {list(config)}."
    config.setdefault("name", os.path.splitext(os.path.basename(path))[0])
    return config


def get_thread_count() -> int:
    """Number of worker processes to use.

    Half of the cores by default, capped by the ADAPTG_THREADS environment variable when it is set.
    """
    workers = max(1, int(0.5 * multiprocessing.cpu_count()))
    value = os.environ.get(THREADS_VARIABLE)
    if value is None:
        return workers
    try:
        cap = int(value)
    except ValueError:
        logger.warning("Ignore %s=%r as it is not an integer.", THREADS_VARIABLE, value)
        return workers
    return max(1, min(cap, workers))
