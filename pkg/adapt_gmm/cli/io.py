"""Reading of input tables and writing of result files.

Attributes:
    reserved_columns (list[str]): Input columns with a fixed meaning; every other column is a covariate.
    rejection_columns (list[str]): Columns of the rejections file.
"""

import json
import logging
import os
from typing import Optional

import numpy as np
import pandas as pd

from adapt_gmm.masking.hypotheses import HypothesisTable, NullType


logger = logging.getLogger(__name__)

reserved_columns = ["id", "p", "z", "se"]
rejection_columns = ["id", "p", "z", "rejected"]


class InputError(ValueError):
    """The input file or the run configuration is invalid."""


def _numeric(frame: pd.DataFrame, column: str) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() & frame[column].notna() & (frame[column].astype(str).str.strip() != "")
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise InputError(f"Row {row + 1}, column '{column}': cannot parse {frame[column].iloc[row]!r} as a number.")
    return values.to_numpy(dtype=float)


def read_input(path: str, null: NullType) -> tuple:
    """Reads a CSV file with a header row into a HypothesisTable.

    Every row needs p, or z (with se, which defaults to one). Columns other than id, p, z and se are covariates.

    Args:
        path (str): Path of the CSV file.
        null (NullType): Null hypothesis of all rows.

    Returns:
        Tuple of the HypothesisTable and the list of covariate names.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=True)
    except FileNotFoundError:
        raise InputError(f"Input file {path} does not exist.")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise InputError(f"Cannot parse {path}: {error}")
    frame.columns = [str(c).strip() for c in frame.columns]
    if len(frame) == 0:
        raise InputError(f"Input file {path} has no rows.")
    if "p" not in frame.columns and "z" not in frame.columns:
        raise InputError(f"Input file {path} needs a column 'p' or 'z' but has {list(frame.columns)}.")
    if null.is_interval and ("z" not in frame.columns or "se" not in frame.columns):
        raise InputError("An interval null needs the columns 'z' and 'se'.")

    n = len(frame)
    p = _numeric(frame, "p") if "p" in frame.columns else np.full(n, np.nan)
    z = _numeric(frame, "z") if "z" in frame.columns else np.full(n, np.nan)
    se = _numeric(frame, "se") if "se" in frame.columns else np.full(n, np.nan)

    for row in range(n):
        if np.isfinite(p[row]) and not 0 <= p[row] <= 1:
            raise InputError(f"Row {row + 1}, column 'p': expected a probability but found {p[row]}.")
        if np.isfinite(se[row]) and se[row] <= 0:
            raise InputError(f"Row {row + 1}, column 'se': expected a positive standard error but found {se[row]}.")
        if not np.isfinite(p[row]) and not np.isfinite(z[row]):
            raise InputError(f"Row {row + 1}: expected a value in column 'p' or 'z'.")
        if null.is_interval and not (np.isfinite(z[row]) and np.isfinite(se[row])):
            raise InputError(f"Row {row + 1}, columns 'z'/'se': an interval null needs both.")
        if np.isfinite(se[row]) and not np.isfinite(z[row]):
            raise InputError(f"Row {row + 1}, column 'z': a standard error needs its z-value.")

    covariates = [c for c in frame.columns if c not in reserved_columns]
    x = np.column_stack([_numeric(frame, c) for c in covariates]) if covariates else np.zeros((n, 0))
    if covariates:
        missing = ~np.isfinite(x)
        if missing.any():
            row, col = np.argwhere(missing)[0]
            raise InputError(f"Row {row + 1}, column '{covariates[col]}': missing covariate value.")

    ids = frame["id"].fillna("").astype(str).tolist() if "id" in frame.columns else [str(i) for i in range(n)]
    table = HypothesisTable.from_arrays(p=p, z=z, sigma=se, x=x, null=null, ids=ids)
    logger.info("Read %d hypotheses with %d covariates from %s.", n, len(covariates), path)
    return table, covariates


def rejection_frame(table: HypothesisTable, rejected: np.ndarray) -> pd.DataFrame:
    flags = np.zeros(len(table), dtype=int)
    flags[np.asarray(rejected, dtype=int)] = 1
    return pd.DataFrame({"id": list(table.ids), "p": table.p, "z": table.z, "rejected": flags},
                        columns=rejection_columns)


def write_outputs(folder: str, rejections: pd.DataFrame, diagnostics: dict,
                  trace: Optional[pd.DataFrame]=None) -> list:
    """Writes rejections.csv, diagnostics.json and, when given, trace.csv; returns the paths."""
    os.makedirs(folder, exist_ok=True)
    paths = [os.path.join(folder, "rejections.csv"), os.path.join(folder, "diagnostics.json")]
    rejections.to_csv(paths[0], index=False, float_format="%.10g")
    with open(paths[1], "w", encoding="utf8") as file:
        json.dump(diagnostics, file, indent=2, sort_keys=True, default=_json_default)
    if trace is not None:
        paths.append(os.path.join(folder, "trace.csv"))
        trace.to_csv(paths[-1], index=False, float_format="%.10g")
    logger.info("Wrote %s.", ", ".join(paths))
    return paths


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)
