"""
CSV outputs. Column sets are fixed; numbers use '.' decimals and UTF-8.
"""
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Union

import numpy as np
import pandas as pd
import yaml
from loguru import logger

SCORE_COLUMNS = [
    "model", "scenario", "strategy", "p", "n_train1", "n_train2", "n_test1", "n_test2",
    "rmse1", "rmse2", "rmse_sum", "crps1", "crps2", "crps_sum",
]
PARAM_COLUMNS = ["model", "scenario", "strategy", "p", "parameter", "mean", "sd", "q025", "q975", "ess", "truth"]
ERROR_COLUMNS = ["model", "scenario", "strategy", "p", "error_type", "message"]
DEPENDENCE_COLUMNS = ["model", "sample", "draw", "distance", "cov11", "cov22", "cov21", "cov21_shared", "cov21_corr"]
DEPENDENCE_SUMMARY_COLUMNS = ["model", "sample", "quantity", "distance", "mean", "q025", "q975", "truth"]
LOCAL_DEPENDENCE_COLUMNS = ["model", "sample", "quantity", "mean", "q025", "q975", "truth", "empirical"]
INTENSITY_COLUMNS = ["model", "scenario", "strategy", "p", "cell", "x", "y", "mean", "q025", "q975"]
PREDICTION_COLUMNS = ["draw", "site_id", "response", "value"]
DATASET_COLUMNS = ["site_id", "easting", "northing", "y1", "y2"]

FLOAT_FORMAT = "%.10g"


def write_csv(rows: Union[pd.DataFrame, Iterable[Mapping[str, Any]]], path: Union[str, Path], columns: Sequence[str]) -> Path:
    """Write rows with exactly the given columns (missing ones left empty)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
    frame = frame.reindex(columns=list(columns))
    frame.to_csv(path, index=False, encoding="utf-8", float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, encoding="utf-8")


def concat_frames(frames: List[pd.DataFrame], columns: Sequence[str]) -> pd.DataFrame:
    frames = [f for f in frames if f is not None and len(f)]
    if not frames:
        return pd.DataFrame(columns=list(columns))
    return pd.concat(frames, ignore_index=True)


def write_yaml(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(data, f, sort_keys=False)
    return path


def dataset_frame(data) -> pd.DataFrame:
    """Sites of a BivariateDataset with blanks where a response is not observed"""
    y = np.where(data.mask, data.y, np.nan)
    return pd.DataFrame({
        "site_id": data.site_ids,
        "easting": data.sites[:, 0],
        "northing": data.sites[:, 1],
        "y1": y[:, 0],
        "y2": y[:, 1],
    })
