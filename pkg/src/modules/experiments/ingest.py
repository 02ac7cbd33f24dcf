"""
CSV ingestion of external bivariate point-referenced data
"""
from pathlib import Path
from typing import List, Union

import numpy as np
import pandas as pd
from loguru import logger

from modules.inference.model import BivariateDataset
from modules.spatial.covariates import InterceptCovariates, NearestSiteCovariates
from modules.spatial.domain_grid import rescale_coordinates
from utils.utils.exceptions import DataIngestError, ValidationError

from .config import CsvConfig

# header is line 1, so data row i sits on line i + 2
FIRST_DATA_LINE = 2


def _numeric(frame: pd.DataFrame, column: str, lines: np.ndarray, allow_blank: bool) -> np.ndarray:
    raw = frame[column].astype(str).str.strip()
    blank = raw.eq("") | frame[column].isna()
    values = pd.to_numeric(raw.where(~blank), errors="coerce").to_numpy(dtype=float)
    bad = ~blank & ~np.isfinite(values)
    if not allow_blank:
        bad |= blank
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise DataIngestError(f"column '{column}' has non-numeric value '{raw.iloc[i]}'", line=int(lines[i]))
    return np.where(blank, np.nan, values)


def ingest_csv(path: Union[str, Path], schema: CsvConfig) -> BivariateDataset:
    """
    Read easting/northing, two responses (blank = not observed) and optional
    covariates; coordinates are rescaled by the maximum pairwise distance.
    """
    path = Path(path)
    if not path.exists():
        raise DataIngestError(f"CSV file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8")
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataIngestError(f"Cannot parse {path}: {e}") from e

    required: List[str] = [schema.easting, schema.northing, schema.y1, schema.y2, *schema.covariates]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DataIngestError(f"missing columns {missing} in {path.name}", line=1)

    lines = np.arange(len(frame)) + FIRST_DATA_LINE
    empty = frame[required].apply(lambda col: col.isna() | col.astype(str).str.strip().eq("")).all(axis=1).to_numpy()
    frame, lines = frame.loc[~empty].reset_index(drop=True), lines[~empty]
    if len(frame) == 0:
        raise DataIngestError(f"{path.name} has no data rows")

    coords = np.column_stack([
        _numeric(frame, schema.easting, lines, allow_blank=False),
        _numeric(frame, schema.northing, lines, allow_blank=False),
    ])
    y = np.column_stack([
        _numeric(frame, schema.y1, lines, allow_blank=True),
        _numeric(frame, schema.y2, lines, allow_blank=True),
    ])
    mask = np.isfinite(y)
    for j, flag in enumerate(schema.log_transform):
        if not flag:
            continue
        bad = mask[:, j] & ~(y[:, j] > 0)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise DataIngestError(f"log transform of response {j + 1} needs positive values, got {y[i, j]}", line=int(lines[i]))
        y[mask[:, j], j] = np.log(y[mask[:, j], j])

    try:
        scaled, region, scale = rescale_coordinates(coords)
    except ValidationError as e:
        raise DataIngestError(f"{path.name}: {e}") from e

    if schema.covariates:
        values = np.column_stack([_numeric(frame, c, lines, allow_blank=False) for c in schema.covariates])
        covariates = NearestSiteCovariates(scaled, values, schema.covariates)
    else:
        covariates = InterceptCovariates()

    n_none = int((~mask.any(axis=1)).sum())
    if n_none:
        logger.warning(f"{n_none} rows of {path.name} observe neither response")
    logger.info(
        f"Ingested {len(frame)} sites from {path.name} (coordinate scale {scale:.4g}; "
        f"observed y1={int(mask[:, 0].sum())}, y2={int(mask[:, 1].sum())})"
    )
    return BivariateDataset(sites=scaled, y=y, mask=mask, region=region, covariates=covariates)
