"""
Training/test splits: random, descending-order-biased, overlapping and
disjoint variants, plus the biased paired subsample used in the dependence
analysis
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from loguru import logger

from modules.inference.model import BivariateDataset, Scenario
from utils.utils.exceptions import ValidationError
from utils.utils.seeding import SeedLike, make_rng

COUNT_EPS = 1e-9


class HoldoutStrategy(str, Enum):
    RANDOM = "random"
    DESCENDING_Y1 = "descending_y1"
    DESCENDING_Y2 = "descending_y2"

    @property
    def label(self) -> str:
        return {"random": "I", "descending_y1": "II-a", "descending_y2": "II-b"}[self.value]

    @property
    def order_by(self) -> Optional[int]:
        return {"random": None, "descending_y1": 0, "descending_y2": 1}[self.value]


@dataclass(frozen=True)
class HoldoutSpec:
    strategy: HoldoutStrategy
    p: float = 0.2
    train_fraction: float = 0.5
    scenario: Scenario = Scenario.SHARED
    seed: SeedLike = None

    def __post_init__(self):
        object.__setattr__(self, "strategy", HoldoutStrategy(self.strategy))
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        if not 0.0 <= self.train_fraction <= 1.0:
            raise ValidationError(f"train_fraction must lie in [0, 1], got {self.train_fraction}")
        if not 0.0 <= self.p <= self.train_fraction:
            raise ValidationError(f"p must lie in [0, {self.train_fraction}], got {self.p}")

    @property
    def label(self) -> str:
        return self.strategy.label


def floor_count(n: int, fraction: float) -> int:
    return int(math.floor(n * fraction + COUNT_EPS))


def ceil_count(n: int, fraction: float) -> int:
    return int(math.ceil(n * fraction - COUNT_EPS))


def descending_order(values: np.ndarray) -> np.ndarray:
    """Indices by decreasing value; ties keep index order and NaN goes last"""
    return np.argsort(-np.asarray(values, dtype=float), kind="stable")


def _split_rows(
    rows: np.ndarray,
    order_values: Optional[np.ndarray],
    n_train: int,
    n_top: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Top n_top of rows by order_values (none when None) plus random rows up to n_train"""
    if order_values is None:
        n_top = 0
        top = np.empty(0, dtype=int)
    else:
        top = rows[descending_order(order_values)[:n_top]]
    remaining = np.setdiff1d(rows, top)
    picked = rng.choice(remaining, size=n_train - n_top, replace=False) if n_train > n_top else np.empty(0, dtype=int)
    return np.sort(np.concatenate([top, picked]).astype(int))


def _split(data: BivariateDataset, train_mask: np.ndarray) -> Tuple[BivariateDataset, BivariateDataset]:
    train_mask = train_mask & data.mask
    test_mask = data.mask & ~train_mask
    train_rows = np.flatnonzero(train_mask.any(axis=1))
    test_rows = np.flatnonzero(test_mask.any(axis=1))
    return data.subset(train_rows, train_mask[train_rows]), data.subset(test_rows, test_mask[test_rows])


def make_holdout(data: BivariateDataset, spec: HoldoutSpec) -> Tuple[BivariateDataset, BivariateDataset]:
    """
    Shared locations: one split of all sites. Overlapping: a common block
    (random for I, top by the named response for II) joined by independent
    random blocks per response. Disjoint: each pattern split on its own, the
    named response ordering its own pattern.
    """
    rng = make_rng(spec.seed)
    order_by = spec.strategy.order_by
    n = data.n_sites
    if n == 0:
        raise ValidationError("Cannot split an empty dataset")
    train_mask = np.zeros((n, 2), dtype=bool)

    if spec.scenario is Scenario.DISJOINT:
        for j in range(2):
            rows = np.flatnonzero(data.mask[:, j])
            n_j = rows.size
            values = data.y[rows, j] if order_by == j else None
            chosen = _split_rows(rows, values, floor_count(n_j, spec.train_fraction), floor_count(n_j, spec.p), rng)
            train_mask[chosen, j] = True
    elif spec.scenario is Scenario.OVERLAPPING:
        rows = np.arange(n)
        n_train = floor_count(n, spec.train_fraction)
        n_top = floor_count(n, spec.p)
        if order_by is None:
            common = np.sort(rng.choice(rows, size=n_top, replace=False))
        else:
            common = rows[descending_order(data.y[:, order_by])[:n_top]]
        remaining = np.setdiff1d(rows, common)
        for j in range(2):
            extra = rng.choice(remaining, size=n_train - n_top, replace=False)
            train_mask[common, j] = True
            train_mask[extra, j] = True
    else:
        rows = np.arange(n)
        values = data.y[:, order_by] if order_by is not None else None
        chosen = _split_rows(rows, values, floor_count(n, spec.train_fraction), floor_count(n, spec.p), rng)
        train_mask[chosen, :] = True

    train, test = _split(data, train_mask)
    logger.debug(
        f"Holdout {spec.label} p={spec.p} ({spec.scenario.value}): "
        f"train={train.mask.sum(axis=0).tolist()}, test={test.mask.sum(axis=0).tolist()}"
    )
    return train, test


def biased_pair_sample(data: BivariateDataset, fraction: float = 0.7, order_by: int = 0) -> BivariateDataset:
    """Keep the ceil(n * fraction) sites with the largest named response, both responses retained"""
    if data.n_sites == 0:
        raise ValidationError("Cannot subsample an empty dataset")
    if not 0.0 < fraction <= 1.0:
        raise ValidationError(f"fraction must lie in (0, 1], got {fraction}")
    if order_by not in (0, 1):
        raise ValidationError(f"order_by must be 0 or 1, got {order_by}")
    keep = ceil_count(data.n_sites, fraction)
    rows = np.sort(descending_order(data.y[:, order_by])[:keep])
    return data.subset(rows)
