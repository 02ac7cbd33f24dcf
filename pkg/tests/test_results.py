import numpy as np
import pandas as pd

from modules.experiments import results

from conftest import make_dataset


def test_csv_keeps_column_order_and_blanks(tmp_path):
    path = results.write_csv([{"rmse1": 0.5, "model": "M1"}], tmp_path / "scores.csv", results.SCORE_COLUMNS)
    frame = results.read_csv(path)
    assert list(frame.columns) == results.SCORE_COLUMNS
    assert frame.loc[0, "model"] == "M1"
    assert np.isnan(frame.loc[0, "crps_sum"])


def test_empty_rows_still_write_a_header(tmp_path):
    path = results.write_csv([], tmp_path / "errors.csv", results.ERROR_COLUMNS)
    assert path.read_text(encoding="utf-8").strip() == ",".join(results.ERROR_COLUMNS)


def test_concat_skips_empty_frames():
    frame = results.concat_frames([None, pd.DataFrame(), pd.DataFrame({"a": [1]})], ["a"])
    assert len(frame) == 1
    assert list(results.concat_frames([], ["a", "b"]).columns) == ["a", "b"]


def test_dataset_frame_blanks_unobserved():
    mask = np.ones((4, 2), dtype=bool)
    mask[2, 0] = False
    frame = results.dataset_frame(make_dataset(n=4, mask=mask))
    assert list(frame.columns) == results.DATASET_COLUMNS
    assert np.isnan(frame.loc[2, "y1"])
    assert frame["site_id"].tolist() == [0, 1, 2, 3]


def test_yaml_round_trip(tmp_path):
    path = results.write_yaml({"experiment": {"seed": 3}}, tmp_path / "c.yaml")
    assert "seed: 3" in path.read_text(encoding="utf-8")
