import csv

import numpy as np
import pytest

DIABETES_COLUMNS = ["AGE", "SEX", "BMI", "BP", "S1", "S2", "S3", "S4", "S5", "S6", "Y"]


@pytest.fixture(scope="session")
def diabetes_csv(tmp_path_factory):
    """The Efron et al. diabetes table as a CSV: 442 rows, ten factors
    (gender written as a level code) and the progression response Y."""
    from sklearn.datasets import load_diabetes

    raw = load_diabetes(scaled=False)
    path = tmp_path_factory.mktemp("data") / "diabetes.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DIABETES_COLUMNS)
        for row, y in zip(raw.data, raw.target):
            cells = list(row)
            cells[1] = "M" if cells[1] == 1.0 else "F"
            w.writerow([*(f"{v:.6g}" if not isinstance(v, str) else v for v in cells),
                        f"{y:.6g}"])
    return path


@pytest.fixture(scope="session")
def diabetes_split(diabetes_csv):
    """Seeded 133-row holdout of the diabetes data plus its factor space."""
    from profiler import holdout_split, infer_factor_space, load_csv

    data = load_csv(diabetes_csv)
    train, hold = holdout_split(data, 133, seed=0)
    space = infer_factor_space(train.drop(["Y"]))
    return train, hold, space


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
