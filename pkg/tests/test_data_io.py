import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from omnisim.data_io import (AgnosticSpec, DataFormatError, Dataset, PRESETS, gen_agnostic, gen_realizable,
                             load_dataset_csv, philox, save_dataset_csv, sidecar_path)
from omnisim.links import PiecewiseLinearLink, eval_link, logistic_link

LINK = PiecewiseLinearLink([-1, -0.2, 0.4, 1], [0.1, 0.3, 0.9, 1.0])


def test_expected_labels_exact():
    w = np.array([0.6, 0.0, 0.8])
    data = gen_realizable(3, 500, LINK, w, seed=1)
    assert np.array_equal(data.labels, eval_link(LINK, data.features @ w))
    assert np.all(np.linalg.norm(data.features, axis=1) <= 1 + 1e-9)


def test_bernoulli_labels_match_link_per_bucket():
    data = gen_realizable(1, 1_000_000, LINK, np.array([1.0]), seed=2, label_mode="bernoulli")
    x = data.features[:, 0]
    mean = eval_link(LINK, x)
    bucket = np.minimum(((x + 1) / 2 * 10).astype(int), 9)
    for b in range(10):
        m = bucket == b
        assert m.sum() > 90_000
        target = mean[m].mean()
        sigma = np.sqrt(np.mean(mean[m] * (1 - mean[m])) / m.sum())
        assert abs(data.labels[m].mean() - target) <= 3 * sigma


def test_generators_deterministic():
    a = gen_realizable(4, 200, LINK, np.full(4, 0.5), seed=9, label_mode="bernoulli")
    b = gen_realizable(4, 200, LINK, np.full(4, 0.5), seed=9, label_mode="bernoulli")
    assert a.features.tobytes() == b.features.tobytes() and a.labels.tobytes() == b.labels.tobytes()
    c = gen_agnostic(2, 200, 9, "xor2d")
    d = gen_agnostic(2, 200, 9, "xor2d")
    assert c.features.tobytes() == d.features.tobytes() and c.labels.tobytes() == d.labels.tobytes()


def test_philox_streams_independent():
    assert not np.array_equal(philox(1, 0).random(5), philox(1, 1).random(5))
    assert np.array_equal(philox(1, 3).random(5), philox(1, 3).random(5))


def test_invalid_weight_norm():
    with pytest.raises(ValueError):
        gen_realizable(2, 10, LINK, np.array([1.0, 1.0]), seed=0)


def test_flip_rate_zero_reduces_to_realizable():
    link = logistic_link(1.0, scale=4.0)
    w = np.array([0.6, 0.8])
    spec = AgnosticSpec(link=link, w_star=w, flip_rate=0.0, label_mode="expected")
    a = gen_agnostic(2, 300, 5, spec)
    b = gen_realizable(2, 300, link, w, seed=5)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)


@pytest.mark.parametrize("preset", sorted(PRESETS))
@given(seed=st.integers(0, 2**31), d=st.integers(2, 6))
def test_agnostic_bounds(preset, seed, d):
    data = gen_agnostic(d, 100, seed, preset, L=2.0)
    assert data.labels.min() >= 0 and data.labels.max() <= 1
    assert np.linalg.norm(data.features, axis=1).max() <= 2.0 + 1e-9
    assert data.generator == f"agnostic-{preset}"


def test_unknown_preset():
    with pytest.raises(ValueError):
        gen_agnostic(2, 10, 0, "nope")
    with pytest.raises(ValueError):
        gen_agnostic(1, 10, 0, "xor2d")


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.array([[2.0]]), np.array([0.5]), L=1.0)
    with pytest.raises(ValueError):
        Dataset(np.array([[0.2]]), np.array([1.5]), L=1.0)
    with pytest.raises(ValueError):
        Dataset(np.zeros((0, 2)), np.zeros(0))


# ---------------------------------------------------------------- files


def test_round_trip(tmp_path):
    data = gen_agnostic(3, 250, 11, "heavytail", L=1.5)
    path = tmp_path / "d.csv"
    save_dataset_csv(data, path)
    back = load_dataset_csv(path)
    assert np.array_equal(back.features, data.features)
    assert np.array_equal(back.labels, data.labels)
    assert back.L == 1.5 and back.seed == 11 and back.generator == "agnostic-heavytail"
    meta = json.loads(open(sidecar_path(path)).read())
    assert meta == {"L": 1.5, "d": 3, "n": 250, "seed": 11, "generator": "agnostic-heavytail"}
    assert open(path).readline().strip() == "x1,x2,x3,y"


def test_save_is_byte_stable(tmp_path):
    data = gen_agnostic(2, 50, 1)
    save_dataset_csv(data, tmp_path / "a.csv")
    save_dataset_csv(data, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


@pytest.mark.parametrize("text,needle", [
    ("", "empty file"),
    ("x1,x2\n0.1,0.2\n", ":1:"),
    ("x1,y\n", "no data rows"),
    ("x1,y\n0.1,0.5\n0.2\n", ":3:"),
    ("x1,y\n0.1,0.5\n0.2,abc\n", ":3:"),
])
def test_malformed_files(tmp_path, text, needle):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(DataFormatError, match=needle):
        load_dataset_csv(path)


def test_load_without_sidecar_infers_radius(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("x1,x2,y\n0.3,0.4,1\n-0.6,0.0,0\n")
    data = load_dataset_csv(path)
    assert data.L == pytest.approx(0.6) and data.n == 2 and data.d == 2
