import numpy as np
import pytest

from atomize.data import (CSV_COLUMNS, GmmSpec, box_muller, covariance_factor, default_dataset, from_csv,
                          generate, split, to_csv)
from atomize.seeding import stream

ZERO = ((0.0, 0.0), (0.0, 0.0))


def test_zero_variance_features_sit_on_means():
    ds = generate(GmmSpec(cov_0=ZERO, cov_1=ZERO), 300, 1)
    expect = np.where(ds.sources[..., None], (1.0, 1.0), (-1.0, -1.0))
    np.testing.assert_array_equal(ds.points, expect)
    np.testing.assert_array_equal(ds.labels, (ds.sources.sum(axis=1) > 2).astype(int))


def test_label_balance_seed_7():
    ds = generate(GmmSpec(), 1000, 7)
    assert abs(ds.labels.mean() - 0.5) <= 0.05


def test_same_seed_identical():
    a, b = generate(GmmSpec(), 200, 3), generate(GmmSpec(), 200, 3)
    assert a.points.tobytes() == b.points.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()
    assert generate(GmmSpec(), 200, 4).points.tobytes() != a.points.tobytes()


def test_majority_rule_exhaustive():
    ds = generate(GmmSpec(), 2000, 11)
    assert np.all(ds.labels == (ds.sources.sum(axis=1) >= 3))


def test_component_means_within_three_sigma():
    spec = GmmSpec()
    ds = generate(spec, 4000, 5)
    for comp, mean in ((False, spec.mean_0), (True, spec.mean_1)):
        x = ds.points[ds.sources == comp]
        sigma = np.sqrt(np.diag(spec.cov_1 if comp else spec.cov_0))
        assert np.all(np.abs(x.mean(axis=0) - mean) < 3 * sigma / np.sqrt(len(x)))


def test_covariance_is_respected():
    cov = ((1.0, 0.6), (0.6, 2.0))
    ds = generate(GmmSpec(cov_0=cov, cov_1=cov), 6000, 2)
    x = ds.points[~ds.sources]
    np.testing.assert_allclose(np.cov(x.T), cov, atol=0.08)


def test_box_muller_standard_normal():
    z = box_muller(stream(0, "t"), 20001)
    assert len(z) == 20001
    assert abs(z.mean()) < 0.03 and abs(z.std() - 1) < 0.03


@pytest.mark.parametrize("cov", [((1.0, 0.5), (0.0, 1.0)), ((-1.0, 0.0), (0.0, 1.0)), ((1.0, 2.0), (2.0, 1.0))])
def test_invalid_covariance(cov):
    with pytest.raises(ValueError):
        GmmSpec(cov_0=cov)


def test_cholesky_factor():
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    L = covariance_factor(cov)
    np.testing.assert_allclose(L @ L.T, cov, atol=1e-14)


@pytest.mark.parametrize("kw", [{"mix": 0.0}, {"mix": 1.0}, {"mean_0": (1.0, 2.0, 3.0)}])
def test_invalid_spec(kw):
    with pytest.raises(ValueError):
        GmmSpec(**kw)


def test_n_must_be_positive():
    with pytest.raises(ValueError):
        generate(GmmSpec(), 0, 0)


def test_split_examples():
    ds = generate(GmmSpec(), 10, 0)
    tr, te = split(ds, 0.8, 1)
    assert len(tr) == 8 and len(te) == 2
    assert set(tr.point_ids).isdisjoint(te.point_ids)
    assert set(tr.point_ids) | set(te.point_ids) == set(range(10))
    tr2, _ = split(ds, 0.8, 1)
    np.testing.assert_array_equal(tr.point_ids, tr2.point_ids)


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
def test_split_fraction_range(fraction):
    with pytest.raises(ValueError):
        split(generate(GmmSpec(), 10, 0), fraction, 0)


def test_csv_round_trip_exact():
    ds = default_dataset(3, n=50)
    text = to_csv(ds)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert len(text.splitlines()) == 1 + 50 * 5
    back = from_csv(text, ds.spec, ds.seed)
    assert back.points.tobytes() == ds.points.tobytes()
    np.testing.assert_array_equal(back.labels, ds.labels)
    np.testing.assert_array_equal(back.sources, ds.sources)
    np.testing.assert_array_equal(back.split, ds.split)
    assert to_csv(back) == text


def test_csv_rejects_bad_header():
    with pytest.raises(ValueError):
        from_csv("a,b\n1,2\n")


def test_spec_dict_round_trip():
    spec = GmmSpec.isotropic(0.7, mix=0.4)
    assert GmmSpec.from_dict(spec.to_dict()) == spec


def test_default_dataset_sizes():
    ds = default_dataset(0)
    assert len(ds.train) == 1000 and len(ds.test) == 1000
