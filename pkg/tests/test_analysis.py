import numpy as np
import pytest

from atomize.analysis import export_charges, export_latent, latent_summary
from atomize.data import default_dataset
from atomize.losses import charge_balance_loss, neutron_count_loss
from atomize.model import MlpParams, embed, forward, init_params
from atomize.trainer import TrainConfig, train


@pytest.fixture(scope="module")
def data():
    return default_dataset(2, n=120)


@pytest.fixture(scope="module")
def trained(data):
    return train(TrainConfig(method="atom", epochs=3), data)[0]


def test_zero_params_latent(data):
    dump = export_latent(MlpParams.zeros(), data.test, "ce", 0)
    assert np.all(dump.z == 0)
    assert dump.summary["min_cross_class_distance"] == 0.0
    assert len(dump.rows) == len(data.test)


def test_latent_rows_and_recompute(data, trained):
    dump = export_latent(trained, data.test, "atom", 0)
    assert len(dump.rows) == len(data.test)
    assert [r["point_id"] for r in dump.rows] == data.test.point_ids.tolist()
    np.testing.assert_allclose(dump.z, embed(trained, data.test.points), atol=1e-12, rtol=0)
    logits = dump.z @ trained.w2 + trained.b2
    assert [r["pred"] for r in dump.rows] == logits.argmax(axis=1).tolist()


def test_latent_summary_values():
    z = np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]])
    s = latent_summary(z, np.array([0, 1, 1]))
    assert s["extent_x"] == 3.0 and s["extent_y"] == 4.0
    assert s["min_cross_class_distance"] == 1.0
    assert s["mean_cross_class_distance"] == 3.0


def test_zero_params_charges(data):
    report = export_charges(MlpParams.zeros(), data.test)
    assert all(p["q"] == 0.0 and p["m"] == 1.0 for p in report.particles)


def test_charge_report_invariants(data, trained):
    report = export_charges(trained, data.test)
    assert len(report.particles) == 5 * len(data.test)
    assert len(report.atoms) == len(data.test)
    q = np.array([p["q"] for p in report.particles])
    m = np.array([p["m"] for p in report.particles])
    assert np.all(np.abs(q) < 1) and np.all((m >= 0) & (m <= 1))
    assert all(-5 <= a["sum_q"] <= 5 for a in report.atoms)
    sources = np.array([p["source_component"] for p in report.particles]).reshape(-1, 5)
    np.testing.assert_array_equal(sources, data.test.sources.astype(int))


def test_charge_report_consistent_with_losses(data, trained):
    report = export_charges(trained, data.test)
    atoms = forward(trained, data.test.points).atoms
    sum_q = np.array([a["sum_q"] for a in report.atoms])
    sum_q2 = np.array([a["sum_q2"] for a in report.atoms])
    np.testing.assert_array_equal(report.l_charge, charge_balance_loss(atoms).values.ravel())
    np.testing.assert_array_equal(report.l_neutrons, neutron_count_loss(atoms).values.ravel())
    np.testing.assert_allclose(report.l_charge, sum_q ** 2, rtol=1e-12)
    np.testing.assert_allclose(report.l_neutrons, (sum_q2 - 10 / 3) ** 2, rtol=1e-10, atol=1e-14)
