import json

import numpy as np
import pytest

from atomize.data import GmmSpec, default_dataset, generate
from atomize.losses import Coefficients
from atomize.model import MlpParams
from atomize import trainer
from atomize.trainer import (ExperimentResult, SweepFailed, TrainConfig, TrainingDiverged, evaluate,
                             results_from_dict, results_to_dict, summarize, sweep, train)

ZERO = ((0.0, 0.0), (0.0, 0.0))


@pytest.fixture(scope="module")
def small():
    return default_dataset(1, n=200)


def test_config_validation():
    with pytest.raises(ValueError, match="ce, l1, l2, atom"):
        TrainConfig(method="l3")
    for kw in ({"epochs": -1}, {"batch_size": 1}, {"learning_rate": 0}, {"optimizer": "adam"},
               {"clip_norm": 0.0}, {"momentum": 1.0}, {"atomized_layer": 2}, {"p": 3}):
        with pytest.raises(ValueError):
            TrainConfig(**kw)


def test_config_dict_round_trip():
    c = TrainConfig(method="atom", coefficients=Coefficients(0.5, 0.25, 2.0))
    assert TrainConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c


def test_zero_epochs_records_init_accuracy(small):
    _, result = train(TrainConfig(epochs=0), small)
    assert 0.0 <= result.accuracy <= 1.0 and result.losses == []


def test_zero_coefficient_atom_matches_ce(small):
    base = TrainConfig(epochs=4, seed=3)
    p_ce, r_ce = train(base, small)
    p_at, r_at = train(TrainConfig(method="atom", epochs=4, seed=3, coefficients=Coefficients(0, 0, 0)), small)
    assert r_ce.losses == r_at.losses
    assert all(a.tobytes() == b.tobytes() for a, b in zip(p_ce.arrays(), p_at.arrays()))
    assert r_ce.accuracy == r_at.accuracy


def test_training_is_deterministic(small):
    c = TrainConfig(method="atom", epochs=3, seed=5)
    (pa, ra), (pb, rb) = train(c, small), train(c, small)
    assert ra.to_dict() == rb.to_dict()
    assert pa.w1.tobytes() == pb.w1.tobytes()


def test_training_reduces_task_loss(small):
    _, r = train(TrainConfig(epochs=10, seed=0), small)
    assert r.losses[-1][1] < r.losses[0][1]
    assert np.all(np.isfinite(np.array(r.losses)))


def test_evaluate_constant_predictor(small):
    params = MlpParams.zeros()
    test = small.test
    majority = int(test.labels.mean() > 0.5)
    params.b2[0, majority] = 1.0
    assert evaluate(params, test) == max(test.labels.mean(), 1 - test.labels.mean())


def test_evaluate_empty_split(small):
    with pytest.raises(ValueError):
        evaluate(MlpParams.zeros(), small.subset([]))


def test_separable_degenerate_data_reaches_perfect_accuracy():
    ds = generate(GmmSpec(cov_0=ZERO, cov_1=ZERO), 400, 0, train_fraction=0.5)
    _, r = train(TrainConfig(epochs=10), ds)
    assert r.accuracy == 1.0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_names_epoch_and_term(small):
    with pytest.raises(TrainingDiverged) as info:
        train(TrainConfig(method="atom", epochs=20, learning_rate=100.0, clip_norm=None), small)
    assert info.value.term in trainer.LOSS_TERMS + ("total",)
    assert "epoch" in str(info.value)


def test_clipping_bounds_each_step(small):
    X, y = small.train.points[:32], small.train.labels[:32]
    c = TrainConfig(method="atom", epochs=1, batch_size=32, clip_norm=0.5, learning_rate=1.0)
    params, _ = trainer.fit_arrays(c, X, y)
    start = trainer.init_params(c.seed)
    step = np.sqrt(sum(((a - b) ** 2).sum() for a, b in zip(params.arrays(), start.arrays())))
    _, grads = trainer.loss_and_grad(start, X, y, c, trainer.stream(c.seed, "pairing", 0, 0))
    raw = np.sqrt(sum((g * g).sum() for g in grads))
    assert abs(step - min(raw, 0.5)) < 1e-12


def test_sweep_singleton_std_zero(small):
    [res] = sweep(["ce"], [0], small, TrainConfig(epochs=2))
    assert res.summary()["std"] == 0.0 and len(res.runs) == 1


def test_sweep_order_and_parallel_equivalence(small):
    base = TrainConfig(epochs=2)
    serial = sweep(["atom", "ce"], [1, 0], small, base, parallel=1)
    par = sweep(["atom", "ce"], [1, 0], small, base, parallel=2)
    assert [r.method for r in serial] == ["atom", "ce"]
    assert serial[0].seeds == [1, 0]
    assert json.dumps(results_to_dict(serial)) == json.dumps(results_to_dict(par))


def test_sweep_env_cap(small, monkeypatch):
    monkeypatch.setenv("ATOMIZE_THREADS", "1")
    [res] = sweep(["ce"], [0, 1], small, TrainConfig(epochs=1), parallel=4)
    assert len(res.runs) == 2


def test_sweep_reports_failed_cells(small, monkeypatch):
    real = trainer.train

    def flaky(config, dataset):
        if config.seed == 1:
            raise TrainingDiverged(0, "l_f", float("nan"))
        return real(config, dataset)
    monkeypatch.setattr(trainer, "train", flaky)
    with pytest.raises(SweepFailed) as info:
        sweep(["ce", "atom"], [0, 1], small, TrainConfig(epochs=1), parallel=1)
    assert [(m, s) for m, s, _ in info.value.failures] == [("ce", 1), ("atom", 1)]
    assert "method=ce, seed=1" in str(info.value)
    assert [len(r.runs) for r in info.value.results] == [1, 1]


def test_sweep_needs_seeds(small):
    with pytest.raises(ValueError):
        sweep(["ce"], [], small)


def test_results_round_trip_and_summary_check(small):
    results = sweep(["ce"], [0, 1], small, TrainConfig(epochs=1))
    d = json.loads(json.dumps(results_to_dict(results)))
    assert d["schema"] == 1
    assert set(d["runs"][0]) >= {"method", "seed", "accuracy", "losses"}
    back = results_from_dict(d)
    assert back[0].accuracies == results[0].accuracies
    d["summary"]["ce"]["mean"] += 0.01
    with pytest.raises(ValueError):
        results_from_dict(d)
    with pytest.raises(ValueError):
        results_from_dict({"schema": 2, "runs": []})


def test_summarize():
    s = summarize([0.8, 0.9, 1.0])
    assert s["median"] == 0.9 and abs(s["mean"] - 0.9) < 1e-15
    assert abs(s["std"] - np.std([0.8, 0.9, 1.0])) < 1e-15


def test_default_config_losses_finite(default_sweep):
    for res in default_sweep["results"].values():
        for run in res.runs:
            assert np.all(np.isfinite(np.array(run.losses)))


def _final_half_slope(values):
    half = values[len(values) // 2:]
    return np.polyfit(np.arange(len(half)), half, 1)[0]


def test_atom_regularizers_decrease_over_final_half(default_sweep):
    # epoch means under SGD are noisy, so "non-increasing" is judged by the least-squares trend
    runs = default_sweep["results"]["atom"].runs
    charge = sum(_final_half_slope(np.array(r.losses)[:, 3]) <= 0 for r in runs)
    neutrons = sum(_final_half_slope(np.array(r.losses)[:, 4]) <= 0 for r in runs)
    print(f"final-half non-increasing trend: L_charge {charge}/10, L_neutrons {neutrons}/10")
    assert charge >= 8 and neutrons >= 8
