"""Minibatch SGD training for the four methods, evaluation and seed sweeps."""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .data import SyntheticDataset
from .losses import METHODS, Coefficients, make_pairing_plan, total_loss
from .model import MlpParams, cross_entropy, forward, init_params, predict_logits
from .seeding import stream

RESULTS_SCHEMA = 1
LOSS_TERMS = ("l_ori", "l_f", "l_charge", "l_neutrons")


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch, term, value):
        super().__init__(f"non-finite {term} ({value}) at epoch {epoch}")
        self.epoch = epoch
        self.term = term


@dataclass(frozen=True)
class TrainConfig:
    method: str = "ce"
    # 100 keeps a 40-run sweep within a few minutes on one core
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 0.05
    optimizer: str = "sgd"
    momentum: float = 0.0
    # rescale the minibatch gradient to at most this global 2-norm; None disables.
    # The opposite-charge Coulomb term is unbounded below, so unclipped steps can diverge.
    clip_norm: float | None = 1.0
    coefficients: Coefficients = field(default_factory=Coefficients)
    seed: int = 0
    atomized_layer: int = 1
    p: int = 2
    pooling: str = "raw"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2 (pairs are drawn within a batch)")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer != "sgd":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ValueError("clip_norm must be positive or None")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.atomized_layer != 1:
            raise ValueError("this model has a single hidden layer; atomized_layer must be 1")
        if self.p not in (1, 2):
            raise ValueError("p must be 1 or 2")
        if isinstance(self.coefficients, dict):
            object.__setattr__(self, "coefficients", Coefficients(**self.coefficients))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        d = dict(d)
        if "coefficients" in d:
            d["coefficients"] = Coefficients(**d["coefficients"])
        return cls(**d)


@dataclass
class RunResult:
    method: str
    seed: int
    accuracy: float
    train_accuracy: float
    losses: list  # [epoch, l_ori, l_f, l_charge, l_neutrons] per epoch
    wall_clock: float = 0.0
    params: MlpParams | None = None  # final weights; kept in memory, not serialized

    def to_dict(self) -> dict:
        return {"method": self.method, "seed": self.seed, "accuracy": self.accuracy,
                "train_accuracy": self.train_accuracy, "losses": self.losses}


@dataclass
class ExperimentResult:
    method: str
    runs: list

    @property
    def seeds(self):
        return [r.seed for r in self.runs]

    @property
    def accuracies(self):
        return [r.accuracy for r in self.runs]

    def summary(self) -> dict:
        return summarize(self.accuracies)


def summarize(accuracies) -> dict:
    acc = np.asarray(accuracies, dtype=np.float64)
    return {"mean": float(acc.mean()), "std": float(acc.std()), "median": float(np.median(acc))}


def evaluate(params: MlpParams, dataset: SyntheticDataset, pooling: str = "raw") -> float:
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty split")
    pred = predict_logits(params, dataset.points, pooling).argmax(axis=1)
    return float(np.mean(pred == dataset.labels))


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    n_batches = max(1, math.ceil(n / batch_size))
    # near-equal sizes, so no batch is left with a single atom
    return np.array_split(order, n_batches)


def train(config: TrainConfig, dataset: SyntheticDataset):
    """Train from scratch; returns ``(params, RunResult)``.

    Initialization, data order and every pairing plan derive from
    ``config.seed`` through independent named streams.
    """
    started = time.perf_counter()
    train_set = dataset.train
    params, losses = fit_arrays(config, train_set.points, train_set.labels)
    result = RunResult(config.method, config.seed, evaluate(params, dataset.test, config.pooling),
                       evaluate(params, train_set, config.pooling), losses,
                       time.perf_counter() - started, params)
    return params, result


def fit_arrays(config: TrainConfig, X, y):
    """SGD on raw arrays; returns ``(params, per-epoch loss rows)``."""
    if len(y) < 2:
        raise ValueError("training split needs at least 2 points")
    params = init_params(config.seed)
    velocity = [np.zeros_like(a) for a in params.arrays()]
    order_rng = stream(config.seed, "order")
    losses = []
    for epoch in range(config.epochs):
        sums = dict.fromkeys(LOSS_TERMS, 0.0)
        batches = _batches(len(y), config.batch_size, order_rng)
        for b, idx in enumerate(batches):
            breakdown, grads = loss_and_grad(params, X[idx], y[idx], config,
                                             stream(config.seed, "pairing", epoch, b))
            values = breakdown.values()
            for term in LOSS_TERMS + ("total",):
                if not math.isfinite(values[term]):
                    raise TrainingDiverged(epoch, term, values[term])
            for term in LOSS_TERMS:
                sums[term] += values[term]
            if config.clip_norm is not None:
                gnorm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
                if gnorm > config.clip_norm:
                    grads = [g * (config.clip_norm / gnorm) for g in grads]
            for a, v, g in zip(params.arrays(), velocity, grads):
                v *= config.momentum
                v += g
                a -= config.learning_rate * v
        losses.append([epoch] + [sums[t] / len(batches) for t in LOSS_TERMS])
    return params, losses


def loss_and_grad(params: MlpParams, X, y, config: TrainConfig, pairing_seed):
    """One minibatch objective and its gradient with respect to w1, b1, w2, b2."""
    graph = ad.Graph()
    leaves = [graph.leaf(a, n) for a, n in zip(params.arrays(), ("w1", "b1", "w2", "b2"))]
    trace = forward(leaves, X, graph, pooling=config.pooling, p=config.p)
    plan = make_pairing_plan([X.shape[1]] * len(X), pairing_seed)
    breakdown = total_loss(cross_entropy(trace.logits, y), config.method, plan, trace.atoms,
                           trace.z, config.coefficients)
    graph.backward(breakdown.total)
    grads = [t.grad if t.grad is not None else np.zeros_like(t.values) for t in leaves]
    return breakdown, grads


class SweepFailed(RuntimeError):
    """Some cells failed; ``results`` holds the cells that finished."""

    def __init__(self, failures, results):
        super().__init__("; ".join(f"cell (method={m}, seed={s}) failed: {e}" for m, s, e in failures))
        self.failures = failures
        self.results = results


def _run_cell(args):
    config, dataset = args
    try:
        return train(config, dataset)[1], None
    except Exception as exc:  # reported per cell by the caller
        return None, f"{type(exc).__name__}: {exc}"


def _default_workers():
    env = os.environ.get("ATOMIZE_THREADS")
    return max(1, int(env)) if env else 1


def sweep(methods, seeds, dataset: SyntheticDataset, base: TrainConfig = TrainConfig(),
          parallel: int | None = None):
    """Train every (method, seed) cell; results ordered by method then seed.

    Every cell runs even if another fails; failures are raised together
    as :class:`SweepFailed` at the end.
    """
    seeds = list(seeds)
    methods = list(methods)
    if not seeds:
        raise ValueError("sweep needs at least one seed")
    if not methods:
        raise ValueError("sweep needs at least one method")
    cells = [replace(base, method=m, seed=s) for m in methods for s in seeds]
    workers = parallel if parallel is not None else _default_workers()
    cap = os.environ.get("ATOMIZE_THREADS")
    if cap:
        workers = min(workers, max(1, int(cap)))
    jobs = [(c, dataset) for c in cells]
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell, jobs))
    else:
        outcomes = [_run_cell(j) for j in jobs]
    runs = [r for r, _ in outcomes if r is not None]
    results = [ExperimentResult(m, [r for r in runs if r.method == m]) for m in methods]
    failures = [(c.method, c.seed, err) for c, (_, err) in zip(cells, outcomes) if err is not None]
    if failures:
        raise SweepFailed(failures, [res for res in results if res.runs])
    return results


def results_to_dict(results) -> dict:
    return {"schema": RESULTS_SCHEMA,
            "runs": [r.to_dict() for res in results for r in res.runs],
            "summary": {res.method: res.summary() for res in results}}


def results_from_dict(d: dict):
    if d.get("schema") != RESULTS_SCHEMA:
        raise ValueError(f"unsupported results schema {d.get('schema')!r}")
    by_method = {}
    for r in d["runs"]:
        by_method.setdefault(r["method"], []).append(
            RunResult(r["method"], r["seed"], r["accuracy"], r.get("train_accuracy", float("nan")), r["losses"]))
    results = [ExperimentResult(m, runs) for m, runs in by_method.items()]
    for res in results:
        stored = d.get("summary", {}).get(res.method)
        if stored is not None:
            for k, v in res.summary().items():
                if not math.isclose(stored[k], v, rel_tol=1e-12, abs_tol=1e-15):
                    raise ValueError(f"summary {k} for {res.method} does not match its runs")
    return results
