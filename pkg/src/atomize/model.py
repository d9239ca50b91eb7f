"""Two-linear-layer classifier whose hidden layer is read as an atom per point.

Layer 1 (2 -> 3) maps every feature of a point to a hidden vector. Column 0
of that vector is both the pooling weight and the charge pre-activation;
columns 1-2 are the feature embedding and particle position. The weighted
sum of feature embeddings is the point embedding ``z``, which layer 2
(2 -> 2) turns into logits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .atoms import Atoms, Segments, build_atoms, expand_cols
from .autodiff import Tensor
from .seeding import stream

N_IN = 2
N_HIDDEN = 3
N_OUT = 2
POOLING = ("raw", "softmax")


@dataclass
class MlpParams:
    w1: np.ndarray  # 2 x 3
    b1: np.ndarray  # 1 x 3
    w2: np.ndarray  # 2 x 2
    b2: np.ndarray  # 1 x 2
    seed: int | None = None

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=np.float64).reshape(N_IN, N_HIDDEN)
        self.b1 = np.asarray(self.b1, dtype=np.float64).reshape(1, N_HIDDEN)
        self.w2 = np.asarray(self.w2, dtype=np.float64).reshape(N_OUT, N_OUT)
        self.b2 = np.asarray(self.b2, dtype=np.float64).reshape(1, N_OUT)

    def arrays(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def copy(self) -> MlpParams:
        return MlpParams(*[a.copy() for a in self.arrays()], seed=self.seed)

    @classmethod
    def zeros(cls) -> MlpParams:
        return cls(np.zeros((N_IN, N_HIDDEN)), np.zeros(N_HIDDEN), np.zeros((N_OUT, N_OUT)), np.zeros(N_OUT))

    def to_dict(self) -> dict:
        return {"w1": self.w1.tolist(), "b1": self.b1.ravel().tolist(),
                "w2": self.w2.tolist(), "b2": self.b2.ravel().tolist(), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> MlpParams:
        return cls(d["w1"], d["b1"], d["w2"], d["b2"], seed=d.get("seed"))


def init_params(seed: int) -> MlpParams:
    """Uniform in +-1/sqrt(fan_in) for weights and biases of both layers."""
    rng = stream(seed, "init")
    b_1 = 1.0 / np.sqrt(N_IN)
    b_2 = 1.0 / np.sqrt(N_OUT)
    return MlpParams(rng.uniform(-b_1, b_1, (N_IN, N_HIDDEN)), rng.uniform(-b_1, b_1, N_HIDDEN),
                     rng.uniform(-b_2, b_2, (N_OUT, N_OUT)), rng.uniform(-b_2, b_2, N_OUT), seed=seed)


@dataclass
class ForwardTrace:
    hidden: Tensor  # (B*5) x 3
    weights: Tensor  # (B*5) x 1
    embeddings: Tensor  # (B*5) x 2
    z: Tensor  # B x 2
    logits: Tensor  # B x 2
    atoms: Atoms | None


def _param_tensors(params, graph):
    if graph is None:
        return [Tensor(a) for a in params.arrays()]
    return [graph.leaf(a, name) for a, name in zip(params.arrays(), ("w1", "b1", "w2", "b2"))]


def forward(params, X, graph: ad.Graph | None = None, pooling: str = "raw", p: int = 2,
            with_atoms: bool = True) -> ForwardTrace:
    """Run a batch ``X`` of shape (B, 5, 2), or a single (5, 2) point.

    ``params`` is an :class:`MlpParams` or a list of four tensors
    ``[w1, b1, w2, b2]`` (used to differentiate with respect to them).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[2] != N_IN:
        raise ad.ShapeError(f"points must have shape (B, n_features, {N_IN}), got {X.shape}")
    if pooling not in POOLING:
        raise ValueError(f"pooling must be one of {POOLING}")
    B, F, _ = X.shape
    seg = Segments.uniform(B, F)
    w1, b1, w2, b2 = _param_tensors(params, graph) if isinstance(params, MlpParams) else params

    flat = Tensor(X.reshape(B * F, N_IN))
    hidden = ad.matmul(flat, w1) + ad.matmul(np.ones((B * F, 1)), b1)
    pick_w = np.zeros((N_HIDDEN, 1))
    pick_w[0, 0] = 1.0
    weights = ad.matmul(hidden, pick_w)
    emb = ad.matmul(hidden, np.eye(N_HIDDEN)[:, 1:])
    if pooling == "softmax":
        shift = weights.values.max()  # constant shift, softmax is invariant to it
        e = ad.exp(weights - shift)
        weights = e * ad.reciprocal(ad.matmul(seg.spread_matrix, ad.matmul(seg.sum_matrix, e)))
    z = ad.matmul(seg.sum_matrix, expand_cols(weights, emb.shape[1]) * emb)
    logits = ad.matmul(z, w2) + ad.matmul(np.ones((B, 1)), b2)
    atoms = build_atoms(hidden, seg, p=p) if with_atoms else None
    return ForwardTrace(hidden, weights, emb, z, logits, atoms)


def cross_entropy(logits, labels) -> Tensor:
    """Mean two-class cross-entropy, ``-log softmax(logits)[label]`` per row."""
    logits = ad.as_tensor(logits)
    labels = np.atleast_1d(np.asarray(labels)).reshape(-1, 1)
    if logits.shape != (labels.shape[0], N_OUT):
        raise ad.ShapeError(f"logits {logits.shape} do not match {labels.shape[0]} labels")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    # -log softmax(l)[y] == softplus(l[1-y] - l[y])
    margin = ad.matmul(logits, np.array([[-1.0], [1.0]]))
    sign = np.where(labels == 0, 1.0, -1.0)
    return ad.mean(ad.softplus(ad.mul(sign, margin)))


def _chunks(n, size=256):
    return [slice(k, min(k + size, n)) for k in range(0, n, size)]


def predict_logits(params: MlpParams, X, pooling: str = "raw") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.concatenate([forward(params, X[s], pooling=pooling, with_atoms=False).logits.values
                           for s in _chunks(len(X))])


def embed(params: MlpParams, X, pooling: str = "raw") -> np.ndarray:
    """Point embeddings ``z`` (N x 2)."""
    X = np.asarray(X, dtype=np.float64)
    return np.concatenate([forward(params, X[s], pooling=pooling, with_atoms=False).z.values
                           for s in _chunks(len(X))])
