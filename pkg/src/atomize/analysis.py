"""Exports of the learned inter-sample (latent) and intra-sample (charge) structure."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .data import SyntheticDataset
from .losses import charge_balance_loss, neutron_count_loss
from .model import MlpParams, _chunks, forward

LATENT_COLUMNS = ["point_id", "z_x", "z_y", "label", "pred", "method", "seed"]
CHARGE_COLUMNS = ["point_id", "feature_idx", "q", "m", "source_component"]
ATOM_COLUMNS = ["point_id", "sum_q", "sum_q2", "radius", "mu_x", "mu_y"]


@dataclass
class LatentDump:
    rows: list
    summary: dict

    @property
    def z(self) -> np.ndarray:
        return np.array([[r["z_x"], r["z_y"]] for r in self.rows])


def latent_summary(z: np.ndarray, labels: np.ndarray) -> dict:
    """Bounding-box extents and cross-class pairwise distances of the embeddings."""
    extent = z.max(axis=0) - z.min(axis=0) if len(z) else np.zeros(2)
    a, b = z[labels == 0], z[labels == 1]
    if len(a) and len(b):
        dist = cdist(a, b)
        min_cross, mean_cross = float(dist.min()), float(dist.mean())
    else:
        min_cross = mean_cross = float("nan")
    return {"extent_x": float(extent[0]), "extent_y": float(extent[1]),
            "min_cross_class_distance": min_cross, "mean_cross_class_distance": mean_cross}


def export_latent(params: MlpParams, dataset: SyntheticDataset, method: str, seed: int,
                  pooling: str = "raw") -> LatentDump:
    """One row per point of ``dataset`` (pass the test split)."""
    z = np.concatenate([forward(params, dataset.points[s], pooling=pooling, with_atoms=False).z.values
                        for s in _chunks(len(dataset))]) if len(dataset) else np.zeros((0, 2))
    logits = z @ params.w2 + params.b2
    pred = logits.argmax(axis=1)
    rows = [{"point_id": int(pid), "z_x": float(zx), "z_y": float(zy), "label": int(lab),
             "pred": int(pr), "method": method, "seed": int(seed)}
            for pid, (zx, zy), lab, pr in zip(dataset.point_ids, z, dataset.labels, pred)]
    return LatentDump(rows, latent_summary(z, dataset.labels))


@dataclass
class ChargeReport:
    particles: list
    atoms: list
    l_charge: np.ndarray  # per atom, as computed by the loss module
    l_neutrons: np.ndarray

    def mean_abs_total_charge(self) -> float:
        return float(np.mean([abs(a["sum_q"]) for a in self.atoms]))


def export_charges(params: MlpParams, dataset: SyntheticDataset, pooling: str = "raw",
                   p: int = 2) -> ChargeReport:
    particles, atoms, l_charge, l_neutrons = [], [], [], []
    for s in _chunks(len(dataset)):
        at = forward(params, dataset.points[s], pooling=pooling, p=p).atoms
        n_feat = dataset.points.shape[1]
        q = at.q.values.reshape(-1, n_feat)
        m = at.m.values.reshape(-1, n_feat)
        sum_q = at.total_charge().values.ravel()
        sum_q2 = at.total_squared_charge().values.ravel()
        l_charge.append(charge_balance_loss(at).values.ravel())
        l_neutrons.append(neutron_count_loss(at).values.ravel())
        for k, pid in enumerate(dataset.point_ids[s]):
            src = dataset.sources[s][k]
            for f in range(n_feat):
                particles.append({"point_id": int(pid), "feature_idx": f, "q": float(q[k, f]),
                                  "m": float(m[k, f]), "source_component": int(src[f])})
            atoms.append({"point_id": int(pid), "sum_q": float(sum_q[k]), "sum_q2": float(sum_q2[k]),
                          "radius": float(at.r.values[k, 0]), "mu_x": float(at.mu.values[k, 0]),
                          "mu_y": float(at.mu.values[k, 1])})
    cat = (lambda xs: np.concatenate(xs) if xs else np.zeros(0))
    return ChargeReport(particles, atoms, cat(l_charge), cat(l_neutrons))
