"""Per-particle charges and masses, per-atom nucleus and radius, pair distances.

A batch of atoms is stored as stacked particles: row ``i`` of every
per-particle tensor belongs to the atom given by a :class:`Segments`
layout. Per-atom reductions are matmuls against constant segment matrices,
so everything stays differentiable through :mod:`atomize.autodiff`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

#: Floor added to every particle-pair distance so ``1/d`` stays bounded.
EPS_DIST = 1e-6


class Segments:
    """Which stacked particle rows belong to which atom."""

    def __init__(self, sizes):
        sizes = [int(s) for s in sizes]
        if not sizes or min(sizes) < 1:
            raise ValueError("every atom needs at least one particle")
        self.sizes = sizes
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])

    @staticmethod
    @lru_cache(maxsize=32)
    def uniform(n_atoms: int, size: int) -> Segments:
        # shared between calls; treat as read-only
        return Segments([size] * n_atoms)

    @property
    def n_atoms(self):
        return len(self.sizes)

    @property
    def n_particles(self):
        return int(self.offsets[-1])

    @cached_property
    def owner(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_atoms), self.sizes)

    @cached_property
    def sum_matrix(self) -> np.ndarray:
        S = np.zeros((self.n_atoms, self.n_particles))
        S[self.owner, np.arange(self.n_particles)] = 1.0
        return S

    @cached_property
    def mean_matrix(self) -> np.ndarray:
        # divides by particle count |A|, not by total mass
        return self.sum_matrix / np.asarray(self.sizes, dtype=np.float64)[:, None]

    @cached_property
    def spread_matrix(self) -> np.ndarray:
        return self.sum_matrix.T.copy()

    def index(self, atom: int, particle: int) -> int:
        if not 0 <= particle < self.sizes[atom]:
            raise IndexError(f"atom {atom} has {self.sizes[atom]} particles")
        return int(self.offsets[atom]) + particle


@lru_cache(maxsize=8)
def _ones_row(n):
    return np.ones((1, n))


def expand_cols(t: Tensor, n: int) -> Tensor:
    """Repeat a column vector across ``n`` columns."""
    return ad.matmul(t, _ones_row(n))


def charge_of(e_q) -> Tensor:
    return 2.0 * ad.sigmoid(e_q) - 1.0


def mass_of(q) -> Tensor:
    return 1.0 - ad.maximum(ad.neg(q), 0.0)


def _segments_for(n_rows, segments):
    return Segments([n_rows]) if segments is None else segments


def nucleus_position(e_p, m, segments: Segments | None = None) -> Tensor:
    """Mass-weighted particle positions summed per atom, over the particle count."""
    e_p, m = ad.as_tensor(e_p), ad.as_tensor(m)
    seg = _segments_for(e_p.shape[0], segments)
    weighted = expand_cols(m, e_p.shape[1]) * e_p
    return ad.matmul(seg.mean_matrix, weighted)


def nucleus_radius(e_p, m, mu, segments: Segments | None = None, p: int = 2) -> Tensor:
    """Mean over all particles of ``||e_p * (1 - m) - mu||_p``; one value per atom."""
    e_p, m, mu = ad.as_tensor(e_p), ad.as_tensor(m), ad.as_tensor(mu)
    seg = _segments_for(e_p.shape[0], segments)
    light = expand_cols(1.0 - m, e_p.shape[1]) * e_p
    offsets = light - ad.matmul(seg.spread_matrix, mu)
    return ad.matmul(seg.mean_matrix, ad.norm(offsets, p=p, axis=1))


def pair_distance(mu_a, mu_b, r_a, r_b, q_i, q_j, p: int = 2, eps: float = EPS_DIST) -> Tensor:
    """Distance between particle ``i`` of atom a and particle ``j`` of atom b.

    Vectorized over rows. Opposite charges add the mean of the two radii to
    the nucleus distance; a zero charge product takes the same-sign branch.
    """
    mu_a, mu_b = ad.as_tensor(mu_a), ad.as_tensor(mu_b)
    r_a, r_b = ad.as_tensor(r_a), ad.as_tensor(r_b)
    q_i, q_j = ad.as_tensor(q_i), ad.as_tensor(q_j)
    nucleus = ad.norm(mu_a - mu_b, p=p, axis=1)
    opposite = (q_i.values * q_j.values < 0).astype(np.float64)
    return nucleus + ad.mul(opposite, (r_a + r_b) * 0.5) + eps


@dataclass
class Atoms:
    """A batch of atoms derived from per-particle embeddings.

    ``e_q`` is the first embedding column, ``e_p`` the rest. ``q`` and ``m``
    are per particle (N x 1); ``mu`` (B x h-1) and ``r`` (B x 1) per atom.
    """
    segments: Segments
    e_q: Tensor
    e_p: Tensor
    q: Tensor
    m: Tensor
    mu: Tensor
    r: Tensor
    p: int = 2

    @property
    def n_atoms(self):
        return self.segments.n_atoms

    def total_charge(self) -> Tensor:
        return ad.matmul(self.segments.sum_matrix, self.q)

    def total_squared_charge(self) -> Tensor:
        return ad.matmul(self.segments.sum_matrix, ad.square(self.q))


def build_atoms(embeddings, segments: Segments | None = None, p: int = 2) -> Atoms:
    """Interpret an N x h embedding (h >= 2) as stacked particles."""
    emb = ad.as_tensor(embeddings)
    n, h = emb.shape
    if h < 2:
        raise ValueError("particle embeddings need a charge column plus a position")
    seg = _segments_for(n, segments)
    if seg.n_particles != n:
        raise ValueError(f"segments cover {seg.n_particles} particles, embedding has {n}")
    pick_q = np.zeros((h, 1))
    pick_q[0, 0] = 1.0
    return atoms_from_parts(ad.matmul(emb, pick_q), ad.matmul(emb, np.eye(h)[:, 1:]), seg, p)


def atoms_from_parts(e_q, e_p, segments: Segments | None = None, p: int = 2) -> Atoms:
    """Same as :func:`build_atoms` with the two embedding parts passed separately."""
    e_q, e_p = ad.as_tensor(e_q), ad.as_tensor(e_p)
    seg = _segments_for(e_p.shape[0], segments)
    q = charge_of(e_q)
    m = mass_of(q)
    mu = nucleus_position(e_p, m, seg)
    r = nucleus_radius(e_p, m, mu, seg, p=p)
    return Atoms(seg, e_q, e_p, q, m, mu, r, p)
