"""Atom Modeling losses, distance-regularizer baselines and the combined objective."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .atoms import Atoms, pair_distance
from .autodiff import Tensor

METHODS = ("ce", "l1", "l2", "atom")


@dataclass(frozen=True)
class Coefficients:
    c_f: float = 1.0
    c_charge: float = 1.0
    c_neutrons: float = 1.0
    # weight of the negated mean pairwise distance for the l1/l2 baselines
    c_p: float = 0.01

    def __post_init__(self):
        for name in ("c_f", "c_charge", "c_neutrons", "c_p"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass
class PairingPlan:
    """Random pairing of atoms in a batch and of particles within each pair.

    ``atom_pairs`` is P x 2. ``particle_pairs[k]`` holds the sampled
    ``(i, j)`` particle indices for atom pair ``k``.
    """
    atom_pairs: np.ndarray
    particle_pairs: list = field(default_factory=list)
    seed: object = None

    def rows(self, segments):
        """Flattened (atom_a, atom_b, particle_row_i, particle_row_j) index arrays."""
        counts = np.array([len(pp) for pp in self.particle_pairs], dtype=int)
        a = np.repeat(self.atom_pairs[:, 0], counts)
        b = np.repeat(self.atom_pairs[:, 1], counts)
        pp = np.concatenate([np.asarray(x, dtype=int).reshape(-1, 2) for x in self.particle_pairs])
        sizes = np.asarray(segments.sizes)
        if np.any(pp[:, 0] >= sizes[a]) or np.any(pp[:, 1] >= sizes[b]):
            raise IndexError("pairing plan does not fit these atoms")
        return a, b, segments.offsets[a] + pp[:, 0], segments.offsets[b] + pp[:, 1]


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def make_pairing_plan(sizes, seed) -> PairingPlan:
    """Uniform random matching of the batch; an odd leftover atom gets a random partner.

    Each atom pair samples ``min(|A1|, |A2|)`` particle index pairs uniformly
    without replacement from the ``|A1| x |A2|`` grid.
    """
    sizes = list(sizes)
    n = len(sizes)
    if n < 2:
        raise ValueError("pairing needs a batch of at least 2 atoms")
    rng = _rng(seed)
    order = rng.permutation(n)
    pairs = [(int(order[k]), int(order[k + 1])) for k in range(0, n - 1, 2)]
    if n % 2:
        last = int(order[-1])
        partner = int(order[rng.integers(n - 1)])
        pairs.append((last, partner))
    pairs = np.asarray(pairs, dtype=int)
    sizes_arr = np.asarray(sizes)
    if np.all(sizes_arr == sizes_arr[0]):
        # same-size atoms: rank uniform keys to sample without replacement in one shot
        k = int(sizes_arr[0])
        cells = np.argsort(rng.random((len(pairs), k * k)), axis=1)[:, :k]
        particle_pairs = list(np.stack([cells // k, cells % k], axis=2))
    else:
        particle_pairs = []
        for a, b in pairs:
            na, nb = sizes[a], sizes[b]
            cells = rng.choice(na * nb, size=min(na, nb), replace=False)
            particle_pairs.append(np.stack([cells // nb, cells % nb], axis=1))
    return PairingPlan(pairs, particle_pairs, seed)


def _gather(index: np.ndarray, n: int) -> np.ndarray:
    G = np.zeros((len(index), n))
    G[np.arange(len(index)), index] = 1.0
    return G


def charge_balance_loss(atoms: Atoms) -> Tensor:
    """Squared total charge, one row per atom."""
    return ad.square(atoms.total_charge())


def neutron_count_loss(atoms: Atoms) -> Tensor:
    """``(sum q**2 - 2/3 |A|)**2``, one row per atom."""
    target = (2.0 / 3.0) * np.asarray(atoms.segments.sizes, dtype=np.float64)[:, None]
    return ad.square(atoms.total_squared_charge() - target)


def coulomb_terms(atoms: Atoms, plan: PairingPlan) -> Tensor:
    """``q_i q_j / d_ij`` for every sampled particle pair (K x 1)."""
    if atoms.n_atoms < 2:
        raise ValueError("Coulomb loss needs at least 2 atoms")
    a, b, i, j = plan.rows(atoms.segments)
    n_particles = atoms.segments.n_particles
    n_atoms = atoms.n_atoms
    Ga, Gb = _gather(a, n_atoms), _gather(b, n_atoms)
    q_i = ad.matmul(_gather(i, n_particles), atoms.q)
    q_j = ad.matmul(_gather(j, n_particles), atoms.q)
    d = pair_distance(ad.matmul(Ga, atoms.mu), ad.matmul(Gb, atoms.mu),
                      ad.matmul(Ga, atoms.r), ad.matmul(Gb, atoms.r),
                      q_i, q_j, p=atoms.p)
    return q_i * q_j * ad.reciprocal(d)


def coulomb_loss(atoms: Atoms, plan: PairingPlan) -> Tensor:
    """Summed pair potential over every atom pair in the plan."""
    return ad.sum_(coulomb_terms(atoms, plan))


def pnorm_regularizer(z, p: int, plan: PairingPlan) -> Tensor:
    """Negated mean ``||z_a - z_b||_p`` over the plan's atom pairs."""
    z = ad.as_tensor(z)
    if z.shape[0] < 2:
        raise ValueError("distance regularizer needs at least 2 embeddings")
    n = z.shape[0]
    diff = ad.matmul(_gather(plan.atom_pairs[:, 0], n), z) - ad.matmul(_gather(plan.atom_pairs[:, 1], n), z)
    return ad.neg(ad.mean(ad.norm(diff, p=p, axis=1)))


@dataclass
class LossBreakdown:
    l_ori: Tensor
    l_f: Tensor | None
    l_charge: Tensor | None
    l_neutrons: Tensor | None
    l_p: Tensor | None
    coefficients: Coefficients
    method: str
    total: Tensor

    def values(self) -> dict:
        def val(t):
            return None if t is None else t.item()
        return {"l_ori": val(self.l_ori), "l_f": val(self.l_f), "l_charge": val(self.l_charge),
                "l_neutrons": val(self.l_neutrons), "l_p": val(self.l_p), "total": val(self.total)}


def total_loss(l_ori, method: str, plan: PairingPlan | None = None, atoms: Atoms | None = None,
               z=None, coefficients: Coefficients = Coefficients()) -> LossBreakdown:
    """Combine the task loss with the regularizers selected by ``method``.

    Atom terms are computed whenever ``atoms`` and ``plan`` are given, so
    they can be logged for every method; they only enter ``total`` for
    ``method == "atom"``. Per-atom losses are averaged over the batch and
    the Coulomb potential is averaged over atom pairs. A term whose
    coefficient is exactly 0 is left out of ``total``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    l_ori = ad.as_tensor(l_ori)
    c = coefficients
    l_f = l_charge = l_neutrons = l_p = None
    if atoms is not None and plan is not None:
        l_f = coulomb_loss(atoms, plan) / float(len(plan.atom_pairs))
        l_charge = ad.mean(charge_balance_loss(atoms))
        l_neutrons = ad.mean(neutron_count_loss(atoms))
    if method == "atom" and l_f is None:
        raise ValueError("method 'atom' needs atoms and a pairing plan")
    if method in ("l1", "l2"):
        if z is None or plan is None:
            raise ValueError(f"method {method!r} needs point embeddings and a pairing plan")
        l_p = pnorm_regularizer(z, 1 if method == "l1" else 2, plan)

    total = l_ori
    if method == "atom":
        for coef, term in ((c.c_f, l_f), (c.c_charge, l_charge), (c.c_neutrons, l_neutrons)):
            if coef != 0:
                total = total + coef * term
    elif method in ("l1", "l2") and c.c_p != 0:
        total = total + c.c_p * l_p
    return LossBreakdown(l_ori, l_f, l_charge, l_neutrons, l_p, c, method, total)
