"""Two-atom balance distance: closed form and an independent numeric minimizer.

For two atoms whose sampled particle pairs have summed same-sign charge
product ``c1`` and summed opposite-sign charge product magnitude ``c2``,
the pair potential as a function of nucleus separation ``d`` is

    f(d) = c1 / d - c2 / (d + r_tilde)

with ``r_tilde`` the mean of the two nucleus radii. A minimum at ``d > 0``
exists only for ``c2 > c1``, at ``d* = r_tilde (sqrt(k) + 1) / (k - 1)``
where ``k = c2 / c1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class NoBalancePoint(ValueError):
    pass


@dataclass(frozen=True)
class PairPotentialSpec:
    c1: float
    c2: float
    r_tilde: float

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("c1 and c2 must be positive")
        if self.r_tilde < 0:
            raise ValueError("r_tilde must be nonnegative")

    @property
    def k(self) -> float:
        return self.c2 / self.c1

    @classmethod
    def from_ratio(cls, k: float, r_tilde: float, c1: float = 1.0) -> PairPotentialSpec:
        return cls(c1, k * c1, r_tilde)

    @classmethod
    def from_charges(cls, q_i, q_j, r_1: float, r_2: float) -> PairPotentialSpec:
        """Collect ``c1``, ``c2`` from sampled particle-pair charges."""
        prod = np.asarray(q_i, dtype=float) * np.asarray(q_j, dtype=float)
        return cls(float(prod[prod > 0].sum()), float(-prod[prod < 0].sum()), (r_1 + r_2) / 2.0)


def potential(spec: PairPotentialSpec, d: float) -> float:
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d}")
    return spec.c1 / d - spec.c2 / (d + spec.r_tilde)


def potential_slope(spec: PairPotentialSpec, d: float) -> float:
    return -spec.c1 / d ** 2 + spec.c2 / (d + spec.r_tilde) ** 2


def balance_closed_form(spec: PairPotentialSpec) -> float:
    if spec.c1 >= spec.c2:
        raise NoBalancePoint(f"no balance point: needs c1 < c2, got c1={spec.c1}, c2={spec.c2}")
    if spec.r_tilde == 0:
        raise NoBalancePoint("no balance point: r_tilde = 0 makes the potential monotone")
    return (spec.c1 + math.sqrt(spec.c1 * spec.c2)) / (spec.c2 - spec.c1) * spec.r_tilde


def golden_section(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 500):
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns ``(argmin, f(argmin))``."""
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a)):
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
    x = (a + b) / 2.0
    return x, f(x)


def balance_numeric(spec: PairPotentialSpec, d_max: float | None = None, tol: float = 1e-10,
                    d_min: float = 1e-9) -> float:
    """Argmin of :func:`potential` by golden-section search on ``[d_min, d_max]``.

    ``d_max`` defaults to ``1e4 * r_tilde``. Raises :class:`NoBalancePoint`
    when the minimum sits on the bracket boundary.
    """
    if d_max is None:
        d_max = 1e4 * spec.r_tilde
    if not d_max > d_min:
        raise ValueError("empty bracket")
    x, fx = golden_section(lambda d: potential(spec, d), d_min, d_max, tol)
    if not (fx < potential(spec, d_min) and fx < potential(spec, d_max)):
        raise NoBalancePoint(f"no interior minimum in [{d_min:g}, {d_max:g}] (argmin {x:g})")
    return x


def balance_bisection(spec: PairPotentialSpec, d_max: float | None = None, tol: float = 1e-12) -> float:
    """Root of the potential's slope by bisection; a second, derivative-based oracle."""
    lo, hi = 1e-9, 1e4 * spec.r_tilde if d_max is None else d_max
    if not (potential_slope(spec, lo) < 0 < potential_slope(spec, hi)):
        raise NoBalancePoint("slope does not change sign on the bracket")
    while hi - lo > tol * hi:
        mid = (lo + hi) / 2.0
        if potential_slope(spec, mid) < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def monotonicity_scan(ks, r_tilde: float = 1.0, c1: float = 1.0):
    """Closed-form and numeric balance distance for each ``k``."""
    rows = []
    for k in ks:
        if not k > 1:
            raise ValueError(f"k must exceed 1, got {k}")
        spec = PairPotentialSpec.from_ratio(k, r_tilde, c1)
        d_max = max(1e4 * r_tilde, 100 * balance_closed_form(spec))
        rows.append({"k": float(k), "r_tilde": float(r_tilde),
                     "closed_form": balance_closed_form(spec),
                     "numeric": balance_numeric(spec, d_max=d_max)})
    return rows


def is_strictly_decreasing(values) -> bool:
    values = list(values)
    return all(a > b for a, b in zip(values, values[1:]))


ENERGY_COLUMNS = ["k", "r_tilde", "d", "potential", "is_balance_point"]


def energy_curve(ks, r_tilde: float = 1.0, c1: float = 1.0, n_points: int = 41):
    """Potential sampled on a log grid around each balance point, plus the point itself."""
    rows = []
    for k in ks:
        spec = PairPotentialSpec.from_ratio(k, r_tilde, c1)
        d_star = balance_closed_form(spec)
        grid = np.geomspace(d_star / 20.0, d_star * 20.0, n_points)
        ds = sorted(set(grid.tolist()) | {d_star})
        for d in ds:
            rows.append({"k": float(k), "r_tilde": float(r_tilde), "d": d,
                         "potential": potential(spec, d), "is_balance_point": int(d == d_star)})
    return rows
