"""Registry of finite-difference checks: every op family, every loss term, every method."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .losses import METHODS, Coefficients, coulomb_loss, make_pairing_plan, pnorm_regularizer, total_loss
from .losses import charge_balance_loss, neutron_count_loss
from .model import cross_entropy, forward, init_params
from .seeding import stream

DEFAULT_TOL = 1e-4
N_BATCHES = 20
BATCH_POINTS = 4


@dataclass
class CheckResult:
    name: str
    report: ad.GradCheckReport

    @property
    def passed(self):
        return self.report.passed

    def line(self) -> str:
        r = self.report
        if r.skipped:
            return f"SKIP {self.name}: {r.reason}"
        return f"{'PASS' if r.passed else 'FAIL'} {self.name}: max rel err {r.worst:.2e}"


def op_checks(rng):
    """``(name, f, inputs)`` for each differentiable op family."""
    A = rng.normal(size=(3, 4))
    B = rng.normal(size=(3, 4))
    C = rng.normal(size=(4, 2))
    pos = rng.uniform(0.5, 2.0, size=(3, 4))
    away = A + np.sign(A) * 0.1  # keeps abs/maximum/norm1 clear of their kinks
    return [
        ("add", lambda a, b: ad.sum_(ad.square(a + b)), [A, B]),
        ("sub", lambda a, b: ad.sum_(ad.square(a - b)), [A, B]),
        ("mul", lambda a, b: ad.sum_(a * b * a), [A, B]),
        ("matmul", lambda a, c: ad.sum_(ad.square(ad.matmul(a, c))), [A, C]),
        ("neg", lambda a: ad.sum_(ad.neg(a) * a * a), [A]),
        ("transpose", lambda a, c: ad.sum_(ad.matmul(ad.transpose(c), ad.transpose(a))), [A, C]),
        ("sigmoid", lambda a: ad.sum_(ad.sigmoid(a)), [A]),
        ("maximum", lambda a: ad.sum_(ad.square(ad.maximum(a, 0.0))), [away]),
        ("square", lambda a: ad.sum_(ad.square(a)), [A]),
        ("sqrt", lambda a: ad.sum_(ad.sqrt(a)), [pos]),
        ("reciprocal", lambda a: ad.sum_(ad.reciprocal(a)), [pos]),
        ("exp", lambda a: ad.sum_(ad.exp(a)), [A]),
        ("log", lambda a: ad.sum_(ad.log(a)), [pos]),
        ("softplus", lambda a: ad.sum_(ad.softplus(a)), [A]),
        ("abs", lambda a: ad.sum_(ad.abs_(a) * a), [away]),
        ("sum", lambda a: ad.square(ad.sum_(ad.sum_(a, axis=0))), [A]),
        ("mean", lambda a: ad.sum_(ad.square(ad.mean(a, axis=1))), [A]),
        ("norm1", lambda a: ad.sum_(ad.norm(a, p=1, axis=1)), [away]),
        ("norm2", lambda a: ad.sum_(ad.norm(a, p=2, axis=1)), [A]),
    ]


def _batch_terms(X, y, plan):
    """Scalar objectives of the parameters ``w1, b1, w2, b2`` for one batch."""
    def trace(w1, b1, w2, b2):
        return forward([w1, b1, w2, b2], X)

    def l_ori(*w):
        return cross_entropy(trace(*w).logits, y)

    def l_f(*w):
        return coulomb_loss(trace(*w).atoms, plan)

    def l_charge(*w):
        return ad.mean(charge_balance_loss(trace(*w).atoms))

    def l_neutrons(*w):
        return ad.mean(neutron_count_loss(trace(*w).atoms))

    def l_p(p):
        return lambda *w: pnorm_regularizer(trace(*w).z, p, plan)

    def total(method):
        def f(*w):
            t = trace(*w)
            return total_loss(cross_entropy(t.logits, y), method, plan, t.atoms, t.z, Coefficients()).total
        return f

    terms = [("l_ori", l_ori), ("l_f", l_f), ("l_charge", l_charge), ("l_neutrons", l_neutrons),
             ("l_p1", l_p(1)), ("l_p2", l_p(2))]
    return terms + [(f"total[{m}]", total(m)) for m in METHODS]


def loss_checks(seed: int = 0, n_batches: int = N_BATCHES):
    for k in range(n_batches):
        rng = stream(seed, "gradcheck", k)
        X = rng.normal(scale=1.5, size=(BATCH_POINTS, 5, 2))
        y = rng.integers(0, 2, BATCH_POINTS)
        params = init_params(seed * 1000 + k).arrays()
        plan = make_pairing_plan([5] * BATCH_POINTS, stream(seed, "gradcheck-plan", k))
        for name, f in _batch_terms(X, y, plan):
            yield f"batch{k}/{name}", f, params


def run_check(name, f, inputs, tol=DEFAULT_TOL, step=1e-6) -> CheckResult:
    try:
        report = ad.grad_check(f, inputs, step=step, tol=tol)
    except ad.NumericDomainError as exc:
        report = ad.GradCheckReport(passed=False, reason=str(exc))
    return CheckResult(name, report)


def run_all(tol=DEFAULT_TOL, seed=0, n_batches=N_BATCHES):
    results = [run_check(f"op/{name}", f, inputs, tol)
               for name, f, inputs in op_checks(stream(seed, "gradcheck-ops"))]
    results += [run_check(name, f, inputs, tol) for name, f, inputs in loss_checks(seed, n_batches)]
    return results
