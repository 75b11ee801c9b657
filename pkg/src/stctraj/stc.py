"""State-triggered constraints: continuous encodings and the logical oracle.

A scalar state-triggered constraint is the implication

    g(z) < 0  =>  c(z) <= 0

encoded continuously as h(z) = sigma_hat(g(z)) * c(z) <= 0 with
sigma_hat(g) = -min(0, g).  Compound forms combine several triggers
(conjunction or disjunction) with a disjunction of constraint conditions:

    And:  h = [prod_j sigma_hat(g_j)] * [prod_j (c_j + alpha_j)]
    Or:   h = [sum_j  sigma_hat(g_j)] * [prod_j (c_j + alpha_j)]

where the alpha_j >= 0 are slack variables.  With a single constraint and no
slack the compound form is enforced as h <= 0; with slacks it is enforced as
h = 0, and a feasible slack choice exists exactly when the underlying
implication holds (pick alpha_j = -c_j for one satisfied disjunct).

The logical oracle evaluates the implication directly from trigger and
constraint values; the equivalence of the two routes is what the test suite
certifies by randomized search.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

__all__ = [
    "CompoundStc",
    "ConstraintForm",
    "ScalarStc",
    "SmoothFn",
    "TriggerMode",
    "compound_value",
    "eval_compound",
    "eval_scalar_stc",
    "implication_holds",
    "linearize_compound",
    "logical_oracle",
    "sigma_hat",
    "sigma_hat_grad",
    "slack_witness",
    "violation_depth",
]


class TriggerMode(Enum):
    AND = "and"
    OR = "or"


class ConstraintForm(Enum):
    INEQUALITY_NO_SLACK = "inequality"
    EQUALITY_WITH_SLACKS = "equality"


@dataclass(frozen=True)
class SmoothFn:
    """A scalar function of the state with its hand-coded gradient."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ScalarStc:
    trigger: SmoothFn
    constraint: SmoothFn

    def as_compound(self) -> "CompoundStc":
        return CompoundStc(
            triggers=(self.trigger,),
            constraints=(self.constraint,),
            trigger_mode=TriggerMode.AND,
            constraint_form=ConstraintForm.INEQUALITY_NO_SLACK,
        )


@dataclass(frozen=True)
class CompoundStc:
    triggers: tuple[SmoothFn, ...]
    constraints: tuple[SmoothFn, ...]
    trigger_mode: TriggerMode
    constraint_form: ConstraintForm

    def __post_init__(self):
        if len(self.triggers) < 1 or len(self.constraints) < 1:
            raise ValueError("need at least one trigger and one constraint")
        if (
            self.constraint_form is ConstraintForm.INEQUALITY_NO_SLACK
            and len(self.constraints) != 1
        ):
            raise ValueError("inequality form admits exactly one constraint")

    @property
    def n_g(self) -> int:
        return len(self.triggers)

    @property
    def n_c(self) -> int:
        return len(self.constraints)

    @property
    def n_alpha(self) -> int:
        if self.constraint_form is ConstraintForm.INEQUALITY_NO_SLACK:
            return 0
        return self.n_c


def sigma_hat(g_val):
    """-min(0, g): positive exactly where the trigger condition holds."""
    return -np.minimum(0.0, g_val)


def sigma_hat_grad(g_val):
    """Kink rule at g = 0: use the inactive-side derivative (zero)."""
    return np.where(np.asarray(g_val, dtype=float) < 0.0, -1.0, 0.0)


def eval_scalar_stc(stc: ScalarStc, z: np.ndarray) -> float:
    z = np.asarray(z, dtype=float)
    return float(sigma_hat(stc.trigger.value(z)) * stc.constraint.value(z))


def _check_alpha(stc: CompoundStc, alpha) -> np.ndarray:
    if stc.constraint_form is ConstraintForm.INEQUALITY_NO_SLACK:
        return np.zeros(stc.n_c)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (stc.n_c,):
        raise ValueError(f"alpha must have length {stc.n_c}")
    if np.any(alpha < 0):
        raise ValueError("slack variables must be nonnegative")
    return alpha


def compound_value(g_vals, c_vals, alpha, mode: TriggerMode):
    """h from raw trigger/constraint values; broadcasts over leading axes."""
    g_vals = np.asarray(g_vals, dtype=float)
    c_vals = np.asarray(c_vals, dtype=float)
    sig = sigma_hat(g_vals)
    trig = sig.prod(axis=-1) if mode is TriggerMode.AND else sig.sum(axis=-1)
    return trig * (c_vals + alpha).prod(axis=-1)


def eval_compound(stc: CompoundStc, z: np.ndarray, alpha=None) -> float:
    z = np.asarray(z, dtype=float)
    alpha = _check_alpha(stc, alpha)
    g_vals = np.array([t.value(z) for t in stc.triggers])
    c_vals = np.array([c.value(z) for c in stc.constraints])
    return float(compound_value(g_vals, c_vals, alpha, stc.trigger_mode))


def linearize_compound(stc: CompoundStc, z_star: np.ndarray, alpha_star=None):
    """First-order expansion of eval_compound about (z*, alpha*).

    Returns (h, dh/dz, dh/dalpha).  The sigma_hat kink at g = 0 takes the
    inactive-side derivative so a dormant trigger stays dormant under
    linearization.
    """
    z_star = np.asarray(z_star, dtype=float)
    alpha_star = _check_alpha(stc, alpha_star)
    g_vals = np.array([t.value(z_star) for t in stc.triggers])
    c_vals = np.array([c.value(z_star) for c in stc.constraints])
    g_grads = np.array([t.grad(z_star) for t in stc.triggers])
    c_grads = np.array([c.grad(z_star) for c in stc.constraints])

    sig = sigma_hat(g_vals)
    dsig = sigma_hat_grad(g_vals)
    factors = c_vals + alpha_star

    # leave-one-out products without dividing (factors may be zero)
    def loo_products(vals):
        n = len(vals)
        fwd = np.ones(n + 1)
        rev = np.ones(n + 1)
        for i in range(n):
            fwd[i + 1] = fwd[i] * vals[i]
            rev[n - 1 - i] = rev[n - i] * vals[n - 1 - i]
        return np.array([fwd[i] * rev[i + 1] for i in range(n)])

    prod_c = factors.prod()
    loo_c = loo_products(factors)
    if stc.trigger_mode is TriggerMode.AND:
        trig = sig.prod()
        loo_s = loo_products(sig)
        dtrig_dz = (loo_s * dsig) @ g_grads
    else:
        trig = sig.sum()
        dtrig_dz = dsig @ g_grads

    h = trig * prod_c
    dh_dz = dtrig_dz * prod_c + trig * (loo_c @ c_grads)
    if stc.constraint_form is ConstraintForm.INEQUALITY_NO_SLACK:
        dh_dalpha = np.zeros(0)
    else:
        dh_dalpha = trig * loo_c
    return float(h), dh_dz, dh_dalpha


def implication_holds(g_vals, c_vals, mode: TriggerMode):
    """Truth value of the implication from raw values; broadcasts like
    compound_value.  Triggers are strict, constraints non-strict."""
    g_vals = np.asarray(g_vals, dtype=float)
    c_vals = np.asarray(c_vals, dtype=float)
    if mode is TriggerMode.AND:
        active = (g_vals < 0).all(axis=-1)
    else:
        active = (g_vals < 0).any(axis=-1)
    satisfied = (c_vals <= 0).any(axis=-1)
    return ~active | satisfied


def logical_oracle(stc: CompoundStc, z: np.ndarray) -> bool:
    z = np.asarray(z, dtype=float)
    g_vals = np.array([t.value(z) for t in stc.triggers])
    c_vals = np.array([c.value(z) for c in stc.constraints])
    return bool(implication_holds(g_vals, c_vals, stc.trigger_mode))


def violation_depth(stc: CompoundStc, z: np.ndarray) -> float:
    """Smallest margin separating z from implication_holds(z), in the units
    of the trigger and constraint functions.

    Positive only when the trigger condition holds strictly and every
    disjunct is strictly violated.  Restoring the implication means either
    deactivating the trigger condition (one trigger for an And, the deepest
    one for an Or) or satisfying one constraint, so the depth is the cheapest
    of those margins.  For an all-triggers keep-out region this is the
    geometric penetration depth past the nearest face.
    """
    z = np.asarray(z, dtype=float)
    g_vals = np.array([t.value(z) for t in stc.triggers])
    c_vals = np.array([c.value(z) for c in stc.constraints])
    if stc.trigger_mode is TriggerMode.AND:
        trig_margin = float(np.min(-g_vals))
    else:
        trig_margin = float(np.max(-g_vals))
    return max(0.0, min(trig_margin, float(np.min(c_vals))))


def slack_witness(c_vals) -> np.ndarray | None:
    """Nonnegative alpha with prod(c + alpha) = 0, or None if none exists.

    Zeroing one factor needs alpha_j = -c_j >= 0, so a witness exists exactly
    when some disjunct is satisfied; the most-satisfied one is picked.
    """
    c_vals = np.asarray(c_vals, dtype=float)
    j = int(np.argmin(c_vals))
    if c_vals[j] > 0:
        return None
    alpha = np.zeros(len(c_vals))
    alpha[j] = -c_vals[j]
    return alpha
