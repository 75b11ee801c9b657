"""How a state-triggered constraint embeds a go/no-go decision.

The running example is the corridor gate used by the hoop scenario.
A trajectory point with axial coordinate a and lateral distance d
(both measured in the gate frame) must satisfy

    |a| < l   =>   d <= rho

i.e. whenever the point is inside the corridor slab, it has to stay
within the lateral tube.  The implication is not a convex constraint,
and it is not even smooth, but it has an exact algebraic surrogate:
with sigma_hat(g) = -min(0, g),

    h(a, d) = sigma_hat(a - l) * sigma_hat(-a - l) * (d - rho) <= 0

is satisfied exactly where the implication holds.  Both trigger factors
are positive only inside the slab, so outside the slab h vanishes and d
is unconstrained; inside, the sign of h is the sign of d - rho.
"""
import numpy as np
from numpy.random import default_rng

from stctraj.stc import (
    CompoundStc,
    ConstraintForm,
    SmoothFn,
    TriggerMode,
    eval_compound,
    implication_holds,
    logical_oracle,
    sigma_hat,
    sigma_hat_grad,
)

L, RHO = 0.5, 0.1

gate = CompoundStc(
    triggers=(
        SmoothFn(lambda z: z[0] - L, lambda z: np.array([1.0, 0.0])),
        SmoothFn(lambda z: -z[0] - L, lambda z: np.array([-1.0, 0.0])),
    ),
    constraints=(
        SmoothFn(lambda z: z[1] - RHO, lambda z: np.array([0.0, 1.0])),
    ),
    trigger_mode=TriggerMode.AND,
    constraint_form=ConstraintForm.INEQUALITY_NO_SLACK,
)


def main():
    print("sigma_hat and its one-sided derivative around the kink:")
    for g in (-0.2, -1e-9, 0.0, 1e-9, 0.2):
        print(f"  g = {g:+.1e}   sigma_hat = {sigma_hat(g):.3e}   "
              f"d(sigma_hat)/dg = {sigma_hat_grad(g):+.0f}")
    print()

    # a few hand-picked points: (axial, lateral) -> h and the verdict
    print(f"corridor gate with l = {L}, rho = {RHO}:")
    cases = [
        (0.0, 0.05, "in slab, in tube"),
        (0.0, 0.30, "in slab, outside tube"),
        (2.0, 5.00, "far from the gate, anything goes"),
        (0.5, 5.00, "exactly on the slab face (trigger off)"),
    ]
    for a, d, label in cases:
        z = np.array([a, d])
        h = eval_compound(gate, z)
        ok = logical_oracle(gate, z)
        print(f"  a = {a:+.2f}  d = {d:.2f}   h = {h:+.4e}   "
              f"implication {'holds' if ok else 'violated':9s} ({label})")
    print()

    # the surrogate agrees with the logical implication everywhere
    rng = default_rng(0)
    n = 100_000
    z = np.column_stack([rng.uniform(-2, 2, n), rng.uniform(0, 1, n)])
    mismatches = 0
    for zi in z:
        g = np.array([t.value(zi) for t in gate.triggers])
        c = np.array([gate.constraints[0].value(zi)])
        algebraic = eval_compound(gate, zi) <= 0.0
        logical = implication_holds(g, c, TriggerMode.AND)
        mismatches += algebraic != logical
    print(f"random sweep: {n} points, {mismatches} disagreements between")
    print("the algebraic test h <= 0 and the logical implication.")


if __name__ == "__main__":
    main()
