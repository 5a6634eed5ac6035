"""Bank of set-valued observers, residual zonotopes and the diagnosis rule.

Each observer matches one actuator mode and propagates a zonotope guaranteed
to contain the state while the plant is in that mode.  A mode is rejected
once the residual ``y+ (+) (-Yhat+)`` excludes the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .plant import PlantModel
from .setops import Zonotope, contains_point, excluding_degree, interval_product_enclosure, reduce_order

# A residual is an ordinary zonotope in output space.
ResidualZonotope = Zonotope

VERDICT_CONSISTENT = "consistent-set"
VERDICT_ISOLATED = "isolated"
VERDICT_INDETERMINATE = "alarm-indeterminate"


@dataclass(frozen=True)
class SVOState:
    """One observer of the bank: mode index, state set and current gain."""

    mode: int
    xhat: Zonotope
    gain: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gain", np.asarray(self.gain, dtype=float))

    def with_gain(self, gain) -> "SVOState":
        return replace(self, gain=np.asarray(gain, dtype=float))


@dataclass(frozen=True)
class Diagnosis:
    """Outcome of one residual test across the bank."""

    verdict: str
    isolated_mode: int | None
    consistent: tuple[int, ...]
    membership: tuple[bool, ...]


def svo_step(
    model: PlantModel,
    obs: SVOState,
    u,
    y_k,
    eps1: float,
    reduction_order: int | None = 20,
) -> SVOState:
    """Advance one observer by one step using its current gain and ``y_k``.

    Center: ``(A - L C) xhat_c + L y - L F eta_c + mid(B G_i) u + E w_c``.
    Generators: ``[(A - L C) H, -L F H_eta, fault column, E H_w]`` with the
    fault column absent in the healthy mode; the result is order-reduced.
    """
    u = np.asarray(u, dtype=float)
    y_k = np.asarray(y_k, dtype=float)
    L = obs.gain
    A, C, E, F = model.A, model.C, model.E, model.F
    AL = A - L @ C
    encl = interval_product_enclosure(model.B, model.mode_bounds[obs.mode], u, eps1)
    center = (
        AL @ obs.xhat.center
        + L @ y_k
        - L @ (F @ model.V.center)
        + encl.center
        + E @ model.W.center
    )
    blocks = [AL @ obs.xhat.generators, -L @ (F @ model.V.generators)]
    if obs.mode != 0:
        blocks.append(encl.generators)
    blocks.append(E @ model.W.generators)
    nxt = Zonotope(center, np.hstack(blocks))
    if reduction_order is not None:
        nxt = reduce_order(nxt, reduction_order)
    return SVOState(mode=obs.mode, xhat=nxt, gain=obs.gain)


def output_set(model: PlantModel, obs: SVOState) -> Zonotope:
    """``<C xhat_c + F eta_c, [C H, F H_eta]>``."""
    C, F = model.C, model.F
    center = C @ obs.xhat.center + F @ model.V.center
    gens = np.hstack((C @ obs.xhat.generators, F @ model.V.generators))
    return Zonotope(center, gens)


def residual(y_next, yhat_next: Zonotope) -> ResidualZonotope:
    """Residual zonotope ``y+ (+) (-Yhat+)``.

    Negating the generators of a centrally symmetric set changes nothing, so
    they are kept as-is.
    """
    y_next = np.asarray(y_next, dtype=float)
    if y_next.shape[0] != yhat_next.dim:
        raise ValueError("measurement dimension mismatch")
    return Zonotope(y_next - yhat_next.center, yhat_next.generators)


def diagnose(residuals: list[ResidualZonotope]) -> Diagnosis:
    """Classify the bank: which modes remain consistent with the measurement.

    A mode is consistent iff its residual contains the origin.  A singleton
    consistent set isolates that mode; an empty one means every hypothesized
    mode is rejected (model-set violation) and is reported as indeterminate.
    """
    if not residuals:
        raise ValueError("empty residual list")
    membership = tuple(contains_point(r, np.zeros(r.dim)) for r in residuals)
    consistent = tuple(i for i, inside in enumerate(membership) if inside)
    if not consistent:
        return Diagnosis(VERDICT_INDETERMINATE, None, consistent, membership)
    if len(consistent) == 1:
        return Diagnosis(VERDICT_ISOLATED, consistent[0], consistent, membership)
    return Diagnosis(VERDICT_CONSISTENT, None, consistent, membership)


def excluding_degree_residual(r: ResidualZonotope) -> float:
    return excluding_degree(r)
