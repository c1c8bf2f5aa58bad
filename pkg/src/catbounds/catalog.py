"""Built-in level-jump example with periodic rates and harmonic catastrophe rates.

``published`` uses arrival rate ``2 + 2 cos 2 pi t``; ``corrected`` scales it
by 1/4 so that the first-principles contraction rate under linear weights is
``1 - cos 2 pi t`` and every bound is nontrivial.
"""

from __future__ import annotations

import math

from .bounds import PublishedClaims
from .model import (
    BSequence,
    Catastrophes,
    CatastropheTail,
    LevelJumpArrivals,
    QueueModel,
    SingleServer,
    TimeFunction,
    WeightSequence,
)

VARIANTS = ("published", "corrected")


def arrival_rate(scale: float = 1.0) -> TimeFunction:
    return TimeFunction.trig(2.0 * scale, [(2.0 * scale, 0.0, 1.0)], name="lambda")


def catastrophe_rates() -> Catastrophes:
    """``gamma_k(t) = 2 + (1 + sin 2 pi t)/k`` for every ``k >= 1``."""
    tail = CatastropheTail(
        "harmonic",
        base=TimeFunction.constant(2.0, name="gamma_base"),
        coefficient=TimeFunction.trig(1.0, [(0.0, 1.0, 1.0)], name="gamma_coefficient"),
    )
    return Catastrophes(tail=tail)


def example_model(variant: str = "corrected", mu: TimeFunction | None = None) -> QueueModel:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    scale = 1.0 if variant == "published" else 0.25
    mu = mu if mu is not None else TimeFunction.constant(1.0, name="mu")
    return QueueModel(
        arrivals=LevelJumpArrivals(arrival_rate(scale), BSequence.cubic()),
        services=SingleServer(mu),
        catastrophes=catastrophe_rates(),
    )


def published_claims() -> PublishedClaims:
    """Constants stated for the published parameterization."""
    return PublishedClaims(
        weighted_arrival_excess=0.5,
        beta_double_star=TimeFunction.trig(1.0, [(2.0, 0.0, 1.0)], name="claimed_beta", signed=True),
        R_star_star=2.0,
        b_star_star=1.0,
        b_star=4.0,
        limit_bound=8.0,
        mean_coefficient=(2.0, 2.0),
    )


def corrected_constants() -> dict:
    """Closed-form values for the corrected parameterization."""
    return {"b_star_star": 1.0, "R_star_star": math.exp(1.0 / math.pi), "b_star": 2.0,
            "limit_bound": 2.0 * math.exp(1.0 / math.pi)}


def example_weights() -> WeightSequence:
    return WeightSequence.linear()
