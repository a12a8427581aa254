"""Secure key rates and the intensity/distance optimizations built on them.

Two lower bounds on the asymptotic secure-key fraction per pulse are
used.  The strong form consumes single-photon bounds from a decoy-state
estimator:

    R >= q * (-Q_mu f_ec H2(E_mu) + Q1_lower * (1 - H2(e1_upper)))

The weak (tagged-fraction) form needs only an upper bound Delta on the
multiphoton fraction of detected signals:

    R >= q Q_mu * (-f_ec H2(E_mu) + (1 - Delta) * (1 - H2(E_mu / (1 - Delta))))

Negative values are meaningful (no secure key at that operating point)
and are preserved; clamping to zero happens only where bits are counted.

When the background is negligible and all errors come from misalignment,
the signal intensity maximizing the strong bound solves

    (1 - mu) e^(-mu) = f_ec * H2(e_detector) / (1 - H2(e_detector)),

which is how the default optimal_mu is computed; an exact-rate maximizer
is provided alongside for cross-checking the approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import bounds as _bounds
from .model import (
    ExperimentParams,
    ValidationError,
    overall_gain,
    overall_qber,
    simulate_observations,
    transmittance,
)
from .numerics import SearchConfig, find_root, find_zero_crossing, maximize_scalar


class NoPositiveRateError(ValidationError):
    """The error model admits no intensity with a positive key rate."""


def binary_entropy(x: float) -> float:
    """Shannon entropy of a bit with bias x, in bits."""
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"binary entropy argument must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -(x * math.log2(x) + (1.0 - x) * math.log2(1.0 - x))


@dataclass(frozen=True)
class KeyRateInputs:
    """Everything the strong key-rate bound consumes.

    q is the basis-sifting factor: 1/2 for standard BB84, close to 1 for
    the efficient variant.
    """

    q: float
    q_mu: float
    e_mu: float
    q1_lower: float
    e1_upper: float
    f_ec: float

    def __post_init__(self) -> None:
        if not 0.0 < self.q <= 1.0:
            raise ValidationError(f"q must lie in (0, 1], got {self.q}")
        if not 0.0 <= self.q_mu <= 1.0:
            raise ValidationError(f"q_mu must lie in [0, 1], got {self.q_mu}")
        if not 0.0 <= self.e_mu <= 1.0:
            raise ValidationError(f"e_mu must lie in [0, 1], got {self.e_mu}")
        if self.q1_lower < 0.0:
            raise ValidationError(f"q1_lower must be >= 0, got {self.q1_lower}")
        if not 0.0 <= self.e1_upper <= 1.0:
            raise ValidationError(f"e1_upper must lie in [0, 1], got {self.e1_upper}")
        if self.f_ec < 1.0:
            raise ValidationError(f"f_ec must be >= 1, got {self.f_ec}")


def key_rate_strong(inputs: KeyRateInputs) -> float:
    """Strong lower bound on the secure-key fraction per pulse."""
    return inputs.q * (
        -inputs.q_mu * inputs.f_ec * binary_entropy(inputs.e_mu)
        + inputs.q1_lower * (1.0 - binary_entropy(inputs.e1_upper))
    )


@dataclass(frozen=True)
class WangRateInputs:
    """Inputs of the tagged-fraction (weak) key-rate bound."""

    q: float
    q_mu: float
    e_mu: float
    delta: float
    f_ec: float

    def __post_init__(self) -> None:
        if not 0.0 < self.q <= 1.0:
            raise ValidationError(f"q must lie in (0, 1], got {self.q}")
        if not 0.0 <= self.q_mu <= 1.0:
            raise ValidationError(f"q_mu must lie in [0, 1], got {self.q_mu}")
        if not 0.0 <= self.e_mu <= 1.0:
            raise ValidationError(f"e_mu must lie in [0, 1], got {self.e_mu}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValidationError(f"delta must lie in [0, 1], got {self.delta}")
        if self.f_ec < 1.0:
            raise ValidationError(f"f_ec must be >= 1, got {self.f_ec}")


def key_rate_wang(inputs: WangRateInputs) -> float:
    """Weak key-rate bound from a multiphoton-fraction cap.

    Returns -inf when the bound degenerates (all detections possibly
    tagged, or the rescaled error rate leaves [0, 1]).
    """
    if inputs.delta >= 1.0:
        return -math.inf
    e_scaled = inputs.e_mu / (1.0 - inputs.delta)
    if e_scaled > 1.0:
        return -math.inf
    return inputs.q * inputs.q_mu * (
        -inputs.f_ec * binary_entropy(inputs.e_mu)
        + (1.0 - inputs.delta) * (1.0 - binary_entropy(e_scaled))
    )


def optimal_mu(params: ExperimentParams, f_ec: float | None = None) -> float:
    """Signal intensity maximizing the strong bound, background neglected.

    Solves (1 - mu) e^(-mu) = f_ec H2(e_det) / (1 - H2(e_det)) on (0, 1].
    With a perfect detector the optimum is mu = 1.
    """
    f = params.f_ec if f_ec is None else f_ec
    if f < 1.0:
        raise ValidationError(f"f_ec must be >= 1, got {f}")
    h = binary_entropy(params.e_detector)
    if h >= 0.5:
        raise NoPositiveRateError(
            f"e_detector={params.e_detector} leaves no single-photon advantage"
        )
    rhs = f * h / (1.0 - h)
    if rhs >= 1.0:
        raise NoPositiveRateError(
            f"error correction at f_ec={f}, e_detector={params.e_detector} "
            "consumes the whole key"
        )
    if rhs == 0.0:
        return 1.0
    cfg = SearchConfig(lo=1e-9, hi=1.0, abs_tol=1e-9, rel_tol=1e-12)
    return find_root(lambda m: (1.0 - m) * math.exp(-m) - rhs, cfg)


def optimal_mu_exact(
    params: ExperimentParams, eta: float, q: float = 0.5, f_ec: float | None = None
) -> float:
    """Intensity maximizing the exact asymptotic rate at one channel.

    Cross-check for optimal_mu: includes the background and the full
    gain/QBER expressions instead of the stationarity approximation.
    """
    f = params.f_ec if f_ec is None else f_ec

    def rate(mu: float) -> float:
        return asymptotic_rate(params, eta, mu, q=q, f_ec=f)

    res = maximize_scalar(rate, SearchConfig(lo=0.01, hi=1.5, abs_tol=1e-7, rel_tol=1e-9))
    return res.x


def optimal_mu_wang(
    params: ExperimentParams,
    length_km: float | None = None,
    q: float = 0.5,
    f_ec: float | None = None,
) -> float:
    """Signal intensity maximizing the weak bound with Delta = mu.

    In the asymptotic limit of Wang-style estimation the tagged-fraction
    cap tends to the signal intensity itself, so the rate is maximized
    with Delta set to mu.  With a length the rate at that distance is
    maximized; without one the secure distance is maximized instead.
    """
    f = params.f_ec if f_ec is None else f_ec
    cfg = SearchConfig(lo=0.01, hi=0.99, abs_tol=1e-6, rel_tol=1e-9)
    if length_km is not None:
        eta = transmittance(params, length_km).eta

        def objective(mu: float) -> float:
            return wang_asymptotic_rate(params, eta, mu, q=q, f_ec=f)

    else:

        def objective(mu: float) -> float:
            d = max_secure_distance(
                lambda l: wang_asymptotic_rate(
                    params, transmittance(params, l).eta, mu, q=q, f_ec=f
                )
            )
            return -1.0 if d is None else d

    return maximize_scalar(objective, cfg).x


# --- rate-versus-distance curves --------------------------------------


def asymptotic_rate(
    params: ExperimentParams, eta: float, mu: float, q: float = 0.5,
    f_ec: float | None = None,
) -> float:
    """Strong bound with perfect (infinite-decoy) single-photon knowledge."""
    est = _bounds.asymptotic_bounds(params, eta, mu)
    return key_rate_strong(KeyRateInputs(
        q=q,
        q_mu=overall_gain(mu, params, eta),
        e_mu=overall_qber(mu, params, eta),
        q1_lower=est.q1_lower,
        e1_upper=est.e1_upper,
        f_ec=params.f_ec if f_ec is None else f_ec,
    ))


def vacuum_weak_rate(
    params: ExperimentParams, eta: float, mu: float, nu: float, q: float = 0.5,
    f_ec: float | None = None,
) -> float:
    """Strong bound fed by the vacuum+weak estimator on model observations."""
    obs = simulate_observations(params, eta, (mu, nu, 0.0))
    est = _bounds.vacuum_weak_bounds(obs, mu, nu)
    return key_rate_strong(KeyRateInputs(
        q=q, q_mu=obs.q_mu, e_mu=obs.e_mu,
        q1_lower=est.q1_lower, e1_upper=est.e1_upper,
        f_ec=params.f_ec if f_ec is None else f_ec,
    ))


def one_decoy_rate(
    params: ExperimentParams, eta: float, mu: float, nu: float,
    variant: str = "trial", q: float = 0.5, f_ec: float | None = None,
) -> float:
    """Strong bound fed by a one-decoy estimator on model observations."""
    obs = simulate_observations(params, eta, (mu, nu))
    if variant == "trial":
        est = _bounds.one_decoy_trial(obs, mu, nu)
    elif variant == "simple":
        est = _bounds.one_decoy_simple(obs, mu, nu)
    else:
        raise ValidationError(f"unknown one-decoy variant {variant!r}")
    return key_rate_strong(KeyRateInputs(
        q=q, q_mu=obs.q_mu, e_mu=obs.e_mu,
        q1_lower=est.q1_lower, e1_upper=est.e1_upper,
        f_ec=params.f_ec if f_ec is None else f_ec,
    ))


def two_decoy_rate(
    params: ExperimentParams, eta: float, intensities, q: float = 0.5,
    f_ec: float | None = None,
) -> float:
    """Strong bound fed by the generic two-decoy estimator."""
    if not hasattr(intensities, "mu"):
        intensities = _bounds.ProtocolIntensities(*intensities)
    obs = simulate_observations(params, eta, intensities)
    est = _bounds.two_decoy_bounds(obs, intensities)
    return key_rate_strong(KeyRateInputs(
        q=q, q_mu=obs.q_mu, e_mu=obs.e_mu,
        q1_lower=est.q1_lower, e1_upper=est.e1_upper,
        f_ec=params.f_ec if f_ec is None else f_ec,
    ))


def wang_asymptotic_rate(
    params: ExperimentParams, eta: float, mu: float, q: float = 0.5,
    f_ec: float | None = None,
) -> float:
    """Weak bound with the asymptotic tagged-fraction cap Delta = mu."""
    rate = key_rate_wang(WangRateInputs(
        q=q,
        q_mu=overall_gain(mu, params, eta),
        e_mu=overall_qber(mu, params, eta),
        delta=mu,
        f_ec=params.f_ec if f_ec is None else f_ec,
    ))
    return rate


def max_secure_distance(
    rate_of_length, l_max: float = 500.0, step: float = 2.0, l_tol: float = 0.01
) -> float | None:
    """Zero crossing of a rate-versus-distance curve, to l_tol km.

    Expects the usual shape: positive at short distance, negative past
    the crossing.  Returns None when the rate is never positive, and
    l_max when it is still positive there.
    """
    r0 = rate_of_length(0.0)
    if r0 <= 0.0:
        return None
    crossing = find_zero_crossing(rate_of_length, 0.0, l_max, step, x_tol=l_tol)
    if crossing is None:
        return l_max
    return crossing
