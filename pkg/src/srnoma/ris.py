"""Element-wise response of the transmitting/reflecting relay surface.

Each of the M elements applies an amplitude gain sqrt(beta) and a phase shift
theta to the incident signal, separately for the transmit side and the reflect
side.  ``beta`` values are power gains:

* passive surface: beta_t + beta_r = 1 per element (incident energy is split),
* active surface:  beta on each side may reach p_asris / 2, the per-element
  amplification budget when the surface power is spread evenly over the two
  sides.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .network import SystemConfig

ACTIVE = "active"
PASSIVE = "passive"
_TWO_PI = 2.0 * np.pi


@dataclasses.dataclass
class RisCoefficients:
    """Per-element power gains and phases for both sides of the surface."""

    beta_t: np.ndarray
    beta_r: np.ndarray
    theta_t: np.ndarray
    theta_r: np.ndarray
    mode: str = ACTIVE

    def __post_init__(self) -> None:
        self.beta_t = np.asarray(self.beta_t, dtype=float)
        self.beta_r = np.asarray(self.beta_r, dtype=float)
        self.theta_t = np.asarray(self.theta_t, dtype=float)
        self.theta_r = np.asarray(self.theta_r, dtype=float)
        if self.mode not in (ACTIVE, PASSIVE):
            raise ValueError(f"mode must be '{ACTIVE}' or '{PASSIVE}', got {self.mode!r}")
        m = self.beta_t.shape
        for name in ("beta_r", "theta_t", "theta_r"):
            if getattr(self, name).shape != m:
                raise ValueError("coefficient arrays must share one shape per element")

    @property
    def n_elements(self) -> int:
        return self.beta_t.size


@dataclasses.dataclass
class RisFlags:
    """Mode-aware validity of the surface coefficients.

    A flag is vacuously true when its constraint does not apply to the mode
    (the passive split in active mode, the amplification cap in passive mode).
    """

    passive_split: bool
    active_gain: bool
    phase_range: bool

    def all_ok(self) -> bool:
        return self.passive_split and self.active_gain and self.phase_range


def validate(coeff: RisCoefficients, cfg: SystemConfig) -> RisFlags:
    """Check the surface coefficients against the mode's physical limits."""
    phase_ok = bool(
        np.all(coeff.theta_t >= 0.0)
        and np.all(coeff.theta_t <= _TWO_PI)
        and np.all(coeff.theta_r >= 0.0)
        and np.all(coeff.theta_r <= _TWO_PI)
    )
    if coeff.mode == PASSIVE:
        split_ok = bool(np.all(coeff.beta_t + coeff.beta_r == 1.0))
        gain_ok = True
    else:
        split_ok = True
        cap = cfg.p_asris_watts / 2.0
        gain_ok = bool(np.all(coeff.beta_t <= cap) and np.all(coeff.beta_r <= cap))
    nonneg = bool(np.all(coeff.beta_t >= 0.0) and np.all(coeff.beta_r >= 0.0))
    return RisFlags(split_ok, gain_ok and nonneg, phase_ok)


def beamforming_matrix(coeff: RisCoefficients, side: str) -> np.ndarray:
    """Diagonal response matrix diag(sqrt(beta) * exp(j theta)) for one side.

    Raises ValueError when the coefficients break a structural invariant
    (negative gain, phase outside [0, 2 pi], broken passive split), naming
    the offending one.
    """
    if side not in ("transmit", "reflect"):
        raise ValueError(f"side must be 'transmit' or 'reflect', got {side!r}")
    beta = coeff.beta_t if side == "transmit" else coeff.beta_r
    theta = coeff.theta_t if side == "transmit" else coeff.theta_r
    problems = []
    if np.any(beta < 0.0):
        problems.append("negative amplitude gain")
    if np.any(theta < 0.0) or np.any(theta > _TWO_PI):
        problems.append("phase outside [0, 2*pi]")
    if coeff.mode == PASSIVE and np.any(coeff.beta_t + coeff.beta_r != 1.0):
        problems.append("passive split beta_t + beta_r != 1")
    if problems:
        raise ValueError("invalid surface coefficients: " + ", ".join(problems))
    return np.diag(response_vector(coeff, side))


def response_vector(coeff: RisCoefficients, side: str) -> np.ndarray:
    """Element-wise response sqrt(beta) * exp(j theta) of one side.

    Unlike :func:`beamforming_matrix` this does not enforce the phase-range
    or passive-split invariants: sqrt(beta) * exp(j theta) is well defined
    for any theta and any beta >= 0, and the constraint evaluator needs to
    score decisions that break those invariants rather than crash on them.
    Only a negative gain is rejected, since it has no physical reading.
    """
    if side not in ("transmit", "reflect"):
        raise ValueError(f"side must be 'transmit' or 'reflect', got {side!r}")
    beta = coeff.beta_t if side == "transmit" else coeff.beta_r
    theta = coeff.theta_t if side == "transmit" else coeff.theta_r
    if np.any(beta < 0.0):
        raise ValueError("invalid surface coefficients: negative amplitude gain")
    return np.sqrt(beta) * np.exp(1j * theta)


def equal_energy_split(
    cfg: SystemConfig,
    theta_t: np.ndarray | None = None,
    theta_r: np.ndarray | None = None,
) -> RisCoefficients:
    """Active-surface protocol that spreads the amplification budget evenly:
    every element gets beta = p_asris / 2 on both sides."""
    m = cfg.n_ris_elements
    beta = np.full(m, cfg.p_asris_watts / 2.0)
    if theta_t is None:
        theta_t = np.zeros(m)
    if theta_r is None:
        theta_r = np.zeros(m)
    return RisCoefficients(beta.copy(), beta.copy(), np.asarray(theta_t, dtype=float),
                           np.asarray(theta_r, dtype=float), mode=ACTIVE)
