"""Feasibility bookkeeping for the max-min throughput problem.

The network maximizes the worst per-user rate subject to eleven constraint
families, indexed C1..C11 in every report and CSV:

  C1  passive_split        per-element beta_t + beta_r = 1 (passive surface)
  C2  active_gain          per-element beta <= p_asris / 2 (active surface)
  C3  phase_range          all surface phases inside [0, 2 pi]
  C4  power_cap            0 <= P_i <= p_bs_max
  C5  eta_range            0 <= eta_i <= 1
  C6  tau_range            0 <= tau_i <= 1
  C7  harvest              scavenged energy of each SBD >= threshold
  C8  sic_order_phase1     backscatter rates nonincreasing along the decoding order
  C9  sic_order_phase2     downlink rates nonincreasing along both decoding orders
  C10 rate_target_phase1   every backscatter SINR supports the target rate
  C11 rate_target_phase2   every downlink SINR supports the target rate

Each entry carries a signed slack; a constraint holds exactly when its slack
is >= 0.  C1/C2 are vacuously satisfied (slack 0) in the mode where they do
not apply.  C10/C11 compare SINRs against the inverted rate expressions, so a
positive target with a zero-length phase makes them unsatisfiable (huge
negative slack) rather than dividing by zero.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .network import ChannelRealization, SystemConfig
from .rates import DecisionVariables, RateReport
from .ris import PASSIVE

CONSTRAINT_NAMES = (
    "passive_split",
    "active_gain",
    "phase_range",
    "power_cap",
    "eta_range",
    "tau_range",
    "harvest",
    "sic_order_phase1",
    "sic_order_phase2",
    "rate_target_phase1",
    "rate_target_phase2",
)

N_CONSTRAINTS = len(CONSTRAINT_NAMES)
_TWO_PI = 2.0 * np.pi
# exp2 exponents above ~1023 overflow float64; clamping keeps slacks finite
# while staying astronomically above any physical SINR.
_MAX_EXP2 = 1023.0

LITERAL = "literal"
PENALTY = "penalty"


@dataclasses.dataclass
class ConstraintReport:
    """Flags and signed slacks for the eleven constraint families."""

    flags: np.ndarray
    slacks: np.ndarray

    def __post_init__(self) -> None:
        self.flags = np.asarray(self.flags, dtype=bool)
        self.slacks = np.asarray(self.slacks, dtype=float)
        if self.flags.shape != (N_CONSTRAINTS,) or self.slacks.shape != (N_CONSTRAINTS,):
            raise ValueError(f"reports carry exactly {N_CONSTRAINTS} entries")

    @property
    def satisfied_count(self) -> int:
        return int(self.flags.sum())

    @property
    def all_satisfied(self) -> bool:
        return bool(self.flags.all())

    def as_record(self) -> dict:
        """Flat mapping for CSV rows: one flag and one slack per constraint."""
        record: dict = {}
        for idx, name in enumerate(CONSTRAINT_NAMES):
            record[f"{name}_ok"] = int(self.flags[idx])
            record[f"{name}_slack"] = float(self.slacks[idx])
        return record


def harvested_energy(
    ch: ChannelRealization, dv: DecisionVariables, cfg: SystemConfig
) -> np.ndarray:
    """Energy each SBD scavenges over one unit frame.

    The device keeps the (1 - eta) share of the incident power during the
    (1 - tau) slice it is not backscattering in, scaled by the conversion
    efficiency.
    """
    beam = np.abs(np.einsum("ni,ni->i", ch.h1.conj(), dv.w1)) ** 2
    return (
        cfg.energy_conversion_efficiency
        * dv.power
        * (1.0 - dv.eta)
        * (1.0 - dv.tau)
        * beam
    )


def _ordering_slack(rates: np.ndarray, order: np.ndarray) -> float:
    """Minimum consecutive drop along the decoding order; >= 0 when rates are
    nonincreasing, 0 for a single user."""
    if len(order) < 2:
        return 0.0
    ordered = rates[order]
    return float(np.min(ordered[:-1] - ordered[1:]))


def _required_sinr(rate_target: float, time_share: np.ndarray, spread: float,
                   bandwidth: float) -> np.ndarray:
    """Invert rate = (bandwidth * share / spread) * log2(1 + sinr) for sinr."""
    share = np.asarray(time_share, dtype=float)
    if rate_target <= 0.0:
        return np.zeros_like(share)
    with np.errstate(divide="ignore"):
        exponent = np.where(share > 0.0, spread * rate_target / (bandwidth * share), np.inf)
    return np.exp2(np.minimum(exponent, _MAX_EXP2)) - 1.0


def evaluate_constraints(
    ch: ChannelRealization,
    dv: DecisionVariables,
    cfg: SystemConfig,
    rates: RateReport,
) -> ConstraintReport:
    """Score a decision against all eleven constraint families."""
    slacks = np.zeros(N_CONSTRAINTS)
    cap = cfg.p_asris_watts / 2.0
    coeff = dv.ris

    if coeff.mode == PASSIVE:
        slacks[0] = -float(np.max(np.abs(coeff.beta_t + coeff.beta_r - 1.0)))
        slacks[1] = 0.0
    else:
        slacks[0] = 0.0
        slacks[1] = float(cap - max(coeff.beta_t.max(), coeff.beta_r.max()))

    thetas = np.concatenate([coeff.theta_t, coeff.theta_r])
    slacks[2] = float(np.min(np.minimum(thetas, _TWO_PI - thetas)))
    slacks[3] = float(np.min(np.minimum(cfg.p_bs_max_watts - dv.power, dv.power)))
    slacks[4] = float(np.min(np.minimum(dv.eta, 1.0 - dv.eta)))
    slacks[5] = float(np.min(np.minimum(dv.tau, 1.0 - dv.tau)))
    slacks[6] = float(np.min(harvested_energy(ch, dv, cfg) - cfg.harvest_threshold_joules))
    slacks[7] = _ordering_slack(rates.phase1_rate, rates.phase1_order)
    # np.min propagates NaN from either side; builtin min() would keep or
    # drop it depending on argument order
    slacks[8] = float(np.min([
        _ordering_slack(rates.phase2_reflect_rate, rates.phase2_reflect_order),
        _ordering_slack(rates.phase2_transmit_rate, rates.phase2_transmit_order),
    ]))

    need1 = _required_sinr(
        dv.rate_target, dv.tau, float(cfg.symbols_per_bd_symbol), cfg.bandwidth_hz
    )
    slacks[9] = float(np.min(rates.phase1_sinr - need1))
    need2 = _required_sinr(dv.rate_target, 1.0 - dv.tau, 1.0, cfg.bandwidth_hz)
    slacks[10] = float(np.min([
        np.min(rates.phase2_reflect_sinr - need2),
        np.min(rates.phase2_transmit_sinr - need2),
    ]))

    return ConstraintReport(slacks >= 0.0, slacks)


def objective(rates: RateReport) -> float:
    """Max-min objective value: the worst rate over all users of both phases."""
    return rates.min_rate


def reward(
    rate_value: float,
    report: ConstraintReport,
    mode: str = LITERAL,
    violation_cost: float = 1.0,
) -> float:
    """Scalar learning signal for one step.

    literal: rate * (1 + number of satisfied constraints), i.e. the rate plus
    one rate-sized bonus per satisfied constraint.  penalty: rate minus a
    fixed cost per violated constraint.
    """
    if mode == LITERAL:
        return float(rate_value) * (1.0 + report.satisfied_count)
    if mode == PENALTY:
        return float(rate_value) - violation_cost * (N_CONSTRAINTS - report.satisfied_count)
    raise ValueError(f"reward mode must be '{LITERAL}' or '{PENALTY}', got {mode!r}")
