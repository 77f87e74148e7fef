"""Geometry and random channel generation for the two-phase backscatter network.

Scene: a multi-antenna base station (BS) at the origin illuminates I
single-antenna backscatter devices (SBDs) sitting on a ring around it.  In the
first phase slice of each frame the SBDs modulate the incident carrier back to
the BS; in the second slice the BS relays the decoded symbols to I reflect-side
and I transmit-side user equipments (SUEs), assisted by an amplifying
simultaneously transmitting/reflecting relay surface.  The surface plane splits
the scene into a reflection half (containing the BS and the reflect SUEs) and a
transmission half (containing the transmit SUEs).

Conventions
-----------
* 2-D geometry, positions in metres, BS at the origin.
* BS antennas and surface elements are half-wavelength uniform linear arrays
  along the y-axis, so the steering phase of element k toward a point offset
  (dx, dy) is pi * k * dy / hypot(dx, dy).
* Channel blocks and their per-entry second moments:
    h1  (N, I)  BS -> SBD_i columns,        Rayleigh, PL(d_bs_sbd) * G_bs
    g1  (N, I)  SBD_i -> BS columns,        Rayleigh, PL(d_bs_sbd) * G_bs
    h2  (M, N)  BS -> surface (conjugated), Rician,   PL(d_bs_asris) * G_bs * G_ris
    h3  (N, I)  BS -> reflect-SUE_i cols,   Rayleigh, PL(d_bs_sue) * G_bs
    g2r (I, M)  surface -> reflect-SUE_i,   Rician,   PL(d_asris_sue) * G_ris
    g2t (I, M)  surface -> transmit-SUE_i,  Rician,   PL(d_asris_sue) * G_ris
  h2 stores the surface-side view of the BS->surface link, i.e. the matrix
  that left-multiplies a BS beamforming vector after the element-wise surface
  response has been applied.
* All randomness comes from counter-based Philox generators keyed by 64-bit
  seeds, so placements and realizations are reproducible across platforms.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s


class DegenerateChannelError(ValueError):
    """Raised when an operation needs a nonzero channel vector and got zeros."""


def dbm_to_watts(dbm: float) -> float:
    """Convert a dBm power level to watts (0 dBm = 1 mW)."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0.0:
        raise ValueError(f"power must be positive, got {watts}")
    return 10.0 * math.log10(watts) + 30.0


@dataclasses.dataclass
class SystemConfig:
    """Static scene parameters shared by every module.

    Counts are numbers of BS antennas / surface elements / SBD-SUE pairs; the
    backscatter spreading stretches one device symbol over
    ``symbols_per_bd_symbol`` carrier symbols.  Antenna gains are linear power
    gains, noise figures are variances in watts, and ``harvest_threshold_joules``
    is the energy each SBD must scavenge per (unit-length) frame.
    """

    n_bs_antennas: int = 8
    n_ris_elements: int = 16
    n_pairs: int = 3
    symbols_per_bd_symbol: int = 100
    bandwidth_hz: float = 1.0
    noise_bs_watts: float = dbm_to_watts(-120.0)
    noise_asris_watts: float = dbm_to_watts(-120.0)
    noise_sue_watts: float = dbm_to_watts(-120.0)
    p_bs_max_watts: float = 20.0
    p_asris_watts: float = 10.0
    energy_conversion_efficiency: float = 0.8
    harvest_threshold_joules: float = 1e-6
    carrier_hz: float = 28e9
    path_loss_exponent: float = 3.0
    rician_k: float = 10.0
    bs_antenna_gain: float = 16.0
    ris_element_gain: float = 8.0
    d_bs_sbd_m: float = 200.0
    d_bs_sue_max_m: float = 100.0
    d_bs_asris_max_m: float = 300.0

    def __post_init__(self) -> None:
        for name in ("n_bs_antennas", "n_ris_elements", "n_pairs", "symbols_per_bd_symbol"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        for name in (
            "bandwidth_hz",
            "noise_bs_watts",
            "noise_asris_watts",
            "noise_sue_watts",
            "p_bs_max_watts",
            "p_asris_watts",
            "carrier_hz",
            "d_bs_sbd_m",
            "d_bs_sue_max_m",
            "d_bs_asris_max_m",
        ):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        if not 0.0 <= self.energy_conversion_efficiency <= 1.0:
            raise ValueError(
                f"energy_conversion_efficiency must lie in [0, 1], "
                f"got {self.energy_conversion_efficiency!r}"
            )
        if self.harvest_threshold_joules < 0.0:
            raise ValueError("harvest_threshold_joules must be nonnegative")
        if self.path_loss_exponent < 0.0:
            raise ValueError("path_loss_exponent must be nonnegative")
        if self.rician_k < 0.0:
            raise ValueError("rician_k must be nonnegative")
        for name in ("bs_antenna_gain", "ris_element_gain"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")


def path_loss(distance_m: float, carrier_hz: float = 28e9, exponent: float = 3.0) -> float:
    """Free-space reference loss at 1 m times d^-exponent.

    PL(d) = (lambda / (4 pi))^2 * d^-exponent with lambda = c / f.
    """
    if distance_m <= 0.0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    wavelength = SPEED_OF_LIGHT / carrier_hz
    reference = (wavelength / (4.0 * math.pi)) ** 2
    return reference * distance_m ** (-exponent)


@dataclasses.dataclass
class Placement:
    """Node positions for one scene draw.  All arrays are (count, 2) in metres."""

    bs: np.ndarray
    asris: np.ndarray
    sbd: np.ndarray
    sue_reflect: np.ndarray
    sue_transmit: np.ndarray
    seed: int

    def d_bs_sbd(self) -> np.ndarray:
        return np.linalg.norm(self.sbd - self.bs, axis=1)

    def d_bs_asris(self) -> float:
        return float(np.linalg.norm(self.asris - self.bs))

    def d_bs_sue_reflect(self) -> np.ndarray:
        return np.linalg.norm(self.sue_reflect - self.bs, axis=1)

    def d_asris_sue_reflect(self) -> np.ndarray:
        return np.linalg.norm(self.sue_reflect - self.asris, axis=1)

    def d_asris_sue_transmit(self) -> np.ndarray:
        return np.linalg.norm(self.sue_transmit - self.asris, axis=1)


def _philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def make_placement(cfg: SystemConfig, seed: int) -> Placement:
    """Draw node positions.

    The BS sits at the origin and the surface on the +x axis; its plane is the
    vertical line through it, so "behind the surface" means x greater than the
    surface abscissa.  SBDs are placed on the exact 200 m ring at uniform
    angles.  SUEs are uniform over the BS disc of radius d_bs_sue_max_m,
    rejection-split by the surface plane: reflect users on the BS side,
    transmit users beyond it.  The surface is pulled inside the SUE disc
    (0.6 * d_bs_sue_max_m, capped by d_bs_asris_max_m) so that the transmit
    half of the disc is nonempty.
    """
    rng = _philox(seed)
    i = cfg.n_pairs
    bs = np.zeros(2)
    d_asris = min(cfg.d_bs_asris_max_m, 0.6 * cfg.d_bs_sue_max_m)
    asris = np.array([d_asris, 0.0])

    angles = rng.uniform(0.0, 2.0 * math.pi, size=i)
    sbd = cfg.d_bs_sbd_m * np.column_stack([np.cos(angles), np.sin(angles)])

    def disc_point(side: int) -> np.ndarray:
        # side -1: reflect half (x < d_asris), +1: transmit half (x > d_asris)
        while True:
            p = rng.uniform(-cfg.d_bs_sue_max_m, cfg.d_bs_sue_max_m, size=2)
            if p[0] ** 2 + p[1] ** 2 > cfg.d_bs_sue_max_m ** 2:
                continue
            if side * (p[0] - d_asris) > 0.0:
                return p

    sue_reflect = np.stack([disc_point(-1) for _ in range(i)])
    sue_transmit = np.stack([disc_point(+1) for _ in range(i)])
    return Placement(bs, asris, sbd, sue_reflect, sue_transmit, seed)


@dataclasses.dataclass
class ChannelRealization:
    """One fading draw.  See the module docstring for shapes and moments."""

    h1: np.ndarray
    g1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    g2r: np.ndarray
    g2t: np.ndarray
    seed: int

    def blocks(self) -> tuple[np.ndarray, ...]:
        return (self.h1, self.g1, self.h2, self.h3, self.g2r, self.g2t)


def ula_steering(n_elements: int, sin_angle: float) -> np.ndarray:
    """Half-wavelength ULA response for a ray whose direction has the given
    sine along the array axis."""
    return np.exp(1j * math.pi * np.arange(n_elements) * sin_angle)


def _sin_toward(origin: np.ndarray, target: np.ndarray) -> float:
    d = target - origin
    dist = math.hypot(d[0], d[1])
    if dist == 0.0:
        raise ValueError("co-located nodes have no steering direction")
    return d[1] / dist


def _rayleigh(rng: np.random.Generator, shape: tuple, variance) -> np.ndarray:
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _rician(
    rng: np.random.Generator, los_unit: np.ndarray, variance, k_factor: float
) -> np.ndarray:
    los_gain = math.sqrt(k_factor / (k_factor + 1.0))
    nlos = _rayleigh(rng, los_unit.shape, 1.0 / (k_factor + 1.0))
    return np.sqrt(np.asarray(variance, dtype=float)) * (los_gain * los_unit + nlos)


def draw_realization(cfg: SystemConfig, placement: Placement, seed: int) -> ChannelRealization:
    """Draw one channel realization from the placement.

    BS-side links (h1, g1, h3) are Rayleigh; surface links (h2, g2r, g2t) are
    Rician with a deterministic line-of-sight component built from the
    steering vectors of the two arrays.  Blocks are drawn in the fixed order
    h1, g1, h2, h3, g2r, g2t so a given seed always yields the same channels.
    """
    rng = _philox(seed)
    n, m, i = cfg.n_bs_antennas, cfg.n_ris_elements, cfg.n_pairs
    g_bs, g_ris = cfg.bs_antenna_gain, cfg.ris_element_gain
    pl = lambda d: path_loss(d, cfg.carrier_hz, cfg.path_loss_exponent)

    var_sbd = pl(cfg.d_bs_sbd_m) * g_bs
    h1 = _rayleigh(rng, (n, i), var_sbd)
    g1 = _rayleigh(rng, (n, i), var_sbd)

    var_h2 = pl(placement.d_bs_asris()) * g_bs * g_ris
    los_h2 = np.outer(
        ula_steering(m, _sin_toward(placement.asris, placement.bs)),
        ula_steering(n, _sin_toward(placement.bs, placement.asris)).conj(),
    )
    h2 = _rician(rng, los_h2, var_h2, cfg.rician_k)

    var_h3 = np.array([pl(d) * g_bs for d in placement.d_bs_sue_reflect()])
    h3 = _rayleigh(rng, (n, i), var_h3[None, :])

    var_g2r = np.array([pl(d) * g_ris for d in placement.d_asris_sue_reflect()])
    los_g2r = np.stack(
        [
            ula_steering(m, _sin_toward(placement.asris, placement.sue_reflect[k])).conj()
            for k in range(i)
        ]
    )
    g2r = _rician(rng, los_g2r, var_g2r[:, None], cfg.rician_k)

    var_g2t = np.array([pl(d) * g_ris for d in placement.d_asris_sue_transmit()])
    los_g2t = np.stack(
        [
            ula_steering(m, _sin_toward(placement.asris, placement.sue_transmit[k])).conj()
            for k in range(i)
        ]
    )
    g2t = _rician(rng, los_g2t, var_g2t[:, None], cfg.rician_k)

    return ChannelRealization(h1, g1, h2, h3, g2r, g2t, seed)
