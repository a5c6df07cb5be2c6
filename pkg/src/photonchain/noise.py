"""Stochastic imperfection channels and their calibration helpers.

Four independent mechanisms are modeled:

* photon loss — a single Bernoulli trial per photon with success
  probability eta0 * eta_d (losses commute with polarization measurement,
  so the detection-chain breakdown is reporting metadata only);
* Raman rotation errors — a coherent angle error theta -> theta + eps,
  eps ~ N(0, raman_sigma), applied to every Raman pulse;
* closing-step scattering — with probability closing_scatter_p the
  closing qubit is replaced by a random state on span{|2,+1>, |2,-1>}
  with uniformly random population split and relative phase;
* magnetic-field noise — a fractional Larmor-frequency offset delta
  ~ N(0, b_sigma), drawn once per shot (quasi-static, the default) or
  once per photon cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .levels import OMEGA_L


@dataclass(frozen=True)
class NoiseConfig:
    eta0: float = 1.0                 # source efficiency
    eta_d: float = 1.0                # detection efficiency
    detection_chain: tuple[tuple[str, float], ...] = ()
    raman_sigma: float = 0.0          # rad, std dev of the angle error
    closing_scatter_p: float = 0.0
    b_sigma: float = 0.0              # fractional Larmor-frequency std dev
    b_model: str = "quasi-static"     # or "per-cycle"

    def __post_init__(self):
        for name in ("eta0", "eta_d", "closing_scatter_p"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} outside [0, 1]")
        if self.raman_sigma < 0 or self.b_sigma < 0:
            raise ValueError("noise widths must be non-negative")
        if self.b_model not in ("quasi-static", "per-cycle"):
            raise ValueError(f"unknown b_model {self.b_model!r}")
        if self.detection_chain:
            prod = math.prod(p for _, p in self.detection_chain)
            if abs(prod - self.eta_d) > 1e-9:
                raise ValueError(
                    f"detection_chain product {prod} != eta_d {self.eta_d}")

    @property
    def eta(self) -> float:
        """Per-photon generation-and-detection probability."""
        return self.eta0 * self.eta_d


# Loss budget quoted for the experiment's detection path; the product is
# the eta_d = 0.7 operating point.
REFERENCE_DETECTION_CHAIN = (
    ("fiber_coupling_1", 0.94),
    ("fiber_coupling_2", 0.94),
    ("fiber_propagation", 0.97),
    ("free_space_optics", 0.90),
    ("detector", 0.90),
)


@dataclass(frozen=True)
class FieldSample:
    """Fractional Larmor-frequency offset for one shot (or cycle)."""

    delta: float


def sample_detection(rng, cfg: NoiseConfig) -> bool:
    """One Bernoulli detection trial with probability eta0 * eta_d."""
    return bool(rng.random() < cfg.eta)


def perturb_rotation(theta: float, rng, cfg: NoiseConfig) -> float:
    """Coherent angle error: theta + eps with eps ~ N(0, raman_sigma)."""
    if cfg.raman_sigma == 0.0:
        return theta
    return theta + rng.normal(0.0, cfg.raman_sigma)


def raman_sigma_for_infidelity(infidelity: float) -> float:
    """Angle-error width giving the requested mean pi-pulse infidelity.

    The mean gate infidelity of a pi pulse with angle error eps is
    E[sin^2(eps/2)] ~= sigma^2 / 4 for small sigma.
    """
    if infidelity < 0:
        raise ValueError("infidelity must be non-negative")
    return 2.0 * math.sqrt(infidelity)


def random_span_state(i: int, j: int, u_pop: float, u_phase: float) -> np.ndarray:
    """Random 8-level ket on span{i, j}: population split u_pop, relative
    phase 2*pi*u_phase."""
    amps = np.zeros(8, dtype=complex)
    amps[i] = math.sqrt(u_pop)
    amps[j] = math.sqrt(1.0 - u_pop) * np.exp(2j * np.pi * u_phase)
    return amps


def apply_closing_scatter(state, rng, cfg: NoiseConfig):
    """Decoherence event at the closing transfer.

    With probability ``closing_scatter_p`` the atomic qubit (already
    transferred to span{|2,+1>, |2,-1>}) is replaced by a random state on
    that span; the photon is still emitted and detected, so the shot
    continues.  Returns ``(state, scattered)``.
    """
    from .levels import AtomKet, Sublevel

    if rng.random() >= cfg.closing_scatter_p:
        return state, False
    i = Sublevel(2, 1).index
    j = Sublevel(2, -1).index
    return AtomKet(random_span_state(i, j, rng.random(), rng.random())), True


def sample_field(rng, cfg: NoiseConfig) -> FieldSample:
    """Draw the fractional field offset for a shot (quasi-static mode) or
    cycle (per-cycle mode)."""
    if cfg.b_sigma == 0.0:
        return FieldSample(0.0)
    return FieldSample(float(rng.normal(0.0, cfg.b_sigma)))


def coherence_envelope(t: float | np.ndarray, b_sigma: float,
                       omega_l: float = OMEGA_L):
    """Upper envelope of the two-photon overlap for an idle qubit.

    Quasi-static Gaussian field noise averages cos(2 w_L delta t) to
    exp(-(2 w_L b_sigma t)^2 / 2), so the overlap envelope is
    (1 + exp(-(2 w_L b_sigma t)^2 / 2)) / 2.
    """
    return 0.5 * (1.0 + np.exp(-0.5 * (2.0 * omega_l * b_sigma * np.asarray(t)) ** 2))


def calibrate_field(target_coherence_time: float, threshold: float = 0.66,
                    omega_l: float = OMEGA_L) -> float:
    """b_sigma for which the overlap envelope crosses ``threshold`` at the
    given time.  Closed form from inverting the Gaussian envelope."""
    if target_coherence_time <= 0:
        raise ValueError("coherence time must be positive")
    if not 0.5 < threshold < 1.0:
        raise ValueError("threshold must lie in (0.5, 1)")
    # envelope = threshold  <=>  exp(-x^2/2) = 2*threshold - 1
    x = math.sqrt(2.0 * math.log(1.0 / (2.0 * threshold - 1.0)))
    return x / (2.0 * omega_l * target_coherence_time)
