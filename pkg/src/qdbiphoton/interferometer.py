"""Collinear polarization interferometer and rectilinear detection.

The liquid-crystal retarder delays A-polarized light by phase ``phi``
relative to D-polarized light. Both photons of a pair pass the same
retarder, so the two-photon operator is U(phi) (x) U(phi).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .polarization import TwoPhotonDensityMatrix, basis_rotation

DEFAULT_LAMBDA_NM = 885.0

PROB_TOL = 1e-10


class UndefinedIntensityError(ValueError):
    """Normalized intensity requested where the measured channels are empty."""


@dataclass(frozen=True)
class PhaseDelaySetting:
    retardation_nm: float
    lambda_bar_nm: float = DEFAULT_LAMBDA_NM

    def __post_init__(self) -> None:
        if not self.lambda_bar_nm > 0:
            raise ValueError(f"lambda_bar_nm must be positive, got {self.lambda_bar_nm!r}")

    def phi(self) -> float:
        return 2.0 * math.pi * self.retardation_nm / self.lambda_bar_nm


@dataclass(frozen=True)
class CoincidenceProbabilities:
    """Rectilinear two-photon detection probabilities; first index is XX."""

    p_vv: float
    p_vh: float
    p_hv: float
    p_hh: float

    def __post_init__(self) -> None:
        vals = (self.p_vv, self.p_vh, self.p_hv, self.p_hh)
        if any(p < -PROB_TOL or p > 1 + PROB_TOL for p in vals):
            raise ValueError(f"probabilities out of [0, 1]: {vals}")
        if abs(sum(vals) - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {sum(vals)!r}")


def delay_operator(phi: float) -> np.ndarray:
    """Single-photon retarder in the rectilinear basis, R^dag diag(1, e^{i phi}) R."""
    r = basis_rotation("diagonal")
    return r.conj().T @ np.diag([1.0, np.exp(1j * phi)]) @ r


def _as_phase(delay: Union[PhaseDelaySetting, float]) -> float:
    if isinstance(delay, PhaseDelaySetting):
        return delay.phi()
    return float(delay)


def apply_delay(rho: TwoPhotonDensityMatrix,
                delay: Union[PhaseDelaySetting, float]) -> TwoPhotonDensityMatrix:
    """Propagate a pair through the retarder; `delay` is a setting or a phase in radians."""
    u = delay_operator(_as_phase(delay))
    uu = np.kron(u, u)
    out = uu @ rho.elems @ uu.conj().T
    # re-symmetrize so round-off never trips the Hermiticity check
    out = 0.5 * (out + out.conj().T)
    return TwoPhotonDensityMatrix(out)


def coincidence_probs(rho: TwoPhotonDensityMatrix) -> CoincidenceProbabilities:
    diag = np.real(np.diag(rho.elems))
    # basis order HH, HV, VH, VV
    return CoincidenceProbabilities(
        p_vv=float(diag[3]), p_vh=float(diag[2]), p_hv=float(diag[1]), p_hh=float(diag[0]),
    )


def normalized_biphoton_intensity(p: CoincidenceProbabilities, mode: str = "full") -> float:
    """Correlated fraction of coincidences.

    ``full`` uses all four channels, (p_vv + p_hh)/sum. ``unpolarized_approx``
    uses only the two recorded channels with the XX polarizer at V,
    p_vv/(p_vv + p_vh).

    Raises
    ------
    UndefinedIntensityError
        If the denominator is zero (no counts in the used channels).
    """
    if mode == "full":
        num = p.p_vv + p.p_hh
        den = p.p_vv + p.p_vh + p.p_hv + p.p_hh
    elif mode == "unpolarized_approx":
        num = p.p_vv
        den = p.p_vv + p.p_vh
    else:
        raise ValueError(f"unknown intensity mode {mode!r}")
    if den <= 0:
        raise UndefinedIntensityError(f"zero denominator in {mode} normalized intensity")
    return num / den


def single_photon_intensity(phi):
    """|<V|U(phi)|V>|^2 = (1 + cos phi)/2. Accepts scalars or arrays."""
    return 0.5 * (1.0 + np.cos(phi))


def product_biphoton_intensity(phi):
    """Product of the XX and X single-photon fringes, (1 + cos phi)^2 / 4."""
    s = single_photon_intensity(phi)
    return s * s


def biphoton_intensity_curve(rho: TwoPhotonDensityMatrix, phis, mode: str = "unpolarized_approx") -> np.ndarray:
    """Noiseless normalized intensity of `rho` at each phase in `phis`."""
    return np.array([
        normalized_biphoton_intensity(coincidence_probs(apply_delay(rho, float(phi))), mode)
        for phi in np.atleast_1d(phis)
    ])
