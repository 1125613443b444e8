"""Two-photon emission model of a quantum-dot biexciton cascade.

The dot emits a coherent superposition of the HH and VV decay paths with
interbasis coherence ``z``; the coherent part carries a phase ``delta``
between its DD and AA components. Uncorrelated light is admixed as the
maximally mixed two-photon state with weight ``b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .polarization import (
    SQRT2,
    TwoPhotonDensityMatrix,
    TwoPhotonState,
    density_from_pure,
    maximally_mixed,
    mix,
    tensor,
    A,
    D,
    V,
)

HBAR_EV_S = 6.582e-16


@dataclass(frozen=True)
class SourceModel:
    """Emission parameters.

    Attributes
    ----------
    delta : float
        Phase between the DD and AA components of the coherent part, radians.
    z : float
        Coherence between the HH and VV decay paths, in [0, 1].
    b : float
        Fraction of coincidences from uncorrelated background, in [0, 1].
    s_ueV : float, optional
        Exciton fine-structure splitting in micro-eV. Descriptive only;
        it reaches ``z`` through :func:`splitting_to_coherence`.
    """

    delta: float = 0.0
    z: float = 1.0
    b: float = 0.0
    s_ueV: Optional[float] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.delta):
            raise ValueError(f"delta must be finite, got {self.delta!r}")
        if not 0.0 <= self.z <= 1.0:
            raise ValueError(f"z must lie in [0, 1], got {self.z!r}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must lie in [0, 1], got {self.b!r}")
        if self.s_ueV is not None and self.s_ueV < 0:
            raise ValueError(f"s_ueV must be non-negative, got {self.s_ueV!r}")


def entangled_component(delta: float) -> TwoPhotonState:
    """(|DD> + e^{i delta}|AA>)/sqrt(2); equals Phi+ at delta = 0."""
    amps = (tensor(D, D).amps + np.exp(1j * delta) * tensor(A, A).amps) / SQRT2
    return TwoPhotonState(amps)


def classical_mixture() -> TwoPhotonDensityMatrix:
    """Equal incoherent mixture of |HH> and |VV>."""
    return TwoPhotonDensityMatrix(np.diag([0.5, 0.0, 0.0, 0.5]).astype(complex))


def emit(model: SourceModel) -> TwoPhotonDensityMatrix:
    rho_dot = mix([
        (model.z, density_from_pure(entangled_component(model.delta))),
        (1.0 - model.z, classical_mixture()),
    ])
    return mix([(1.0 - model.b, rho_dot), (model.b, maximally_mixed())])


def pure_classical() -> TwoPhotonState:
    """|V_XX V_X>, the polarizer-selected product state."""
    return tensor(V, V)


def splitting_to_coherence(s_ueV: float, tau_ns: float) -> float:
    """Coherence left by a fine-structure splitting over one exciton lifetime.

    z = 1/sqrt(1 + (S tau / hbar)^2). The lifetime has no default on purpose.
    """
    if s_ueV < 0:
        raise ValueError(f"splitting must be non-negative, got {s_ueV!r} ueV")
    if not tau_ns > 0:
        raise ValueError(f"exciton lifetime must be positive, got {tau_ns!r} ns")
    x = (s_ueV * 1e-6) * (tau_ns * 1e-9) / HBAR_EV_S
    return 1.0 / math.sqrt(1.0 + x * x)
