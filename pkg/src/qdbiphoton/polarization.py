"""One- and two-photon polarization states and density matrices.

Conventions
-----------
Single-photon amplitudes are stored in the rectilinear basis ordered (H, V).
The diagonal basis is D = (H + V)/sqrt(2), A = (H - V)/sqrt(2).

Two-photon amplitudes are ordered (HH, HV, VH, VV); the first factor is
always the biexciton (XX) photon, the second the exciton (X) photon.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ALGEBRA_TOL = 1e-12
EIGEN_TOL = 1e-10

SQRT2 = np.sqrt(2.0)

# rows: (D, A) amplitudes; columns: (H, V) inputs
_RECT_TO_DIAG = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / SQRT2

BASIS_LABELS = ("HH", "HV", "VH", "VV")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SinglePhotonState:
    """Normalized single-photon polarization ket in the (H, V) basis."""

    amp_h: complex
    amp_v: complex

    def __post_init__(self) -> None:
        norm = abs(self.amp_h) ** 2 + abs(self.amp_v) ** 2
        if abs(norm - 1.0) > ALGEBRA_TOL:
            raise ValueError(f"single-photon state not normalized (norm^2 = {norm!r})")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp_h, self.amp_v], dtype=complex)

    @classmethod
    def from_vector(cls, vec: Sequence[complex]) -> "SinglePhotonState":
        return cls(complex(vec[0]), complex(vec[1]))


H = SinglePhotonState(1.0, 0.0)
V = SinglePhotonState(0.0, 1.0)
D = SinglePhotonState(1 / SQRT2, 1 / SQRT2)
A = SinglePhotonState(1 / SQRT2, -1 / SQRT2)


@dataclass(frozen=True)
class TwoPhotonState:
    """Normalized two-photon ket, amplitudes ordered (HH, HV, VH, VV)."""

    amps: np.ndarray

    def __post_init__(self) -> None:
        amps = _frozen(self.amps).reshape(-1)
        if amps.shape != (4,):
            raise ValueError(f"two-photon state needs 4 amplitudes, got {amps.shape}")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > ALGEBRA_TOL:
            raise ValueError(f"two-photon state not normalized (norm^2 = {norm!r})")
        object.__setattr__(self, "amps", amps)


@dataclass(frozen=True)
class TwoPhotonDensityMatrix:
    """4x4 Hermitian, unit-trace, positive semidefinite operator.

    Validation happens on construction; an instance that exists is valid.
    """

    elems: np.ndarray

    def __post_init__(self) -> None:
        rho = _frozen(self.elems)
        if rho.shape != (4, 4):
            raise ValueError(f"density matrix must be 4x4, got {rho.shape}")
        herm_err = float(np.max(np.abs(rho - rho.conj().T)))
        if herm_err > ALGEBRA_TOL:
            raise ValueError(f"density matrix not Hermitian (max deviation {herm_err:.3e})")
        tr = np.trace(rho)
        if abs(tr - 1.0) > ALGEBRA_TOL:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        min_eig = float(np.min(np.linalg.eigvalsh(rho)))
        if min_eig < -EIGEN_TOL:
            raise ValueError(f"density matrix not positive semidefinite (min eigenvalue {min_eig:.3e})")
        object.__setattr__(self, "elems", rho)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.elems)


def basis_rotation(target_basis: str) -> np.ndarray:
    """2x2 unitary mapping rectilinear amplitudes to `target_basis` amplitudes.

    ``"rectilinear"`` gives the identity; ``"diagonal"`` returns amplitudes
    over (D, A), sending H -> (D + A)/sqrt(2) and V -> (D - A)/sqrt(2).
    """
    if target_basis == "rectilinear":
        return np.eye(2, dtype=complex)
    if target_basis == "diagonal":
        return _RECT_TO_DIAG.copy()
    raise ValueError(f"unknown basis {target_basis!r}; use 'rectilinear' or 'diagonal'")


def tensor(a: SinglePhotonState, b: SinglePhotonState) -> TwoPhotonState:
    """Product state with `a` as the XX photon and `b` as the X photon."""
    return TwoPhotonState(np.kron(a.vector, b.vector))


def bell_state(kind: str) -> TwoPhotonState:
    """Named maximally entangled state.

    ``phi_plus`` is (HH + VV)/sqrt(2), ``psi_plus`` is (HV + VH)/sqrt(2) and
    ``dd_aa`` is (DD + AA)/sqrt(2), built by expansion from the diagonal kets.
    """
    if kind == "phi_plus":
        return TwoPhotonState(np.array([1, 0, 0, 1], dtype=complex) / SQRT2)
    if kind == "psi_plus":
        return TwoPhotonState(np.array([0, 1, 1, 0], dtype=complex) / SQRT2)
    if kind == "dd_aa":
        dd = tensor(D, D).amps
        aa = tensor(A, A).amps
        return TwoPhotonState((dd + aa) / SQRT2)
    raise ValueError(f"unknown Bell state {kind!r}")


def density_from_pure(psi: TwoPhotonState) -> TwoPhotonDensityMatrix:
    return TwoPhotonDensityMatrix(np.outer(psi.amps, psi.amps.conj()))


def mix(components: Iterable[tuple[float, TwoPhotonDensityMatrix]]) -> TwoPhotonDensityMatrix:
    """Convex combination of density matrices.

    Raises
    ------
    ValueError
        If any weight is negative or the weights do not sum to one.
    """
    components = list(components)
    if not components:
        raise ValueError("mix needs at least one component")
    weights = np.array([w for w, _ in components], dtype=float)
    if np.any(weights < 0):
        raise ValueError(f"mixture weights must be non-negative, got {weights.tolist()}")
    if abs(weights.sum() - 1.0) > ALGEBRA_TOL:
        raise ValueError(f"mixture weights sum to {weights.sum()!r}, expected 1")
    total = sum(w * rho.elems for w, rho in components)
    return TwoPhotonDensityMatrix(total)


def maximally_mixed() -> TwoPhotonDensityMatrix:
    return TwoPhotonDensityMatrix(np.eye(4, dtype=complex) / 4)


def fidelity_pure(rho: TwoPhotonDensityMatrix, target: TwoPhotonState) -> float:
    """Overlap <target|rho|target> with a pure target state."""
    val = np.vdot(target.amps, rho.elems @ target.amps)
    if abs(val.imag) > ALGEBRA_TOL:
        raise ArithmeticError(f"fidelity has imaginary part {val.imag:.3e}")
    return float(val.real)


def purity(rho: TwoPhotonDensityMatrix) -> float:
    return float(np.real(np.trace(rho.elems @ rho.elems)))
