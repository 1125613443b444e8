"""Interferogram fitting and derived source quantities.

Two fit models are supported:

``sinusoid``
    y(d) = c + (A/2) cos(2 pi d / P + phi0), A is the peak-to-trough amplitude.
``classical_pure``
    y(d) = s (1 + cos(2 pi d / P + phi0))^2 / 4.

Fitting is a coarse global search over the period followed by a damped
Gauss-Newton (Levenberg-Marquardt) refinement of every parameter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .counting import SweepResult

MIN_POINTS = 6
MAX_ITER = 200
STEP_TOL = 1e-10

SINUSOID = "sinusoid"
CLASSICAL_PURE = "classical_pure"
FIT_KINDS = (SINUSOID, CLASSICAL_PURE)

CLASSICAL_COMPATIBLE = "classical_compatible"
NONCLASSICAL = "nonclassical"


class FitError(ValueError):
    """Input that cannot be fitted at all (too few points, bad kind)."""


@dataclass
class FitResult:
    kind: str
    params: dict
    param_sigma: dict
    r_squared: float
    n_used: int
    converged: bool
    iterations: int
    span_nm: float
    flags: list = field(default_factory=list)
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.converged

    def model(self, d) -> np.ndarray:
        return evaluate(self.kind, self.params, np.asarray(d, dtype=float))

    def covariance_of(self, a: str, b: str) -> float:
        return self._cov.get((a, b), self._cov.get((b, a), 0.0))

    _cov: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "status": self.status,
            "converged": self.converged,
            "iterations": self.iterations,
            "params": {k: float(v) for k, v in self.params.items()},
            "param_sigma": {k: float(v) for k, v in self.param_sigma.items()},
            "r_squared": None if math.isnan(self.r_squared) else float(self.r_squared),
            "n_used": self.n_used,
            "flags": list(self.flags),
        }


def wrap_phase(phi: float) -> float:
    """Map a phase into (-pi, pi]."""
    w = math.remainder(phi, 2 * math.pi)
    return math.pi if w == -math.pi else w


def evaluate(kind: str, params: dict, d: np.ndarray) -> np.ndarray:
    theta = 2 * np.pi * d / params["period_nm"] + params["phase_rad"]
    if kind == SINUSOID:
        return params["offset"] + 0.5 * params["amplitude"] * np.cos(theta)
    if kind == CLASSICAL_PURE:
        return params["scale"] * (1 + np.cos(theta)) ** 2 / 4
    raise FitError(f"unknown fit kind {kind!r}")


def r_squared(data, fitted) -> float:
    """Coefficient of determination about the data mean; NaN when the data are constant."""
    y = np.asarray(data, dtype=float)
    f = np.asarray(fitted, dtype=float)
    if len(y) < 2:
        raise FitError("r_squared needs at least two points")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - f) ** 2))
    if ss_tot <= 1e-30 * max(1.0, float(np.sum(y * y))):
        return math.nan
    return 1.0 - ss_res / ss_tot


# -- Levenberg-Marquardt ------------------------------------------------------

def _levenberg_marquardt(residual: Callable[[np.ndarray], np.ndarray],
                         jacobian: Callable[[np.ndarray], np.ndarray],
                         p0: np.ndarray, sqrt_w: np.ndarray):
    """Minimize sum(w * residual(p)^2). Returns (p, jac, cost, converged, iterations)."""
    p = np.array(p0, dtype=float)
    r = sqrt_w * residual(p)
    cost = float(r @ r)
    mu = 1e-3
    for it in range(1, MAX_ITER + 1):
        j = sqrt_w[:, None] * jacobian(p)
        jtj = j.T @ j
        g = j.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = 1e-12 * max(1.0, float(diag.max(initial=0.0)))
        if not np.any(g):
            return p, j, cost, True, it
        accepted = False
        while mu < 1e16:
            try:
                step = np.linalg.solve(jtj + mu * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                mu *= 10
                continue
            p_new = p + step
            r_new = sqrt_w * residual(p_new)
            cost_new = float(r_new @ r_new)
            if cost_new <= cost:
                accepted = True
                break
            mu *= 10
        if not accepted:
            # no descent direction left at working precision: a minimum
            return p, j, cost, True, it
        rel_step = np.linalg.norm(step) / (np.linalg.norm(p) + STEP_TOL)
        p, r, cost = p_new, r_new, cost_new
        mu = max(mu / 10, 1e-12)
        if rel_step < STEP_TOL:
            return p, sqrt_w[:, None] * jacobian(p), cost, True, it
    return p, sqrt_w[:, None] * jacobian(p), cost, False, MAX_ITER


# -- period search --------------------------------------------------------------

def frequency_grid() -> np.ndarray:
    """Cycles-per-span values covering periods from span/20 to 2*span."""
    u_min, u_max = 0.5, 20.0
    # fine enough that the phase error at the sweep ends stays under ~0.1 rad
    n = max(200, int(math.ceil((u_max - u_min) / 0.02)))
    return np.linspace(u_min, u_max, n)


def _sinusoid_linear_stage(x: np.ndarray, y: np.ndarray, sqrt_w: np.ndarray, us: np.ndarray):
    """Weighted linear solve for (c, alpha, beta) at every trial frequency; returns the best."""
    theta = 2 * np.pi * np.outer(us, x)
    cols = np.stack([np.ones_like(theta), np.cos(theta), np.sin(theta)], axis=-1)  # (n_u, n, 3)
    cw = cols * sqrt_w[None, :, None]
    yw = y * sqrt_w
    normal = np.einsum("kni,knj->kij", cw, cw)
    rhs = np.einsum("kni,n->ki", cw, yw)
    coefs = np.einsum("kij,kj->ki", np.linalg.pinv(normal), rhs)
    res = yw[None, :] - np.einsum("kni,ki->kn", cw, coefs)
    costs = np.sum(res * res, axis=1)
    k = int(np.argmin(costs))
    return float(costs[k]), float(us[k]), coefs[k]


def _prepare(data, weight: str):
    if isinstance(data, SweepResult):
        mask = data.valid
        x = data.retardation_nm[mask]
        y = data.intensity_norm[mask]
        sig = data.intensity_sigma[mask]
    else:
        x, y, sig = data
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        mask = np.isfinite(y) & np.isfinite(x)
        x, y = x[mask], y[mask]
        sig = None if sig is None else np.asarray(sig, dtype=float)[mask]
    if len(x) < MIN_POINTS:
        raise FitError(f"need at least {MIN_POINTS} valid points, got {len(x)}")
    if weight == "uniform":
        sqrt_w = np.ones_like(y)
    elif weight == "inverse_sigma":
        if sig is None or not np.any(np.isfinite(sig) & (sig > 0)):
            sqrt_w = np.ones_like(y)
        else:
            pos = sig[np.isfinite(sig) & (sig > 0)]
            floor = float(pos.min())
            s = np.where(np.isfinite(sig) & (sig > 0), sig, floor)
            s = np.maximum(s, floor)
            sqrt_w = 1.0 / s
    else:
        raise FitError(f"unknown weighting {weight!r}")
    return x, y, sqrt_w


def fit(data, kind: str = SINUSOID, weight: str = "inverse_sigma") -> FitResult:
    """Fit an interferogram.

    Parameters
    ----------
    data : SweepResult or tuple of arrays
        Either a sweep (missing points are skipped) or ``(d_nm, y, sigma)``;
        sigma may be None for uniform weighting.
    kind : {"sinusoid", "classical_pure"}
    weight : {"inverse_sigma", "uniform"}
        ``inverse_sigma`` weights squared residuals by 1/sigma^2.

    Returns
    -------
    FitResult
        `converged` is False when refinement hit the iteration limit; the
        result is then flagged and must not be silently trusted.

    Raises
    ------
    FitError
        Fewer than six usable points or an unknown kind/weighting.
    """
    if kind not in FIT_KINDS:
        raise FitError(f"unknown fit kind {kind!r}")
    x, y, sqrt_w = _prepare(data, weight)
    x0 = float(x.min())
    span = float(x.max() - x0)
    if span <= 0:
        raise FitError("retardation span is zero")
    # work in t in [0, 1] and frequency u = cycles per span for conditioning
    t = (x - x0) / span
    us = frequency_grid()
    if kind == SINUSOID:
        result = _fit_sinusoid(t, y, sqrt_w, us)
    else:
        result = _fit_classical(t, y, sqrt_w, us)
    p_int, jac, cost, converged, iters = result
    return _package(kind, p_int, jac, cost, converged, iters, x, y, x0, span)


def _fit_sinusoid(t, y, sqrt_w, us):
    _, u0, (c0, a0, b0) = _sinusoid_linear_stage(t, y, sqrt_w, us)

    def residual(p):
        c, a, b, u = p
        th = 2 * np.pi * u * t
        return c + a * np.cos(th) + b * np.sin(th) - y

    def jacobian(p):
        c, a, b, u = p
        th = 2 * np.pi * u * t
        cs, sn = np.cos(th), np.sin(th)
        du = 2 * np.pi * t * (-a * sn + b * cs)
        return np.column_stack([np.ones_like(t), cs, sn, du])

    return _levenberg_marquardt(residual, jacobian, np.array([c0, a0, b0, u0]), sqrt_w)


def _fit_classical(t, y, sqrt_w, us):
    phases = np.linspace(-np.pi, np.pi, 72, endpoint=False)
    yw = y * sqrt_w
    best = None
    for u in us:
        th = 2 * np.pi * u * t[None, :] + phases[:, None]
        basis = (1 + np.cos(th)) ** 2 / 4 * sqrt_w[None, :]
        denom = np.sum(basis * basis, axis=1)
        s = np.where(denom > 0, basis @ yw / np.where(denom > 0, denom, 1.0), 0.0)
        costs = np.sum((yw[None, :] - s[:, None] * basis) ** 2, axis=1)
        k = int(np.argmin(costs))
        if best is None or costs[k] < best[0]:
            best = (float(costs[k]), s[k], u, phases[k])
    _, s0, u0, ph0 = best

    def residual(p):
        s, u, ph = p
        return s * (1 + np.cos(2 * np.pi * u * t + ph)) ** 2 / 4 - y

    def jacobian(p):
        s, u, ph = p
        th = 2 * np.pi * u * t + ph
        one_c = 1 + np.cos(th)
        d_th = -s * one_c * np.sin(th) / 2
        return np.column_stack([one_c ** 2 / 4, d_th * 2 * np.pi * t, d_th])

    return _levenberg_marquardt(residual, jacobian, np.array([s0, u0, ph0]), sqrt_w)


def _package(kind, p_int, jac, cost, converged, iters, x, y, x0, span) -> FitResult:
    n, k = len(y), len(p_int)
    dof = max(n - k, 1)
    cov_int = np.linalg.pinv(jac.T @ jac) * (cost / dof)
    if kind == SINUSOID:
        c, a, b, u = p_int
        amp = 2 * math.hypot(a, b)
        period = span / u
        # model in absolute d: cos(2 pi (d - x0) u/span + psi) with psi = atan2(-b, a)
        psi = math.atan2(-b, a)
        phase = psi - 2 * math.pi * x0 / period
        params = {"offset": c, "amplitude": amp, "period_nm": period, "phase_rad": wrap_phase(phase)}
        names = ["offset", "amplitude", "period_nm", "phase_rad"]
        r2 = a * a + b * b
        jt = np.zeros((4, 4))
        jt[0, 0] = 1.0
        if r2 > 0:
            rr = math.sqrt(r2)
            jt[1, 1], jt[1, 2] = 2 * a / rr, 2 * b / rr
            jt[3, 1], jt[3, 2] = b / r2, -a / r2
        jt[2, 3] = -span / u ** 2
        jt[3, 3] = -2 * math.pi * x0 / span
    else:
        s, u, ph = p_int
        period = span / u
        phase = ph - 2 * math.pi * x0 / period
        params = {"scale": s, "period_nm": period, "phase_rad": wrap_phase(phase)}
        names = ["scale", "period_nm", "phase_rad"]
        jt = np.zeros((3, 3))
        jt[0, 0] = 1.0
        jt[1, 1] = -span / u ** 2
        jt[2, 1] = -2 * math.pi * x0 / span
        jt[2, 2] = 1.0
    cov = jt @ cov_int @ jt.T
    sig = {nm: float(math.sqrt(max(cov[i, i], 0.0))) for i, nm in enumerate(names)}
    cov_map = {(names[i], names[j]): float(cov[i, j]) for i in range(len(names)) for j in range(len(names))}
    fitted = evaluate(kind, params, x)
    r2v = r_squared(y, fitted)
    flags = []
    if math.isnan(r2v):
        flags.append("degenerate")
    elif r2v < 0:
        flags.append("worse_than_mean")
    if not converged:
        flags.append("did_not_converge")
    status = "ok" if converged else "failed"
    return FitResult(kind=kind, params=params, param_sigma=sig, r_squared=r2v, n_used=n,
                     converged=converged, iterations=iters, span_nm=span, flags=flags,
                     status=status, _cov=cov_map)


# -- derived quantities -------------------------------------------------------

def _require_ok(fit_result: FitResult, kind: Optional[str] = None) -> None:
    if not fit_result.converged:
        raise FitError("fit did not converge")
    if kind is not None and fit_result.kind != kind:
        raise FitError(f"expected a {kind} fit, got {fit_result.kind}")


def de_broglie_wavelength(fit_result: FitResult) -> float:
    """Fringe period in retardation units, i.e. the de Broglie wavelength in nm."""
    _require_ok(fit_result, SINUSOID)
    return float(fit_result.params["period_nm"])


def phase_offset_lambda(fit_result: FitResult, lambda_bar_nm: float) -> tuple[float, float]:
    """Retardation shift of the fringe pattern in units of the mean wavelength.

    offset = phi0 * P / (2 pi lambda_bar). Returns (offset, sigma) with the
    sigma propagated from the fitted phase and period including their
    covariance.
    """
    _require_ok(fit_result, SINUSOID)
    phi0 = fit_result.params["phase_rad"]
    period = fit_result.params["period_nm"]
    scale = 2 * math.pi * lambda_bar_nm
    offset = phi0 * period / scale
    g_phi, g_p = period / scale, phi0 / scale
    var = (g_phi ** 2 * fit_result.param_sigma["phase_rad"] ** 2
           + g_p ** 2 * fit_result.param_sigma["period_nm"] ** 2
           + 2 * g_phi * g_p * fit_result.covariance_of("phase_rad", "period_nm"))
    return offset, math.sqrt(max(var, 0.0))


def fringe_amplitude(fit_result: FitResult) -> float:
    """Peak-to-trough swing of the fitted normalized intensity."""
    _require_ok(fit_result)
    if fit_result.kind == SINUSOID:
        return float(fit_result.params["amplitude"])
    return float(fit_result.params["scale"])


def mixed_amplitude(b: float) -> float:
    """Fringe amplitude of the HH/VV classical mixture diluted by background b."""
    return (1.0 - b) / 2.0


def background_from_mixed_amplitude(a_mixed: float) -> float:
    if a_mixed < 0 or a_mixed > 0.5:
        raise ValueError(f"classical-mixture amplitude must lie in [0, 0.5], got {a_mixed!r}")
    return 1.0 - 2.0 * a_mixed


def entanglement_bounds(b: float) -> tuple[float, float]:
    """(maximum Bell fidelity, maximum fringe amplitude) allowed by background b."""
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"background fraction must lie in [0, 1], got {b!r}")
    return 1.0 - 3.0 * b / 4.0, 1.0 - b


def classicality_verdict(amplitude: float, sigma_amplitude: float) -> str:
    """Nonclassical only for a two-sigma exceedance of the 0.5 classical bound."""
    return NONCLASSICAL if amplitude - 2.0 * sigma_amplitude > 0.5 else CLASSICAL_COMPATIBLE


def classicality_witness(fit_result: FitResult, lambda_bar_nm: float) -> str:
    """Classify a biphoton sinusoid fit whose period is near lambda_bar/2.

    Raises
    ------
    FitError
        If the fit is not a converged sinusoid, or its period is more than
        10% away from half the mean wavelength (the bound only applies there).
    """
    _require_ok(fit_result, SINUSOID)
    period = fit_result.params["period_nm"]
    half = lambda_bar_nm / 2.0
    if abs(period - half) > 0.1 * half:
        raise FitError(f"witness needs a period near {half:g} nm, fit gave {period:g} nm")
    return classicality_verdict(fit_result.params["amplitude"], fit_result.param_sigma["amplitude"])
