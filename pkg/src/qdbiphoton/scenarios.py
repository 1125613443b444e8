"""Canonical measurement scenarios, run manifests, and JSON fit reports."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import (
    CLASSICAL_PURE,
    SINUSOID,
    FitError,
    FitResult,
    background_from_mixed_amplitude,
    classicality_witness,
    de_broglie_wavelength,
    entanglement_bounds,
    fit,
    fringe_amplitude,
    phase_offset_lambda,
)
from .counting import (
    RNG_DESCRIPTION,
    SweepConfig,
    SweepResult,
    run_product_sweep,
    run_single_photon_sweep,
    run_sweep,
)
from .source import SourceModel, splitting_to_coherence

SCENARIOS = ("entangled", "mixed_classical", "pure_classical_product", "single_photon")
BIPHOTON_SCENARIOS = ("entangled", "mixed_classical")

# b measured from the mixed-classical fringes
REFERENCE_BACKGROUND = 0.37


def delta_from_lambda(delta_lambda: float) -> float:
    """Source phase (rad) whose biphoton fringe is shifted by `delta_lambda` mean wavelengths."""
    return 4.0 * math.pi * delta_lambda


def delta_to_lambda(delta: float) -> float:
    return delta / (4.0 * math.pi)


@dataclass
class Scenario:
    name: str
    sweep: SweepConfig = field(default_factory=SweepConfig)
    delta_lambda: float = 0.0
    z: Optional[float] = None
    b: float = 0.0
    s_ueV: Optional[float] = None
    tau_ns: Optional[float] = None

    def __post_init__(self) -> None:
        if self.name not in SCENARIOS:
            raise ValueError(f"scenario must be one of {', '.join(SCENARIOS)}; got {self.name!r}")
        if self.s_ueV is not None and self.tau_ns is None and self.z is None:
            raise ValueError("tau_ns is required to turn s_ueV into a coherence z")

    def coherence(self) -> float:
        if self.z is not None:
            return self.z
        if self.s_ueV is not None and self.tau_ns is not None:
            return splitting_to_coherence(self.s_ueV, self.tau_ns)
        return 1.0 if self.name == "entangled" else 0.0

    def source(self) -> SourceModel:
        return SourceModel(delta=delta_from_lambda(self.delta_lambda), z=self.coherence(), b=self.b,
                           s_ueV=self.s_ueV)

    def default_fit_kind(self) -> str:
        return CLASSICAL_PURE if self.name == "pure_classical_product" else SINUSOID


def simulate(scenario: Scenario) -> SweepResult:
    cfg = scenario.sweep
    if scenario.name in BIPHOTON_SCENARIOS:
        return run_sweep(scenario.source(), cfg)
    if scenario.name == "single_photon":
        return run_single_photon_sweep(cfg)
    return run_product_sweep(cfg)


def manifest(scenario: Scenario, outputs: Optional[dict] = None) -> dict:
    """Everything needed to rerun a simulation; no timestamps so runs diff cleanly."""
    doc = {
        "tool": "qdbiphoton",
        "version": __version__,
        "scenario": scenario.name,
        "sweep": asdict(scenario.sweep),
        "seed": scenario.sweep.seed,
        "rng": RNG_DESCRIPTION,
        "numpy_version": np.__version__,
    }
    if scenario.name in BIPHOTON_SCENARIOS:
        src = scenario.source()
        doc["source"] = {
            "delta_lambda": scenario.delta_lambda,
            "delta_rad": src.delta,
            "z": src.z,
            "b": src.b,
            "s_ueV": scenario.s_ueV,
            "tau_ns": scenario.tau_ns,
        }
    if outputs:
        doc["outputs"] = outputs
    return doc


def _nan_to_none(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def build_report(sweep: SweepResult, kind: str = SINUSOID, lambda_bar_nm: Optional[float] = None,
                 weight: str = "inverse_sigma", mixed_reference: Optional[SweepResult] = None) -> dict:
    """Fit `sweep` and collect every derived quantity into a JSON-ready dict.

    With a `mixed_reference` sweep, its sinusoid amplitude sets the background
    fraction and the corresponding fidelity/amplitude bounds.
    """
    lam = sweep.lambda_bar_nm if lambda_bar_nm is None else lambda_bar_nm
    result = fit(sweep, kind, weight)
    report: dict = {"lambda_bar_nm": lam, "weight": weight, "fit": result.to_dict(), "status": result.status}
    if not result.converged:
        return report
    report["period_nm"] = result.params["period_nm"]
    report["period_lambda"] = result.params["period_nm"] / lam
    report["amplitude"] = fringe_amplitude(result)
    report["amplitude_sigma"] = result.param_sigma["amplitude" if kind == SINUSOID else "scale"]
    report["r_squared"] = _nan_to_none(result.r_squared)
    if kind == SINUSOID:
        report["de_broglie_nm"] = de_broglie_wavelength(result)
        offset, offset_sigma = phase_offset_lambda(result, lam)
        report["phase_offset_lambda"] = offset
        report["phase_offset_lambda_sigma"] = offset_sigma
        try:
            report["classicality"] = classicality_witness(result, lam)
        except FitError:
            report["classicality"] = "not_applicable"
    if mixed_reference is not None:
        report.update(_background_section(mixed_reference, weight))
    return report


def _background_section(mixed: SweepResult, weight: str) -> dict:
    ref = fit(mixed, SINUSOID, weight)
    if not ref.converged:
        return {"mixed_reference": {"status": ref.status}}
    a_mixed = fringe_amplitude(ref)
    sigma_a = ref.param_sigma["amplitude"]
    b = background_from_mixed_amplitude(min(a_mixed, 0.5))
    sigma_b = 2.0 * sigma_a
    f_max, a_max = entanglement_bounds(b)
    return {
        "mixed_reference": {"amplitude": a_mixed, "amplitude_sigma": sigma_a, "fit": ref.to_dict()},
        "background_fraction": b,
        "background_fraction_sigma": sigma_b,
        "entanglement_bounds": {
            "fidelity_max": f_max,
            "fidelity_max_sigma": 0.75 * sigma_b,
            "amplitude_max": a_max,
            "amplitude_max_sigma": sigma_b,
        },
    }


def fit_curve_csv(result: FitResult, d_start: float, d_end: float, lambda_bar_nm: float,
                  n: int = 400) -> str:
    d = np.linspace(d_start, d_end, n)
    y = result.model(d)
    lines = ["retardation_nm,phi_rad,intensity_fit"]
    lines += [f"{di!r},{(2 * math.pi * di / lambda_bar_nm)!r},{float(yi)!r}" for di, yi in zip(d.tolist(), y)]
    return "\n".join(lines) + "\n"


def dump_json(doc: dict, path: Optional[Path] = None) -> str:
    text = json.dumps(doc, indent=2, sort_keys=True, default=float) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def reproduce_figures(out_dir: Path, seed: int = 0, pairs_per_point: float = 1e4, b: float = REFERENCE_BACKGROUND,
                      sweep_overrides: Optional[dict] = None) -> dict:
    """Simulate and fit the four canonical scenarios; write plot-ready CSVs.

    Figure 2 pairs the single-photon and entangled sweeps; figure 3 overlays
    the pure-classical product, mixed-classical and entangled sweeps.
    Returns the file manifest that is also written to ``figures.json``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    overrides = dict(sweep_overrides or {})
    overrides.setdefault("pairs_per_point", pairs_per_point)
    files: dict = {}
    sweeps: dict = {}
    for k, name in enumerate(SCENARIOS):
        cfg = SweepConfig(seed=seed + k, **overrides)
        sc = Scenario(name, sweep=cfg, b=b if name in BIPHOTON_SCENARIOS else 0.0)
        sweep = simulate(sc)
        sweeps[name] = sweep
        data_path = out_dir / f"{name}_data.csv"
        sweep.to_csv(data_path)
        result = fit(sweep, sc.default_fit_kind())
        fit_path = out_dir / f"{name}_fit.csv"
        fit_path.write_text(fit_curve_csv(result, cfg.d_start_nm, cfg.d_end_nm, cfg.lambda_bar_nm))
        files[name] = {"data": data_path.name, "fit": fit_path.name, "manifest": f"{name}_manifest.json",
                       "report": f"{name}_report.json"}
        dump_json(manifest(sc, files[name]), out_dir / files[name]["manifest"])
    for name in SCENARIOS:
        kind = CLASSICAL_PURE if name == "pure_classical_product" else SINUSOID
        mixed_ref = sweeps["mixed_classical"] if name == "entangled" else None
        dump_json(build_report(sweeps[name], kind, mixed_reference=mixed_ref), out_dir / files[name]["report"])
    doc = {
        "figure_2": {"single_photon": files["single_photon"], "entangled": files["entangled"]},
        "figure_3": {
            "pure_classical_product": files["pure_classical_product"],
            "mixed_classical": files["mixed_classical"],
            "entangled": files["entangled"],
        },
        "background_fraction": b,
        "seed": seed,
    }
    dump_json(doc, out_dir / "figures.json")
    return doc
