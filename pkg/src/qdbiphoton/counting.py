"""Monte Carlo interferogram sweeps with shot noise and retarder jitter.

Random streams
--------------
Every grid point draws from its own ``numpy.random.PCG64`` generator seeded
by ``SeedSequence([seed, stream, point_index])``. Results therefore do not
depend on evaluation order, and each photon channel of a product sweep
(``stream`` 0 for XX, 1 for X) is statistically independent.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .interferometer import (
    DEFAULT_LAMBDA_NM,
    apply_delay,
    coincidence_probs,
    product_biphoton_intensity,
    single_photon_intensity,
)
from .polarization import TwoPhotonDensityMatrix
from .source import SourceModel, emit

RNG_DESCRIPTION = "numpy.random.PCG64 seeded by SeedSequence([seed, stream, point_index])"

CSV_HEADER = ("retardation_nm", "phi_rad", "counts_vv", "counts_vh", "intensity_norm", "intensity_sigma")

DEFAULT_JITTER_LAMBDA = 0.03
DEFAULT_PAIRS_PER_POINT = 1e4
DEFAULT_N_SWEEPS = 4


class SweepFormatError(ValueError):
    """Malformed sweep CSV; ``line`` is the 1-based offending line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class SweepConfig:
    d_start_nm: float = 0.0
    d_end_nm: float = 1350.0
    n_points: int = 80
    pairs_per_point: float = DEFAULT_PAIRS_PER_POINT
    jitter_lambda: float = DEFAULT_JITTER_LAMBDA
    n_sweeps: int = DEFAULT_N_SWEEPS
    seed: int = 0
    lambda_bar_nm: float = DEFAULT_LAMBDA_NM

    def __post_init__(self) -> None:
        if self.n_points < 2:
            raise ValueError(f"n_points must be >= 2, got {self.n_points!r}")
        if not self.pairs_per_point > 0:
            raise ValueError(f"pairs_per_point must be positive, got {self.pairs_per_point!r}")
        if not self.jitter_lambda >= 0:
            raise ValueError(f"jitter_lambda must be non-negative, got {self.jitter_lambda!r}")
        if self.n_sweeps < 1:
            raise ValueError(f"n_sweeps must be >= 1, got {self.n_sweeps!r}")
        if not self.d_end_nm > self.d_start_nm:
            raise ValueError("d_end_nm must exceed d_start_nm")
        if not self.lambda_bar_nm > 0:
            raise ValueError(f"lambda_bar_nm must be positive, got {self.lambda_bar_nm!r}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed!r}")

    def grid(self) -> np.ndarray:
        return np.linspace(self.d_start_nm, self.d_end_nm, self.n_points)


@dataclass
class SweepResult:
    """Column-wise interferogram. Missing intensities are NaN."""

    retardation_nm: np.ndarray
    counts_vv: np.ndarray
    counts_vh: np.ndarray
    intensity_norm: np.ndarray
    intensity_sigma: np.ndarray
    lambda_bar_nm: float = DEFAULT_LAMBDA_NM
    kind: str = "biphoton"
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.retardation_nm = np.asarray(self.retardation_nm, dtype=float)
        self.counts_vv = np.asarray(self.counts_vv, dtype=np.int64)
        self.counts_vh = np.asarray(self.counts_vh, dtype=np.int64)
        self.intensity_norm = np.asarray(self.intensity_norm, dtype=float)
        self.intensity_sigma = np.asarray(self.intensity_sigma, dtype=float)
        n = len(self.retardation_nm)
        for name in ("counts_vv", "counts_vh", "intensity_norm", "intensity_sigma"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has length {len(getattr(self, name))}, expected {n}")
        if np.any(np.diff(self.retardation_nm) <= 0):
            raise ValueError("retardation_nm must be strictly increasing")
        if np.any(self.counts_vv < 0) or np.any(self.counts_vh < 0):
            raise ValueError("counts must be non-negative")

    def __len__(self) -> int:
        return len(self.retardation_nm)

    @property
    def phi_rad(self) -> np.ndarray:
        return 2.0 * np.pi * self.retardation_nm / self.lambda_bar_nm

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.intensity_norm)

    def to_csv(self, path: Union[str, Path, None] = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for d, phi, cvv, cvh, inten, sig in zip(self.retardation_nm, self.phi_rad, self.counts_vv,
                                                self.counts_vh, self.intensity_norm, self.intensity_sigma):
            ok = math.isfinite(inten)
            writer.writerow([
                _fmt(d), _fmt(phi), int(cvv), int(cvh),
                _fmt(inten) if ok else "", _fmt(sig) if ok else "",
            ])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: Union[str, Path], lambda_bar_nm: Optional[float] = None) -> "SweepResult":
        """Parse a sweep CSV file (or CSV text if `source` contains a newline).

        When `lambda_bar_nm` is None it is recovered from the phi_rad column.
        """
        if isinstance(source, Path) or "\n" not in str(source):
            text = Path(source).read_text()
        else:
            text = str(source)
        lines = text.splitlines()
        if not lines:
            raise SweepFormatError("empty file", 1)
        header = tuple(h.strip() for h in lines[0].split(","))
        if header != CSV_HEADER:
            raise SweepFormatError(f"expected header {','.join(CSV_HEADER)}", 1)
        cols: list[list[float]] = [[] for _ in CSV_HEADER]
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            fields = line.split(",")
            if len(fields) != len(CSV_HEADER):
                raise SweepFormatError(f"expected {len(CSV_HEADER)} fields, got {len(fields)}", lineno)
            try:
                d, phi = float(fields[0]), float(fields[1])
                cvv, cvh = int(fields[2]), int(fields[3])
                inten = float(fields[4]) if fields[4].strip() else math.nan
                sig = float(fields[5]) if fields[5].strip() else math.nan
            except ValueError as exc:
                raise SweepFormatError(str(exc), lineno) from None
            if cvv < 0 or cvh < 0:
                raise SweepFormatError("negative count", lineno)
            if cols[0] and d <= cols[0][-1]:
                raise SweepFormatError("retardation_nm not strictly increasing", lineno)
            for col, val in zip(cols, (d, phi, cvv, cvh, inten, sig)):
                col.append(val)
        if not cols[0]:
            raise SweepFormatError("no data rows", 2)
        d_arr, phi_arr = np.array(cols[0]), np.array(cols[1])
        if lambda_bar_nm is None:
            nz = np.abs(phi_arr) > 0
            if not np.any(nz):
                raise SweepFormatError("cannot infer wavelength from phi_rad column", 2)
            lambda_bar_nm = float(np.median(2 * np.pi * d_arr[nz] / phi_arr[nz]))
        return cls(d_arr, np.array(cols[2]), np.array(cols[3]), np.array(cols[4]), np.array(cols[5]),
                   lambda_bar_nm=lambda_bar_nm)


def _fmt(x: float) -> str:
    return repr(float(x))


def _point_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream, index])))


def _jittered(d: float, cfg: SweepConfig, rng: np.random.Generator) -> np.ndarray:
    sigma = cfg.jitter_lambda * cfg.lambda_bar_nm
    if sigma == 0:
        return np.full(cfg.n_sweeps, d)
    return d + rng.normal(0.0, sigma, size=cfg.n_sweeps)


def _binomial_sigma(frac: np.ndarray, total: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.sqrt(frac * (1.0 - frac) / total)


def run_sweep(model: Union[SourceModel, TwoPhotonDensityMatrix], cfg: SweepConfig) -> SweepResult:
    """Simulate a two-channel biphoton interferogram.

    At each grid point and repetition the retardation is jittered, the
    emitted state is propagated through the retarder, and the (V_XX, V_X)
    and (V_XX, H_X) coincidence channels are drawn as independent Poisson
    counts. Counts are summed over repetitions; points with no counts get a
    missing intensity.
    """
    rho = emit(model) if isinstance(model, SourceModel) else model
    grid = cfg.grid()
    cvv = np.zeros(len(grid), dtype=np.int64)
    cvh = np.zeros(len(grid), dtype=np.int64)
    for i, d in enumerate(grid):
        rng = _point_rng(cfg.seed, 0, i)
        ds = _jittered(d, cfg, rng)
        probs = [coincidence_probs(apply_delay(rho, 2 * np.pi * dj / cfg.lambda_bar_nm)) for dj in ds]
        lam_vv = cfg.pairs_per_point * np.clip([p.p_vv for p in probs], 0.0, None)
        lam_vh = cfg.pairs_per_point * np.clip([p.p_vh for p in probs], 0.0, None)
        cvv[i] = rng.poisson(lam_vv).sum()
        cvh[i] = rng.poisson(lam_vh).sum()
    total = (cvv + cvh).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        inten = np.where(total > 0, cvv / total, np.nan)
    sigma = np.where(total > 0, _binomial_sigma(inten, total), np.nan)
    return SweepResult(grid, cvv, cvh, inten, sigma, lambda_bar_nm=cfg.lambda_bar_nm, kind="biphoton",
                       meta={"rng": RNG_DESCRIPTION})


def _singles_counts(cfg: SweepConfig, stream: int) -> np.ndarray:
    grid = cfg.grid()
    counts = np.zeros(len(grid), dtype=np.int64)
    for i, d in enumerate(grid):
        rng = _point_rng(cfg.seed, stream, i)
        ds = _jittered(d, cfg, rng)
        rate = cfg.pairs_per_point * single_photon_intensity(2 * np.pi * ds / cfg.lambda_bar_nm)
        counts[i] = rng.poisson(np.clip(rate, 0.0, None)).sum()
    return counts


def _normalize_to_max(counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    peak = counts.max()
    if peak <= 0:
        raise ValueError("all-zero singles sweep cannot be normalized to its maximum")
    return counts / peak, np.sqrt(counts) / peak


def run_single_photon_sweep(cfg: SweepConfig) -> SweepResult:
    """Singles interferogram of a V-polarized photon, normalized to the sweep maximum.

    The ``counts_vv`` column holds the singles counts; ``counts_vh`` is zero.
    """
    counts = _singles_counts(cfg, stream=0)
    inten, sigma = _normalize_to_max(counts)
    return SweepResult(cfg.grid(), counts, np.zeros_like(counts), inten, sigma,
                       lambda_bar_nm=cfg.lambda_bar_nm, kind="single_photon", meta={"rng": RNG_DESCRIPTION})


def run_product_sweep(cfg: SweepConfig) -> SweepResult:
    """Pure-classical |V_XX V_X> interferogram as a product of two singles sweeps.

    XX and X singles are simulated independently, each normalized to its own
    maximum, and multiplied. ``counts_vv`` holds the XX singles and
    ``counts_vh`` the X singles.
    """
    c_xx = _singles_counts(cfg, stream=0)
    c_x = _singles_counts(cfg, stream=1)
    i_xx, s_xx = _normalize_to_max(c_xx)
    i_x, s_x = _normalize_to_max(c_x)
    inten = i_xx * i_x
    sigma = np.sqrt((s_xx * i_x) ** 2 + (s_x * i_xx) ** 2)
    return SweepResult(cfg.grid(), c_xx, c_x, inten, sigma, lambda_bar_nm=cfg.lambda_bar_nm,
                       kind="pure_classical_product", meta={"rng": RNG_DESCRIPTION})


def expected_product_curve(d_nm, lambda_bar_nm: float = DEFAULT_LAMBDA_NM):
    return product_biphoton_intensity(2 * np.pi * np.asarray(d_nm) / lambda_bar_nm)
