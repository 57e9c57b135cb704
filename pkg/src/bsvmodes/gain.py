"""Bogolyubov amplification of the Schmidt modes at parametric gain G."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class GainState:
    """Per-mode Bogolyubov coefficients for squeezing r = G sqrt(lambda)."""

    gain: float
    lam: np.ndarray
    cosh_r: np.ndarray
    sinh_r: np.ndarray

    @property
    def r(self) -> np.ndarray:
        return self.gain * np.sqrt(self.lam)

    @property
    def mean_photons(self) -> np.ndarray:
        return self.sinh_r**2

    @property
    def total_photons(self) -> float:
        return float(np.sum(self.mean_photons))

    @property
    def lambda_tilde(self) -> np.ndarray:
        return renormalized_eigenvalues(self.lam, self.gain)


def _weights(modes_or_lam) -> np.ndarray:
    lam = getattr(modes_or_lam, "lam", modes_or_lam)
    return np.asarray(lam, dtype=float)


def bogolyubov(modes, G: float) -> GainState:
    """Output coefficients cosh(G sqrt(lambda)), sinh(G sqrt(lambda)) per mode.

    Args:
        modes: Schmidt modes or a bare array of weights.
        G: parametric gain, G >= 0.
    """
    if G < 0:
        raise ValueError("gain must be non-negative")
    lam = _weights(modes)
    r = G * np.sqrt(lam)
    return GainState(float(G), lam, np.cosh(r), np.sinh(r))


def renormalized_eigenvalues(modes, G: float) -> np.ndarray:
    """High-gain weights sinh^2(G sqrt(lambda)) / sum sinh^2.

    The sums are formed relative to the largest mode, i.e. with
    sinh(r_k)/sinh(r_max), so large G does not overflow; at G = 0 the
    G -> 0 limit lambda / sum(lambda) is returned.
    """
    lam = _weights(modes)
    if G < 0:
        raise ValueError("gain must be non-negative")
    if G == 0.0:
        return lam / lam.sum()
    r = G * np.sqrt(lam)
    r_max = float(r.max())
    if r_max < 1e-4:
        # sinh(x)^2 / G^2 = lambda (1 + x^2/3 + 2 x^4/45); no underflow for tiny G
        x2 = r * r
        w = lam * (1.0 + x2 / 3.0 + 2.0 * x2 * x2 / 45.0)
    else:
        # sinh(r) / sinh(r_max) = exp(r - r_max) (1 - exp(-2r)) / (1 - exp(-2 r_max))
        w = (np.exp(r - r_max) * (-np.expm1(-2.0 * r)) / (-np.expm1(-2.0 * r_max))) ** 2
    return w / w.sum()


def schmidt_number(weights) -> float:
    """Effective mode number 1 / sum(w^2) of normalised weights."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise ValueError("empty weight list")
    return float(1.0 / np.sum(w * w))


@dataclass(frozen=True)
class GainScanRow:
    G: float
    K: float
    total_photons: float


def gain_scan(modes, G_list) -> list[GainScanRow]:
    """Schmidt number and total photon number at each gain in ``G_list``."""
    G_list = [float(g) for g in G_list]
    if not G_list:
        raise ValueError("empty gain list")
    if any(g < 0 for g in G_list):
        raise ValueError("gain must be non-negative")
    rows = []
    for G in G_list:
        state = bogolyubov(modes, G)
        rows.append(GainScanRow(G, schmidt_number(renormalized_eigenvalues(modes, G)), state.total_photons))
    return rows


def write_gain_scan(rows, path: str | Path, header: list[str] | None = None, extra=None) -> None:
    """CSV with columns G, K, [extra columns], total_photons."""
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        for line in header or []:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["G", "K", *extra.keys(), "total_photons"])
        for i, row in enumerate(rows):
            w.writerow([f"{row.G:.10g}", f"{row.K:.12e}", *(f"{v[i]:.12e}" for v in extra.values()),
                        f"{row.total_photons:.12e}"])
