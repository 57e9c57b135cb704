"""Angular photon-number statistics of the amplified Schmidt modes.

The output field is a zero-mean Gaussian state. With a(q) = sum_k psi_k(q) A_k
and A_k -> cosh(r_k) A_k + sinh(r_k) A_partner(k)^dagger, all moments follow
from the normal and anomalous correlators

    C(p, p') = <b_p^dagger b_p'> = sum_k conj(E_pk) E_p'k sinh^2 r_k
    S(p, p') = <b_p b_p'>        = sum_k E_pk E_p'partner(k) sinh r_k cosh r_k

where b_p is the normalised pixel mode (1/sqrt(A_p)) int_p a(q) d^2q and
E_pk = (1/sqrt(A_p)) int_p psi_k. Fourth moments come from Wick's theorem.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from bsvmodes.gain import bogolyubov

DEFAULT_PIXEL_MRAD = 0.04


class PixelError(ValueError):
    pass


@dataclass(frozen=True)
class PixelGrid:
    """Square angular pixels of side ``width`` (mrad) centred at ``centers``.

    ``theta`` is the signed coordinate along a 1-D cut (None for 2-D maps).
    """

    centers: np.ndarray
    width: float
    theta: np.ndarray | None = None
    axis: str | None = None

    def __len__(self) -> int:
        return len(self.centers)

    def index_of(self, theta0: float) -> int:
        if self.theta is None:
            raise PixelError("not a 1-D cut")
        j = int(np.argmin(np.abs(self.theta - theta0)))
        if abs(self.theta[j] - theta0) > 1e-9 * max(1.0, abs(theta0)) + 1e-12:
            raise PixelError(f"theta0={theta0} mrad is not a pixel centre of the cut")
        return j


def cut_pixels(theta_max: float, width: float = DEFAULT_PIXEL_MRAD, axis: str = "y") -> PixelGrid:
    """1-D row of pixels at k*width for |k*width| <= theta_max along ``axis``.

    The default axis y is orthogonal to the principal (walk-off) plane.
    """
    k = int(math.floor(theta_max / width + 1e-9))
    theta = width * np.arange(-k, k + 1)
    centers = np.zeros((len(theta), 2))
    centers[:, 0 if axis == "x" else 1] = theta
    return PixelGrid(centers, width, theta, axis)


def map_pixels(theta_x, theta_y) -> PixelGrid:
    """2-D pixel map on the outer product of two uniform axes (mrad)."""
    theta_x = np.asarray(theta_x, dtype=float)
    theta_y = np.asarray(theta_y, dtype=float)
    width = float(theta_x[1] - theta_x[0]) if len(theta_x) > 1 else DEFAULT_PIXEL_MRAD
    tx, ty = np.meshgrid(theta_x, theta_y, indexing="xy")
    return PixelGrid(np.column_stack([tx.ravel(), ty.ravel()]), width)


def pixel_amplitudes(modes, pixels: PixelGrid, k_signal: float, subpoints: int = 1) -> np.ndarray:
    """E_pk: overlap of mode k with the normalised mode of pixel p.

    ``subpoints`` Gauss-Legendre points per side integrate over the pixel;
    1 is the midpoint rule.
    """
    x, w = np.polynomial.legendre.leggauss(subpoints)
    side = k_signal * pixels.width * 1e-3
    q0 = k_signal * pixels.centers * 1e-3
    total = 0.0
    for a, wa in zip(x, w):
        for b, wb in zip(x, w):
            f = modes.field(q0[:, 0] + 0.5 * side * a, q0[:, 1] + 0.5 * side * b)
            total = total + (0.25 * wa * wb) * f
    # (1/sqrt(A)) * A * mean(psi)
    return side * total


@dataclass
class MomentTables:
    """Pixel-mode correlators of the Gaussian output state.

    Full C and S matrices are formed on first access; single rows are cheap.
    """

    E: np.ndarray
    partner: np.ndarray
    sinh2: np.ndarray
    sinhcosh: np.ndarray
    pixels: PixelGrid | None = None
    _C: np.ndarray | None = field(default=None, repr=False)
    _S: np.ndarray | None = field(default=None, repr=False)

    @property
    def N(self) -> np.ndarray:
        return np.real(np.sum(np.abs(self.E) ** 2 * self.sinh2[None, :], axis=1))

    @property
    def C(self) -> np.ndarray:
        if self._C is None:
            self._C = (self.E.conj() * self.sinh2[None, :]) @ self.E.T
        return self._C

    @property
    def S(self) -> np.ndarray:
        if self._S is None:
            self._S = (self.E * self.sinhcosh[None, :]) @ self.E[:, self.partner].T
        return self._S

    def C_row(self, p: int) -> np.ndarray:
        """C(p, p') for all p'."""
        return self.E @ (self.E[p].conj() * self.sinh2)

    def S_row(self, p: int) -> np.ndarray:
        return self.E[:, self.partner] @ (self.E[p] * self.sinhcosh)

    def covariance_row(self, p: int) -> np.ndarray:
        """Cov(N_p, N_p') for all p', including the shot-noise term at p' = p."""
        row = np.abs(self.C_row(p)) ** 2 + np.abs(self.S_row(p)) ** 2
        row[p] += self.N[p]
        return row

    def variance(self) -> np.ndarray:
        """Var(N_p) = C_pp^2 + C_pp + |S_pp|^2 for every pixel."""
        n = self.N
        s_diag = np.sum(self.E * self.E[:, self.partner] * self.sinhcosh[None, :], axis=1)
        return n * n + n + np.abs(s_diag) ** 2


def moment_tables(E: np.ndarray, partner, r, pixels: PixelGrid | None = None) -> MomentTables:
    """Moment tables for pixel operators b_p = sum_k E_pk A_k (E given directly).

    Args:
        E: (P, K) pixel-mode overlaps.
        partner: index of the mode each mode is squeezed with (itself for
            single-mode squeezers).
        r: squeezing parameter per mode.
    """
    r = np.asarray(r, dtype=float)
    return MomentTables(
        E=np.asarray(E, dtype=complex),
        partner=np.asarray(partner, dtype=int),
        sinh2=np.sinh(r) ** 2,
        sinhcosh=np.sinh(r) * np.cosh(r),
        pixels=pixels,
    )


def correlators(modes, G: float, pixels: PixelGrid, k_signal: float, subpoints: int = 1) -> MomentTables:
    """Pixel correlators C, S for Schmidt modes amplified with gain G."""
    if np.any(np.hypot(*(k_signal * 1e-3 * pixels.centers.T)) > modes.grid.q_max * (1 + 1e-12)):
        raise PixelError("pixel outside the radial grid support")
    state = bogolyubov(modes, G)
    E = pixel_amplitudes(modes, pixels, k_signal, subpoints)
    return moment_tables(E, modes.partner, state.r, pixels)


def covariance(tables: MomentTables, p: int, p2: int) -> float:
    """Cov(N_p, N_p'); the p = p' case is the variance."""
    C = tables.C_row(p)
    S = tables.S_row(p)
    value = abs(C[p2]) ** 2 + abs(S[p2]) ** 2
    if p == p2:
        value += tables.N[p]
    return float(value)


def g2(tables: MomentTables, p: int, p2: int) -> float:
    """<N_p N_p'> / (<N_p><N_p'>); for p = p' this is <N^2>/<N>^2 with the shot-noise term."""
    N = tables.N
    if N[p] <= 0 or N[p2] <= 0:
        raise ValueError("zero mean photon number at a requested pixel")
    return float(1.0 + covariance(tables, p, p2) / (N[p] * N[p2]))


@dataclass(frozen=True)
class AngularSpectrum:
    theta: np.ndarray
    intensity: np.ndarray
    normalization: str = "raw"

    def normalized(self) -> "AngularSpectrum":
        peak = float(np.max(self.intensity))
        scale = 1.0 / peak if peak > 0 else 1.0
        return AngularSpectrum(self.theta, self.intensity * scale, "max1")

    def to_csv(self, path: str | Path, column: str = "intensity", header: list[str] | None = None) -> None:
        write_columns(path, {"theta_mrad": self.theta, column: self.intensity},
                      (header or []) + [f"normalization: {self.normalization}"])


def write_columns(path: str | Path, columns: dict, header: list[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for line in header or []:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(columns))
        for row in zip(*columns.values()):
            w.writerow([f"{v:.12e}" for v in row])


def spectrum_density(modes, G: float, qx, qy) -> np.ndarray:
    """Photon-number density per unit d^2q: sum_k |psi_k(q)|^2 sinh^2 r_k."""
    state = bogolyubov(modes, G)
    f = modes.field(qx, qy)
    return np.abs(f) ** 2 @ state.mean_photons


def mean_photon_spectrum(
    modes, G: float, theta, k_signal: float, normalize: bool = False, axis: str = "y"
) -> AngularSpectrum:
    """Mean photon density along a 1-D angular cut (theta in mrad).

    For cylindrical modes this is sum_mn |u_mn(q)|^2 / (2 pi q) sinh^2(G sqrt(lambda_mn)).
    """
    theta = np.asarray(theta, dtype=float)
    q = k_signal * theta * 1e-3
    zero = np.zeros_like(q)
    qx, qy = (q, zero) if axis == "x" else (zero, q)
    spec = AngularSpectrum(theta, spectrum_density(modes, G, qx, qy))
    return spec.normalized() if normalize else spec


def spectrum_2d(modes, G: float, theta_x, theta_y, k_signal: float, normalize: bool = True):
    """Mean photon density on the (theta_x, theta_y) grid; shape (len(theta_y), len(theta_x))."""
    theta_x = np.asarray(theta_x, dtype=float)
    theta_y = np.asarray(theta_y, dtype=float)
    tx, ty = np.meshgrid(theta_x, theta_y, indexing="xy")
    dens = spectrum_density(modes, G, k_signal * 1e-3 * tx.ravel(), k_signal * 1e-3 * ty.ravel())
    img = dens.reshape(tx.shape)
    if normalize and img.max() > 0:
        img = img / img.max()
    return img


def variance_difference(tables: MomentTables, theta0: float, normalize: bool = True) -> AngularSpectrum:
    """Var(N(theta) - N(theta0)) along the cut, optionally divided by its maximum."""
    if tables.pixels is None:
        raise PixelError("tables carry no pixel geometry")
    p0 = tables.pixels.index_of(theta0)
    var = tables.variance()
    cov = tables.covariance_row(p0)
    curve = var + var[p0] - 2.0 * cov
    curve[p0] = 0.0
    curve = np.maximum(curve, 0.0)
    spec = AngularSpectrum(tables.pixels.theta, curve)
    return spec.normalized() if normalize else spec


def half_max_width(x: np.ndarray, y: np.ndarray, peak: int) -> float:
    """FWHM around ``peak`` by linear interpolation of the half-maximum crossings."""
    half = 0.5 * y[peak]
    j = peak
    while j < len(y) - 1 and y[j + 1] > half:
        j += 1
    i = peak
    while i > 0 and y[i - 1] > half:
        i -= 1
    if i == 0 or j == len(y) - 1:
        raise ValueError("peak does not fall to half maximum inside the window")
    right = x[j] + (x[j + 1] - x[j]) * (y[j] - half) / (y[j] - y[j + 1])
    left = x[i] - (x[i] - x[i - 1]) * (y[i] - half) / (y[i] - y[i - 1])
    return float(right - left)


def covariance_profile(tables: MomentTables, p0: int) -> np.ndarray:
    """Smooth part |C|^2 + |S|^2 of Cov(N(theta), N(theta0)); no shot-noise spike."""
    return np.abs(tables.C_row(p0)) ** 2 + np.abs(tables.S_row(p0)) ** 2


def covariance_fwhm(modes, G: float, k_signal: float, theta_max: float, width: float = DEFAULT_PIXEL_MRAD,
                    theta0: float = 0.0) -> float:
    """FWHM (mrad) of the covariance with the pixel at ``theta0`` along the cut.

    Raises:
        ValueError: the covariance peak spans fewer than two pixels.
    """
    if G <= 0:
        raise ValueError("covariance width needs G > 0")
    pixels = cut_pixels(theta_max, width)
    tables = correlators(modes, G, pixels, k_signal)
    return _profile_fwhm(tables, pixels, theta0)


def _profile_fwhm(tables: MomentTables, pixels: PixelGrid, theta0: float) -> float:
    p0 = pixels.index_of(theta0)
    prof = covariance_profile(tables, p0)
    fw = half_max_width(pixels.theta, prof, int(np.argmax(prof)))
    if fw < 2 * pixels.width:
        raise ValueError(f"covariance FWHM {fw:.3g} mrad is below two pixels; refine the pixel width")
    return fw


def local_maxima(y: np.ndarray) -> np.ndarray:
    """Indices of strict interior local maxima (plateaus count once)."""
    y = np.asarray(y)
    idx = []
    i = 1
    while i < len(y) - 1:
        if y[i] > y[i - 1]:
            j = i
            while j < len(y) - 1 and y[j + 1] == y[i]:
                j += 1
            if j < len(y) - 1 and y[j + 1] < y[i]:
                idx.append(i)
            i = j + 1
        else:
            i += 1
    return np.array(idx, dtype=int)


def local_minima(y: np.ndarray) -> np.ndarray:
    return local_maxima(-np.asarray(y))


def dominant_peak_count(y: np.ndarray, ratio: float = 5.0) -> int:
    """Number of leading local maxima that each exceed ``ratio`` times every other one.

    Returns 0 when no such split exists (e.g. comparable peaks throughout).
    """
    idx = local_maxima(y)
    if len(idx) == 0:
        return 0
    v = np.sort(np.asarray(y)[idx])[::-1]
    for k in range(1, len(v)):
        if v[k - 1] > ratio * v[k]:
            return k
    return len(v)


def fringe_visibility(y: np.ndarray) -> float:
    """Largest secondary fringe depth relative to the main peak.

    For every local maximum other than the global one, the drop to the
    higher of its neighbouring minima is divided by the global maximum.
    """
    y = np.asarray(y, dtype=float)
    top = int(np.argmax(y))
    minima = local_minima(y)
    worst = 0.0
    for i in local_maxima(y):
        if i == top:
            continue
        left = minima[minima < i]
        right = minima[minima > i]
        lo = y[left[-1]] if len(left) else y[0]
        hi = y[right[0]] if len(right) else y[-1]
        worst = max(worst, (y[i] - max(lo, hi)) / y[top])
    return float(worst)
