"""Two-photon amplitude of a crystal/gap stack and its azimuthal harmonics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from bsvmodes.config import RadialGrid, Setup

# |x| below which sin(x)/x is replaced by its Taylor series
SINC_SERIES_THRESHOLD = 1e-8
DEFAULT_HARMONIC_LOSS_TOL = 0.02


class HarmonicTruncationError(RuntimeError):
    def __init__(self, loss: float, tol: float):
        super().__init__(
            f"azimuthal truncation drops {loss:.3e} of the kernel norm (tolerance {tol:.1e});"
            " increase n_max"
        )
        self.loss = loss


def sinc(x):
    """sin(x)/x with the removable singularity handled by series."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SINC_SERIES_THRESHOLD
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)


def pump_envelope(Q, sigma: float):
    """Gaussian pump factor exp(-sigma^2 Q^2 / 2) for |q_s + q_i| = Q."""
    Q = np.asarray(Q, dtype=float)
    return np.exp(-0.5 * sigma**2 * Q * Q)


def tpa_single_crystal(q_s, q_i, setup: Setup, norm_constant: float = 1.0):
    """Two-photon amplitude of one crystal without walk-off.

    ``q_s`` and ``q_i`` are arrays whose last axis holds (qx, qy) in rad/um.
    """
    crystals = setup.crystals
    if len(setup.segments) != 1 or crystals[0].walkoff_angle != 0.0:
        raise ValueError("setup is not a single walk-off-free crystal; use tpa_multi_segment")
    crystal = crystals[0]
    q_s = np.asarray(q_s, dtype=float)
    q_i = np.asarray(q_i, dtype=float)
    s2 = np.sum((q_s + q_i) ** 2, axis=-1)
    d2 = np.sum((q_s - q_i) ** 2, axis=-1)
    arg = crystal.length * d2 / (4.0 * setup.segment_wavenumber(crystal))
    return norm_constant * pump_envelope(np.sqrt(s2), setup.pump.sigma) * sinc(arg) * np.exp(1j * arg)


def _stack_integral(sum_sq, diff_sq, sum_x, setup: Setup):
    """Sum over crystals of exp(i*Theta_j) * L_j sinc(D_j L_j/2) exp(i D_j L_j/2).

    ``sum_sq``, ``diff_sq`` and ``sum_x`` are |q_s+q_i|^2, |q_s-q_i|^2 and
    (q_s+q_i)_x. Gaps add phase only.
    """
    del sum_sq
    total = np.zeros(np.broadcast(diff_sq, sum_x).shape, dtype=complex)
    phase = np.zeros(total.shape)
    for seg in setup.segments:
        mismatch = diff_sq / (2.0 * setup.segment_wavenumber(seg))
        if seg.walkoff_angle != 0.0:
            mismatch = mismatch + seg.walkoff_angle * sum_x
        half = 0.5 * mismatch * seg.length
        if seg.is_nonlinear:
            total += np.exp(1j * (phase + half)) * (seg.length * sinc(half))
        phase = phase + mismatch * seg.length
    return total


def stack_integral(q_s, q_i, setup: Setup):
    """Longitudinal overlap integral of the stack (length units, not normalised)."""
    q_s = np.asarray(q_s, dtype=float)
    q_i = np.asarray(q_i, dtype=float)
    s = q_s + q_i
    d = q_s - q_i
    return _stack_integral(np.sum(s * s, axis=-1), np.sum(d * d, axis=-1), s[..., 0], setup)


def nonlinear_length(setup: Setup) -> float:
    return sum(s.length for s in setup.crystals)


def tpa_multi_segment(q_s, q_i, setup: Setup, norm_constant: float = 1.0):
    """Two-photon amplitude of an arbitrary stack with walk-off and gaps.

    The overlap integral is divided by the total nonlinear length, so a
    single walk-off-free crystal gives exactly :func:`tpa_single_crystal`.
    """
    q_s = np.asarray(q_s, dtype=float)
    q_i = np.asarray(q_i, dtype=float)
    s = q_s + q_i
    s2 = np.sum(s * s, axis=-1)
    stack = stack_integral(q_s, q_i, setup) / nonlinear_length(setup)
    return norm_constant * pump_envelope(np.sqrt(s2), setup.pump.sigma) * stack


def _amplitude_polar(q_s, phi_s, q_i, phi_i, setup: Setup):
    """Unnormalised amplitude on broadcast polar coordinates."""
    cs, ss = np.cos(phi_s), np.sin(phi_s)
    ci, si = np.cos(phi_i), np.sin(phi_i)
    sx = q_s * cs + q_i * ci
    sy = q_s * ss + q_i * si
    dx = q_s * cs - q_i * ci
    dy = q_s * ss - q_i * si
    s2 = sx * sx + sy * sy
    d2 = dx * dx + dy * dy
    env = pump_envelope(np.sqrt(s2), setup.pump.sigma)
    return env * _stack_integral(s2, d2, sx, setup) / nonlinear_length(setup)


def angular_samples(n_max: int) -> int:
    # 4x oversampling of the retained harmonic band
    return max(4 * n_max, 4)


@dataclass(frozen=True)
class TpaKernel:
    """Azimuthal harmonics chi_n(q_s, q_i) of a walk-off-free amplitude.

    ``harmonics[n + n_max]`` holds chi_n sampled on ``grid`` (rows q_s,
    columns q_i). The stored values include ``norm_constant`` and are scaled
    so that the Schmidt weights of ``2*pi*chi_n`` sum to one over the
    retained harmonics, i.e. the integral of |F|^2 over both transverse
    planes is one.
    """

    grid: RadialGrid
    harmonics: np.ndarray
    norm_constant: float
    harmonic_loss: float
    setup: Setup | None = None

    @property
    def n_max(self) -> int:
        return self.grid.n_harmonics

    def chi(self, n: int) -> np.ndarray:
        if abs(n) > self.n_max:
            raise KeyError(f"harmonic {n} not retained (n_max={self.n_max})")
        return self.harmonics[n + self.n_max]

    def weighted(self, n: int) -> np.ndarray:
        """Symmetric Nystrom matrix sqrt(w q) * 2 pi chi_n * sqrt(w q)."""
        r = np.sqrt(self.grid.weights * self.grid.nodes)
        return 2.0 * math.pi * r[:, None] * self.chi(n) * r[None, :]

    def total_weight(self) -> float:
        return float(sum(np.sum(np.abs(self.weighted(n)) ** 2) for n in self.grid.harmonics))

    def rows(self, q) -> np.ndarray:
        """chi_n(q, q_k) for arbitrary radii ``q``; shape (2 n_max + 1, len(q), n_points)."""
        if self.setup is None:
            raise ValueError("kernel has no setup attached; cannot evaluate off-grid rows")
        q = np.atleast_1d(np.asarray(q, dtype=float))
        raw = _harmonic_rows(q, self.grid, self.setup)
        return raw * self.norm_constant


def _harmonic_rows(q_rows, grid: RadialGrid, setup: Setup, chunk: int = 16):
    """Fourier coefficients in (phi_s - phi_i) of the unnormalised amplitude."""
    n_max = grid.n_harmonics
    n_phi = angular_samples(n_max)
    dphi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    keep = np.r_[np.arange(-n_max, 0) % n_phi, np.arange(0, n_max + 1)]
    q_i = grid.nodes
    out = np.empty((2 * n_max + 1, len(q_rows), len(q_i)), dtype=complex)
    for start in range(0, len(q_rows), chunk):
        qs = q_rows[start:start + chunk]
        amp = _amplitude_polar(qs[:, None, None], dphi[None, None, :], q_i[None, :, None], 0.0, setup)
        coeff = np.fft.fft(amp, axis=2) / n_phi
        out[:, start:start + chunk, :] = np.moveaxis(coeff[:, :, keep], 2, 0)
    return out


def _parseval_weight(grid: RadialGrid, setup: Setup, chunk: int = 16) -> float:
    """Angular average of the weighted |F|^2 (all sampled harmonics)."""
    n_phi = angular_samples(grid.n_harmonics)
    dphi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    q, w = grid.nodes, grid.weights
    total = 0.0
    for start in range(0, len(q), chunk):
        qs = q[start:start + chunk]
        amp = _amplitude_polar(qs[:, None, None], dphi[None, None, :], q[None, :, None], 0.0, setup)
        dens = np.mean(np.abs(amp) ** 2, axis=2)
        total += np.sum((w[start:start + chunk] * qs)[:, None] * dens * (w * q)[None, :])
    return 4.0 * math.pi**2 * total


def sample_kernel(
    setup: Setup,
    grid: RadialGrid,
    harmonic_loss_tol: float = DEFAULT_HARMONIC_LOSS_TOL,
) -> TpaKernel:
    """Sample and normalise the azimuthal harmonics of a walk-off-free stack.

    Args:
        setup: scenario; every segment must have zero walk-off.
        grid: radial grid and harmonic cutoff.
        harmonic_loss_tol: largest acceptable fraction of the kernel norm
            carried by harmonics beyond ``grid.n_harmonics``.

    Raises:
        ValueError: the setup has walk-off (use the joint-harmonic solver).
        HarmonicTruncationError: the dropped harmonic weight exceeds the tolerance.
    """
    if setup.has_walkoff:
        raise ValueError("walk-off breaks the (phi_s - phi_i) dependence; use sample_joint_kernel")
    raw = _harmonic_rows(grid.nodes, grid, setup)
    r = np.sqrt(grid.weights * grid.nodes)
    retained = 4.0 * math.pi**2 * float(np.sum(np.abs(raw * r[None, :, None] * r[None, None, :]) ** 2))
    full = _parseval_weight(grid, setup)
    loss = max(0.0, 1.0 - retained / full)
    if loss > harmonic_loss_tol:
        raise HarmonicTruncationError(loss, harmonic_loss_tol)
    c = 1.0 / math.sqrt(retained)
    harmonics = raw * c
    harmonics.setflags(write=False)
    return TpaKernel(grid=grid, harmonics=harmonics, norm_constant=c, harmonic_loss=loss, setup=setup)


@dataclass(frozen=True)
class JointKernel:
    """Double azimuthal expansion used when walk-off is present.

    F = sum_{n,n'} c[n, n'](q_s, q_i) exp(i n phi_s) exp(i n' phi_i), stored as
    ``coeffs[n + n_max, n' + n_max, j, k]``.
    """

    grid: RadialGrid
    coeffs: np.ndarray
    norm_constant: float
    harmonic_loss: float
    setup: Setup

    @property
    def n_max(self) -> int:
        return self.grid.n_harmonics

    def matrix(self) -> np.ndarray:
        """Symmetric Nystrom matrix over the joint (harmonic, radius) index."""
        nh = 2 * self.n_max + 1
        nq = self.grid.n_points
        r = np.sqrt(self.grid.weights * self.grid.nodes)
        m = 2.0 * math.pi * self.coeffs * r[None, None, :, None] * r[None, None, None, :]
        return m.transpose(0, 2, 1, 3).reshape(nh * nq, nh * nq)

    def parity_blocks(self):
        """Even and odd (under phi -> -phi) blocks of :meth:`matrix`.

        The amplitude is unchanged by y -> -y, so c[n, n'] = c[-n, -n'] and the
        matrix splits in the cosine/sine harmonic combinations. Returns a list
        of (block matrix, basis) where basis maps block harmonics back to
        the exp(i n phi) harmonics.
        """
        nq = self.grid.n_points
        r = np.sqrt(self.grid.weights * self.grid.nodes)
        blocks = []
        for basis in parity_bases(self.n_max):
            c = np.einsum("ah,hbjk,cb->ajck", basis, self.coeffs, basis, optimize=True)
            c *= 2.0 * math.pi * r[None, :, None, None] * r[None, None, None, :]
            size = basis.shape[0] * nq
            blocks.append((c.reshape(size, size), basis))
        return blocks

    def signal_rows(self, qx, qy) -> np.ndarray:
        """Idler-angle harmonics of F at signal points; shape (P, 2 n_max + 1, n_points).

        Entry [p, b, j] is (1/2 pi) int F(x_p; q_j, phi) exp(-i n_b phi) dphi,
        with the signal angle kept exact (no harmonic truncation on that side).
        """
        return _signal_rows(qx, qy, self.grid, self.setup) * self.norm_constant


def parity_bases(n_max: int):
    """Real orthogonal maps from exp(i n phi) harmonics to even/odd combinations."""
    nh = 2 * n_max + 1
    even = np.zeros((n_max + 1, nh))
    even[0, n_max] = 1.0
    odd = np.zeros((n_max, nh))
    h = 1.0 / math.sqrt(2.0)
    for n in range(1, n_max + 1):
        even[n, n_max + n] = even[n, n_max - n] = h
        odd[n - 1, n_max + n] = h
        odd[n - 1, n_max - n] = -h
    return [even, odd] if n_max > 0 else [even]


def _signal_rows(qx, qy, grid: RadialGrid, setup: Setup, chunk: int = 64):
    qx = np.atleast_1d(np.asarray(qx, dtype=float))
    qy = np.atleast_1d(np.asarray(qy, dtype=float))
    n_max = grid.n_harmonics
    n_phi = angular_samples(n_max)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    keep = np.r_[np.arange(-n_max, 0) % n_phi, np.arange(0, n_max + 1)]
    q = grid.nodes
    ix = (q[:, None] * np.cos(phi)[None, :])[None]
    iy = (q[:, None] * np.sin(phi)[None, :])[None]
    out = np.empty((len(qx), 2 * n_max + 1, len(q)), dtype=complex)
    for start in range(0, len(qx), chunk):
        sx = qx[start:start + chunk, None, None]
        sy = qy[start:start + chunk, None, None]
        amp = _amplitude_cartesian(sx, sy, ix, iy, setup)
        coeff = np.fft.fft(amp, axis=2) / n_phi
        out[start:start + chunk] = coeff[:, :, keep].transpose(0, 2, 1)
    return out


def _amplitude_cartesian(sx, sy, ix, iy, setup: Setup):
    px, py = sx + ix, sy + iy
    mx, my = sx - ix, sy - iy
    s2 = px * px + py * py
    d2 = mx * mx + my * my
    env = pump_envelope(np.sqrt(s2), setup.pump.sigma)
    return env * _stack_integral(s2, d2, px, setup) / nonlinear_length(setup)


def _joint_rows(q_rows, grid: RadialGrid, setup: Setup, chunk: int = 4):
    n_max = grid.n_harmonics
    n_phi = angular_samples(n_max)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    keep = np.r_[np.arange(-n_max, 0) % n_phi, np.arange(0, n_max + 1)]
    q_i = grid.nodes
    nh = 2 * n_max + 1
    out = np.empty((nh, nh, len(q_rows), len(q_i)), dtype=complex)
    for start in range(0, len(q_rows), chunk):
        qs = q_rows[start:start + chunk]
        amp = _amplitude_polar(
            qs[:, None, None, None], phi[None, None, :, None], q_i[None, :, None, None], phi[None, None, None, :], setup
        )
        coeff = np.fft.fft2(amp, axes=(2, 3)) / n_phi**2
        coeff = coeff[:, :, keep][:, :, :, keep]
        out[:, :, start:start + chunk, :] = coeff.transpose(2, 3, 0, 1)
    return out


def sample_joint_kernel(
    setup: Setup,
    grid: RadialGrid,
    harmonic_loss_tol: float = DEFAULT_HARMONIC_LOSS_TOL,
) -> JointKernel:
    """Sample the amplitude in both azimuthal angles (walk-off path)."""
    raw = _joint_rows(grid.nodes, grid, setup)
    r = np.sqrt(grid.weights * grid.nodes)
    weighted = np.abs(raw * r[None, None, :, None] * r[None, None, None, :]) ** 2
    retained = 4.0 * math.pi**2 * float(np.sum(weighted))
    n_phi = angular_samples(grid.n_harmonics)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    q, w = grid.nodes, grid.weights
    full = 0.0
    for j in range(len(q)):
        amp = _amplitude_polar(q[j], phi[None, :, None], q[:, None, None], phi[None, None, :], setup)
        full += w[j] * q[j] * np.sum((w * q) * np.mean(np.abs(amp) ** 2, axis=(1, 2)))
    full *= 4.0 * math.pi**2
    loss = max(0.0, 1.0 - retained / full)
    if loss > harmonic_loss_tol:
        raise HarmonicTruncationError(loss, harmonic_loss_tol)
    c = 1.0 / math.sqrt(retained)
    coeffs = raw * c
    coeffs.setflags(write=False)
    return JointKernel(grid=grid, coeffs=coeffs, norm_constant=c, harmonic_loss=loss, setup=setup)
