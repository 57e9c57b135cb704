"""Schmidt decomposition of the sampled two-photon amplitude.

Each harmonic chi_n is discretised with Gauss-Legendre weights (Nystrom) and
factorised as M = U diag(s) U^T. Because signal and idler are the same field,
the left and right Schmidt functions coincide and the factorisation is a
Takagi one rather than a plain SVD.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from bsvmodes.config import RadialGrid
from bsvmodes.kernel import JointKernel, TpaKernel

LAMBDA_FLOOR = 1e-15
CUMULATIVE_CUTOFF = 1e-14
SYMMETRY_TOL = 1e-10


class FactorizationError(RuntimeError):
    pass


def takagi(M: np.ndarray, rtol: float = 1e-9, sym_tol: float = SYMMETRY_TOL):
    """Autonne-Takagi factorisation of a complex symmetric matrix.

    Singular vectors from an SVD agree with the Takagi vectors only up to a
    unitary mixing inside each block of (numerically) equal singular values;
    the mixing is removed with the square root of V^H conj(W).

    Args:
        M: square complex symmetric matrix.
        rtol: singular values closer than ``rtol * s_max`` are treated as one block.
        sym_tol: largest tolerated ||M - M^T|| / ||M||.

    Returns:
        tuple[array, array]: (s, U) with s descending and M = U diag(s) U^T.
    """
    M = np.asarray(M, dtype=complex)
    n, k = M.shape
    if n != k:
        raise FactorizationError("matrix must be square")
    scale = np.linalg.norm(M)
    if scale == 0.0:
        return np.zeros(n), np.eye(n, dtype=complex)
    asym = np.linalg.norm(M - M.T) / scale
    if asym > sym_tol:
        raise FactorizationError(f"matrix is not symmetric (relative asymmetry {asym:.2e})")
    M = 0.5 * (M + M.T)
    try:
        V, s, Wh = scipy.linalg.svd(M, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        V, s, Wh = scipy.linalg.svd(M, lapack_driver="gesvd")
    Wc = Wh.T  # conj(W)
    U = np.empty_like(V)
    tol = rtol * s[0]
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and s[stop - 1] - s[stop] <= tol:
            stop += 1
        Vb = V[:, start:stop]
        Z = Vb.conj().T @ Wc[:, start:stop]
        if stop - start == 1:
            U[:, start] = Vb[:, 0] * np.sqrt(Z[0, 0])
        else:
            U[:, start:stop] = Vb @ scipy.linalg.sqrtm(Z)
        start = stop
    return s, U


def nystrom_takagi(kernel: np.ndarray, weights: np.ndarray):
    """Schmidt decomposition of a symmetric kernel sampled on a quadrature rule.

    Returns (lam, u) with lam = s^2 descending and u[:, m] the mode values at
    the nodes, orthonormal under sum_k w_k u_m(x_k) conj(u_m'(x_k)).
    """
    r = np.sqrt(np.asarray(weights, dtype=float))
    s, U = takagi(r[:, None] * kernel * r[None, :])
    return s**2, U / r[:, None]


@dataclass(frozen=True)
class SchmidtModes:
    """Cylindrical Schmidt modes u_mn(q) with weights lambda_mn.

    ``u[k]`` holds mode ``(m[k], n[k])`` at the grid nodes. The 2-D mode
    function is u(q) exp(i n phi) / sqrt(2 pi q). Entries are sorted by
    lambda descending, with (m, n) and (m, -n) adjacent.
    """

    m: np.ndarray
    n: np.ndarray
    lam: np.ndarray
    u: np.ndarray
    grid: RadialGrid
    truncation_loss: float
    kernel: TpaKernel | None = None

    def __len__(self) -> int:
        return len(self.lam)

    @property
    def s(self) -> np.ndarray:
        return np.sqrt(self.lam)

    def index(self, m: int, n: int) -> int:
        hits = np.flatnonzero((self.m == m) & (self.n == n))
        if len(hits) == 0:
            raise KeyError(f"mode (m={m}, n={n}) not present")
        return int(hits[0])

    @property
    def partner(self) -> np.ndarray:
        """Index of the (m, -n) mode each entry is squeezed together with."""
        lookup = {(int(a), int(b)): i for i, (a, b) in enumerate(zip(self.m, self.n))}
        return np.array([lookup[(int(a), -int(b))] for a, b in zip(self.m, self.n)])

    def entries(self):
        for k in range(len(self)):
            yield {"m": int(self.m[k]), "n": int(self.n[k]), "lambda": float(self.lam[k]), "u": self.u[k]}

    def top(self, count: int) -> "SchmidtModes":
        """Keep the ``count`` leading entries; a split (n, -n) pair is kept whole."""
        keep = list(range(min(count, len(self))))
        part = self.partner
        extra = [int(part[k]) for k in keep if int(part[k]) not in keep]
        idx = np.array(sorted(set(keep) | set(extra)))
        lost = self.truncation_loss + float(np.sum(np.delete(self.lam, idx)))
        return SchmidtModes(self.m[idx], self.n[idx], self.lam[idx], self.u[idx], self.grid, lost, self.kernel)

    def radial_amplitude(self, q) -> np.ndarray:
        """u_mn(q) / sqrt(q) at arbitrary radii by Nystrom interpolation.

        Uses the kernel row identity  s f(q) = sum_k w_k q_k 2 pi chi_n(q, q_k) conj(f(q_k)).
        Returns shape (len(q), len(modes)).
        """
        if self.kernel is None:
            raise ValueError("modes carry no kernel; off-grid evaluation unavailable")
        q = np.atleast_1d(np.asarray(q, dtype=float))
        rows = self.kernel.rows(q)
        g = self.grid
        wq = g.weights * g.nodes
        f_nodes = self.u / np.sqrt(g.nodes)[None, :]
        out = np.zeros((len(q), len(self)), dtype=complex)
        for n in np.unique(self.n):
            sel = np.flatnonzero(self.n == n)
            K = 2.0 * math.pi * rows[n + self.kernel.n_max]
            out[:, sel] = (K * wq[None, :]) @ f_nodes[sel].conj().T / self.s[sel][None, :]
        return out

    def field(self, qx, qy) -> np.ndarray:
        """Normalised 2-D mode functions at points (qx, qy); shape (P, K)."""
        qx = np.asarray(qx, dtype=float).ravel()
        qy = np.asarray(qy, dtype=float).ravel()
        q = np.hypot(qx, qy)
        phi = np.arctan2(qy, qx)
        uq, inv = np.unique(q, return_inverse=True)
        f = self.radial_amplitude(uq)[inv]
        return f * np.exp(1j * phi[:, None] * self.n[None, :]) / math.sqrt(2.0 * math.pi)

    def to_csv(self, eigen_path: str | Path, profile_path: str | Path, header: list[str] | None = None,
               max_profiles: int | None = None) -> None:
        """Write the (m, n, lambda) table and the radial profiles of the leading modes."""
        header = header or []
        count = len(self) if max_profiles is None else min(max_profiles, len(self))
        with open(eigen_path, "w", newline="") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "n", "lambda"])
            for a, b, lam in zip(self.m, self.n, self.lam):
                w.writerow([int(a), int(b), f"{lam:.12e}"])
        with open(profile_path, "w", newline="") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            fh.write("# columns: q_rad_per_um then Re/Im of u_mn per mode\n")
            w = csv.writer(fh, lineterminator="\n")
            names = ["q"]
            for a, b in zip(self.m[:count], self.n[:count]):
                names += [f"re_u_{int(a)}_{int(b)}", f"im_u_{int(a)}_{int(b)}"]
            w.writerow(names)
            for j, qj in enumerate(self.grid.nodes):
                row = [f"{qj:.12e}"]
                for k in range(count):
                    row += [f"{self.u[k, j].real:.12e}", f"{self.u[k, j].imag:.12e}"]
                w.writerow(row)


def _truncate(lam: np.ndarray, floor: float, cumulative: float) -> int:
    """Number of leading (descending) weights to keep."""
    keep = int(np.sum(lam >= floor))
    csum = np.cumsum(lam)
    total = float(np.sum(lam))
    reached = np.flatnonzero(csum >= total * (1.0 - cumulative))
    if len(reached):
        keep = min(keep, int(reached[0]) + 1)
    return max(keep, 1)


def radial_schmidt(
    kernel: TpaKernel,
    lambda_floor: float = LAMBDA_FLOOR,
    cumulative_cutoff: float = CUMULATIVE_CUTOFF,
) -> SchmidtModes:
    """Per-harmonic radial Schmidt decomposition with u = v.

    Args:
        kernel: normalised harmonic kernel.
        lambda_floor: drop modes with weight below this.
        cumulative_cutoff: stop once the kept weight reaches 1 - cutoff.

    Raises:
        FactorizationError: a harmonic matrix is not complex symmetric, or
            chi_n and chi_-n differ (walk-off kernels must use joint_schmidt).
    """
    g = kernel.grid
    per_n = {}
    for n in range(0, kernel.n_max + 1):
        Mn = kernel.weighted(n)
        if n > 0:
            diff = np.linalg.norm(Mn - kernel.weighted(-n)) / max(np.linalg.norm(Mn), 1e-300)
            if diff > SYMMETRY_TOL:
                raise FactorizationError(f"harmonics n=+-{n} differ by {diff:.2e}")
        s, U = takagi(Mn)
        per_n[n] = (s**2, U / np.sqrt(g.weights)[:, None])

    # a common threshold over all harmonics keeps truncation loss global
    all_lam = np.concatenate([lam for n, (lam, _) in per_n.items()] + [per_n[n][0] for n in per_n if n > 0])
    order = np.sort(all_lam)[::-1]
    count = _truncate(order, lambda_floor, cumulative_cutoff)
    threshold = order[count - 1]

    ms, ns, lams, us = [], [], [], []
    for n, (lam, u) in per_n.items():
        for m in np.flatnonzero(lam >= threshold):
            for sign in ((1, -1) if n > 0 else (1,)):
                ms.append(m)
                ns.append(sign * n)
                lams.append(lam[m])
                us.append(u[:, m])
    lams = np.array(lams)
    ns = np.array(ns, dtype=int)
    ms = np.array(ms, dtype=int)
    # descending weight; pairs stay adjacent (+n before -n)
    order = np.lexsort((-ns, np.abs(ns), ms, -lams))
    lam_sorted = lams[order]
    loss = max(0.0, float(np.sum(all_lam)) - float(np.sum(lam_sorted)))
    u_arr = np.array(us)[order]
    return SchmidtModes(ms[order], ns[order], lam_sorted, u_arr, g, loss, kernel)


def reconstruct_tpa(modes: SchmidtModes, grid: RadialGrid | None = None) -> TpaKernel:
    """Rebuild chi_n from u (x) u, i.e. with the signal and idler functions equal."""
    grid = grid or modes.grid
    n_max = grid.n_harmonics
    q = grid.nodes
    harm = np.zeros((2 * n_max + 1, len(q), len(q)), dtype=complex)
    f = modes.u / np.sqrt(q)[None, :]
    for k in range(len(modes)):
        n = int(modes.n[k])
        if abs(n) > n_max:
            continue
        harm[n + n_max] += modes.s[k] * np.outer(f[k], f[k])
    harm /= 2.0 * math.pi
    setup = modes.kernel.setup if modes.kernel is not None else None
    c = modes.kernel.norm_constant if modes.kernel is not None else 1.0
    return TpaKernel(grid=grid, harmonics=harm, norm_constant=c, harmonic_loss=0.0, setup=setup)


def kernel_l2_error(a: TpaKernel, b: TpaKernel) -> float:
    """Relative L2 distance between two harmonic kernels on the same grid."""
    r = np.sqrt(a.grid.weights * a.grid.nodes)
    w = r[None, :, None] * r[None, None, :]
    num = np.sum(np.abs((a.harmonics - b.harmonics) * w) ** 2)
    den = np.sum(np.abs(b.harmonics * w) ** 2)
    return float(math.sqrt(num / den))


@dataclass(frozen=True)
class ModeProfile:
    q: np.ndarray
    u: np.ndarray
    n: int
    lam: float


def mode_profile(modes: SchmidtModes, m: int, n: int) -> ModeProfile:
    """Radial profile of mode (m, n); angular dependence is exp(i n phi).

    The profile is rotated so its largest-magnitude sample is real positive.
    This global phase is for display only: the stored Takagi vectors keep
    the phase that makes F = sum sqrt(lambda) u u.
    """
    k = modes.index(m, n)
    u = modes.u[k]
    j = int(np.argmax(np.abs(u)))
    rotated = u * np.exp(-1j * np.angle(u[j]))
    rotated[j] = abs(u[j])
    return ModeProfile(q=modes.grid.nodes, u=rotated, n=n, lam=float(modes.lam[k]))


@dataclass(frozen=True)
class JointModes:
    """Takagi modes of a walk-off kernel over the joint (harmonic, radius) index.

    ``g[k, h, j]`` is the harmonic-``h - n_max`` radial component of mode k at
    node j; the 2-D mode is sum_h g(q) / sqrt(q) exp(i n_h phi) / sqrt(2 pi).
    Each mode is an independent single-mode squeezer, so it is its own partner.
    """

    lam: np.ndarray
    g: np.ndarray
    grid: RadialGrid
    truncation_loss: float
    kernel: JointKernel

    def __len__(self) -> int:
        return len(self.lam)

    @property
    def s(self) -> np.ndarray:
        return np.sqrt(self.lam)

    @property
    def partner(self) -> np.ndarray:
        return np.arange(len(self))

    def top(self, count: int) -> "JointModes":
        count = min(count, len(self))
        lost = self.truncation_loss + float(np.sum(self.lam[count:]))
        return JointModes(self.lam[:count], self.g[:count], self.grid, lost, self.kernel)

    def field(self, qx, qy, chunk: int = 256) -> np.ndarray:
        """2-D mode values at transverse wavevectors; shape (P, K).

        Uses the Nystrom interpolant psi(x) = (1/s) int F(x, y) conj(psi(y)) dy
        with the idler integral on the quadrature grid.
        """
        qx = np.asarray(qx, dtype=float).ravel()
        qy = np.asarray(qy, dtype=float).ravel()
        gr = self.grid
        f = self.g / np.sqrt(gr.nodes)[None, None, :]
        right = (f.conj() * (gr.weights * gr.nodes)[None, None, :]).reshape(len(self), -1).T
        right = right * (math.sqrt(2.0 * math.pi) / self.s)[None, :]
        out = np.empty((len(qx), len(self)), dtype=complex)
        for start in range(0, len(qx), chunk):
            rows = self.kernel.signal_rows(qx[start:start + chunk], qy[start:start + chunk])
            out[start:start + chunk] = rows.reshape(rows.shape[0], -1) @ right
        return out

    def node_field(self, j: int, phi) -> np.ndarray:
        """Mode values at radius node ``j`` from the stored harmonics; shape (len(phi), K)."""
        n_max = (self.g.shape[1] - 1) // 2
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        harm = np.exp(1j * phi[:, None] * np.arange(-n_max, n_max + 1)[None, :])
        f = self.g[:, :, j] / math.sqrt(self.grid.nodes[j])
        return harm @ f.T / math.sqrt(2.0 * math.pi)


def joint_schmidt(
    kernel: JointKernel,
    lambda_floor: float = LAMBDA_FLOOR,
    cumulative_cutoff: float = CUMULATIVE_CUTOFF,
) -> JointModes:
    """Takagi decomposition over the joint (harmonic, radius) index.

    The even and odd parity blocks are factorised separately and merged.
    """
    nq = kernel.grid.n_points
    lams, gs = [], []
    for block, basis in kernel.parity_blocks():
        s, U = takagi(block, sym_tol=1e-8)
        U = U.T.reshape(len(s), basis.shape[0], nq)
        lams.append(s**2)
        gs.append(np.einsum("kaj,ah->khj", U, basis))
    lam = np.concatenate(lams)
    g = np.concatenate(gs)
    order = np.argsort(-lam, kind="stable")
    lam, g = lam[order], g[order]
    count = _truncate(lam, lambda_floor, cumulative_cutoff)
    g = g[:count] / np.sqrt(kernel.grid.weights)[None, None, :]
    loss = max(0.0, float(np.sum(lam)) - float(np.sum(lam[:count])))
    return JointModes(lam[:count], g, kernel.grid, loss, kernel)
