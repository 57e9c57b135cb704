"""Truncated Fock-space reference for one or two two-mode-squeezed pairs.

The state is written down from the closed-form two-mode squeezed vacuum and
all moments are obtained by applying ladder operators to the dense amplitude
tensor. Nothing here uses Gaussian moment factorisation, so the results are
an independent check of :mod:`bsvmodes.observables`.

Mode ordering: pair j occupies tensor axes 2j and 2j + 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from bsvmodes.observables import covariance, moment_tables

MAX_NORM_DEFICIT = 1e-8
SENSITIVITY_TOL = 1e-7
SENSITIVITY_STEP = 10
MAX_PAIRS = 2
MAX_CUTOFF = 80


class OracleTruncationError(RuntimeError):
    """The Fock cutoff is too small for the requested squeezing."""


@dataclass(frozen=True)
class TruncatedState:
    """Product of two-mode squeezed vacua in a truncated number basis.

    Attributes:
        mode_pairs: number of pairs (1 or 2).
        cutoff: largest photon number kept per mode.
        amplitudes: dense tensor with one axis of length cutoff + 1 per mode.
        squeeze_params: squeezing r of each pair.
        norm_deficit: 1 - ||amplitudes||^2.
    """

    mode_pairs: int
    cutoff: int
    amplitudes: np.ndarray
    squeeze_params: tuple[float, ...]
    norm_deficit: float

    @property
    def n_modes(self) -> int:
        return 2 * self.mode_pairs


def tms_amplitudes(r: float, cutoff: int) -> np.ndarray:
    """c_k = tanh(r)^k / cosh(r) for k = 0..cutoff."""
    k = np.arange(cutoff + 1)
    t = math.tanh(r)
    if t == 0.0:
        return (k == 0).astype(float)
    return np.exp(k * math.log(t)) / math.cosh(r)


def evolve_tms(r: float, cutoff: int) -> TruncatedState:
    """Single pair squeezed to ``r``; the two modes always hold equal photon numbers.

    Raises:
        OracleTruncationError: if more than 1e-8 of the norm lies above ``cutoff``.
    """
    return product_state([r], cutoff)


def product_state(rs, cutoff: int) -> TruncatedState:
    """Independent squeezed pairs with parameters ``rs`` (at most two)."""
    rs = tuple(float(r) for r in rs)
    if not 1 <= len(rs) <= MAX_PAIRS:
        raise ValueError(f"oracle supports 1 to {MAX_PAIRS} pairs, got {len(rs)}")
    if any(r < 0 for r in rs):
        raise ValueError("squeezing must be non-negative")
    if not 0 < cutoff <= MAX_CUTOFF + SENSITIVITY_STEP:
        raise ValueError(f"cutoff must be in 1..{MAX_CUTOFF + SENSITIVITY_STEP}")
    dim = cutoff + 1
    psi = np.ones((), dtype=complex)
    kept = 1.0
    for r in rs:
        c = tms_amplitudes(r, cutoff)
        kept *= float(np.sum(c * c))
        pair = np.zeros((dim, dim))
        pair[np.arange(dim), np.arange(dim)] = c
        psi = np.multiply.outer(psi, pair)
    deficit = max(0.0, 1.0 - kept)
    if deficit > MAX_NORM_DEFICIT:
        raise OracleTruncationError(
            f"norm deficit {deficit:.2e} exceeds {MAX_NORM_DEFICIT:.0e} at cutoff {cutoff}; raise the cutoff"
        )
    return TruncatedState(len(rs), cutoff, psi, rs, deficit)


def _ladder_views(shape, axis: int, lowering: bool):
    """Index slices and sqrt factors so that out[dst] = factor * psi[src]."""
    n = shape[axis]
    src = [slice(None)] * len(shape)
    dst = [slice(None)] * len(shape)
    src[axis], dst[axis] = (slice(1, n), slice(0, n - 1)) if lowering else (slice(0, n - 1), slice(1, n))
    factor_shape = [1] * len(shape)
    factor_shape[axis] = n - 1
    factor = np.sqrt(np.arange(1, n, dtype=float)).reshape(factor_shape)
    return tuple(src), tuple(dst), factor


def _apply_ladder(psi: np.ndarray, coeffs, lowering: bool) -> np.ndarray:
    """sum_k coeffs[k] a_k psi (or a_k^dagger psi); the top Fock level of psi must be empty when raising."""
    out = np.zeros_like(psi)
    for axis, c in enumerate(coeffs):
        if c == 0:
            continue
        src, dst, factor = _ladder_views(psi.shape, axis, lowering)
        out[dst] += (c * factor) * psi[src]
    return out


def _number_state(psi: np.ndarray, row: np.ndarray) -> np.ndarray:
    """N_p psi with b_p = sum_k row[k] a_k."""
    return _apply_ladder(_apply_ladder(psi, row, True), np.conj(row), False)


@dataclass(frozen=True)
class OracleMoments:
    """Photon-number moments of pixel operators b_p = sum_k E[p, k] a_k.

    Attributes:
        N: <N_p>.
        NN: <N_p N_p'> (the diagonal is <N_p^2>).
        cutoff: Fock cutoff used.
        norm_deficit: truncation deficit of the state.
    """

    N: np.ndarray
    NN: np.ndarray
    cutoff: int
    norm_deficit: float

    @property
    def N2(self) -> np.ndarray:
        return np.real(np.diag(self.NN))

    def covariance(self, p: int, p2: int) -> float:
        return float(np.real(self.NN[p, p2]) - self.N[p] * self.N[p2])

    def variance_difference(self, p: int, p2: int) -> float:
        """Var(N_p - N_p')."""
        return self.covariance(p, p) + self.covariance(p2, p2) - 2.0 * self.covariance(p, p2)

    def g2(self, p: int, p2: int) -> float:
        return float(np.real(self.NN[p, p2]) / (self.N[p] * self.N[p2]))

    def table(self) -> dict[str, np.ndarray]:
        P = len(self.N)
        return {
            "N": self.N,
            "N2": self.N2,
            "NN": np.real(self.NN),
            "var_diff": np.array([[self.variance_difference(p, q) for q in range(P)] for p in range(P)]),
            "g2": np.array([[self.g2(p, q) for q in range(P)] for p in range(P)]),
        }


def _moments(state: TruncatedState, E: np.ndarray) -> OracleMoments:
    psi = np.pad(state.amplitudes, [(0, 1)] * state.amplitudes.ndim)
    norm = float(np.vdot(psi, psi).real)
    applied = [_number_state(psi, E[p]) for p in range(E.shape[0])]
    P = E.shape[0]
    N = np.array([np.vdot(psi, v).real for v in applied]) / norm
    NN = np.empty((P, P), dtype=complex)
    for p in range(P):
        for q in range(p, P):
            NN[p, q] = np.vdot(applied[p], applied[q]) / norm
            NN[q, p] = np.conj(NN[p, q])
    return OracleMoments(N, NN, state.cutoff, state.norm_deficit)


def oracle_moments(state: TruncatedState, E, check_truncation: bool = True) -> OracleMoments:
    """Moments of the pixel operators given by the rows of ``E``.

    Args:
        state: truncated product state.
        E: (P, 2 * mode_pairs) coefficients of b_p in the mode operators.
        check_truncation: repeat at cutoff + 10 and fail if any moment moves
            by more than 1e-7 relative.

    Raises:
        OracleTruncationError: if the moments are sensitive to the cutoff.
    """
    E = np.atleast_2d(np.asarray(E, dtype=complex))
    if E.shape[1] != state.n_modes:
        raise ValueError(f"E must have {state.n_modes} columns")
    result = _moments(state, E)
    if check_truncation:
        wider = product_state(state.squeeze_params, state.cutoff + SENSITIVITY_STEP)
        ref = _moments(wider, E)
        shift = max(
            _relative_shift(result.N, ref.N),
            _relative_shift(np.real(result.NN), np.real(ref.NN)),
        )
        if shift > SENSITIVITY_TOL:
            raise OracleTruncationError(
                f"moments move by {shift:.2e} relative when the cutoff grows by {SENSITIVITY_STEP}"
            )
    return result


def _relative_shift(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.maximum(np.abs(b), 1e-300)
    return float(np.max(np.abs(a - b) / scale))


COMPARISON_RTOL = 1e-6
PIXEL_SEED = 20240601


def pixel_sets(n_modes: int) -> dict[str, np.ndarray]:
    """Two pixel choices with orthonormal rows: mode-aligned and a fixed random mixture.

    Rows must be orthonormal so that the pixel operators obey
    [b_p, b_p'^dagger] = delta_pp', as physical non-overlapping pixels do.
    """
    rng = np.random.default_rng(PIXEL_SEED)
    z = rng.normal(size=(n_modes, n_modes)) + 1j * rng.normal(size=(n_modes, n_modes))
    q, _ = np.linalg.qr(z)
    return {"aligned": np.eye(n_modes, dtype=complex), "mixed": q}


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    wick: float
    oracle: float

    @property
    def rel_error(self) -> float:
        scale = max(abs(self.oracle), abs(self.wick))
        if scale < 1e-12:
            return 0.0
        return abs(self.wick - self.oracle) / max(abs(self.oracle), 1e-300)

    @property
    def passed(self) -> bool:
        return self.rel_error <= COMPARISON_RTOL


def compare_with_wick(rs, cutoff: int, E: np.ndarray, label: str = "") -> list[ComparisonRow]:
    """Every second-order photon statistic from both engines for pixels ``E``."""
    state = product_state(rs, cutoff)
    ref = oracle_moments(state, E)
    r = np.repeat(np.asarray(rs, dtype=float), 2)
    partner = np.arange(2 * len(rs)) ^ 1
    tables = moment_tables(E, partner, r)
    N = tables.N
    rows = []
    P = E.shape[0]
    for p in range(P):
        rows.append(ComparisonRow(f"{label}N[{p}]", float(N[p]), float(ref.N[p])))
        rows.append(ComparisonRow(f"{label}VarN[{p}]", covariance(tables, p, p), ref.covariance(p, p)))
    for p in range(P):
        for q in range(p, P):
            if q > p:
                rows.append(ComparisonRow(f"{label}Cov[{p},{q}]", covariance(tables, p, q), ref.covariance(p, q)))
                vd = covariance(tables, p, p) + covariance(tables, q, q) - 2.0 * covariance(tables, p, q)
                rows.append(ComparisonRow(f"{label}VarDiff[{p},{q}]", vd, ref.variance_difference(p, q)))
            if N[p] > 0 and N[q] > 0:
                g2w = 1.0 + covariance(tables, p, q) / (N[p] * N[q])
                rows.append(ComparisonRow(f"{label}g2[{p},{q}]", g2w, ref.g2(p, q)))
    return rows
