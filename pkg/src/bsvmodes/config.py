"""Physical scenario: pump beam, crystal/gap stack, gain and radial grid.

Internal units are micrometres for lengths and rad/um for transverse
wavenumbers. Configuration documents use the laboratory units named in their
keys (``wavelength_nm``, ``fwhm_um``, ``length_mm``, ``walkoff_mrad``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import tomli

DEFAULT_N_POINTS = 256
DEFAULT_N_MAX = 32
# sinc argument L q^2 / (4 k_p) reached at q_max for the shortest crystal
SINC_ARGUMENT_AT_QMAX = 4 * math.pi


class ConfigError(ValueError):
    """Invalid scenario description; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class PumpBeam:
    """Gaussian pump beam.

    Attributes:
        wavelength: vacuum wavelength in um.
        fwhm_intensity: FWHM of the transverse intensity profile in um.
        refractive_index: index used for the pump wavenumber.
    """

    wavelength: float
    fwhm_intensity: float
    refractive_index: float = 1.0

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ConfigError("pump.wavelength_nm", "must be positive")
        if not self.fwhm_intensity > 0:
            raise ConfigError("pump.fwhm_um", "must be positive")
        if not self.refractive_index > 0:
            raise ConfigError("pump.refractive_index", "must be positive")

    @property
    def sigma(self) -> float:
        """Gaussian width entering exp(-sigma^2 Q^2 / 2), in um."""
        return self.fwhm_intensity / (2.0 * math.sqrt(math.log(2.0)))

    @property
    def k_p(self) -> float:
        return 2.0 * math.pi * self.refractive_index / self.wavelength


@dataclass(frozen=True)
class Segment:
    """One slab of the propagation stack.

    ``walkoff_angle`` is in radians; its sign encodes the tilt of the optic
    axis in the principal (x) plane. ``refractive_index`` of None means the
    pump index is used.
    """

    kind: str
    length: float
    walkoff_angle: float = 0.0
    refractive_index: float | None = None

    def __post_init__(self):
        if self.kind not in ("crystal", "gap"):
            raise ConfigError("segment.kind", f"unknown kind {self.kind!r}")
        if not self.length > 0:
            raise ConfigError("segment.length_mm", "must be positive")
        if self.kind == "gap" and self.walkoff_angle != 0.0:
            raise ConfigError("segment.walkoff_mrad", "gap cannot have walk-off")

    @property
    def is_nonlinear(self) -> bool:
        return self.kind == "crystal"


@dataclass(frozen=True)
class RadialGrid:
    """Gauss-Legendre discretisation of (0, q_max] plus the harmonic cutoff."""

    nodes: np.ndarray
    weights: np.ndarray
    q_max: float
    n_harmonics: int

    @property
    def n_points(self) -> int:
        return len(self.nodes)

    @property
    def harmonics(self) -> np.ndarray:
        return np.arange(-self.n_harmonics, self.n_harmonics + 1)

    @classmethod
    def gauss_legendre(cls, q_max: float, n_points: int, n_harmonics: int) -> "RadialGrid":
        if n_points < 1:
            raise ConfigError("grid.n_points", "must be at least 1")
        if n_harmonics < 0:
            raise ConfigError("grid.n_max", "must be non-negative")
        if not q_max > 0:
            raise ConfigError("grid.q_max_override", "must be positive")
        x, w = np.polynomial.legendre.leggauss(n_points)
        nodes = 0.5 * q_max * (x + 1.0)
        weights = 0.5 * q_max * w
        nodes.setflags(write=False)
        weights.setflags(write=False)
        return cls(nodes=nodes, weights=weights, q_max=float(q_max), n_harmonics=int(n_harmonics))


@dataclass(frozen=True)
class GridSpec:
    n_points: int = DEFAULT_N_POINTS
    n_max: int = DEFAULT_N_MAX
    q_max_override: float | None = None


@dataclass(frozen=True)
class Setup:
    pump: PumpBeam
    segments: tuple[Segment, ...]
    gain: float = 0.0
    grid: GridSpec = field(default_factory=GridSpec)

    def __post_init__(self):
        if not any(s.is_nonlinear for s in self.segments):
            raise ConfigError("segment", "no nonlinear segment")
        if not self.gain >= 0:
            raise ConfigError("gain", "must be non-negative")

    @property
    def signal_wavenumber(self) -> float:
        # degenerate type-I: omega_s = omega_i = omega_p / 2
        return self.pump.k_p / 2.0

    @property
    def crystals(self) -> list[Segment]:
        return [s for s in self.segments if s.is_nonlinear]

    @property
    def has_walkoff(self) -> bool:
        return any(s.walkoff_angle != 0.0 for s in self.segments)

    def segment_wavenumber(self, segment: Segment) -> float:
        n = segment.refractive_index
        if n is None:
            return self.pump.k_p
        return 2.0 * math.pi * n / self.pump.wavelength

    def with_gain(self, gain: float) -> "Setup":
        return Setup(self.pump, self.segments, gain, self.grid)

    def mirrored(self) -> "Setup":
        """Same stack with every walk-off angle reversed."""
        segs = tuple(
            Segment(s.kind, s.length, -s.walkoff_angle, s.refractive_index) for s in self.segments
        )
        return Setup(self.pump, segs, self.gain, self.grid)


def _require(doc: Mapping[str, Any], key: str, path: str) -> Any:
    if key not in doc:
        raise ConfigError(f"{path}.{key}" if path else key, "missing field")
    return doc[key]


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def build_setup(raw: Mapping[str, Any]) -> Setup:
    """Validate a parsed configuration document and build a :class:`Setup`.

    Args:
        raw: mapping with ``pump``, ``segment`` (list), ``gain`` and
            optionally ``grid`` sections.

    Raises:
        ConfigError: with the dotted path of the first offending field.
    """
    pump_doc = _require(raw, "pump", "")
    wavelength_nm = _number(_require(pump_doc, "wavelength_nm", "pump"), "pump.wavelength_nm")
    fwhm_um = _number(_require(pump_doc, "fwhm_um", "pump"), "pump.fwhm_um")
    n_pump = _number(pump_doc.get("refractive_index", 1.0), "pump.refractive_index")
    pump = PumpBeam(wavelength_nm * 1e-3, fwhm_um, n_pump)

    seg_docs = raw.get("segment", raw.get("segments"))
    if seg_docs is None:
        raise ConfigError("segment", "missing field")
    segments = []
    for i, doc in enumerate(seg_docs):
        path = f"segment[{i}]"
        kind = _require(doc, "kind", path)
        length_mm = _number(_require(doc, "length_mm", path), f"{path}.length_mm")
        walkoff = _number(doc.get("walkoff_mrad", 0.0), f"{path}.walkoff_mrad")
        index = doc.get("refractive_index")
        if index is not None:
            index = _number(index, f"{path}.refractive_index")
        try:
            segments.append(Segment(kind, length_mm * 1e3, walkoff * 1e-3, index))
        except ConfigError as exc:
            field_name = exc.path.split(".", 1)[-1]
            raise ConfigError(f"{path}.{field_name}", str(exc).split(": ", 1)[1]) from None

    gain = _number(_require(raw, "gain", ""), "gain")

    grid_doc = raw.get("grid", {})
    q_override = grid_doc.get("q_max_override")
    grid = GridSpec(
        n_points=int(grid_doc.get("n_points", DEFAULT_N_POINTS)),
        n_max=int(grid_doc.get("n_max", DEFAULT_N_MAX)),
        q_max_override=None if q_override is None else _number(q_override, "grid.q_max_override"),
    )
    if grid.n_points < 1:
        raise ConfigError("grid.n_points", "must be at least 1")
    if grid.n_max < 0:
        raise ConfigError("grid.n_max", "must be non-negative")
    return Setup(pump, tuple(segments), gain, grid)


def load_config(path: str | Path) -> tuple[Setup, dict]:
    """Read a TOML scenario file. Returns the setup and the raw document."""
    with open(path, "rb") as fh:
        raw = tomli.load(fh)
    return build_setup(raw), raw


def default_grid(setup: Setup) -> RadialGrid:
    """Radial grid whose q_max puts the sinc argument at 4*pi for the shortest crystal."""
    spec = setup.grid
    if spec.q_max_override is not None:
        q_max = spec.q_max_override
    else:
        q_max = max(
            math.sqrt(4.0 * SINC_ARGUMENT_AT_QMAX * setup.segment_wavenumber(s) / s.length)
            for s in setup.crystals
        )
    return RadialGrid.gauss_legendre(q_max, spec.n_points, spec.n_max)
