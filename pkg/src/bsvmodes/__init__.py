"""Schmidt-mode analysis of bright squeezed vacuum from high-gain PDC."""

from bsvmodes.config import (
    ConfigError,
    PumpBeam,
    RadialGrid,
    Segment,
    Setup,
    build_setup,
    default_grid,
    load_config,
)
from bsvmodes.gain import (
    GainState,
    bogolyubov,
    gain_scan,
    renormalized_eigenvalues,
    schmidt_number,
)
from bsvmodes.kernel import (
    TpaKernel,
    pump_envelope,
    sample_kernel,
    tpa_multi_segment,
    tpa_single_crystal,
)
from bsvmodes.schmidt import SchmidtModes, mode_profile, radial_schmidt, reconstruct_tpa

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "GainState",
    "PumpBeam",
    "RadialGrid",
    "SchmidtModes",
    "Segment",
    "Setup",
    "TpaKernel",
    "bogolyubov",
    "build_setup",
    "default_grid",
    "gain_scan",
    "load_config",
    "mode_profile",
    "pump_envelope",
    "radial_schmidt",
    "reconstruct_tpa",
    "renormalized_eigenvalues",
    "sample_kernel",
    "schmidt_number",
    "tpa_multi_segment",
    "tpa_single_crystal",
]
