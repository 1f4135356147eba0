"""Least-energy nodal solutions of the Henon problem on the unit disc.

-Delta u = |x|^alpha |u|^(p-1) u in the disc, u = 0 on the circle.  The
package computes the asymptotic constants and thresholds, radial two-zone
solutions, n-invariant minimizers on the nodal Nehari set, their Morse
counts and their nodal topology.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"

from .constants import (  # noqa: E402
    AsymptoticConstants,
    ConfigurationError,
    ProblemParams,
    default_constants,
    predict_cases,
    threshold_table,
)
from .mesh import Field, SectorMesh, build_mesh, full_disc_mesh  # noqa: E402
from .nehari import SolveConfig, Solution, minimize, solver_mesh  # noqa: E402
from .nodal import NodalReport, analyze  # noqa: E402
from .radial import RadialProfile, lane_emden_nodal, radial_profile  # noqa: E402
from .spectrum import (  # noqa: E402
    SpectralReport,
    morse_index_full,
    morse_index_symmetric,
    radial_mode_decomposition,
)

__all__ = [
    "AsymptoticConstants", "ConfigurationError", "ProblemParams", "default_constants",
    "predict_cases", "threshold_table", "Field", "SectorMesh", "build_mesh", "full_disc_mesh",
    "SolveConfig", "Solution", "minimize", "solver_mesh", "NodalReport", "analyze",
    "RadialProfile", "lane_emden_nodal", "radial_profile", "SpectralReport",
    "morse_index_full", "morse_index_symmetric", "radial_mode_decomposition",
]
