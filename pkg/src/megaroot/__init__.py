"""Find all roots of very large degree polynomials with Newton's method."""

from megaroot.engine import OrbitResult, RunConfig, Status, certificate_radius, newton_step, run_orbit
from megaroot.grid import GridSpec, LaunchPoint, grid_size, launch_point
from megaroot.harness import (
    ExperimentConfig,
    ExperimentReport,
    FamilySpec,
    build_family,
    emit_report,
    preimage_oracle,
    run_experiment,
)
from megaroot.numerics import ScaledComplex
from megaroot.poly import (
    ChebyshevPoly,
    CriticalPointError,
    DensePoly,
    IteratedQuadratic,
    KnownRootsPoly,
    LegendrePoly,
)
from megaroot.roots import MatchReport, RootRecord, RootSet, dedup_radius, match_known

__version__ = "0.1.0"
