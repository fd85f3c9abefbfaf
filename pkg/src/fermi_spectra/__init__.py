"""Algebraic eigenstates of matrix-valued torus symbols.

Band structures, Fermi surfaces, disintegrated fiber measures and the
quadrature eigenstate functional, together with the matrix-algebra state
diagnostics (eigenstate certificates, GNS construction, dynamics).
"""

from .bands import (
    BandStructure,
    FermiMeasure,
    FermiState,
    FermiSurfaceMesh,
    HermitianSymbol,
    TrigPolynomialSymbol,
    check_local_gap,
    constant_symbol,
    extract_fermi_surface,
    fermi_eigenstate,
    fermi_measure,
    fubini_defect,
    random_trig_symbol,
    sample_bands,
    spectrum_union,
)
from .disintegration import (
    FiberMeasure,
    GridFunction1D,
    PushforwardDensity,
    compose_expectations,
    disintegrate_1d,
    expectation_operator,
    pushforward_1d,
    verify_fubini,
)
from .dynamics import (
    DynamicsProbeReport,
    derivation,
    estimate_gap,
    evolve,
    gap_certificate,
    ground_certificate,
    invariance_defect,
)
from .hermitian import (
    EigenDecomposition,
    apply_function,
    eig_hermitian,
    plateau_bump,
    smallest_singular_value,
    spectral_projection,
    trace_norm,
)
from .states import (
    DensityState,
    EigenstateReport,
    GnsRepresentation,
    check_eigenstate,
    check_functional_calculus,
    check_normal_adjoint,
    compress_state,
    eigenvector_state,
    gns,
    independence_gram,
    state_distance,
)

__version__ = "0.1.0"
