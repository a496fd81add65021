"""Pseudo-spectral laboratory for the 3D incompressible Navier-Stokes
equations with horizontal-only viscosity."""

from .grid import Grid
from .field import (
    SpectralField,
    VelocityState,
    leray_project,
    multiply,
    slowly_varying_embed,
    spectral_inject,
    unstretch,
)
from .dyadic import (
    BesovSpec,
    BlockNormCollector,
    CutoffProfile,
    NormTimeSeries,
    besov_norm,
    bony_vertical_decompose,
    chemin_lerner_norm,
    decompose_horizontal,
    decompose_vertical,
    heat_flow_norm,
    horizontal_block,
    horizontal_lowpass,
    vertical_block,
    vertical_lowpass,
)
from .solvers import (
    CFLError,
    SliceEnsemble,
    StepperConfig,
    assemble_uapp,
    compute_forcing_F,
    compute_p0,
    compute_p1,
    reconstruct_wh,
    solve_ns2d_slices,
    solve_nsh,
    solve_transport_w3,
)
from .checkpoint import read_checkpoint, write_checkpoint

__version__ = "0.1.0"
