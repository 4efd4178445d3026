"""
Dirichlet boundary control of the Laplace equation with energy regularization.

P1 finite elements on simplicial meshes, a Schur-complement PCG solver for the
optimality system, a primal-dual active set method for box constraints on the
control and level sweeps measuring convergence rates.
"""
from .assembly import AssembledProblem, assemble_problem, l2_error
from .harness import (RhoSchedule, StudyTable, eoc, run_constrained_study,
                      run_convergence_study, run_nonharmonic_study)
from .mesh import Mesh, build_mesh, refine_uniform
from .pdas import BoxConstraints, PdasReport, pdas_solve
from .saddle import SaddleSystem, SolveReport, solve_unconstrained, spectral_probe
from .targets import TargetFunction, get_target

__version__ = "0.1.0"

__all__ = [
    "AssembledProblem", "BoxConstraints", "Mesh", "PdasReport", "RhoSchedule",
    "SaddleSystem", "SolveReport", "StudyTable", "TargetFunction", "assemble_problem",
    "build_mesh", "eoc", "get_target", "l2_error", "pdas_solve", "refine_uniform",
    "run_constrained_study", "run_convergence_study", "run_nonharmonic_study",
    "solve_unconstrained", "spectral_probe",
]
