"""Landscape thresholds, certificates and solvers for orthogonal group synchronization."""

from .blockmat import BlockSymMatrix, Spectrum, bdg, eigs_sym, partial_trace, projector_perp
from .certificate import CertificateReport, Verdict, build_certificate, landscape_verdict, verify_certificate
from .criticality import dual_certificate_check, riemannian_gradient, second_order_check, uvw_stats
from .instances import (
    SyncInstance,
    critical_twist,
    gen_kuramoto_graph,
    gen_od_gaussian,
    gen_procrustes,
    gen_z2,
    twisted_certificate,
    twisted_state,
)
from .operators import StiefelTuple, TangentTuple, polar_factor, sigma_tau
from .solver import SolveConfig, SolveResult, random_stiefel, recovery_error, solve
from .thresholds import GridSpec, ThresholdResult, alpha_g, alpha_g_tau, alpha_m, g_exact

__version__ = "0.1.0"

__all__ = [
    "BlockSymMatrix",
    "CertificateReport",
    "GridSpec",
    "SolveConfig",
    "SolveResult",
    "Spectrum",
    "StiefelTuple",
    "SyncInstance",
    "TangentTuple",
    "ThresholdResult",
    "Verdict",
    "alpha_g",
    "alpha_g_tau",
    "alpha_m",
    "bdg",
    "build_certificate",
    "critical_twist",
    "dual_certificate_check",
    "eigs_sym",
    "g_exact",
    "gen_kuramoto_graph",
    "gen_od_gaussian",
    "gen_procrustes",
    "gen_z2",
    "landscape_verdict",
    "partial_trace",
    "polar_factor",
    "projector_perp",
    "random_stiefel",
    "recovery_error",
    "riemannian_gradient",
    "second_order_check",
    "sigma_tau",
    "solve",
    "twisted_certificate",
    "twisted_state",
    "uvw_stats",
    "verify_certificate",
]
