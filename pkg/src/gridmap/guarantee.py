"""Numerical certificates for the recovered clustering.

Two kinds of statement are checked against a reference (ideal) Laplacian
built from a known meter-to-transformer assignment:

* an assumption check: the gap delta between the (k+1)-th smallest ideal
  eigenvalue and the k-th smallest eigenvalue of the measured-data
  Laplacian must be positive for the recovery to be trustworthy;
* a subspace perturbation bound: for an orthonormal approximation X~ of
  the ideal invariant subspace, with residual R = L X~ - X~ P (P the
  Rayleigh quotient X~' L X~) and separation s between the Ritz interval
  [min eig P, max eig P] and the rest of the ideal spectrum,

      || tan Theta(X, X~) ||  <=  || R || / s

  in both the 2-norm and the Frobenius norm, where Theta are the canonical
  angles between the approximation and the true subspace. A companion
  check confirms the plain eigengap (distance from the invariant
  eigenvalue to the rest of the spectrum) never falls below s.

When the Ritz interval touches the rest of the spectrum (s <= 0) there is
no guarantee and the bound is left unevaluated rather than reported false.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .graph import SimilarityGraph, ideal_graph, laplacian
from .ingest import GroundTruth
from .spectral import eigendecompose

ORTHO_TOL = 1e-8
COS_FLOOR = 1e-15


@dataclass
class CanonicalAngles:
    cosines: np.ndarray     # ascending-angle order
    sines: np.ndarray
    tangents: np.ndarray    # inf where the angle is (numerically) 90 degrees
    tan_norm_2: float
    tan_norm_fro: float


@dataclass
class GuaranteeReport:
    k: int
    n: int
    ideal_eigenvalues: np.ndarray
    real_eigenvalues: np.ndarray | None = None
    delta: float | None = None                 # ideal-vs-measured gap
    assumption_holds: bool | None = None
    ritz_interval: tuple[float, float] | None = None
    separation: float | None = None
    residual_norm_2: float | None = None
    residual_norm_fro: float | None = None
    galerkin_norm: float | None = None
    tan_norm_2: float | None = None
    tan_norm_fro: float | None = None
    bound_rhs_2: float | None = None
    bound_rhs_fro: float | None = None
    bound_holds_2: bool | None = None
    bound_holds_fro: bool | None = None


def _check_frame(x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < x.shape[1]:
        raise InputError(f"{name} must be a tall N x k matrix")
    gram = x.T @ x
    if np.max(np.abs(gram - np.eye(x.shape[1]))) > ORTHO_TOL:
        raise InputError(f"{name} is not orthonormal (rank-deficient input?)")
    return x


def canonical_angles(x1: np.ndarray, x1_tilde: np.ndarray) -> CanonicalAngles:
    """Principal angles between two orthonormal column spans.

    Cosines are the singular values of x1' x1_tilde in ascending-angle
    order. A right angle yields an infinite tangent (sentinel), never an
    exception.
    """
    x1 = _check_frame(x1, "x1")
    x1_tilde = _check_frame(x1_tilde, "x1_tilde")
    if x1.shape != x1_tilde.shape:
        raise InputError("subspaces must have the same shape")
    overlap = x1.T @ x1_tilde
    cos = np.clip(np.linalg.svd(overlap, compute_uv=False), 0.0, 1.0)
    # sines come from the complement projection, not sqrt(1 - cos^2):
    # the latter floors near-zero angles at sqrt(eps) and would make the
    # bound fail spuriously on an exact invariant subspace
    resid = x1_tilde - x1 @ overlap
    sin = np.clip(np.linalg.svd(resid, compute_uv=False), 0.0, 1.0)[::-1]
    with np.errstate(over="ignore"):
        tan = np.where(cos < COS_FLOOR, np.inf, sin / np.maximum(cos, COS_FLOOR))
    return CanonicalAngles(
        cosines=cos,
        sines=sin,
        tangents=tan,
        tan_norm_2=float(tan.max()),
        tan_norm_fro=float(np.sqrt((tan**2).sum())),
    )


def rayleigh_residual(lap: np.ndarray, x_tilde: np.ndarray):
    """Residual R = L X~ - X~ (X~' L X~) and the Rayleigh quotient itself.

    By construction X~' R = 0 (Galerkin orthogonality) up to roundoff.
    """
    x_tilde = _check_frame(x_tilde, "x_tilde")
    p = x_tilde.T @ lap @ x_tilde
    r = lap @ x_tilde - x_tilde @ p
    return r, p


def _separation(interval: tuple[float, float], spectrum: np.ndarray) -> float:
    a, b = interval
    if spectrum.size == 0:
        raise InputError("complementary spectrum is empty (k = N?)")
    return float(np.min(np.maximum.reduce([a - spectrum, spectrum - b, np.zeros_like(spectrum)])))


def check_assumption(real: SimilarityGraph, truth: GroundTruth, k: int) -> tuple[float, bool]:
    """Gap between the (k+1)-th ideal and k-th measured eigenvalue.

    Positive delta means the measured Laplacian's k-dimensional bottom
    subspace is still separated from where the ideal spectrum continues,
    which is what the perturbation bound needs to say anything.
    """
    l_real = laplacian(real)
    n = l_real.shape[0]
    if not 1 <= k < n:
        raise InputError(f"k must satisfy 1 <= k < N, got k={k}, N={n}")
    ideal_eigs = eigendecompose(laplacian(ideal_graph(truth))).eigenvalues
    real_eigs = eigendecompose(l_real).eigenvalues
    delta = float(ideal_eigs[k] - real_eigs[k - 1])
    return delta, delta > 0.0


def tangent_bound(l_ideal: np.ndarray, x_tilde: np.ndarray, k: int) -> GuaranteeReport:
    """Evaluate the tan-Theta perturbation bound for an approximate subspace.

    The reference subspace is the span of the k smallest-eigenvalue
    eigenvectors of l_ideal. If the Ritz interval of x_tilde overlaps the
    rest of the ideal spectrum, the report says so (separation 0, bound
    fields None) instead of claiming anything.
    """
    dec = eigendecompose(l_ideal)
    n = l_ideal.shape[0]
    if not 1 <= k < n:
        raise InputError(f"k must satisfy 1 <= k < N, got k={k}, N={n}")
    x_tilde = _check_frame(x_tilde, "x_tilde")
    if x_tilde.shape != (n, k):
        raise InputError(f"x_tilde must be {(n, k)}, got {x_tilde.shape}")

    r, p = rayleigh_residual(l_ideal, x_tilde)
    ritz = np.linalg.eigvalsh(0.5 * (p + p.T))
    interval = (float(ritz[0]), float(ritz[-1]))
    sep = _separation(interval, dec.eigenvalues[k:])

    report = GuaranteeReport(
        k=k,
        n=n,
        ideal_eigenvalues=dec.eigenvalues,
        ritz_interval=interval,
        separation=sep,
        residual_norm_2=float(np.linalg.norm(r, 2)),
        residual_norm_fro=float(np.linalg.norm(r)),
        galerkin_norm=float(np.max(np.abs(x_tilde.T @ r))),
    )
    if sep <= 0.0:
        return report  # no guarantee: interval touches the complementary spectrum

    angles = canonical_angles(dec.eigenvectors[:, :k], x_tilde)
    report.tan_norm_2 = angles.tan_norm_2
    report.tan_norm_fro = angles.tan_norm_fro
    report.bound_rhs_2 = report.residual_norm_2 / sep
    report.bound_rhs_fro = report.residual_norm_fro / sep
    report.bound_holds_2 = report.tan_norm_2 <= report.bound_rhs_2 + 1e-12
    report.bound_holds_fro = report.tan_norm_fro <= report.bound_rhs_fro + 1e-12
    return report


def eigengap_and_separation(
    l_ideal: np.ndarray, x_tilde: np.ndarray, k: int
) -> tuple[float, float]:
    """(distance from the invariant eigenvalue to the rest of the ideal
    spectrum, separation of the Ritz interval from that spectrum).

    Requires the bottom k ideal eigenvalues to be (numerically) one
    repeated eigenvalue, and a positive separation; otherwise the
    comparison is inapplicable and an error is raised.
    """
    dec = eigendecompose(l_ideal)
    w = dec.eigenvalues
    if not 1 <= k < w.size:
        raise InputError(f"k must satisfy 1 <= k < N, got k={k}, N={w.size}")
    lam = float(w[:k].mean())
    if np.max(np.abs(w[:k] - lam)) > 1e-8 * max(1.0, abs(w).max()):
        raise InputError("bottom k eigenvalues are not a single repeated eigenvalue")

    r, p = rayleigh_residual(l_ideal, x_tilde)
    ritz = np.linalg.eigvalsh(0.5 * (p + p.T))
    sep = _separation((float(ritz[0]), float(ritz[-1])), w[k:])
    if sep <= 0.0:
        raise InputError("Ritz interval touches the complementary spectrum; no comparison")
    gap = float(np.min(np.abs(w[k:] - lam)))
    return gap, sep


def verify_eigengap_dominance(l_ideal: np.ndarray, x_tilde: np.ndarray, k: int) -> bool:
    """True when the plain eigengap is at least the Ritz separation.

    The separation degrades with the quality of x_tilde (by 1/cos^2 of the
    largest canonical angle), so the raw eigengap always dominates it; this
    confirms that numerically, with 1e-8 slack.
    """
    gap, sep = eigengap_and_separation(l_ideal, x_tilde, k)
    return gap >= sep - 1e-8


def certify(real: SimilarityGraph, truth: GroundTruth, k: int) -> GuaranteeReport:
    """Full report: assumption gap plus the perturbation bound, one call.

    The approximate subspace is the k-dimensional bottom eigenspace of the
    measured-data Laplacian, compared against the ideal Laplacian built
    from the reference assignment.
    """
    l_real = laplacian(real)
    n = l_real.shape[0]
    if not 1 <= k < n:
        raise InputError(f"k must satisfy 1 <= k < N, got k={k}, N={n}")
    dec_real = eigendecompose(l_real)
    l_ideal = laplacian(ideal_graph(truth))

    report = tangent_bound(l_ideal, dec_real.eigenvectors[:, :k], k)
    report.real_eigenvalues = dec_real.eigenvalues
    report.delta = float(report.ideal_eigenvalues[k] - dec_real.eigenvalues[k - 1])
    report.assumption_holds = report.delta > 0.0
    return report
