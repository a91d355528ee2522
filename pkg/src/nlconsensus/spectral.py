"""Spectrum of the random-walk matrix ``D^-1 A`` and the synchronization conditions it drives.

Eigenvalues are computed on the similar symmetric matrix ``D^-1/2 A D^-1/2``.
Two solvers are available: LAPACK's symmetric driver (default) and a cyclic
Jacobi rotation method kept in pure numpy for small graphs and cross-checks.
Both are accurate to about 1e-10 on the graphs this package targets.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EigenSolveFailure, NonPositiveK
from .graphs import Graph

EIG_TOL = 1e-10
DEGENERACY_TOL = 1e-8


def jacobi_eigh(a: np.ndarray, tol: float = 1e-13, max_sweeps: int = 100):
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, v)`` with ascending eigenvalues ``w`` and orthonormal
    eigenvectors in the columns of ``v``.

    Raises
    ------
    EigenSolveFailure
        If the off-diagonal mass does not fall below ``tol * ||a||_F`` within
        ``max_sweeps`` sweeps.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T, atol=1e-12):
        raise EigenSolveFailure("jacobi_eigh needs a square symmetric matrix")
    v = np.eye(n)
    scale = np.linalg.norm(a) or 1.0
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= tol * scale:
            w = np.diag(a).copy()
            order = np.argsort(w, kind="stable")
            return w[order], v[:, order]
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise EigenSolveFailure(f"Jacobi rotations did not converge in {max_sweeps} sweeps")


def _symmetric_eigh(a: np.ndarray, method: str):
    if method == "lapack":
        try:
            return np.linalg.eigh(a)
        except np.linalg.LinAlgError as exc:
            raise EigenSolveFailure(str(exc)) from exc
    if method == "jacobi":
        return jacobi_eigh(a)
    raise ValueError(f"unknown eigen method {method!r}")


def sign_normalize(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so that its largest-magnitude entry (first on ties) is positive."""
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    """Ascending spectrum of ``D^-1 A`` plus the quantities derived from it.

    ``top_eigenvector`` is the unit-norm eigenvector of ``D^-1 A`` for the
    second-largest eigenvalue, expressed in original coordinates.
    """

    eigenvalues: np.ndarray
    top_eigenvector: np.ndarray
    second_multiplicity: int

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @property
    def lambda_second(self) -> float:
        return float(self.eigenvalues[-2])

    @property
    def lambda_abs_max_nontrivial(self) -> float:
        return float(np.max(np.abs(self.eigenvalues[:-1])))

    @property
    def algebraic_connectivity(self) -> float:
        return 1.0 - self.lambda_second

    def to_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "lambda_second": self.lambda_second,
            "lambda_second_multiplicity": self.second_multiplicity,
            "lambda_abs_max_nontrivial": self.lambda_abs_max_nontrivial,
            "algebraic_connectivity": self.algebraic_connectivity,
            "top_eigenvector": self.top_eigenvector.tolist(),
        }


def normalized_spectrum(g: Graph, method: str = "lapack") -> SpectralSummary:
    """Full spectrum of ``D^-1 A`` via ``D^-1/2 A D^-1/2``.

    Parameters
    ----------
    g : Graph
        Connected graph.
    method : {"lapack", "jacobi"}
        Symmetric eigensolver backend.
    """
    if g.n < 2:
        raise EigenSolveFailure("spectrum needs at least two vertices")
    dm = 1.0 / np.sqrt(g.degrees)
    sym = dm[:, None] * g.adjacency * dm[None, :]
    w, u = _symmetric_eigh(sym, method)
    if not np.all(np.isfinite(w)):
        raise EigenSolveFailure("non-finite eigenvalues")
    if abs(w[-1] - 1.0) > 1e-9 or np.max(np.abs(w)) > 1.0 + 1e-9:
        raise EigenSolveFailure(f"spectrum outside [-1, 1] or top eigenvalue {w[-1]!r} != 1")
    second = w[-2]
    block = np.flatnonzero(np.abs(w[:-1] - second) <= DEGENERACY_TOL)
    v = dm * u[:, block[0]]
    v = sign_normalize(v / np.linalg.norm(v))
    w = w.copy()
    w.setflags(write=False)
    v.setflags(write=False)
    return SpectralSummary(eigenvalues=w, top_eigenvector=v, second_multiplicity=int(block.size))


@dataclass(frozen=True)
class ThresholdReport:
    """Synchronization conditions for a Lipschitz constant ``k`` on a given spectrum.

    ``decay_rate`` is ``1 - k * max_{i<N} |lambda_i|`` and is ``None`` unless
    that quantity is positive.
    """

    k: float
    lambda_second: float
    lambda_abs_max_nontrivial: float
    k_lambda: float
    sharp_threshold_met: bool
    exponential_condition_met: bool
    dense_graph_guarantee: bool
    decay_rate: float | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def threshold_report(spec: SpectralSummary, k: float) -> ThresholdReport:
    if not k > 0:
        raise NonPositiveK(f"Lipschitz constant must be positive, got {k}")
    k = float(k)
    lam2 = spec.lambda_second
    lam_abs = spec.lambda_abs_max_nontrivial
    exp_margin = 1.0 - k * lam_abs
    return ThresholdReport(
        k=k,
        lambda_second=lam2,
        lambda_abs_max_nontrivial=lam_abs,
        k_lambda=k * lam2,
        sharp_threshold_met=bool(k * lam2 < 1.0),
        exponential_condition_met=bool(exp_margin > 0.0),
        dense_graph_guarantee=bool(lam2 < 0.0),
        decay_rate=exp_margin if exp_margin > 0.0 else None,
    )
