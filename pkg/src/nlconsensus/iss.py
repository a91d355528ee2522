"""Robustness of a cluster's internal agreement against the rest of the network.

Restricted to a vertex subset, the flow is the cluster's own consensus flow
plus a perturbation ``p`` collecting the external coupling and the degree
mismatch. Only the part of ``p`` that is not a uniform shift (``p_tilde``)
can pull the cluster apart, and the internal disagreement obeys an
input-to-state bound driven by it.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import Trajectory
from .errors import CohesionNotMet, DimensionMismatch
from .graphs import Graph, SubgraphDecomposition
from .signals import SignalFunction

ISS_SLACK = 1e-6


def perturbation(g: Graph, s: SignalFunction, x, dec: SubgraphDecomposition) -> np.ndarray:
    """``(1/d - 1/d_in) A_in s(x') + (1/d) A_ext s(x)`` on the cluster vertices.

    ``x`` may be one state (N,) or a stack of states (T, N).
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != g.n:
        raise DimensionMismatch(f"state has {x.shape[-1]} components, graph has {g.n} vertices")
    sx = s(x)
    sx_in = sx[..., list(dec.vertex_set)]
    d_in, d = dec.internal_degrees, dec.total_degrees
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_in = np.where(d_in > 0, 1.0 / d_in, 0.0)
    internal = (sx_in @ dec.internal_adjacency.T) * (1.0 / d - inv_in)
    external = (sx @ dec.external_adjacency.T) / d
    return internal + external


def residual(p, dec: SubgraphDecomposition) -> tuple[np.ndarray, np.ndarray | float]:
    """Split ``p`` into its ``d_in``-weighted mean ``p_bar`` and the centred rest ``p_tilde``."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != dec.size:
        raise DimensionMismatch(f"perturbation has {p.shape[-1]} entries, cluster has {dec.size}")
    w = dec.internal_degrees
    total = w.sum()
    if total == 0:  # single vertex
        p_bar = p[..., 0]
    else:
        p_bar = (p @ w) / total
    p_tilde = p - np.asarray(p_bar)[..., None]
    return p_tilde, (float(p_bar) if np.ndim(p_bar) == 0 else p_bar)


def _weighted_norm(w, v):
    return np.sqrt(np.maximum((v * v) @ w, 0.0))


def internal_disagreement(x_in, dec: SubgraphDecomposition):
    """``||x' - xbar' 1||_{D_in}`` for one or many cluster states."""
    w = dec.internal_degrees
    x_in = np.asarray(x_in, dtype=float)
    if w.sum() == 0:
        return np.zeros(x_in.shape[:-1]) if x_in.ndim > 1 else 0.0
    mean = (x_in @ w) / w.sum()
    return _weighted_norm(w, x_in - np.asarray(mean)[..., None])


def internal_spectrum(dec: SubgraphDecomposition) -> np.ndarray:
    """Ascending eigenvalues of ``D_in^-1 A_in`` (empty for a single vertex)."""
    if dec.size < 2:
        return np.zeros(0)
    dm = 1.0 / np.sqrt(dec.internal_degrees)
    return np.linalg.eigvalsh(dm[:, None] * dec.internal_adjacency * dm[None, :])


def structural_bound(dec: SubgraphDecomposition, constant: float = 2.0) -> float:
    """``constant * sum_i d_in_i (d_ext_i / d_i)^2`` over the cluster."""
    d = dec.total_degrees
    return float(constant * np.sum(dec.internal_degrees * (dec.external_degrees / d) ** 2))


@dataclass(frozen=True, eq=False)
class IssTrace:
    times: np.ndarray
    internal_disagreement: np.ndarray
    residual_perturbation: np.ndarray
    iss_bound: np.ndarray
    holds_at_all_samples: bool | None

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "disagreement", "residual_perturbation", "iss_bound"])
            for row in zip(self.times, self.internal_disagreement, self.residual_perturbation,
                           self.iss_bound):
                w.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True, eq=False)
class ClusterAnalysis:
    """Cohesion rate and perturbation bounds for one cluster.

    ``structural_bound`` uses the constant 2; ``structural_bound_derived``
    uses 4, which follows directly from ``|s| <= 1``. Both are compared with
    ``empirical_sup_sq``, the largest squared residual-perturbation norm seen
    along the trajectory.
    """

    decomposition: SubgraphDecomposition
    k: float
    alpha_in: float
    internal_spectrum: np.ndarray
    structural_bound: float
    structural_bound_derived: float
    empirical_sup: float
    ultimate_bound: float | None
    degenerate: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def cohesion_met(self) -> bool:
        return self.alpha_in > 0

    @property
    def empirical_sup_sq(self) -> float:
        return self.empirical_sup ** 2

    def to_dict(self) -> dict:
        return {
            "vertex_set": list(self.decomposition.vertex_set),
            "k": self.k,
            "alpha_in": self.alpha_in,
            "cohesion_met": self.cohesion_met,
            "internal_spectrum": self.internal_spectrum.tolist(),
            "structural_bound": self.structural_bound,
            "structural_bound_derived": self.structural_bound_derived,
            "empirical_sup_residual_perturbation": self.empirical_sup,
            "empirical_sup_residual_perturbation_sq": self.empirical_sup_sq,
            "ultimate_bound": self.ultimate_bound,
            "degenerate": self.degenerate,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def analyze_cluster(g: Graph, s: SignalFunction, dec: SubgraphDecomposition, traj: Trajectory,
                    strict: bool = False) -> tuple[ClusterAnalysis, IssTrace]:
    """Check the input-to-state bound for one cluster along a trajectory.

    The bound at sample ``t`` is ``||e(0)|| exp(-alpha_in t) + sup_{tau<=t}
    ||p_tilde(tau)|| / alpha_in`` with the sup taken over recorded samples.

    Raises
    ------
    CohesionNotMet
        Only with ``strict=True`` and ``alpha_in <= 0``; the exception carries
        the analysis in its ``analysis`` attribute. Without ``strict`` the ISS
        verdict is reported as ``None`` (not applicable).
    """
    if dec.graph != g:
        raise DimensionMismatch("decomposition was built on a different graph")
    k = float(s.lipschitz_k)
    spec = internal_spectrum(dec)
    degenerate = spec.size == 0
    alpha = 1.0 if degenerate else 1.0 - k * float(np.max(np.abs(spec[:-1])))

    states = traj.states
    dis = internal_disagreement(states[:, list(dec.vertex_set)], dec)
    p_tilde, _ = residual(perturbation(g, s, states, dec), dec)
    rp = _weighted_norm(dec.internal_degrees, p_tilde)
    running = np.maximum.accumulate(rp)
    sup = float(rp.max())
    notes = []
    if degenerate:
        notes.append("single-vertex cluster: disagreement is identically zero")
    if alpha > 0:
        bound = dis[0] * np.exp(-alpha * traj.times) + running / alpha
        holds = bool(np.all(dis <= bound * (1 + ISS_SLACK)))
        ultimate = sup / alpha
    else:
        bound = np.full(traj.times.shape, np.inf)
        holds, ultimate = None, None
        notes.append("alpha_in <= 0: input-to-state bound not applicable")
    analysis = ClusterAnalysis(
        decomposition=dec, k=k, alpha_in=alpha, internal_spectrum=spec,
        structural_bound=structural_bound(dec, 2.0),
        structural_bound_derived=structural_bound(dec, 4.0),
        empirical_sup=sup, ultimate_bound=ultimate, degenerate=degenerate, notes=notes,
    )
    trace = IssTrace(traj.times, dis, rp, bound, holds)
    if strict and alpha <= 0:
        exc = CohesionNotMet(f"alpha_in = {alpha:.6g} <= 0 for cluster {dec.vertex_set}")
        exc.analysis, exc.trace = analysis, trace
        raise exc
    return analysis, trace


def tail_within_ultimate(analysis: ClusterAnalysis, trace: IssTrace, fraction: float = 0.2) -> bool | None:
    """Does the disagreement over the last ``fraction`` of samples stay under the ultimate bound?"""
    if analysis.ultimate_bound is None:
        return None
    n = trace.times.size
    tail = trace.internal_disagreement[n - max(1, int(round(fraction * n))):]
    return bool(np.all(tail <= analysis.ultimate_bound * (1 + ISS_SLACK)))
