"""The three headline experiments, callable from Python as well as from the CLI."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import graphs
from .dynamics import Trajectory, integrate
from .equilibria import (
    BifurcationDiagram,
    EquilibriumReport,
    NfseConditionsReport,
    bifurcation_sweep,
    classify_equilibrium,
    nfse_conditions,
)
from .errors import NotAnEquilibrium
from .iss import ClusterAnalysis, IssTrace, analyze_cluster, tail_within_ultimate
from .rng import stream
from .signals import clip_linear, tanh_gain
from .spectral import normalized_spectrum


def sign_agreement(x: np.ndarray, labels: np.ndarray, split: float = 0.0) -> int:
    """Vertices whose side of ``split`` matches a two-label partition (best orientation).

    Vertices sitting exactly on ``split`` never match.
    """
    side = np.sign(x - split)
    want = np.where(labels == labels.min(), 1.0, -1.0)
    return int(max(np.sum(side == want), np.sum(side == -want)))


@dataclass
class ClusteringRun:
    seed: int
    k: float
    trajectory: Trajectory
    equilibrium: EquilibriumReport | None
    conditions: NfseConditionsReport | None
    sign_matches: int
    cluster_spreads: tuple[float, ...]
    mean_gap: float
    analyses: list[ClusterAnalysis] = field(default_factory=list)
    traces: list[IssTrace] = field(default_factory=list)
    tail_ok: list[bool | None] = field(default_factory=list)

    @property
    def kind(self) -> str | None:
        return None if self.equilibrium is None else self.equilibrium.kind

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "k": self.k,
            "kind": self.kind,
            "equilibrium": None if self.equilibrium is None else self.equilibrium.to_dict(),
            "nfse_conditions": None if self.conditions is None else self.conditions.to_dict(),
            "sign_matches": self.sign_matches,
            "cluster_spreads": list(self.cluster_spreads),
            "mean_gap": self.mean_gap,
            "stopped_early": self.trajectory.stopped_early,
            "final_time": float(self.trajectory.times[-1]),
            "clusters": [
                {**a.to_dict(), "holds_at_all_samples": t.holds_at_all_samples, "tail_within_ultimate": ok}
                for a, t, ok in zip(self.analyses, self.traces, self.tail_ok)
            ],
        }


def karate_clustering(seed: int, k: float = 1.2, dt: float = 0.01, t_end: float = 200.0,
                      record_every: int = 10, x0=None) -> ClusteringRun:
    """Clipped-linear run on the karate club graph, analysed against the faction split.

    Spreads are per-faction standard deviations of the final state; the gap is
    the distance between the two faction means.
    """
    g = graphs.builtin("karate")
    s = clip_linear(k)
    labels = graphs.karate_partition()
    if x0 is None:
        x0 = stream(seed, "initial_condition").uniform(-1.0, 1.0, g.n)
    traj = integrate(g, s, x0, dt=dt, t_end=t_end, record_every=record_every)
    xf = traj.final_state
    try:
        eq = classify_equilibrium(g, s, xf)
    except NotAnEquilibrium:
        eq = None
    cond = nfse_conditions(g, s, xf) if eq is not None and not eq.is_fse else None
    clusters = graphs.clusters_from_labels(labels)
    spreads = tuple(float(np.std(xf[list(c)])) for c in clusters)
    means = [float(np.mean(xf[list(c)])) for c in clusters]
    run = ClusteringRun(seed, k, traj, eq, cond, sign_agreement(xf, labels), spreads,
                        abs(means[0] - means[1]))
    for c in clusters:
        a, t = analyze_cluster(g, s, graphs.induced_subgraph(g, c), traj)
        run.analyses.append(a)
        run.traces.append(t)
        run.tail_ok.append(tail_within_ultimate(a, t))
    return run


def line5_bifurcation(k_min: float = 0.5, k_max: float = 3.5, k_step: float = 0.01) -> BifurcationDiagram:
    return bifurcation_sweep(graphs.builtin("line", 5), tanh_gain, (k_min, k_max), k_step)


TOPOLOGIES = (("line", 8), ("ring", 8), ("random", 10), ("star", 8), ("complete", 8))


def topology_panels(seed: int, below: float = 0.8, above: float = 4.0, dense_gains=(0.9, 5.0),
                    dt: float = 0.01, t_end: float = 200.0) -> list[dict]:
    """Same start, two gains per topology: ``K lambda`` below and above 1.

    Graphs with ``lambda_{N-1} <= 0`` have no gain above the threshold; they
    get the two fixed gains in ``dense_gains`` instead.
    """
    panels = []
    for name, n in TOPOLOGIES:
        if name == "random":
            g = graphs.random_connected(n, 0.3, stream(seed, "topology_graph"))
        else:
            g = graphs.builtin(name, n)
        lam = normalized_spectrum(g).lambda_second
        gains = (below / lam, above / lam) if lam > 0 else dense_gains
        x0 = stream(seed, f"topology_x0_{name}").uniform(-1.0, 1.0, g.n)
        for panel, k in zip(("top", "bottom"), gains):
            s = clip_linear(k)
            traj = integrate(g, s, x0, dt=dt, t_end=t_end)
            xf = traj.final_state
            try:
                kind = classify_equilibrium(g, s, xf).kind
            except NotAnEquilibrium:
                kind = None
            panels.append({
                "topology": g.name, "panel": panel, "k": float(k), "k_lambda": float(k * lam),
                "lambda_second": float(lam), "kind": kind, "spread": float(xf.max() - xf.min()),
                "final_state": xf.tolist(), "edges": [list(e) for e in g.edges],
            })
    return panels
