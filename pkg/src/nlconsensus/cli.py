"""Command-line front end.

``nlconsensus <command> [flags]``. Each command writes its data files to the
output directory (``--out``, default ``out``); every CSV gets a
``<name>.meta.json`` sidecar echoing the configuration.

Exit codes: 0 success, 2 bad configuration or input, 3 numerical failure,
4 a checked invariant failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, graphs, scenarios, signals
from .config import ScenarioConfig, parse_initial_condition
from .dynamics import integrate
from .equilibria import SearchLog, SeedPlan, bifurcation_sweep, find_equilibria
from .errors import ConfigParseError, ConsensusError, NumericalError
from .iss import analyze_cluster, tail_within_ultimate
from .spectral import normalized_spectrum, threshold_report

SCENARIOS = ("karate-fig5", "line5-fig3", "topology-fig4")


class InvariantFailure(Exception):
    """A result was produced but a property it must satisfy does not hold."""


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _echo(cfg: ScenarioConfig) -> dict:
    """Config as recorded in sidecars; the output location is left out so that
    identical runs into different directories produce identical files."""
    d = cfg.to_dict()
    d.pop("output_dir")
    return d


class Outputs:
    """Tracks written files so a failed run can remove what it left behind."""

    def __init__(self, out_dir, command: str, cfg: ScenarioConfig):
        self.dir = Path(out_dir)
        self.command, self.cfg = command, cfg
        self.written: list[Path] = []
        self._created_dir = not self.dir.exists()

    def path(self, name: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        p = self.dir / name
        self.written.append(p)
        return p

    def json(self, name: str, obj) -> Path:
        p = self.path(name)
        p.write_text(_dumps(obj))
        return p

    def csv(self, name: str, writer, extra: dict | None = None) -> Path:
        p = self.path(name)
        writer(p)
        meta = {"artifact": "nlconsensus", "version": __version__, "command": self.command,
                "file": name, "config": _echo(self.cfg)}
        if extra:
            meta["info"] = extra
        self.json(Path(name).stem + ".meta.json", meta)
        return p

    def cleanup(self) -> None:
        for p in self.written:
            p.unlink(missing_ok=True)
        if self._created_dir and self.dir.exists() and not any(self.dir.iterdir()):
            self.dir.rmdir()


# --- argument handling ------------------------------------------------------

def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--graph", help="builtin such as line:5, karate, complete_bipartite:2,3, or an edge-list path")
    p.add_argument("--signal", help="tanh:K=2.5, clip:K=1.2, pwl:file=path.json or sinestair")
    p.add_argument("--k", type=float, help="gain override for tanh/clip signals")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--record-every", type=int, dest="record_every")
    p.add_argument("--seed", type=int)
    p.add_argument("--x0", help="uniform, fsm:<c> or comma-separated values")
    p.add_argument("--partition", help="vertex-label file, or 'karate' for the faction split")
    p.add_argument("--out", dest="output_dir", help="output directory (default: out)")
    p.add_argument("--n-random", type=int, dest="n_random", help="random starts for equilibrium search")
    p.add_argument("--k-min", type=float, dest="k_min")
    p.add_argument("--k-max", type=float, dest="k_max")
    p.add_argument("--k-step", type=float, dest="k_step")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlconsensus", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()
    helps = {
        "spectrum": "eigenvalues of D^-1 A",
        "threshold": "synchronization conditions for a signal's Lipschitz constant",
        "simulate": "integrate one trajectory",
        "equilibria": "multi-start equilibrium search",
        "bifurcate": "gain sweep on the five-vertex path",
        "iss": "cluster input-to-state analysis along a trajectory",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    sc = sub.add_parser("scenario", parents=[common], help="named experiment")
    sc.add_argument("name", choices=SCENARIOS)
    return parser


_SCENARIO_DEFAULTS = {
    "karate-fig5": {"graph": "karate", "signal": "clip:K=1.2", "partition": "karate"},
    "line5-fig3": {"graph": "line:5", "signal": "tanh:K=1.0"},
    "topology-fig4": {"signal": "clip:K=1.0"},
}


def resolve_config(args: argparse.Namespace) -> ScenarioConfig:
    """Defaults, then scenario defaults, then the config file, then flags."""
    base = ScenarioConfig().to_dict()
    if getattr(args, "command", None) == "scenario":
        base.update(_SCENARIO_DEFAULTS[args.name])
    if hasattr(args, "config"):
        loaded = ScenarioConfig.load(args.config).to_dict()
        given = json.loads(Path(args.config).read_text())
        base.update({key: loaded[key] for key in given})
    flags = vars(args)
    for key in ("graph", "signal", "k", "seed", "partition", "output_dir", "n_random"):
        if key in flags:
            base[key] = flags[key]
    for key in ("dt", "t_end", "record_every"):
        if key in flags:
            base["integration"][key] = flags[key]
    for key in ("k_min", "k_max", "k_step"):
        if key in flags:
            base["sweep"][key] = flags[key]
    if "x0" in flags:
        ic = parse_initial_condition(flags["x0"])
        base["initial_condition"] = {"kind": ic.kind, "values": ic.values, "c": ic.c}
    return ScenarioConfig.from_dict(base)


def _load_partition(spec: str | None, g: graphs.Graph) -> np.ndarray:
    if spec is None:
        raise ConfigParseError("this command needs --partition")
    if spec == "karate":
        if g.n != 34:
            raise ConfigParseError("the karate partition needs the karate graph")
        return graphs.karate_partition()
    try:
        return graphs.read_partition(spec, g.n)
    except OSError as exc:
        raise ConfigParseError(f"cannot read partition {spec}: {exc}") from None


# --- commands ---------------------------------------------------------------

def _graph_signal(cfg):
    try:
        g = graphs.from_spec(cfg.graph)
    except OSError as exc:
        raise ConfigParseError(f"cannot read graph {cfg.graph}: {exc}") from None
    return g, signals.from_spec(cfg.signal, k=cfg.k)


def _simulate(cfg, g, s, out: Outputs):
    it = cfg.integration
    traj = integrate(g, s, cfg.initial_state(g), dt=it.dt, t_end=it.t_end, record_every=it.record_every)
    out.csv("trajectory.csv", traj.write_csv,
            {"graph": g.name, "signal": s.describe(), "stopped_early": traj.stopped_early})
    return traj


def cmd_spectrum(cfg, out):
    g = graphs.from_spec(cfg.graph)
    summary = {"graph": g.name, **normalized_spectrum(g).to_dict()}
    out.json("spectrum.json", summary)
    return summary


def cmd_threshold(cfg, out):
    g, s = _graph_signal(cfg)
    rep = threshold_report(normalized_spectrum(g), s.lipschitz_k)
    summary = {"graph": g.name, "signal": s.describe(), **rep.to_dict()}
    out.json("threshold.json", summary)
    return summary


def cmd_simulate(cfg, out):
    g, s = _graph_signal(cfg)
    traj = _simulate(cfg, g, s, out)
    summary = {
        "graph": g.name, "signal": s.describe(),
        "final_state": traj.final_state.tolist(),
        "final_residual": float(traj.residuals[-1]),
        "final_disagreement": float(traj.disagreement[-1]),
        "disagreement_overshoot": traj.disagreement_overshoot,
        "stopped_early": traj.stopped_early,
        "final_time": float(traj.times[-1]),
        "threshold": threshold_report(normalized_spectrum(g), s.lipschitz_k).to_dict(),
    }
    out.json("simulate.json", summary)
    return summary


def cmd_equilibria(cfg, out):
    g, s = _graph_signal(cfg)
    log = SearchLog()
    eqs = find_equilibria(g, s, SeedPlan(n_random=cfg.n_random, seed=cfg.seed), log=log)
    out.json("equilibria.json", [e.to_dict() for e in eqs])
    out.json("equilibria.meta.json", {"artifact": "nlconsensus", "version": __version__,
                                      "config": _echo(cfg), "search_log": log.__dict__})
    bad = [e.state.tolist() for e in eqs if e.scalar_jacobian_consistent is False]
    if bad:
        raise InvariantFailure(f"scalar and Jacobian stability disagree at {bad}")
    return {"count": len(eqs), "kinds": [e.kind for e in eqs], "search_log": log.__dict__}


_FAMILIES = {"tanh": signals.tanh_gain, "clip": signals.clip_linear}


def cmd_bifurcate(cfg, out):
    g = graphs.from_spec(cfg.graph)
    head = cfg.signal.partition(":")[0]
    if head not in _FAMILIES:
        raise ConfigParseError("bifurcate sweeps the tanh or clip family")
    sw = cfg.sweep
    diagram = bifurcation_sweep(g, _FAMILIES[head], (sw.k_min, sw.k_max), sw.k_step)
    summary = {"graph": g.name, "family": head, "k_step": sw.k_step, **diagram.summary()}
    out.csv("bifurcation.csv", diagram.write_csv, {"family": head})
    out.json("bifurcation_summary.json", summary)
    return summary


def _cluster_outputs(g, s, traj, labels, out):
    results, failed = [], []
    for lab in np.unique(labels):
        members = tuple(np.flatnonzero(labels == lab).tolist())
        dec = graphs.induced_subgraph(g, members)
        analysis, trace = analyze_cluster(g, s, dec, traj)
        tail = tail_within_ultimate(analysis, trace)
        info = {**analysis.to_dict(), "label": int(lab),
                "holds_at_all_samples": trace.holds_at_all_samples, "tail_within_ultimate": tail}
        out.csv(f"iss_cluster_{lab}.csv", trace.write_csv, {"label": int(lab)})
        out.json(f"iss_cluster_{lab}.json", info)
        results.append(info)
        if trace.holds_at_all_samples is False or tail is False:
            failed.append(int(lab))
    return results, failed


def cmd_iss(cfg, out):
    g, s = _graph_signal(cfg)
    labels = _load_partition(cfg.partition, g)
    traj = _simulate(cfg, g, s, out)
    results, failed = _cluster_outputs(g, s, traj, labels, out)
    if failed:
        raise InvariantFailure(f"input-to-state bound violated for clusters {failed}")
    return {"clusters": results}


def cmd_scenario(cfg, out, name):
    if name == "line5-fig3":
        return cmd_bifurcate(cfg, out)
    if name == "topology-fig4":
        panels = scenarios.topology_panels(cfg.seed, dt=cfg.integration.dt, t_end=cfg.integration.t_end)

        def write(path):
            with Path(path).open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["topology", "panel", "K", "k_lambda", "vertex", "x"])
                for p in panels:
                    for v, x in enumerate(p["final_state"]):
                        w.writerow([p["topology"], p["panel"], repr(p["k"]), repr(p["k_lambda"]), v, repr(x)])

        out.csv("topology_fig4.csv", write)
        out.json("topology_fig4.json", panels)
        return [{k: p[k] for k in ("topology", "panel", "k_lambda", "kind", "spread")} for p in panels]
    # karate-fig5
    g, s = _graph_signal(cfg)
    if g != graphs.builtin("karate"):
        raise ConfigParseError("karate-fig5 runs on the karate graph")
    it = cfg.integration
    run = scenarios.karate_clustering(cfg.seed, s.lipschitz_k, it.dt, it.t_end, it.record_every,
                                      x0=cfg.initial_state(g))
    out.csv("trajectory.csv", run.trajectory.write_csv, {"graph": g.name, "signal": s.describe()})
    labels = _load_partition(cfg.partition, g)
    _, failed = _cluster_outputs(g, s, run.trajectory, labels, out)
    summary = {**run.summary(), "expected_kind": "NFSE", "matches_expected_kind": run.kind == "NFSE"}
    out.json("equilibrium.json", summary)
    if run.kind != "NFSE":
        print(f"note: run settled to {run.kind}, not a clustered equilibrium", file=sys.stderr)
    if failed:
        raise InvariantFailure(f"input-to-state bound violated for clusters {failed}")
    return {k: summary[k] for k in ("seed", "kind", "sign_matches", "cluster_spreads", "mean_gap")}


COMMANDS = {
    "spectrum": cmd_spectrum, "threshold": cmd_threshold, "simulate": cmd_simulate,
    "equilibria": cmd_equilibria, "bifurcate": cmd_bifurcate, "iss": cmd_iss,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = None
    try:
        cfg = resolve_config(args)
        out = Outputs(cfg.output_dir, args.command, cfg)
        if args.command == "scenario":
            result = cmd_scenario(cfg, out, args.name)
        else:
            result = COMMANDS[args.command](cfg, out)
    except InvariantFailure as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return 4
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        if out is not None:
            out.cleanup()
        return 3
    except (ConsensusError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        if out is not None:
            out.cleanup()
        return 2
    sys.stdout.write(_dumps(result))
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
