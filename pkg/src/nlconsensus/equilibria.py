"""Equilibria of the consensus flow: search, classification and necessary conditions.

Also holds the bifurcation sweep for the five-vertex path, which exploits the
two-dimensional invariant manifold ``x = (x1, x2, 0, -x2, -x1)`` available
for odd signal functions.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.stats import qmc

from .dynamics import integrate_batch, residual, rhs
from .errors import BranchLost, ContractError, NotAnEquilibrium, NotNFSE, NotOdd
from .graphs import Graph, builtin
from .rng import as_generator
from .signals import FixedPointRecord, SignalFunction, is_odd
from .spectral import normalized_spectrum

EQ_TOL = 1e-8
SYNC_TOL = 1e-6
DEDUP_TOL = 1e-6
STAB_MARGIN = 1e-8
KINK_TOL = 1e-6
SPLIT_TOL = 1e-9


def jacobian(g: Graph, s: SignalFunction, x) -> np.ndarray:
    """``D^-1 A diag(s'(x)) - I``."""
    x = np.asarray(x, dtype=float)
    return g.transition * s.derivative(x)[None, :] - np.eye(g.n)


def stability_label(eigs) -> str:
    top = float(np.max(np.real(eigs)))
    if top < -STAB_MARGIN:
        return "stable"
    if top > STAB_MARGIN:
        return "unstable"
    return "marginal"


def _matching_record(s: SignalFunction, c: float) -> FixedPointRecord | None:
    best, dist = None, np.inf
    for rec in s.fixed_points:
        d = 0.0 if rec.lo <= c <= rec.hi else min(abs(c - rec.lo), abs(c - rec.hi))
        if d < dist:
            best, dist = rec, d
    return best if dist < SYNC_TOL else None


@dataclass(frozen=True, eq=False)
class EquilibriumReport:
    """One equilibrium with its type and local stability.

    ``scalar_class`` and ``scalar_jacobian_consistent`` are filled for FSE
    only: a scalar-stable fixed point must not give an unstable Jacobian, and
    a non-stable one must not give a stable Jacobian (marginal is compatible
    with both).
    """

    state: np.ndarray
    residual: float
    kind: str
    fse_value: float | None = None
    jacobian_spectrum: np.ndarray | None = None
    local_stability: str | None = None
    near_kink: bool = False
    scalar_class: str | None = None
    scalar_jacobian_consistent: bool | None = None
    basin_samples: int | None = None

    @property
    def is_fse(self) -> bool:
        return self.kind == "FSE"

    @property
    def spread(self) -> float:
        return float(self.state.max() - self.state.min())

    def to_dict(self) -> dict:
        d = {
            "state": self.state.tolist(),
            "residual": self.residual,
            "kind": self.kind,
            "fse_value": self.fse_value,
            "local_stability": self.local_stability,
            "near_kink": self.near_kink,
        }
        if self.jacobian_spectrum is not None:
            eig = np.sort_complex(self.jacobian_spectrum)
            d["jacobian_spectrum"] = {"real": eig.real.tolist(), "imag": eig.imag.tolist()}
        if self.is_fse:
            d["scalar_class"] = self.scalar_class
            d["scalar_jacobian_consistent"] = self.scalar_jacobian_consistent
        if self.basin_samples is not None:
            d["basin_samples"] = self.basin_samples
        return d


def classify_equilibrium(g: Graph, s: SignalFunction, x, basin_samples: int | None = None
                         ) -> EquilibriumReport:
    """Type and local stability of an equilibrium ``x``.

    Raises
    ------
    NotAnEquilibrium
        If the residual ``||D^-1 A s(x) - x||_inf`` is not below 1e-8.
    """
    x = np.array(x, dtype=float)
    res = residual(g, s, x)
    if not res < EQ_TOL:
        raise NotAnEquilibrium(f"residual {res:.3e} is not below {EQ_TOL}")
    fse = bool(x.max() - x.min() < SYNC_TOL)
    eigs = label = None
    if s.has_slope:
        eigs = np.linalg.eigvals(jacobian(g, s, x))
        label = stability_label(eigs)
    scalar = consistent = None
    c = None
    if fse:
        c = float(x.mean())
        rec = _matching_record(s, c)
        if rec is not None:
            scalar = rec.classification
            if label is not None:
                if scalar == "stable":
                    consistent = label != "unstable"
                else:
                    consistent = label != "stable"
    x.setflags(write=False)
    return EquilibriumReport(
        state=x, residual=res, kind="FSE" if fse else "NFSE", fse_value=c,
        jacobian_spectrum=eigs, local_stability=label, near_kink=s.near_kink(x, KINK_TOL),
        scalar_class=scalar, scalar_jacobian_consistent=consistent, basin_samples=basin_samples,
    )


# --- multi-start search -----------------------------------------------------

@dataclass(frozen=True)
class SeedPlan:
    """Starting points for :func:`find_equilibria`.

    Fixed-point seeds ``c 1``, eigenvector seeds ``+/- eps v`` with
    ``eps in eigvec_scales / K`` and ``n_random`` Latin-hypercube points.
    """

    fixed_point_seeds: bool = True
    eigvec_scales: tuple[float, ...] = (0.1, 0.5, 1.0)
    n_random: int = 64
    seed: int = 0
    extra: tuple[tuple[float, ...], ...] = ()


def build_seeds(g: Graph, s: SignalFunction, plan: SeedPlan = SeedPlan()) -> np.ndarray:
    seeds = []
    if plan.fixed_point_seeds:
        for rec in s.fixed_points:
            for c in sorted({rec.lo, rec.value, rec.hi}):
                seeds.append(np.full(g.n, c))
    if plan.eigvec_scales and g.n >= 2:
        v = normalized_spectrum(g).top_eigenvector
        v = v / np.max(np.abs(v))
        for a in plan.eigvec_scales:
            eps = a / s.lipschitz_k
            seeds.append(np.clip(eps * v, -1, 1))
            seeds.append(np.clip(-eps * v, -1, 1))
    for e in plan.extra:
        seeds.append(np.clip(np.asarray(e, dtype=float), -1, 1))
    if plan.n_random > 0:
        sampler = qmc.LatinHypercube(d=g.n, seed=as_generator(plan.seed, "multistart"))
        seeds.extend(2.0 * sampler.random(plan.n_random) - 1.0)
    return np.array(seeds).reshape(-1, g.n)


def newton_polish(g: Graph, s: SignalFunction, xs, max_steps: int = 50,
                  target: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """Damped Newton on ``F(x) = D^-1 A s(x) - x`` for a stack of points.

    A full step is tried first and halved while it fails to lower the
    residual. Iterates are kept inside the hypercube.
    """
    x = np.clip(np.array(xs, dtype=float, ndmin=2), -1, 1)
    res = residual(g, s, x)
    eye = np.eye(g.n)
    moving = np.ones(x.shape[0], dtype=bool)
    for _ in range(max_steps):
        # keep going until the step is negligible too: near degenerate roots
        # the residual is tiny long before the point is accurate
        active = moving & (res > 0)
        if not active.any():
            break
        xa = x[active]
        jac = g.transition[None, :, :] * s.derivative(xa)[:, None, :] - eye[None]
        f = rhs(g, s, xa)
        try:
            dx = np.linalg.solve(jac, -f[..., None])[..., 0]
        except np.linalg.LinAlgError:
            dx = np.stack([np.linalg.lstsq(j, -fi, rcond=None)[0] for j, fi in zip(jac, f)])
        ra = res[active]
        best_x, best_r = xa.copy(), ra.copy()
        pending = np.ones(xa.shape[0], dtype=bool)
        damp = 1.0
        for _ in range(30):
            trial = np.clip(xa + damp * dx, -1, 1)
            tr = residual(g, s, trial)
            ok = pending & (tr < ra)
            best_x[ok], best_r[ok] = trial[ok], tr[ok]
            pending &= ~ok
            if not pending.any():
                break
            damp *= 0.5
        step = np.max(np.abs(best_x - xa), axis=1)
        idx = np.flatnonzero(active)
        moving[idx] = (step > 1e-15) & ((best_r > target) | (step > 1e-12))
        x[active], res[active] = best_x, best_r
    return x, res


@dataclass
class SearchLog:
    n_seeds: int = 0
    n_converged: int = 0
    n_dropped: int = 0
    n_unique: int = 0


def find_equilibria(g: Graph, s: SignalFunction, plan: SeedPlan = SeedPlan(), *,
                    t_end: float = 100.0, dt: float = 0.01,
                    log: SearchLog | None = None) -> list[EquilibriumReport]:
    """Multi-start search: integrate every seed, polish, deduplicate.

    Results keep the order of the first seed that reached them. Seeds that do
    not reach residual 1e-8 are dropped and counted in ``log``.
    """
    seeds = build_seeds(g, s, plan)
    ends = integrate_batch(g, s, seeds, dt=dt, t_end=t_end, tol=1e-9)
    if s.has_slope:
        ends, res = newton_polish(g, s, ends)
    else:
        res = residual(g, s, ends)
        if np.any(res >= EQ_TOL):
            ends = integrate_batch(g, s, ends, dt=dt, t_end=4 * t_end, tol=1e-11)
            res = residual(g, s, ends)
    kept: list[np.ndarray] = []
    counts: list[int] = []
    n_conv = 0
    for x, r in zip(ends, res):
        if not r < EQ_TOL:
            continue
        n_conv += 1
        for i, y in enumerate(kept):
            if np.max(np.abs(x - y)) < DEDUP_TOL:
                counts[i] += 1
                break
        else:
            kept.append(x)
            counts.append(1)
    if log is not None:
        log.n_seeds, log.n_converged = len(seeds), n_conv
        log.n_dropped, log.n_unique = len(seeds) - n_conv, len(kept)
    return [classify_equilibrium(g, s, x, basin_samples=c) for x, c in zip(kept, counts)]


def clip_equilibria_exact(g: Graph, k: float, tol: float = 1e-12) -> list[np.ndarray]:
    """Every equilibrium under ``clip_linear(k)`` by enumerating saturation patterns.

    For each assignment of vertices to {saturated low, linear, saturated high}
    the equilibrium equation is linear; its solution is kept when consistent
    with the assignment. Patterns with a singular system (a continuum of
    equilibria) are skipped. Feasible up to about ten vertices.
    """
    n, p = g.n, g.transition
    found: list[np.ndarray] = []
    for pattern in product((-1, 0, 1), repeat=n):
        pat = np.array(pattern)
        lin = pat == 0
        m = np.eye(n) - k * p * lin[None, :]
        b = p @ np.where(lin, 0.0, pat.astype(float))
        try:
            x = np.linalg.solve(m, b)
        except np.linalg.LinAlgError:
            continue
        if np.linalg.cond(m) > 1e12:
            continue
        kx = k * x
        if np.any(np.abs(kx[lin]) > 1 + tol):
            continue
        if np.any(pat[~lin] * kx[~lin] < 1 - tol):
            continue
        if np.any(np.abs(x) > 1 + tol):
            continue
        x = np.clip(x, -1, 1)
        if not any(np.max(np.abs(x - y)) < DEDUP_TOL for y in found):
            found.append(x)
    return found


# --- necessary conditions for clustered equilibria ---------------------------

@dataclass(frozen=True)
class NfseConditionsReport:
    splitting_point: float | None
    set_i: tuple[int, ...]
    set_j: tuple[int, ...]
    has_left_unstable_between: bool
    has_right_unstable_between: bool
    candidates: tuple[float, ...]

    @property
    def card_i(self) -> int:
        return len(self.set_i)

    @property
    def card_j(self) -> int:
        return len(self.set_j)

    @property
    def overall_pass(self) -> bool:
        return (self.splitting_point is not None and self.card_i >= 2 and self.card_j >= 2
                and self.has_left_unstable_between and self.has_right_unstable_between)

    def to_dict(self) -> dict:
        return {
            "splitting_point": self.splitting_point,
            "set_I": list(self.set_i), "set_J": list(self.set_j),
            "card_I": self.card_i, "card_J": self.card_j,
            "has_left_unstable_between": self.has_left_unstable_between,
            "has_right_unstable_between": self.has_right_unstable_between,
            "candidates": list(self.candidates),
            "overall_pass": self.overall_pass,
        }


def _unstable_pair_between(s: SignalFunction, lo: float, hi: float) -> tuple[bool, bool]:
    """Is there ``c_L`` (left-unstable) and ``c_R`` (right-unstable) with ``lo < c_L <= c_R < hi``?"""
    recs = s.fixed_points
    left = [r.hi for r in recs if r.in_left_unstable_set and lo < r.hi < hi]
    right = [r.lo for r in recs if r.in_right_unstable_set and lo < r.lo < hi]
    if not left or not right:
        return bool(left), bool(right)
    ok = min(left) <= max(right)
    return ok, ok


def nfse_conditions(g: Graph, s: SignalFunction, x) -> NfseConditionsReport:
    """Check the necessary conditions a clustered equilibrium must meet.

    Some non-stable fixed point ``c`` must split the agents into at least
    two strictly below and two strictly above it, and the extreme states must
    enclose a left-unstable and a right-unstable fixed point (in that order).

    Raises
    ------
    NotNFSE
        If ``x`` is a synchronized equilibrium.
    """
    rep = classify_equilibrium(g, s, x)
    if rep.is_fse:
        raise NotNFSE("state is a synchronized equilibrium")
    x = rep.state
    cands = [r for r in s.fixed_points if not r.stable]
    chosen, set_i, set_j = None, (), ()
    for r in cands:
        i = tuple(np.flatnonzero(x < r.lo - SPLIT_TOL).tolist())
        j = tuple(np.flatnonzero(x > r.hi + SPLIT_TOL).tolist())
        if len(i) >= 2 and len(j) >= 2:
            chosen, set_i, set_j = r.value, i, j
            break
    left_ok, right_ok = _unstable_pair_between(s, float(x.min()), float(x.max()))
    return NfseConditionsReport(chosen, set_i, set_j, left_ok, right_ok,
                                tuple(r.value for r in cands))


@dataclass(frozen=True)
class NfseAdmissibility:
    """Whether ``s`` can support any clustered equilibrium at all."""

    left_unstable: tuple[float, ...]
    right_unstable: tuple[float, ...]

    @property
    def possible(self) -> bool:
        return bool(self.left_unstable and self.right_unstable
                    and min(self.left_unstable) <= max(self.right_unstable))

    def to_dict(self) -> dict:
        return {"left_unstable": list(self.left_unstable),
                "right_unstable": list(self.right_unstable), "possible": self.possible}


def nfse_admissible(s: SignalFunction) -> NfseAdmissibility:
    recs = s.fixed_points
    return NfseAdmissibility(
        tuple(r.hi for r in recs if r.in_left_unstable_set and -1 < r.hi < 1),
        tuple(r.lo for r in recs if r.in_right_unstable_set and -1 < r.lo < 1),
    )


# --- five-vertex path: invariant manifold and bifurcation sweep -------------

_ODD_CACHE: dict[int, bool] = {}


def _require_odd(s: SignalFunction) -> None:
    key = id(s)
    if key not in _ODD_CACHE:
        _ODD_CACHE[key] = is_odd(s)
    if not _ODD_CACHE[key]:
        raise NotOdd(f"{s!r} is not odd")


def reduced_line5_rhs(s: SignalFunction, x1: float, x2: float) -> np.ndarray:
    """Flow on the manifold ``(x1, x2, 0, -x2, -x1)`` of the five-vertex path."""
    _require_odd(s)
    return np.array([float(s(x2)) - x1, float(s(x1)) / 2 - x2])


def embed_line5(x1: float, x2: float) -> np.ndarray:
    return np.array([x1, x2, 0.0, -x2, -x1])


def _reduced_jacobian(s: SignalFunction, x1: float, x2: float) -> np.ndarray:
    d1, d2 = s.derivative(np.array([x1, x2]))
    return np.array([[-1.0, d2], [d1 / 2.0, -1.0]])


_SYM = np.array([[1, 0, 0], [0, 1, 0], [0, 0, np.sqrt(2)], [0, 1, 0], [1, 0, 0]]) / np.sqrt(2)


def _transverse_top(g: Graph, s: SignalFunction, x) -> float:
    """Largest real part of the Jacobian restricted to the mirror-symmetric directions."""
    j = jacobian(g, s, x)
    return float(np.max(np.real(np.linalg.eigvals(_SYM.T @ j @ _SYM))))


def _solve_reduced(s: SignalFunction, guess, tol: float = 1e-13, max_steps: int = 50):
    z = np.array(guess, dtype=float)
    f = reduced_line5_rhs(s, *z)
    for _ in range(max_steps):
        if np.max(np.abs(f)) < tol:
            break
        dz = np.linalg.solve(_reduced_jacobian(s, *z), -f)
        damp = 1.0
        while damp > 1e-6:
            trial = np.clip(z + damp * dz, -1, 1)
            ft = reduced_line5_rhs(s, *trial)
            if np.max(np.abs(ft)) < np.max(np.abs(f)):
                z, f = trial, ft
                break
            damp *= 0.5
        else:
            break
    return z, float(np.max(np.abs(f)))


@dataclass(frozen=True)
class BranchPoint:
    k: float
    branch_id: int
    state: np.ndarray
    stab_full: str
    stab_manifold: str

    @property
    def x1(self) -> float:
        return float(self.state[0])


@dataclass
class BifurcationDiagram:
    gains: np.ndarray
    points: list[BranchPoint]
    detected_k_bif: float | None
    detected_k_stab: float | None
    log: list[str] = field(default_factory=list)

    def branches_at(self, k: float) -> list[BranchPoint]:
        return [p for p in self.points if abs(p.k - k) < 1e-9]

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["K", "branch_id", "x1", "stab_full", "stab_manifold"])
            for p in self.points:
                w.writerow([f"{p.k:.6f}", p.branch_id, repr(p.x1), p.stab_full, p.stab_manifold])

    def summary(self) -> dict:
        return {
            "k_min": float(self.gains[0]), "k_max": float(self.gains[-1]),
            "n_gains": int(self.gains.size),
            "detected_k_bif": self.detected_k_bif,
            "detected_k_stab": self.detected_k_stab,
            "log": list(self.log),
        }

    def write_summary(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


BRANCH_ORIGIN, BRANCH_FSE_POS, BRANCH_FSE_NEG, BRANCH_NFSE_POS, BRANCH_NFSE_NEG = range(5)


def bifurcation_sweep(g: Graph, family: Callable[[float], SignalFunction],
                      k_range: Sequence[float] = (0.5, 3.5), k_step: float = 0.01,
                      refine_tol: float = 1e-4) -> BifurcationDiagram:
    """Continue the equilibrium branches of the five-vertex path in the gain.

    Branches: the origin (0), the synchronized pair ``+/- c 1`` (1, 2) and the
    clustered pair on the invariant manifold (3, 4). Each gain is seeded from
    the previous one. The origin's loss of stability along the manifold and
    the clustered branch's transverse stabilization are located by root
    bracketing to ``refine_tol`` in the gain.

    Raises
    ------
    BranchLost
        If continuation of the clustered branch fails.
    """
    if g != builtin("line", 5):
        raise ContractError("bifurcation_sweep is defined on the five-vertex path only")
    k_lo, k_hi = map(float, k_range)
    if not 0 < k_lo < k_hi:
        raise ContractError(f"bad gain range {k_range}")
    n_k = int(np.floor((k_hi - k_lo) / k_step + 1e-9)) + 1
    gains = np.round(k_lo + k_step * np.arange(n_k), 10)

    def origin_mode(k):
        return float(np.max(np.real(np.linalg.eigvals(_reduced_jacobian(family(k), 0.0, 0.0)))))

    points: list[BranchPoint] = []
    log: list[str] = []
    nfse: np.ndarray | None = None
    nfse_prev_k = None
    trans_hist: list[tuple[float, float, np.ndarray]] = []
    mode_hist: list[tuple[float, float]] = []

    for k in gains:
        s = family(float(k))
        _require_odd(s)
        zero = np.zeros(5)
        full = stability_label(np.linalg.eigvals(jacobian(g, s, zero)))
        mani = stability_label(np.linalg.eigvals(_reduced_jacobian(s, 0.0, 0.0)))
        points.append(BranchPoint(float(k), BRANCH_ORIGIN, zero, full, mani))
        mode_hist.append((float(k), origin_mode(float(k))))

        pos = [r.value for r in s.fixed_points if r.value > 1e-9]
        if pos:
            c = max(pos)
            for bid, sign in ((BRANCH_FSE_POS, 1.0), (BRANCH_FSE_NEG, -1.0)):
                x = np.full(5, sign * c)
                points.append(BranchPoint(float(k), bid, x,
                                          stability_label(np.linalg.eigvals(jacobian(g, s, x))), "n/a"))

        if nfse is None and mode_hist[-1][1] > 0:
            # look for the nonzero root born from the origin
            for amp in (0.02, 0.05, 0.1, 0.2, 0.4, 0.7):
                z, r = _solve_reduced(s, amp * np.array([1.0, np.sqrt(0.5)]))
                if r < 1e-12 and np.max(np.abs(z)) > 1e-6:
                    nfse, nfse_prev_k = np.abs(z), float(k)
                    log.append(f"clustered branch picked up at K={k:.4f}")
                    break
        elif nfse is not None:
            z, r = _solve_reduced(s, nfse)
            if not (r < 1e-12 and np.max(np.abs(z)) > 1e-6):
                raise BranchLost(f"clustered branch lost between K={nfse_prev_k} and K={k}", float(k))
            nfse, nfse_prev_k = z, float(k)
        if nfse is not None:
            x = embed_line5(*nfse)
            if residual(g, s, x) >= EQ_TOL:
                raise BranchLost(f"clustered branch point not an equilibrium at K={k}", float(k))
            full = stability_label(np.linalg.eigvals(jacobian(g, s, x)))
            mani = stability_label(np.linalg.eigvals(_reduced_jacobian(s, *nfse)))
            points.append(BranchPoint(float(k), BRANCH_NFSE_POS, x, full, mani))
            points.append(BranchPoint(float(k), BRANCH_NFSE_NEG, -x, full, mani))
            trans_hist.append((float(k), _transverse_top(g, s, x), nfse.copy()))

    k_bif = None
    for (ka, fa), (kb, fb) in zip(mode_hist, mode_hist[1:]):
        if fa < 0 <= fb:
            k_bif = float(brentq(origin_mode, ka, kb, xtol=refine_tol / 10))
            break

    k_stab = None
    for (ka, ta, za), (kb, tb, _) in zip(trans_hist, trans_hist[1:]):
        if ta > 0 >= tb:
            def transverse(kk, za=za):
                ss = family(kk)
                z, r = _solve_reduced(ss, za)
                if r >= 1e-12:
                    raise BranchLost(f"refinement lost the clustered branch at K={kk}", kk)
                return _transverse_top(g, ss, embed_line5(*z))
            k_stab = float(brentq(transverse, ka, kb, xtol=refine_tol / 10))
            break
    if k_bif is not None:
        log.append(f"origin destabilizes on the manifold at K={k_bif:.6f}")
    if k_stab is not None:
        log.append(f"clustered branch stabilizes transversally at K={k_stab:.6f}")
    return BifurcationDiagram(gains, points, k_bif, k_stab, log)
