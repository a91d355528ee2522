"""Integration of ``x' = D^-1 A s(x) - x`` on the hypercube [-1, 1]^N.

Fixed-step classical RK4 throughout. States are clamped to the hypercube
only when a sample is recorded, so the integrator itself is never disturbed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    NonFiniteState,
    OrderPreconditionViolated,
    PreconditionNotChecked,
)
from .graphs import Graph
from .signals import SignalFunction

EQ_TOL = 1e-10
EQ_SAMPLES = 10
BOX_TOL = 1e-9


def rhs(g: Graph, s: SignalFunction, x) -> np.ndarray:
    """Velocity ``D^-1 A s(x) - x``; also accepts a stack of states of shape (B, N)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != g.n:
        raise DimensionMismatch(f"state has {x.shape[-1]} components, graph has {g.n} vertices")
    return s(x) @ g.transition.T - x


def residual(g: Graph, s: SignalFunction, x) -> np.ndarray | float:
    r = np.max(np.abs(rhs(g, s, x)), axis=-1)
    return float(r) if np.ndim(r) == 0 else r


def weighted_mean(degrees: np.ndarray, x: np.ndarray):
    return (x @ degrees) / degrees.sum()


def disagreement(degrees: np.ndarray, x) -> np.ndarray | float:
    """``||x - xbar 1||_D`` with ``xbar`` the degree-weighted mean."""
    x = np.asarray(x, dtype=float)
    e = x - weighted_mean(degrees, x)[..., None]
    out = np.sqrt(np.maximum((e * e) @ degrees, 0.0))
    return float(out) if np.ndim(out) == 0 else out


def rk4_step(g: Graph, s: SignalFunction, x: np.ndarray, dt: float) -> np.ndarray:
    p = g.transition.T

    def f(y):
        return s(y) @ p - y

    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded samples of one integration run.

    ``states`` has shape (T, N). ``stopped_early`` is set when the residual
    stayed below the equilibrium tolerance for the required run of samples.
    """

    times: np.ndarray
    states: np.ndarray
    residuals: np.ndarray
    disagreement: np.ndarray
    stopped_early: bool = False

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def disagreement_overshoot(self) -> float:
        """Largest ``||e(t)||_D / ||e(0)||_D``; 1.0 when the start is synchronized."""
        d0 = self.disagreement[0]
        return float(self.disagreement.max() / d0) if d0 > 0 else 1.0

    def write_csv(self, path) -> None:
        n = self.states.shape[1]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", *[f"x_{i}" for i in range(n)], "residual", "disagreement"])
            for t, x, r, d in zip(self.times, self.states, self.residuals, self.disagreement):
                w.writerow([repr(float(t)), *map(repr, map(float, x)), repr(float(r)), repr(float(d))])


def _check_start(g: Graph, x0) -> np.ndarray:
    x0 = np.array(x0, dtype=float)
    if x0.shape[-1] != g.n:
        raise DimensionMismatch(f"state has {x0.shape[-1]} components, graph has {g.n} vertices")
    if not np.all(np.isfinite(x0)):
        raise NonFiniteState("initial state is not finite")
    if np.any(np.abs(x0) > 1 + BOX_TOL):
        raise ValueError("initial state must lie in [-1, 1]^N")
    return np.clip(x0, -1.0, 1.0)


def _steps(dt: float, t_end: float) -> int:
    if not dt > 0 or not t_end >= dt:
        raise ValueError(f"need dt > 0 and t_end >= dt, got dt={dt}, t_end={t_end}")
    return int(round(t_end / dt))


def integrate(g: Graph, s: SignalFunction, x0, dt: float = 0.01, t_end: float = 200.0,
              record_every: int = 10, early_stop: bool = True) -> Trajectory:
    """Integrate from ``x0`` with fixed-step RK4 and record every ``record_every`` steps.

    Raises
    ------
    NonFiniteState
        If the state blows up (the true flow is bounded, so this signals a bug).
    """
    x = _check_start(g, x0)
    n_steps = _steps(dt, t_end)
    record_every = max(int(record_every), 1)
    deg = g.degrees

    times, states, res, dis = [], [], [], []

    def record(step, y):
        y = np.clip(y, -1.0, 1.0)
        times.append(step * dt)
        states.append(y)
        res.append(residual(g, s, y))
        dis.append(disagreement(deg, y))

    record(0, x)
    calm = 1 if res[-1] < EQ_TOL else 0
    stopped = False
    for step in range(1, n_steps + 1):
        x = rk4_step(g, s, x, dt)
        if step % record_every == 0 or step == n_steps:
            if not np.all(np.isfinite(x)):
                raise NonFiniteState(f"state became non-finite at t={step * dt:g}")
            record(step, x)
            calm = calm + 1 if res[-1] < EQ_TOL else 0
            if early_stop and calm >= EQ_SAMPLES:
                stopped = True
                break
    return Trajectory(np.array(times), np.array(states), np.array(res), np.array(dis), stopped)


def integrate_batch(g: Graph, s: SignalFunction, x0s, dt: float = 0.01, t_end: float = 200.0,
                    tol: float = EQ_TOL, check_every: int = 10) -> np.ndarray:
    """Integrate a stack of starts (B, N) together and return the clamped final states.

    Stops as soon as every member has residual below ``tol``.
    """
    x = _check_start(g, np.atleast_2d(x0s))
    n_steps = _steps(dt, t_end)
    for step in range(1, n_steps + 1):
        x = rk4_step(g, s, x, dt)
        if step % check_every == 0:
            if not np.all(np.isfinite(x)):
                raise NonFiniteState(f"batch state became non-finite at t={step * dt:g}")
            if np.all(residual(g, s, np.clip(x, -1, 1)) < tol):
                break
    return np.clip(x, -1.0, 1.0)


@dataclass(frozen=True)
class OrderCheck:
    ordered: bool
    first_violation_time: float | None

    def __bool__(self):
        return self.ordered


def check_order_preservation(g: Graph, s: SignalFunction, x0_low, x0_high, dt: float = 0.01,
                             t_end: float = 50.0, record_every: int = 10) -> OrderCheck:
    """Integrate two ordered starts side by side and check the order survives."""
    lo = _check_start(g, x0_low)
    hi = _check_start(g, x0_high)
    if np.any(lo > hi):
        raise OrderPreconditionViolated("x0_low must be <= x0_high component-wise")
    x = np.stack([lo, hi])
    for step in range(1, _steps(dt, t_end) + 1):
        x = rk4_step(g, s, x, dt)
        if step % record_every == 0:
            c = np.clip(x, -1.0, 1.0)
            if np.any(c[0] > c[1] + BOX_TOL):
                return OrderCheck(False, step * dt)
    return OrderCheck(True, None)


def check_hypercube_invariance(traj: Trajectory, s: SignalFunction, a: float, b: float) -> bool:
    """True iff every sample of ``traj`` stays in ``[a, b]^N`` (tolerance 1e-9).

    Raises
    ------
    PreconditionNotChecked
        If ``s(a) < a`` or ``s(b) > b``, or the trajectory starts outside the box.
    """
    a, b = float(a), float(b)
    if float(s(np.array(a))) < a - 1e-12 or float(s(np.array(b))) > b + 1e-12:
        raise PreconditionNotChecked(f"[{a}, {b}] is not mapped inward by {s!r}")
    x0 = traj.states[0]
    if np.any(x0 < a - BOX_TOL) or np.any(x0 > b + BOX_TOL):
        raise PreconditionNotChecked("trajectory does not start inside the box")
    return bool(np.all(traj.states >= a - BOX_TOL) and np.all(traj.states <= b + BOX_TOL))
