"""Admissible signal functions and the classification of their fixed points.

A signal function maps [-1, 1] into itself, is non-decreasing and
K-Lipschitz. Everything here works from point evaluations, so user-supplied
evaluators are handled the same way as the built-in families.

Slope convention at kinks: the larger one-sided derivative inside [-1, 1]
(at x = 1 only the left derivative exists, at x = -1 only the right one).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import AssumptionViolation, ConfigParseError, NotAFixedPoint

VALIDATION_POINTS = 10_001
SEARCH_STEP = 1e-3
ZERO_TOL = 1e-12
FIXED_TOL = 1e-10
PROBE_OFFSETS = tuple(10.0 ** -k for k in range(2, 9))


@dataclass(frozen=True, eq=False)
class SignalFunction:
    """Vectorised scalar map with a declared Lipschitz constant.

    ``lipschitz_k`` is what the threshold formulas use; the grid estimate from
    :func:`validate_assumptions` is only a check on it.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    lipschitz_k: float
    family_tag: str = "custom"
    params: dict = field(default_factory=dict)
    slope: Callable[[np.ndarray], np.ndarray] | None = None
    kinks: tuple[float, ...] = ()

    def __call__(self, x):
        return self.evaluate(np.asarray(x, dtype=float))

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items() if k != "points")
        return f"SignalFunction({self.family_tag}{', ' + args if args else ''})"

    @property
    def has_slope(self) -> bool:
        return self.slope is not None

    def derivative(self, x):
        if self.slope is None:
            raise AttributeError(f"{self!r} has no slope")
        return self.slope(np.asarray(x, dtype=float))

    def near_kink(self, x, tol: float = 1e-6) -> bool:
        if not self.kinks:
            return False
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.any(np.abs(x[:, None] - np.asarray(self.kinks)[None, :]) < tol))

    @cached_property
    def fixed_points(self) -> tuple["FixedPointRecord", ...]:
        return tuple(find_fixed_points(self))

    def describe(self) -> str:
        if self.family_tag == "tanh_gain":
            return f"tanh:K={self.params['k']}"
        if self.family_tag == "clip_linear":
            return f"clip:K={self.params['k']}"
        if self.family_tag == "sine_staircase":
            return "sinestair"
        if self.family_tag == "piecewise_linear":
            return "pwl:" + json.dumps(self.params["points"])
        return self.family_tag


# --- built-in families ------------------------------------------------------

def tanh_gain(k: float) -> SignalFunction:
    """``x -> tanh(k x)``."""
    k = float(k)
    return SignalFunction(
        evaluate=lambda x: np.tanh(k * x),
        lipschitz_k=k,
        family_tag="tanh_gain",
        params={"k": k},
        slope=lambda x: k / np.cosh(k * x) ** 2,
    )


def clip_linear(k: float) -> SignalFunction:
    """``x -> max(-1, min(1, k x))``; slope ``k`` on the linear part and at the kinks."""
    k = float(k)
    knee = 1.0 / k

    def slope(x):
        return np.where(np.abs(x) <= knee * (1 + 1e-15), k, 0.0)

    return SignalFunction(
        evaluate=lambda x: np.clip(k * x, -1.0, 1.0),
        lipschitz_k=k,
        family_tag="clip_linear",
        params={"k": k},
        slope=slope,
        kinks=(-knee, knee) if knee < 1.0 else (),
    )


def sine_staircase(alpha: float = 2 * math.pi) -> SignalFunction:
    """``x -> x - min(sin(a x), sin(a x + pi)) / a``, i.e. ``x + |sin(a x)| / a``.

    With ``a = 2 pi`` every multiple of 1/2 is a fixed point approached only
    from below.
    """
    alpha = float(alpha)

    def evaluate(x):
        return x - np.minimum(np.sin(alpha * x), np.sin(alpha * x + np.pi)) / alpha

    def slope(x):
        x = np.asarray(x, dtype=float)
        sn, cs = np.sin(alpha * x), np.cos(alpha * x)
        out = 1.0 + np.sign(sn) * cs
        at_kink = np.abs(sn) < 1e-12
        upper = 1.0 + np.abs(cs)
        left_only = 1.0 - np.abs(cs)
        kink_val = np.where(x >= 1.0, left_only, upper)
        return np.where(at_kink, kink_val, out)

    n_k = int(math.floor(alpha / math.pi + 1e-9))
    kinks = tuple(j * math.pi / alpha for j in range(-n_k, n_k + 1))
    return SignalFunction(
        evaluate=evaluate,
        lipschitz_k=2.0,
        family_tag="sine_staircase",
        params={"alpha": alpha},
        slope=slope,
        kinks=kinks,
    )


def piecewise_linear(points: Sequence[Sequence[float]]) -> SignalFunction:
    """Linear interpolation through ``[x, y]`` pairs with ascending ``x``.

    The first and last ``x`` must be -1 and 1; the ``y`` values must be
    non-decreasing (checked here, not deferred to validation).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise AssumptionViolation("piecewise_linear needs at least two [x, y] pairs")
    xs, ys = pts[:, 0].copy(), pts[:, 1].copy()
    if np.any(np.diff(xs) <= 0):
        raise AssumptionViolation("breakpoints must be strictly ascending")
    if abs(xs[0] + 1) > 1e-12 or abs(xs[-1] - 1) > 1e-12:
        raise AssumptionViolation("breakpoints must span [-1, 1]")
    if np.any(np.diff(ys) < 0):
        raise AssumptionViolation("piecewise_linear values must be non-decreasing")
    seg = np.diff(ys) / np.diff(xs)
    k = float(seg.max())

    def slope(x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, seg.size - 1)
        out = seg[idx]
        # at an interior breakpoint take the larger neighbouring slope
        hit = np.isclose(x[..., None], xs[1:-1], rtol=0, atol=1e-15)
        if hit.any():
            b = np.argmax(hit, axis=-1)
            upper = np.maximum(seg[b], seg[b + 1])
            out = np.where(hit.any(axis=-1), upper, out)
        return out

    return SignalFunction(
        evaluate=lambda x: np.interp(x, xs, ys),
        lipschitz_k=max(k, 1e-12),
        family_tag="piecewise_linear",
        params={"points": pts.tolist()},
        slope=slope,
        kinks=tuple(xs[1:-1].tolist()),
    )


def staircase_example() -> SignalFunction:
    """Monotone piecewise-linear map with stable fixed points -0.7, 0.3, 0.85
    and unstable ones -0.5, 0.7."""
    return piecewise_linear([
        [-1.0, -0.7], [-0.7, -0.7], [-0.6, -0.7], [-0.5, -0.5], [-0.4, 0.2],
        [0.2, 0.3], [0.3, 0.3], [0.65, 0.5], [0.7, 0.7], [0.75, 0.85],
        [0.85, 0.85], [1.0, 0.85],
    ])


def custom(fn: Callable, lipschitz_k: float, slope: Callable | None = None,
           name: str = "custom") -> SignalFunction:
    return SignalFunction(evaluate=fn, lipschitz_k=float(lipschitz_k), family_tag="custom",
                          params={"name": name}, slope=slope)


def is_odd(s: SignalFunction, tol: float = 1e-10) -> bool:
    x = np.linspace(0.0, 1.0, VALIDATION_POINTS // 2 + 1)
    return bool(np.max(np.abs(s(-x) + s(x))) < tol)


def from_spec(spec: str, k: float | None = None) -> SignalFunction:
    """Parse ``tanh:K=2.5``, ``clip:K=1.2``, ``pwl:file=path.json`` or ``sinestair``.

    ``k`` overrides the gain of the tanh and clip families.
    """
    head, _, rest = spec.partition(":")
    opts = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigParseError(f"bad signal option {item!r} in {spec!r}")
        opts[key.strip().lower()] = val.strip()
    try:
        if head in ("tanh", "clip"):
            gain = float(k) if k is not None else float(opts["k"])
            return tanh_gain(gain) if head == "tanh" else clip_linear(gain)
        if head == "sinestair":
            return sine_staircase()
        if head == "pwl":
            return piecewise_linear(json.loads(Path(opts["file"]).read_text()))
    except KeyError as exc:
        raise ConfigParseError(f"signal spec {spec!r} is missing option {exc}") from None
    except (ValueError, OSError) as exc:
        raise ConfigParseError(f"cannot parse signal spec {spec!r}: {exc}") from None
    raise ConfigParseError(f"unknown signal family {head!r}")


# --- assumption checks ------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    range_ok: bool
    monotone_ok: bool
    lipschitz_ok: bool
    estimated_lipschitz: float
    underestimation: bool
    overestimation: bool

    @property
    def passed(self) -> bool:
        return self.range_ok and self.monotone_ok and self.lipschitz_ok

    def to_dict(self) -> dict:
        return {**self.__dict__, "passed": self.passed}


def validate_assumptions(s: SignalFunction) -> ValidationReport:
    x = np.linspace(-1.0, 1.0, VALIDATION_POINTS)
    y = s(x)
    dy, dx = np.diff(y), np.diff(x)
    est = float(np.max(np.abs(dy) / dx))
    g = x * (y - x)
    return ValidationReport(
        range_ok=bool(np.all(np.isfinite(y)) and y.min() >= -1.0 and y.max() <= 1.0),
        monotone_ok=bool(np.all(dy >= -1e-12)),
        lipschitz_ok=bool(np.all(np.abs(dy) <= s.lipschitz_k * dx * (1 + 1e-9))),
        estimated_lipschitz=est,
        underestimation=bool(np.all(g <= ZERO_TOL)),
        overestimation=bool(np.all(g >= -ZERO_TOL)),
    )


# --- fixed points -----------------------------------------------------------

@dataclass(frozen=True)
class FixedPointRecord:
    """A fixed point (``lo == hi``) or a continuum ``[lo, hi]`` of fixed points.

    Sides outside [-1, 1] count as stable.
    """

    lo: float
    hi: float
    left_stable: bool
    right_stable: bool

    @property
    def value(self) -> float:
        return self.lo if self.lo == self.hi else 0.5 * (self.lo + self.hi)

    @property
    def is_interval(self) -> bool:
        return self.hi > self.lo

    @property
    def classification(self) -> str:
        if self.left_stable and self.right_stable:
            return "stable"
        if not self.left_stable and not self.right_stable:
            return "unstable"
        return "semi_stable"

    @property
    def stable(self) -> bool:
        return self.classification == "stable"

    @property
    def in_left_unstable_set(self) -> bool:
        return not self.left_stable

    @property
    def in_right_unstable_set(self) -> bool:
        return not self.right_stable

    def to_dict(self) -> dict:
        d = {"value": self.value} if not self.is_interval else {"interval": [self.lo, self.hi]}
        d.update(left_stable=self.left_stable, right_stable=self.right_stable,
                 classification=self.classification)
        return d


def _bisect(g, a, b, ga, tol=ZERO_TOL):
    while b - a > tol:
        m = 0.5 * (a + b)
        gm = g(m)
        if gm == 0.0:
            return m
        if (gm > 0) == (ga > 0):
            a, ga = m, gm
        else:
            b = m
    return 0.5 * (a + b)


def _locate_zeros(s: SignalFunction) -> list[tuple[float, float]]:
    """Zeros of ``s(x) - x`` as ``(lo, hi)`` pairs, ascending and non-overlapping."""
    def g(x):
        return float(s(np.array(x)) - x)

    xs = np.linspace(-1.0, 1.0, int(round(2.0 / SEARCH_STEP)) + 1)
    gs = s(xs) - xs
    zero = np.abs(gs) < ZERO_TOL
    found: list[tuple[float, float]] = []

    k, n = 0, xs.size
    while k < n:
        if not zero[k]:
            k += 1
            continue
        j = k
        while j + 1 < n and zero[j + 1]:
            j += 1
        if j > k:
            lo, hi = xs[k], xs[j]
            if k > 0:
                a, b = xs[k - 1], xs[k]
                while b - a > ZERO_TOL:
                    m = 0.5 * (a + b)
                    a, b = (a, m) if abs(g(m)) < ZERO_TOL else (m, b)
                lo = b
            if j < n - 1:
                a, b = xs[j], xs[j + 1]
                while b - a > ZERO_TOL:
                    m = 0.5 * (a + b)
                    a, b = (m, b) if abs(g(m)) < ZERO_TOL else (a, m)
                hi = a
            found.append((float(lo), float(hi)))
        else:
            found.append((float(xs[k]), float(xs[k])))
        k = j + 1

    for i in range(n - 1):
        if zero[i] or zero[i + 1]:
            continue
        if gs[i] * gs[i + 1] < 0:
            c = _bisect(g, xs[i], xs[i + 1], gs[i])
            found.append((c, c))

    # tangential touches: |g| has a small local minimum with no sign change
    ag = np.abs(gs)
    for i in range(1, n - 1):
        if zero[i - 1] or zero[i] or zero[i + 1]:
            continue
        if not (ag[i] <= ag[i - 1] and ag[i] <= ag[i + 1] and ag[i] < 1e-3):
            continue
        if gs[i - 1] * gs[i] < 0 or gs[i] * gs[i + 1] < 0:
            continue
        res = minimize_scalar(lambda t: abs(g(t)), bounds=(xs[i - 1], xs[i + 1]),
                              method="bounded", options={"xatol": 1e-14})
        if abs(g(res.x)) < FIXED_TOL:
            found.append((float(res.x), float(res.x)))
    for end in (0, n - 1):
        if not zero[end] and abs(gs[end]) < FIXED_TOL:
            found.append((float(xs[end]), float(xs[end])))

    found.sort()
    merged: list[tuple[float, float]] = []
    for lo, hi in found:
        if merged and lo <= merged[-1][1] + 1e-9:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def _side_unstable(s: SignalFunction, c: float, direction: int, limit: float) -> bool:
    """True iff every valid probe on one side of ``c`` is repelled from ``c``.

    Probes ``c + direction * delta`` are clipped to [-1, 1] and kept only when
    strictly between ``c`` and ``limit`` (the next fixed point or the domain
    edge, which is allowed when no fixed point sits there).
    """
    probes = set()
    for delta in PROBE_OFFSETS:
        x = min(1.0, max(-1.0, c + direction * delta))
        if direction > 0 and c < x < limit:
            probes.add(x)
        elif direction < 0 and limit < x < c:
            probes.add(x)
    if not probes:
        return False
    xs = np.array(sorted(probes))
    g = s(xs) - xs
    return bool(np.all(direction * g > 0))


def _classify_zeros(s: SignalFunction, zeros: list[tuple[float, float]]) -> list[FixedPointRecord]:
    records = []
    for idx, (lo, hi) in enumerate(zeros):
        left_limit = zeros[idx - 1][1] if idx > 0 else -1.0 - 1e-300
        right_limit = zeros[idx + 1][0] if idx + 1 < len(zeros) else 1.0 + 1e-300
        # the domain edge itself may be probed when it is not a fixed point
        if idx == 0:
            left_limit = -1.0 - 1.0
        if idx + 1 == len(zeros):
            right_limit = 1.0 + 1.0
        left_unstable = lo > -1.0 and _side_unstable(s, lo, -1, left_limit)
        right_unstable = hi < 1.0 and _side_unstable(s, hi, +1, right_limit)
        records.append(FixedPointRecord(lo, hi, not left_unstable, not right_unstable))
    return records


def find_fixed_points(s: SignalFunction) -> list[FixedPointRecord]:
    """All fixed points of ``s`` on [-1, 1], sorted ascending and classified.

    Raises
    ------
    AssumptionViolation
        If ``s`` fails the range, monotonicity or Lipschitz checks.
    """
    report = validate_assumptions(s)
    if not report.passed:
        raise AssumptionViolation(f"{s!r} is not admissible: {report.to_dict()}", report)
    return _classify_zeros(s, _locate_zeros(s))


def classify_fixed_point(s: SignalFunction, c: float) -> FixedPointRecord:
    """One-sided stability of a single fixed point by the probe ladder.

    A side is unstable iff ``s(x) - x`` pushes away from ``c`` at every probe
    ``c -/+ 10^-j`` (j = 2..8) lying strictly between ``c`` and the nearest
    other fixed point.
    """
    c = float(c)
    if not -1.0 <= c <= 1.0 or abs(float(s(np.array(c))) - c) >= FIXED_TOL:
        raise NotAFixedPoint(f"s({c}) != {c}")
    zeros = _locate_zeros(s)
    for lo, hi in zeros:
        if lo - 1e-9 <= c <= hi + 1e-9 and hi > lo:
            if lo + 1e-9 < c < hi - 1e-9:
                return FixedPointRecord(c, c, True, True)
            break
    others_left = [hi for lo, hi in zeros if hi < c - 1e-9]
    others_right = [lo for lo, hi in zeros if lo > c + 1e-9]
    left_limit = max(others_left) if others_left else -2.0
    right_limit = min(others_right) if others_right else 2.0
    left_unstable = c > -1.0 and _side_unstable(s, c, -1, left_limit)
    right_unstable = c < 1.0 and _side_unstable(s, c, +1, right_limit)
    return FixedPointRecord(c, c, not left_unstable, not right_unstable)


def successive_boxes(s: SignalFunction) -> list[tuple[float, float]]:
    """Intervals ``[a, b]`` between consecutive fixed-point records."""
    recs = s.fixed_points
    return [(recs[i].hi, recs[i + 1].lo) for i in range(len(recs) - 1)]
