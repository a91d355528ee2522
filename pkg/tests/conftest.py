import numpy as np
import pytest
from hypothesis import strategies as st

from nlconsensus import signals


@st.composite
def admissible_pwl(draw, max_breaks=8):
    """Monotone piecewise-linear self-map of [-1, 1]."""
    n = draw(st.integers(0, max_breaks))
    inner = draw(st.lists(st.floats(-0.95, 0.95), min_size=n, max_size=n, unique=True))
    xs = np.concatenate([[-1.0], np.sort(inner), [1.0]])
    xs = xs[np.concatenate([[True], np.diff(xs) > 1e-3])]
    xs[-1] = 1.0
    ys = np.sort(draw(st.lists(st.floats(-1.0, 1.0), min_size=xs.size, max_size=xs.size)))
    return signals.piecewise_linear(np.column_stack([xs, ys]).tolist())


@pytest.fixture(scope="session")
def builtin_signals():
    return {
        "tanh2.5": signals.tanh_gain(2.5),
        "tanh0.8": signals.tanh_gain(0.8),
        "clip1.2": signals.clip_linear(1.2),
        "clip0.5": signals.clip_linear(0.5),
        "sinestair": signals.sine_staircase(),
        "staircase": signals.staircase_example(),
    }


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one acceptance line; shown in the terminal summary."""
    def record(tag, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
