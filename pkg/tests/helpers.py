"""Manufactured scalar models and acceptance bookkeeping shared by the tests."""

from contextlib import contextmanager

import numpy as np

from steadysweep.systems import BoundarySpec, RightCondition, ScalarLaw1D


def scalar(f, df, a, u0, x_R=1.0, right_value=0.0, sonic=0.0, name="manufactured"):
    return ScalarLaw1D(
        name=name, f=f, df=df, a=a, x_L=0.0, x_R=x_R,
        boundary=BoundarySpec(left=lambda al: np.array([u0]), n_alpha=0,
                              right=(RightCondition("u(x_R)", lambda U: U[0] - right_value,
                                                    max(1.0, abs(right_value))),)),
        sonic_value=sonic, params={"right_value": right_value})


def half_square(a, u0, **kw):
    """``f = u^2/2`` with source ``a(u, x)``."""
    return scalar(lambda u: 0.5 * u * u, lambda u: u, a, u0, **kw)


ACCEPTANCE = {}


@contextmanager
def criterion(number, title):
    """Record a PASS/FAIL line for an acceptance criterion.

    The body fills the yielded dict with measured values, which are shown
    next to the verdict.
    """
    measured = {}
    try:
        yield measured
    except BaseException as exc:
        msg = f"{type(exc).__name__}: {exc}".splitlines()[0][:160]
        ACCEPTANCE[number] = ("FAIL", title, f"{_fmt(measured)} {msg}".strip())
        raise
    ACCEPTANCE[number] = ("PASS", title, _fmt(measured))


def _fmt(measured):
    parts = []
    for k, v in measured.items():
        if isinstance(v, float):
            v = f"{v:.4g}"
        elif isinstance(v, (list, tuple)):
            v = "[" + ", ".join(f"{x:.3g}" if isinstance(x, float) else str(x) for x in v) + "]"
        parts.append(f"{k}={v}")
    return " ".join(parts)


def acceptance_lines():
    return [f"[{v[0]}] {k:>2}. {v[1]}: {v[2]}" for k, v in sorted(ACCEPTANCE.items())]
