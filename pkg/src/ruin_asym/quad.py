"""Nested Stieltjes quadrature on ``[0, t]`` and the triangles under it.

Integrals run against a :class:`Measure`: an optional atom at the origin plus
a density on ``(0, inf)``.  The workhorse is :func:`adaptive_simpson`, which
integrates a *batch* of independent 1-d problems at once; each pass
evaluates every unconverged panel with a single vectorized call, so a 3-d
integral costs a few hundred numpy calls rather than millions of python
calls.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

MAX_DEPTH = 40
INITIAL_PANELS = 8
RTOL = 1e-8
ATOL = 1e-10
# tolerance budget for the inner levels of nested integrals
INNER_RTOL = 1e-9

_CHUNK = 4096  # problems per batch slice; bounds peak memory of nested calls


class QuadratureError(ArithmeticError):
    """Raised when a panel still fails its error test at ``MAX_DEPTH``."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@contextlib.contextmanager
def tolerance(rtol: float, inner_rtol: Optional[float] = None):
    """Temporarily override the module tolerances (the CLI ``--quad-tol``)."""
    global RTOL, INNER_RTOL
    saved = RTOL, INNER_RTOL
    RTOL = rtol
    INNER_RTOL = inner_rtol if inner_rtol is not None else rtol / 10
    try:
        yield
    finally:
        RTOL, INNER_RTOL = saved


@dataclass(frozen=True)
class Measure:
    """``mu(du) = atom * delta_0(du) + density(u) du`` on ``[0, inf)``."""

    density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    atom: float = 0.0
    name: str = "measure"

    @classmethod
    def lebesgue(cls) -> "Measure":
        return cls(density=np.ones_like, name="lebesgue")

    @classmethod
    def uniform_rate(cls, rate: float, name: str = "poisson") -> "Measure":
        return cls(density=lambda u: np.full_like(u, rate), name=name)

    @classmethod
    def of_law(cls, law) -> "Measure":
        """The probability measure ``H(ds)`` of a nonnegative law."""
        dens = None if law.atom_at_zero >= 1.0 else law.density
        return cls(density=dens, atom=law.atom_at_zero, name=f"law:{law.family}")


def adaptive_simpson(f, a, b, *, rtol=None, atol=None, panels=INITIAL_PANELS, max_depth=MAX_DEPTH):
    """Integrate ``f`` over ``[a[k], b[k]]`` for every problem ``k``.

    ``f(x, owner)`` receives flat arrays of abscissae and the problem index
    each abscissa belongs to.  Each problem gets the tolerance
    ``max(atol, rtol * |coarse estimate|)`` spread over its initial panels and
    halved on every split.  Returns an array of results.
    """
    rtol = RTOL if rtol is None else rtol
    atol = ATOL if atol is None else atol
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    nprob = a.size
    if nprob > _CHUNK:
        parts = []
        for lo in range(0, nprob, _CHUNK):
            sl = slice(lo, lo + _CHUNK)
            parts.append(adaptive_simpson(lambda x, k, off=lo: f(x, k + off), a[sl], b[sl],
                                          rtol=rtol, atol=atol, panels=panels, max_depth=max_depth))
        return np.concatenate(parts)

    result = np.zeros(nprob)
    if nprob == 0:
        return result
    frac = np.linspace(0.0, 1.0, 2 * panels + 1)
    nodes = a[:, None] + (b - a)[:, None] * frac[None, :]
    owner = np.repeat(np.arange(nprob), frac.size)
    vals = np.asarray(f(nodes.ravel(), owner), dtype=float).reshape(nprob, frac.size)

    lo, mid, hi = nodes[:, 0:-1:2], nodes[:, 1::2], nodes[:, 2::2]
    flo, fmid, fhi = vals[:, 0:-1:2], vals[:, 1::2], vals[:, 2::2]
    whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
    coarse = whole.sum(axis=1)
    budget = np.maximum(atol, rtol * np.abs(coarse)) / panels

    own = np.repeat(np.arange(nprob), panels)
    lo, mid, hi = lo.ravel(), mid.ravel(), hi.ravel()
    flo, fmid, fhi, whole = flo.ravel(), fmid.ravel(), fhi.ravel(), whole.ravel()
    tol = budget[own]
    # degenerate intervals contribute nothing
    keep = hi > lo
    own, lo, mid, hi, flo, fmid, fhi, whole, tol = (
        arr[keep] for arr in (own, lo, mid, hi, flo, fmid, fhi, whole, tol))

    for depth in range(max_depth + 1):
        if own.size == 0:
            return result
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        fv = np.asarray(f(np.concatenate((lm, rm)), np.concatenate((own, own))), dtype=float)
        flm, frm = fv[:own.size], fv[own.size:]
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - whole
        done = np.abs(delta) <= 15.0 * tol
        # panels too small to split further are accepted as they stand
        done |= (mid - lo) <= 4.0 * np.finfo(float).eps * np.maximum(np.abs(mid), 1.0)
        if np.any(done):
            result += np.bincount(own[done], weights=(left + right + delta / 15.0)[done], minlength=nprob)
        if depth == max_depth:
            bad = ~done
            if np.any(bad):
                raise QuadratureError(
                    f"adaptive Simpson did not converge within {max_depth} levels on {int(bad.sum())} panels",
                    float(np.abs(delta[bad]).max()),
                )
            return result
        go = ~done
        own, lo, mid, hi = own[go], lo[go], mid[go], hi[go]
        flo, fmid, fhi, flm, frm = flo[go], fmid[go], fhi[go], flm[go], frm[go]
        left, right, tol = left[go], right[go], 0.5 * tol[go]
        lm, rm = lm[go], rm[go]
        own = np.concatenate((own, own))
        lo, mid, hi = np.concatenate((lo, mid)), np.concatenate((lm, rm)), np.concatenate((mid, hi))
        flo, fmid, fhi = np.concatenate((flo, fmid)), np.concatenate((flm, frm)), np.concatenate((fmid, fhi))
        whole = np.concatenate((left, right))
        tol = np.concatenate((tol, tol))
    return result  # pragma: no cover


def _weighted(f, measure: Measure):
    dens = measure.density
    if dens is None:
        return None
    return lambda x, k: f(x, k) * dens(x)


def _stieltjes_batch(f, measure: Measure, upper, *, rtol):
    """``int_{0-}^{upper[k]} f(u, k) mu(du)`` for every problem ``k``."""
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    k_all = np.arange(upper.size)
    out = np.zeros(upper.size)
    if measure.atom:
        out += measure.atom * np.asarray(f(np.zeros(upper.size), k_all), dtype=float)
    g = _weighted(f, measure)
    if g is not None:
        out += adaptive_simpson(g, np.zeros_like(upper), upper, rtol=rtol)
    return out


def integrate_1d(f, measure: Measure, t: float, *, rtol=None) -> float:
    """``int_{0-}^t f(u) mu(du)``; ``f`` is vectorized in ``u``."""
    if t < 0:
        raise ValueError("horizon t must be nonnegative")
    rtol = RTOL if rtol is None else rtol
    return float(_stieltjes_batch(lambda u, k: f(u), measure, [t], rtol=rtol)[0])


def integrate_triangular_2d(f, measure_u: Measure, measure_v: Measure, t: float, *, rtol=None) -> float:
    """``int_{0-}^t int_{0-}^{t-v} f(u, v) mu_u(du) mu_v(dv)``."""
    if t < 0:
        raise ValueError("horizon t must be nonnegative")
    rtol = RTOL if rtol is None else rtol
    inner_rtol = min(INNER_RTOL, rtol / 10)

    def outer(v, _k):
        return _stieltjes_batch(lambda u, j: f(u, v[j]), measure_u, t - v, rtol=inner_rtol)

    return float(_stieltjes_batch(outer, measure_v, [t], rtol=rtol)[0])


def integrate_triangular_3d(f, measure_u: Measure, measure_s: Measure, measure_v: Measure,
                            t: float, *, rtol=None) -> float:
    """``int_{0-}^t int_{0-}^{t-v} int_{0-}^{t-v} f(u, s, v) mu_s(ds) mu_u(du) mu_v(dv)``."""
    if t < 0:
        raise ValueError("horizon t must be nonnegative")
    rtol = RTOL if rtol is None else rtol
    inner_rtol = min(INNER_RTOL, rtol / 10)

    def middle(u, v):
        return _stieltjes_batch(lambda s, j: f(u[j], s, v[j]), measure_s, t - v, rtol=inner_rtol)

    def outer(v, _k):
        return _stieltjes_batch(lambda u, j: middle(u, v[j]), measure_u, t - v, rtol=inner_rtol)

    return float(_stieltjes_batch(outer, measure_v, [t], rtol=rtol)[0])
