"""Hot loops, each with a numba kernel and a pure-numpy twin.

The backend is chosen once from ``RUIN_ASYM_BACKEND`` (``numba`` or
``numpy``; default ``numba`` when it imports).  Every dispatcher also takes
an explicit ``backend=`` so tests and the benchmark can pin either path.
Both paths consume identical inputs, so they agree to rounding.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None


def _default_backend() -> str:
    name = os.environ.get("RUIN_ASYM_BACKEND", "numba" if NUMBA_AVAILABLE else "numpy").lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"RUIN_ASYM_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        return "numpy"
    return name


BACKEND = _default_backend()


def _resolve(backend):
    backend = backend or BACKEND
    if backend == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


def _jit(fn):
    if not NUMBA_AVAILABLE:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# discounted path sums
# ---------------------------------------------------------------------------

@_jit
def _path_sums_loop(tau, counts, claims, delays, byclaims, r, t, with_byclaims):
    m = counts.shape[0]
    out = np.zeros(m)
    pos = 0
    for i in range(m):
        acc = 0.0
        for k in range(counts[i]):
            tk = tau[i, k]
            acc += claims[pos] * np.exp(-r * tk)
            if with_byclaims:
                landed = tk + delays[pos]
                if landed <= t:
                    acc += byclaims[pos] * np.exp(-r * landed)
            pos += 1
        out[i] = acc
    return out


def _path_sums_numpy(tau, counts, claims, delays, byclaims, r, t, with_byclaims):
    m = counts.shape[0]
    live = np.arange(tau.shape[1])[None, :] < counts[:, None]
    tk = tau[live]
    owner = np.repeat(np.arange(m), counts)
    contrib = claims * np.exp(-r * tk)
    if with_byclaims:
        landed = tk + delays
        contrib = contrib + np.where(landed <= t, byclaims * np.exp(-r * landed), 0.0)
    return np.bincount(owner, weights=contrib, minlength=m)


def path_sums(tau, counts, claims, delays=None, byclaims=None, *, r, t, with_byclaims, backend=None):
    """Per-path ``sum_k X_k e^{-r tau_k} (+ Y_k e^{-r(tau_k+D_k)} 1{tau_k+D_k <= t})``.

    ``tau`` is an ``(m, K)`` matrix of arrival times whose first ``counts[i]``
    entries in row ``i`` are ``<= t``; the flat claim arrays hold those
    arrivals in row-major order.
    """
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    claims = np.ascontiguousarray(claims, dtype=float)
    if delays is None:
        delays = np.zeros_like(claims)
    if byclaims is None:
        byclaims = np.zeros_like(claims)
    args = (np.ascontiguousarray(tau, dtype=float), counts, claims,
            np.ascontiguousarray(delays, dtype=float), np.ascontiguousarray(byclaims, dtype=float),
            float(r), float(t), bool(with_byclaims))
    if _resolve(backend) == "numba":
        return _path_sums_loop(*args)
    return _path_sums_numpy(*args)


# ---------------------------------------------------------------------------
# per-path products used by the by-claim identity checks
# ---------------------------------------------------------------------------

@_jit
def _pair_products_loop(counts, hits, weights):
    m = counts.shape[0]
    out = np.zeros(m)
    pos = 0
    for i in range(m):
        a = 0.0
        b = 0.0
        for _ in range(counts[i]):
            a += hits[pos]
            b += weights[pos]
            pos += 1
        out[i] = a * b
    return out


def _pair_products_numpy(counts, hits, weights):
    m = counts.shape[0]
    owner = np.repeat(np.arange(m), counts)
    a = np.bincount(owner, weights=hits, minlength=m)
    b = np.bincount(owner, weights=weights, minlength=m)
    return a * b


def pair_products(counts, hits, weights, *, backend=None):
    """Per path ``(sum_k hits_k) * (sum_i weights_i)`` over that path's arrivals."""
    args = (np.ascontiguousarray(counts, dtype=np.int64),
            np.ascontiguousarray(hits, dtype=float),
            np.ascontiguousarray(weights, dtype=float))
    if _resolve(backend) == "numba":
        return _pair_products_loop(*args)
    return _pair_products_numpy(*args)


# ---------------------------------------------------------------------------
# Stieltjes convolutions on a uniform grid
# ---------------------------------------------------------------------------

@_jit
def _renewal_loop(cdf):
    n = cdf.shape[0]
    d = np.empty(n)
    d[0] = cdf[0]
    for j in range(1, n):
        d[j] = cdf[j] - cdf[j - 1]
    lam = np.zeros(n)
    for i in range(1, n):
        acc = cdf[i] + 0.5 * lam[i - 1] * d[1]
        for j in range(2, i + 1):
            acc += 0.5 * (lam[i - j + 1] + lam[i - j]) * d[j]
        lam[i] = acc / (1.0 - 0.5 * d[1])
    return lam


def _renewal_numpy(cdf):
    n = cdf.shape[0]
    d = np.diff(cdf, prepend=0.0)
    lam = np.zeros(n)
    for i in range(1, n):
        # pairs (lam[i-j+1] + lam[i-j]) for j = 2..i, i.e. reversed neighbours
        head = lam[i - 1:0:-1] + lam[i - 2::-1] if i >= 2 else np.empty(0)
        acc = cdf[i] + 0.5 * lam[i - 1] * d[1] + 0.5 * np.dot(head, d[2:i + 1])
        lam[i] = acc / (1.0 - 0.5 * d[1])
    return lam


def solve_renewal(cdf, *, backend=None):
    """Trapezoidal Stieltjes solution of ``m(t) = F(t) + int_0^t m(t-s) F(ds)``.

    ``cdf`` holds ``F`` on a uniform grid starting at 0 with ``F(0) = 0``.
    """
    cdf = np.ascontiguousarray(cdf, dtype=float)
    if cdf[0] != 0.0:
        raise ValueError("inter-arrival law must not have an atom at zero")
    if _resolve(backend) == "numba":
        return _renewal_loop(cdf)
    return _renewal_numpy(cdf)


@_jit
def _convolve_loop(values, cdf):
    n = values.shape[0]
    out = np.empty(n)
    for i in range(n):
        acc = cdf[0] * values[i]
        for j in range(1, i + 1):
            acc += 0.5 * (values[i - j + 1] + values[i - j]) * (cdf[j] - cdf[j - 1])
        out[i] = acc
    return out


def _convolve_numpy(values, cdf):
    n = values.shape[0]
    d = np.diff(cdf)
    out = np.empty(n)
    for i in range(n):
        pairs = values[i:0:-1] + values[i - 1::-1] if i >= 1 else np.empty(0)
        out[i] = cdf[0] * values[i] + 0.5 * np.dot(pairs, d[:i])
    return out


def stieltjes_convolve(values, cdf, *, backend=None):
    """``out(t_i) = int_{0-}^{t_i} values(t_i - s) H(ds)`` on a uniform grid.

    ``cdf[0]`` is the atom of ``H`` at zero.
    """
    args = (np.ascontiguousarray(values, dtype=float), np.ascontiguousarray(cdf, dtype=float))
    if _resolve(backend) == "numba":
        return _convolve_loop(*args)
    return _convolve_numpy(*args)
