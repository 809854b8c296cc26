"""Spectral quadrature helpers: Gauss-Legendre panels with node doubling and
the periodic trapezoid rule.  Everything runs at the ambient mpmath precision;
callers wrap invocations in ``ctx.workprec()``."""

from __future__ import annotations

import math

from mpmath import mp, mpf

_gl_cache: dict[tuple[int, int], tuple[list, list]] = {}


def gauss_legendre_nodes(n: int):
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
    computed by Newton iteration on the Legendre recurrence and cached per
    (n, precision)."""
    key = (n, mp.prec)
    if key in _gl_cache:
        return _gl_cache[key]
    nodes, weights = [], []
    tol = mpf(2) ** (-mp.prec + 8)
    for k in range(1, n + 1):
        # Chebyshev-like seed, then Newton on P_n(x) = 0
        x = mpf(math.cos(math.pi * (k - 0.25) / (n + 0.5)))
        for _ in range(100):
            p0, p1 = mpf(1), x
            for j in range(2, n + 1):
                p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
            dp = n * (x * p1 - p0) / (x * x - 1)
            dx = p1 / dp
            x -= dx
            if abs(dx) < tol:
                break
        p0, p1 = mpf(1), x
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        dp = n * (x * p1 - p0) / (x * x - 1)
        nodes.append(x)
        weights.append(2 / ((1 - x * x) * dp * dp))
    _gl_cache[key] = (nodes, weights)
    return nodes, weights


def gauss_legendre(f, a, b, n: int):
    """n-point Gauss-Legendre approximation of the integral of f over [a, b]."""
    nodes, weights = gauss_legendre_nodes(n)
    mid = (a + b) / 2
    half = (b - a) / 2
    return half * mp.fsum(w * f(mid + half * x) for x, w in zip(nodes, weights))


def adaptive_gauss_legendre(f, a, b, rel_tol, n0: int = 16, max_doublings: int = 12):
    """Doubles the node count until two successive results agree to rel_tol
    (relative to the magnitude of the last result, with an absolute fallback
    for integrals near zero)."""
    n = n0
    prev = gauss_legendre(f, a, b, n)
    for _ in range(max_doublings):
        n *= 2
        cur = gauss_legendre(f, a, b, n)
        scale = max(abs(cur), mpf(1) if cur == 0 else abs(cur))
        if abs(cur - prev) <= rel_tol * scale:
            return cur
        prev = cur
    raise ArithmeticError(
        "quadrature did not reach tolerance %s after %d node doublings"
        % (rel_tol, max_doublings)
    )


def periodic_trapezoid(f, period, n: int):
    """Trapezoid rule for a period-`period` function; spectrally accurate for
    analytic integrands."""
    h = period / n
    return h * mp.fsum(f(k * h) for k in range(n))


def adaptive_periodic_trapezoid(f, period, rel_tol, n0: int = 32, max_doublings: int = 12):
    n = n0
    prev = periodic_trapezoid(f, period, n)
    for _ in range(max_doublings):
        n *= 2
        cur = periodic_trapezoid(f, period, n)
        scale = max(abs(cur), mpf(1) if cur == 0 else abs(cur))
        if abs(cur - prev) <= rel_tol * scale:
            return cur
        prev = cur
    raise ArithmeticError("periodic quadrature did not converge to %s" % rel_tol)


def richardson_even_powers(values, ratio=2):
    """Limit of T(q) = T* + c1/q^2 + c2/q^4 + ... from samples at
    q, ratio*q, ratio^2*q, ...; eliminates successive even powers."""
    level = list(values)
    m = 1
    while len(level) > 1:
        mult = mpf(ratio) ** (2 * m)
        level = [(mult * hi - lo) / (mult - 1) for lo, hi in zip(level[:-1], level[1:])]
        m += 1
    return level[0]
