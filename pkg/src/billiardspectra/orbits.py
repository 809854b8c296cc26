"""Birkhoff (p,q)-periodic orbits by the reduced-action method.

A configuration is a lifted tangent-angle sequence x_0 < x_1 < ... with
x_{j+q} = x_j + 2 pi p.  The action is the sum of generating-function pair
terms (chord lengths inside, cut-off areas outside); `problem.sign` is chosen
so that the Birkhoff-minimizing orbit minimizes sign * action over ordered
configurations (inside: maximal perimeter; outside: minimal area).

F(x0) = min over interior points of the signed action with the first point
pinned.  Its minimum over one translational window is the minimizing orbit,
its maximum the minimax orbit; the window 2 pi / q exploits the exact symmetry
of re-pinning the configuration at its next point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from mpmath import mp, mpf

from .precision import RealContext

MINIMIZING = "minimizing"
MINIMAX = "minimax"

FLAG_FLOOR = "precision_floor"
FLAG_CAP = "bits_cap_reached"
FLAG_FAILED = "failed"


def birkhoff_ordered(x_lift, p, q, period):
    """Strictly monotone lift, gaps within one period, and base points visited
    in the cyclic order of the rigid rotation p/q."""
    if len(x_lift) != q:
        return False
    xs = list(x_lift) + [x_lift[0] + p * period]
    for a, b in zip(xs[:-1], xs[1:]):
        if not (0 < b - a < period):
            return False
    base = [x - period * mp.floor(x / period) for x in x_lift]
    order = sorted(range(q), key=lambda j: base[j])
    pos = [0] * q
    for rank, j in enumerate(order):
        pos[j] = rank
    return all((pos[(j + 1) % q] - pos[j]) % q == p % q for j in range(q))


@dataclass(frozen=True)
class PeriodicOrbit:
    p: int
    q: int
    points: tuple          # configuration coordinates (arclength / tangent angle)
    action: object         # physical action: total length or total area
    kind: str              # MINIMIZING or MINIMAX
    grad_norm: object      # max-norm residual of the action gradient
    x_lift: tuple = field(repr=False, default=())   # internal lifted angles

    def phase_points(self, problem):
        """(coordinate, radial) phase points: outgoing incidence angle inside,
        forward tangent distance outside."""
        xs = list(self.x_lift) + [self.x_lift[0] + 2 * mp.pi * self.p]
        out = []
        for j in range(self.q):
            pa = problem.point(xs[j])
            pb = problem.point(xs[j + 1])
            out.append((self.points[j], problem.phase_r(pa, pb, xs[j], xs[j + 1])))
        return out


@dataclass(frozen=True)
class SpectrumRecord:
    p: int
    q: int
    action_min: object
    action_minimax: object
    delta: object
    diagnostics: dict

    @property
    def flags(self):
        return tuple(self.diagnostics.get("flags", ()))


class OrbitError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# interior solve at pinned first point
# ---------------------------------------------------------------------------


def _gaps_ok(xs, gap_max):
    return all(0 < b - a < gap_max for a, b in zip(xs[:-1], xs[1:]))


def _pair_rows(problem, xs):
    """Per-pair derivative rows for a full lifted configuration xs[0..q]."""
    pts = [problem.point(x) for x in xs]
    return [
        problem.pair_derivs(pts[j], pts[j + 1], xs[j], xs[j + 1])
        for j in range(len(xs) - 1)
    ]


def _signed_value(problem, rows):
    return problem.sign * mp.fsum(r[0] for r in rows)


def _interior_state(problem, rows):
    """Gradient and tridiagonal Hessian of the signed action over the interior
    points (first point pinned breaks the cycle, so the Hessian is a path)."""
    sign = problem.sign
    q = len(rows)
    g = [sign * (rows[j - 1][2] + rows[j][1]) for j in range(1, q)]
    diag = [sign * (rows[j - 1][5] + rows[j][3]) for j in range(1, q)]
    off = [sign * rows[j][4] for j in range(1, q - 1)]
    return g, diag, off


def _thomas_solve(diag, off, rhs):
    """Tridiagonal solve; returns None on a nonpositive pivot (not positive
    definite), which triggers Levenberg damping in the caller."""
    n = len(diag)
    c = [mpf(0)] * n
    d = [mpf(0)] * n
    piv = diag[0]
    if not piv > 0:
        return None
    c[0] = off[0] / piv if n > 1 else mpf(0)
    d[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - off[i - 1] * c[i - 1]
        if not piv > 0:
            return None
        if i < n - 1:
            c[i] = off[i] / piv
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / piv
    x = [mpf(0)] * n
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def _interior_newton(problem, xs, gap_max, max_iter=120):
    """Damped Newton minimization of the signed action over xs[1..q-1]."""
    q = len(xs) - 1
    rows = _pair_rows(problem, xs)
    val = _signed_value(problem, rows)
    best_g = None
    stall = 0
    iters = 0
    for iters in range(1, max_iter + 1):
        g, diag, off = _interior_state(problem, rows)
        gnorm = max(abs(v) for v in g) if g else mpf(0)
        scale = 1 + max(abs(v) for v in diag) if diag else mpf(1)
        tol_g = scale * q * mpf(2) ** (-mp.prec + 20)
        if gnorm <= tol_g:
            break
        if best_g is not None and gnorm > best_g / 2:
            stall += 1
            if stall > 6:
                break
        else:
            stall = 0
        best_g = gnorm if best_g is None else min(best_g, gnorm)

        lam = mpf(0)
        step = _thomas_solve(diag, off, [-v for v in g])
        while step is None:
            lam = scale * mpf("0.25") if lam == 0 else lam * 4
            step = _thomas_solve([d + lam for d in diag], off, [-v for v in g])

        t = mpf(1)
        accepted = False
        for _ in range(60):
            trial = list(xs)
            for i in range(1, q):
                trial[i] = xs[i] + t * step[i - 1]
            if _gaps_ok(trial, gap_max):
                trial_rows = _pair_rows(problem, trial)
                trial_val = _signed_value(problem, trial_rows)
                if trial_val < val + abs(val) * mpf(2) ** (-mp.prec + 8):
                    xs[:] = trial
                    rows = trial_rows
                    val = trial_val
                    accepted = True
                    break
            t /= 2
        if not accepted:
            break
    g, diag, _off = _interior_state(problem, rows)
    gnorm = max(abs(v) for v in g) if g else mpf(0)
    return rows, val, gnorm, iters


class _ReducedAction:
    """F(x0): interior-minimized signed action with the first point pinned;
    also exposes the envelope derivative dF/dx0 (the pinned gradient entry)."""

    def __init__(self, problem, p, q, ctx):
        self.problem = problem
        self.p = p
        self.q = q
        self.ctx = ctx
        self.gap_max = mp.pi if problem.kind == "outer" else 2 * mp.pi
        self._warm = None

    def seed(self, x0):
        period_rep = self.problem.period(self.ctx)
        s0 = self.problem.reported_from_internal(x0)
        step_rep = mpf(self.p) * period_rep / self.q
        return [
            self.problem.internal_from_reported(s0 + j * step_rep, self.ctx)
            for j in range(self.q + 1)
        ]

    def __call__(self, x0):
        if self._warm is not None:
            shift = x0 - self._warm[0]
            xs = [x + shift for x in self._warm]
        else:
            xs = self.seed(x0)
        rows, val, gnorm, iters = _interior_newton(
            self.problem, xs, self.gap_max
        )
        self._warm = list(xs)
        sign = self.problem.sign
        pinned = sign * (rows[-1][2] + rows[0][1])   # dF/dx0 by the envelope theorem
        action = mp.fsum(r[0] for r in rows)
        return _Eval(x0, val, pinned, action, tuple(xs), gnorm, iters)


@dataclass
class _Eval:
    x0: object
    value: object      # signed reduced action F(x0)
    dvalue: object     # F'(x0)
    action: object     # physical action
    xs: tuple
    gnorm: object
    iters: int


def constrained_minimum(problem, p, q, s0_fixed, ctx: RealContext):
    """Minimize the signed (p,q)-action over the q-1 free points with the
    first configuration point pinned at s0_fixed; returns the configuration in
    reported coordinates and the physical action."""
    _check_pq(problem, p, q)
    with ctx.workprec():
        red = _ReducedAction(problem, p, q, ctx)
        ev = red(problem.internal_from_reported(mpf(s0_fixed), ctx))
        period_rep = problem.period(ctx)
        config = tuple(
            _mod(problem.reported_from_internal(x), period_rep) for x in ev.xs[:-1]
        )
        return ConstrainedMinimum(config, ev.action, ev.gnorm, ev.iters, ev.xs[:-1])


@dataclass(frozen=True)
class ConstrainedMinimum:
    configuration: tuple
    action: object
    grad_norm: object
    iterations: int
    x_lift: tuple = field(repr=False, default=())


def _mod(x, period):
    return x - period * mp.floor(x / period)


def _check_pq(problem, p, q):
    if math.gcd(p, q) != 1:
        raise ValueError("p and q must be coprime, got (%d, %d)" % (p, q))
    if problem.kind == "inner":
        if not (q >= 2 and 0 < p < q):
            raise ValueError("inner billiard needs q >= 2, 0 < p/q < 1")
    else:
        if not (q >= 3 and 0 < 2 * p < q):
            raise ValueError("outer billiard needs q >= 3, 0 < p/q < 1/2")


# ---------------------------------------------------------------------------
# min / minimax pair
# ---------------------------------------------------------------------------


def _golden(red, a, b, c, want_max, width_target):
    """Golden-section refinement of a bracketed extremum of F; keeps the
    triple (a, b, c) with b the best interior node."""
    invphi = (mp.sqrt(5) - 1) / 2
    sgn = -1 if want_max else 1
    evs = {a.x0: a, b.x0: b, c.x0: c}
    while c.x0 - a.x0 > width_target:
        if b.x0 - a.x0 > c.x0 - b.x0:
            t = c.x0 - invphi * (c.x0 - a.x0)
        else:
            t = a.x0 + invphi * (c.x0 - a.x0)
        et = red(t)
        evs[t] = et
        four = sorted(evs.values(), key=lambda e: e.x0)
        # keep the best three consecutive
        vals = [sgn * e.value for e in four]
        ib = min(range(1, len(four) - 1), key=lambda i: vals[i])
        a, b, c = four[ib - 1], four[ib], four[ib + 1]
        evs = {a.x0: a, b.x0: b, c.x0: c}
    return a, b, c


def _polish(red, a, b, c, want_max, tol_d, max_iter=90):
    """Drive F'(x0) to zero inside (a, c) by secant with bisection fallback.
    F' changes sign across the extremum."""
    sgn = -1 if want_max else 1
    lo, hi = a, c
    cur = b
    prev = a if abs(a.dvalue) < abs(c.dvalue) else c
    best = min((a, b, c), key=lambda e: abs(e.dvalue))
    for _ in range(max_iter):
        if abs(cur.dvalue) <= tol_d:
            return cur
        # maintain sign bracket when available
        if sgn * lo.dvalue < 0 < sgn * hi.dvalue:
            pass
        denom = cur.dvalue - prev.dvalue
        if denom != 0 and cur.x0 != prev.x0:
            t = cur.x0 - cur.dvalue * (cur.x0 - prev.x0) / denom
        else:
            t = (lo.x0 + hi.x0) / 2
        if not (lo.x0 < t < hi.x0):
            t = (lo.x0 + hi.x0) / 2
        if abs(t - cur.x0) <= abs(cur.x0) * mpf(2) ** (-mp.prec + 8) + mpf(2) ** (-mp.prec):
            return best
        et = red(t)
        if sgn * et.dvalue < 0:
            lo = et
        else:
            hi = et
        prev, cur = cur, et
        if abs(et.dvalue) < abs(best.dvalue):
            best = et
        if hi.x0 - lo.x0 <= mpf(2) ** (-mp.prec // 2) * max(1, abs(cur.x0)):
            return best
    return best


def find_orbit_pair(problem, p, q, ctx: RealContext, scan_nodes: int = 32):
    """Minimizing and minimax Birkhoff (p,q)-orbits plus the action gap.

    Scans the reduced action F(x0) over one translational window (period/q) on
    scan_nodes nodes, golden-sections each candidate extremum, then drives the
    envelope derivative F'(x0) to solver_tol by a safeguarded secant.  A flat
    F (range below the working-precision floor) short-circuits to the
    precision-floor path: delta 0 and both orbits from the rigid seed.
    """
    _check_pq(problem, p, q)
    with ctx.workprec():
        red = _ReducedAction(problem, p, q, ctx)
        window = 2 * mp.pi / q
        nodes = []
        flat_floor = None
        for j in range(scan_nodes):
            ev = red(window * j / scan_nodes)
            nodes.append(ev)
            if j == 3:
                scale = max(abs(nodes[0].value), mpf(1))
                flat_floor = scale * q * mpf(2) ** (-mp.prec + 18)
                if max(e.value for e in nodes) - min(e.value for e in nodes) < flat_floor / 4:
                    rest = [red(window * jj / scan_nodes) for jj in (scan_nodes // 2,)]
                    if max(e.value for e in nodes + rest) - min(
                        e.value for e in nodes + rest
                    ) < flat_floor / 4:
                        nodes += rest
                        break
        vmin = min(nodes, key=lambda e: e.value)
        vmax = max(nodes, key=lambda e: e.value)
        scale = max(abs(vmin.value), mpf(1))
        flat_floor = scale * q * mpf(2) ** (-mp.prec + 18)
        flags = []
        if vmax.value - vmin.value < flat_floor:
            flags.append(FLAG_FLOOR)
            omin = _finish_orbit(problem, p, q, ctx, vmin, MINIMIZING)
            omax = _finish_orbit(problem, p, q, ctx, vmin, MINIMAX)
            return OrbitPair(omin, omax, mpf(0), tuple(flags), {
                "scan_nodes": len(nodes), "refined": False})

        tol_d = ctx.solver_tol * q / 2
        width0 = window * mpf("1e-3")
        refined = {}
        for want_max, node in ((False, vmin), (True, vmax)):
            j = nodes.index(node)
            left = nodes[j - 1] if j > 0 else red(node.x0 - window / scan_nodes)
            right = nodes[j + 1] if j + 1 < len(nodes) else red(node.x0 + window / scan_nodes)
            a, b, c = _golden(red, left, node, right, want_max, width0)
            refined[want_max] = _polish(red, a, b, c, want_max, tol_d)

        omin = _finish_orbit(problem, p, q, ctx, refined[False], MINIMIZING)
        omax = _finish_orbit(problem, p, q, ctx, refined[True], MINIMAX)
        delta = abs(omax.action - omin.action)
        a_scale = max(abs(omin.action), mpf(1))
        if delta < a_scale * q * mpf(2) ** (-mp.prec + 18):
            flags.append(FLAG_FLOOR)
            delta = mpf(0)
        diag = {
            "scan_nodes": len(nodes),
            "refined": True,
            "pinned_grad_min": refined[False].dvalue,
            "pinned_grad_minimax": refined[True].dvalue,
        }
        return OrbitPair(omin, omax, delta, tuple(flags), diag)


@dataclass(frozen=True)
class OrbitPair:
    minimizing: PeriodicOrbit
    minimax: PeriodicOrbit
    delta: object
    flags: tuple
    diagnostics: dict


def _finish_orbit(problem, p, q, ctx, ev: _Eval, kind):
    period_rep = problem.period(ctx)
    grad = max(ev.gnorm, abs(ev.dvalue))
    pts = tuple(_mod(problem.reported_from_internal(x), period_rep) for x in ev.xs[:-1])
    orbit = PeriodicOrbit(p, q, pts, ev.action, kind, grad, tuple(ev.xs[:-1]))
    if not birkhoff_ordered(orbit.x_lift, p, q, 2 * mp.pi):
        raise OrbitError("computed (%d,%d) orbit lost Birkhoff ordering" % (p, q))
    return orbit


# ---------------------------------------------------------------------------
# spectra over q
# ---------------------------------------------------------------------------


def delta_spectrum(problem, p, q_list, ctx: RealContext, bits_cap: int = 1024):
    """Batch of (p,q) action-gap records.  The working precision is doubled
    whenever the measured gap falls under 2^-(bits/4) (or under the roundoff
    floor), up to bits_cap; per-record failures are isolated."""
    records = []
    for q in q_list:
        if math.gcd(p, q) != 1:
            raise ValueError("q=%d is not coprime with p=%d" % (q, p))
    for q in q_list:
        records.append(_one_record(problem, p, q, ctx, bits_cap))
    return records


def _one_record(problem, p, q, ctx, bits_cap):
    bits = ctx.mantissa_bits
    requested = bits
    try:
        while True:
            cur = RealContext(bits, ctx.solver_tol_override)
            pair = find_orbit_pair(problem, p, q, cur)
            needs_more = FLAG_FLOOR in pair.flags or pair.delta < cur.delta_floor
            if not needs_more or bits >= bits_cap:
                flags = list(pair.flags)
                if needs_more and bits >= bits_cap and FLAG_FLOOR not in flags:
                    flags.append(FLAG_CAP)
                diag = dict(pair.diagnostics)
                diag.update(
                    bits_requested=requested,
                    bits_used=bits,
                    flags=tuple(flags),
                    grad_min=pair.minimizing.grad_norm,
                    grad_minimax=pair.minimax.grad_norm,
                )
                return SpectrumRecord(
                    p, q, pair.minimizing.action, pair.minimax.action, pair.delta, diag
                )
            bits = min(2 * bits, bits_cap) if 2 * bits > bits else bits_cap
    except (ArithmeticError, ValueError) as exc:
        return SpectrumRecord(
            p, q, mpf("nan"), mpf("nan"), mpf("nan"),
            {"flags": (FLAG_FAILED,), "error": str(exc),
             "bits_requested": requested, "bits_used": bits},
        )


# ---------------------------------------------------------------------------
# vertical graph pair and the action-gap area bound
# ---------------------------------------------------------------------------


@dataclass
class GraphPair:
    p: int
    q: int
    xs: list
    zeta: list
    zeta_hat: list
    area: object
    max_residual: object
    _solver: object = field(repr=False, default=None)

    def zeta_at(self, x):
        return self._solver(x)


def graph_pair(problem, p, q, ctx: RealContext, samples: int | None = None,
               seed_orbit: PeriodicOrbit | None = None):
    """Sampled vertical graphs zeta, zeta_hat with f^q(x, zeta(x)) =
    (x + 2 pi p, zeta_hat(x)), and the symplectic area between them
    (density sin r dr ds inside, r dr dalpha outside)."""
    _check_pq(problem, p, q)
    if samples is None:
        samples = max(64, 6 * q)
    with ctx.workprec():
        two_pi = 2 * mp.pi
        step_tol = mpf(2) ** (-mp.prec + 8)
        mu_tol = two_pi * (1 + p) * q * mpf(2) ** (-mp.prec + 24)

        seed_table = None
        if seed_orbit is not None:
            pts = sorted(
                (_mod(x, two_pi), r)
                for (x, r) in zip(
                    seed_orbit.x_lift,
                    [r for (_c, r) in seed_orbit.phase_points(problem)],
                )
            )
            seed_table = pts

        def seed_r(x):
            if seed_table:
                lo = [(xx, rr) for (xx, rr) in seed_table]
                # linear interpolation on the cyclic table
                for (x0, r0), (x1, r1) in zip(lo, lo[1:] + [(lo[0][0] + two_pi, lo[0][1])]):
                    if x0 <= x <= x1:
                        w = (x - x0) / (x1 - x0) if x1 > x0 else 0
                        return r0 + w * (r1 - r0)
                return lo[0][1]
            return problem.rotation_seed_r(x, mpf(p) / q)

        def advance(x, r):
            xq = x
            rq = r
            for _ in range(q):
                xq, rq = problem.step_lifted(xq, rq, step_tol)
            return xq, rq

        def solve_zeta(x, r0):
            target = x + two_pi * p
            r_scale = max(abs(r0), mpf(1) / q)
            h0 = r_scale * mpf("1e-6")
            ra = r0
            xa, za = advance(x, ra)
            fa = xa - target
            rb = r0 + (h0 if fa < 0 else -h0)
            best = (abs(fa), ra, za)
            for _ in range(80):
                xb, zb = advance(x, rb)
                fb = xb - target
                if abs(fb) < best[0]:
                    best = (abs(fb), rb, zb)
                if abs(fb) <= mu_tol:
                    return rb, zb, abs(fb)
                if fb == fa:
                    break
                rn = rb - fb * (rb - ra) / (fb - fa)
                lo, hi = min(ra, rb), max(ra, rb)
                if fa * fb < 0 and not (lo < rn < hi):
                    rn = (ra + rb) / 2
                if not (rn > 0):
                    rn = rb / 2
                ra, fa = rb, fb
                rb = rn
            if best[0] <= mu_tol * 256:
                return best[1], best[2], best[0]
            raise OrbitError(
                "graph solve diverged at x=%s (residual %s)"
                % (mp.nstr(x, 8), mp.nstr(best[0], 5))
            )

        xs, zs, zh = [], [], []
        max_res = mpf(0)
        r_prev = None
        for i in range(samples):
            x = two_pi * i / samples
            r0 = r_prev if r_prev is not None else seed_r(x)
            r, rhat, res = solve_zeta(x, r0)
            max_res = max(max_res, res)
            xs.append(x)
            zs.append(r)
            zh.append(rhat)
            r_prev = r

        # kink-aware trapezoid of |nu(zeta_hat) - nu(zeta)| with the density
        fs = [
            (problem.nu(zh[i]) - problem.nu(zs[i])) * problem.density_weight(xs[i])
            for i in range(samples)
        ]
        h = two_pi / samples
        area = mpf(0)
        for i in range(samples):
            f0 = fs[i]
            f1 = fs[(i + 1) % samples]
            if f0 * f1 < 0:
                area += h * (f0 * f0 + f1 * f1) / (2 * (abs(f0) + abs(f1)))
            else:
                area += h * (abs(f0) + abs(f1)) / 2

        def solver(x):
            xr = _mod(mpf(x), two_pi)
            r, _rhat, _res = solve_zeta(xr, seed_r(xr))
            return r

        return GraphPair(p, q, xs, zs, zh, area, max_res, solver)
