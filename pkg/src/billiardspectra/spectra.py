"""Experiment layer: exponential fits of action gaps, the q^-2 asymptotics of
lengths (inner) and areas (outer), boundary-flattening coordinates, and the
construction of Fourier-Taylor map series for the inner billiard.
"""

from __future__ import annotations

from dataclasses import dataclass

from mpmath import mp, mpf, mpc

from .billiard import InnerBilliard, OuterBilliard
from .curves import FourierCurve, curvature_power_integral
from .normal_form import FourierTaylorSeries, MapSeries
from .orbits import FLAG_FAILED, FLAG_FLOOR, constrained_minimum
from .precision import RealContext, to_mpf
from .quadrature import richardson_even_powers

_DEFAULT_CTX = RealContext()


# ---------------------------------------------------------------------------
# exponential-decay fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentialFit:
    alpha: object        # exponent in delta ~ K exp(-2 pi alpha x)
    log_k: object        # natural log of the prefactor
    r_squared: object
    n_points: int
    abscissa: str        # "q/p" or "q/|np-mq|"


def fit_exponential(records, p, resonance=None, ctx: RealContext = _DEFAULT_CTX):
    """Least squares of log delta against the resonance abscissa.

    Model: log delta = log K - 2 pi alpha x with x = q/p, or x = q/|np - mq|
    when a resonance (m, n) is supplied.  Records at the precision floor (or
    failed) are excluded; fewer than four usable records is an error.
    """
    with ctx.workprec():
        xs, ys = [], []
        for rec in records:
            flags = rec.flags if hasattr(rec, "flags") else ()
            if FLAG_FLOOR in flags or FLAG_FAILED in flags:
                continue
            delta = to_mpf(rec.delta)
            if not delta > 0:
                continue
            if resonance is None:
                x = mpf(rec.q) / p
                label = "q/p"
            else:
                m, n = resonance
                denom = abs(n * rec.p - m * rec.q)
                if denom == 0:
                    continue
                x = mpf(rec.q) / denom
                label = "q/|np-mq|"
            xs.append(x)
            ys.append(mp.log(delta))
        if len(xs) < 4:
            raise ValueError(
                "need at least 4 records above the precision floor, got %d" % len(xs)
            )
        n = len(xs)
        xbar = mp.fsum(xs) / n
        ybar = mp.fsum(ys) / n
        sxx = mp.fsum((x - xbar) ** 2 for x in xs)
        sxy = mp.fsum((x - xbar) * (y - ybar) for x, y in zip(xs, ys))
        slope = sxy / sxx
        intercept = ybar - slope * xbar
        ss_res = mp.fsum((y - (intercept + slope * x)) ** 2 for x, y in zip(xs, ys))
        ss_tot = mp.fsum((y - ybar) ** 2 for y in ys)
        r2 = 1 - ss_res / ss_tot if ss_tot > 0 else mpf(1)
        alpha = -slope / (2 * mp.pi)
        return ExponentialFit(alpha, intercept, r2, n, label)


def synthetic_records(p, q_list, alpha, log_k, ctx: RealContext = _DEFAULT_CTX):
    """Records following the exact model (for fit self-tests)."""
    from .orbits import SpectrumRecord

    with ctx.workprec():
        out = []
        for q in q_list:
            delta = mp.e ** (to_mpf(log_k) - 2 * mp.pi * to_mpf(alpha) * mpf(q) / p)
            out.append(SpectrumRecord(p, q, mpf(0), delta, delta, {"flags": ()}))
        return out


# ---------------------------------------------------------------------------
# length asymptotics (inner)
# ---------------------------------------------------------------------------


def marvizi_melrose_l1(curve: FourierCurve, p: int, ctx: RealContext = _DEFAULT_CTX):
    """Leading 1/q^2 coefficient of the (p,q) length spectrum:
    -(1/24) (p * integral of curvature^(2/3) ds)^3."""
    with ctx.workprec():
        i23 = curvature_power_integral(curve, mpf(2) / 3, ctx)
        return -((p * i23) ** 3) / 24


def l1_empirical(curve: FourierCurve, p: int, q_list, ctx: RealContext = _DEFAULT_CTX):
    """Richardson extrapolation of q^2 (L(p,q) - p Length) over a geometric
    q-progression (the expansion is in even powers of 1/q)."""
    _check_geometric(q_list)
    prob = InnerBilliard(curve)
    with ctx.workprec():
        L = curve.total_length(ctx)
        samples = []
        for q in q_list:
            res = constrained_minimum(prob, p, q, mpf(0), ctx)
            samples.append(mpf(q) ** 2 * (res.action - p * L))
        return richardson_even_powers(samples, ratio=q_list[1] // q_list[0])


def _check_geometric(q_list):
    if len(q_list) < 2:
        raise ValueError("need at least two q values")
    r = q_list[1] / q_list[0]
    if int(r) != r or any(b != a * int(r) for a, b in zip(q_list[:-1], q_list[1:])):
        raise ValueError("q_list must be a geometric progression for Richardson")


# ---------------------------------------------------------------------------
# area asymptotics (outer)
# ---------------------------------------------------------------------------


def tabachnikov_a1(curve: FourierCurve, ctx: RealContext = _DEFAULT_CTX):
    """Leading 1/q^2 coefficient of the (1,q) area spectrum, implemented as
    (1/24) (integral of curvature^(1/3) ds)^3.

    The uncubed variant (1/24) * integral (see a1_uncubed) disagrees with the
    exact circumscribed-polygon expansion of the circle, which this form
    reproduces; both are reported by the CLI."""
    with ctx.workprec():
        i13 = curvature_power_integral(curve, mpf(1) / 3, ctx)
        return (i13 ** 3) / 24


def a1_uncubed(curve: FourierCurve, ctx: RealContext = _DEFAULT_CTX):
    """(1/24) integral of curvature^(1/3) ds, kept for comparison; see
    tabachnikov_a1."""
    with ctx.workprec():
        return curvature_power_integral(curve, mpf(1) / 3, ctx) / 24


def a1_empirical(curve: FourierCurve, q_list, ctx: RealContext = _DEFAULT_CTX):
    """Richardson extrapolation of q^2 (A(1,q) - Area) over a geometric
    progression; the circumscribed (1,q) area minus the enclosed area equals
    the summed cut-off-area action of the orbit."""
    _check_geometric(q_list)
    prob = OuterBilliard(curve)
    with ctx.workprec():
        samples = []
        for q in q_list:
            res = constrained_minimum(prob, 1, q, mpf(0), ctx)
            samples.append(mpf(q) ** 2 * res.action)
        return richardson_even_powers(samples, ratio=q_list[1] // q_list[0])


# ---------------------------------------------------------------------------
# boundary-flattening coordinates
# ---------------------------------------------------------------------------


def lazutkin_coords(curve: FourierCurve, s, r, ctx: RealContext = _DEFAULT_CTX):
    """(x, y) with x = k integral_0^s rho^(-2/3) dt in [0,1) and
    y = 4 k rho^(1/3)(s) sin(r/2); k normalizes one full turn to x = 1."""
    with ctx.workprec():
        s = to_mpf(s)
        r = to_mpf(r)
        phi = curve.phi_from_arclength(s, ctx)
        third = mpf(1) / 3
        Q = curve._tables().power_total(third)
        x = curve.power_antiderivative(third, phi, ctx) / Q
        rho = curve.rho_raw(phi)
        y = 4 * rho ** third * mp.sin(r / 2) / Q
        return (x, y)


def lazutkin_inverse(curve: FourierCurve, x, y, ctx: RealContext = _DEFAULT_CTX):
    with ctx.workprec():
        x = to_mpf(x)
        y = to_mpf(y)
        third = mpf(1) / 3
        Q = curve._tables().power_total(third)
        phi = _invert_power_antiderivative(curve, third, x * Q, ctx)
        rho = curve.rho_raw(phi)
        r = 2 * mp.asin(Q * y / (4 * rho ** third))
        return (curve.arclength(phi, ctx), r)


def tabachnikov_coords(curve: FourierCurve, alpha, r, ctx: RealContext = _DEFAULT_CTX):
    """(x, y) with x = k integral_0^alpha curvature^(-2/3) dv in [0,1) and
    y = 2 k curvature^(1/3)(alpha) r."""
    with ctx.workprec():
        alpha = to_mpf(alpha)
        r = to_mpf(r)
        e = mpf(2) / 3
        Q = curve._tables().power_total(e)
        x = curve.power_antiderivative(e, alpha, ctx) / Q
        y = 2 * r / (curve.rho_raw(alpha) ** (mpf(1) / 3) * Q)
        return (x, y)


def tabachnikov_inverse(curve: FourierCurve, x, y, ctx: RealContext = _DEFAULT_CTX):
    with ctx.workprec():
        x = to_mpf(x)
        y = to_mpf(y)
        e = mpf(2) / 3
        Q = curve._tables().power_total(e)
        alpha = _invert_power_antiderivative(curve, e, x * Q, ctx)
        r = y * curve.rho_raw(alpha) ** (mpf(1) / 3) * Q / 2
        return (alpha, r)


def _invert_power_antiderivative(curve, exponent, target, ctx):
    """Newton inversion of the monotone map phi -> integral_0^phi rho^e."""
    tab = curve._tables()
    total = tab.power_total(exponent)
    wraps = mp.floor(target / total)
    t_red = target - wraps * total
    lo, hi = mpf(0), 2 * mp.pi
    phi = 2 * mp.pi * t_red / total
    tol = mpf(2) ** (-mp.prec + 8)
    for _ in range(200):
        val = tab.power_antiderivative(exponent, phi) - t_red
        dval = mp.power(curve.rho_raw(phi), exponent)
        if val > 0:
            hi = phi
        else:
            lo = phi
        step = val / dval
        if abs(step) <= tol * max(1, abs(phi)):
            break
        nxt = phi - step
        if not (lo < nxt < hi):
            nxt = (lo + hi) / 2
        phi = nxt
    return phi + wraps * 2 * mp.pi


# ---------------------------------------------------------------------------
# series coordinates and the fitted billiard map series
# ---------------------------------------------------------------------------


def series_coords(curve: FourierCurve, phi, r, ctx: RealContext = _DEFAULT_CTX):
    """Angle-linear variant of the flattening coordinates used for the map
    series: x as in lazutkin_coords, y = 2 rho^(1/3)(phi) r / Q.  Linear in r,
    so the circle map becomes exactly (x, y) -> (x + y, y)."""
    with ctx.workprec():
        third = mpf(1) / 3
        tab = curve._tables()
        Q = tab.power_total(third)
        x = tab.power_antiderivative(third, to_mpf(phi)) / Q
        y = 2 * curve.rho_raw(to_mpf(phi)) ** third * to_mpf(r) / Q
        return (x, y)


def _lu_factor(a):
    n = len(a)
    lu = [row[:] for row in a]
    piv = list(range(n))
    for c in range(n):
        pr = max(range(c, n), key=lambda i: abs(lu[i][c]))
        if pr != c:
            lu[c], lu[pr] = lu[pr], lu[c]
            piv[c], piv[pr] = piv[pr], piv[c]
        for i in range(c + 1, n):
            f = lu[i][c] / lu[c][c]
            lu[i][c] = f
            for j in range(c + 1, n):
                lu[i][j] -= f * lu[c][j]
    return lu, piv


def _lu_solve(lu, piv, rhs):
    n = len(lu)
    x = [rhs[p] for p in piv]
    for i in range(1, n):
        for j in range(i):
            x[i] -= lu[i][j] * x[j]
    for i in range(n - 1, -1, -1):
        for j in range(i + 1, n):
            x[i] -= lu[i][j] * x[j]
        x[i] /= lu[i][i]
    return x


def billiard_map_series(curve: FourierCurve, ctx: RealContext = _DEFAULT_CTX,
                        kmax: int = 16, jmax: int = 10, y_max=None):
    """Fit the inner billiard map in the flattening coordinates as a
    Fourier-Taylor MapSeries of order 2: sample the exact map on a uniform
    x-grid times Chebyshev y-nodes, Fourier-transform in x, and solve for the
    y-polynomial per harmonic.

    Verifies the boundary structure x1 = x + y + O(y^3), y1 = y + O(y^3): the
    low-order rows must vanish to the fit tolerance and are then cleaned."""
    guard = 48 + 4 * jmax
    with mp.workprec(ctx.working_prec + guard):
        third = mpf(1) / 3
        tab = curve._tables()
        Q = tab.power_total(third)
        if y_max is None:
            y_max = mpf("0.05")
        y_max = to_mpf(y_max)
        prob = InnerBilliard(curve)
        step_tol = mpf(2) ** (-mp.prec + 8)

        def x_of_phi(phi):
            two_pi = 2 * mp.pi
            wraps = mp.floor(phi / two_pi)
            return tab.power_antiderivative(third, phi - wraps * two_pi) / Q + wraps

        def phi_of_x(x):
            return _invert_power_antiderivative(curve, third, x * Q, ctx)

        nx = 4 * kmax
        ny = jmax + 1
        # Chebyshev nodes on [y_max/20, y_max]
        y_lo = y_max / 20
        ys = [
            y_lo + (y_max - y_lo) * (1 - mp.cos(mp.pi * t / (ny - 1))) / 2
            for t in range(ny)
        ]
        u_data = [[None] * ny for _ in range(nx)]
        v_data = [[None] * ny for _ in range(nx)]
        for i in range(nx):
            x = mpf(i) / nx
            phi = phi_of_x(x)
            rho3 = curve.rho_raw(phi) ** third
            for t in range(ny):
                y = ys[t]
                r = y * Q / (2 * rho3)
                phi1, r1 = prob.step_lifted(phi, r, step_tol)
                x1 = x_of_phi(phi1)
                y1 = 2 * curve.rho_raw(phi1 - 2 * mp.pi * mp.floor(phi1 / (2 * mp.pi))) ** third * r1 / Q
                u_data[i][t] = x1 - x - y
                v_data[i][t] = y1 - y

        # Fourier transform in x per y-node
        hats_u = [[mpc(0)] * ny for _ in range(2 * kmax + 1)]
        hats_v = [[mpc(0)] * ny for _ in range(2 * kmax + 1)]
        for i in range(nx):
            w = mp.expjpi(mpf(-2 * i) / nx)  # e^{-2 pi i x_i}
            zk = mpc(1)
            for k in range(kmax + 1):
                for t in range(ny):
                    hats_u[k][t] += u_data[i][t] * zk
                    hats_v[k][t] += v_data[i][t] * zk
                zk *= w
        for k in range(kmax + 1):
            for t in range(ny):
                hats_u[k][t] /= nx
                hats_v[k][t] /= nx

        # solve for y-polynomials: one Vandermonde LU shared by all harmonics
        vander = [[ys[t] ** j for j in range(ny)] for t in range(ny)]
        lu, piv = _lu_factor(vander)
        G1 = FourierTaylorSeries(kmax, jmax)
        G2 = FourierTaylorSeries(kmax, jmax)
        for k in range(kmax + 1):
            cu = _lu_solve(lu, piv, hats_u[k])
            cv = _lu_solve(lu, piv, hats_v[k])
            for j in range(ny):
                if j > jmax:
                    break
                if not _tiny(cu[j]):
                    G1[k, j] = cu[j]
                    G1[-k, j] = mp.conj(cu[j])
                if not _tiny(cv[j]):
                    G2[k, j] = cv[j]
                    G2[-k, j] = mp.conj(cv[j])

        # fit residual at probe points vs tail estimate
        probes = [(mpf("0.137"), y_max * mpf("0.81")), (mpf("0.694"), y_max * mpf("0.33"))]
        resid = mpf(0)
        for x, y in probes:
            phi = phi_of_x(x)
            rho3 = curve.rho_raw(phi) ** third
            r = y * Q / (2 * rho3)
            phi1, r1 = prob.step_lifted(phi, r, step_tol)
            x1 = x_of_phi(phi1)
            y1 = 2 * curve.rho_raw(phi1 - 2 * mp.pi * mp.floor(phi1 / (2 * mp.pi))) ** third * r1 / Q
            resid = max(resid, abs(G1.evaluate(x, y) - (x1 - x - y)))
            resid = max(resid, abs(G2.evaluate(x, y) - (y1 - y)))
        scale = max(
            max((abs(v) for v in G1.c.values()), default=mpf(0)),
            max((abs(v) for v in G2.c.values()), default=mpf(0)),
            mpf(1),
        )
        tail = (
            G1.tail_estimate(mpf("0.01"), y_max)
            + G2.tail_estimate(mpf("0.01"), y_max)
            + scale * mpf(2) ** (-ctx.working_prec + 16)
        )
        if resid > 1000 * tail:
            raise ArithmeticError(
                "map-series fit residual %s above tail estimate %s"
                % (mp.nstr(resid, 5), mp.nstr(tail, 5))
            )

        # boundary structure: x1 = x + y + O(y^3), y1 = y + O(y^3)
        clean_tol = scale * mpf(2) ** (-ctx.working_prec + 8) + 100 * resid
        for g, rows in ((G1, (0, 1, 2)), (G2, (0, 1, 2))):
            for j in rows:
                for k, v in list(g.row(j).items()):
                    if abs(v) > clean_tol:
                        raise ArithmeticError(
                            "boundary structure violated: row j=%d has |c| = %s"
                            % (j, mp.nstr(abs(v), 5))
                        )
                    g[k, j] = 0
        return MapSeries(G1, G2, 2)


def _tiny(v):
    return abs(v) < mpf(2) ** (-mp.prec + 2)
