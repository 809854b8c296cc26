"""Inner billiard map in Birkhoff coordinates and outer (dual) billiard map in
envelope coordinates, with their generating functions and exact derivative
relations.

Inner: phase point (s, r) = (arclength, incidence angle in (0, pi)); the
generating function is the chord length h(s, s1) with

    d1 h = -cos r(s, s1),   d2 h = cos r1(s, s1),

r the angle chord/tangent at departure and r1 at arrival (reflection law
r1(s, s1) = pi - r(s1, s)).  Preserved form: sin r ds ^ dr.

Outer: phase point (alpha, r) = (tangent angle, distance along the forward
tangent).  A vertex z = m(alpha) + r t(alpha) reflects through the tangency
point of the second tangent line through z.  The generating function is the
area cut off between the two tangent segments and the arc; d1 L = -r^2/2,
d2 L = rhat^2/2.  Preserved form: r dalpha ^ dr.

Orbit-finding code works in the tangent-angle lift; the wrappers below expose
the spec-level coordinates (arclength for inner, tangent angle for outer).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from mpmath import mp, mpf, mpc

from .curves import FourierCurve, _PointData
from .precision import RealContext, to_mpf

_DEFAULT_CTX = RealContext()

R_MIN_GUARD = 1e-6 * 3.141592653589793


class NearTangencyWarning(UserWarning):
    """Step attempted below the glancing-incidence guard; raise mantissa_bits
    if the result is noisy."""


@dataclass(frozen=True)
class BirkhoffPoint:
    s: object
    r: object

    def __post_init__(self):
        if not (0 < self.r < mp.pi):
            raise ValueError("incidence angle must lie in (0, pi)")


@dataclass(frozen=True)
class EnvelopePoint:
    alpha: object
    r: object

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("tangent distance must be positive")


# ---------------------------------------------------------------------------
# inner billiard, tangent-angle internals
# ---------------------------------------------------------------------------


def _chord(pa: _PointData, pb: _PointData):
    """Chord data between two boundary points: length, cos/sin of the
    departure angle r and the arrival angle r1."""
    cx = pb.x - pa.x
    cy = pb.y - pa.y
    h = mp.hypot(cx, cy)
    ux, uy = cx / h, cy / h
    cos_r = pa.cos1 * ux + pa.sin1 * uy
    sin_r = pa.cos1 * uy - pa.sin1 * ux       # cross(t_a, u) = sin r
    cos_r1 = pb.cos1 * ux + pb.sin1 * uy
    sin_r1 = ux * pb.sin1 - uy * pb.cos1      # cross(u, t_b) = sin r1
    return h, cos_r, sin_r, cos_r1, sin_r1


def _inner_step_phi(curve: FourierCurve, phi, r, tol):
    """One billiard bounce in the tangent-angle lift: returns phi1 in
    (phi, phi + 2 pi) where the chord leaving m(phi) at angle r re-hits the
    curve, and the arrival incidence r1 = phi1 - phi - r."""
    tab = curve._tables()
    pa = tab.point(phi)
    theta = phi + r
    ct, st = mp.cos_sin(theta)
    ech = mpc(ct, -st)  # e^{-i theta}
    za = pa.zc

    def g(psi):
        return (ech * (tab.point(psi).zc - za)).imag

    # g < 0 just after phi, > 0 just before phi + 2 pi; unique interior zero
    two_pi = 2 * mp.pi
    lo, hi = phi, phi + two_pi
    psi = phi + 2 * r  # exact for the circle
    if not (lo < psi < hi):
        psi = phi + mp.pi
    val = None
    for _ in range(400):
        pb = tab.point(psi)
        val = (ech * (pb.zc - za)).imag
        if val == 0:
            break
        dval = pb.rho * mp.sin(psi - theta)
        if val > 0:
            hi = psi
        else:
            lo = psi
        nxt = None
        if dval != 0:
            step = val / dval
            if abs(step) <= tol * max(1, abs(psi)):
                break
            nxt = psi - step
        if nxt is None or not (lo < nxt < hi):
            nxt = (lo + hi) / 2
        if hi - lo <= tol * max(1, abs(hi)):
            psi = (lo + hi) / 2
            break
        psi = nxt
    else:
        raise ArithmeticError(
            "billiard chord solve did not converge; residual %s" % mp.nstr(val, 8)
        )
    r1 = psi - phi - r
    return psi, r1


# ---------------------------------------------------------------------------
# public inner-billiard operations
# ---------------------------------------------------------------------------


def billiard_step(curve: FourierCurve, p: BirkhoffPoint, ctx: RealContext = _DEFAULT_CTX):
    """Bounce once: (s, r) -> (s1, r1) with s1 reduced mod total_length."""
    with ctx.workprec():
        r = to_mpf(p.r)
        if r < R_MIN_GUARD or r > mp.pi - R_MIN_GUARD:
            warnings.warn(
                NearTangencyWarning(
                    "incidence angle %s is inside the glancing guard" % mp.nstr(r, 8)
                )
            )
        phi = curve.phi_from_arclength(to_mpf(p.s), ctx)
        phi1, r1 = _inner_step_phi(curve, phi, r, ctx.eps * 16)
        L = 2 * mp.pi * curve.c0
        s1 = curve._tables().arclength(phi1 - 2 * mp.pi if phi1 >= 2 * mp.pi else phi1)
        if s1 < 0:
            s1 += L
        return BirkhoffPoint(s1, r1)


def chord_length(curve: FourierCurve, s, s1, ctx: RealContext = _DEFAULT_CTX):
    """Generating function of the inner billiard: |m(s1) - m(s)|."""
    with ctx.workprec():
        tab = curve._tables()
        pa = tab.point(curve.phi_from_arclength(to_mpf(s), ctx))
        pb = tab.point(curve.phi_from_arclength(to_mpf(s1), ctx))
        return mp.hypot(pb.x - pa.x, pb.y - pa.y)


def chord_gradient(curve: FourierCurve, s, s1, ctx: RealContext = _DEFAULT_CTX):
    """(d1 h, d2 h) = (-cos r, cos r1), from the closed-form chord geometry."""
    with ctx.workprec():
        tab = curve._tables()
        pa = tab.point(curve.phi_from_arclength(to_mpf(s), ctx))
        pb = tab.point(curve.phi_from_arclength(to_mpf(s1), ctx))
        _h, cos_r, _sr, cos_r1, _sr1 = _chord(pa, pb)
        return (-cos_r, cos_r1)


def incidence_angle(curve: FourierCurve, s, s1, ctx: RealContext = _DEFAULT_CTX):
    """r(s, s1): angle between the tangent at s and the chord towards s1."""
    with ctx.workprec():
        tab = curve._tables()
        pa = tab.point(curve.phi_from_arclength(to_mpf(s), ctx))
        pb = tab.point(curve.phi_from_arclength(to_mpf(s1), ctx))
        _h, cos_r, sin_r, _c1, _s1 = _chord(pa, pb)
        return mp.atan2(sin_r, cos_r)


# ---------------------------------------------------------------------------
# outer (dual) billiard
# ---------------------------------------------------------------------------


def _dual_cn(curve: FourierCurve, a, b):
    """C + iN = integral_a^b e^{i(v-a)} rho(v) dv, in closed form."""
    tab = curve._tables()
    za = tab.point(a).zc
    zb = tab.point(b).zc
    ca, sa = mp.cos_sin(a)
    return mpc(ca, -sa) * (zb - za)


def _dual_pair(curve: FourierCurve, a, b):
    """Distances of the tangent-intersection vertex z between tangencies a < b:

        fwd  = |z - m(a)|  (z forward on the tangent at a; phase coordinate),
        back = |z - m(b)|  (z backward on the tangent at b; the radial
                            coordinate of the reflected point 2 m(b) - z),

    together with the partial derivatives used by Newton solves and Hessians.
    `back` is the two-tangency distance integral
    integral_a^b sin(v - a) rho(v) dv / sin(b - a)."""
    delta = b - a
    sd = mp.sin(delta)
    cd = mp.cos(delta)
    j = _dual_cn(curve, a, b)
    C, N = j.real, j.imag
    back = N / sd
    fwd = C - back * cd
    tab = curve._tables()
    rho_a = tab.point(a).rho
    rho_b = tab.point(b).rho
    dback_db = rho_b - back * cd / sd
    dback_da = (back * cd - C) / sd
    dfwd_db = back / sd
    dfwd_da = N - rho_a + (C * cd - back) / sd
    return fwd, back, dfwd_da, dfwd_db, dback_da, dback_db, delta


def dual_r(curve: FourierCurve, alpha, alpha1, ctx: RealContext = _DEFAULT_CTX):
    """Two-tangency distance integral
    r(alpha, alpha1) = (delta / sin delta) integral_0^1 sin(delta t)
    rho(alpha + delta t) dt, delta = alpha1 - alpha in [0, pi).

    Geometrically this is the distance from the vertex of the tangents at
    alpha and alpha1 to the tangency m(alpha1), i.e. the radial coordinate of
    the vertex reflected through m(alpha1)."""
    with ctx.workprec():
        a = to_mpf(alpha)
        b = to_mpf(alpha1)
        delta = b - a
        if delta < 0 or delta >= mp.pi:
            raise ValueError("dual billiard needs 0 <= alpha1 - alpha < pi "
                             "(parallel tangents as delta -> pi)")
        if delta == 0:
            return mpf(0)
        if delta < mpf(2) ** (-mp.prec // 4):
            # series limit of the defining integral
            tab = curve._tables()
            p = tab.point(a)
            return delta * p.rho / 2 + delta * delta * p.drho / 3
        j = _dual_cn(curve, a, b)
        return j.imag / mp.sin(delta)


def dual_vertex_r(curve: FourierCurve, alpha, alpha1, ctx: RealContext = _DEFAULT_CTX):
    """Forward tangent distance |z - m(alpha)| of the vertex between the
    tangencies at alpha and alpha1: the envelope radial coordinate of the
    vertex itself."""
    with ctx.workprec():
        fwd, *_ = _dual_pair(curve, to_mpf(alpha), to_mpf(alpha1))
        return fwd


def _outer_next_alpha(curve: FourierCurve, alpha, r, tol, seed=None):
    """Solve fwd(alpha, b) = r for b in (alpha, alpha + pi): the tangency of
    the second tangent line through z = m(alpha) + r t(alpha).  fwd is
    strictly increasing in b (d fwd/d b = back/sin delta > 0), so
    bisection-safeguarded Newton cannot fail."""
    lo = alpha
    hi = alpha + mp.pi * (1 - mpf(2) ** (-mp.prec + 8))
    tab = curve._tables()
    if seed is None:
        seed = alpha + 2 * mp.atan(r / tab.point(alpha).rho)
    b = seed if lo < seed < hi else (lo + hi) / 2
    val = None
    for _ in range(400):
        fwd, _back, _fa, dfwd_db, *_ = _dual_pair(curve, alpha, b)
        val = fwd - r
        if val == 0:
            break
        if val > 0:
            hi = b
        else:
            lo = b
        nxt = None
        if dfwd_db != 0:
            step = val / dfwd_db
            if abs(step) <= tol * max(1, abs(b)):
                break
            nxt = b - step
        if nxt is None or not (lo < nxt < hi):
            nxt = (lo + hi) / 2
        if hi - lo <= tol * max(1, abs(hi)):
            b = (lo + hi) / 2
            break
        b = nxt
    else:
        raise ArithmeticError(
            "dual tangency solve did not converge; residual %s" % mp.nstr(val, 8)
        )
    return b


def dual_step(curve: FourierCurve, p: EnvelopePoint, ctx: RealContext = _DEFAULT_CTX):
    """Reflect z = m(alpha) + r t(alpha) through the tangency point of the
    second tangent line through z; returns the envelope coordinates of the
    image (alpha1 reduced mod 2 pi)."""
    with ctx.workprec():
        alpha = to_mpf(p.alpha)
        r = to_mpf(p.r)
        b = _outer_next_alpha(curve, alpha, r, ctx.eps * 16)
        tab = curve._tables()
        pa = tab.point(alpha)
        pb = tab.point(b)
        z = pa.zc + r * mpc(pa.cos1, pa.sin1)
        z1 = 2 * pb.zc - z
        r1 = abs(z1 - pb.zc)
        two_pi = 2 * mp.pi
        b_red = b - two_pi * mp.floor(b / two_pi)
        return EnvelopePoint(b_red, r1)


def dual_lagrangian(curve: FourierCurve, alpha, alpha1, ctx: RealContext = _DEFAULT_CTX):
    """Area cut off between the tangent segments at alpha and alpha1 and the
    arc: shoelace of the two segments plus the closed-form arc integral."""
    with ctx.workprec():
        a = to_mpf(alpha)
        b = to_mpf(alpha1)
        delta = b - a
        if not (0 < delta < mp.pi):
            raise ValueError("dual lagrangian needs 0 < alpha1 - alpha < pi")
        tab = curve._tables()
        pa = tab.point(a)
        pb = tab.point(b)
        fwd, *_ = _dual_pair(curve, a, b)
        za = pa.zc
        zb = pb.zc
        z = za + fwd * mpc(pa.cos1, pa.sin1)
        cross_az = za.real * z.imag - za.imag * z.real
        cross_zb = z.real * zb.imag - z.imag * zb.real
        arc = tab.sector(b) - tab.sector(a)
        return (cross_az + cross_zb - arc) / 2


def dual_gradient(curve: FourierCurve, alpha, alpha1, ctx: RealContext = _DEFAULT_CTX):
    """(d1 L, d2 L) = (-fwd^2/2, back^2/2): the generating-function relations
    of the cut-off area for the form r dalpha ^ dr."""
    with ctx.workprec():
        fwd, back, *_ = _dual_pair(curve, to_mpf(alpha), to_mpf(alpha1))
        return (-fwd * fwd / 2, back * back / 2)


# ---------------------------------------------------------------------------
# variational problem interface used by the orbits module.
#
# Both tables work in the tangent-angle lift x (inner: x = phi, reported
# coordinate s = arclength; outer: x = alpha = reported coordinate).  The
# orbit action is sum of pair values; `sign` makes the Birkhoff-minimizing
# orbit the minimizer of sign * action over Birkhoff-ordered configurations
# (maximal perimeter inside, minimal circumscribed area outside).
# ---------------------------------------------------------------------------


class InnerBilliard:
    kind = "inner"
    sign = -1

    def __init__(self, curve: FourierCurve):
        self.curve = curve

    def period(self, ctx):
        with ctx.workprec():
            return 2 * mp.pi * self.curve.c0

    def reported_from_internal(self, x):
        tab = self.curve._tables()
        two_pi = 2 * mp.pi
        wraps = mp.floor(x / two_pi)
        return tab.arclength(x - wraps * two_pi) + wraps * two_pi * self.curve.c0

    def internal_from_reported(self, s, ctx):
        return self.curve.phi_from_arclength(s, ctx)

    def point(self, x):
        return self.curve._tables().point(x)

    def pair_value(self, pa, pb, xa=None, xb=None):
        cx = pb.x - pa.x
        cy = pb.y - pa.y
        return mp.hypot(cx, cy)

    def pair_derivs(self, pa, pb, xa=None, xb=None):
        """Value, gradient and second derivatives of the pair term in the
        tangent-angle variables."""
        h, cos_r, sin_r, cos_r1, sin_r1 = _chord(pa, pb)
        ra, rb = pa.rho, pb.rho
        da = -cos_r * ra
        db = cos_r1 * rb
        sin_a_h = sin_r * ra / h
        sin_b_h = sin_r1 * rb / h
        daa = sin_r * ra * (sin_a_h - 1) - cos_r * pa.drho
        dbb = -sin_r1 * rb * (1 - sin_b_h) + cos_r1 * pb.drho
        dab = sin_r * sin_r1 * ra * rb / h
        return h, da, db, daa, dab, dbb

    def phase_r(self, pa, pb, xa=None, xb=None):
        """Outgoing incidence angle of the chord pa -> pb."""
        _h, cos_r, sin_r, _c, _s = _chord(pa, pb)
        return mp.atan2(sin_r, cos_r)

    def step_lifted(self, x, r, tol):
        return _inner_step_phi(self.curve, x, r, tol)

    def rotation_seed_r(self, x, rot):
        """Radial seed whose one-step advance is about 2 pi rot (exact on the
        circle)."""
        return mp.pi * rot

    def r_bounds(self):
        return (mpf(0), mp.pi)

    def nu(self, r):
        """Antiderivative of the symplectic density sin r."""
        return -mp.cos(r)

    def density_weight(self, x):
        """dmu = rho(phi) dphi converts the x-integral to the arclength one."""
        return self.point(x).rho


class OuterBilliard:
    kind = "outer"
    sign = 1

    def __init__(self, curve: FourierCurve):
        self.curve = curve

    def period(self, ctx):
        with ctx.workprec():
            return 2 * mp.pi

    def reported_from_internal(self, x):
        return x

    def internal_from_reported(self, a, ctx):
        return to_mpf(a)

    def point(self, x):
        return self.curve._tables().point(x)

    def pair_value(self, pa, pb, xa, xb):
        fwd, *_ = _dual_pair(self.curve, xa, xb)
        za = pa.zc
        z = za + fwd * mpc(pa.cos1, pa.sin1)
        zb = pb.zc
        cross_az = za.real * z.imag - za.imag * z.real
        cross_zb = z.real * zb.imag - z.imag * zb.real
        arc = self.curve._tables().sector(xb) - self.curve._tables().sector(xa)
        return (cross_az + cross_zb - arc) / 2

    def pair_derivs(self, pa, pb, xa, xb):
        fwd, back, dfwd_da, dfwd_db, _dback_da, dback_db, _delta = _dual_pair(
            self.curve, xa, xb
        )
        za = pa.zc
        z = za + fwd * mpc(pa.cos1, pa.sin1)
        zb = pb.zc
        cross_az = za.real * z.imag - za.imag * z.real
        cross_zb = z.real * zb.imag - z.imag * zb.real
        arc = self.curve._tables().sector(xb) - self.curve._tables().sector(xa)
        value = (cross_az + cross_zb - arc) / 2
        da = -fwd * fwd / 2
        db = back * back / 2
        daa = -fwd * dfwd_da
        dab = -fwd * dfwd_db
        dbb = back * dback_db
        return value, da, db, daa, dab, dbb

    def phase_r(self, pa, pb, xa, xb):
        """Forward tangent distance at xa of the vertex between xa and xb."""
        fwd, *_ = _dual_pair(self.curve, xa, xb)
        return fwd

    def step_lifted(self, x, r, tol):
        b = _outer_next_alpha(self.curve, x, r, tol)
        _fwd, back, *_ = _dual_pair(self.curve, x, b)
        return b, back

    def rotation_seed_r(self, x, rot):
        """Seed from the exact one-step relation r = fwd(x, x + 2 pi rot)."""
        delta = 2 * mp.pi * rot
        if delta >= mp.pi:
            delta = mp.pi * (1 - mpf("1e-6"))
        fwd, *_ = _dual_pair(self.curve, x, x + delta)
        return fwd

    def r_bounds(self):
        return (mpf(0), mp.inf)

    def nu(self, r):
        """Antiderivative of the symplectic density r."""
        return r * r / 2

    def density_weight(self, x):
        return mpf(1)
