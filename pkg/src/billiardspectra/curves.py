"""Analytic strictly convex plane curves given by a radius-of-curvature
Fourier series in the tangent angle.

A curve is ``rho(phi) = c0 + sum_k (a_k cos k phi + b_k sin k phi)`` with
harmonics k >= 2 only; the k = 1 harmonic is structurally excluded, which is
exactly the closure condition for the curve.  The embedding is anchored at
``position(0) = (0, 0)`` with tangent along +x, so

    position(phi) = integral_0^phi rho(psi) (cos psi, sin psi) d psi,

which this module evaluates in closed form (term-by-term antiderivatives).
"""

from __future__ import annotations

import hashlib
import json
import math

from mpmath import mp, mpf, mpc

from .precision import RealContext, to_mpf

_DEFAULT_CTX = RealContext()

CONVEXITY_GRID = 4096


def _trig_table(phi, n):
    """cos(k*phi), sin(k*phi) for k = 0..n via the Chebyshev recurrence."""
    c1, s1 = mp.cos_sin(phi)
    C = [mpf(1), c1]
    S = [mpf(0), s1]
    two_c1 = 2 * c1
    for _ in range(2, n + 1):
        C.append(two_c1 * C[-1] - C[-2])
        S.append(two_c1 * S[-1] - S[-2])
    return C[: n + 1], S[: n + 1]


class FourierCurve:
    """Immutable convex curve defined by its radius-of-curvature series.

    Parameters
    ----------
    c0 : positive number, the mean radius of curvature.
    harmonics : iterable of (k, a_k, b_k) with integer k >= 2.
    """

    def __init__(self, c0, harmonics=()):
        c0 = to_mpf(c0)
        if not c0 > 0:
            raise ValueError("c0 must be positive")
        seen = {}
        for k, a, b in harmonics:
            if int(k) != k or int(k) < 2:
                raise ValueError(
                    "harmonic k=%r rejected: only integer k >= 2 representable "
                    "(k = 1 would violate closure)" % (k,)
                )
            k = int(k)
            if k in seen:
                raise ValueError("duplicate harmonic k=%d" % k)
            seen[k] = (to_mpf(a), to_mpf(b))
        self.c0 = c0
        self.harmonics = tuple(sorted((k, a, b) for k, (a, b) in seen.items()))
        self._tables_cache = {}
        self._validate_convexity()

    # -- construction helpers -------------------------------------------------

    def with_phase(self, chi):
        """Curve with parametrization origin shifted: rho~(phi) = rho(phi+chi)."""
        chi = to_mpf(chi)
        with mp.workprec(max(mp.prec, 256)):
            new = []
            for k, a, b in self.harmonics:
                ck, sk = mp.cos_sin(k * chi)
                new.append((k, a * ck + b * sk, -a * sk + b * ck))
        return FourierCurve(self.c0, new)

    def scaled(self, lam):
        lam = to_mpf(lam)
        return FourierCurve(self.c0 * lam, [(k, a * lam, b * lam) for k, a, b in self.harmonics])

    @classmethod
    def circle(cls, radius):
        return cls(radius)

    @classmethod
    def ellipse(cls, a, b, tail_tol="1e-60", prec_bits=512):
        """Ellipse with semi-axes a, b as a Fourier curve, truncated where the
        coefficients drop below tail_tol (relative to c0).

        rho(phi) = a^2 b^2 (a^2 sin^2 phi + b^2 cos^2 phi)^(-3/2) has only even
        cosine harmonics, so the truncation keeps the curve exactly closed and
        convex.
        """
        with mp.workprec(prec_bits):
            a = to_mpf(a)
            b = to_mpf(b)
            tol = to_mpf(tail_tol)
            a2b2 = (a * b) ** 2

            def rho(phi):
                sp = mp.sin(phi)
                cp = mp.cos(phi)
                return a2b2 * (a * a * sp * sp + b * b * cp * cp) ** mpf("-1.5")

            n = 64
            while True:
                h = mp.pi / n
                samples = [rho(j * h) for j in range(n)]  # pi-periodic
                kmax = n // 2
                coeffs = [mpf(0)] * (kmax + 1)
                for j in range(n):
                    g = samples[j]
                    c1, s1 = mp.cos_sin(2 * j * h)
                    ck, sk = mpf(1), mpf(0)
                    for m in range(kmax + 1):
                        coeffs[m] += g * ck
                        ck, sk = ck * c1 - sk * s1, sk * c1 + ck * s1
                coeffs = [c / n * (1 if m == 0 else 2) for m, c in enumerate(coeffs)]
                tail = max(abs(c) for c in coeffs[kmax // 2 :])
                if tail < tol * coeffs[0] / 100:
                    break
                n *= 2
                if n > 1 << 16:
                    raise ArithmeticError("ellipse series did not converge")
            c0 = coeffs[0]
            harmonics = [
                (2 * m, c, mpf(0))
                for m, c in enumerate(coeffs)
                if m >= 1 and abs(c) > tol * c0
            ]
        return cls(c0, harmonics)

    # -- validation ------------------------------------------------------------

    def _validate_convexity(self):
        margin = sum(abs(a) + abs(b) for _, a, b in self.harmonics)
        if margin < self.c0:
            return  # sufficient fast path
        c0f = float(self.c0)
        hs = [(k, float(a), float(b)) for k, a, b in self.harmonics]
        worst = None
        for j in range(CONVEXITY_GRID):
            phi = 2 * math.pi * j / CONVEXITY_GRID
            r = c0f + sum(a * math.cos(k * phi) + b * math.sin(k * phi) for k, a, b in hs)
            if worst is None or r < worst[0]:
                worst = (r, phi)
        if worst[0] <= 1e-9 * c0f:
            # near-degenerate: recheck at high precision around the float argmin
            with mp.workprec(256):
                step = 2 * mp.pi / CONVEXITY_GRID
                lo = min(
                    self.rho_raw(to_mpf(worst[1]) + t * step)
                    for t in (mpf(-1), mpf("-0.5"), mpf(0), mpf("0.5"), mpf(1))
                )
            if lo <= 0:
                raise ValueError("curve is not strictly convex: rho <= 0 on the grid")

    # -- serialization / identity ----------------------------------------------

    def as_dict(self):
        with mp.workprec(max(mp.prec, 256)):
            return {
                "c0": mp.nstr(self.c0, 80),
                "harmonics": [
                    {"k": k, "a": mp.nstr(a, 80), "b": mp.nstr(b, 80)}
                    for k, a, b in self.harmonics
                ],
            }

    def content_key(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def __repr__(self):
        return "FourierCurve(c0=%s, %d harmonics)" % (mp.nstr(self.c0, 8), len(self.harmonics))

    # -- coefficient tables ------------------------------------------------------

    def _tables(self):
        """Closed-form evaluation tables at the current mpmath precision."""
        key = mp.prec
        tab = self._tables_cache.get(key)
        if tab is None:
            tab = _CurveTables(self)
            self._tables_cache[key] = tab
        return tab

    # -- raw evaluation (used internally; public ops wrap in ctx.workprec) -------

    def rho_raw(self, phi):
        K = self.harmonics[-1][0] if self.harmonics else 0
        C, S = _trig_table(phi, K)
        r = self.c0
        for k, a, b in self.harmonics:
            r += a * C[k] + b * S[k]
        return r

    # -- public geometric queries -------------------------------------------------

    @property
    def max_harmonic(self):
        return self.harmonics[-1][0] if self.harmonics else 0

    def total_length(self, ctx: RealContext = _DEFAULT_CTX):
        with ctx.workprec():
            return 2 * mp.pi * self.c0

    def rho(self, phi, ctx: RealContext = _DEFAULT_CTX):
        """Radius of curvature at tangent angle phi."""
        with ctx.workprec():
            return self.rho_raw(to_mpf(phi))

    def curvature(self, phi, ctx: RealContext = _DEFAULT_CTX):
        with ctx.workprec():
            return 1 / self.rho_raw(to_mpf(phi))

    def position(self, phi, ctx: RealContext = _DEFAULT_CTX):
        """Point on the curve at tangent angle phi, anchored at position(0) = 0."""
        with ctx.workprec():
            p = self._tables().point(to_mpf(phi))
            return (p.x, p.y)

    def tangent(self, phi, ctx: RealContext = _DEFAULT_CTX):
        with ctx.workprec():
            c, s = mp.cos_sin(to_mpf(phi))
            return (c, s)

    def arclength(self, phi, ctx: RealContext = _DEFAULT_CTX):
        """s(phi) = integral_0^phi rho, strictly increasing."""
        with ctx.workprec():
            return self._tables().arclength(to_mpf(phi))

    def phi_from_arclength(self, s, ctx: RealContext = _DEFAULT_CTX):
        """Invert the monotone map s(phi) by safeguarded Newton."""
        with ctx.workprec():
            s = to_mpf(s)
            L = 2 * mp.pi * self.c0
            wraps = mp.floor(s / L)
            s_red = s - wraps * L
            tab = self._tables()
            lo, hi = mpf(0), 2 * mp.pi
            phi = s_red / self.c0
            tol = ctx.solver_tol * L
            for _ in range(200):
                val = tab.arclength(phi) - s_red
                if abs(val) <= tol / 64:
                    break
                r = self.rho_raw(phi)
                step = val / r
                nxt = phi - step
                if nxt <= lo or nxt >= hi:
                    if val > 0:
                        hi = phi
                    else:
                        lo = phi
                    nxt = (lo + hi) / 2
                else:
                    if val > 0:
                        hi = phi
                    else:
                        lo = phi
                phi = nxt
            else:
                raise ArithmeticError("arclength inversion did not converge (residual %s)" % val)
            return phi + wraps * 2 * mp.pi

    def enclosed_area(self, ctx: RealContext = _DEFAULT_CTX):
        with ctx.workprec():
            return self._tables().area

    def sector_integral(self, phi0, phi1, ctx: RealContext = _DEFAULT_CTX):
        """integral_{phi0}^{phi1} cross(m(psi), m'(psi)) d psi, in closed form."""
        with ctx.workprec():
            tab = self._tables()
            return tab.sector(to_mpf(phi1)) - tab.sector(to_mpf(phi0))

    def power_antiderivative(self, exponent, phi, ctx: RealContext = _DEFAULT_CTX):
        """integral_0^phi rho(psi)^exponent d psi via a cached Fourier expansion
        of rho^exponent (spectrally convergent; rho is a positive trig polynomial)."""
        with ctx.workprec():
            return self._tables().power_antiderivative(to_mpf(exponent), to_mpf(phi))


def curvature_power_integral(curve: FourierCurve, exponent, ctx: RealContext = _DEFAULT_CTX):
    """integral over the curve of curvature^exponent ds
    = integral_0^{2 pi} rho(phi)^(1-exponent) d phi.

    Composite Gauss-Legendre with node doubling until two successive results
    agree to 10*sqrt(eps) relative.
    """
    from .quadrature import adaptive_gauss_legendre

    with ctx.workprec():
        e = to_mpf(exponent)
        rel = 10 * mp.sqrt(ctx.eps)
        one_m_e = 1 - e

        def f(phi):
            return mp.power(curve.rho_raw(phi), one_m_e)

        return adaptive_gauss_legendre(f, mpf(0), 2 * mp.pi, rel, n0=32)


def make_constant_width(c0, odd_harmonics):
    """Constant-width curve: only odd harmonics k >= 3 on top of c0.

    rho(phi) + rho(phi + pi) = 2 c0, so every width equals 2 c0.
    """
    for k, _a, _b in odd_harmonics:
        if int(k) != k or k < 3 or k % 2 == 0:
            raise ValueError(
                "constant width requires odd harmonics k >= 3, got k=%r" % (k,)
            )
    return FourierCurve(c0, odd_harmonics)


# -- curve files ------------------------------------------------------------------


def load_curve(path) -> FourierCurve:
    """Read a curve from a JSON or TOML file:
    { "c0": 1.0, "harmonics": [{"k": 3, "a": 0.1, "b": 0.0}] }."""
    text = open(path, "rb").read()
    data = None
    try:
        data = json.loads(text.decode())
    except ValueError:
        try:
            import tomllib as toml_mod  # py >= 3.11
        except ImportError:
            import tomli as toml_mod
        data = toml_mod.loads(text.decode())
    c0 = data["c0"]
    harmonics = [(h["k"], h.get("a", 0), h.get("b", 0)) for h in data.get("harmonics", [])]
    return FourierCurve(c0, harmonics)


def dump_curve(curve: FourierCurve, path):
    with open(path, "w") as fh:
        json.dump(curve.as_dict(), fh, indent=1)


class _PointData:
    __slots__ = ("cos1", "sin1", "x", "y", "rho", "drho")

    def __init__(self, cos1, sin1, x, y, rho, drho):
        self.cos1 = cos1
        self.sin1 = sin1
        self.x = x
        self.y = y
        self.rho = rho
        self.drho = drho

    @property
    def zc(self):
        return mpc(self.x, self.y)


class _CurveTables:
    """Per-precision closed-form coefficient tables for one curve.

    position:  m(phi) = (X0 + sum XC_n cos + XS_n sin,  Y0 + ...) built from the
               antiderivative of e^{i psi} rho(psi);
    arclength: s(phi) = c0 phi + sparse harmonic terms;
    sector:    antiderivative of cross(m, m') for cut-off areas and the total
               enclosed area.
    """

    def __init__(self, curve: FourierCurve):
        self.curve = curve
        c0 = curve.c0
        harmonics = curve.harmonics
        K = curve.max_harmonic

        # complex coefficients of E(psi) = e^{i psi} rho(psi)
        gamma = {}
        gamma[1] = mpc(c0)
        for k, a, b in harmonics:
            half = mpc(a, -b) / 2  # coefficient of e^{i k psi} in rho
            halfc = mpc(a, b) / 2
            gamma[k + 1] = gamma.get(k + 1, mpc(0)) + half
            gamma[1 - k] = gamma.get(1 - k, mpc(0)) + halfc

        # P(phi) = antiderivative of E; no zero frequency occurs (k=1 absent)
        pcoef = {n: g / mpc(0, n) for n, g in gamma.items()}
        p0 = sum(pcoef.values())
        # m_c(phi) = sum_n q_n e^{i n phi} with the constant folded into n=0
        qcoef = dict(pcoef)
        qcoef[0] = qcoef.get(0, mpc(0)) - p0

        self.nmax = K + 1
        self.XC = [mpf(0)] * (self.nmax + 1)
        self.XS = [mpf(0)] * (self.nmax + 1)
        self.YC = [mpf(0)] * (self.nmax + 1)
        self.YS = [mpf(0)] * (self.nmax + 1)
        self.X0 = qcoef[0].real
        self.Y0 = qcoef[0].imag
        for n, w in qcoef.items():
            if n == 0:
                continue
            m = abs(n)
            sgn = 1 if n > 0 else -1
            # w e^{i n phi}: real part w.re cos - sgn w.im sin, imag part ...
            self.XC[m] += w.real
            self.XS[m] += -sgn * w.imag
            self.YC[m] += w.imag
            self.YS[m] += sgn * w.real

        self.arc_terms = tuple((k, a / k, b / k) for k, a, b in harmonics)
        self.c0 = c0

        # sector antiderivative: integrand cross(m, m') = Im(conj(m_c) E)
        tau = {}
        for n1, q in qcoef.items():
            qc = mp.conj(q)
            for n2, g in gamma.items():
                u = n2 - n1
                tau[u] = tau.get(u, mpc(0)) + qc * g
        self.sec_lin = tau.get(0, mpc(0)).imag
        self.area = mp.pi * self.sec_lin  # closed curve: loop integral / 2
        self.sec_nmax = max(abs(u) for u in tau) if tau else 0
        self.SC = [mpf(0)] * (self.sec_nmax + 1)
        self.SS = [mpf(0)] * (self.sec_nmax + 1)
        sec0 = mpf(0)
        for u, t in tau.items():
            if u == 0:
                continue
            w = t / mpc(0, u)
            m = abs(u)
            sgn = 1 if u > 0 else -1
            self.SC[m] += w.imag
            self.SS[m] += sgn * w.real
            sec0 += w.imag
        self.sec_const = -sec0  # sector(0) = 0

        self._power_cache = {}

    def point(self, phi) -> _PointData:
        C, S = _trig_table(phi, self.nmax)
        x = self.X0
        y = self.Y0
        for m in range(1, self.nmax + 1):
            cm, sm = C[m], S[m]
            x += self.XC[m] * cm + self.XS[m] * sm
            y += self.YC[m] * cm + self.YS[m] * sm
        r = self.c0
        dr = mpf(0)
        for k, a, b in self.curve.harmonics:
            r += a * C[k] + b * S[k]
            dr += k * (b * C[k] - a * S[k])
        return _PointData(C[1], S[1], x, y, r, dr)

    def arclength(self, phi):
        K = self.curve.max_harmonic
        C, S = _trig_table(phi, K)
        s = self.c0 * phi
        for k, ak, bk in self.arc_terms:
            s += ak * S[k] + bk * (1 - C[k])
        return s

    def sector(self, phi):
        C, S = _trig_table(phi, self.sec_nmax)
        v = self.sec_lin * phi + self.sec_const
        for m in range(1, self.sec_nmax + 1):
            v += self.SC[m] * C[m] + self.SS[m] * S[m]
        return v

    @staticmethod
    def _dft_real(samples, kmax):
        """Cosine/sine coefficients up to kmax of a real uniform-sample vector
        (trapezoid/DFT; spectrally accurate for analytic data)."""
        n = len(samples)
        h = 2 * mp.pi / n
        cos_c = [mpf(0)] * (kmax + 1)
        sin_c = [mpf(0)] * (kmax + 1)
        for j in range(n):
            g = samples[j]
            if g == 0:
                continue
            c1, s1 = mp.cos_sin(j * h)
            ck, sk = mpf(1), mpf(0)
            for m in range(kmax + 1):
                cos_c[m] += g * ck
                sin_c[m] += g * sk
                ck, sk = ck * c1 - sk * s1, sk * c1 + ck * s1
        cos_c = [c / n * (1 if m == 0 else 2) for m, c in enumerate(cos_c)]
        sin_c = [s / n * 2 for s in sin_c]
        return cos_c, sin_c

    def _power_series(self, exponent):
        """Fourier series of rho^exponent.  A cheap low-order pass estimates the
        geometric coefficient decay; one targeted DFT pass (with guard bits so
        the DFT roundoff floor stays below the tail target) then resolves the
        series down to ~2^-prec of the caller, verified on the computed tail."""
        key = str(exponent)
        entry = self._power_cache.get(key)
        if entry is not None:
            return entry
        curve = self.curve
        target = mpf(2) ** (-mp.prec + 6)
        if not curve.harmonics:
            entry = (mp.power(curve.c0, exponent), [], [])
            self._power_cache[key] = entry
            return entry

        with mp.extraprec(64):
            def sample(n):
                h = 2 * mp.pi / n
                return [mp.power(curve.rho_raw(j * h), exponent) for j in range(n)]

            # decay-rate probe
            probe_k = max(24, 4 * curve.max_harmonic)
            cos_p, sin_p = self._dft_real(sample(4 * probe_k), probe_k)
            mags = [abs(c) + abs(s) for c, s in zip(cos_p, sin_p)]
            scale = max(mags)
            rate = None
            for lag in (probe_k // 2, probe_k // 3):
                hi, lo = mags[probe_k], mags[probe_k - lag]
                if 0 < hi < lo:
                    rate = (hi / lo) ** (mpf(1) / lag)
                    break
            if rate is None or rate > mpf("0.95"):
                rate = mpf("0.95")
            k_target = probe_k + int(
                mp.log(target * scale / (mags[probe_k] + target * scale)) / mp.log(rate)
            ) + 8

            for _ in range(3):
                n = 1
                while n < 4 * k_target:
                    n *= 2
                cos_c, sin_c = self._dft_real(sample(n), k_target)
                tail = max(abs(c) + abs(s) for c, s in zip(cos_c[-4:], sin_c[-4:]))
                floor = 4 * n * scale * mpf(2) ** (-mp.prec + 8)
                if tail < max(target * scale, floor):
                    break
                k_target *= 2
        keep = k_target
        drop = target * scale
        while keep > 0 and abs(cos_c[keep]) + abs(sin_c[keep]) < drop:
            keep -= 1
        entry = (cos_c[0], cos_c[1 : keep + 1], sin_c[1 : keep + 1])
        self._power_cache[key] = entry
        return entry

    def power_antiderivative(self, exponent, phi):
        f0, fc, fs = self._power_series(exponent)
        n = len(fc)
        C, S = _trig_table(phi, n)
        v = f0 * phi
        for m in range(1, n + 1):
            v += (fc[m - 1] * S[m] + fs[m - 1] * (1 - C[m])) / m
        return v

    def power_total(self, exponent):
        f0, _fc, _fs = self._power_series(exponent)
        return f0 * 2 * mp.pi
