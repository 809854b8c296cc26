"""Truncated Fourier-Taylor algebra for near-integrable twist maps around a
resonant circle: weighted analytic norms, harmonic cut-offs, the homological
solve with divisor series y/(e^{2 pi i k y} - 1), averaging steps that raise
the contact order with the integrable shear A(x,y) = (x+y, y), and one
cut-off-based iterative step that contracts the oscillatory part of the
remainder.

Series represent g(x, y) = sum c_{k,j} e^{2 pi i k x} y^j truncated at
|k| <= kmax, j <= jmax.  All arithmetic happens at the ambient mpmath
precision; callers wrap in ctx.workprec().
"""

from __future__ import annotations

from dataclasses import dataclass, field

from mpmath import mp, mpf, mpc

from .precision import RealContext

_DEFAULT_KMAX = 32
_DEFAULT_JMAX = 24


def _is_zero(c):
    return c == 0


class FourierTaylorSeries:
    """Sparse truncated series sum_{|k|<=kmax, 0<=j<=jmax} c_{k,j} e^{2pi ikx} y^j."""

    __slots__ = ("kmax", "jmax", "c")

    def __init__(self, kmax=_DEFAULT_KMAX, jmax=_DEFAULT_JMAX, coeffs=None):
        self.kmax = int(kmax)
        self.jmax = int(jmax)
        self.c = {}
        if coeffs:
            for (k, j), v in coeffs.items():
                self[k, j] = v

    # -- container basics ----------------------------------------------------

    def __getitem__(self, kj):
        return self.c.get(kj, mpc(0))

    def __setitem__(self, kj, v):
        k, j = kj
        if abs(k) > self.kmax or j < 0 or j > self.jmax:
            raise IndexError("coefficient (%d, %d) outside truncation" % (k, j))
        v = mpc(v)
        if _is_zero(v):
            self.c.pop(kj, None)
        else:
            self.c[kj] = v

    def copy(self):
        out = FourierTaylorSeries(self.kmax, self.jmax)
        out.c = dict(self.c)
        return out

    def is_zero(self):
        return not self.c

    def y_lowest_power(self):
        return min((j for (_k, j) in self.c), default=None)

    def is_real(self, tol=0):
        for (k, j), v in self.c.items():
            w = self[-k, j]
            if abs(v - mp.conj(w)) > tol:
                return False
        return True

    def make_real(self):
        """Symmetrize to exact conjugate symmetry c_{-k,j} = conj(c_{k,j})."""
        out = FourierTaylorSeries(self.kmax, self.jmax)
        for (k, j), v in self.c.items():
            w = (v + mp.conj(self[-k, j])) / 2
            out[k, j] = w
            out[-k, j] = mp.conj(w)
        return out

    # -- linear structure ------------------------------------------------------

    def __add__(self, other):
        out = self.copy()
        for kj, v in other.c.items():
            out[kj] = out[kj] + v
        return out

    def __sub__(self, other):
        out = self.copy()
        for kj, v in other.c.items():
            out[kj] = out[kj] - v
        return out

    def __neg__(self):
        out = FourierTaylorSeries(self.kmax, self.jmax)
        for kj, v in self.c.items():
            out.c[kj] = -v
        return out

    def scaled(self, t):
        out = FourierTaylorSeries(self.kmax, self.jmax)
        t = mpc(t)
        for kj, v in self.c.items():
            out[kj] = t * v
        return out

    # -- products ---------------------------------------------------------------

    def __mul__(self, other):
        out = FourierTaylorSeries(self.kmax, self.jmax)
        acc = out.c
        kmax, jmax = self.kmax, self.jmax
        for (k1, j1), v1 in self.c.items():
            for (k2, j2), v2 in other.c.items():
                k = k1 + k2
                j = j1 + j2
                if abs(k) > kmax or j > jmax:
                    continue
                key = (k, j)
                prev = acc.get(key)
                acc[key] = v1 * v2 if prev is None else prev + v1 * v2
        for key in [key for key, v in acc.items() if _is_zero(v)]:
            del acc[key]
        return out

    def y_shifted(self, d):
        """Multiply by y^d (d may be negative if the low rows vanish)."""
        out = FourierTaylorSeries(self.kmax, self.jmax)
        for (k, j), v in self.c.items():
            jn = j + d
            if jn < 0:
                raise ValueError("y-shift below zero power: row %d nonzero" % j)
            if jn <= self.jmax:
                out[k, jn] = v
        return out

    # -- analysis helpers ---------------------------------------------------------

    def row(self, j):
        """{k: c_{k,j}} of one y-power."""
        return {k: v for (k, jj), v in self.c.items() if jj == j}

    def fourier_coefficient(self, k):
        """y-polynomial coefficients [c_{k,0}, ..., c_{k,jmax}]."""
        out = [mpc(0)] * (self.jmax + 1)
        for (kk, j), v in self.c.items():
            if kk == k:
                out[j] = v
        return out

    def mean_in_x(self):
        """The k = 0 part as a series (function of y alone)."""
        out = FourierTaylorSeries(self.kmax, self.jmax)
        for (k, j), v in self.c.items():
            if k == 0:
                out[0, j] = v
        return out

    def x_antiderivative_zero_mean(self):
        """Zero-mean antiderivative in x of a zero-mean series (termwise
        division by 2 pi i k)."""
        if any(k == 0 for (k, _j) in self.c):
            raise ValueError("x-antiderivative needs a zero-mean series")
        out = FourierTaylorSeries(self.kmax, self.jmax)
        two_pi_i = mpc(0, 2 * mp.pi)
        for (k, j), v in self.c.items():
            out[k, j] = v / (two_pi_i * k)
        return out

    def evaluate(self, x, y):
        """Numeric value at a point (Horner in y, exponential recurrence in x)."""
        rows = {}
        for (k, j), v in self.c.items():
            rows.setdefault(k, {})[j] = v
        ex = mp.expjpi(2 * x)  # e^{2 pi i x}
        total = mpc(0)
        for k, poly in rows.items():
            acc = mpc(0)
            for j in range(max(poly), -1, -1):
                acc = acc * y + poly.get(j, mpc(0))
            total += acc * (ex ** k)
        return total

    def tail_estimate(self, a, b):
        """Geometric-majorant estimate of the truncation tail of the Fourier
        norm at widths (a, b): extrapolates the observed decay of the last
        rows/columns."""
        a = mpf(a)
        b = mpf(b)
        if not self.c:
            return mpf(0)
        col = {}
        rowm = {}
        for (k, j), v in self.c.items():
            w = abs(v) * b**j * mp.e ** (2 * mp.pi * abs(k) * a)
            col[j] = col.get(j, mpf(0)) + w
            rowm[abs(k)] = rowm.get(abs(k), mpf(0)) + w
        tail = mpf(0)
        for table, nmax in ((col, self.jmax), (rowm, self.kmax)):
            hi = table.get(nmax, mpf(0)) + table.get(nmax - 1, mpf(0))
            lo = table.get(nmax // 2, mpf(0)) + table.get(nmax // 2 + 1, mpf(0))
            if hi == 0:
                continue
            if lo > hi:
                r = (hi / lo) ** (mpf(1) / max(1, (nmax - 1 - nmax // 2)))
                r = min(r, mpf("0.9"))
            else:
                r = mpf("0.9")
            tail += hi * r / (1 - r)
        return tail

    # -- serialization -------------------------------------------------------------

    def to_json_obj(self):
        terms = [
            [k, j, mp.nstr(v.real, 40), mp.nstr(v.imag, 40)]
            for (k, j), v in sorted(self.c.items())
        ]
        return {"kmax": self.kmax, "jmax": self.jmax, "terms": terms}

    @classmethod
    def from_json_obj(cls, obj):
        out = cls(obj["kmax"], obj["jmax"])
        for k, j, re, im in obj["terms"]:
            out[int(k), int(j)] = mpc(mpf(re), mpf(im))
        return out

    def __repr__(self):
        return "FourierTaylorSeries(kmax=%d, jmax=%d, %d terms)" % (
            self.kmax, self.jmax, len(self.c))


@dataclass(frozen=True)
class MapSeries:
    """Near-integrable map F = A + G with A(x,y) = (x+y, y):

        x1 = x + y + G1(x,y),   y1 = y + G2(x,y),

    where G1 = O(y^order), G2 = O(y^(order+1))."""

    g1: FourierTaylorSeries
    g2: FourierTaylorSeries
    order: int

    def __post_init__(self):
        lo1 = self.g1.y_lowest_power()
        lo2 = self.g2.y_lowest_power()
        if lo1 is not None and lo1 < self.order:
            raise ValueError("angular remainder has y^%d < declared order %d" % (lo1, self.order))
        if lo2 is not None and lo2 < self.order + 1:
            raise ValueError("radial remainder has y^%d < order+1 = %d" % (lo2, self.order + 1))

    @property
    def kmax(self):
        return self.g1.kmax

    @property
    def jmax(self):
        return self.g1.jmax

    def cofactors(self):
        """(g1, g2) with the y^m, y^(m+1) prefactors divided out."""
        return (self.g1.y_shifted(-self.order), self.g2.y_shifted(-self.order - 1))

    def bullet_norm(self, a, b):
        """Fourier norm of the oscillatory projection: the x-average of the
        radial cofactor removed."""
        c1, c2 = self.cofactors()
        c2b = c2 - c2.mean_in_x()
        return max(fourier_norm(c1, a, b), fourier_norm(c2b, a, b))

    def star_norm(self, a, b):
        _c1, c2 = self.cofactors()
        return fourier_norm(c2.mean_in_x(), a, b)

    def evaluate(self, x, y):
        return (x + y + self.g1.evaluate(x, y), y + self.g2.evaluate(x, y))

    @classmethod
    def integrable(cls, kmax=_DEFAULT_KMAX, jmax=_DEFAULT_JMAX, order=2):
        return cls(FourierTaylorSeries(kmax, jmax), FourierTaylorSeries(kmax, jmax), order)


@dataclass(frozen=True)
class ChangeOfVariables:
    """Near-identity change Phi = Id + (y^(order-1) psi1-part, y^order psi2-part);
    psi1/psi2 stored with the y-powers included."""

    psi1: FourierTaylorSeries
    psi2: FourierTaylorSeries
    order: int

    def evaluate(self, x, y):
        return (x + self.psi1.evaluate(x, y), y + self.psi2.evaluate(x, y))

    def is_identity(self):
        return self.psi1.is_zero() and self.psi2.is_zero()


# ---------------------------------------------------------------------------
# norms and cutoffs
# ---------------------------------------------------------------------------


def fourier_norm(g: FourierTaylorSeries, a, b):
    """sum_k e^{2 pi |k| a} * majorant(|g_k|) with the k-th row majorized by
    sum_j |c_{k,j}| b^j (an upper bound for its sup on |y| <= b)."""
    a = mpf(a)
    b = mpf(b)
    if a <= 0 or b <= 0:
        raise ValueError("strip width and radius must be positive")
    rows = {}
    for (k, j), v in g.c.items():
        rows[k] = rows.get(k, mpf(0)) + abs(v) * b**j
    return mp.fsum(w * mp.e ** (2 * mp.pi * abs(k) * a) for k, w in rows.items()) if rows else mpf(0)


def sup_norm_on_grid(g: FourierTaylorSeries, a, b, nx=24, ny=8):
    """max |g| over a grid in [0,1) x [-b, b] (real section of the domain)."""
    best = mpf(0)
    for i in range(nx):
        x = mpf(i) / nx
        for t in range(-ny, ny + 1):
            y = b * t / ny
            best = max(best, abs(g.evaluate(x, y)))
    return best


def k_cutoff(g: FourierTaylorSeries, K: int):
    """Exact split (g^{<K}, g^{>=K}) by harmonic index."""
    if K < 1:
        raise ValueError("cutoff needs K >= 1")
    low = FourierTaylorSeries(g.kmax, g.jmax)
    high = FourierTaylorSeries(g.kmax, g.jmax)
    for (k, j), v in g.c.items():
        (low if abs(k) < K else high)[k, j] = v
    return low, high


# ---------------------------------------------------------------------------
# homological solve
# ---------------------------------------------------------------------------


def _bernoulli_list(n):
    return [mpf(mp.bernoulli(i)) for i in range(n + 1)]


def divisor_series(k: int, jmax: int):
    """Taylor coefficients in y of y / (e^{2 pi i k y} - 1), from the Bernoulli
    generating function; valid for |2 pi k y| < 2 pi."""
    if k == 0:
        raise ValueError("zero harmonic has no divisor")
    bern = _bernoulli_list(jmax)
    w = mpc(0, 2 * mp.pi * k)
    out = []
    fact = mpf(1)
    wpow = 1 / w
    for n in range(jmax + 1):
        out.append(bern[n] * wpow / fact)
        wpow *= w
        fact *= n + 1
    return out


def solve_homological(g: FourierTaylorSeries, K: int, ctx: RealContext = None, b=None):
    """Solve psi(x+y, y) - psi(x, y) = y g^{<K}(x, y) coefficientwise:
    psi_k(y) = y/(e^{2 pi i k y} - 1) g_k(y), psi_0 = 0.

    The x-average of g below the cutoff must vanish.  When the radius b is
    supplied, the small-divisor window K b < 1 is enforced (the Bernoulli
    expansion of the divisor converges only there).
    """
    if K < 1:
        raise ValueError("cutoff needs K >= 1")
    if b is not None and not (K * mpf(b) < 1):
        raise ValueError("outside the small-divisor window: K*b = %s >= 1" % (K * mpf(b)))
    low, _high = k_cutoff(g, K)
    if any(k == 0 for (k, _j) in low.c):
        raise ValueError("nonzero x-average below the cutoff: the equation cannot be solved")
    psi = FourierTaylorSeries(g.kmax, g.jmax)
    rows = {}
    for (k, j), v in low.c.items():
        rows.setdefault(k, {})[j] = v
    for k, poly in rows.items():
        div = divisor_series(k, g.jmax)
        for j1, v in poly.items():
            for n in range(0, g.jmax - j1 + 1):
                if _is_zero(div[n]):
                    continue
                key = (k, j1 + n)
                psi[key] = psi[key] + v * div[n]
    return psi


def homological_residual(psi, g, K, b, nx=64, ny=16):
    """Max over an nx-by-ny grid (x in [0,1), |y| <= b) of
    |psi(x+y, y) - psi(x, y) - y g^{<K}(x, y)|, with psi evaluated at the
    exactly shifted argument."""
    low, _ = k_cutoff(g, K)
    b = mpf(b)
    worst = mpf(0)
    for i in range(nx):
        x = mpf(i) / nx
        for t in range(1, ny + 1):
            for y in (b * t / ny, -b * t / ny):
                res = psi.evaluate(x + y, y) - psi.evaluate(x, y) - y * low.evaluate(x, y)
                worst = max(worst, abs(res))
    return worst


# ---------------------------------------------------------------------------
# composition machinery
# ---------------------------------------------------------------------------


def _binomials(n):
    rows = [[1]]
    for i in range(1, n + 1):
        prev = rows[-1]
        rows.append([1] + [prev[j - 1] + prev[j] for j in range(1, i)] + [1])
    return rows


def _powers_of(u: FourierTaylorSeries, nmax):
    out = [None] * (nmax + 1)
    one = FourierTaylorSeries(u.kmax, u.jmax)
    one[0, 0] = 1
    out[0] = one
    for n in range(1, nmax + 1):
        out[n] = out[n - 1] * u
        if out[n].is_zero():
            return out[: n + 1]
    return out


def compose_series(f: FourierTaylorSeries, a, b, include_shear=False):
    """f(x + [y] + a(x,y), y + b(x,y)) truncated to f's (kmax, jmax).

    a and b must vanish at y = 0 (near-identity changes); include_shear adds
    the exact e^{2 pi i k y} factor of composition with A(x,y) = (x+y, y).
    """
    kmax, jmax = f.kmax, f.jmax
    ord_a = a.y_lowest_power() if (a is not None and not a.is_zero()) else None
    ord_b = b.y_lowest_power() if (b is not None and not b.is_zero()) else None
    if ord_a is not None and ord_a < 1:
        raise ValueError("angular shift must be O(y)")
    if ord_b is not None and ord_b < 1:
        raise ValueError("radial shift must be O(y)")
    nmax = jmax // ord_a if ord_a else 0
    tmax = jmax // ord_b if ord_b else 0
    pa = _powers_of(a, nmax) if ord_a else None
    pb = _powers_of(b, tmax) if ord_b else None
    nmax = len(pa) - 1 if pa else 0
    tmax = len(pb) - 1 if pb else 0
    binom = _binomials(jmax)
    two_pi_i = mpc(0, 2 * mp.pi)

    # factorials for the exponential shifts
    fact = [mpf(1)]
    for n in range(1, jmax + 1):
        fact.append(fact[-1] * n)

    out = FourierTaylorSeries(kmax, jmax)
    for n in range(nmax + 1):
        for t in range(tmax + 1):
            # S_{n,t}: scalar transform of f
            s = FourierTaylorSeries(kmax, jmax)
            for (k, j), v in f.c.items():
                if t > j:
                    continue
                base = v * binom[j][t] * (two_pi_i * k) ** n / fact[n]
                j1 = j - t
                if include_shear:
                    if k == 0:
                        if j1 <= jmax:
                            s[k, j1] = s[k, j1] + base
                    else:
                        wk = two_pi_i * k
                        wp = mpc(1)
                        for pshift in range(0, jmax - j1 + 1):
                            s[k, j1 + pshift] = s[k, j1 + pshift] + base * wp / fact[pshift]
                            wp *= wk
                else:
                    if j1 <= jmax:
                        s[k, j1] = s[k, j1] + base
            if s.is_zero():
                continue
            term = s
            if n > 0 or t > 0:
                mixer = pa[n] * pb[t] if (pa and pb) else (pa[n] if pa else pb[t])
                term = s * mixer
            out = out + term
    return out


def conjugate_map(F: MapSeries, change: ChangeOfVariables, new_order=None, max_fp_iter=40):
    """Phi^{-1} o F o Phi for a near-identity change Phi = Id + Psi, computed
    through R = F o Phi followed by the implicit solve Phi o H = R (fixed
    point; exact at the truncation order)."""
    psi1, psi2 = change.psi1, change.psi2
    kmax, jmax = F.kmax, F.jmax

    # R = F o Phi = A + G_R
    g1_phi = compose_series(F.g1, psi1, psi2)
    g2_phi = compose_series(F.g2, psi1, psi2)
    gr1 = psi1 + psi2 + g1_phi
    gr2 = psi2 + g2_phi

    # solve Phi o H = R:  G_H = G_R - Psi o (A + G_H)
    gh1, gh2 = gr1, gr2
    for _ in range(max_fp_iter):
        corr1 = compose_series(psi1, gh1, gh2, include_shear=True)
        corr2 = compose_series(psi2, gh1, gh2, include_shear=True)
        new1 = gr1 - corr1
        new2 = gr2 - corr2
        diff = _max_coeff(new1 - gh1) + _max_coeff(new2 - gh2)
        gh1, gh2 = new1, new2
        scale = _max_coeff(gh1) + _max_coeff(gh2) + mpf(1)
        if diff <= scale * mpf(2) ** (-mp.prec + 4):
            break
    order = new_order if new_order is not None else F.order
    return MapSeries(_clean_below(gh1, order), _clean_below(gh2, order + 1), order)


def _max_coeff(g: FourierTaylorSeries):
    return max((abs(v) for v in g.c.values()), default=mpf(0))


def _clean_below(g: FourierTaylorSeries, j_min, tol=None):
    """Drop roundoff-level coefficients in rows below j_min; raise if a
    structurally forbidden row carries weight above tolerance."""
    if tol is None:
        tol = (_max_coeff(g) + mpf(1)) * mpf(2) ** (-mp.prec + 48)
    out = FourierTaylorSeries(g.kmax, g.jmax)
    for (k, j), v in g.c.items():
        if j < j_min:
            if abs(v) > tol:
                raise ArithmeticError(
                    "order violation: coefficient (%d, %d) = %s above cleanup tolerance %s"
                    % (k, j, mp.nstr(abs(v), 5), mp.nstr(tol, 5))
                )
            continue
        out[k, j] = v
    return out


# ---------------------------------------------------------------------------
# averaging step (order raising)
# ---------------------------------------------------------------------------


class TruncationOrderError(ArithmeticError):
    pass


def averaging_step(F: MapSeries, ctx: RealContext = None, h2star_tol=None):
    """One order-raising change for F = A + G of order l:

        Phi(x, y) = (x + y^(l-1) psi1(x), y + y^l psi2(x)),
        psi2 = zero-mean antiderivative of (h2 - h2*) minus h1*,
        psi1 = zero-mean antiderivative of (psi2 + h1),

    where h1, h2 are the order-l angular and order-(l+1) radial coefficient
    functions.  The transformed map has zero order-l angular term and constant
    order-(l+1) radial term h2*; for maps with the intersection property h2*
    vanishes, and it is dropped when below tolerance (raising the order to
    l+1) and reported.
    """
    l = F.order
    if l < 2:
        raise ValueError("averaging needs order >= 2")
    if F.jmax < l + 2:
        raise TruncationOrderError("jmax = %d too small for an order-%d step" % (F.jmax, l))
    kmax, jmax = F.kmax, F.jmax

    h1 = FourierTaylorSeries(kmax, jmax)
    for k, v in F.g1.row(l).items():
        h1[k, 0] = v
    h2 = FourierTaylorSeries(kmax, jmax)
    for k, v in F.g2.row(l + 1).items():
        h2[k, 0] = v
    h1_star = h1[0, 0]
    h2_star = h2[0, 0]
    h1[0, 0] = 0
    h2[0, 0] = 0

    psi2 = h2.x_antiderivative_zero_mean()
    psi2[0, 0] = psi2[0, 0] - h1_star
    integrand = psi2 + h1
    integrand[0, 0] = 0  # zero mean by construction; clear roundoff
    psi1 = integrand.x_antiderivative_zero_mean()

    change = ChangeOfVariables(
        psi1.y_shifted(l - 1), psi2.y_shifted(l), l
    )
    if change.is_identity() and abs(h2_star) == 0:
        return change, MapSeries(F.g1, F.g2, l + 1) if _orders_allow(F, l + 1) else F, h2_star

    Fc = conjugate_map(F, change, new_order=l)

    scale = _max_coeff(Fc.g1) + _max_coeff(Fc.g2) + mpf(1)
    tol = h2star_tol if h2star_tol is not None else scale * mpf(2) ** (-mp.prec + 48)
    # the constructed change kills the order-l angular row exactly; remove
    # its roundoff residue, and the radial constant h2* when negligible
    g1_new = _clean_below(Fc.g1, l + 1, tol)
    g2_new = Fc.g2.copy()
    resid = g2_new[0, l + 1]
    if abs(resid - h2_star) > tol + abs(h2_star):
        raise ArithmeticError("radial constant after averaging differs from h2*")
    if abs(resid) > tol:
        raise TruncationOrderError(
            "order-(l+1) radial average %s above tolerance %s: the map lacks "
            "the intersection property at this truncation"
            % (mp.nstr(abs(resid), 5), mp.nstr(tol, 5))
        )
    g2_new[0, l + 1] = 0
    g2_new = _clean_below(g2_new, l + 2, tol)
    F_next = MapSeries(g1_new, g2_new, l + 1)
    return change, F_next, _real_part(h2_star)


def _orders_allow(F, order):
    lo1 = F.g1.y_lowest_power()
    lo2 = F.g2.y_lowest_power()
    return (lo1 is None or lo1 >= order) and (lo2 is None or lo2 >= order + 1)


def _real_part(v):
    return v.real if isinstance(v, mpc) else mpf(v)


def averaging_ladder(F: MapSeries, target_order: int, ctx: RealContext = None):
    """Raise F from its order to target_order by successive averaging steps;
    returns the final map and the per-rung (order, h2*, change) log."""
    rungs = []
    cur = F
    while cur.order < target_order:
        change, cur, h2s = averaging_step(cur, ctx)
        rungs.append((cur.order, h2s, change))
    return cur, rungs


# ---------------------------------------------------------------------------
# one cut-off iterative step
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IterativeStepReport:
    K: int
    bullet_norm_before: object   # at (a, b)
    bullet_norm_after: object    # at (a - 6b, b)
    star_norm_before: object
    star_norm_after: object


def neishtadt_step(F: MapSeries, a, b, s, ctx: RealContext = None):
    """One cut-off conjugation step: Psi solves the truncated linear equation

        Psi o A - A Psi = (G_bullet)^{<K},     K = floor(s/b), s in (0,1),

    via psi2 = Gk(g2^{<K} - g2*) - g1*, psi1 = Gk(psi2 + g1^{<K}).  Returns the
    change, the conjugated map, and the Fourier norms of the oscillatory
    projection before (at (a, b)) and after (at (a - 6b, b))."""
    m = F.order
    if m < 6:
        raise ValueError("iterative step requires order >= 6")
    a = mpf(a)
    b = mpf(b)
    s = mpf(s)
    if not (0 < s < 1):
        raise ValueError("cutoff parameter s must lie in (0,1)")
    if a - 6 * b <= 0:
        raise ValueError("strip too narrow: need a > 6b")
    K = int(mp.floor(s / b))
    if K < 1:
        raise ValueError("cutoff K = floor(s/b) must be >= 1")

    g1, g2 = F.cofactors()
    g1_star = g1.mean_in_x()
    g2_star = g2.mean_in_x()
    g1_low, _ = k_cutoff(g1, K)
    g2_low, _ = k_cutoff(g2, K)

    rhs2 = g2_low - g2_star
    psi2 = solve_homological(rhs2, K, ctx, b=b)
    psi2 = psi2 - g1_star
    rhs1 = psi2 + g1_low
    rhs1_mean = rhs1.mean_in_x()
    rhs1 = rhs1 - rhs1_mean  # zero mean up to roundoff; cleared exactly
    psi1 = solve_homological(rhs1, K, ctx, b=b)

    change = ChangeOfVariables(psi1.y_shifted(m - 1), psi2.y_shifted(m), m)
    before_bullet = F.bullet_norm(a, b)
    before_star = F.star_norm(a, b)
    Ft = conjugate_map(F, change, new_order=m)
    report = IterativeStepReport(
        K,
        before_bullet,
        Ft.bullet_norm(a - 6 * b, b),
        before_star,
        Ft.star_norm(a - 6 * b, b),
    )
    return change, Ft, report


# ---------------------------------------------------------------------------
# analytic bound constants (documented helpers; no operation depends on them)
# ---------------------------------------------------------------------------


def omega_constant(s, ctx: RealContext = None, n=720):
    """(1/2 pi) max_{|z| <= 2 pi s} |z / (e^z - 1)|: the single-equation
    small-divisor constant.  The function is analytic on |z| < 2 pi, so the
    maximum sits on the circle |z| = 2 pi s."""
    s = mpf(s)
    if not (0 < s < 1):
        raise ValueError("s must lie in (0,1)")
    r = 2 * mp.pi * s
    best = mpf(0)
    for i in range(n):
        z = r * mp.expjpi(2 * mpf(i) / n)
        best = max(best, abs(z / mp.expm1(z)))
    return best / (2 * mp.pi)


def Omega_constant(s, ctx: RealContext = None):
    """(omega + 1) max(1, omega): the two-equation version."""
    w = omega_constant(s, ctx)
    return (w + 1) * max(mpf(1), w)
