"""Arbitrary-precision arithmetic configuration.

All numerical kernels in this package run inside ``ctx.workprec()`` where
``ctx`` is a :class:`RealContext`.  Precision is expressed as mantissa bits;
the working precision carries a fixed number of guard bits on top so that
results are honest to roughly ``ctx.eps``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from mpmath import mp, mpf

GUARD_BITS = 32

# numbers fed into curves/series are snapshotted once at this precision,
# which caps the usable mantissa range well above the default escalation cap
SNAPSHOT_BITS = 4096


def to_mpf(x):
    """Convert a number (int, float, str, mpf) to mpf without precision loss
    for exact binary inputs; strings are snapshotted at SNAPSHOT_BITS."""
    if isinstance(x, mpf):
        return x
    if isinstance(x, int):
        return mpf(x)
    if isinstance(x, float):
        return mpf(x)  # exact
    with mp.workprec(SNAPSHOT_BITS):
        return mpf(x)


@dataclass(frozen=True)
class RealContext:
    """Precision configuration: mantissa bits plus derived tolerances.

    eps        = 2^-mantissa_bits
    solver_tol = 2^-(mantissa_bits/2) unless overridden
    """

    mantissa_bits: int = 256
    solver_tol_override: float | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.mantissa_bits < 64:
            raise ValueError("mantissa_bits must be >= 64")
        if self.solver_tol_override is not None:
            st = float(self.solver_tol_override)
            if not (2.0 ** (-self.mantissa_bits) < st < 1.0):
                raise ValueError("solver_tol must satisfy eps < solver_tol < 1")

    @property
    def working_prec(self) -> int:
        return self.mantissa_bits + GUARD_BITS

    def workprec(self):
        """Context manager setting the mpmath working precision."""
        return mp.workprec(self.working_prec)

    @property
    def eps(self) -> mpf:
        with self.workprec():
            return mpf(2) ** (-self.mantissa_bits)

    @property
    def solver_tol(self) -> mpf:
        with self.workprec():
            if self.solver_tol_override is not None:
                return mpf(self.solver_tol_override)
            return mpf(2) ** (-self.mantissa_bits // 2)

    @property
    def delta_floor(self) -> mpf:
        """Escalation threshold for action gaps: 2^-(bits/4).  Gaps below it
        are recomputed at doubled precision (see orbits.delta_spectrum)."""
        with self.workprec():
            return mpf(2) ** (-self.mantissa_bits // 4)

    def doubled(self) -> "RealContext":
        return RealContext(2 * self.mantissa_bits, self.solver_tol_override)

    def nstr(self, x) -> str:
        """Full-working-precision decimal string of x."""
        digits = int(self.mantissa_bits * 0.30103) + 8
        return mp.nstr(x, digits)
