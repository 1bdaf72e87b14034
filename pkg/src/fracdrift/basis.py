"""Interval-supported orthonormal trigonometric family.

Element 1 is the normalized constant, element 2j the cosine and element
2j+1 the sine at frequency j, all supported on the interval and vanishing
outside it.  Antiderivatives are anchored so they vanish at the left
endpoint and stay constant outside the interval, which keeps them
continuous on the whole line.  Sup norms of the elements, their
derivatives and their antiderivatives are available in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .validation import as_float_array, check_interval

__all__ = [
    "IntervalSupport",
    "C1Function",
    "TrigBasis",
    "CoefficientVector",
    "trig_basis",
    "basis_constants",
    "project_function",
]


@dataclass(frozen=True)
class IntervalSupport:
    """The compact interval [lo, hi] carrying the basis."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = check_interval(self.lo, self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def grid(self, points: int) -> np.ndarray:
        return np.linspace(self.lo, self.hi, points)


@dataclass(frozen=True)
class C1Function:
    """A function bundled with its derivative and an antiderivative."""

    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    antiderivative: Callable[[np.ndarray], np.ndarray]


class TrigBasis:
    """The first ``m`` elements of the trigonometric family on a support.

    Provides vectorized evaluation of all elements at once (rows indexed by
    element) and cached sup-norm sequences used by the diagnostic bounds.
    """

    def __init__(self, support: IntervalSupport, m: int):
        if int(m) < 1:
            raise ValueError(f"m must be >= 1, got {m}")
        self.support = support
        self.m = int(m)
        lam = support.length
        self._lam = lam
        self._c0 = np.sqrt(1.0 / lam)
        self._c1 = np.sqrt(2.0 / lam)
        # freq[k-1] is the integer frequency of element k (0 for the constant).
        ks = np.arange(1, self.m + 1)
        self._freq = np.where(ks == 1, 0, np.where(ks % 2 == 0, ks // 2, (ks - 1) // 2))
        self._is_cos = (ks % 2 == 0)
        omega = 2.0 * np.pi * self._freq / lam

        sup = np.full(self.m, self._c1)
        sup[0] = self._c0
        self.sup_norms = sup

        dsup = self._c1 * omega
        dsup[0] = 0.0
        self.deriv_sup_norms = dsup

        asup = np.empty(self.m)
        asup[0] = self._c0 * lam
        for idx in range(1, self.m):
            amp = self._c1 * lam / (2.0 * np.pi * self._freq[idx])
            asup[idx] = amp if self._is_cos[idx] else 2.0 * amp
        self.antideriv_sup_norms = asup

    def _angles(self, x: np.ndarray) -> np.ndarray:
        rel = (x[None, :] - self.support.lo) / self._lam
        return 2.0 * np.pi * self._freq[:, None] * rel

    def values(self, x) -> np.ndarray:
        """Element values, shape (m, len(x)); zero outside the support."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        inside = (x >= self.support.lo) & (x <= self.support.hi)
        ang = self._angles(x)
        out = np.where(self._is_cos[:, None], np.cos(ang), np.sin(ang)) * self._c1
        out[0, :] = self._c0
        return np.where(inside[None, :], out, 0.0)

    def derivs(self, x) -> np.ndarray:
        """Element derivatives, shape (m, len(x)); zero outside the support."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        inside = (x >= self.support.lo) & (x <= self.support.hi)
        ang = self._angles(x)
        omega = 2.0 * np.pi * self._freq[:, None] / self._lam
        out = np.where(self._is_cos[:, None], -np.sin(ang), np.cos(ang))
        out = out * omega * self._c1
        out[0, :] = 0.0
        return np.where(inside[None, :], out, 0.0)

    def antiderivs(self, x) -> np.ndarray:
        """Antiderivatives anchored at lo, shape (m, len(x)).

        Constant outside the support: 0 to the left, the value at hi to the
        right (clipping the argument realizes both).
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xc = np.clip(x, self.support.lo, self.support.hi)
        ang = self._angles(xc)
        out = np.empty((self.m, x.size))
        out[0, :] = self._c0 * (xc - self.support.lo)
        for idx in range(1, self.m):
            amp = self._c1 * self._lam / (2.0 * np.pi * self._freq[idx])
            if self._is_cos[idx]:
                out[idx, :] = amp * np.sin(ang[idx, :])
            else:
                out[idx, :] = amp * (1.0 - np.cos(ang[idx, :]))
        return out

    def element(self, j: int) -> C1Function:
        """Element ``j`` (1-based) as a scalar-friendly function triple."""
        if not 1 <= j <= self.m:
            raise IndexError(f"element index {j} out of range 1..{self.m}")
        i = j - 1

        def _row(eval_all, x):
            res = eval_all(np.atleast_1d(np.asarray(x, dtype=float)))[i]
            return res if np.ndim(x) else float(res[0])

        return C1Function(
            value=lambda x: _row(self.values, x),
            derivative=lambda x: _row(self.derivs, x),
            antiderivative=lambda x: _row(self.antiderivs, x),
        )


@dataclass
class CoefficientVector:
    """Coordinates of an element of the span in the basis (length m)."""

    values: np.ndarray
    basis: TrigBasis

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.basis.m,):
            raise ValueError(
                f"coefficient vector must have length m={self.basis.m}, "
                f"got shape {vals.shape}"
            )
        self.values = vals

    def evaluate(self, x) -> np.ndarray:
        return self.values @ self.basis.values(x)

    def evaluate_deriv(self, x) -> np.ndarray:
        return self.values @ self.basis.derivs(x)

    def evaluate_antideriv(self, x) -> np.ndarray:
        return self.values @ self.basis.antiderivs(x)

    def copy(self) -> "CoefficientVector":
        return CoefficientVector(self.values.copy(), self.basis)


def trig_basis(support: IntervalSupport, m: int) -> TrigBasis:
    """Build the trigonometric family of dimension ``m`` on ``support``."""
    return TrigBasis(support, m)


def basis_constants(spec: TrigBasis) -> dict:
    """Exact sums of squared sup norms: values (L_m), derivatives (R_m),
    antiderivatives (I_m)."""
    return {
        "L_m": float(np.sum(spec.sup_norms**2)),
        "R_m": float(np.sum(spec.deriv_sup_norms**2)),
        "I_m": float(np.sum(spec.antideriv_sup_norms**2)),
    }


def project_function(g, spec: TrigBasis, quadrature_points: int = 10_001) -> CoefficientVector:
    """Coefficients of the L2(I) projection of ``g`` onto the basis span.

    Coefficient j is the composite-quadrature value of the inner product of
    g with element j over the support.
    """
    x = spec.support.grid(int(quadrature_points))
    gx = np.asarray(g(x), dtype=float)
    if gx.shape != x.shape:
        gx = np.broadcast_to(gx, x.shape).astype(float)
    if not np.all(np.isfinite(gx)):
        raise ValueError("g takes non-finite values on the support")
    coeffs = simpson(gx[None, :] * spec.values(x), x=x, axis=-1)
    return CoefficientVector(np.asarray(coeffs, dtype=float), spec)


def l2_inner(f, g, support: IntervalSupport, quadrature_points: int = 10_001) -> float:
    """Plain L2(I) inner product by composite quadrature (test utility)."""
    x = support.grid(int(quadrature_points))
    fx = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    gx = np.broadcast_to(np.asarray(g(x), dtype=float), x.shape)
    return float(simpson(fx * gx, x=x))
