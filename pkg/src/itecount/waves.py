"""Scaled evaluation of the radial wave functions.

Everything here returns values in the form mantissa * exp(log_scale) so that
determinants built from them stay representable when the spectral parameter
moves far off the real axis (solutions grow like exp(|Im sqrt(lambda)|)).

Evaluation strategy per function:

* spherical j_l: power series for |z| < max(8, l/2), otherwise downward
  (Miller) recurrence normalized against the closed forms j_0 = sin z / z or
  j_1 (whichever is farther from a zero).  The recurrence is seeded above
  max(l, |z|) plus an O(|z|^{1/3}) safety margin; seeding lower (inside the
  oscillatory range) leaves an O(1) admixture of the dominant solution that
  normalization cannot remove.
* integer-order J_nu: the same power series split, with the oscillatory
  branch delegated to scipy's exponentially scaled Amos routine (jve).  A
  Miller pass normalized by the even-index sum rule loses all accuracy for
  |Im z| >~ 35 because the normalizing sum cancels to e^{-|Im z|} of its
  terms, so it is not used.
* spherical y_l (internal, for cross checks): upward recurrence, stable
  because y is the dominant solution, with on-the-fly renormalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, jve

from .errors import OutOfRange

__all__ = ["ScaledValue", "spherical_j", "bessel_J"]

_MAX_ORDER = 500
_MAX_ABS_SPH = 1.0e6
_MAX_ABS_J = 1.0e4


@dataclass(frozen=True)
class ScaledValue:
    """A complex value stored as mantissa * exp(log_scale).

    Normalized instances keep 0.5 <= |mantissa| <= 2 whenever the value is
    nonzero; pairs returned by the evaluators share one log_scale, with the
    larger member normalized.
    """

    mantissa: complex
    log_scale: float = 0.0

    def __post_init__(self):
        m = complex(self.mantissa)
        if not (np.isfinite(m.real) and np.isfinite(m.imag) and np.isfinite(self.log_scale)):
            raise ValueError("non-finite ScaledValue")

    @classmethod
    def from_complex(cls, value) -> "ScaledValue":
        return cls(complex(value), 0.0).normalized()

    def normalized(self) -> "ScaledValue":
        a = abs(self.mantissa)
        if a == 0.0:
            return ScaledValue(0.0, 0.0)
        shift = np.log(a)
        return ScaledValue(self.mantissa / a, self.log_scale + shift)

    @property
    def log_abs(self) -> float:
        a = abs(self.mantissa)
        return -np.inf if a == 0.0 else np.log(a) + self.log_scale

    def to_complex(self) -> complex:
        """Unscaled value; may overflow/underflow for extreme log_scale."""
        return self.mantissa * np.exp(self.log_scale)

    def __mul__(self, other: "ScaledValue") -> "ScaledValue":
        return ScaledValue(self.mantissa * other.mantissa,
                           self.log_scale + other.log_scale).normalized()

    def __sub__(self, other: "ScaledValue") -> "ScaledValue":
        ref = max(self.log_scale, other.log_scale)
        m = (self.mantissa * np.exp(self.log_scale - ref)
             - other.mantissa * np.exp(other.log_scale - ref))
        return ScaledValue(m, ref).normalized()

    def __neg__(self) -> "ScaledValue":
        return ScaledValue(-self.mantissa, self.log_scale)


def _clog(w: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(w.astype(complex))


def scaled_sincos(z: np.ndarray):
    """(sin z, cos z) both multiplied by exp(-|Im z|), overflow-free."""
    z = np.asarray(z, dtype=complex)
    t = np.abs(z.imag)
    x = z.real
    e1 = np.exp(1j * x - 2.0 * t)  # e^{iz} e^{-t} for Im z >= 0
    e2 = np.exp(-1j * x)           # e^{-iz} e^{-t} for Im z >= 0
    s = (e1 - e2) / 2j
    c = (e1 + e2) / 2.0
    flip = z.imag < 0
    return np.where(flip, np.conj(s), s), np.where(flip, np.conj(c), c)


# ---------------------------------------------------------------------------
# spherical Bessel j_l
# ---------------------------------------------------------------------------

def _sph_series_sum(l: int, z: np.ndarray) -> np.ndarray:
    """Sum of j_l(z) * (2l+1)!! / z^l; converges for moderate |z|/l."""
    w = -0.5 * z * z
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(1, 600):
        term = term * w / (k * (2 * l + 2 * k + 1))
        total = total + term
        if np.all(np.abs(term) <= 1e-18 * np.abs(total) + 1e-300):
            break
    return total

def _log_double_factorial(l: int) -> float:
    # (2l+1)!! = (2l+1)! / (2^l l!)
    return float(gammaln(2 * l + 2) - l * np.log(2.0) - gammaln(l + 1))

def _sph_series(l: int, z: np.ndarray):
    """(j_l, j_l') mantissas plus per-point log_scale via the power series."""
    s0 = _sph_series_sum(l, z)
    s1 = _sph_series_sum(l + 1, z)
    pref = l * np.log(z) - _log_double_factorial(l)   # complex log
    phase = np.exp(1j * pref.imag)
    val = s0 * phase
    # j_l' = (l/z) j_l - j_{l+1};  j_{l+1} prefactor = z * (this prefactor)/(2l+3)
    der = ((l / z) * s0 - z * s1 / (2 * l + 3)) * phase
    return val, der, pref.real

def _sph_miller(l: int, z: np.ndarray):
    """(j_l, j_l') mantissas at log_scale=|Im z| via downward recurrence."""
    az = np.abs(z)
    top = max(l, int(np.ceil(az.max())))
    start = top + 25 + int(7.0 * top ** (1.0 / 3.0))
    f_up = np.zeros_like(z)
    f_cur = np.full_like(z, 1e-280)
    f_l = np.zeros_like(z)
    f_lm1 = np.zeros_like(z)
    f_1 = np.zeros_like(z)
    f_0 = np.zeros_like(z)
    if l == start:
        f_l = f_cur.copy()
    for k in range(start, 0, -1):
        f_new = (2 * k + 1) / z * f_cur - f_up
        f_up, f_cur = f_cur, f_new
        big = np.abs(f_cur) > 1e250
        if np.any(big):
            sc = np.where(big, 1e-250, 1.0)
            f_up = f_up * sc
            f_cur = f_cur * sc
            f_l = f_l * sc
            f_lm1 = f_lm1 * sc
            f_1 = f_1 * sc
        kk = k - 1
        if kk == l:
            f_l = f_cur.copy()
        if kk == l - 1:
            f_lm1 = f_cur.copy()
        if kk == 1:
            f_1 = f_cur.copy()
    f_0 = f_cur
    s, c = scaled_sincos(z)
    j0 = s / z
    j1 = s / (z * z) - c / z
    use1 = np.abs(j1) > np.abs(j0)
    log_alpha = (_clog(np.where(use1, j1, j0))
                 - _clog(np.where(use1, f_1, f_0)))

    def restore(f):
        out = np.exp(_clog(f) + log_alpha)
        return np.where(np.abs(f) == 0, 0.0 + 0.0j, out)

    jl = restore(f_l)
    if l == 0:
        jd = -restore(f_1)
    else:
        jd = restore(f_lm1) - (l + 1) / z * jl
    return jl, jd, np.abs(z.imag)


def spherical_j_many(l: int, z: np.ndarray):
    """Vectorized j_l and j_l' for complex z.

    Returns (value_mantissa, derivative_mantissa, log_scale) arrays; the two
    mantissas at each point share the one log_scale.
    """
    if l < 0 or l > _MAX_ORDER:
        raise OutOfRange(f"spherical order l={l} outside [0, {_MAX_ORDER}]")
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(np.abs(z) > _MAX_ABS_SPH):
        raise OutOfRange(f"|z| exceeds {_MAX_ABS_SPH:g}")
    vm = np.zeros_like(z)
    dm = np.zeros_like(z)
    lg = np.zeros(z.shape)
    az = np.abs(z)
    at_zero = az == 0
    series = (~at_zero) & (az < max(8.0, l / 2.0))
    miller = (~at_zero) & (~series)
    if np.any(at_zero):
        vm[at_zero] = 1.0 if l == 0 else 0.0
        dm[at_zero] = (1.0 / 3.0) if l == 1 else 0.0
    if np.any(series):
        v, d, g = _sph_series(l, z[series])
        vm[series], dm[series], lg[series] = v, d, g
    if np.any(miller):
        v, d, g = _sph_miller(l, z[miller])
        vm[miller], dm[miller], lg[miller] = v, d, g
    return vm, dm, lg


def spherical_j(l: int, z) -> tuple[ScaledValue, ScaledValue]:
    """j_l(z) and j_l'(z) as ScaledValues sharing one log_scale."""
    vm, dm, lg = spherical_j_many(l, np.array([complex(z)]))
    return _shared_pair(vm[0], dm[0], lg[0])


def _shared_pair(v: complex, d: complex, lg: float):
    big = max(abs(v), abs(d))
    if big == 0.0:
        return ScaledValue(0.0, 0.0), ScaledValue(0.0, 0.0)
    shift = np.log(big)
    return (ScaledValue(v / big, lg + shift), ScaledValue(d / big, lg + shift))


# ---------------------------------------------------------------------------
# integer-order Bessel J_nu
# ---------------------------------------------------------------------------

def _J_series_sum(nu: int, z: np.ndarray) -> np.ndarray:
    w = -0.25 * z * z
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(1, 600):
        term = term * w / (k * (nu + k))
        total = total + term
        if np.all(np.abs(term) <= 1e-18 * np.abs(total) + 1e-300):
            break
    return total


def bessel_J_many(nu: int, z: np.ndarray):
    """Vectorized J_nu and J_nu' with shared per-point log_scale."""
    if nu < 0 or nu > _MAX_ORDER:
        raise OutOfRange(f"Bessel order nu={nu} outside [0, {_MAX_ORDER}]")
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(np.abs(z) > _MAX_ABS_J):
        raise OutOfRange(f"|z| exceeds {_MAX_ABS_J:g}")
    vm = np.zeros_like(z)
    dm = np.zeros_like(z)
    lg = np.zeros(z.shape)
    az = np.abs(z)
    at_zero = az == 0
    series = (~at_zero) & (az < max(8.0, nu / 2.0))
    osc = (~at_zero) & (~series)
    if np.any(at_zero):
        vm[at_zero] = 1.0 if nu == 0 else 0.0
        dm[at_zero] = 0.5 if nu == 1 else 0.0
    if np.any(series):
        zs = z[series]
        s0 = _J_series_sum(nu, zs)
        s1 = _J_series_sum(nu + 1, zs)
        pref = nu * np.log(zs / 2.0) - gammaln(nu + 1)
        phase = np.exp(1j * pref.imag)
        vm[series] = s0 * phase
        dm[series] = ((nu / zs) * s0 - zs * s1 / (2.0 * (nu + 1))) * phase
        lg[series] = pref.real
    if np.any(osc):
        zs = z[osc]
        v = jve(nu, zs)
        d = 0.5 * (jve(nu - 1, zs) - jve(nu + 1, zs)) if nu > 0 else -jve(1, zs)
        vm[osc] = v
        dm[osc] = d
        lg[osc] = np.abs(zs.imag)
    return vm, dm, lg


def bessel_J(nu: int, z) -> tuple[ScaledValue, ScaledValue]:
    """J_nu(z) and J_nu'(z) as ScaledValues sharing one log_scale."""
    vm, dm, lg = bessel_J_many(nu, np.array([complex(z)]))
    return _shared_pair(vm[0], dm[0], lg[0])


# ---------------------------------------------------------------------------
# spherical y_l, internal (Wronskian cross checks only)
# ---------------------------------------------------------------------------

def spherical_y_many(l: int, z: np.ndarray):
    """Vectorized y_l, y_l' (mantissa, mantissa, log_scale); upward recurrence."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    s, c = scaled_sincos(z)
    y_prev = -c / z                  # y_0
    y_cur = -c / (z * z) - s / z     # y_1
    off = np.zeros(z.shape)
    if l == 0:
        # y_0' = y_{-1}... use y_0' = (cos z)/z^2 + (sin z)/z directly
        d = c / (z * z) + s / z
        return y_prev, d, np.abs(z.imag)
    for k in range(1, l):
        y_new = (2 * k + 1) / z * y_cur - y_prev
        y_prev, y_cur = y_cur, y_new
        big = np.abs(y_cur) > 1e250
        if np.any(big):
            sc = np.where(big, 1e-250, 1.0)
            y_prev = y_prev * sc
            y_cur = y_cur * sc
            off = off + np.where(big, 250 * np.log(10.0), 0.0)
    # y_prev = y_{l-1}, y_cur = y_l, both at log_scale |Im z| + off
    d = y_prev - (l + 1) / z * y_cur
    return y_cur, d, np.abs(z.imag) + off
