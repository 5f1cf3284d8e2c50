"""Per-mode characteristic determinants for the transmission eigenvalue problem.

Separation of variables on the unit interval/disk/ball reduces the coupled
eigenvalue problem to one 2x2 boundary-matching determinant per angular mode;
its zeros (counted by zero order) are the eigenvalues carried by that mode.
Evaluations are exponentially scaled so contours far from the real axis stay
representable, and normalized so a fixed positive factor never affects the
phase used by the winding counter.

Mode index convention: n = 1 uses l = 0 for the even-parity family and l = 1
for the odd one; n = 2, 3 use the usual angular index l >= 0.  The odd 1-D
family uses the sin(k x)/k basis so that the determinant is an entire,
single-valued function of the spectral parameter (it is even under a joint
sign flip of both wave numbers).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import gammaln

from .errors import InvalidContrast, OutOfRange, StiffFailure, UncertifiedCutoff, ZeroOnBoundary
from .waves import ScaledValue, bessel_J_many, scaled_sincos, spherical_j_many
from .winding import Rect, winding_count

__all__ = [
    "Contrast", "ModeProblem", "ModeCutoff", "ModeDeterminant",
    "char_det", "radial_shoot", "mode_multiplicity", "certify_cutoff",
]

_CUTOFF_MARGIN = 5     # consecutive empty modes required to certify
_MAX_MODE = 600


@dataclass(frozen=True)
class Contrast:
    """Refractive-index perturbation m on the unit ball.

    Constant contrasts carry a single value; radial ones carry callables for
    m(rho) and m'(rho) on [0, 1].  Admissibility (1 + m bounded away from
    zero, m nonzero at the boundary) is enforced on construction.
    """

    kind: str                       # "constant" | "radial"
    value: float = 0.0
    profile: Callable[[float], float] | None = None
    derivative: Callable[[float], float] | None = None

    def __post_init__(self):
        if self.kind == "constant":
            if 1.0 + self.value <= 0.0:
                raise InvalidContrast("need 1 + m > 0 on the closed domain")
            if self.value == 0.0:
                raise InvalidContrast("contrast must be nonzero on the boundary")
        elif self.kind == "radial":
            if self.profile is None or self.derivative is None:
                raise InvalidContrast("radial contrast needs profile and derivative")
            rho = np.linspace(0.0, 1.0, 201)
            vals = np.array([self.profile(t) for t in rho], dtype=float)
            if np.any(1.0 + vals <= 0.0):
                raise InvalidContrast("need 1 + m > 0 on the closed domain")
            if abs(vals[-1]) < 1e-14:
                raise InvalidContrast("contrast must be nonzero on the boundary")
        else:
            raise InvalidContrast(f"unknown contrast kind {self.kind!r}")

    @classmethod
    def constant(cls, value: float) -> "Contrast":
        return cls(kind="constant", value=value)

    @classmethod
    def radial(cls, profile, derivative) -> "Contrast":
        return cls(kind="radial", value=0.0, profile=profile, derivative=derivative)

    def at(self, rho: float) -> float:
        return self.value if self.kind == "constant" else float(self.profile(rho))

    def boundary_value(self) -> float:
        return self.at(1.0)


@dataclass(frozen=True)
class ModeProblem:
    """One separated angular mode on the unit ball in dimension n."""

    n: int
    l: int
    contrast: Contrast

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise OutOfRange("dimension n must be 1, 2 or 3")
        if self.l < 0 or self.l > _MAX_MODE:
            raise OutOfRange(f"mode index l={self.l} outside [0, {_MAX_MODE}]")
        if self.n == 1 and self.l not in (0, 1):
            raise OutOfRange("n=1 uses l=0 (even parity) or l=1 (odd parity)")


@dataclass(frozen=True)
class ModeCutoff:
    """Certified angular cutoff: modes above L are empty up to radius r."""

    L: int
    r: float
    certified: bool


def mode_multiplicity(n: int, l: int) -> int:
    """Dimension of the angular eigenspace attached to mode l."""
    if n == 1:
        return 1
    if n == 2:
        return 1 if l == 0 else 2
    if n == 3:
        return 2 * l + 1
    raise OutOfRange("dimension n must be 1, 2 or 3")


class ModeDeterminant:
    """Vectorized evaluator of one mode's boundary determinant.

    Instances are callables (scalar lambda -> ScaledValue) and provide
    eval_many for the winding engine; they are safe to share across threads.
    """

    def __init__(self, mode: ModeProblem, branch: int = 1):
        if branch not in (1, -1):
            raise ValueError("branch must be +1 or -1")
        self.mode = mode
        self.branch = branch

    def __call__(self, lam) -> ScaledValue:
        mant, logmod = self.eval_many(np.array([complex(lam)]))
        m = mant[0]
        a = abs(m)
        if a == 0.0:
            return ScaledValue(0.0, 0.0)
        return ScaledValue(m / a, logmod[0])

    def eval_many(self, lams: np.ndarray):
        """Return (mantissa, log-modulus) arrays of the scaled determinant."""
        lams = np.asarray(lams, dtype=complex)
        mode = self.mode
        if mode.contrast.kind == "radial":
            mant = np.empty(lams.shape, dtype=complex)
            logmod = np.empty(lams.shape, dtype=float)
            for i, lam in np.ndenumerate(lams):
                sv = radial_shoot(mode, complex(lam))
                mant[i] = sv.mantissa
                logmod[i] = sv.log_abs
            return mant, logmod
        m = mode.contrast.value
        k = self.branch * np.sqrt(lams)
        kap = np.sqrt(1.0 + m) * k
        if mode.n == 1:
            s_k, c_k = scaled_sincos(k)
            s_K, c_K = scaled_sincos(kap)
            if mode.l == 0:     # even parity: cos basis
                mant = kap * c_k * s_K - k * c_K * s_k
            else:               # odd parity: sin(k x)/k basis
                mant = c_k * s_K / kap - c_K * s_k / k
            log = np.abs(k.imag) + np.abs(kap.imag)
        elif mode.n == 3:
            vk, dk, gk = spherical_j_many(mode.l, k)
            vK, dK, gK = spherical_j_many(mode.l, kap)
            mant = k * vK * dk - kap * vk * dK
            log = gk + gK
        else:
            vk, dk, gk = bessel_J_many(mode.l, k)
            vK, dK, gK = bessel_J_many(mode.l, kap)
            mant = k * vK * dk - kap * vk * dK
            log = gk + gK
        with np.errstate(divide="ignore"):
            extra = np.where(np.abs(mant) > 0, np.log(np.abs(mant) + 5e-324), -np.inf)
        return mant, log + extra


def char_det(mode: ModeProblem, lam, branch: int = 1) -> ScaledValue:
    """Scaled boundary determinant of one mode at spectral parameter lam.

    Zeros of the determinant (with their orders) are the mode's transmission
    eigenvalues; the overall exp-scaling keeps contour work finite at large
    |Im sqrt(lam)|.
    """
    if lam == 0:
        raise OutOfRange("lambda = 0 is excluded")
    return ModeDeterminant(mode, branch=branch)(lam)


# ---------------------------------------------------------------------------
# radial shooting for non-constant contrast
# ---------------------------------------------------------------------------

_RHO0 = 1e-3
_SERIES_TERMS = 9
_SHOOT_RTOL = 1e-10
_MAX_NFEV = 1_000_000


def _frobenius_start(p: int, n: int, leff2: float, lam: complex, c0: complex,
                     c1: complex, c2: complex):
    """Regular-solution value and derivative of w/rho^p at rho = _RHO0."""
    a = np.zeros(_SERIES_TERMS, dtype=complex)
    a[0] = 1.0
    for j in range(1, _SERIES_TERMS):
        dj = (p + j) * (p + j - 1) + (n - 1) * (p + j) - leff2
        src = c0 * (a[j - 2] if j >= 2 else 0.0)
        src += c1 * (a[j - 3] if j >= 3 else 0.0)
        src += c2 * (a[j - 4] if j >= 4 else 0.0)
        if dj == 0:
            a[j] = 0.0
        else:
            a[j] = -lam * src / dj
    rho = _RHO0
    u = sum(a[j] * rho ** j for j in range(_SERIES_TERMS))
    up = sum(a[j] * (p + j) * rho ** (j - 1) for j in range(_SERIES_TERMS))
    return u, up


def radial_shoot(mode: ModeProblem, lam: complex) -> ScaledValue:
    """Boundary determinant via adaptive integration of the two radial ODEs.

    Matches char_det's normalization for constant contrast: the free-space
    column is j_l(k rho) (resp. J_l, cos/sinc for n=1), so for m = const the
    two evaluations agree to integration tolerance.
    """
    if lam == 0:
        raise OutOfRange("lambda = 0 is excluded")
    lam = complex(lam)
    n, l = mode.n, mode.l
    contrast = mode.contrast
    if n == 1:
        p, leff2 = l, 0.0          # parity via leading power, no angular term
    else:
        p, leff2 = l, float(l * (l + 1 + (n - 3)))
    m0 = contrast.at(0.0)
    if contrast.kind == "radial":
        d0 = float(contrast.derivative(0.0))
        h = 1e-3
        d2 = (float(contrast.derivative(h)) - d0) / h
    else:
        d0, d2 = 0.0, 0.0
    k = np.sqrt(complex(lam))
    kap0 = np.sqrt((1.0 + m0) * lam)

    def c_free(rho):
        return 1.0

    def c_pert(rho):
        return 1.0 + contrast.at(rho)

    def integrate(cfun, c0, c1, c2):
        u0, up0 = _frobenius_start(p, n, leff2, lam, c0, c1, c2)
        y = np.array([u0, up0], dtype=complex)
        log_acc = 0.0
        nfev = 0
        n_seg = max(1, int(np.ceil(p / 16.0)))
        bps = np.geomspace(_RHO0, 1.0, n_seg + 1)
        for a, b in zip(bps[:-1], bps[1:]):
            scale = max(np.abs(y))
            if scale > 0:
                y = y / scale
                log_acc += np.log(scale)

            def rhs(rho, w):
                return [w[1],
                        -((n - 1) / rho) * w[1]
                        - (lam * cfun(rho) - leff2 / rho ** 2) * w[0]]

            sol = solve_ivp(rhs, (a, b), y, method="DOP853",
                            rtol=_SHOOT_RTOL, atol=1e-13, dense_output=False)
            nfev += sol.nfev
            if not sol.success or nfev > _MAX_NFEV:
                raise StiffFailure(f"radial integration failed (nfev={nfev})")
            y = sol.y[:, -1]
        return y[0], y[1], log_acc

    u1, up1, log_u = integrate(c_free, 1.0, 0.0, 0.0)
    v1, vp1, log_v = integrate(c_pert, 1.0 + m0, d0, d2)

    # Normalization prefactors matching the closed-form bases.
    if n == 1:
        pref = 0.0 + 0.0j
    elif n == 3:
        logdf = gammaln(2 * l + 2) - l * np.log(2.0) - gammaln(l + 1)
        pref = l * (np.log(k) + np.log(kap0)) - 2.0 * logdf
    else:
        pref = l * (np.log(k / 2.0) + np.log(kap0 / 2.0)) - 2.0 * gammaln(l + 1)

    mant = v1 * up1 - u1 * vp1
    log = log_u + log_v + pref.real
    mant = mant * np.exp(1j * pref.imag)
    a = abs(mant)
    if a == 0.0:
        return ScaledValue(0.0, 0.0)
    return ScaledValue(mant / a, log + np.log(a))


# ---------------------------------------------------------------------------
# angular cutoff certification
# ---------------------------------------------------------------------------

def _mode_count_in_box(det: ModeDeterminant, r: float, r_min: float) -> int:
    """Zeros of one mode in the square |Re|,|Im| <= r minus a tiny center square.

    The square strictly contains every point with r_min <= |lambda| <= r, so
    an empty box certifies an empty mode.  Cut lines avoid the real axis
    (where eigenvalues live); retries jitter the center-square size.
    """
    s0 = r_min / np.sqrt(2.0) * 0.999
    last = None
    for attempt in range(9):
        s = s0 * (1.0 + 1e-3 * attempt)
        grow = 1.0 if attempt == 0 else 1.0 + 1e-7 * 30.0 ** (attempt - 1)
        R = r * grow
        rects = [Rect(-R, -s, -R, R), Rect(s, R, -R, R),
                 Rect(-s, s, s, R), Rect(-s, s, -R, -s)]
        try:
            return sum(winding_count(det, rc).count for rc in rects)
        except ZeroOnBoundary as exc:
            last = exc
    raise last


def certify_cutoff(n: int, contrast: Contrast, r: float,
                   r_min: float = 1e-3) -> ModeCutoff:
    """Smallest L with five consecutive empty modes above it (radius r)."""
    if r <= 0:
        raise OutOfRange("r must be positive")
    if n == 1:
        return ModeCutoff(L=1, r=r, certified=True)
    candidate = -1
    empty_run = 0
    l = 0
    while l <= _MAX_MODE:
        det = ModeDeterminant(ModeProblem(n=n, l=l, contrast=contrast))
        cnt = _mode_count_in_box(det, r, r_min)
        if cnt > 0:
            candidate = l
            empty_run = 0
        else:
            empty_run += 1
            if empty_run >= _CUTOFF_MARGIN:
                return ModeCutoff(L=max(candidate, 0), r=r, certified=True)
        l += 1
    raise UncertifiedCutoff(f"no empty tail found below l={_MAX_MODE}")
