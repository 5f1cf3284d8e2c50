"""Argument-principle zero counting in axis-aligned complex rectangles.

The winding number is obtained by tracking the phase of f along the
rectangle boundary.  Sampling is refined locally (offending segments are
bisected) until every consecutive phase step is below pi/2, which makes the
unwrapped total phase, and hence the integer count, unambiguous.  Counting
never integrates f'/f, so quadrature error cannot corrupt the integer.

Functions may return plain complex numbers or ScaledValues; an adapter
normalizes both to (mantissa, log-modulus) form so that exponentially large
or tiny determinants can be traced along a contour without overflow.  Only
the mantissa phase and the log-modulus enter the algorithm, so a positive
real rescaling of f (for example the exp(|Im k|) normalization used by the
mode determinants) does not affect any count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter1d

from .errors import NonConvergent, ZeroOnBoundary
from .waves import ScaledValue

__all__ = ["Rect", "ZeroReport", "winding_count", "refine_zeros", "count_in_sector"]

DEFAULT_TOL = 1e-12
DEFAULT_BUDGET = 1 << 20
_POINTS_PER_EDGE = 64
# A cell below this relative size stops subdividing and is reported as one
# zero whose order is the cell count.  Splitting further would drive cuts
# into the region where a multiple zero's values sit below evaluation noise.
_CLUSTER_REL = 1e-6
_NUDGE_REL = 1e-7            # relative cut shift used when a zero sits on a cut
_NUDGE_TRIES = 8
_MOD_STEP = 0.7              # max allowed |d log|f|| per contour step


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in the complex plane."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def width(self) -> float:
        return self.re_max - self.re_min

    @property
    def height(self) -> float:
        return self.im_max - self.im_min

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max),
                       0.5 * (self.im_min + self.im_max))

    @property
    def diag(self) -> float:
        return float(np.hypot(self.width, self.height))

    def contains(self, z: complex, slack: float = 0.0) -> bool:
        return (self.re_min - slack <= z.real <= self.re_max + slack
                and self.im_min - slack <= z.imag <= self.im_max + slack)


@dataclass
class ZeroReport:
    """Zeros (with order) found inside a query region."""

    count: int
    zeros: list = field(default_factory=list)     # [(location, order), ...]
    boundary_min_modulus: float = np.inf
    cells_used: int = 0

    def locations(self):
        return [z for z, _ in self.zeros]


class _Fn:
    """Adapter: vectorized (mantissa, log-modulus) evaluation with a counter."""

    def __init__(self, f):
        self.f = f
        self.evals = 0
        self._many = getattr(f, "eval_many", None)

    def __call__(self, zs: np.ndarray):
        zs = np.asarray(zs, dtype=complex)
        self.evals += zs.size
        if self._many is not None:
            mant, logmod = self._many(zs)
            return np.asarray(mant, dtype=complex), np.asarray(logmod, dtype=float)
        mant = np.empty(zs.shape, dtype=complex)
        logmod = np.empty(zs.shape, dtype=float)
        for i, z in np.ndenumerate(zs):
            v = self.f(complex(z))
            if isinstance(v, ScaledValue):
                mant[i] = v.mantissa
                a = abs(v.mantissa)
                logmod[i] = -np.inf if a == 0.0 else np.log(a) + v.log_scale
            else:
                v = complex(v)
                mant[i] = v
                a = abs(v)
                logmod[i] = -np.inf if a == 0.0 else np.log(a)
        return mant, logmod


def _boundary_points(rect: Rect, ts: np.ndarray) -> np.ndarray:
    """Map parameters t in [0,4) to boundary points, counterclockwise."""
    ts = np.asarray(ts, dtype=float)
    z = np.empty(ts.shape, dtype=complex)
    w, h = rect.width, rect.height
    e = ts.astype(int) % 4
    u = ts - np.floor(ts)
    z[e == 0] = rect.re_min + u[e == 0] * w + 1j * rect.im_min
    z[e == 1] = rect.re_max + 1j * (rect.im_min + u[e == 1] * h)
    z[e == 2] = rect.re_max - u[e == 2] * w + 1j * rect.im_max
    z[e == 3] = rect.re_min + 1j * (rect.im_max - u[e == 3] * h)
    return z


def _wrap(dphi: np.ndarray) -> np.ndarray:
    return (dphi + np.pi) % (2.0 * np.pi) - np.pi


def _trace_contour(fn: _Fn, rect: Rect, tol: float, budget: int = DEFAULT_BUDGET):
    """Refine boundary sampling until all phase steps are < pi/2.

    The budget caps evaluations spent on this one rectangle.
    Returns (count, min_logmod, max_logmod).
    """
    spent = fn.evals
    ts = np.linspace(0.0, 4.0, 4 * _POINTS_PER_EDGE, endpoint=False)
    mant, logmod = fn(_boundary_points(rect, ts))
    while True:
        if fn.evals - spent > budget:
            raise NonConvergent(f"evaluation budget {budget} exhausted on {rect}")
        if np.any(np.abs(mant) == 0.0):
            raise ZeroOnBoundary(f"exact zero on contour of {rect}")
        phase = np.angle(mant)
        dphi = _wrap(np.diff(phase, append=phase[0]))
        # Phase steps below pi/2 alone do not certify the unwrapping: a zero
        # of order p just off the contour can wrap the true step by a full
        # turn while the observed step looks small.  Two extra triggers close
        # the gap: (a) modulus steps are bounded, which forces sampling below
        # the aliasing window on the flanks of any dip (|d log f| >= ~1.2 per
        # step inside it); (b) the mesh is graded, so a gap symmetrically
        # straddling a dip (whose own phase and modulus steps look innocent)
        # is dragged down along with its refined neighbors until the wrapped
        # turn becomes visible.
        dmod = np.abs(np.diff(logmod, append=logmod[0]))
        t_next = np.concatenate([ts[1:], [ts[0] + 4.0]])
        gaps = t_next - ts
        neighbor_min = np.minimum(np.roll(gaps, 1), np.roll(gaps, -1))
        bad = ((np.abs(dphi) >= 0.5 * np.pi)
               | (dmod >= _MOD_STEP)
               | (gaps > 2.0 * neighbor_min + 1e-300))
        if not np.any(bad):
            break
        if np.any(bad & (gaps < 1e-14)):
            raise ZeroOnBoundary(f"unresolvable phase jump on contour of {rect}")
        mids = (ts[bad] + 0.5 * gaps[bad]) % 4.0
        m_new, l_new = fn(_boundary_points(rect, mids))
        order = np.searchsorted(ts, mids)
        ts = np.insert(ts, order, mids)
        mant = np.insert(mant, order, m_new)
        logmod = np.insert(logmod, order, l_new)
    lo, hi = float(np.min(logmod)), float(np.max(logmod))
    # A sample essentially sitting on a zero shows up as a dip far below its
    # immediate neighbors (which refinement has already packed at a spacing
    # commensurate with any nearby zero's distance).  Comparing against the
    # whole contour instead would misfire for legitimate high-order zeros
    # close to, but off, the contour.
    local_max = maximum_filter1d(logmod, size=3, mode="wrap")
    if np.any(logmod - local_max < np.log(tol)):
        raise ZeroOnBoundary(
            f"contour modulus dips below {tol:g} of its local scale on {rect}")
    total = float(np.sum(dphi))
    count = int(np.rint(total / (2.0 * np.pi)))
    if abs(total / (2.0 * np.pi) - count) > 0.25:
        raise NonConvergent(f"phase total {total} not near an integer multiple of 2*pi")
    if count < 0:
        raise NonConvergent(f"negative winding {count}: function not analytic on {rect}?")
    return count, lo, hi


def winding_count(f, region: Rect, tol: float = DEFAULT_TOL,
                  budget: int = DEFAULT_BUDGET) -> ZeroReport:
    """Count zeros of f (with multiplicity) strictly inside region."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    fn = _Fn(f)
    count, lo, _hi = _trace_contour(fn, region, tol, budget)
    return ZeroReport(count=count,
                      zeros=[],
                      boundary_min_modulus=max(float(np.exp(lo)), 5e-324),
                      cells_used=1)


def _split_with_nudge(fn: _Fn, cell: Rect, tol: float, budget: int):
    """Bisect cell along its longer side; nudge the cut off any zero.

    Shift magnitudes grow geometrically: a zero of order p within distance d
    of a contour is rejected whenever (d/extent)^p falls below tol, so for
    p = 3 the cut must move ~1e-4 of the extent before the subcell contours
    clear the zero.  Uniform steps of 1e-7 would never escape.
    """
    vertical = cell.width >= cell.height   # vertical cut line when wide
    extent = cell.width if vertical else cell.height
    base = 0.5
    shifts = [0.0]
    for k in range(1, _NUDGE_TRIES + 1):
        s = _NUDGE_REL * (100.0 ** ((k - 1) // 2)) * (1 if k % 2 else -1)
        shifts.append(min(s, 0.3) if s > 0 else max(s, -0.3))
    last = None
    for s in shifts:
        frac = base + s
        cut = (cell.re_min if vertical else cell.im_min) + frac * extent
        if vertical:
            a = Rect(cell.re_min, cut, cell.im_min, cell.im_max)
            b = Rect(cut, cell.re_max, cell.im_min, cell.im_max)
        else:
            a = Rect(cell.re_min, cell.re_max, cell.im_min, cut)
            b = Rect(cell.re_min, cell.re_max, cut, cell.im_max)
        try:
            ca, _, _ = _trace_contour(fn, a, tol, budget)
            cb, _, _ = _trace_contour(fn, b, tol, budget)
            return (a, ca), (b, cb)
        except ZeroOnBoundary as exc:
            last = exc
            continue
    raise last


def _polish(fn: _Fn, cell: Rect, order: int) -> complex | None:
    """Newton iteration confined to the cell.

    The isolating winding count proves the zero lies inside this cell, so an
    iterate trying to leave is heading for a different zero's basin; steps
    are damped until they stay inside, and failure to converge in-cell
    returns None (the caller then shrinks the cell and retries).
    """
    z = cell.center
    diag = cell.diag
    h = 1e-7 * diag
    mant, logmod = fn(np.array([z, z + h, z - h]))
    ref = logmod[1] if np.isfinite(logmod[1]) else 0.0

    def val(m, l):
        return m * np.exp(np.minimum(l - ref, 700.0))

    g0, gp, gm = val(mant, logmod)
    g_init = max(abs(g0), 5e-324)
    best = abs(g0)
    scale = max(abs(z), diag)

    def interior(p: complex, frac: float) -> bool:
        m = frac * min(cell.width, cell.height)
        return (cell.re_min + m <= p.real <= cell.re_max - m
                and cell.im_min + m <= p.imag <= cell.im_max - m)

    def settled(p: complex) -> complex | None:
        # A residual-based acceptance alone can be satisfied by a foreign
        # zero just outside the cell (the iterate crawls along the edge), so
        # the point must also sit clear of the boundary.
        return p if (best <= 1e-10 * g_init and interior(p, 0.01)) else None

    for _ in range(80):
        deriv = (gp - gm) / (2.0 * h)
        if deriv == 0 or not np.isfinite(abs(deriv)):
            break
        raw = -order * g0 / deriv
        if abs(raw) <= 4e-16 * scale:
            return z if interior(z, 1e-3) else None   # step below resolution
        step = raw if abs(raw) <= 0.5 * diag else raw * 0.5 * diag / abs(raw)
        damped = False
        for _damp in range(50):
            if cell.contains(z + step):
                damped = True
                break
            step *= 0.5
        if not damped:
            return None       # persistently heading out of the enclosure
        z_new = z + step
        mant, logmod = fn(np.array([z_new, z_new + h, z_new - h]))
        g_new, gp, gm = val(mant, logmod)
        if abs(g_new) > 1.2 * best and abs(step) < 1e-9 * scale:
            return settled(z)   # wiggling at the numerical floor
        best = min(best, abs(g_new))
        z = z_new
        g0 = g_new
        h = max(1e-9 * diag, min(h, 0.1 * abs(step) + 1e-12 * diag))
    return settled(z)


def refine_zeros(f, region: Rect, expected: int | None = None,
                 tol: float = DEFAULT_TOL, budget: int = DEFAULT_BUDGET) -> ZeroReport:
    """Locate all zeros of f in region with their orders.

    Recursive bisection isolates zeros (cells whose winding count exceeds one
    keep splitting until they hold a single zero or collapse to cluster size,
    in which case the cluster is reported as one zero of the cell's order),
    then each zero is polished by safeguarded Newton iteration.
    """
    fn = _Fn(f)
    count, lo, _hi = _trace_contour(fn, region, tol, budget)
    if expected is not None and count != expected:
        raise ValueError(f"winding count {count} != expected {expected}")
    report = ZeroReport(count=count, zeros=[],
                        boundary_min_modulus=max(float(np.exp(lo)), 5e-324),
                        cells_used=1)
    stack = [(region, count)]
    zeros = []
    while stack:
        cell, c = stack.pop()
        if c == 0:
            continue
        small = cell.diag <= _CLUSTER_REL * (1.0 + abs(cell.center))
        if c == 1 or small:
            loc = _polish(fn, cell, c)
            if loc is None:
                if small:
                    zeros.append((cell.center, c))   # pinned by the cell itself
                    continue
                # Newton left the cell or stalled: shrink the enclosure.
            else:
                zeros.append((loc, c))
                continue
        try:
            (a, ca), (b, cb) = _split_with_nudge(fn, cell, tol, budget)
        except ZeroOnBoundary:
            # Every candidate cut failed: a multiple zero whose evaluation
            # noise ball fills the cell.  The cell boundary itself was clean,
            # so its count stands; report the cluster at the best location
            # the arithmetic supports.
            loc = _polish(fn, cell, c)
            zeros.append((loc if loc is not None else cell.center, c))
            continue
        report.cells_used += 2
        if ca + cb != c:
            raise NonConvergent(
                f"subcell counts {ca}+{cb} != parent {c} on {cell}")
        stack.append((a, ca))
        stack.append((b, cb))
    zeros.sort(key=lambda p: (p[0].real, p[0].imag))
    report.zeros = zeros
    return report


def _sector_strips(theta: float, r_min: float, r_max: float,
                   x_jitter: float = 0.0, y_grow: float = 0.0):
    """Abutting vertical strips whose union contains the truncated sector.

    Strip heights never fall below a floor ~ sqrt(x): membership in the
    exact sector is decided after refinement anyway, and razor-thin strips
    would run their long edges through the evaluation-noise ball that
    surrounds any multiple zero on the real axis.
    """
    x_lo = r_min * np.cos(theta)
    cuts = [x_lo]
    while cuts[-1] * 4.0 < r_max:
        cuts.append(cuts[-1] * 4.0)
    cuts.append(r_max)
    if x_jitter:
        cuts = ([cuts[0]]
                + [c * (1.0 + x_jitter) for c in cuts[1:-1]]
                + [cuts[-1] * (1.0 + abs(x_jitter))])
    strips = []
    tan_t = np.tan(theta)
    for a, b in zip(cuts[:-1], cuts[1:]):
        y = max(b * tan_t, 0.01 * np.sqrt(1.0 + b)) * (1.0 + y_grow)
        strips.append(Rect(a, b, -y, y))
    return strips


def count_in_sector(f, theta: float, r_max: float, r_min: float,
                    tol: float = DEFAULT_TOL, budget: int = DEFAULT_BUDGET) -> ZeroReport:
    """Count zeros in the truncated sector {r_min <= |z| <= r_max, |arg z| <= theta}.

    The sector is covered by abutting rectangles; all rectangle zeros are
    refined and membership in the exact sector decides the final count.
    Zeros landing on a covering edge trigger a deterministic perturbation of
    the covering (never of the sector itself) and a retry.
    """
    if not (0.0 < theta < 0.5 * np.pi):
        raise ValueError("theta must be in (0, pi/2)")
    if not (0.0 < r_min < r_max):
        raise ValueError("need 0 < r_min < r_max")
    last = None
    for attempt in range(_NUDGE_TRIES + 1):
        jit = 0.0 if attempt == 0 else (_NUDGE_REL * 100.0 ** ((attempt - 1) // 2)
                                        * (1 if attempt % 2 else -1))
        jit = float(np.clip(jit, -0.2, 0.2))
        strips = _sector_strips(theta, r_min, r_max,
                                x_jitter=jit, y_grow=abs(jit))
        try:
            return _count_strips(f, strips, theta, r_min, r_max, tol, budget)
        except ZeroOnBoundary as exc:
            last = exc
            continue
    raise last


def _count_strips(f, strips, theta, r_min, r_max, tol, budget) -> ZeroReport:
    report = ZeroReport(count=0, zeros=[], boundary_min_modulus=np.inf, cells_used=0)
    slack = 1e-12
    members = []
    for strip in strips:
        sub = refine_zeros(f, strip, tol=tol, budget=budget)
        report.cells_used += sub.cells_used
        report.boundary_min_modulus = min(report.boundary_min_modulus,
                                          sub.boundary_min_modulus)
        for z, order in sub.zeros:
            r = abs(z)
            if r < r_min * (1 - slack) or r > r_max * (1 + slack):
                continue
            if abs(np.arctan2(z.imag, z.real)) > theta * (1 + slack) + 1e-300:
                continue
            members.append((z, order))
    members.sort(key=lambda p: (p[0].real, p[0].imag))
    report.zeros = members
    report.count = int(sum(o for _, o in members))
    return report
