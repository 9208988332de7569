"""The limit functions G_beta(eps) of perturbed Sudler products and the constants C_b.

With D = b^2 + 4, c = 2 sqrt(D) and u_b(r) = c*r - 2{r beta} + 1, the limit
function has the explicit form

    log G = log|eps sqrt(D) + 1| - (1/b) sum_{j<b} log(beta + j)
            + sum_r [ log|1 - x^2/u_r^2| - (1/b) sum_{j=1..b} log(1 - y_j^2/u_r^2) ]

where x = 2 eps sqrt(D) + 1 and y_j = 2b - 2j + 2 beta + 1.  G(0) = C_b.

Infinite products are truncated at radius R.  The tail r > R is enclosed
two-sidedly: each log term lies between -z and -z/(1 - z_max), and
sum_{r>R} u_r^-2 lies between integral bounds because u_r is within 1 of c*r.
The enclosure width is O(1/R^2), so modest R already gives 1e-10 accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .bounds import UNIT_ROUNDOFF, EvalWithBound
from .errors import InvalidInterval
from .kernel import frac_stream, signed_from_limbs
from .qcf import ONE, make_surd

DEFAULT_TOL = 1e-7
R_START = 1 << 10
R_MAX = 1 << 22
_U = UNIT_ROUNDOFF


def _consts(b: int):
    surd = make_surd(b)
    sd = surd.sqrt_disc
    return surd, float(surd.mp(30)), sd, 2.0 * sd


def u_seq(b: int, r: int) -> float:
    """u_b(r) = 2 sqrt(D) r - 2{r beta} + 1 with {r beta} from exact fixed point."""
    if r < 1:
        raise ValueError("r must be a positive integer")
    surd = make_surd(b)
    frac = surd.frac_of_multiple(r) / ONE
    return 2.0 * surd.sqrt_disc * r - 2.0 * frac + 1.0


@lru_cache(maxsize=64)
def _u_array(b: int, R: int) -> np.ndarray:
    surd, _, _, c = _consts(b)
    hi, lo = frac_stream(surd, 1, R)
    d = signed_from_limbs(hi, lo)
    frac = np.where(d < 0, d + 1.0, d)
    r = np.arange(1, R + 1, dtype=np.float64)
    return c * r - 2.0 * frac + 1.0


def _y_values(b: int, beta: float) -> np.ndarray:
    j = np.arange(1, b + 1, dtype=np.float64)
    return 2.0 * b - 2.0 * j + 2.0 * beta + 1.0


def _log_one_minus(a: float, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """log|1 - a^2/u^2| per term with a per-term rounding bound.

    Small ratios go through log1p; terms near a root use
    log|u - a| + log|u + a| - 2 log u, which keeps relative accuracy there.
    """
    z = (a / u) ** 2
    small = z < 0.25
    dm = np.abs(u - a)
    dp = np.abs(u + a)
    with np.errstate(divide="ignore", invalid="ignore"):
        far = np.log(dm) + np.log(dp) - 2.0 * np.log(u)
        near_err = 6 * _U * (1.0 + np.abs(np.log(u))) + 4 * _U * (u + abs(a)) * (1.0 / dm + 1.0 / dp)
    zs = np.where(small, z, 0.0)
    t = np.where(small, np.log1p(-zs), far)
    err = np.where(small, _U * np.abs(t) + 8 * _U * zs / (1.0 - zs), near_err)
    return t, err


@lru_cache(maxsize=64)
def _j_part(b: int, R: int) -> tuple[float, float]:
    """sum_{r<=R} sum_j log(1 - y_j^2/u_r^2) and its rounding bound."""
    _, beta, _, _ = _consts(b)
    u = _u_array(b, R)
    total = []
    err = 0.0
    for y in _y_values(b, beta):
        t, e = _log_one_minus(float(y), u)
        total.append(math.fsum(t))
        err += float(np.sum(e))
    s = math.fsum(total)
    return s, err + _U * sum(abs(v) for v in total) + _U * abs(s)


def _tail_sums(c: float, R: int) -> tuple[float, float]:
    """Bounds on sum_{r>R} u_r^-2 using cr - 1 < u_r < cr + 1."""
    lo = 1.0 / (c * (c * (R + 1) + 1.0))
    hi = 1.0 / (c * (c * R - 1.0))
    return lo, hi


def _log_enclose(coef_sq: float, s_lo: float, s_hi: float, w_max: float) -> tuple[float, float]:
    """Enclosure of sum_{r>R} log(1 - a^2 w_r) with a^2 = coef_sq."""
    zmax = coef_sq * w_max
    return -coef_sq * s_hi / (1.0 - zmax), -coef_sq * s_lo


def _min_radius(b: int, eps: float) -> int:
    _, _, sd, c = _consts(b)
    x = abs(2.0 * eps * sd + 1.0)
    ymax = 2.0 * b + 2.0
    # keep z = a^2 / u^2 below 1/4 in the tail
    need = int((2.0 * max(x, ymax) + 1.0) / c) + 2
    return max(need, 16)


def _log_G_at(b: int, eps: float, R: int):
    """(log G, enclosure half-width, rounding bound, root flag) at radius R."""
    surd, beta, sd, c = _consts(b)
    u = _u_array(b, R)
    x = 2.0 * eps * sd + 1.0
    lin = eps * sd + 1.0
    if lin == 0.0:
        return -math.inf, 0.0, 0.0, True
    dm = u - x
    dp = u + x
    if np.any(dm == 0.0) or np.any(dp == 0.0):
        return -math.inf, 0.0, 0.0, True
    t, e = _log_one_minus(x, u)
    main = math.fsum(t)
    round_err = float(np.sum(e)) + _U * abs(main)
    jsum, jerr = _j_part(b, R)
    const = math.fsum(math.log(beta + j) for j in range(b))

    s_lo, s_hi = _tail_sums(c, R)
    w_max = 1.0 / (c * (R + 1) - 1.0) ** 2
    tl, th = _log_enclose(x * x, s_lo, s_hi, w_max)
    # minus the j terms, each enclosed the same way
    jl, jh = 0.0, 0.0
    for y in _y_values(b, beta):
        a, bb = _log_enclose(y * y, s_lo, s_hi, w_max)
        jl -= bb
        jh -= a
    tail_lo = tl + jl / b
    tail_hi = th + jh / b
    tail_mid = 0.5 * (tail_lo + tail_hi)
    tail_half = 0.5 * (tail_hi - tail_lo)

    log_g = math.log(abs(lin)) + main + (-const - jsum) / b + tail_mid
    round_err += jerr / b + 4 * _U * (abs(math.log(abs(lin))) + abs(const)) + _U * abs(log_g)
    # x and u carry relative rounding ~2u; log|1 - x^2/u^2| moves by 2z/|1-z| per unit
    z = (x / u) ** 2
    round_err += 8 * _U * (1.0 + float(np.sum(z / np.abs(1.0 - z))))
    return log_g, tail_half, round_err, False


def G_eval(b: int, eps: float, target_abs_err: float = DEFAULT_TOL, *, R: int | None = None) -> EvalWithBound:
    """G_beta(eps) with a rigorous bound.

    With ``R`` given the truncation radius is fixed; otherwise R doubles from
    1024 until the bound meets ``target_abs_err``.  At a root (within the
    bound) the value is reported as 0 with ``is_zero`` set.
    """
    if target_abs_err <= 0:
        raise ValueError("target_abs_err must be positive")
    eps = float(eps)
    R_cur = max(R_START, _min_radius(b, eps)) if R is None else max(R, _min_radius(b, eps))
    best = None
    while True:
        log_g, tail, rnd, root = _log_G_at(b, eps, R_cur)
        if root:
            return EvalWithBound(0.0, 0.0, -math.inf, 0.0, is_zero=True, info={"R": R_cur, "b": b})
        log_err = tail + rnd
        value = math.exp(log_g)
        abs_err = value * math.expm1(log_err) + 2 * _U * value
        stalled = best is not None and abs_err > 0.9 * best[4]
        if best is None or abs_err < best[4]:
            best = (R_cur, log_g, tail, rnd, abs_err, value, log_err)
        if R is not None or abs_err <= target_abs_err or R_cur >= R_MAX or stalled:
            break
        R_cur *= 2
    R_cur, log_g, tail, rnd, abs_err, value, log_err = best
    info = {"R": R_cur, "b": b, "tail": tail, "rounding": rnd}
    if value <= abs_err:
        return EvalWithBound(0.0, value + abs_err, log_g, log_err, is_zero=True, info=info)
    return EvalWithBound(value, abs_err, log_g, log_err, info=info)


def log_G(b: int, eps: float, target_abs_err: float = 1e-10) -> EvalWithBound:
    """log G_beta(eps) as value/abs_err in the log domain."""
    g = G_eval(b, eps, target_abs_err)
    if g.log_value is None or not math.isfinite(g.log_value):
        raise InvalidInterval(f"eps={eps} is a root of G for b={b}")
    return EvalWithBound(g.log_value, g.log_err, info=g.info)


def C_const(b: int, target_abs_err: float = DEFAULT_TOL) -> EvalWithBound:
    """C_b from its own product formula, independent of G_eval's arithmetic.

    C_b^b = prod_{j<b} (beta + j)^-1 * prod_r prod_j (1 - u^-2)(1 - y_j^2 u^-2)^-1.
    """
    if target_abs_err <= 0:
        raise ValueError("target_abs_err must be positive")
    surd, beta, sd, c = _consts(b)
    ys = _y_values(b, beta)
    R = max(R_START, _min_radius(b, 0.0))
    while True:
        u = _u_array(b, R)
        w = 1.0 / (u * u)
        one = np.log1p(-w)
        parts = [b * math.fsum(one)]
        err = b * float(np.sum(_U * np.abs(one) + 8 * _U * w / (1.0 - w)))
        for y in ys:
            z = y * y * w
            lz = np.log1p(-z)
            parts.append(-math.fsum(lz))
            err += float(np.sum(_U * np.abs(lz) + 8 * _U * z / (1.0 - z)))
        head = math.fsum(parts)
        # tail: log(1 - a w) lies in [-a w / (1 - a w_max), -a w]
        s_lo, s_hi = _tail_sums(c, R)
        w_max = 1.0 / (c * (R + 1) - 1.0) ** 2
        t_lo = b * (-s_hi / (1.0 - w_max))
        t_hi = b * (-s_lo)
        for y in ys:
            a = y * y
            t_lo += a * s_lo
            t_hi += a * s_hi / (1.0 - a * w_max)
        pref = -math.fsum(math.log(beta + j) for j in range(b))
        log_cb_b = pref + head + 0.5 * (t_lo + t_hi)
        log_err_b = 0.5 * (t_hi - t_lo) + err + 4 * _U * (abs(pref) + abs(head) + sum(abs(p) for p in parts))
        log_cb = log_cb_b / b
        log_err = log_err_b / b + _U * abs(log_cb)
        value = math.exp(log_cb)
        abs_err = value * math.expm1(log_err) + 2 * _U * value
        if abs_err <= target_abs_err or R >= R_MAX:
            return EvalWithBound(value, abs_err, log_cb, log_err, info={"R": R, "b": b})
        R *= 2


def roots_near_zero(b: int) -> tuple[float, float]:
    """The two consecutive roots of G_beta bracketing 0."""
    surd = make_surd(b)
    sd = surd.sqrt_disc_mp(40)
    beta = surd.mp(40)
    # u_b(1) = 2 sqrt(D) - 2 beta + 1 since 0 < beta < 1
    u1 = 2 * sd - 2 * beta + 1
    return float(-1 / sd), float((u1 - 1) / (2 * sd))


def roots_in(b: int, lo: float, hi: float) -> list[float]:
    """All roots of G_beta in [lo, hi]: eps = -1/sqrt(D) and eps = (+-u_r - 1)/(2 sqrt(D))."""
    surd = make_surd(b)
    sd = surd.sqrt_disc_mp(40)
    roots = []
    r0 = -1 / sd
    if lo <= r0 <= hi:
        roots.append(float(r0))
    x_max = max(abs(2 * sd * lo + 1), abs(2 * sd * hi + 1))
    r_max = int(x_max / (2 * sd)) + 2
    beta = surd.mp(40)
    for r in range(1, r_max + 1):
        frac = r * beta - int(r * beta)
        u = 2 * sd * r - 2 * frac + 1
        for e in ((u - 1) / (2 * sd), (-u - 1) / (2 * sd)):
            if lo <= e <= hi:
                roots.append(float(e))
    return sorted(roots)


def _sum_pair(b: int, eps: float, R: int):
    _, _, sd, c = _consts(b)
    u = _u_array(b, R)
    x = 2.0 * eps * sd + 1.0
    return u, x, sd, c


def d2_log_G(b: int, eps: float, target_abs_err: float = 1e-9, *, R: int | None = None) -> EvalWithBound:
    """Second derivative of log G_beta; strictly negative between roots."""
    eps = float(eps)
    _check_not_root(b, eps)
    R_cur = max(R_START, _min_radius(b, eps)) if R is None else R
    while True:
        u, x, sd, c = _sum_pair(b, eps, R_cur)
        D = sd * sd
        dm = u - x
        dp = u + x
        terms = 1.0 / (dm * dm) + 1.0 / (dp * dp)
        s = math.fsum(terms)
        ax = abs(x)
        t_lo = 1.0 / (c * (c * (R_cur + 1) + 1.0 + ax)) * 2.0
        t_hi = 2.0 / (c * (c * R_cur - 1.0 - ax))
        lin = sd * eps + 1.0
        val = -D / (lin * lin) - 4.0 * D * (s + 0.5 * (t_lo + t_hi))
        err = 4.0 * D * (0.5 * (t_hi - t_lo)) + 16 * _U * (abs(val) + 4 * D * float(np.sum(terms * (u + ax) * (1 / np.abs(dm) + 1 / np.abs(dp)))))
        if R is not None or err <= target_abs_err or R_cur >= R_MAX:
            return EvalWithBound(val, err, info={"R": R_cur, "b": b})
        R_cur *= 2


def d1_log_G(b: int, eps: float, target_abs_err: float = 1e-9, *, R: int | None = None) -> EvalWithBound:
    """First derivative of log G_beta."""
    eps = float(eps)
    _check_not_root(b, eps)
    R_cur = max(R_START, _min_radius(b, eps)) if R is None else R
    while True:
        u, x, sd, c = _sum_pair(b, eps, R_cur)
        den = u * u - x * x
        terms = 2.0 * x / den
        s = math.fsum(terms)
        ax = abs(x)
        # |2x/(u^2 - x^2)| is between 2|x|/(cr+1)^2 and 2|x|/(cr-1-|x|)^2
        m_lo = 2.0 * ax / (c * (c * (R_cur + 1) + 1.0))
        m_hi = 2.0 * ax / (c * (c * R_cur - 1.0 - ax))
        t_mid = math.copysign(0.5 * (m_lo + m_hi), x)
        lin = sd * eps + 1.0
        val = sd / lin - 2.0 * sd * (s + t_mid)
        err = 2.0 * sd * 0.5 * (m_hi - m_lo) + 16 * _U * (abs(val) + 2 * sd * float(np.sum(np.abs(terms) * (u * u + x * x) / np.abs(den))))
        if R is not None or err <= target_abs_err or R_cur >= R_MAX:
            return EvalWithBound(val, err, info={"R": R_cur, "b": b})
        R_cur *= 2


def _check_not_root(b: int, eps: float) -> None:
    if roots_in(b, eps - 1e-12, eps + 1e-12):
        raise InvalidInterval(f"eps={eps} is a root of G for b={b}")


@dataclass(frozen=True)
class Certificate:
    """Outcome of an interval bound on G_beta; truthy only when it passes."""

    kind: str
    b: int
    lo: float
    hi: float
    threshold: float
    status: str
    endpoints: tuple = ()
    details: dict = field(default_factory=dict, compare=False)

    def __bool__(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "b": self.b,
            "lo": self.lo,
            "hi": self.hi,
            "threshold": self.threshold,
            "status": self.status,
            "endpoints": [
                {"eps": e, "value": v.value, "abs_err": v.abs_err} for e, v in self.endpoints
            ],
            **self.details,
        }


def _require_root_free(b: int, lo: float, hi: float) -> None:
    if not lo <= hi:
        raise InvalidInterval(f"empty interval [{lo}, {hi}]")
    inside = roots_in(b, lo, hi)
    if inside:
        raise InvalidInterval(f"G_beta has a root at {inside[0]:.6g} inside [{lo}, {hi}]")


def certify_above(b: int, lo: float, hi: float, threshold: float, tol: float = 1e-9) -> Certificate:
    """Certify G_beta > threshold on [lo, hi] from the two endpoint values.

    Between consecutive roots log G is strictly concave, so its minimum on a
    root-free interval is attained at an endpoint.
    """
    _require_root_free(b, lo, hi)
    ends = tuple((e, G_eval(b, e, tol)) for e in (lo, hi))
    if all(g.lo > threshold for _, g in ends):
        status = "pass"
    elif any(g.hi < threshold for _, g in ends):
        status = "fail"
    else:
        status = "inconclusive"
    minimum = min(g.value for _, g in ends)
    return Certificate("above", b, lo, hi, threshold, status, ends, {"lower_bound": minimum})


def certify_below(b: int, lo: float, hi: float, threshold: float, tol: float = 1e-9,
                  max_pieces: int = 64) -> Certificate:
    """Certify G_beta <= threshold on [lo, hi].

    If log G is increasing at hi (or decreasing at lo), concavity makes it
    monotone on the whole interval and the endpoint decides.  Otherwise the
    interval is split and each piece is bounded by the tangent line at its
    midpoint, which lies above a concave function.
    """
    _require_root_free(b, lo, hi)
    ends = tuple((e, G_eval(b, e, tol)) for e in (lo, hi))
    if any(g.lo > threshold for _, g in ends):
        return Certificate("below", b, lo, hi, threshold, "fail", ends, {"route": "endpoint"})
    d_hi = d1_log_G(b, hi)
    if d_hi.lo > 0:
        ok = ends[1][1].hi <= threshold
        return Certificate("below", b, lo, hi, threshold, "pass" if ok else "inconclusive", ends,
                           {"route": "increasing", "upper_bound": ends[1][1].hi, "d1_hi": d_hi.value})
    d_lo = d1_log_G(b, lo)
    if d_lo.hi < 0:
        ok = ends[0][1].hi <= threshold
        return Certificate("below", b, lo, hi, threshold, "pass" if ok else "inconclusive", ends,
                           {"route": "decreasing", "upper_bound": ends[0][1].hi, "d1_lo": d_lo.value})
    log_t = math.log(threshold)
    pieces = 1
    while pieces <= max_pieces:
        width = (hi - lo) / pieces
        worst = -math.inf
        for k in range(pieces):
            mid = lo + (k + 0.5) * width
            lg = log_G(b, mid)
            d1 = d1_log_G(b, mid)
            bound = lg.value + lg.abs_err + (abs(d1.value) + d1.abs_err) * 0.5 * width
            worst = max(worst, bound)
        if worst <= log_t:
            return Certificate("below", b, lo, hi, threshold, "pass", ends,
                               {"route": "tangent", "pieces": pieces, "upper_bound": math.exp(worst)})
        pieces *= 2
    return Certificate("below", b, lo, hi, threshold, "inconclusive", ends,
                       {"route": "tangent", "pieces": max_pieces, "upper_bound": math.exp(worst)})


def G_grid(b: int, lo: float, hi: float, step: float, target_abs_err: float = DEFAULT_TOL):
    """Rows (eps, G, abs_err, is_root) on a grid, with exact roots inserted."""
    if not (math.isfinite(lo) and math.isfinite(hi) and step > 0 and hi >= lo):
        raise ValueError("grid needs finite lo <= hi and step > 0")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    pts = [lo + k * step for k in range(n)]
    roots = roots_in(b, lo, hi)
    rows = [(e, G_eval(b, e, target_abs_err), False) for e in pts]
    rows += [(e, EvalWithBound(0.0, 0.0, is_zero=True), True) for e in roots]
    rows.sort(key=lambda t: t[0])
    return [(e, g.value, g.abs_err, is_root or g.is_zero) for e, g, is_root in rows]
