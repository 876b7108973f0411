"""The stability functional: continuum integral, supremum searches, the
critical mass, and the lattice analogue with its sum-vs-integral gap.

The kernel is homogeneous of degree -3 under simultaneous scaling of
(s_tilde, Q, K, t_tilde), so the supremum search fixes one magnitude to 1
(the "gauge") and scans the remaining two magnitudes and the angle between
s_tilde and K. All integrals use tensorized Gauss-Legendre quadrature in
spherical coordinates centered at the kernel's singular point A*K, where
the 1/(t-AK)^2 factor is cancelled by the Jacobian.
"""

from __future__ import annotations

import csv
import math
from dataclasses import replace
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate as _sci_integrate
from scipy import optimize as _sci_optimize

from .errors import AccuracyError, DomainError, PreconditionError, SearchError
from .kernels import lambda_coefficients
from .params import LambdaArgs, LambdaResult, SupSearchConfig, default_a_const

__all__ = [
    "integrate_lambda", "lambda_of_m", "critical_mass", "lattice_lambda_sum",
    "lambda_tilde", "fit_c_lambda", "write_sweep_csv", "LatticeSumResult",
]


@lru_cache(maxsize=64)
def _gl(n: int):
    x, w = leggauss(n)
    return x, w


def _args_geometry(args: LambdaArgs):
    """Reduce vector arguments to the invariant magnitudes (S, K, psi)."""
    s = np.asarray(args.s_tilde)
    k = np.asarray(args.k_vec)
    S = float(np.sqrt(s @ s))
    K = float(np.sqrt(k @ k))
    if S > 0 and K > 0:
        cospsi = float(s @ k) / (S * K)
        psi = math.acos(min(1.0, max(-1.0, cospsi)))
    else:
        psi = 0.0
    return S, K, psi


def _lam_quad_fixed(m, A, S, K, psi, Q, delta, n, ell,
                    nr, nth, nphi, r_hi=None):
    """Integral of lambda over t (r_hi=None) or over |t - AK| <= r_hi,
    at a fixed tensor-product resolution.

    Coordinates: K along e_z, s_tilde in the x-z plane at angle psi.
    """
    if S == 0.0:
        return 0.0
    c1, a, c4 = lambda_coefficients(m)
    ak = A * K
    sx, sz = S * math.sin(psi), S * math.cos(psi)
    B = a * (2.0 * Q * Q + A * K * K)
    dreg = delta / ell**2
    s2 = S * S

    pref = (sx * sx + (sz - ak) ** 2 + 2.0 * Q * Q + n * dreg) / (
        math.pi**2 * (1.0 + m))
    quart_s = c1 * s2 + B
    if quart_s <= 0:
        raise DomainError("vanishing quartic-root factor; require q_mu > 0 or delta > 0")
    pref *= quart_s**-0.25

    scale = math.sqrt(s2 + 2.0 * Q * Q + ak * ak + B + dreg)
    if scale == 0.0:
        return 0.0

    xr, wr = _gl(nr)
    if r_hi is None:
        # map r = scale * x/(1-x), x in (0,1)
        x = 0.5 * (xr + 1.0)
        r = scale * x / (1.0 - x)
        jr = 0.5 * wr * scale / (1.0 - x) ** 2
    else:
        r = 0.5 * r_hi * (xr + 1.0)
        jr = 0.5 * r_hi * wr
    xt, wt = _gl(nth)
    ct = xt
    st = np.sqrt(1.0 - ct**2)
    xp, wp = _gl(nphi)
    # phi in (0, pi); the integrand is even under phi -> -phi since s_y = 0
    phi = 0.5 * math.pi * (xp + 1.0)
    jp = 0.5 * math.pi * wp

    R, CT, PH = np.meshgrid(r, ct, phi, indexing="ij")
    ST = np.sqrt(np.maximum(1.0 - CT**2, 0.0))
    tz = ak + R * CT
    tx = R * ST * np.cos(PH)
    t2 = tx * tx + R * R * ST * ST * np.sin(PH) ** 2 + tz * tz
    sdott = sx * tx + sz * tz
    bracket = s2 + t2 + B
    denom = bracket * bracket - (c4 * sdott) ** 2
    f = (c1 * t2 + B) ** -0.25 * np.abs(sdott) / denom
    # the 1/((t-AK)^2 + dreg) factor against the Jacobian r^2
    f *= R * R / (R * R + dreg)
    W = jr[:, None, None] * wt[None, :, None] * jp[None, None, :]
    return 2.0 * pref * float((f * W).sum())


_LEVELS = ((48, 28, 28), (72, 44, 44), (108, 64, 64), (160, 96, 96),
           (240, 144, 144))


def integrate_lambda(args: LambdaArgs, tol: float = 1e-5,
                     return_err: bool = False, r_hi=None):
    """Integral of the lambda kernel over t_tilde in R^3.

    The integrable singularity at t_tilde = A*K (delta = 0) is absorbed by
    spherical coordinates centered there. The resolution ladder is refined
    until two consecutive levels agree within ``tol * max(1, |value|)``;
    failure raises :class:`AccuracyError` carrying the best estimate.
    """
    if args.delta == 0.0 and args.q_mu <= 0.0:
        S, K, _ = _args_geometry(args)
        if S == 0.0 and K == 0.0:
            raise DomainError("degenerate input: q_mu = delta = 0 with s = K = 0")
    S, K, psi = _args_geometry(args)
    prev = None
    err = math.inf
    for nr, nth, nphi in _LEVELS:
        val = _lam_quad_fixed(args.m, args.a_const, S, K, psi, args.q_mu,
                              args.delta, args.n, args.ell, nr, nth, nphi,
                              r_hi=r_hi)
        if prev is not None:
            err = abs(val - prev)
            if err <= tol * max(1.0, abs(val)):
                return (val, err) if return_err else val
        prev = val
    raise AccuracyError(
        f"lambda integral did not converge to tol={tol} (last change {err})",
        estimate=prev, error_bound=err)


def _quick_integral(m, A, S, K, psi, Q, delta=0.0, n=1, ell=1.0,
                    level=0):
    nr, nth, nphi = _LEVELS[level]
    return _lam_quad_fixed(m, A, S, K, psi, Q, delta, n, ell, nr, nth, nphi)


def _fold_angle(psi: float) -> float:
    psi = psi % (2.0 * math.pi)
    return 2.0 * math.pi - psi if psi > math.pi else psi


def lambda_of_m(m: float, cfg: SupSearchConfig = SupSearchConfig()) -> LambdaResult:
    """Supremum over (s_tilde, K, Q_mu) of the lambda integral.

    Coarse log-grid scan under the scaling gauge, followed by Nelder-Mead
    refinement from the best ``cfg.n_starts`` grid cells.
    """
    if not m > 0:
        raise DomainError(f"mass ratio must be positive, got m={m}")
    A = default_a_const(m)

    def magnitudes(u, v):
        # map the two free log-magnitudes to (S, K, Q) per the gauge
        if cfg.gauge == "s_tilde":
            return 1.0, 10.0**u, 10.0**v      # S, K, Q
        if cfg.gauge == "q_mu":
            return 10.0**u, 10.0**v, 1.0
        return 10.0**u, 1.0, 10.0**v           # gauge k_vec: S, Q free

    def value(u, v, psi, level):
        S, K, Q = magnitudes(u, v)
        if cfg.gauge == "s_tilde":
            pass
        try:
            return _quick_integral(m, A, S, K, psi, Q, level=level)
        except DomainError:
            return 0.0

    grid = np.linspace(cfg.log_lo, cfg.log_hi, cfg.n_magnitude)
    angles = np.linspace(0.0, math.pi, cfg.n_angle)
    cells = []
    for u in grid:
        for v in grid:
            for psi in angles:
                cells.append((value(u, v, psi, 0), u, v, psi))
    cells.sort(key=lambda c: (-c[0], c[1:]))
    if cells[0][0] <= 0.0:
        raise SearchError("coarse scan found no positive value",
                          diagnostics=cells)
    best_coarse = cells[0][0]

    best_val, best_x = -math.inf, None
    for val0, u, v, psi in cells[:cfg.n_starts]:
        res = _sci_optimize.minimize(
            lambda x: -value(x[0], x[1], _fold_angle(x[2]), 1),
            x0=np.array([u, v, psi]), method="Nelder-Mead",
            options=dict(xatol=1e-4, fatol=cfg.quad_tol * 0.1,
                         maxiter=cfg.refine_maxiter))
        if -res.fun > best_val:
            best_val, best_x = -res.fun, res.x
    S, K, Q = magnitudes(best_x[0], best_x[1])
    psi = _fold_angle(best_x[2])
    # certify the best point at the accuracy ladder
    final, err_quad = integrate_lambda(
        LambdaArgs(s_tilde=(S * math.sin(psi), 0.0, S * math.cos(psi)),
                   k_vec=(0.0, 0.0, K), q_mu=Q, m=m, a_const=A),
        tol=cfg.quad_tol, return_err=True)
    err_search = max(final - best_coarse, 0.0)
    return LambdaResult(
        value=max(final, 0.0),
        argmax={"s_tilde": S, "k_vec": K, "angle": psi, "q_mu": Q,
                "gauge": cfg.gauge},
        err_quad=err_quad, err_search=err_search)


def critical_mass(cfg: SupSearchConfig = SupSearchConfig(),
                  bracket=(0.30, 0.45)) -> float:
    """Bisection root of Lambda(m) = 1 inside ``bracket``.

    Requires Lambda(m_lo) > 1 > Lambda(m_hi); returns the midpoint of the
    final bracket at tolerance ``cfg.m_tol``.
    """
    lo, hi = bracket
    f_lo = lambda_of_m(lo, cfg).value
    f_hi = lambda_of_m(hi, cfg).value
    if not (f_lo > 1.0 > f_hi):
        raise PreconditionError(
            f"invalid bracket: Lambda({lo})={f_lo}, Lambda({hi})={f_hi}; "
            "need Lambda(m_lo) > 1 > Lambda(m_hi)")
    while hi - lo > cfg.m_tol:
        mid = 0.5 * (lo + hi)
        if lambda_of_m(mid, cfg).value > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# lattice sums

class LatticeSumResult(float):
    """Float subclass carrying the tail bound and point count of a sum."""

    def __new__(cls, value, tail_bound, n_points):
        obj = super().__new__(cls, value)
        obj.tail_bound = tail_bound
        obj.n_points = n_points
        return obj

    @property
    def value(self):
        return float(self)


def _lambda_array(args: LambdaArgs, pts: np.ndarray) -> np.ndarray:
    """Vectorized kernel over an (n,3) array of t_tilde points."""
    s = np.asarray(args.s_tilde)
    K = np.asarray(args.k_vec)
    m, A, Q = args.m, args.a_const, args.q_mu
    c1, a, c4 = lambda_coefficients(m)
    ak = A * K
    B = a * (2.0 * Q * Q + A * float(K @ K))
    dreg = args.delta / args.ell**2
    d = pts - ak
    sing = (d * d).sum(axis=1) + dreg
    if np.any(sing <= 0):
        raise DomainError("lattice point coincides with the singular point at delta=0")
    t2 = (pts * pts).sum(axis=1)
    sdott = pts @ s
    s2 = float(s @ s)
    bracket = s2 + t2 + B
    denom = bracket * bracket - (c4 * sdott) ** 2
    pref = (float((s - ak) @ (s - ak)) + 2.0 * Q * Q + args.n * dreg) / (
        math.pi**2 * (1.0 + m))
    pref *= (c1 * s2 + B) ** -0.25
    return pref * (c1 * t2 + B) ** -0.25 / sing * np.abs(sdott) / denom


def _envelope_tail(args: LambdaArgs, radius: float) -> float:
    """Upper bound on (2 pi/ell)^3 * sum of lambda over |t - AK| > radius,
    from the closed-form radial envelope of the kernel."""
    m, Q = args.m, args.q_mu
    s = np.asarray(args.s_tilde)
    K = np.asarray(args.k_vec)
    ak = args.a_const * K
    s2 = float((s - ak) @ (s - ak))
    dreg = args.delta / args.ell**2
    q2 = 2.0 * Q * Q
    if s2 + q2 <= 0:
        return 0.0
    c5 = ((m + 1.0) / m) ** 1.5 * (m * m + 4.0 * m + 2.0) / (
        2.0 * math.pi**2 * m * (m + 2.0) ** 2)
    c0 = c5 * (s2 + q2 + args.n * dreg) * (s2 + q2) ** -0.25

    def env(r):
        return c0 / ((r * r + dreg) * (r * r + q2) ** 0.25 * (s2 + r * r + q2))

    h = 2.0 * math.pi / args.ell
    r0 = max(radius - math.sqrt(3.0) * h / 2.0, 0.5 * h)
    val, _ = _sci_integrate.quad(lambda r: 4.0 * math.pi * r * r * env(r),
                                 r0, np.inf, limit=200)
    return float(val)


def lattice_lambda_sum(args: LambdaArgs, cutoff: float,
                       tol: float | None = None) -> LatticeSumResult:
    """(2 pi/ell)^3 times the kernel summed over the shifted lattice
    L + A*K within |t - AK| <= cutoff, with an envelope tail bound.
    """
    h = 2.0 * math.pi / args.ell
    K = np.asarray(args.k_vec)
    ak = args.a_const * K
    if args.delta == 0.0:
        # reject an exactly singular lattice point
        frac = ak / h - np.round(ak / h)
        if np.all(np.abs(frac) < 1e-12):
            raise DomainError(
                "delta = 0 with A*K on the lattice: summand is singular")
    nmax = int(math.ceil(cutoff / h))
    n1 = np.arange(-nmax, nmax + 1)
    total = 0.0
    npts = 0
    P1, P2 = np.meshgrid(n1, n1, indexing="ij")
    base = np.empty((P1.size, 3))
    base[:, 0] = P1.ravel() * h
    base[:, 1] = P2.ravel() * h
    for k in n1:
        base[:, 2] = k * h
        pts = base + ak
        d2 = ((pts - ak) ** 2).sum(axis=1)
        sel = d2 <= cutoff * cutoff
        if not sel.any():
            continue
        chunk = _lambda_array(args, pts[sel])
        total += float(chunk.sum())
        npts += int(sel.sum())
    tail = _envelope_tail(args, cutoff)
    if tol is not None and tail > tol:
        raise AccuracyError(
            f"envelope tail bound {tail} exceeds tolerance {tol} at cutoff {cutoff}",
            estimate=h**3 * total, error_bound=tail)
    return LatticeSumResult(h**3 * total, tail, npts)


def _hybrid_lattice_sum(args: LambdaArgs, ball_spacings: int = 28,
                        tol: float = 1e-6) -> float:
    """Lattice sum evaluated as continuum integral plus a local
    sum-minus-integral correction near the singular point.

    The kernel is smooth on the lattice scale away from t = AK (its other
    features live on the scale of max(S, K, Q), many spacings wide in the
    regimes of interest), so the discreteness correction is localized in a
    ball of ``ball_spacings`` lattice spacings around AK.
    """
    h = 2.0 * math.pi / args.ell
    r0 = ball_spacings * h
    full = integrate_lambda(args, tol=tol)
    local_int = integrate_lambda(args, tol=tol, r_hi=r0)
    local_sum = lattice_lambda_sum(args, cutoff=r0)
    return full - local_int + float(local_sum)


def lambda_tilde(m: float, kappa: float, n: int, ell: float,
                 cfg: SupSearchConfig = SupSearchConfig(),
                 c_t: float | None = None,
                 delta_factors=(0.3, 1.0, 3.0)) -> LambdaResult:
    """Lattice analogue of the stability functional.

    inf over a delta grid (around delta ~ N^{4/9}) of the sup over
    (s_tilde, K) and Q_mu on or above the boundary
    Q_mu^2 = (c_T - kappa) N^{5/3} / ell^2 of the lattice sum.
    """
    if c_t is None:
        from .bounds import enumerate_c_t
        c_t = enumerate_c_t(200)
    if not 0 < kappa < c_t:
        raise PreconditionError(f"need 0 < kappa < c_T={c_t}, got {kappa}")
    if not m > 0:
        raise DomainError(f"mass ratio must be positive, got m={m}")
    A = default_a_const(m)
    q_b = math.sqrt((c_t - kappa)) * n ** (5.0 / 6.0) / ell
    h = 2.0 * math.pi / ell

    def evaluate(S, K, psi, Q, delta, tol):
        args = LambdaArgs(
            s_tilde=(S * math.sin(psi), 0.0, S * math.cos(psi)),
            k_vec=(0.0, 0.0, K), q_mu=Q, m=m, delta=delta, n=n, ell=ell,
            a_const=A)
        try:
            return _hybrid_lattice_sum(args, tol=tol)
        except AccuracyError as exc:
            return float(exc.estimate)

    best_overall = None
    for fac in delta_factors:
        delta = fac * n ** (4.0 / 9.0)
        ratios = 10.0 ** np.linspace(0.0, 3.0, 5)
        angles = np.linspace(0.0, math.pi, 4)
        qs = (q_b * 1.0000001, q_b * 2.0)
        cells = []
        for rs in ratios:
            for rk in ratios:
                for psi in angles:
                    for Q in qs:
                        v = evaluate(rs * Q, rk * Q, psi, Q, delta, 1e-4)
                        cells.append((v, rs, rk, psi, Q))
        cells.sort(key=lambda c: -c[0])
        v0, rs, rk, psi0, Q0 = cells[0]

        def neg(x):
            lrs, lrk, psi, lq = x
            Q = q_b * (1.0 + math.exp(lq))  # keep Q strictly above the boundary
            return -evaluate(10.0**lrs * Q, 10.0**lrk * Q,
                             _fold_angle(psi), Q, delta, cfg.quad_tol)

        lq0 = math.log(max(Q0 / q_b - 1.0, 1e-7))
        res = _sci_optimize.minimize(
            neg, x0=np.array([math.log10(rs), math.log10(rk), psi0, lq0]),
            method="Nelder-Mead",
            options=dict(xatol=1e-3, fatol=cfg.quad_tol, maxiter=100))
        val = -res.fun
        Q = q_b * (1.0 + math.exp(res.x[3]))
        cand = LambdaResult(
            value=max(val, 0.0),
            argmax={"s_tilde": 10.0 ** res.x[0] * Q, "k_vec": 10.0 ** res.x[1] * Q,
                    "angle": _fold_angle(res.x[2]), "q_mu": Q, "delta": delta},
            err_quad=cfg.quad_tol, err_search=max(val - v0, 0.0))
        if best_overall is None or cand.value < best_overall.value:
            best_overall = cand
    return best_overall


def fit_c_lambda(sweep) -> float:
    """Least envelope constant for the lattice-vs-continuum gap law
    gap <= c * m^{-1} (1 - kappa/c_T)^{-2} N^{-2/9} over a sweep.

    Each sweep row must provide m, kappa, n, value (the lattice functional),
    lambda_m (the continuum functional) and c_t.
    """
    rows = list(sweep)
    if len(rows) < 6:
        raise PreconditionError(
            f"need at least 6 sweep triples to fit c_Lambda, got {len(rows)}")
    c = 0.0
    for row in rows:
        gap = max(row["value"] - row["lambda_m"], 0.0)
        c = max(c, gap * row["m"] * (1.0 - row["kappa"] / row["c_t"]) ** 2
                * row["n"] ** (2.0 / 9.0))
    return max(c, 1e-12)


_SWEEP_COLUMNS = ("m", "kappa", "N", "ell", "delta", "value",
                  "err_quad", "err_search")


def write_sweep_csv(rows, path) -> None:
    """Emit sweep rows with the documented stable column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float)
                             else row[c] for c in _SWEEP_COLUMNS])
