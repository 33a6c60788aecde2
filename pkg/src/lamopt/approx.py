"""Closed-form and weighted-residual approximations of the mean interval.

Three analytic routes complement the finite-difference solver:

* a two-term polynomial Galerkin solution for weakly drifted motion;
* the exact cross-section solution for strongly drifted motion (diffusion
  across the drift axis neglected);
* a one-term rational-trial-function solution valid for any concentration,
  whose maximizer yields the closed-form optimal start offset.

The regime optima (radius, offset, minimum cost) follow from the weak and
strong interval forms by balancing update cost against paging cost.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from lamopt.errors import DomainError, NumericalError, RegimeWarning
from lamopt.mobility import DiffusionParams, MobilityParams, compute_diffusion, global_drift

_WEAK_DRIFT_MAX = 1.0    # global drift below this: weak regime
_STRONG_DRIFT_MIN = 10.0  # global drift above this: strong regime
_OFFSET_SCALE_CAP = 1e6   # "no directionality" stand-in for the offset scale


# ---------------------------------------------------------------------------
# disc quadrature for polynomial integrands
# ---------------------------------------------------------------------------

def _disc_quadrature(fn, R: float, nr: int = 24, ntheta: int = 64) -> float:
    """Integrate fn(x, y) over the disc; exact for moderate-degree polynomials."""
    r_nodes, r_weights = np.polynomial.legendre.leggauss(nr)
    r = 0.5 * R * (r_nodes + 1.0)
    wr = 0.5 * R * r_weights * r
    theta = 2.0 * math.pi * np.arange(ntheta) / ntheta
    wt = 2.0 * math.pi / ntheta
    xs = np.outer(r, np.cos(theta))
    ys = np.outer(r, np.sin(theta))
    return float(np.sum(wr[:, None] * fn(xs, ys)) * wt)


# ---------------------------------------------------------------------------
# weak drift: two-term polynomial Galerkin solution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeakDriftCoeffs:
    """Coefficients of the two polynomial trial functions.

    Trial space: ``phi1 = R^2 - x^2 - y^2`` and ``phi2 = phi1 (x + y)``;
    the approximation is ``T = A phi1 + B phi2``.
    """

    A: float
    B: float
    R: float


def weak_drift_coeffs(diff: DiffusionParams, R: float) -> WeakDriftCoeffs:
    """Assemble and solve the 2x2 weighted-residual system numerically.

    The residual of ``L T + 1`` (no call-rate term) is made orthogonal to
    both trial functions under the plain area inner product.
    """
    s11, s22, mu1, mu2 = diff.sigma11, diff.sigma22, diff.mu1, diff.mu2

    def phi1(x, y):
        return R * R - x * x - y * y

    def L_phi1(x, y):
        return -(s11 + s22) - 2.0 * mu1 * x - 2.0 * mu2 * y

    def phi2(x, y):
        return phi1(x, y) * (x + y)

    def L_phi2(x, y):
        diffusion = s11 / 2.0 * (-6.0 * x - 2.0 * y) + s22 / 2.0 * (-2.0 * x - 6.0 * y)
        drift = mu1 * (phi1(x, y) - 2.0 * x * (x + y)) + mu2 * (phi1(x, y) - 2.0 * y * (x + y))
        return diffusion + drift

    m = np.array([
        [_disc_quadrature(lambda x, y: phi1(x, y) * L_phi1(x, y), R),
         _disc_quadrature(lambda x, y: phi1(x, y) * L_phi2(x, y), R)],
        [_disc_quadrature(lambda x, y: phi2(x, y) * L_phi1(x, y), R),
         _disc_quadrature(lambda x, y: phi2(x, y) * L_phi2(x, y), R)],
    ])
    rhs = -np.array([
        _disc_quadrature(phi1, R),
        _disc_quadrature(phi2, R),
    ])
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalError(f"weighted-residual system is singular (cond {cond:.2e})")
    a, b = np.linalg.solve(m, rhs)
    return WeakDriftCoeffs(A=float(a), B=float(b), R=R)


def weak_drift_coeffs_closed_form(diff: DiffusionParams, R: float) -> WeakDriftCoeffs:
    """Closed forms of the two-term coefficients (no assembly).

    Kept as an independent cross-check of :func:`weak_drift_coeffs`.
    """
    s = diff.sigma_trace
    a = 6.0 * s / ((diff.mu1 * R) ** 2 + 6.0 * s * s)
    return WeakDriftCoeffs(A=a, B=-diff.mu1 * a / (2.0 * s), R=R)


def weak_drift_interval(diff: DiffusionParams, R: float, x, y):
    """Two-term weak-drift approximation of the zero-call-rate interval.

    Warns when evaluated outside its regime (global drift above 1).
    """
    if global_drift(diff, R) > _WEAK_DRIFT_MAX:
        warnings.warn(
            f"weak-drift interval used at global drift {global_drift(diff, R):.3g} > 1",
            RegimeWarning, stacklevel=2,
        )
    c = weak_drift_coeffs(diff, R)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    phi1 = R * R - x * x - y * y
    return phi1 * (c.A + c.B * (x + y))


# ---------------------------------------------------------------------------
# strong drift: exact solution on each cross-section of the drift axis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StrongDriftSolution:
    """Cross-section solution of the strongly drifted interval problem.

    On the section at height y the solution is
    ``c1(y) + c2(y) exp(-2 mu1 x / s11) - x/mu1 + s11/(2 mu1^2)``; the
    coefficients are chosen so the interval vanishes at both chord ends.
    ``interval`` evaluates an algebraically equivalent form whose exponents
    are all nonpositive, so no region size overflows.
    """

    mu1: float
    sigma11: float
    R: float

    def _w(self, y):
        return np.sqrt(np.maximum(self.R**2 - np.asarray(y, dtype=float) ** 2, 0.0))

    def c2(self, y):
        w = self._w(y)
        beta = 2.0 * self.mu1 / self.sigma11
        return -w / (self.mu1 * np.sinh(beta * w))

    def c1(self, y):
        w = self._w(y)
        beta = 2.0 * self.mu1 / self.sigma11
        return (-self.c2(y) * np.exp(-beta * w) + w / self.mu1
                - self.sigma11 / (2.0 * self.mu1**2))

    def interval(self, x, y):
        return _strong_interval_stable(self.mu1, self.sigma11, self.R, x, y)


def _strong_interval_stable(mu1: float, sigma11: float, R: float, x, y):
    if mu1 <= 0.0:
        raise DomainError("strong-drift form requires mu1 > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w2 = R * R - y * y
    if np.any(w2 < -1e-12) or np.any(np.abs(x) > np.sqrt(np.maximum(w2, 0.0)) + 1e-12):
        raise DomainError("point outside the disc")
    w = np.sqrt(np.maximum(w2, 0.0))
    beta = 2.0 * mu1 / sigma11
    small = w < 1e-14 * R
    wsafe = np.where(small, 1.0, w)
    expw = np.exp(-2.0 * beta * wsafe)
    expx = np.exp(-beta * (np.clip(x, -wsafe, wsafe) + wsafe))
    t = (wsafe - x) / mu1 + (2.0 * wsafe / mu1) * (expw - expx) / (1.0 - expw)
    return np.where(small, 0.0, t)


def strong_drift_interval(diff: DiffusionParams, R: float, x, y):
    """Strong-drift interval: the drifted two-point problem on each chord.

    On the cross-section at height y the disc is the chord
    ``[-w, w], w = sqrt(R^2 - y^2)``, and the zero-call-rate equation with
    cross-axis diffusion dropped has the exact solution implemented here in
    an overflow-free form (all exponents nonpositive).

    Warns when evaluated outside its regime (global drift below 10).
    """
    gam = global_drift(diff, R)
    if gam < _STRONG_DRIFT_MIN:
        warnings.warn(
            f"strong-drift interval used at global drift {gam:.3g} < 10",
            RegimeWarning, stacklevel=2,
        )
    return _strong_interval_stable(diff.mu1, diff.sigma11, R, x, y)


def strong_drift_argmax(diff: DiffusionParams, R: float) -> float:
    """Offset maximizing the strong-drift interval on the drift axis.

    ``-(R/gamma) log((e^gamma - e^-gamma) / (2 gamma))`` evaluated stably;
    tends to -R as the global drift grows.
    """
    gam = global_drift(diff, R)
    if gam <= 0.0:
        return 0.0
    # log((e^g - e^-g)/(2g)) = g + log1p(-e^(-2g)) - log(2g)
    return -(R / gam) * (gam + math.log1p(-math.exp(-2.0 * gam)) - math.log(2.0 * gam))


# ---------------------------------------------------------------------------
# general case: one-term rational trial function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GalerkinSolution:
    """One-term rational-trial-function solution.

    The trial function ``g = (R^2 - x^2 - y^2) / (x + a)`` vanishes on the
    circle and skews its mass opposite to the drift; ``a`` is the offset
    scale (mean length * R / (mean dwell * drift) = R / E[cos angle]),
    from ``R`` (full concentration) to infinity (no preferred direction).
    The scalar ``C`` matches the area-averaged residual; by the divergence
    theorem the drift term integrates to zero over the disc, so only the
    diffusion and call-rate moments ``C11, C22, C0`` appear.
    """

    a: float
    C: float
    C11: float
    C22: float
    C0: float
    R: float
    lam: float

    def trial(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (self.R**2 - x * x - y * y) / (x + self.a)

    def interval(self, x, y):
        """Approximate mean update interval at (x, y)."""
        return self.C * self.trial(x, y)

    @property
    def x_opt(self) -> float:
        return optimal_offset(self.a, self.R)

    def interval_at_opt(self) -> float:
        return float(self.interval(self.x_opt, 0.0))


def trial_offset_scale(params: MobilityParams, R: float,
                       diff: DiffusionParams | None = None) -> float:
    """Offset scale ``a = mean_len R / (mean_time mu1)`` of the trial function.

    Capped at 1e6 R; driftless motion hits the cap (offset tends to zero).
    """
    if diff is None:
        diff = compute_diffusion(params)
    cap = _OFFSET_SCALE_CAP * R
    if diff.mu1 <= 0.0:
        return cap
    a = params.mean_len * R / (params.mean_time * diff.mu1)
    return min(a, cap)


def _quad_scaled(fn, lo, hi, points, scale) -> float:
    val, err = quad(fn, lo, hi, points=points, limit=400,
                    epsabs=max(1e-300, 1e-11 * scale), epsrel=1e-11)
    if not math.isfinite(val):
        raise NumericalError("trial-moment quadrature diverged")
    return val


def galerkin_solution(diff: DiffusionParams, R: float, lam: float,
                      a: float) -> GalerkinSolution:
    """Build the one-term solution for offset scale ``a``.

    The diffusion and call-rate moments of the trial function reduce to 1-D
    integrals over the cross-section height and are evaluated by adaptive
    quadrature with subdivision hints at the near-boundary peak.

    Raises:
        DomainError: nonpositive call rate/dimensions.
    Warns:
        RegimeWarning: when ``a < R`` (clamped to R(1 + 1e-9)).
    """
    if R <= 0.0:
        raise DomainError("R must be > 0")
    if lam < 0.0:
        raise DomainError("lam must be >= 0")
    if a < R:
        warnings.warn(f"offset scale a={a:.6g} < R; clamped", RegimeWarning,
                      stacklevel=2)
        a = R * (1.0 + 1e-9)
    # Near-degenerate geometry: evaluate the moment integrands a touch off
    # the pole so the pole at (-R, 0) stays integrable.
    a_eval = max(a, R * (1.0 + 1e-6))
    c2 = (a_eval - R) * (a_eval + R)
    c = math.sqrt(c2)

    def w_of(y):
        return math.sqrt(max(R * R - y * y, 0.0))

    pts = sorted({0.0, min(0.999 * R, c), min(0.999 * R, 10.0 * c), 0.999 * R})
    pts = [p for p in pts if 0.0 <= p < R]
    pts = sorted(set([-p for p in pts] + pts))

    # d2/dx2 moment: integral over x of g_xx is -4 a w / (a^2 - w^2)
    c11 = _quad_scaled(
        lambda y: -4.0 * a_eval * w_of(y) / (c2 + y * y),
        -R, R, pts, scale=4.0 * a_eval * R / c2 * 2 * R,
    )
    # d2/dy2 moment: integral over x of g_yy is -2 log((a+w)/(a-w))
    c22 = _quad_scaled(
        lambda y: -2.0 * math.log1p(2.0 * w_of(y) / (a_eval - w_of(y))),
        -R, R, pts, scale=4.0 * R * math.log1p(2.0 * R / (a_eval - R)),
    )
    # plain moment (area integral of g), with the large-a cancellation
    # removed analytically when it would eat the working precision
    if a_eval >= 100.0 * R:
        c0 = math.pi * (R**4 / (2.0 * a_eval) + R**6 / (12.0 * a_eval**3)
                        + R**8 / (32.0 * a_eval**5))
    else:
        c0 = _quad_scaled(
            lambda y: (R * R - y * y - a_eval * a_eval)
            * math.log1p(2.0 * w_of(y) / (a_eval - w_of(y)))
            + 2.0 * a_eval * w_of(y),
            -R, R, pts, scale=2.0 * a_eval * R * 2 * R,
        )
    denom = diff.sigma11 / 2.0 * c11 + diff.sigma22 / 2.0 * c22 - lam * c0
    if denom >= 0.0:
        raise NumericalError(f"trial-moment denominator {denom:.3e} is not negative")
    coef = -math.pi * R * R / denom
    return GalerkinSolution(a=a, C=coef, C11=c11, C22=c22, C0=c0, R=R, lam=lam)


def galerkin_interval(params: MobilityParams, R: float, lam: float,
                      diff: DiffusionParams | None = None) -> GalerkinSolution:
    """One-term solution with the offset scale derived from mobility."""
    if diff is None:
        diff = compute_diffusion(params)
    return galerkin_solution(diff, R, lam, trial_offset_scale(params, R, diff))


def optimal_offset(a: float, R: float) -> float:
    """Start offset maximizing the rational trial function on the axis.

    ``x = -a + sqrt(a^2 - R^2)`` written subtraction-free; lies in (-R, 0],
    reaching -R at full concentration (a = R) and 0 as a grows.
    """
    if a < R:
        raise DomainError(f"offset scale a={a} must be >= R={R}")
    return -R * R / (a + math.sqrt((a - R) * (a + R)))


def drift_moment_residual(diff: DiffusionParams, R: float, a: float) -> float:
    """Area integral of the drift term of the trial function.

    Identically zero by the divergence theorem (the trial function vanishes
    on the circle); exposed so validation can confirm the drift term is
    genuinely absent from the one-term solution's denominator.
    """
    def gx(x, y):
        u = x + a
        return diff.mu1 * (-(R * R - y * y - a * a) / u**2 - 1.0)

    return _disc_quadrature(gx, R, nr=48, ntheta=128)


# ---------------------------------------------------------------------------
# regime optima
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeOptimum:
    """Closed-form joint optimum for one regime and baseline.

    ``baseline="offset"`` optimizes the start point; ``baseline="center"``
    pins it to the region center.  ``expected_steps`` is the mean number of
    displacements per update cycle when the dwell mean is supplied.
    """

    x_opt: float
    t_opt: float
    r_opt: float
    c_min: float
    regime: str
    baseline: str
    regime_consistent: bool
    expected_steps: float | None = None


def asymptotic_optimum(diff: DiffusionParams, costs, regime: str,
                       baseline: str = "offset",
                       mean_time: float | None = None) -> RegimeOptimum:
    """Closed-form radius/offset optimum in the weak or strong drift regime.

    The interval enters at zero call rate (valid for rates small against the
    exit rate); the call rate appears only through the paging term
    ``lam pi R^2 V``.  The minimum cost is computed by substituting the
    optimal radius into the cost objective, never from a pre-simplified
    constant.

    Args:
        diff: diffusion parameters.
        costs: object with ``lam``, ``U``, ``V`` attributes (cost model).
        regime: "weak" or "strong".
        baseline: "offset" (optimize the start point) or "center".
        mean_time: dwell mean in hours; enables ``expected_steps``.

    Returns:
        RegimeOptimum; ``regime_consistent`` is False (and a RegimeWarning
        is emitted) when the global drift at the optimal radius contradicts
        the requested regime.
    """
    lam, U, V = costs.lam, costs.U, costs.V
    if lam <= 0.0 or U <= 0.0 or V <= 0.0:
        raise DomainError("asymptotic optimum needs lam, U, V all > 0")
    if baseline not in ("offset", "center"):
        raise DomainError(f"unknown baseline {baseline!r}")

    if regime == "weak":
        s = diff.sigma_trace
        r_opt = (s * U / (lam * V * math.pi)) ** 0.25
        t_opt = r_opt**2 / s
        x_opt = 0.0  # the optimal offset vanishes with the drift
        consistent = global_drift(diff, r_opt) <= _WEAK_DRIFT_MAX
    elif regime == "strong":
        if diff.mu1 <= 0.0:
            raise DomainError("strong regime requires mu1 > 0")
        if baseline == "offset":
            r_opt = (U * diff.mu1 / (4.0 * lam * V * math.pi)) ** (1.0 / 3.0)
            t_opt = 2.0 * r_opt / diff.mu1
            x_opt = -r_opt * (1.0 - math.log(2.0 * global_drift(diff, r_opt))
                              / global_drift(diff, r_opt))
        else:
            r_opt = (U * diff.mu1 / (2.0 * lam * V * math.pi)) ** (1.0 / 3.0)
            t_opt = r_opt / diff.mu1
            x_opt = 0.0
        consistent = global_drift(diff, r_opt) >= _STRONG_DRIFT_MIN
    else:
        raise DomainError(f"unknown regime {regime!r}")

    if not consistent:
        warnings.warn(
            f"{regime} optimum at R={r_opt:.4g} has global drift "
            f"{global_drift(diff, r_opt):.3g}; regime assumption shaky",
            RegimeWarning, stacklevel=2,
        )
    c_min = U / t_opt + lam * math.pi * r_opt**2 * V
    steps = t_opt / mean_time if mean_time is not None else None
    return RegimeOptimum(
        x_opt=x_opt, t_opt=t_opt, r_opt=r_opt, c_min=c_min,
        regime=regime, baseline=baseline, regime_consistent=consistent,
        expected_steps=steps,
    )
