"""Closed-form radial solutions on Wulff shapes.

For the model problem with source lam / H°(x)^gamma on W_R the exponent beta
solves

    F(beta) = -(gamma - 1) beta^gamma + (N - gamma) beta^(gamma - 1) = lam / c_gamma,

on [0, (N - gamma)/gamma), where F is increasing.  From beta one builds

    Phi(r) = (R/r)^beta - 1,
    v(r)   = theta (r^-m - R^-m)          (q < p),   m = (p - q)/(q - (p - 1)),
    v(r)   = (p - 1) beta log(R/r)        (q = p),

and V(r) = exp((1/(gamma-1)) int_r^R (-v')^(q-(p-1))) - 1, which coincides
with Phi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InadmissibleParams, LambdaTooLarge, OutOfDomain
from .rearrange import AnalyticProfile

BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class ProblemParams:
    N: int
    p: float
    q: float
    lam: float = 0.0
    R: float = 1.0

    def __post_init__(self):
        N, p, q = self.N, self.p, self.q
        if int(N) != N or N < 2:
            raise InadmissibleParams("N must be an integer >= 2")
        if not (1 < p < N):
            raise InadmissibleParams(f"need 1 < p < N, got p={p}, N={N}")
        if not (p - 1 < q <= p):
            raise InadmissibleParams(f"need p - 1 < q <= p, got q={q}")
        if not q > N * (p - 1) / (N - 1):
            raise InadmissibleParams(f"need q > N(p-1)/(N-1) = {N * (p - 1) / (N - 1):.6g}, got q={q}")
        if not self.lam >= 0 or not math.isfinite(self.lam):
            raise InadmissibleParams("lambda must be finite and >= 0")
        if not self.R > 0:
            raise InadmissibleParams("R must be positive")

    @property
    def a(self):
        """q - (p - 1)."""
        return self.q - (self.p - 1)

    @property
    def gamma(self):
        return self.q / self.a

    @property
    def c_gamma(self):
        g = self.gamma
        return (g - 1) ** (g - 1)

    @property
    def Lambda_gamma(self):
        g = self.gamma
        return ((self.N - g) / g) ** g

    @property
    def lam_max(self):
        return self.c_gamma * self.Lambda_gamma

    @property
    def s_tilde(self):
        return self.N * self.a

    @property
    def delta_tilde(self):
        x = self.s_tilde / (self.p - 1)
        return x / (x - 1)

    @property
    def beta_max(self):
        return (self.N - self.gamma) / self.gamma

    @property
    def m(self):
        """Decay exponent of v in the q < p case."""
        return (self.p - self.q) / self.a

    def with_lam(self, lam):
        return ProblemParams(self.N, self.p, self.q, lam, self.R)

    def as_dict(self):
        return {"N": self.N, "p": self.p, "q": self.q, "lambda": self.lam, "R": self.R}


def beta_function(beta, N, gamma):
    beta = np.asarray(beta, dtype=float)
    return -(gamma - 1) * beta ** gamma + (N - gamma) * beta ** (gamma - 1)


def solve_beta(params, lam=None):
    """Root of F(beta) = lam / c_gamma on [0, (N - gamma)/gamma) by bisection."""
    lam = params.lam if lam is None else lam
    if lam < 0:
        raise InadmissibleParams("lambda must be >= 0")
    if lam >= params.lam_max:
        raise LambdaTooLarge(
            f"lambda={lam:.6g} is not below c_gamma*Lambda_gamma={params.lam_max:.6g}"
        )
    if lam == 0:
        return 0.0
    N, g = params.N, params.gamma
    target = lam / params.c_gamma
    lo, hi = 0.0, params.beta_max

    def F(b):
        return -(g - 1) * b ** g + (N - g) * b ** (g - 1)

    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break  # interval exhausted at float resolution
        if F(mid) < target:
            lo = mid
        else:
            hi = mid
    return lo if abs(F(lo) - target) < abs(F(hi) - target) else hi


def _power_integral(c, r, R):
    """int_r^R t^(c-1) dt, stable as c -> 0 (where it tends to log(R/r))."""
    lr, lR = np.log(r), math.log(R)
    if c == 0:
        return lR - lr
    return (np.expm1(c * lR) - np.expm1(c * lr)) / c


@dataclass(frozen=True, eq=False)
class RadialSolution:
    """Radial model solution v on W_R together with Phi and V.

    ``theta`` is the amplitude of v in the q < p case; for q = p the
    amplitude is (p - 1) beta.  ``case`` is one of ``q_less_p``,
    ``q_equal_p``, ``lambda_zero`` or ``second`` (the non-admissible branch).
    """

    params: ProblemParams
    beta: float
    theta: float | None
    case: str
    kappa: float | None = None

    @classmethod
    def from_beta(cls, params, beta, kappa=None, check=True):
        if check and not (0 <= beta < params.beta_max):
            raise InadmissibleParams(f"beta={beta} outside [0, (N-gamma)/gamma)")
        if params.q < params.p:
            theta = ((params.gamma - 1) * beta) ** (1.0 / params.a) * params.a / (params.p - params.q)
            case = "q_less_p"
        else:
            theta = None
            case = "q_equal_p"
        if params.lam == 0 and beta == 0:
            case = "lambda_zero"
        return cls(params, float(beta), theta, case, kappa)

    @classmethod
    def from_theta(cls, params, theta, kappa=None, case="q_less_p"):
        """q < p profile theta (r^-m - R^-m) with a prescribed amplitude."""
        if not params.q < params.p:
            raise InadmissibleParams("a free amplitude needs q < p")
        beta = (theta * params.m) ** params.a / (params.gamma - 1)
        return cls(params, float(beta), float(theta), case, kappa)

    # ------------------------------------------------------------ evaluators
    def _check(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(~(r > 0)) or np.any(r > self.params.R * (1 + 1e-12)):
            raise OutOfDomain(f"radius outside (0, R={self.params.R}]")
        return r

    def phi(self, r):
        r = self._check(r)
        return (self.params.R / r) ** self.beta - 1.0

    def dphi(self, r):
        r = self._check(r)
        return -self.beta * self.params.R ** self.beta * r ** (-self.beta - 1.0)

    def d2phi(self, r):
        r = self._check(r)
        b = self.beta
        return b * (b + 1.0) * self.params.R ** b * r ** (-b - 2.0)

    def v(self, r):
        r = self._check(r)
        if self.beta == 0:
            return np.zeros_like(r)
        P = self.params
        if self.theta is not None:
            # theta r^-m (1 - (r/R)^m) in logs: theta can be tiny while r^-m overflows
            return np.exp(math.log(self.theta) - P.m * np.log(r)) * -np.expm1(P.m * np.log(r / P.R))
        return (P.p - 1) * self.beta * np.log(P.R / r)

    def dv(self, r):
        r = self._check(r)
        if self.beta == 0:
            return np.zeros_like(r)
        P = self.params
        if self.theta is not None:
            return -np.exp(math.log(self.theta * P.m) - (P.m + 1.0) * np.log(r))
        return -(P.p - 1) * self.beta / r

    def V(self, r):
        """exp((1/(gamma-1)) int_r^R (-v')^a) - 1 from the parameters of v."""
        r = self._check(r)
        if self.beta == 0:
            return np.zeros_like(r)
        P = self.params
        if self.theta is not None:
            coef, c = (self.theta * P.m) ** P.a, 1.0 - (P.m + 1.0) * P.a
        else:
            coef, c = ((P.p - 1) * self.beta) ** P.a, 1.0 - P.a
        I = coef * _power_integral(c, r, P.R)
        return np.expm1(I / (P.gamma - 1))

    def dV(self, r):
        r = self._check(r)
        P = self.params
        return -(self.V(r) + 1.0) * (-self.dv(r)) ** P.a / (P.gamma - 1)

    @property
    def R(self):
        return self.params.R

    def summary(self):
        P = self.params
        return {
            "beta": self.beta,
            "theta": self.theta,
            "gamma": P.gamma,
            "c_gamma": P.c_gamma,
            "Lambda_gamma": P.Lambda_gamma,
            "case": self.case,
        }


def build_radial(params, kappa=None):
    return RadialSolution.from_beta(params, solve_beta(params), kappa)


def phi_eval(sol, r):
    return sol.phi(r)


def v_eval(sol, r):
    return sol.v(r)


def transform_V(sol, r):
    return sol.V(r)


def transform_V_numeric(sol, r, dv=None):
    """V by adaptive quadrature of (-v')^a; ``dv`` defaults to the solution's own derivative."""
    P = sol.params
    dv = sol.dv if dv is None else dv
    r = sol._check(r)
    out = np.empty(r.shape)
    for i, ri in np.ndenumerate(r):
        val, _ = integrate.quad(lambda t: (-float(dv(t))) ** P.a, ri, P.R, limit=200, epsabs=1e-14, epsrel=1e-13)
        out[i] = math.expm1(val / (P.gamma - 1))
    return out


def second_solution(params):
    """The second radially decreasing solution for lam = 0, R = 1 and q < p.

    u2(r) = K (r^-m - 1) with K = (a/(p-q)) ((((N-1)q - (p-1)N))/a)^(1/a),
    a = q - (p - 1).
    """
    P = params
    if P.lam != 0 or P.R != 1 or not P.q < P.p:
        raise InadmissibleParams("the second solution needs lambda = 0, R = 1 and q < p")
    if not P.q > P.N / (P.N - 1):
        raise InadmissibleParams("the second solution needs q > N/(N-1)")
    K = (P.a / (P.p - P.q)) * (((P.N - 1) * P.q - (P.p - 1) * P.N) / P.a) ** (1.0 / P.a)
    return RadialSolution.from_theta(P, K, case="second")


# ------------------------------------------------------------ residual
def residual_1d(profile, r, params=None, method="analytic", h=None):
    """max over ``r`` of |-|V'|^(gamma-2)((gamma-1)V'' + (N-1)V'/r) - (lam/c_gamma)(V+1)^(gamma-1)/r^gamma|.

    ``profile`` is a :class:`RadialSolution` (V = Phi) or a callable of r;
    callables need ``params`` and are differentiated by central differences
    with step ``h``.
    """
    r = np.asarray(r, dtype=float)
    if isinstance(profile, RadialSolution):
        params = profile.params
        V = profile.phi
        if method == "analytic":
            d1, d2 = profile.dphi(r), profile.d2phi(r)
    else:
        V = profile
        if method == "analytic":
            raise ValueError("analytic derivatives need a RadialSolution")
    if method == "fd":
        if h is None or not h > 0:
            raise ValueError("finite differences need h > 0")
        vp, v0, vm = V(r + h), V(r), V(r - h)
        d1 = (vp - vm) / (2 * h)
        d2 = (vp - 2 * v0 + vm) / (h * h)
    elif method != "analytic":
        raise ValueError(f"unknown method {method!r}")
    g, N = params.gamma, params.N
    inner = (g - 1) * d2 + (N - 1) * d1 / r
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = np.where(d1 == 0, 0.0, -np.abs(d1) ** (g - 2) * inner)
    rhs = (params.lam / params.c_gamma) * (V(r) + 1.0) ** (g - 1) / r ** g
    return float(np.max(np.abs(lhs - rhs)))


def radial_ode_residual(sol, r):
    """Residual of -r^(1-N)(r^(N-1)|v'|^(p-2)v')' - |v'|^q - lam/r^gamma (analytic derivatives)."""
    P = sol.params
    r = np.asarray(r, dtype=float)
    w = -sol.dv(r)
    if sol.theta is not None:
        # -v' = theta m r^-(m+1)
        e = (P.m + 1.0) * (P.p - 1)
        flux = (sol.theta * P.m) ** (P.p - 1) * r ** (P.N - 1 - e)
        dflux = (P.N - 1 - e) * flux / r
    else:
        c = (P.p - 1) * sol.beta
        flux = c ** (P.p - 1) * r ** (P.N - 1 - (P.p - 1))
        dflux = (P.N - P.p) * flux / r
    lhs = r ** (1 - P.N) * dflux
    return float(np.max(np.abs(lhs - w ** P.q - P.lam / r ** P.gamma)))


# ------------------------------------------------------------ membership
def _slope(r, log_psi):
    return float(np.polyfit(np.log(r), log_psi, 1)[0])


@dataclass
class MembershipReport:
    passed: bool
    w1gamma_slope: float
    w1gamma_ok: bool
    delta_tilde: float
    delta_bound: float
    deltas_ok: list
    case: str

    def as_dict(self):
        return {
            "check": "branch_membership",
            "pass": self.passed,
            "margin": self.delta_bound - self.delta_tilde,
            "w1gamma_slope": self.w1gamma_slope,
            "w1gamma_ok": self.w1gamma_ok,
            "delta_tilde": self.delta_tilde,
            "delta_bound_estimate": self.delta_bound,
            "deltas_ok": self.deltas_ok,
            "case": self.case,
        }


def branch_membership_check(sol, n_delta=20, radii=None):
    """Asymptotic test of V in W^{1,gamma} and (V+1)^(gamma-1) in W^{1,delta} for some delta > delta_tilde.

    Integrals over W_R minus W_rho stay bounded as rho -> 0 when
    |integrand| r^N decays like a positive power of r; the power is read off
    a log-log fit on radii approaching the origin.
    """
    P = sol.params
    N, g = P.N, P.gamma
    dt = P.delta_tilde
    if radii is None:
        radii = P.R * np.logspace(-9, -5, 9)
    r = np.asarray(radii, dtype=float)

    V = sol.V(r)
    dV = sol.dV(r)
    if np.all(dV == 0) and np.all(V == 0):
        deltas = [float(dt * (1 + 2.0 ** -k)) for k in range(1, n_delta + 1)]
        return MembershipReport(True, math.inf, True, dt, math.inf, deltas, sol.case)

    tiny = 1e-300
    # |DV|^gamma and |V|^gamma against the measure r^(N-1) dr
    s1 = _slope(r, g * np.log(np.abs(dV) + tiny) + N * np.log(r))
    s0 = _slope(r, g * np.log(np.abs(V) + tiny) + N * np.log(r))
    w_ok = bool(min(s1, s0) > 1e-9)

    # g' = -(V+1)^(gamma-1) (-v')^a
    log_dg = (g - 1) * np.log1p(V) + P.a * np.log(-sol.dv(r))
    e = -_slope(r, log_dg)  # |g'| ~ r^-e
    bound = N / e if e > 0 else math.inf
    deltas_ok = []
    for k in range(1, n_delta + 1):
        d = dt * (1 + 2.0 ** -k)
        if _slope(r, d * log_dg + N * np.log(r)) > 1e-9:
            deltas_ok.append(float(d))
    passed = w_ok and bool(deltas_ok)
    return MembershipReport(passed, s1, w_ok, dt, bound, deltas_ok, sol.case)


def sobolev_threshold(sol, radii=None):
    """Estimated sup of s with v in W^{1,s}(W_R): |v'| ~ r^-e gives N/e."""
    P = sol.params
    r = P.R * np.logspace(-9, -5, 9) if radii is None else np.asarray(radii, float)
    w = -sol.dv(r)
    if np.all(w == 0):
        return math.inf
    e = -_slope(r, np.log(w))
    return P.N / e if e > 0 else math.inf


# ------------------------------------------------------------ rearrangement
def v_star(sol, kappa=None):
    """v*(s) = v((s/kappa_N)^(1/N)) on (0, kappa_N R^N]."""
    kappa = sol.kappa if kappa is None else kappa
    if kappa is None:
        raise ValueError("v_star needs the Wulff volume kappa_N")
    N, R = sol.params.N, sol.params.R
    total = kappa * R ** N

    def func(s):
        return sol.v(np.minimum((np.asarray(s, float) / kappa) ** (1.0 / N), R))

    def deriv(s):
        s = np.asarray(s, float)
        r = np.minimum((s / kappa) ** (1.0 / N), R)
        return sol.dv(r) * r / (N * s)

    return AnalyticProfile(func, total, deriv, label="v*")
