"""The operator J(u, t), its rescaling script-A(t) = nu (AB)^{1+delta} J(., t),
the smallness thresholds u_-, u_+ and sampled tests of four dissipativity
notions.

Everything is evaluated in coordinates of the truncated divergence-free
subspace held by an :class:`~hermite_stokes.operators.OperatorCache`.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .estimates import EstimateReport
from .field import SpectralField, random_field, require_divergence_free
from .operators import delta_from_epsilon
from .rng import generator, sample_generator

SIGN_TOL = 1e-9
LINEAR_FORMS = ("consistent", "printed")
NOTIONS = ("zero_diss", "diss", "strong", "uniform")


# -- thresholds -------------------------------------------------------------------

@dataclass
class ThresholdParams:
    nu: float
    f_sup: float
    c: float
    a: float
    lambda1: float
    lambda0: float
    omega: float | None
    n_sel: int | None
    epsilon: float
    delta: float
    gamma: float
    u_minus: float
    u_plus: float
    alpha_strong: float
    regime: str
    nu_threshold: float
    lambda0_info: dict = field(default_factory=dict)

    @property
    def accepted(self):
        return self.regime == "dissipative"

    def quadratic(self, x):
        """Left side of the 0-dissipativity quadratic in x = ||u||."""
        d = self.delta
        return (self.c / (self.nu * self.lambda1 ** (1 + d)) * x * x
                - x / (self.lambda0 * self.a**d)
                + self.f_sup / (self.nu * self.a ** (1 + d)))

    def vieta_residuals(self):
        """Relative mismatch of u_+ u_- and u_+ + u_- against the coefficient ratios."""
        d = self.delta
        qa = self.c / (self.nu * self.lambda1 ** (1 + d))
        qb = 1.0 / (self.lambda0 * self.a**d)
        qc = self.f_sup / (self.nu * self.a ** (1 + d))
        s = self.u_plus + self.u_minus
        p = self.u_plus * self.u_minus
        prod = abs(p - qc / qa) / (qc / qa) if qc else abs(p)
        return abs(s - qb / qa) / (qb / qa), prod

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = None
        return d


def compute_thresholds(nu, f_sup, c, a, lambda1, lambda0, epsilon, omega=None, n_sel=None,
                       lambda0_info=None):
    """Fill gamma, u_-, u_+ and the strong-dissipativity constant.

    ``regime`` is ``"dissipative"`` for gamma < 1, ``"degenerate"`` for a
    double root (gamma == 1) and ``"rejected"`` for gamma > 1, in which case
    the roots are NaN.
    """
    for name, v in (("nu", nu), ("c", c), ("a", a), ("lambda1", lambda1), ("lambda0", lambda0)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    if f_sup < 0:
        raise ValueError("f_sup must be nonnegative")
    delta = delta_from_epsilon(epsilon)
    gamma = 4 * c * lambda0**2 * f_sup / (nu**2 * a ** (1 - delta) * lambda1 ** (1 + delta))
    half = nu * lambda1 ** (1 + delta) / (2 * c * lambda0 * a**delta)
    nu_thr = 2 * lambda0 * a ** (-(1 - delta) / 2) * lambda1 ** (-(1 + delta) / 2) * math.sqrt(c * f_sup)
    if gamma <= 1.0:
        s = math.sqrt(1.0 - gamma)
        # 1 - s written as gamma / (1 + s) to keep u_- accurate for small gamma
        one_minus = gamma / (1.0 + s)
        u_minus, u_plus = half * one_minus, half * (1.0 + s)
        alpha = 0.5 / (lambda0 * a ** (2 * delta)) * one_minus
        regime = "dissipative" if gamma < 1.0 else "degenerate"
    else:
        u_minus = u_plus = alpha = float("nan")
        regime = "rejected"
    return ThresholdParams(
        float(nu), float(f_sup), float(c), float(a), float(lambda1), float(lambda0),
        None if omega is None else float(omega), n_sel, float(epsilon), delta, gamma,
        u_minus, u_plus, alpha, regime, nu_thr, dict(lambda0_info or {}),
    )


def f_for_gamma(gamma, nu, c, a, lambda1, lambda0, epsilon):
    """Forcing level f_sup that produces a prescribed gamma."""
    delta = delta_from_epsilon(epsilon)
    return gamma * nu**2 * a ** (1 - delta) * lambda1 ** (1 + delta) / (4 * c * lambda0**2)


def pairing_envelope(cache, delta):
    """Extreme singular values of B^{-1/2} (AB)^{-delta}, squared."""
    key = ("envelope", float(delta))
    if key not in cache._memo:
        g = cache.frac_matrix("B", -0.5) @ cache.frac_matrix("AB", -delta)
        s = np.linalg.svd(g, compute_uv=False)
        cache._memo[key] = (float(s.min() ** 2), float(s.max() ** 2))
    return cache._memo[key]


def select_lambda0(cache, delta, mode="auto", n_sel=1, omega=1.0, lambda1=None):
    """lambda_0 from lambda_0^{-1} = max(lambda_n^{-1}, lambda_1^{-omega}).

    ``mode="auto"`` takes the smallest n and omega for which the two-sided
    bounds on ||B^{-1/2}(AB)^{-delta} u|| hold for every u in the truncated
    subspace; n is ``None`` when no eigenvalue of the truncation is large
    enough. ``mode="fixed"`` uses the given ``n_sel`` and ``omega``.
    Returns ``(lambda0, n_sel, omega, info)``.
    """
    lam = cache.eig_B.values
    lam1 = float(lam[0]) if lambda1 is None else float(lambda1)
    a = cache.a_constant(delta)
    s2_min, s2_max = pairing_envelope(cache, delta)
    need = 1.0 / (s2_min * a ** (2 * delta))  # lambda_n (and lambda_1^omega) must reach this
    if mode == "auto":
        idx = np.nonzero(lam >= need)[0]
        n_sel = int(idx[0]) + 1 if idx.size else None
        omega = math.log(need) / math.log(lam1) if lam1 > 1 else float("inf")
    elif mode == "fixed":
        if n_sel is None or not 1 <= n_sel <= lam.size:
            raise ValueError(f"n_sel must lie in [1, {lam.size}]")
    else:
        raise ValueError(f"unknown lambda0 mode {mode!r}")
    inv = [lam1 ** (-omega)]
    if n_sel is not None:
        inv.append(1.0 / lam[n_sel - 1])
    lambda0 = 1.0 / max(inv)
    info = {
        "mode": mode,
        "sigma2_min": s2_min,
        "sigma2_max": s2_max,
        "lambda_needed": need,
        "lambda_max_B": float(lam[-1]),
        "lower_bound_holds": bool(1.0 / (lambda0 * a ** (2 * delta)) <= s2_min * (1 + 1e-12)),
        "upper_bound_holds": bool(s2_max <= a ** (-2 * delta) / lam1 * (1 + 1e-12)),
    }
    return lambda0, n_sel, omega, info


# -- forcing ----------------------------------------------------------------------

_DIRECTIONS = {}


@dataclass(frozen=True)
class ForceModel:
    """f(t) = amplitude * zeta(t) * e with e a fixed unit divergence-free field.

    ``zero``: f = 0; ``constant``: zeta = 1; ``hoelder``:
    zeta(t) = sign(sin wt) |sin wt|^theta with w chosen so that the Hoelder
    constant of f is exactly ``d_lip``. In all cases sup ||P f|| = amplitude.
    """

    kind: str = "zero"
    amplitude: float = 0.0
    theta: float = 0.5
    d_lip: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "hoelder"):
            raise ValueError(f"unknown force kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if self.kind == "hoelder":
            if not 0 < self.theta < 1:
                raise ValueError("theta must lie in (0, 1)")
            if not self.d_lip > 0:
                raise ValueError("d_lip must be positive")

    @property
    def f_sup(self):
        return 0.0 if self.kind == "zero" else float(self.amplitude)

    @property
    def frequency(self):
        if self.kind != "hoelder" or self.amplitude == 0:
            return 0.0
        return (self.d_lip / (self.amplitude * 2 ** (1 - self.theta))) ** (1 / self.theta)

    def direction(self, space):
        key = (self.seed, space.key)
        e = _DIRECTIONS.get(key)
        if e is None:
            u = random_field(self.seed, space, decay_rate=1.5, divergence_free=True, stream=2**32 + 7)
            e = _DIRECTIONS[key] = u.coeffs / u.norm()
            e.setflags(write=False)
        return e

    def profile(self, t):
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return 1.0
        s = math.sin(self.frequency * t)
        return math.copysign(abs(s) ** self.theta, s)

    def value(self, t, space):
        """Coefficients of P f(t)."""
        if self.kind == "zero" or self.amplitude == 0:
            return np.zeros(space.shape)
        return self.amplitude * self.profile(t) * self.direction(space)


# -- J and script-A ---------------------------------------------------------------

class JOperator:
    """J(., t) in subspace coordinates for fixed parameters and forcing.

    ``linear="consistent"`` realises the linear part as -(AB)^{-(1+delta)} A,
    which makes nu (AB)^{1+delta} J equal to the projected Navier-Stokes right
    side exactly; ``linear="printed"`` uses -B^{-(1+delta)} A^{-delta}.
    """

    def __init__(self, params, force, cache, linear="consistent"):
        if linear not in LINEAR_FORMS:
            raise ValueError(f"linear must be one of {LINEAR_FORMS}")
        self.params = params
        self.force = force
        self.cache = cache
        self.space = cache.space
        self.linear = linear
        d = params.delta
        self.M = cache.frac_matrix("AB", -(1 + d))
        if linear == "consistent":
            self.L = -self.M @ cache.A_df
        else:
            self.L = -cache.frac_matrix("B", -(1 + d)) @ cache.frac_matrix("A", -d)
        self.W = cache.frac_matrix("AB", -d)
        self._fdir = self.cache.coords(force.direction(self.space)) if force.f_sup > 0 else None

    def force_coords(self, t):
        if self._fdir is None:
            return np.zeros(self.cache.d_df)
        return self.force.amplitude * self.force.profile(t) * self._fdir

    def nonlinear_coords(self, y):
        c = self.cache.field(y)
        return self.cache.coords(self.space.nonlinear(c, c))

    def __call__(self, y, t):
        nu = self.params.nu
        rest = self.force_coords(t) - self.nonlinear_coords(y)
        return self.L @ y + (self.M @ rest) / nu

    def script_A(self, y, t):
        nu = self.params.nu
        return nu * self.cache.frac_coords("AB", 1 + self.params.delta, self(y, t))


def apply_J(u, t, force, params, cache, linear="consistent"):
    require_divergence_free(u, "apply_J")
    op = JOperator(params, force, cache, linear)
    return cache.to_field(op(cache.coords(u.coeffs), t))


def apply_script_A(u, t, force, params, cache, linear="consistent"):
    require_divergence_free(u, "apply_script_A")
    op = JOperator(params, force, cache, linear)
    return cache.to_field(op.script_A(cache.coords(u.coeffs), t))


def projected_rhs(u, t, force, nu):
    """-nu A u - C(u, u) + P f(t), assembled on the k-grid without the cache."""
    sp = u.space
    c = u.coeffs
    out = -nu * sp.stokes(c) - sp.nonlinear(c, c) + sp.leray(force.value(t, sp))
    return SpectralField(out, sp, True)


def round_trip_residual(u, t, force, params, cache, linear="consistent"):
    """||nu (AB)^{1+delta} J(u,t) - (-nu A u - C(u,u) + P f(t))|| / ||rhs||."""
    lhs = apply_script_A(u, t, force, params, cache, linear)
    rhs = projected_rhs(u, t, force, params.nu)
    n = rhs.norm()
    return (lhs - rhs).norm() / n if n > 0 else (lhs - rhs).norm()


# -- dissipativity tests ----------------------------------------------------------

@dataclass
class DissipativityReport:
    notion: str
    samples: int
    worst_value: float
    alpha_measured: float
    pass_: bool
    alpha_stated: float = float("nan")
    violations: int = 0
    parameters: dict = field(default_factory=dict)
    rows: list = field(default_factory=list, repr=False)

    def to_dict(self, rows=False):
        d = asdict(self)
        d["pass"] = bool(d.pop("pass_"))
        if not rows:
            d.pop("rows")
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = None
        return d

    def rows_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sample", "norm_diff_H", "norm_A_u", "norm_A_v", "pairing", "normalized"])
        for r in self.rows:
            w.writerow([r[0]] + [f"{x:.17g}" for x in r[1:]])
        return buf.getvalue()


def _unit_directions(cache, seed, index):
    g = sample_generator(seed, index)
    y = g.standard_normal(cache.d_df)
    return y / np.linalg.norm(y), g


def _scale_to_A_norm(cache, y, target):
    return y * (target / np.linalg.norm(cache.A_df @ y))


def test_dissipativity(notion, params, force, n_samples, seed, cache, t=0.0,
                       linear="consistent", tol=SIGN_TOL):
    """Sample the chosen notion and report the worst normalised pairing.

    * ``zero_diss``: <J(u,t), (AB)^{-delta} u> <= 0 for u_- <= ||u|| <= u_+;
    * ``diss``: <J(u,t) - J(v,t), u - v> <= 0 on the ball ||A.|| <= u_+/2;
    * ``strong``: <J(u,t) - J(v,t), (AB)^{-delta}(u - v)> <= -alpha ||u - v||^2
      on the same ball;
    * ``uniform``: <A(t)u - A(t)v, u - v> <= -m ||A^{1/2}(u - v)|| ||u - v||
      with m = 1/2 nu lambda_0^{-1} a^{-delta} (1 - sqrt(1 - gamma)).

    Pairings are divided by ||u||^2 or ||u - v||^2 (or the modulus scale for
    ``uniform``) and tested with absolute tolerance ``tol``. Sample 0 of the
    pair notions is u = v. ``test_`` functions are not collected by pytest
    because this module lives outside the test tree.
    """
    if notion not in NOTIONS:
        raise ValueError(f"unknown notion {notion!r}")
    if params.regime == "rejected":
        raise ValueError("gamma >= 1: no dissipativity ball for these parameters")
    J = JOperator(params, force, cache, linear)
    W = J.W
    radius = 0.5 * params.u_plus
    rows = []
    values = []
    alpha_stated = {
        "zero_diss": 0.0, "diss": 0.0, "strong": params.alpha_strong,
        "uniform": params.nu * params.a**params.delta * params.alpha_strong,
    }[notion]
    for k in range(n_samples):
        if notion == "zero_diss":
            y, g = _unit_directions(cache, seed, k)
            r = params.u_minus + (params.u_plus - params.u_minus) * g.uniform()
            y = y * r
            pairing = float(J(y, t) @ (W @ y))
            scale = float(y @ y)
            rows.append((k, math.sqrt(scale), float(np.linalg.norm(cache.A_df @ y)), 0.0,
                         pairing, pairing / scale))
            values.append(pairing / scale)
            continue
        yu, g = _unit_directions(cache, seed, 2 * k)
        yu = _scale_to_A_norm(cache, yu, radius * (1.0 - g.uniform()))
        if k == 0:
            yv = yu.copy()
        else:
            yv, g = _unit_directions(cache, seed, 2 * k + 1)
            yv = _scale_to_A_norm(cache, yv, radius * (1.0 - g.uniform()))
        w = yu - yv
        if notion == "uniform":
            diff = J.script_A(yu, t) - J.script_A(yv, t)
            pairing = float(diff @ w)
            scale = float(np.linalg.norm(cache.frac_coords("A", 0.5, w)) * np.linalg.norm(w))
        else:
            diff = J(yu, t) - J(yv, t)
            pairing = float(diff @ (W @ w if notion == "strong" else w))
            scale = float(w @ w)
        normalized = pairing / scale if scale > 0 else 0.0
        rows.append((k, float(np.linalg.norm(w)), float(np.linalg.norm(cache.A_df @ yu)),
                     float(np.linalg.norm(cache.A_df @ yv)), pairing, normalized))
        if scale > 0:
            values.append(normalized)
    values = np.array(values)
    worst = float(values.max()) if values.size else 0.0
    alpha_measured = -worst
    viol = int(np.sum(values > -alpha_stated + tol))
    return DissipativityReport(
        notion, n_samples, worst, alpha_measured, viol == 0, alpha_stated, viol,
        {"linear": linear, "t": t, "seed": seed, "n_modes": cache.space.n_modes,
         "lambda0": params.lambda0, "n_sel": params.n_sel, "omega": params.omega,
         "gamma": params.gamma, "u_plus": params.u_plus, "u_minus": params.u_minus},
        rows,
    )


def test_J_time_lipschitz(force, params, cache, pairs, seed, linear="consistent"):
    """Sample ||J(u,t) - J(u,tau)|| / |t - tau|^theta against d' = d nu^{-1} a^{-(1+delta)}."""
    if force.kind != "hoelder":
        raise ValueError("the time-Lipschitz test needs a hoelder force")
    J = JOperator(params, force, cache, linear)
    d = params.delta
    d_prime = force.d_lip / params.nu * cache.op_norm("AB", -(1 + d))
    u = random_field(seed, cache.space, stream=0)
    y = cache.coords(u.coeffs) * (0.5 * params.u_plus / max(u.space.stokes_norm(u.coeffs, 1.0), 1e-300))
    period = 2 * math.pi / force.frequency if force.frequency > 0 else 1.0
    g = generator(seed, 1)
    ratios = []
    viol = 0
    for k in range(pairs):
        t = g.uniform(0, 4 * period)
        if k == 0:
            tau = t
        else:
            tau = t + (1 if g.uniform() < 0.5 else -1) * period * 10 ** g.uniform(-6, 0.5)
        lhs = float(np.linalg.norm(J(y, t) - J(y, tau)))
        h = abs(t - tau) ** force.theta
        if h == 0:
            viol += int(lhs > SIGN_TOL)
            continue
        r = lhs / h
        ratios.append(r)
        viol += int(r > d_prime + SIGN_TOL)
    ratios = np.array(ratios)
    return EstimateReport(
        "thm8_lipschitz", pairs, cache.space.n_modes, seed, float(ratios.max() / d_prime), viol,
        {"theta": force.theta, "d": force.d_lip, "delta": d, "nu": params.nu},
        {"d_prime": d_prime, "max_ratio": float(ratios.max()), "linear": linear},
    )


test_dissipativity.__test__ = False
test_J_time_lipschitz.__test__ = False
