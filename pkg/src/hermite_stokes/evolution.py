"""Time integration of du/dt = -nu A u - C(u, u) + P f(t) on the truncated
divergence-free space, with diagnostics, checkpoints and a regularity verdict.

The default scheme is Strang splitting: an exact half step of the heat
semigroup (pointwise multiplier on the k-grid), a Heun (RK2) step of the
nonlinear and forcing terms, another exact half heat step, then projection.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .container import read_container, write_container
from .dissipativity import ForceModel
from .field import SpectralField, random_field
from .operators import delta_from_epsilon
from .space import get_space

log = logging.getLogger(__name__)

SCHEMES = ("strang_heat_rk2", "imex_euler")
BLOWUP_FACTOR = 1e3


class BlowUpError(RuntimeError):
    """Run stopped early; carries the last valid state."""

    def __init__(self, message, state, t, step, rows):
        super().__init__(message)
        self.state = state
        self.t = t
        self.step = step
        self.rows = rows


@dataclass
class InitialData:
    """Recipe for u0: ``zero``, ``random_in_ball`` (||A u0|| = radius * u_+/2) or ``checkpoint``."""

    kind: str = "random_in_ball"
    seed: int = 0
    radius: float = 0.9
    decay_rate: float = 1.5
    scale: float = 1.0
    path: str | None = None


@dataclass
class SimConfig:
    n_modes: int = 8
    n_quad: int | None = None
    nu: float = 1.0
    epsilon: float = 0.25
    force: ForceModel = field(default_factory=ForceModel)
    u0: InitialData = field(default_factory=InitialData)
    dt: float = 1e-3
    t_end: float = 1.0
    checkpoint_every: int = 0
    diagnostics_every: int = 10
    scheme: str = "strang_heat_rk2"
    nonlinear: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < self.dt:
            raise ValueError("t_end must be at least dt")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.diagnostics_every < 1:
            raise ValueError("diagnostics_every must be >= 1")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be >= 0")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        delta_from_epsilon(self.epsilon)

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    def stiffness(self, space):
        """dt * nu * max |k|^2 on the k-grid."""
        return float(self.dt * self.nu * space.ksq.max())


@dataclass
class DiagnosticsRow:
    t: float
    norm_H: float
    norm_V: float
    norm_Au: float
    div_residual: float
    energy_flux: float
    in_ball: bool


DIAG_COLUMNS = [f.name for f in fields(DiagnosticsRow)]


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DIAG_COLUMNS)
    for r in rows:
        w.writerow([f"{v:.17g}" if isinstance(v, float) else int(v) for v in asdict(r).values()])
    return buf.getvalue()


@dataclass
class RunResult:
    final: SpectralField
    rows: list
    checkpoints: list
    t: float
    step: int


# -- steppers ---------------------------------------------------------------------

def _rhs(space, c, t, force, nonlinear):
    out = space.leray(force.value(t, space)) if force.f_sup > 0 else np.zeros(space.shape)
    if nonlinear:
        out = out - space.nonlinear(c, c)
    return out


def step_strang(space, c, t, dt, nu, force, nonlinear=True):
    """One Strang step: heat(dt/2), Heun on -C(u,u) + Pf, heat(dt/2), project."""
    c = space.heat(c, 0.5 * dt, nu)
    k1 = _rhs(space, c, t, force, nonlinear)
    k2 = _rhs(space, c + dt * k1, t + dt, force, nonlinear)
    c = c + 0.5 * dt * (k1 + k2)
    c = space.heat(c, 0.5 * dt, nu)
    return space.leray(c)


def step_imex_euler(space, c, t, dt, nu, force, nonlinear=True):
    """Explicit Euler for -C(u,u) + Pf, implicit Euler for -nu A."""
    c = c + dt * _rhs(space, c, t, force, nonlinear)
    return space.leray(space.resolvent(c, dt, nu))


_STEPPERS = {"strang_heat_rk2": step_strang, "imex_euler": step_imex_euler}


# -- driver -----------------------------------------------------------------------

def diagnostics(space, c, t, nu, force, u_plus, nonlinear=True):
    norm_h = float(np.linalg.norm(c))
    norm_au = space.stokes_norm(c, 1.0)
    div = float(np.linalg.norm(space.divergence(c)))
    rhs = -nu * space.stokes(c) + _rhs(space, c, t, force, nonlinear)
    return DiagnosticsRow(
        t=float(t),
        norm_H=norm_h,
        norm_V=space.stokes_norm(c, 0.5),
        norm_Au=norm_au,
        div_residual=div / norm_h if norm_h > 0 else div,
        energy_flux=float(np.vdot(rhs, c)),
        in_ball=bool(norm_au <= 0.5 * u_plus) if u_plus is not None and math.isfinite(u_plus) else False,
    )


def initial_state(config, space, u_plus=None):
    spec = config.u0
    if spec.kind == "zero":
        return np.zeros(space.shape)
    if spec.kind == "random_in_ball":
        u = random_field(spec.seed, space, spec.decay_rate, divergence_free=True)
        c = u.coeffs
        if u_plus is not None and math.isfinite(u_plus):
            c = c * (spec.radius * 0.5 * u_plus / space.stokes_norm(c, 1.0))
        return c * spec.scale
    if spec.kind == "checkpoint":
        c, _, _ = load_checkpoint(spec.path, space)
        return c * spec.scale
    raise ValueError(f"unknown initial data kind {spec.kind!r}")


def checkpoint_name(step):
    return f"ck_{step:08d}.hsf"


def save_checkpoint(path, space, c, step, t, norm0):
    write_container(path, {"u": c, "state": np.array([step, t, norm0], dtype=float)},
                    space.key, meta={"step": int(step)})


def load_checkpoint(path, space=None):
    """Return ``(coeffs, step, norm0)``."""
    arrays, header = read_container(path)
    b = header["basis"]
    if space is not None and (space.n_modes, space.n_quad) != (b["n_modes"], b["n_quad"]):
        raise ValueError(f"checkpoint built for {b}, space is {space!r}")
    state = arrays["state"]
    return arrays["u"], int(state[0]), float(state[2])


def evolve(config, params=None, u0=None, out_dir=None, resume=None, space=None):
    """Integrate from ``u0`` (or the config recipe) to ``t_end``.

    ``params`` supplies u_+ for the in-ball flag and the initial scaling of
    random data. With ``resume`` the run continues from a checkpoint file and
    reproduces the uninterrupted run bit for bit. Raises :class:`BlowUpError`
    if ||u|| exceeds 1e3 times its initial value or becomes non-finite.
    """
    space = space or get_space(config.n_modes, config.n_quad)
    u_plus = None if params is None else params.u_plus
    step0 = 0
    if resume is not None:
        c, step0, norm0 = load_checkpoint(resume, space)
    else:
        c = initial_state(config, space, u_plus) if u0 is None else np.array(
            u0.coeffs if isinstance(u0, SpectralField) else u0, dtype=float)
        norm0 = float(np.linalg.norm(c))
    stepper = _STEPPERS[config.scheme]
    limit = BLOWUP_FACTOR * norm0 if norm0 > 0 else math.inf
    rows = []
    ckpts = []
    nl = config.nonlinear
    if step0 == 0:
        rows.append(diagnostics(space, c, 0.0, config.nu, config.force, u_plus, nl))
    for step in range(step0 + 1, config.n_steps + 1):
        t_prev = (step - 1) * config.dt
        # overflow is detected just below, not warned about
        with np.errstate(over="ignore", invalid="ignore"):
            new = stepper(space, c, t_prev, config.dt, config.nu, config.force, nl)
        n = float(np.linalg.norm(new))
        if not math.isfinite(n) or n > limit:
            raise BlowUpError(f"blow-up at step {step} (||u|| = {n:.3e})",
                              SpectralField(c, space, True), t_prev, step - 1, rows)
        c = new
        t = step * config.dt
        if step % config.diagnostics_every == 0 or step == config.n_steps:
            rows.append(diagnostics(space, c, t, config.nu, config.force, u_plus, nl))
        if out_dir is not None and config.checkpoint_every and step % config.checkpoint_every == 0:
            path = os.path.join(out_dir, checkpoint_name(step))
            save_checkpoint(path, space, c, step, t, norm0)
            ckpts.append(path)
    if out_dir is not None:
        with open(os.path.join(out_dir, "diagnostics.csv"), "w", newline="") as fh:
            fh.write(rows_to_csv(rows))
    return RunResult(SpectralField(c, space, True), rows, ckpts, config.n_steps * config.dt, config.n_steps)


def detect_regularity(rows, params=None, blew_up=False):
    """Summarise a run: ball membership, growth of norm_V, decay of norm_H."""
    in_regime = params is not None and params.regime == "dissipative"
    if not rows:
        return {"blow_up": bool(blew_up), "in_regime": in_regime, "regular": False, "rows": 0}
    nv = np.array([r.norm_V for r in rows])
    nh = np.array([r.norm_H for r in rows])
    na = np.array([r.norm_Au for r in rows])
    ts = np.array([r.t for r in rows])
    verdict = {
        "rows": len(rows),
        "blow_up": bool(blew_up),
        "in_regime": in_regime,
        "started_in_ball": bool(rows[0].in_ball),
        "stayed_in_ball": bool(all(r.in_ball for r in rows)),
        "max_ball_ratio": None,
        "max_norm_V": float(nv.max()),
        "norm_V_growth": float(nv.max() / nv[0]) if nv[0] > 0 else (0.0 if nv.max() == 0 else math.inf),
        "min_decay_rate": None,
        "max_div_residual": float(max(r.div_residual for r in rows)),
    }
    if params is not None and math.isfinite(params.u_plus) and params.u_plus > 0:
        verdict["max_ball_ratio"] = float(na.max() / (0.5 * params.u_plus))
    if len(rows) > 1 and np.all(nh > 0):
        rates = -np.diff(np.log(nh)) / np.diff(ts)
        verdict["min_decay_rate"] = float(rates.min())
    if in_regime and verdict["started_in_ball"]:
        verdict["regular"] = not blew_up
        verdict["claim"] = "in-ball run with gamma < 1: no blow-up expected"
    else:
        verdict["regular"] = None if not blew_up else False
        verdict["claim"] = "out of regime: no regularity claim"
    if not any(r.norm_H for r in rows):
        verdict["regular"] = not blew_up
        verdict["claim"] = "zero solution"
    return verdict
