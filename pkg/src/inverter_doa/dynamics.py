"""Right-hand sides and time integration for the two-angle system.

Three model fidelities share one interface:

* ``Exact``       -- the coupled reduced-order equations with the full
                     algebraic voltage-control terms (finite m_q).
* ``Generalized`` -- the sine/cosine normal form built from
                     GeneralizedCoefficients; identical to Exact whenever no
                     GSP slot is present.
* ``FullOrder``   -- PI PLLs with integral states (d1, z1, d2, z2), used to
                     validate the first-order PLL reduction.

States are plain numpy arrays: shape (..., 2) for the reduced models and
(..., 4) for the full-order one; all RHS functions broadcast over leading
axes so grids of initial conditions integrate in one vectorized sweep.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .network import (
    GeneralizedCoefficients,
    InverterConfig,
    InverterKind,
    TwoInverterSystem,
    derive_impedances,
    to_generalized,
)


class RhsMode(enum.Enum):
    EXACT = "Exact"
    GENERALIZED = "Generalized"
    FULL_ORDER = "FullOrder"


class IntegrationFailure(RuntimeError):
    """Integration aborted; carries the partial trajectory."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


def state2(d1: float, d2: float) -> np.ndarray:
    return np.array([d1, d2], dtype=float)


def state4(d1: float, z1: float, d2: float, z2: float) -> np.ndarray:
    return np.array([d1, z1, d2, z2], dtype=float)


# ---------------------------------------------------------------------------
# Generalized-form evaluation
# ---------------------------------------------------------------------------

def generalized_rhs(c: GeneralizedCoefficients, y: np.ndarray) -> np.ndarray:
    """Angle velocities of the generalized form at states y (..., 2)."""
    d1 = y[..., 0]
    d2 = y[..., 1]
    sth = np.sin(d1 - d2)
    cth = np.cos(d1 - d2)
    f1 = c.k1 * (c.c1 - c.a1 * sth - c.b1 * np.sin(d1) + c.d1 * cth)
    f2 = c.k2 * (c.c2 + c.a2 * sth - c.b2 * np.sin(d2) + c.d2 * cth)
    return np.stack([f1, f2], axis=-1)


def generalized_jacobian(c: GeneralizedCoefficients, y: np.ndarray) -> np.ndarray:
    """Analytic Jacobian of the generalized form, shape (..., 2, 2)."""
    d1 = y[..., 0]
    d2 = y[..., 1]
    sth = np.sin(d1 - d2)
    cth = np.cos(d1 - d2)
    j11 = c.k1 * (-c.a1 * cth - c.b1 * np.cos(d1) - c.d1 * sth)
    j12 = c.k1 * (c.a1 * cth + c.d1 * sth)
    j21 = c.k2 * (c.a2 * cth - c.d2 * sth)
    j22 = c.k2 * (-c.a2 * cth - c.b2 * np.cos(d2) + c.d2 * sth)
    return np.stack([np.stack([j11, j12], axis=-1),
                     np.stack([j21, j22], axis=-1)], axis=-2)


# ---------------------------------------------------------------------------
# Exact evaluation: base form + algebraic TVC correction
# ---------------------------------------------------------------------------

def _as_gfl(cfg: InverterConfig) -> InverterConfig:
    """View a GSP slot as its underlying GFL (drops the TVC)."""
    if cfg.kind is InverterKind.GSP:
        return replace(cfg, kind=InverterKind.GFL, m_q=0.0, v_ref=1.0)
    return cfg


def _base_system(sys: TwoInverterSystem) -> TwoInverterSystem:
    return TwoInverterSystem(ibr1=_as_gfl(sys.ibr1), ibr2=_as_gfl(sys.ibr2),
                             network=sys.network)


@dataclass(frozen=True)
class _TvcCorrection:
    """Extra term the GSP's reactive current adds to the partner equation.

    With the GSP in slot 2, its q-axis current is
        i_2q = (alpha / x_eff) * (w(d1, d2) - v_ref)
    and the partner's equation gains  gain * i_2q * s(d1, d2), where s and w
    depend on whether the partner is a current source (GFL) or a voltage
    source (GFM). Slot-1 GSPs are handled by evaluating on the swapped
    system and swapping back.
    """

    gsp_slot: int            # 1 or 2 (which slot carries the TVC)
    partner_is_gfm: bool
    alpha: float
    x_eff: float
    k_partner: float
    coef: float              # gain * alpha / x_eff, premultiplied
    xg: float
    ug: float
    v_ref: float
    i_partner_d: float       # d-current of the GFL partner (0 for GFM partner)
    v_partner: float         # GFM partner voltage (unused for GFL partner)
    x_over: float            # Xg/X_partner_sum divider used inside w


def _tvc_correction(sys: TwoInverterSystem) -> Optional[_TvcCorrection]:
    kinds = (sys.ibr1.effective_kind(), sys.ibr2.effective_kind())
    if InverterKind.GSP not in kinds:
        return None
    slot = 1 if kinds[0] is InverterKind.GSP else 2
    work = sys if slot == 2 else sys.swapped()
    # From here the GSP sits in slot 2 of `work`.
    gsp_cfg = work.ibr2
    partner = work.ibr1
    imp = derive_impedances(work.network)
    xg = work.network.xg
    ug = work.network.ug
    if partner.effective_kind() is InverterKind.GFM:
        x_eff = imp.x_2p1g
        alpha = gsp_cfg.m_q * x_eff / (gsp_cfg.m_q * x_eff + 1.0)
        # Partner GFM picks up gain*(xg*v1/x_1sum) * i_2q * sin(d1-d2)
        coef = partner.k_gfm * (xg * partner.v_mag / imp.x_1sum) * alpha / x_eff
        return _TvcCorrection(
            gsp_slot=slot, partner_is_gfm=True, alpha=alpha, x_eff=x_eff,
            k_partner=partner.k_gfm, coef=coef, xg=xg, ug=ug,
            v_ref=gsp_cfg.v_ref, i_partner_d=0.0, v_partner=partner.v_mag,
            x_over=xg / imp.x_1sum)
    else:
        x_eff = imp.x_2sum
        alpha = gsp_cfg.m_q * x_eff / (gsp_cfg.m_q * x_eff + 1.0)
        # Partner GFL picks up gain*(-xg) * i_2q * sin(d2-d1)
        coef = partner.k_pll * xg * alpha / x_eff
        return _TvcCorrection(
            gsp_slot=slot, partner_is_gfm=False, alpha=alpha, x_eff=x_eff,
            k_partner=partner.k_pll, coef=coef, xg=xg, ug=ug,
            v_ref=gsp_cfg.v_ref, i_partner_d=partner.i_d, v_partner=1.0,
            x_over=xg / imp.x_2sum)


def _exact_extra(sys_norm: TwoInverterSystem, corr: _TvcCorrection,
                 y: np.ndarray, want_jac: bool):
    """Correction to the partner equation for `work` systems (GSP in slot 2).

    y carries (d1, d2) of the normalized orientation. Returns the extra
    velocity on axis 1 and, when requested, its gradient (d/d1, d/d2).
    """
    imp = derive_impedances(sys_norm.network)
    net = sys_norm.network
    d1 = y[..., 0]
    d2 = y[..., 1]
    th = d1 - d2
    sth = np.sin(th)
    cth = np.cos(th)
    if corr.partner_is_gfm:
        # w = (xg/x_1sum) v1 cos(th) + (x1/x_1sum) ug cos(d2)
        a = net.xg * corr.v_partner / imp.x_1sum
        b = net.x1 * corr.ug / imp.x_1sum
        w = a * cth + b * np.cos(d2)
        extra = corr.coef * (w - corr.v_ref) * sth
        if not want_jac:
            return extra, None, None
        dw1 = -a * sth
        dw2 = a * sth - b * np.sin(d2)
        g1 = corr.coef * (dw1 * sth + (w - corr.v_ref) * cth)
        g2 = corr.coef * (dw2 * sth - (w - corr.v_ref) * cth)
        return extra, g1, g2
    # Partner is a GFL current source:
    # w = ug cos(d2) - xg i_1d sin(d1 - d2); extra enters the d1 equation as
    # -k1 xg i_2q sin(d2 - d1) = +coef (w - v_ref) sin(th) ... with sign from
    # i_2q = (alpha/x_eff)(w - v_ref) and -xg sin(d2-d1) = +xg sin(th).
    w = corr.ug * np.cos(d2) - net.xg * corr.i_partner_d * sth
    extra = corr.coef * (w - corr.v_ref) * sth
    if not want_jac:
        return extra, None, None
    dw1 = -net.xg * corr.i_partner_d * cth
    dw2 = -corr.ug * np.sin(d2) + net.xg * corr.i_partner_d * cth
    g1 = corr.coef * (dw1 * sth + (w - corr.v_ref) * cth)
    g2 = corr.coef * (dw2 * sth - (w - corr.v_ref) * cth)
    return extra, g1, g2


@dataclass
class ReducedModel:
    """Callable bundle for one system and reduced mode: rhs and Jacobian."""

    sys: TwoInverterSystem
    mode: RhsMode
    _coeffs: GeneralizedCoefficients = field(init=False)
    _corr: Optional[_TvcCorrection] = field(init=False, default=None)
    _work: Optional[TwoInverterSystem] = field(init=False, default=None)

    def __post_init__(self):
        if self.mode is RhsMode.GENERALIZED:
            self._coeffs = to_generalized(self.sys)
        elif self.mode is RhsMode.EXACT:
            self._coeffs = to_generalized(_base_system(self.sys))
            self._corr = _tvc_correction(self.sys)
            if self._corr is not None:
                work = self.sys if self._corr.gsp_slot == 2 else self.sys.swapped()
                self._work = work
        else:
            raise ValueError("ReducedModel covers Exact and Generalized only")

    @property
    def gains(self) -> tuple[float, float]:
        return self._coeffs.k1, self._coeffs.k2

    def rhs(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        f = generalized_rhs(self._coeffs, y)
        if self._corr is not None:
            if self._corr.gsp_slot == 2:
                extra, _, _ = _exact_extra(self._work, self._corr, y, False)
                f[..., 0] += extra
            else:
                ys = y[..., ::-1]
                extra, _, _ = _exact_extra(self._work, self._corr, ys, False)
                f[..., 1] += extra
        return f

    def jacobian(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        J = generalized_jacobian(self._coeffs, y)
        if self._corr is not None:
            if self._corr.gsp_slot == 2:
                _, g1, g2 = _exact_extra(self._work, self._corr, y, True)
                J[..., 0, 0] += g1
                J[..., 0, 1] += g2
            else:
                ys = y[..., ::-1]
                _, g1, g2 = _exact_extra(self._work, self._corr, ys, True)
                # extra lives on axis 2; its (d1', d2') gradient swaps back
                J[..., 1, 1] += g1
                J[..., 1, 0] += g2
        return J


# ---------------------------------------------------------------------------
# Full-order model (PI PLLs, algebraic TVC, optional frequency clamp)
# ---------------------------------------------------------------------------

@dataclass
class FullOrderModel:
    """PI-PLL model on states (d1, z1, d2, z2); GFM slots carry z == 0.

    The PLL law is d' = k_pll * v_q + k_i * z with z' = v_q. The optional
    omega_limit symmetrically clamps each angle velocity (the reduced-order
    analysis never uses it).
    """

    sys: TwoInverterSystem
    omega_limit: Optional[float] = None

    def __post_init__(self):
        self._reduced = ReducedModel(self.sys, RhsMode.EXACT)

    def _vq(self, y2: np.ndarray) -> np.ndarray:
        """q-axis terminal voltages (vq1, vq2) implied by the exact model."""
        f = self._reduced.rhs(y2)
        out = np.empty_like(f)
        for idx, cfg in ((0, self.sys.ibr1), (1, self.sys.ibr2)):
            if cfg.effective_kind() is InverterKind.GFM:
                out[..., idx] = 0.0
            else:
                out[..., idx] = f[..., idx] / cfg.gain
        return out

    def rhs(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        y2 = np.stack([y[..., 0], y[..., 2]], axis=-1)
        vq = self._vq(y2)
        f2 = self._reduced.rhs(y2)
        out = np.empty_like(y)
        for idx, cfg in ((0, self.sys.ibr1), (1, self.sys.ibr2)):
            a, z = 2 * idx, 2 * idx + 1
            if cfg.effective_kind() is InverterKind.GFM:
                out[..., a] = f2[..., idx]
                out[..., z] = 0.0
            else:
                v = vq[..., idx]
                dd = cfg.k_pll * v + cfg.k_i * y[..., z]
                if self.omega_limit is not None:
                    dd = np.clip(dd, -self.omega_limit, self.omega_limit)
                out[..., a] = dd
                out[..., z] = v
        return out


def build_model(sys: TwoInverterSystem, mode: RhsMode):
    if mode is RhsMode.FULL_ORDER:
        return FullOrderModel(sys)
    return ReducedModel(sys, mode)


def rhs(sys: TwoInverterSystem, mode: RhsMode, state: np.ndarray) -> np.ndarray:
    """One-shot RHS evaluation (builds the model bundle each call)."""
    return build_model(sys, mode).rhs(np.asarray(state, dtype=float))


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegratorSettings:
    method: str = "RK45Adaptive"        # or "RK4Fixed"
    dt: float = 1e-3                    # fixed step / initial step hint
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    t_max: float = 10.0
    max_arc_length: float = 50.0
    domain_box: Optional[float] = None  # half-width around box_center
    max_step: Optional[float] = None    # adaptive step-size ceiling

    def __post_init__(self):
        if self.dt <= 0 or self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("dt and tolerances must be > 0")
        if self.t_max <= 0 or self.max_arc_length <= 0:
            raise ValueError("t_max and max_arc_length must be > 0")
        if self.max_step is not None and self.max_step <= 0:
            raise ValueError("max_step must be > 0")
        if self.method not in ("RK45Adaptive", "RK4Fixed"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class Event:
    """Scalar event g(t, y); triggers on sign changes of the given direction."""

    name: str
    fn: Callable[[float, np.ndarray], float]
    direction: int = 0      # +1 rising, -1 falling, 0 both
    terminal: bool = True


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    terminal_event: Optional[str] = None
    events: dict = field(default_factory=dict)   # name -> (times, states)
    dense: Optional[Callable[[float], np.ndarray]] = None

    @property
    def final_state(self) -> np.ndarray:
        return self.y[-1]

    def arc_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.y, axis=0), axis=1)))

    def to_csv(self, path, full_order: bool = False) -> None:
        cols = "t,delta1,delta2" + (",z1,z2" if full_order else "")
        if full_order:
            data = np.column_stack([self.t, self.y[:, 0], self.y[:, 2],
                                    self.y[:, 1], self.y[:, 3]])
        else:
            data = np.column_stack([self.t, self.y[:, :2]])
        np.savetxt(path, data, delimiter=",", header=cols, comments="",
                   fmt="%.12g")


def integrate(sys_or_model, mode_or_none, x0, settings: IntegratorSettings,
              direction: str = "forward", events: Sequence[Event] = (),
              box_center: Optional[np.ndarray] = None,
              t0: float = 0.0,
              dense: bool = False) -> Trajectory:
    """Integrate the chosen model forward or backward in time.

    Stops at t_max, the arc-length cap, exit from the domain box (when
    configured), or the first triggered terminal event; event times are
    refined well below the step size. Backward runs report negative times
    relative to t0.
    """
    if isinstance(sys_or_model, TwoInverterSystem):
        model = build_model(sys_or_model, mode_or_none)
    else:
        model = sys_or_model
    f = model.rhs
    x0 = np.asarray(x0, dtype=float)
    dim = x0.shape[-1]
    sgn = -1.0 if direction == "backward" else 1.0
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")

    # Augmented state [y, arc_length]; internal clock tau >= 0.
    def rhs_aug(tau, ya):
        dy = sgn * f(ya[:dim])
        return np.append(dy, np.linalg.norm(dy))

    def wrap_event(ev: Event):
        # ev.direction refers to the trajectory's own progression, for
        # forward and backward runs alike.
        def g(tau, ya):
            return ev.fn(t0 + sgn * tau, ya[:dim])
        g.terminal = ev.terminal
        g.direction = float(ev.direction)
        return g

    ev_fns = [wrap_event(ev) for ev in events]
    names = [ev.name for ev in events]

    def arc_event(tau, ya):
        return ya[dim] - settings.max_arc_length
    arc_event.terminal = True
    arc_event.direction = 1.0
    ev_fns.append(arc_event)
    names.append("ArcLengthCap")

    if settings.domain_box is not None:
        center = np.zeros(dim) if box_center is None else np.asarray(box_center)

        def box_event(tau, ya):
            return np.max(np.abs(ya[:dim] - center)) - settings.domain_box
        box_event.terminal = True
        box_event.direction = 1.0
        ev_fns.append(box_event)
        names.append("DomainExit")

    ya0 = np.append(x0, 0.0)
    if settings.method == "RK45Adaptive":
        sol = solve_ivp(rhs_aug, (0.0, settings.t_max), ya0, method="RK45",
                        rtol=settings.rel_tol, atol=settings.abs_tol,
                        first_step=min(settings.dt, settings.t_max / 10),
                        max_step=settings.max_step or np.inf,
                        events=ev_fns, dense_output=dense)
        if sol.status == -1:
            partial = Trajectory(t=t0 + sgn * sol.t, y=sol.y[:dim].T)
            raise IntegrationFailure(sol.message, partial)
        taus = sol.t
        ys = sol.y[:dim].T
        term = None
        ev_records = {}
        for i, name in enumerate(names):
            if sol.t_events[i].size:
                ev_records.setdefault(name, ([], []))
                ev_records[name][0].extend(t0 + sgn * sol.t_events[i])
                ev_records[name][1].extend(sol.y_events[i][:, :dim])
        if sol.status == 1:
            # first terminal event that fired at the final time
            tf = sol.t[-1]
            for i, name in enumerate(names):
                if getattr(ev_fns[i], "terminal", False) and sol.t_events[i].size \
                        and np.isclose(sol.t_events[i][-1], tf, rtol=0, atol=1e-12 + 1e-9 * abs(tf)):
                    term = name
                    break
            if term is None:
                term = "event"
        traj = Trajectory(t=t0 + sgn * taus, y=ys, terminal_event=term)
        traj.events = {k: (np.array(v[0]), np.array(v[1])) for k, v in ev_records.items()}
        if dense:
            traj.dense = lambda t: sol.sol(sgn * (t - t0))[:dim]
        return traj

    return _integrate_rk4(rhs_aug, ya0, dim, settings, ev_fns, names, t0, sgn)


def _integrate_rk4(rhs_aug, ya0, dim, settings, ev_fns, names, t0, sgn):
    """Fixed-step RK4 with sign-change event bracketing and bisection."""
    dt = settings.dt
    n_steps = int(np.ceil(settings.t_max / dt))

    def step(tau, ya, h):
        k1 = rhs_aug(tau, ya)
        k2 = rhs_aug(tau + h / 2, ya + h / 2 * k1)
        k3 = rhs_aug(tau + h / 2, ya + h / 2 * k2)
        k4 = rhs_aug(tau + h, ya + h * k3)
        return ya + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)

    taus = [0.0]
    ys = [ya0[:dim].copy()]
    ya = ya0.copy()
    tau = 0.0
    g_prev = [fn(0.0, ya) for fn in ev_fns]
    term = None
    ev_records: dict = {}
    for _ in range(n_steps):
        h = min(dt, settings.t_max - tau)
        if h <= 0:
            break
        ya_new = step(tau, ya, h)
        tau_new = tau + h
        g_new = [fn(tau_new, ya_new) for fn in ev_fns]
        hit = None
        for i, fn in enumerate(ev_fns):
            direction = getattr(fn, "direction", 0.0)
            crossed = (g_prev[i] < 0 <= g_new[i] and direction >= 0) or \
                      (g_prev[i] > 0 >= g_new[i] and direction <= 0)
            if crossed and g_prev[i] != 0:
                # bisect [tau, tau+h] re-stepping from (tau, ya)
                lo, hi = 0.0, h
                y_hi = ya_new
                while hi - lo > dt * 1e-3:
                    mid = 0.5 * (lo + hi)
                    y_mid = step(tau, ya, mid)
                    g_mid = fn(tau + mid, y_mid)
                    if (g_prev[i] < 0) == (g_mid < 0):
                        lo = mid
                    else:
                        hi, y_hi = mid, y_mid
                t_hit = tau + hi
                rec = ev_records.setdefault(names[i], ([], []))
                rec[0].append(t0 + sgn * t_hit)
                rec[1].append(y_hi[:dim].copy())
                if getattr(fn, "terminal", False) and hit is None:
                    hit = (i, t_hit, y_hi)
        if hit is not None:
            i, t_hit, y_hit = hit
            taus.append(t_hit)
            ys.append(y_hit[:dim].copy())
            term = names[i]
            break
        ya, tau = ya_new, tau_new
        taus.append(tau)
        ys.append(ya[:dim].copy())
        g_prev = g_new
        if not np.all(np.isfinite(ya)):
            raise IntegrationFailure(
                "state diverged under fixed-step RK4",
                Trajectory(t=t0 + sgn * np.array(taus), y=np.array(ys)))
    traj = Trajectory(t=t0 + sgn * np.array(taus), y=np.array(ys),
                      terminal_event=term)
    traj.events = {k: (np.array(v[0]), np.array(v[1])) for k, v in ev_records.items()}
    return traj


def rk4_grid(rhs_fn, y0: np.ndarray, dt: float, t_max: float,
             freeze_fn=None) -> np.ndarray:
    """Vectorized fixed-step RK4 over a batch of initial states.

    Used by the basin oracle: thousands of points advance in lock-step.
    freeze_fn(y) -> bool mask marks points whose integration may stop early
    (they are held constant afterwards).
    """
    y = np.array(y0, dtype=float)
    n_steps = int(np.ceil(t_max / dt))
    frozen = np.zeros(y.shape[:-1], dtype=bool)
    for i in range(n_steps):
        k1 = rhs_fn(y)
        k2 = rhs_fn(y + 0.5 * dt * k1)
        k3 = rhs_fn(y + 0.5 * dt * k2)
        k4 = rhs_fn(y + dt * k3)
        dy = (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if freeze_fn is not None:
            dy[frozen] = 0.0
        y = y + dy
        if freeze_fn is not None and (i & 31) == 31:
            frozen |= freeze_fn(y)
            if frozen.all():
                break
    return y


# ---------------------------------------------------------------------------
# Reduced vs full-order comparison
# ---------------------------------------------------------------------------

def reduced_vs_full_check(sys: TwoInverterSystem, x0: np.ndarray,
                          k_i_ratio: float, horizon: float,
                          settings: Optional[IntegratorSettings] = None) -> float:
    """Max angle deviation between the reduced and PI-PLL models.

    Both start from matched initial conditions (integral states at zero) and
    the full-order model uses k_i = k_i_ratio * k_pll per PLL slot.
    """
    if all(cfg.effective_kind() is InverterKind.GFM
           for cfg in (sys.ibr1, sys.ibr2)):
        raise ValueError("comparison needs at least one PLL-based inverter")
    if settings is None:
        settings = IntegratorSettings(t_max=horizon)
    else:
        settings = replace(settings, t_max=horizon)

    def with_ki(cfg: InverterConfig) -> InverterConfig:
        if cfg.effective_kind() is InverterKind.GFM:
            return cfg
        return replace(cfg, k_i=k_i_ratio * cfg.k_pll)

    sys_full = TwoInverterSystem(ibr1=with_ki(sys.ibr1), ibr2=with_ki(sys.ibr2),
                                 network=sys.network)
    x0 = np.asarray(x0, dtype=float)
    x0_full = np.array([x0[0], 0.0, x0[1], 0.0])
    t_eval = np.linspace(0.0, horizon, max(200, int(horizon / settings.dt)))
    red = _sample(sys, RhsMode.EXACT, x0, settings, t_eval)
    full = _sample(sys_full, RhsMode.FULL_ORDER, x0_full, settings, t_eval)
    dev = np.abs(full[:, [0, 2]] - red[:, :2])
    return float(dev.max())


def _sample(sys, mode, x0, settings, t_eval):
    model = build_model(sys, mode)
    sol = solve_ivp(lambda t, y: model.rhs(y), (0.0, t_eval[-1]), x0,
                    method="RK45", rtol=settings.rel_tol, atol=settings.abs_tol,
                    t_eval=t_eval)
    if not sol.success:
        raise IntegrationFailure(sol.message)
    return sol.y.T
