"""Inverter and network parameter types, derived impedances, generalized
coefficients, and fault-network construction.

All electrical quantities are in per-unit on a common base; angles are in
radians and controller gains in rad/s per p.u. The network is the classic
star: two inverters behind reactances x1, x2 joined at a common bus that
connects through xg to an infinite bus of voltage ug.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace


class InverterKind(enum.Enum):
    GFM = "GFM"
    GFL = "GFL"
    GSP = "GSP"


class UnsupportedCombinationError(ValueError):
    """Raised for inverter pairings the reduced model does not cover."""


class DegenerateFaultError(ValueError):
    """Raised when the fault reduction collapses to a near-zero impedance."""


@dataclass(frozen=True)
class InverterConfig:
    """One inverter slot.

    GFM slots use (k_gfm, p_ref, v_mag); GFL slots use (k_pll, k_i, i_d);
    GSP slots add (m_q, v_ref) on top of the GFL fields. k_i only enters the
    full-order validation model.
    """

    kind: InverterKind
    # GFM fields
    k_gfm: float = 0.0
    p_ref: float = 0.0
    v_mag: float = 1.0
    # GFL / GSP fields
    k_pll: float = 0.0
    k_i: float = 0.0
    i_d: float = 0.0
    # GSP fields
    m_q: float = 0.0
    v_ref: float = 1.0

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", InverterKind(self.kind))
        if self.kind is InverterKind.GFM:
            if self.k_gfm < 0:
                raise ValueError("k_gfm must be >= 0")
            if self.v_mag <= 0:
                raise ValueError("v_mag must be > 0")
        else:
            if self.k_pll < 0 or self.k_i < 0:
                raise ValueError("PLL gains must be >= 0")
            if self.kind is InverterKind.GSP:
                if self.m_q < 0:
                    raise ValueError("m_q must be >= 0")
                if self.v_ref <= 0:
                    raise ValueError("v_ref must be > 0")

    @property
    def gain(self) -> float:
        """Loop gain multiplying the angle equation (k_gfm or k_pll)."""
        return self.k_gfm if self.kind is InverterKind.GFM else self.k_pll

    def effective_kind(self) -> InverterKind:
        """GSP with m_q == 0 behaves exactly as a GFL."""
        if self.kind is InverterKind.GSP and self.m_q == 0.0:
            return InverterKind.GFL
        return self.kind


def gfm(k_gfm: float, p_ref: float, v_mag: float = 1.0) -> InverterConfig:
    return InverterConfig(kind=InverterKind.GFM, k_gfm=k_gfm, p_ref=p_ref, v_mag=v_mag)


def gfl(k_pll: float, i_d: float, k_i: float = 0.0) -> InverterConfig:
    return InverterConfig(kind=InverterKind.GFL, k_pll=k_pll, k_i=k_i, i_d=i_d)


def gsp(k_pll: float, i_d: float, m_q: float, v_ref: float = 1.0,
        k_i: float = 0.0) -> InverterConfig:
    return InverterConfig(kind=InverterKind.GSP, k_pll=k_pll, k_i=k_i, i_d=i_d,
                          m_q=m_q, v_ref=v_ref)


@dataclass(frozen=True)
class NetworkParams:
    """Line reactances and the infinite-bus voltage."""

    x1: float
    x2: float
    xg: float
    ug: float = 1.0

    def __post_init__(self):
        if self.x1 <= 0 or self.x2 <= 0 or self.xg <= 0:
            raise ValueError("reactances must be > 0")
        if self.ug <= 0:
            raise ValueError("ug must be > 0")


@dataclass(frozen=True)
class DerivedImpedances:
    """Star-to-delta and series/parallel combinations of (x1, x2, xg)."""

    x_d12: float
    x_dg1: float
    x_dg2: float
    x_1sum: float
    x_2sum: float
    x_1p2g: float   # x1 + (x2 || xg)
    x_2p1g: float   # x2 + (x1 || xg)


def derive_impedances(net: NetworkParams) -> DerivedImpedances:
    """Compute the seven impedance combinations used by the angle equations."""
    x1, x2, xg = net.x1, net.x2, net.xg
    star = x1 * x2 + x1 * xg + x2 * xg
    return DerivedImpedances(
        x_d12=star / xg,
        x_dg1=star / x2,
        x_dg2=star / x1,
        x_1sum=x1 + xg,
        x_2sum=x2 + xg,
        x_1p2g=x1 + x2 * xg / (x2 + xg),
        x_2p1g=x2 + x1 * xg / (x1 + xg),
    )


_SUPPORTED = {
    frozenset({InverterKind.GFM}),
    frozenset({InverterKind.GFL}),
    frozenset({InverterKind.GFM, InverterKind.GFL}),
    frozenset({InverterKind.GFM, InverterKind.GSP}),
    frozenset({InverterKind.GFL, InverterKind.GSP}),
}


@dataclass(frozen=True)
class TwoInverterSystem:
    """A complete scenario: two inverter slots plus the connecting network."""

    ibr1: InverterConfig
    ibr2: InverterConfig
    network: NetworkParams

    def __post_init__(self):
        pair = frozenset({self.ibr1.kind, self.ibr2.kind})
        if pair not in _SUPPORTED:
            raise UnsupportedCombinationError(
                f"combination {self.ibr1.kind.value}-{self.ibr2.kind.value} "
                "is not supported (GSP-GSP has no reduced model)")

    def swapped(self) -> "TwoInverterSystem":
        """Exchange the two slots (x1 <-> x2); the physics is symmetric."""
        net = self.network
        return TwoInverterSystem(
            ibr1=self.ibr2, ibr2=self.ibr1,
            network=NetworkParams(x1=net.x2, x2=net.x1, xg=net.xg, ug=net.ug))

    def with_network(self, **kw) -> "TwoInverterSystem":
        return replace(self, network=replace(self.network, **kw))


@dataclass(frozen=True)
class GeneralizedCoefficients:
    """Coefficients (k_i, A_i, B_i, C_i, D_i) of the two-angle form

        d1' = k1 * (c1 - a1*sin(d1 - d2) - b1*sin(d1) + d1_*cos(d1 - d2))
        d2' = k2 * (c2 - a2*sin(d2 - d1) - b2*sin(d2) + d2_*cos(d1 - d2))

    Both cosine couplings take the argument (d1 - d2).
    """

    k1: float
    a1: float
    b1: float
    c1: float
    d1: float
    k2: float
    a2: float
    b2: float
    c2: float
    d2: float

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("gains k1, k2 must be > 0")

    def swapped(self) -> "GeneralizedCoefficients":
        return GeneralizedCoefficients(
            k1=self.k2, a1=self.a2, b1=self.b2, c1=self.c2, d1=self.d2,
            k2=self.k1, a2=self.a1, b2=self.b1, c2=self.c1, d2=self.d1)


def to_generalized(sys: TwoInverterSystem) -> GeneralizedCoefficients:
    """Map a system to its generalized coefficients.

    Coefficients are derived from the per-combination angle equations, not
    transcribed from a lookup table. For combinations containing a GSP slot
    (m_q > 0) this is the simplified limit in which the voltage control is
    ideal and the GSP's own loop is fast: the GSP acts as a voltage source of
    magnitude v_ref behind its line. A GSP slot with m_q == 0 degenerates to
    the plain GFL mapping.
    """
    k1 = sys.ibr1.effective_kind()
    k2 = sys.ibr2.effective_kind()
    G, L, S = InverterKind.GFM, InverterKind.GFL, InverterKind.GSP
    imp = derive_impedances(sys.network)
    ug = sys.network.ug
    xg = sys.network.xg
    i1, i2 = sys.ibr1, sys.ibr2

    if (k1, k2) == (G, G):
        return GeneralizedCoefficients(
            k1=i1.k_gfm, a1=i1.v_mag * i2.v_mag / imp.x_d12,
            b1=i1.v_mag * ug / imp.x_dg1, c1=i1.p_ref, d1=0.0,
            k2=i2.k_gfm, a2=i1.v_mag * i2.v_mag / imp.x_d12,
            b2=i2.v_mag * ug / imp.x_dg2, c2=i2.p_ref, d2=0.0)

    if (k1, k2) == (L, L):
        return GeneralizedCoefficients(
            k1=i1.k_pll, a1=0.0, b1=ug, c1=imp.x_1sum * i1.i_d, d1=xg * i2.i_d,
            k2=i2.k_pll, a2=0.0, b2=ug, c2=imp.x_2sum * i2.i_d, d2=xg * i1.i_d)

    if (k1, k2) == (L, G):
        # GFL behind x1, GFM voltage source behind x2: the GFL sees the
        # divider (xg, x2); the GFM picks up a cosine term from the GFL's
        # current injection.
        v2 = i2.v_mag
        return GeneralizedCoefficients(
            k1=i1.k_pll, a1=xg * v2 / imp.x_2sum, b1=sys.network.x2 * ug / imp.x_2sum,
            c1=imp.x_1p2g * i1.i_d, d1=0.0,
            k2=i2.k_gfm, a2=0.0, b2=ug * v2 / imp.x_2sum, c2=i2.p_ref,
            d2=xg * i1.i_d * v2 / imp.x_2sum)

    if (k1, k2) == (G, L):
        return to_generalized(sys.swapped()).swapped()

    if (k1, k2) == (L, S):
        # Ideal-TVC limit: the GSP behaves as a v_ref source for its partner,
        # while its own equation keeps the plain-GFL cosine coupling.
        return GeneralizedCoefficients(
            k1=i1.k_pll, a1=xg * i2.v_ref / imp.x_2sum,
            b1=sys.network.x2 * ug / imp.x_2sum, c1=imp.x_1p2g * i1.i_d, d1=0.0,
            k2=i2.k_pll, a2=0.0, b2=ug, c2=imp.x_2sum * i2.i_d, d2=xg * i1.i_d)

    if (k1, k2) == (S, L):
        return to_generalized(sys.swapped()).swapped()

    if (k1, k2) == (G, S):
        # Ideal-TVC limit of the GFM+GSP pair: cosine-free on both axes.
        v1 = i1.v_mag
        return GeneralizedCoefficients(
            k1=i1.k_gfm, a1=i2.v_ref * v1 / imp.x_d12,
            b1=v1 * ug / imp.x_dg1, c1=i1.p_ref, d1=0.0,
            k2=i2.k_pll, a2=xg * v1 / imp.x_1sum,
            b2=sys.network.x1 * ug / imp.x_1sum, c2=imp.x_2p1g * i2.i_d, d2=0.0)

    if (k1, k2) == (S, G):
        return to_generalized(sys.swapped()).swapped()

    raise UnsupportedCombinationError(f"combination {k1.value}-{k2.value}")


# ---------------------------------------------------------------------------
# Fault construction
# ---------------------------------------------------------------------------

class FaultKind(enum.Enum):
    LINE_FAULT = "LineFault"
    VOLTAGE_SAG = "VoltageSag"


@dataclass(frozen=True)
class FaultSpec:
    """A fault timeline.

    LineFault: the pre-fault grid corridor is two parallel circuits of
    reactance post_fault_xg_factor * xg each (parallel value = xg for the
    default factor 2). A resistance r_fault to ground is applied at
    position_frac along one circuit, measured from the infinite bus; clearing
    trips that circuit, leaving grid reactance post_fault_xg_factor * xg.

    VoltageSag: the infinite-bus voltage drops to ug_during while the fault
    is on; the network is unchanged in all three phases.
    """

    kind: FaultKind
    t_start: float = 0.0
    # LineFault fields
    position_frac: float = 0.5
    r_fault: float = 0.01
    post_fault_xg_factor: float = 2.0
    # VoltageSag field
    ug_during: float = 0.0

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", FaultKind(self.kind))
        if self.kind is FaultKind.LINE_FAULT:
            if not 0.0 <= self.position_frac <= 1.0:
                raise ValueError("position_frac must lie in [0, 1]")
            if self.r_fault <= 0:
                raise ValueError("r_fault must be > 0")
            if self.post_fault_xg_factor <= 0:
                raise ValueError("post_fault_xg_factor must be > 0")
        else:
            if self.ug_during < 0:
                raise ValueError("ug_during must be >= 0")


def line_fault_thevenin(xg: float, factor: float, position_frac: float,
                        r_fault: float, ug: float) -> tuple[complex, complex]:
    """Thevenin (v, z) of the faulted grid corridor seen from the common bus.

    The caller keeps |v| and Im(z) for the lossless reduced model.
    """
    xc = factor * xg          # each parallel circuit
    p = position_frac
    zf = complex(r_fault, 0.0)
    za = 1j * p * xc          # infinite bus -> fault node
    zb = 1j * (1.0 - p) * xc  # fault node -> common bus
    # Source + za loaded by the fault shunt, then zb in series, finally in
    # parallel with the intact circuit.
    v_f = ug * zf / (zf + za)
    z_f = za * zf / (zf + za)
    z2 = z_f + zb
    z1 = 1j * xc
    y = 1.0 / z2 + 1.0 / z1
    v_th = (v_f / z2 + ug / z1) / y
    z_th = 1.0 / y
    return v_th, z_th


def apply_fault(sys: TwoInverterSystem, spec: FaultSpec):
    """Build the (fault_on, post_fault) systems for a fault description.

    The lossless reduced model keeps only |V_thevenin| and Im(Z_thevenin)
    from the fault-on reduction; the post-fault LineFault network depends
    only on post_fault_xg_factor.
    """
    net = sys.network
    if spec.kind is FaultKind.VOLTAGE_SAG:
        if spec.ug_during > net.ug:
            raise ValueError("ug_during must not exceed the pre-fault ug")
        fault_on = sys.with_network(ug=spec.ug_during)
        return fault_on, sys

    v_th, z_th = line_fault_thevenin(net.xg, spec.post_fault_xg_factor,
                                     spec.position_frac, spec.r_fault, net.ug)
    if abs(z_th) < 1e-9:
        raise DegenerateFaultError(
            f"fault reduction degenerate: |Z_thevenin| = {abs(z_th):.3e}")
    xg_on = z_th.imag
    ug_on = abs(v_th)
    if xg_on <= 0:
        raise DegenerateFaultError(
            f"fault reduction yields non-inductive grid branch (xg' = {xg_on:.3e})")
    fault_on = sys.with_network(xg=xg_on, ug=ug_on)
    post = sys.with_network(xg=spec.post_fault_xg_factor * net.xg)
    return fault_on, post


def gfm_replacement(gsp_cfg: InverterConfig, x_slot_sum: float) -> InverterConfig:
    """GFM slot equivalent to a GSP slot at matched loop gain.

    The matching keeps the generalized sine gain consistent between the two
    realizations: k_gfm = k_pll * x_sum, v_mag = v_ref, p_ref = i_d * v_ref.
    """
    if gsp_cfg.kind is not InverterKind.GSP:
        raise ValueError("gfm_replacement expects a GSP slot")
    return InverterConfig(
        kind=InverterKind.GFM,
        k_gfm=gsp_cfg.k_pll * x_slot_sum / gsp_cfg.v_ref,
        p_ref=gsp_cfg.i_d * gsp_cfg.v_ref,
        v_mag=gsp_cfg.v_ref)


def matched_pll_gain(k_gfm: float, x_slot_sum: float, v_ref: float = 1.0) -> float:
    """PLL gain giving a GSP the same generalized loop gain as a GFM slot."""
    return k_gfm * v_ref / x_slot_sum
