"""Equilibrium location, classification, and the gradient-system energy
function of the cosine-free combinations.

All equilibria are found on one period square via damped Newton iteration
seeded from a uniform grid, then deduplicated modulo 2*pi per angle. A
system may legitimately have no stable equilibrium (severe faults or
ill-placed voltage support); that is reported as an empty result, not an
error.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import ReducedModel, RhsMode, build_model
from .network import GeneralizedCoefficients, TwoInverterSystem

TWO_PI = 2.0 * np.pi


class EquilibriumKind(enum.Enum):
    SEP = "SEP"
    TYPE1_UEP = "Type1UEP"
    TYPE2_UEP = "Type2UEP"
    NON_HYPERBOLIC = "NonHyperbolic"


@dataclass(frozen=True)
class Equilibrium:
    state: np.ndarray            # (2,)
    eigenvalues: np.ndarray      # (2,) complex
    eigenvectors: np.ndarray     # (2, 2), columns matched to eigenvalues
    kind: EquilibriumKind

    def translated(self, n1: int, n2: int) -> "Equilibrium":
        return Equilibrium(
            state=self.state + np.array([n1 * TWO_PI, n2 * TWO_PI]),
            eigenvalues=self.eigenvalues, eigenvectors=self.eigenvectors,
            kind=self.kind)

    def stable_eigenvector(self) -> np.ndarray:
        """Unit eigenvector of the stable direction of a type-1 saddle."""
        if self.kind is not EquilibriumKind.TYPE1_UEP:
            raise ValueError("stable eigenvector defined for type-1 UEPs only")
        idx = int(np.argmin(self.eigenvalues.real))
        v = self.eigenvectors[:, idx].real
        return v / np.linalg.norm(v)

    def to_dict(self) -> dict:
        return {
            "delta1": float(self.state[0]),
            "delta2": float(self.state[1]),
            "kind": self.kind.value,
            "eig_re": [float(v.real) for v in self.eigenvalues],
            "eig_im": [float(v.imag) for v in self.eigenvalues],
        }


def classify(eigenvalues: np.ndarray, hyperbolicity_tol: float) -> EquilibriumKind:
    re = eigenvalues.real
    if np.any(np.abs(re) < hyperbolicity_tol):
        return EquilibriumKind.NON_HYPERBOLIC
    n_pos = int(np.sum(re > 0))
    if n_pos == 0:
        return EquilibriumKind.SEP
    if n_pos == 1:
        return EquilibriumKind.TYPE1_UEP
    return EquilibriumKind.TYPE2_UEP


def jacobian(sys: TwoInverterSystem, mode: RhsMode, state: np.ndarray) -> np.ndarray:
    """Analytic 2x2 Jacobian of the chosen reduced mode at a state."""
    model = build_model(sys, mode)
    return model.jacobian(np.asarray(state, dtype=float))


def _newton_batch(model: ReducedModel, seeds: np.ndarray, max_iter: int = 50,
                  armijo_factors=(1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125)) -> np.ndarray:
    """Damped Newton from many seeds at once; returns final iterates."""
    y = np.array(seeds, dtype=float)
    f = model.rhs(y)
    fn = np.linalg.norm(f, axis=-1)
    for _ in range(max_iter):
        J = model.jacobian(y)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        ok = np.abs(det) > 1e-14
        inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        sx = -(J[..., 1, 1] * f[..., 0] - J[..., 0, 1] * f[..., 1]) * inv_det
        sy = -(-J[..., 1, 0] * f[..., 0] + J[..., 0, 0] * f[..., 1]) * inv_det
        step = np.stack([sx, sy], axis=-1)
        best_y = y.copy()
        best_fn = fn.copy()
        improved = np.zeros_like(fn, dtype=bool)
        for lam in armijo_factors:
            cand = y + lam * step
            cand_fn = np.linalg.norm(model.rhs(cand), axis=-1)
            take = ~improved & (cand_fn < fn)
            best_y[take] = cand[take]
            best_fn[take] = cand_fn[take]
            improved |= take
        y, fn = best_y, best_fn
        f = model.rhs(y)
        if fn.max() < 1e-13 * max(model.gains):
            break
    return y


def find_equilibria(sys: TwoInverterSystem,
                    mode: RhsMode = RhsMode.EXACT,
                    grid_n: int = 24,
                    root_tol: float = 1e-10,
                    dedup_tol: float = 1e-6,
                    hyperbolicity_tol: Optional[float] = None) -> list[Equilibrium]:
    """All equilibria on one period square, classified by the Jacobian.

    Newton runs from a grid_n x grid_n seed lattice over [-pi, pi)^2;
    converged roots are reduced modulo 2*pi, deduplicated, polished, and
    classified. Divergent seeds are dropped silently.
    """
    if mode is RhsMode.FULL_ORDER:
        raise ValueError("equilibria are located on the reduced 2-D models")
    model = build_model(sys, mode)
    if hyperbolicity_tol is None:
        hyperbolicity_tol = 1e-6 * max(model.gains)

    ticks = -np.pi + TWO_PI * (np.arange(grid_n) + 0.5) / grid_n
    g1, g2 = np.meshgrid(ticks, ticks, indexing="ij")
    seeds = np.stack([g1.ravel(), g2.ravel()], axis=-1)
    roots = _newton_batch(model, seeds)

    res = np.max(np.abs(model.rhs(roots)), axis=-1)
    scale = max(model.gains)
    roots = roots[res < 1e-8 * scale]
    if roots.size == 0:
        return []

    # Reduce into [-pi, pi) per angle and deduplicate.
    wrapped = (roots + np.pi) % TWO_PI - np.pi
    unique: list[np.ndarray] = []
    for w in wrapped:
        dup = False
        for u in unique:
            d = np.abs(w - u)
            d = np.minimum(d, TWO_PI - d)
            if np.max(d) < dedup_tol:
                dup = True
                break
        if not dup:
            unique.append(w)

    out = []
    for u in sorted(unique, key=lambda p: (round(p[0], 9), round(p[1], 9))):
        # Polish to full precision with plain Newton steps.
        y = u.copy()
        for _ in range(8):
            f = model.rhs(y)
            if np.max(np.abs(f)) < 1e-14 * scale:
                break
            J = model.jacobian(y)
            y = y - np.linalg.solve(J, f)
        if np.max(np.abs(model.rhs(y))) >= root_tol * scale:
            continue
        J = model.jacobian(y)
        eigvals, eigvecs = np.linalg.eig(J)
        order = np.argsort(eigvals.real)
        eigvals = eigvals[order]
        eigvecs = eigvecs[:, order]
        out.append(Equilibrium(state=y, eigenvalues=eigvals,
                               eigenvectors=eigvecs,
                               kind=classify(eigvals, hyperbolicity_tol)))
    return out


def pick_sep(equilibria: list[Equilibrium],
             near: Optional[np.ndarray] = None) -> Optional[Equilibrium]:
    """The stable equilibrium, translated next to `near` when given.

    With several SEP classes the one nearest `near` (or the origin) wins.
    Returns None when no SEP exists.
    """
    seps = [e for e in equilibria if e.kind is EquilibriumKind.SEP]
    if not seps:
        return None
    ref = np.zeros(2) if near is None else np.asarray(near, dtype=float)
    best = None
    best_d = np.inf
    for e in seps:
        shift = np.round((ref - e.state) / TWO_PI)
        cand = e.translated(int(shift[0]), int(shift[1]))
        d = np.linalg.norm(cand.state - ref)
        if d < best_d:
            best, best_d = cand, d
    return best


def translates_in_box(equilibria: list[Equilibrium], center: np.ndarray,
                      half_width: float) -> list[Equilibrium]:
    """All 2*pi translates of the given equilibria within a square box."""
    center = np.asarray(center, dtype=float)
    out = []
    for e in equilibria:
        lo = np.ceil((center - half_width - e.state) / TWO_PI).astype(int)
        hi = np.floor((center + half_width - e.state) / TWO_PI).astype(int)
        for n1 in range(lo[0], hi[0] + 1):
            for n2 in range(lo[1], hi[1] + 1):
                out.append(e.translated(n1, n2))
    return out


# ---------------------------------------------------------------------------
# Energy function (cosine-free systems)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyFunction:
    """V(d1, d2) = -c1 d1 - c2 d2 + lam (1 - cos(d1 - d2))
                 + b1 (1 - cos d1) + b2 (1 - cos d2)

    with the gradient-flow identity di' = -mu_i * dV/ddi. Exists only when
    both cosine couplings vanish and the sine interaction gains are positive
    (or the system is fully decoupled).
    """

    exists: bool
    c1: float = 0.0
    c2: float = 0.0
    lam: float = 0.0
    b1: float = 0.0
    b2: float = 0.0
    mu1: float = 0.0
    mu2: float = 0.0

    def value(self, y: np.ndarray) -> np.ndarray:
        if not self.exists:
            raise ValueError("no energy function for this system")
        y = np.asarray(y, dtype=float)
        d1, d2 = y[..., 0], y[..., 1]
        return (-self.c1 * d1 - self.c2 * d2
                + self.lam * (1.0 - np.cos(d1 - d2))
                + self.b1 * (1.0 - np.cos(d1))
                + self.b2 * (1.0 - np.cos(d2)))

    def gradient(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        d1, d2 = y[..., 0], y[..., 1]
        sth = np.sin(d1 - d2)
        g1 = -self.c1 + self.lam * sth + self.b1 * np.sin(d1)
        g2 = -self.c2 - self.lam * sth + self.b2 * np.sin(d2)
        return np.stack([g1, g2], axis=-1)


def energy_function(coeffs: GeneralizedCoefficients,
                    zero_tol: float = 1e-12) -> EnergyFunction:
    """Construct the energy function of a generalized-coefficient system.

    Any cosine coupling (|d1| or |d2| above zero_tol) rules it out; that is
    the case for every combination containing a plain GFL slot.
    """
    cosine_free = abs(coeffs.d1) < zero_tol and abs(coeffs.d2) < zero_tol
    if not cosine_free:
        return EnergyFunction(exists=False)
    decoupled = coeffs.a1 == 0.0 and coeffs.a2 == 0.0
    if decoupled:
        return EnergyFunction(
            exists=True, c1=coeffs.c1, c2=coeffs.c2, lam=0.0,
            b1=coeffs.b1, b2=coeffs.b2, mu1=coeffs.k1, mu2=coeffs.k2)
    if coeffs.a1 <= 0.0 or coeffs.a2 <= 0.0:
        return EnergyFunction(exists=False)
    # Normalize the interaction weight to lam = 1.
    mu1 = coeffs.k1 * coeffs.a1
    mu2 = coeffs.k2 * coeffs.a2
    return EnergyFunction(
        exists=True, c1=coeffs.c1 / coeffs.a1, c2=coeffs.c2 / coeffs.a2,
        lam=1.0, b1=coeffs.b1 / coeffs.a1, b2=coeffs.b2 / coeffs.a2,
        mu1=mu1, mu2=mu2)
