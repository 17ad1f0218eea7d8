"""Floquet analysis of the periodic background: discriminant, multipliers, Bloch factors.

The monodromy matrix T(z) propagates states of u'' = (V_per - z) u across
one period.  Its trace, the discriminant Delta(z), classifies spectrum:
|Delta| <= 2 on bands, |Delta| > 2 on gaps.  In a gap the multipliers
split as |lambda_small| < 1 < |lambda_large| with lambda_small
lambda_large = 1, and k = -log|lambda_small| > 0 is the decay rate of the
evanescent Bloch solution.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PreconditionError
from .ode import TransferMatrix, integrate_joint
from .potential import DefectPotential, PeriodicPotential, Potential


def as_potential(p_per: PeriodicPotential) -> Potential:
    """Wrap a bare periodic potential as a defect-free Potential."""
    return Potential(
        periodic=p_per,
        defect=DefectPotential(amplitude=0.0, support_radius=0.5),
        symmetric=False,
    )


@dataclass
class FloquetData:
    """Monodromy over one period and derived multiplier data."""

    monodromy: TransferMatrix
    discriminant: complex
    lambda_small: complex
    lambda_large: complex
    k: float
    z: complex
    base: float

    def in_gap(self, margin: float = 0.0) -> bool:
        return abs(self.discriminant) > 2.0 + margin

    def right_eigenvector(self, which: str) -> np.ndarray:
        """Right eigenvector of the monodromy for the chosen multiplier.

        Uses the algebraic forms (T12, lam - T11) / (lam - T22, T21),
        which stay continuous in z away from band edges.
        """
        lam = self.lambda_small if which == "small" else self.lambda_large
        m = self.monodromy.matrix
        cand = np.array([m[0, 1], lam - m[0, 0]])
        alt = np.array([lam - m[1, 1], m[1, 0]])
        if np.linalg.norm(alt) > np.linalg.norm(cand):
            cand = alt
        nrm = np.linalg.norm(cand)
        if nrm < 1e-14 * (1.0 + np.abs(m).max()):
            raise PreconditionError("degenerate multipliers: z is at or too near a band edge")
        return cand / nrm

    def left_eigenvector(self, which: str) -> np.ndarray:
        """Left eigenvector (row) of the monodromy for the chosen multiplier."""
        lam = self.lambda_small if which == "small" else self.lambda_large
        m = self.monodromy.matrix
        cand = np.array([m[1, 0], lam - m[0, 0]])
        alt = np.array([lam - m[1, 1], m[0, 1]])
        if np.linalg.norm(alt) > np.linalg.norm(cand):
            cand = alt
        nrm = np.linalg.norm(cand)
        if nrm < 1e-14 * (1.0 + np.abs(m).max()):
            raise PreconditionError("degenerate multipliers: z is at or too near a band edge")
        return cand / nrm


@dataclass
class BandInterval:
    lo: float
    hi: float
    kind: str  # "band" or "gap"


@dataclass
class BandGapReport:
    """Tiling of a spectral window into band and gap intervals.

    Edges are refined by bisection on |Delta| - 2 and assigned to the
    adjacent band, so gap intervals are open at their endpoints.
    """

    z_min: float
    z_max: float
    n_samples: int
    intervals: list
    edges: list
    samples_z: np.ndarray
    samples_disc: np.ndarray

    def gaps(self) -> list:
        return [(iv.lo, iv.hi) for iv in self.intervals if iv.kind == "gap"]

    def bands(self) -> list:
        return [(iv.lo, iv.hi) for iv in self.intervals if iv.kind == "band"]

    def gap_containing(self, E: float):
        for lo, hi in self.gaps():
            if lo < E < hi:
                return (lo, hi)
        return None


def monodromy(p_per: PeriodicPotential, z, tol: float = 1e-10, base: float = 0.0) -> FloquetData:
    """Monodromy matrix of the periodic background over [base, base + 1].

    For a pure periodic potential the discriminant and multipliers do not
    depend on base; eigenvectors do, so callers that decompose states must
    pass the base point where the state lives.
    """
    p = as_potential(p_per)
    zc = complex(z)
    real = zc.imag == 0.0
    res = integrate_joint(
        p, zc.real if real else zc, base, base + 1.0, (1.0, 0.0), v_init=(0.0, 1.0),
        tol=tol, real=real,
    )
    m = np.array([[res.u, res.v], [res.du, res.dv]], dtype=complex)
    tm = TransferMatrix(m, base, base + 1.0, zc)
    disc = m[0, 0] + m[1, 1]
    s = cmath.sqrt(disc * disc - 4.0)
    la, lb = (disc + s) / 2.0, (disc - s) / 2.0
    large = la if abs(la) >= abs(lb) else lb
    # product of multipliers is det T = 1; dividing avoids cancellation in
    # the small root when |disc| is large
    small = 1.0 / large
    if disc.imag == 0.0:
        disc = disc.real
        if abs(la.imag) < 1e-13 * abs(la.real or 1.0):
            large, small = large.real + 0.0j, small.real + 0.0j
    k = math.log(abs(large)) if abs(large) > 0 else 0.0
    return FloquetData(
        monodromy=tm,
        discriminant=disc,
        lambda_small=small,
        lambda_large=large,
        k=k,
        z=zc,
        base=base,
    )


def band_gap_scan(
    p_per: PeriodicPotential,
    z_min: float,
    z_max: float,
    n_samples: int = 600,
    tol: float = 1e-10,
    edge_tol: float = 1e-8,
) -> BandGapReport:
    """Classify [z_min, z_max] into bands and gaps via a discriminant sweep.

    Samples the discriminant on a uniform grid, then refines each
    classification flip by bisection on |Delta| - 2 down to edge_tol.
    """
    if not (z_max > z_min):
        raise ConfigError("band scan window requires z_max > z_min")
    if n_samples < 16:
        raise ConfigError("band scan needs at least 16 samples")

    zs = np.linspace(z_min, z_max, n_samples)
    discs = np.empty(n_samples, dtype=complex)
    for i, z in enumerate(zs):
        discs[i] = monodromy(p_per, z, tol=tol).discriminant
    in_gap = np.abs(discs) > 2.0

    def f(z: float) -> float:
        return abs(monodromy(p_per, z, tol=tol).discriminant) - 2.0

    edges = []
    for i in range(n_samples - 1):
        if in_gap[i] == in_gap[i + 1]:
            continue
        a, b = float(zs[i]), float(zs[i + 1])
        fa = abs(discs[i]) - 2.0
        while b - a > edge_tol:
            mid = 0.5 * (a + b)
            fm = f(mid)
            if (fa > 0.0) == (fm > 0.0):
                a, fa = mid, fm
            else:
                b = mid
        edges.append(0.5 * (a + b))

    bounds = [z_min] + edges + [z_max]
    intervals = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        mid_kind_samples = in_gap[(zs > lo) & (zs < hi)]
        if len(mid_kind_samples):
            kind = "gap" if mid_kind_samples.mean() > 0.5 else "band"
        else:
            kind = "gap" if f(0.5 * (lo + hi)) > 0.0 else "band"
        intervals.append(BandInterval(lo, hi, kind))

    return BandGapReport(
        z_min=z_min,
        z_max=z_max,
        n_samples=n_samples,
        intervals=intervals,
        edges=edges,
        samples_z=zs,
        samples_disc=discs,
    )


@dataclass
class BlochFactors:
    """Periodic factors of the two Bloch solutions at an energy in a gap.

    u_small = exp(mu_small (x - x0)) p(x) decays as x -> +inf,
    u_large = exp(mu_large (x - x0)) q(x) grows; p and q are 1-periodic
    (complex: in gaps with negative multipliers Im mu = pi and the sign
    alternation between periods lives in the exponential).
    """

    xs: np.ndarray
    p: np.ndarray
    q: np.ndarray
    k: float
    mu_small: complex
    mu_large: complex
    lambda_small: complex
    lambda_large: complex
    x0: float
    floquet: FloquetData

    def reconstruct_small(self, idx) -> np.ndarray:
        return np.exp(self.mu_small * (self.xs[idx] - self.x0)) * self.p[idx]


def bloch_factors(
    p_per: PeriodicPotential,
    E: float,
    x0: float = 0.0,
    n: int = 201,
    tol: float = 1e-12,
) -> BlochFactors:
    """Extract the periodic Bloch factors p, q on [x0, x0 + 1] at gap energy E.

    Rejects energies inside a band or within 1e-9 (in discriminant excess)
    of a band edge, where the multipliers degenerate.
    """
    fd = monodromy(p_per, E, tol=tol, base=x0)
    if abs(fd.discriminant) - 2.0 <= 1e-9:
        raise PreconditionError(
            f"E={E} is in a band or too close to a band edge (|Delta|-2 = "
            f"{abs(fd.discriminant) - 2.0:.3e}); Bloch factors need a gap energy"
        )
    p = as_potential(p_per)
    xs = np.linspace(x0, x0 + 1.0, n)

    def factor(which: str, mu: complex) -> np.ndarray:
        e = fd.right_eigenvector(which).real.astype(float)
        # normalize the factor to 1 at x0; fall back to unit slope when the
        # eigenvector value component nearly vanishes
        if abs(e[0]) >= 1e-3 * np.linalg.norm(e):
            e = e / e[0]
        else:
            e = e / e[1]
        res = integrate_joint(p, E, x0, x0 + 1.0, (e[0], e[1]), tol=tol, real=True, t_eval=xs)
        return res.u_samples * np.exp(-mu * (xs - x0))

    mu_small = cmath.log(complex(fd.lambda_small))
    mu_large = cmath.log(complex(fd.lambda_large))
    return BlochFactors(
        xs=xs,
        p=factor("small", mu_small),
        q=factor("large", mu_large),
        k=fd.k,
        mu_small=mu_small,
        mu_large=mu_large,
        lambda_small=fd.lambda_small,
        lambda_large=fd.lambda_large,
        x0=x0,
        floquet=fd,
    )
