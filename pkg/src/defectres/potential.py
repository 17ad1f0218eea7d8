"""Periodic background potentials with compactly supported defects.

A model potential is V(x) = V_per(x) + W(x) where V_per has period 1 and
W vanishes identically outside a finite interval.  The truncated variant
V_M keeps V on [-M, M] and is zero outside; half-line variants force
V(x) = 0 for x < 0 before any truncation is applied.

All evaluators accept scalars or numpy arrays and return matching shapes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_TWO_PI = 2.0 * math.pi

DEFECT_SHAPES = ("smooth_bump", "cosine_window")


@dataclass(frozen=True)
class PeriodicPotential:
    """Real trigonometric polynomial with period 1.

    Parameters
    ----------
    cosine_coeffs : sequence of float
        Coefficient of cos(2 pi n x) for n = 0, 1, 2, ...; the n = 0 entry
        is the constant background.
    sine_coeffs : sequence of float
        Coefficient of sin(2 pi n x) for n = 1, 2, ...
    """

    cosine_coeffs: tuple = ()
    sine_coeffs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "cosine_coeffs", tuple(float(c) for c in self.cosine_coeffs))
        object.__setattr__(self, "sine_coeffs", tuple(float(c) for c in self.sine_coeffs))

    def eval(self, x):
        """Evaluate V_per at x (scalar or array)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for n, c in enumerate(self.cosine_coeffs):
            if c == 0.0:
                continue
            out = out + (c if n == 0 else c * np.cos(_TWO_PI * n * x))
        for m, s in enumerate(self.sine_coeffs, start=1):
            if s != 0.0:
                out = out + s * np.sin(_TWO_PI * m * x)
        return out if out.ndim else float(out)

    def is_even(self, tol: float = 1e-14) -> bool:
        return all(abs(s) <= tol for s in self.sine_coeffs)


@dataclass(frozen=True)
class DefectPotential:
    """Compactly supported defect W with support contained in [center - rho, center + rho].

    shape selects the profile on the support, with t = (x - center) / rho:

    - ``smooth_bump``:    amplitude * exp(-1 / (1 - t^2)), infinitely smooth.
    - ``cosine_window``:  amplitude * cos(pi t / 2)^2, C^1 at the support edge.

    W is exactly zero for |x - center| >= rho, not merely small.
    """

    amplitude: float
    support_radius: float
    shape: str = "smooth_bump"
    center: float = 0.0

    def __post_init__(self):
        if self.shape not in DEFECT_SHAPES:
            raise ConfigError(f"unknown defect shape {self.shape!r}; choose from {DEFECT_SHAPES}")
        if self.support_radius <= 0.0:
            raise ConfigError("defect support_radius must be positive")

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        t = (x - self.center) / self.support_radius
        inside = np.abs(t) < 1.0
        out = np.zeros_like(t)
        if self.amplitude != 0.0:
            ts = np.where(inside, t, 0.0)
            if self.shape == "smooth_bump":
                vals = self.amplitude * np.exp(-1.0 / (1.0 - ts * ts))
            else:
                vals = self.amplitude * np.cos(0.5 * math.pi * ts) ** 2
            out = np.where(inside, vals, 0.0)
        return out if out.ndim else float(out)

    @property
    def outer_radius(self) -> float:
        """Smallest r with W(x) = 0 for all |x| >= r."""
        return abs(self.center) + self.support_radius


@dataclass(frozen=True)
class Potential:
    """Full model potential V = V_per + W, with optional half-line restriction.

    symmetric asserts V(-x) = V(x); the constructor verifies the claim on a
    deterministic set of sample points and refuses a dishonest flag.  With
    half_line set, V(x) = 0 for x < 0 and the symmetric flag must be False.
    """

    periodic: PeriodicPotential
    defect: DefectPotential
    symmetric: bool = False
    half_line: bool = False

    def __post_init__(self):
        if self.symmetric and self.half_line:
            raise ConfigError("half_line potentials cannot be symmetric")
        if self.symmetric:
            rng = np.random.default_rng(20240817)
            xs = rng.uniform(-self.support_radius() - 3.0, self.support_radius() + 3.0, size=100)
            left = self.eval(-xs)
            right = self.eval(xs)
            scale = 1.0 + np.max(np.abs(right))
            if np.max(np.abs(left - right)) > 1e-12 * scale:
                raise ConfigError("symmetric flag set but V(-x) != V(x) at sampled points")

    def support_radius(self) -> float:
        """Radius outside of which V coincides with the pure periodic background."""
        return self.defect.outer_radius

    def rho_ceil(self) -> int:
        """Smallest integer >= the defect support radius."""
        return int(math.ceil(self.support_radius() - 1e-12))

    def eval(self, x):
        """Evaluate V at x (scalar or array)."""
        x = np.asarray(x, dtype=float)
        out = self.periodic.eval(x) + self.defect.eval(x)
        if self.half_line:
            out = np.where(x < 0.0, 0.0, out)
        return out if np.ndim(out) else float(out)

    def eval_truncated(self, M: float, x):
        """Evaluate the truncated potential V_M = V * indicator(|x| <= M).

        M must exceed the defect support radius so that the truncation only
        removes periodic tail, never defect mass.
        """
        if M <= self.support_radius():
            raise ConfigError(
                f"truncation radius M={M} must exceed the defect support radius "
                f"{self.support_radius()}"
            )
        x = np.asarray(x, dtype=float)
        out = np.where(np.abs(x) <= M, self.eval(x), 0.0)
        return out if out.ndim else float(out)

    # -- config (de)serialization ------------------------------------------

    @classmethod
    def from_config(cls, block: dict) -> "Potential":
        """Build a Potential from a JSON-style dict.

        Expected layout::

            {"periodic": {"cos": [...], "sin": [...]},
             "defect": {"shape": "smooth_bump", "amplitude": -8.0,
                        "rho": 0.5, "center": 0.0},
             "symmetric": true,
             "half_line": false}
        """
        try:
            per = block["periodic"]
            dfc = block["defect"]
            periodic = PeriodicPotential(
                cosine_coeffs=tuple(per.get("cos", ())),
                sine_coeffs=tuple(per.get("sin", ())),
            )
            defect = DefectPotential(
                amplitude=float(dfc["amplitude"]),
                support_radius=float(dfc["rho"]),
                shape=str(dfc.get("shape", "smooth_bump")),
                center=float(dfc.get("center", 0.0)),
            )
            return cls(
                periodic=periodic,
                defect=defect,
                symmetric=bool(block.get("symmetric", False)),
                half_line=bool(block.get("half_line", False)),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed potential block: {exc!r}") from exc

    def to_config(self) -> dict:
        return {
            "periodic": {
                "cos": list(self.periodic.cosine_coeffs),
                "sin": list(self.periodic.sine_coeffs),
            },
            "defect": {
                "shape": self.defect.shape,
                "amplitude": self.defect.amplitude,
                "rho": self.defect.support_radius,
                "center": self.defect.center,
            },
            "symmetric": self.symmetric,
            "half_line": self.half_line,
        }


def scalar_evaluator(p: Potential, truncation: float | None = None):
    """Fast scalar V(x) closure for ODE right-hand sides.

    Avoids numpy dispatch overhead; semantics match Potential.eval /
    eval_truncated exactly, including the hard zero outside the defect
    support and outside [-M, M] when a truncation radius is given.
    """
    cos_c = p.periodic.cosine_coeffs
    sin_c = p.periodic.sine_coeffs
    c0 = cos_c[0] if cos_c else 0.0
    cos_terms = [(n, c) for n, c in enumerate(cos_c) if n >= 1 and c != 0.0]
    sin_terms = [(m, s) for m, s in enumerate(sin_c, start=1) if s != 0.0]
    amp = p.defect.amplitude
    rho = p.defect.support_radius
    center = p.defect.center
    bump = p.defect.shape == "smooth_bump"
    half = p.half_line
    M = truncation

    def V(x: float) -> float:
        if half and x < 0.0:
            return 0.0
        if M is not None and abs(x) > M:
            return 0.0
        v = c0
        for n, c in cos_terms:
            v += c * math.cos(_TWO_PI * n * x)
        for m, s in sin_terms:
            v += s * math.sin(_TWO_PI * m * x)
        if amp != 0.0:
            t = (x - center) / rho
            if -1.0 < t < 1.0:
                if bump:
                    v += amp * math.exp(-1.0 / (1.0 - t * t))
                else:
                    v += amp * math.cos(0.5 * math.pi * t) ** 2
        return v

    return V
