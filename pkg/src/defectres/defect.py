"""Bound states of the untruncated operator -d^2/dx^2 + V_per + W on the line.

Eigenvalues in spectral gaps are located by shooting: integrate from the
center outward to a matching point X beyond the defect support, decompose
the state there in the Floquet eigenbasis of the periodic background, and
require the coefficient of the direction that grows toward infinity to
vanish.  Symmetric potentials split into even and odd parity problems on
the half line; general potentials eliminate the initial slope w from the
two one-sided kill conditions; half-line potentials carry the free
decaying exponential at the origin instead of a left condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, PreconditionError
from .floquet import monodromy
from .ode import integrate_joint
from .potential import Potential

_PARITY_INIT = {"even": (1.0, 0.0), "odd": (0.0, 1.0)}


@dataclass
class ProfileResult:
    """Sampled eigenfunction with a decay-rate fit on integer-spaced tail points."""

    xs: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    k_fit: float
    fit_anchor: float


@dataclass
class DefectMode:
    """One bound state of the untruncated problem.

    w0 records the initial data under the active normalization: with the
    ``value`` convention Phi(0) = 1 and Phi'(0) = w0; with ``derivative``
    (used when |Phi(0)| is tiny, e.g. odd modes) Phi'(0) = 1 and
    Phi(0) = -w0.
    """

    E: float
    parity: str  # "even", "odd", "none", or "edge"
    w0: float
    k: float
    k_fit: float
    residual: float
    gap: tuple
    normalization: str
    X: float
    profile: ProfileResult | None = None


def _sign_fixed(vec: np.ndarray) -> np.ndarray:
    """Unit-normalize and orient so the larger-magnitude component is positive."""
    v = vec / np.linalg.norm(vec)
    pivot = int(np.argmax(np.abs(v)))
    return -v if v[pivot].real < 0.0 else v


def _grow_kill_functional(p: Potential, E: float, X: float, tol: float) -> np.ndarray:
    """Row vector whose kernel at x = X is the subspace decaying as x -> +inf."""
    fd = monodromy(p.periodic, E, tol=tol, base=X)
    if abs(fd.discriminant) <= 2.0:
        raise PreconditionError(f"E={E} lies inside a spectral band; matching needs a gap energy")
    return _sign_fixed(fd.left_eigenvector("large").real)


def _decay_kill_functional(p: Potential, E: float, X: float, tol: float) -> np.ndarray:
    """Row vector whose kernel at x = -X is the subspace decaying as x -> -inf.

    Decay toward -inf means the state is a multiple of the eigendirection
    whose envelope grows with x, so the coefficient along the small
    multiplier direction must vanish.
    """
    fd = monodromy(p.periodic, E, tol=tol, base=-X)
    if abs(fd.discriminant) <= 2.0:
        raise PreconditionError(f"E={E} lies inside a spectral band; matching needs a gap energy")
    return _sign_fixed(fd.left_eigenvector("small").real)


def _basis_at(p: Potential, E: float, X: float, tol: float) -> np.ndarray:
    """Columns: states at X launched from (1, 0) and (0, 1) at the origin."""
    res = integrate_joint(p, E, 0.0, X, (1.0, 0.0), v_init=(0.0, 1.0), tol=tol, real=True)
    return np.array([[res.u, res.v], [res.du, res.dv]], dtype=float)


def matching_function(p: Potential, E: float, parity: str, X: float, tol: float = 1e-12) -> float:
    """Coefficient of the solution branch growing as x -> +inf, at energy E.

    Vanishes exactly at eigenvalues.  For half-line potentials the initial
    data is the free decaying exponential (requires E < 0) and parity is
    ignored; otherwise parity selects (1, 0) or (0, 1) initial data.
    """
    if X < p.support_radius() + 1.0:
        raise ConfigError("matching point X must be at least the defect support radius plus 1")
    if p.half_line:
        if E >= 0.0:
            raise PreconditionError("half-line matching needs E < 0 for a decaying left tail")
        init = np.array([1.0, math.sqrt(-E)])
    else:
        if parity not in _PARITY_INIT:
            raise ConfigError(f"parity must be 'even' or 'odd', got {parity!r}")
        init = np.array(_PARITY_INIT[parity])
    ell = _grow_kill_functional(p, E, X, tol)
    state = _basis_at(p, E, X, tol) @ init
    return float(ell @ state)


def _scan_and_refine(f, grid: np.ndarray, vals: np.ndarray, xtol: float) -> list:
    """Polished roots from sign changes of sampled f, with artifact rejection.

    The orientation convention of the Floquet functionals can flip
    discontinuously where their two components exchange dominance, and the
    slope-mismatch functions have genuine poles; both produce fake sign
    changes that polish to points where |f| stays comparable to the
    bracket values.  A root is kept only if |f| collapses relative to its
    bracket.
    """
    roots = []
    for i in range(len(grid) - 1):
        fa, fb = vals[i], vals[i + 1]
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        if fa == 0.0:
            roots.append((float(grid[i]), 0.0))
            continue
        if fa * fb < 0.0:
            a, b = float(grid[i]), float(grid[i + 1])
            r = brentq(f, a, b, xtol=xtol, rtol=8.0 * np.finfo(float).eps, maxiter=200)
            fr = f(r)
            if abs(fr) <= 1e-8 * max(abs(fa), abs(fb)):
                roots.append((float(r), abs(fr)))
    deduped = []
    for r, res in roots:
        if all(abs(r - q) > 10.0 * xtol for q, _ in deduped):
            deduped.append((r, res))
    return deduped


def _grid_in(gap: tuple, n_grid: int, cap_hi: float | None = None) -> np.ndarray:
    lo, hi = float(gap[0]), float(gap[1])
    inset = 1e-4 * (hi - lo)
    lo_eff, hi_eff = lo + inset, hi - inset
    if cap_hi is not None:
        hi_eff = min(hi_eff, cap_hi)
    if hi_eff <= lo_eff:
        return np.empty(0)
    return np.linspace(lo_eff, hi_eff, n_grid)


def find_defect_modes(
    p: Potential,
    gap: tuple,
    tol: float = 1e-10,
    n_grid: int = 400,
    X: float | None = None,
    ode_tol: float = 1e-12,
    with_profiles: bool = True,
) -> list:
    """All bound states with energy inside the given gap, sorted by energy.

    tol is the absolute energy tolerance of the polished roots; X is the
    matching point, defaulting to rho_ceil + 5.  The bracketing grid pass
    integrates three decades looser than ode_tol (root polish runs at full
    precision); brackets only need signs.
    """
    if X is None:
        X = float(p.rho_ceil() + 5)
    if p.half_line:
        modes = _edge_modes(p, gap, int(n_grid), tol, X, ode_tol, with_profiles)
    elif p.symmetric:
        modes = _parity_modes(p, gap, int(n_grid), tol, X, ode_tol, with_profiles)
    else:
        modes = _two_sided_modes(p, gap, int(n_grid), tol, X, ode_tol, with_profiles)
    modes.sort(key=lambda m: m.E)
    return modes


def _scan_tol(ode_tol: float) -> float:
    return min(1e-8, max(ode_tol * 1e3, 1e-10))


def _edge_modes(p, gap, n_grid, tol, X, ode_tol, with_profiles):
    # free decay on the left requires E < 0 strictly
    grid = _grid_in(gap, n_grid, cap_hi=-1e-9 * max(1.0, abs(gap[0])))
    if len(grid) == 0:
        return []

    def f(E: float) -> float:
        return matching_function(p, E, "none", X, tol=ode_tol)

    coarse = _scan_tol(ode_tol)
    vals = np.array([matching_function(p, float(E), "none", X, tol=coarse) for E in grid])
    return [
        _build_mode(p, E0, "edge", math.sqrt(-E0), "value", res, gap, X, ode_tol, with_profiles)
        for E0, res in _scan_and_refine(f, grid, vals, tol)
    ]


def _parity_modes(p, gap, n_grid, tol, X, ode_tol, with_profiles):
    grid = _grid_in(gap, n_grid)
    if len(grid) == 0:
        return []
    # one basis solve and one monodromy per grid energy serve both parities:
    # the even/odd matching values are the two components of ell @ basis
    coarse = _scan_tol(ode_tol)
    both = np.array(
        [_grow_kill_functional(p, float(E), X, coarse) @ _basis_at(p, float(E), X, coarse)
         for E in grid]
    )
    modes = []
    for col, parity in ((0, "even"), (1, "odd")):

        def f(E: float, parity=parity) -> float:
            return matching_function(p, E, parity, X, tol=ode_tol)

        normalization = "value" if parity == "even" else "derivative"
        for E0, res in _scan_and_refine(f, grid, both[:, col], tol):
            modes.append(
                _build_mode(p, E0, parity, 0.0, normalization, res, gap, X, ode_tol,
                            with_profiles)
            )
    return modes


def _one_sided_rows(p: Potential, E: float, X: float, tol: float):
    """Kill-condition rows (beta, gamma) acting on initial data (Phi(0), Phi'(0)).

    beta @ (phi0, dphi0) = 0 removes growth as x -> +inf (measured at +X);
    gamma @ (phi0, dphi0) = 0 removes growth as x -> -inf (measured at -X).
    """
    beta = _grow_kill_functional(p, E, X, tol) @ _basis_at(p, E, X, tol)
    res_m = integrate_joint(p, E, 0.0, -X, (1.0, 0.0), v_init=(0.0, 1.0), tol=tol, real=True)
    basis_m = np.array([[res_m.u, res_m.v], [res_m.du, res_m.dv]], dtype=float)
    gamma = _decay_kill_functional(p, E, X, tol) @ basis_m
    return beta, gamma


def _two_sided_modes(p, gap, n_grid, tol, X, ode_tol, with_profiles):
    """Modes of a potential with no symmetry: match one-sided slopes.

    With Phi(0) = 1 the growth-kill conditions fix one-sided slopes
    w+ = -beta0/beta1 and w- = -gamma0/gamma1; eigenvalues are where they
    agree.  The complementary scan with Phi'(0) = 1 catches modes with a
    node at the origin, where the slope representation blows up.
    """
    grid = _grid_in(gap, n_grid)
    if len(grid) == 0:
        return []

    coarse = _scan_tol(ode_tol)
    rows = [_one_sided_rows(p, float(E), X, coarse) for E in grid]
    betas = np.array([r[0] for r in rows])
    gammas = np.array([r[1] for r in rows])

    def mismatch_value(E: float) -> float:
        b, g = _one_sided_rows(p, float(E), X, ode_tol)
        return -b[0] / b[1] + g[0] / g[1]

    def mismatch_derivative(E: float) -> float:
        b, g = _one_sided_rows(p, float(E), X, ode_tol)
        return -b[1] / b[0] + g[1] / g[0]

    with np.errstate(divide="ignore", invalid="ignore"):
        g_val = -betas[:, 0] / betas[:, 1] + gammas[:, 0] / gammas[:, 1]
        g_der = -betas[:, 1] / betas[:, 0] + gammas[:, 1] / gammas[:, 0]

    candidates = []
    for E0, res in _scan_and_refine(mismatch_value, grid, g_val, tol):
        candidates.append((E0, res))
    for E0, res in _scan_and_refine(mismatch_derivative, grid, g_der, tol):
        candidates.append((E0, res))

    modes = []
    for E0, res in sorted(candidates):
        if any(abs(E0 - m.E) <= 100.0 * tol for m in modes):
            continue
        b, _ = _one_sided_rows(p, E0, X, ode_tol)
        # Phi(0) = 1 normalization unless the mode has a near-node at 0
        if abs(b[1]) >= 1e-3 * abs(b[0]):
            w0, normalization = float(-b[0] / b[1]), "value"
            if abs(w0) > 1e3:
                w0, normalization = float(-b[1] / b[0]), "derivative"
        else:
            w0, normalization = float(-b[1] / b[0]), "derivative"
        modes.append(
            _build_mode(p, E0, "none", w0, normalization, res, gap, X, ode_tol, with_profiles)
        )
    return modes


def _build_mode(p, E0, parity, w0, normalization, residual, gap, X, ode_tol, with_profiles):
    k = monodromy(p.periodic, E0, tol=ode_tol).k
    prof = None
    k_fit = float("nan")
    if with_profiles:
        prof = profile(p, E0, parity=parity, w0=w0, normalization=normalization,
                       ode_tol=ode_tol)
        k_fit = prof.k_fit
    return DefectMode(
        E=float(E0),
        parity=parity,
        w0=float(w0),
        k=float(k),
        k_fit=k_fit,
        residual=float(residual),
        gap=(float(gap[0]), float(gap[1])),
        normalization=normalization,
        X=float(X),
        profile=prof,
    )


def _initial_data(parity: str, w0: float, normalization: str):
    if parity in _PARITY_INIT:
        return _PARITY_INIT[parity]
    if parity == "edge" or normalization == "value":
        return (1.0, w0)
    return (-w0, 1.0)


def profile(
    p: Potential,
    E: float,
    parity: str = "even",
    w0: float = 0.0,
    normalization: str = "value",
    x_max: float | None = None,
    n_per_unit: int = 100,
    ode_tol: float = 1e-12,
) -> ProfileResult:
    """Sample the eigenfunction on [-x_max, x_max] and fit its tail decay rate.

    The decay fit uses integer-spaced samples (one per period) starting at
    the in-period phase where |Phi| is largest, anchored two periods past
    the defect support; integer spacing removes the periodic Bloch
    modulation from the fit.
    """
    rc = p.rho_ceil()
    if x_max is None:
        x_max = float(rc + 9)
    n = int(round(n_per_unit * x_max)) + 1
    xs = np.linspace(0.0, x_max, n)
    init = _initial_data(parity, w0, normalization)
    res = integrate_joint(p, E, 0.0, x_max, init, tol=ode_tol, real=True, t_eval=xs)
    phi_r, dphi_r = res.u_samples, res.du_samples

    if p.half_line:
        if E >= 0.0:
            raise PreconditionError("half-line profiles need E < 0")
        xs_l = -xs[1:][::-1]
        s = math.sqrt(-E)
        phi_l = init[0] * np.exp(s * xs_l)
        dphi_l = s * phi_l
    elif p.symmetric and parity in _PARITY_INIT:
        xs_l = -xs[1:][::-1]
        sgn = 1.0 if parity == "even" else -1.0
        phi_l = sgn * phi_r[1:][::-1]
        dphi_l = -sgn * dphi_r[1:][::-1]
    else:
        res_l = integrate_joint(p, E, 0.0, -x_max, init, tol=ode_tol, real=True, t_eval=-xs)
        xs_l = res_l.xs[1:][::-1]
        phi_l = res_l.u_samples[1:][::-1]
        dphi_l = res_l.du_samples[1:][::-1]

    xs_full = np.concatenate([xs_l, xs])
    phi = np.concatenate([phi_l, phi_r])
    dphi = np.concatenate([dphi_l, dphi_r])

    k_fit, anchor = _fit_decay(xs, phi_r, rc, n_per_unit, x_max)
    return ProfileResult(xs=xs_full, phi=phi, dphi=dphi, k_fit=k_fit, fit_anchor=anchor)


def _fit_decay(xs: np.ndarray, phi: np.ndarray, rc: int, n_per_unit: int, x_max: float):
    """Least-squares slope of log|Phi| on integer-spaced points past the defect."""
    lo = rc + 2.0
    if x_max < lo + 3.0:
        return float("nan"), float("nan")
    i_lo = int(np.searchsorted(xs, lo))
    i_hi = int(np.searchsorted(xs, lo + 1.0))
    seg = np.abs(phi[i_lo:i_hi])
    if not len(seg):
        return float("nan"), float("nan")
    i_anchor = i_lo + int(np.argmax(seg))
    n_pts = int(min(6, math.floor(x_max - xs[i_anchor]) + 1))
    pts_x, pts_y = [], []
    for j in range(n_pts):
        idx = i_anchor + j * n_per_unit
        if idx >= len(xs):
            break
        y = abs(phi[idx])
        if y <= 0.0:
            break
        pts_x.append(xs[idx])
        pts_y.append(math.log(y))
    if len(pts_x) < 3:
        return float("nan"), float("nan")
    slope = np.polyfit(pts_x, pts_y, 1)[0]
    return float(-slope), float(pts_x[0])
