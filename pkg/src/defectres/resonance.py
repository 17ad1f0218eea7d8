"""Resonances and perturbed bound states of the truncated potential.

Truncating V at radius M turns each defect eigenvalue E into a nearby
root z*(M) of an outgoing-condition function.  On the right half line

    Theta(z) = u'(M; z) - i sqrt(z) u(M; z),

where u solves u'' = (V - z) u from the center with the mode's initial
data; Theta = 0 says the solution continues as the purely outgoing (E > 0)
or decaying (E < 0) free exponential past M.  Non-symmetric truncations
impose the analogous pair Theta^+ / Theta^- at +M and -M jointly in the
unknowns (w, z) = (initial slope, energy).

Roots are found by a frozen-derivative iteration: the z-derivative of
Theta (or the 2x2 linearization in the pair case) is evaluated once at
the untruncated eigenvalue and reused every step,

    z <- z - Theta(z) / dTheta(E).

The first step of that iteration, E - Theta(E)/dTheta(E), is itself the
leading asymptotic prediction for z*(M) and is reported alongside the
converged root.  The square-root branch is chosen per problem: principal
(cut on the negative reals) for resonances, i sqrt(-z) (cut on the
positive reals) for perturbed negative-energy bound states.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonConvergenceError, PreconditionError
from .floquet import monodromy
from .ode import integrate_joint
from .potential import Potential

_PARITY_INIT = {"even": (1.0, 0.0), "odd": (0.0, 1.0)}
_COMPANION_INIT = {"even": (0.0, 1.0), "odd": (-1.0, 0.0)}


class SqrtBranch(enum.Enum):
    """Branch of sqrt(z) entering the outgoing condition.

    RESONANCE: principal branch, Im sqrt(z) >= 0 cut along (-inf, 0];
    resonances sit just below the positive real axis on its analytic
    continuation through the cut-free region.

    BOUND: sqrt(z) = i sqrt(-z) with the principal sqrt of -z, cut along
    [0, inf); on the negative real axis i sqrt(z) = -sqrt(|z|), so
    exp(i sqrt(z) x) is the decaying free tail of a bound state.
    """

    RESONANCE = "resonance"
    BOUND = "bound"

    def sqrt(self, z) -> complex:
        zc = complex(z)
        if self is SqrtBranch.RESONANCE:
            if zc.imag == 0.0 and zc.real <= 0.0:
                raise PreconditionError(
                    f"z={zc} lies on the resonance branch cut (-inf, 0]"
                )
            return cmath.sqrt(zc)
        if zc.imag == 0.0 and zc.real >= 0.0:
            raise PreconditionError(f"z={zc} lies on the bound branch cut [0, inf)")
        return 1j * cmath.sqrt(-zc)


@dataclass
class ThetaEval:
    """Theta and its requested derivatives at one (z, M) point."""

    z: complex
    M: float
    theta: complex
    d_z: complex | None = None
    d_z2: complex | None = None
    d_w: complex | None = None
    u: complex | None = None
    du: complex | None = None


@dataclass
class ResonanceResult:
    """Converged root of the outgoing condition with iteration diagnostics.

    in_omega reports whether z* landed inside the ball
    |z - E| <= exp(-k M) / M^2 around the untruncated eigenvalue; escaping
    it is reported, not fatal.  gaps holds the successive step sizes of
    the iteration, for contraction-rate inspection.
    """

    z_star: complex
    E: float
    M: float
    k: float
    residual: float
    iterations: int
    converged: bool
    mode: str  # "resonance", "bound", or "edge"
    iterates: list
    gaps: list
    asymptotic_z1: complex
    abs_theta_at_E: float
    abs_d_theta_at_E: float
    in_omega: bool
    branch: SqrtBranch
    parity: str | None = None
    w_star: complex | None = None
    asymptotic_w1: complex | None = None
    convention: str | None = None
    lifetime: float | None = None
    margin: float | None = None
    newton_used: bool = False


def _require_truncatable(p: Potential, M: float) -> None:
    if M <= p.support_radius():
        raise ConfigError(
            f"truncation radius M={M} must exceed the defect support radius "
            f"{p.support_radius()}"
        )


def _reject_zero_energy(E: float) -> None:
    if E == 0.0:
        raise PreconditionError(
            "E = 0 is the square-root branch point between the resonance and "
            "bound regimes; neither outgoing condition is defined there"
        )


def _default_branch(E: float) -> SqrtBranch:
    return SqrtBranch.RESONANCE if E > 0.0 else SqrtBranch.BOUND


def theta(
    p: Potential,
    z,
    M: float,
    parity: str = "even",
    branch: SqrtBranch = SqrtBranch.RESONANCE,
    with_derivs: bool = True,
    tol: float = 1e-13,
) -> ThetaEval:
    """Outgoing-condition function for parity initial data on [0, M].

    With derivatives, the first and second z-derivatives of u ride along
    the integration and combine with the explicit sqrt(z) dependence:

        dTheta  = u_z' - i sqrt(z) u_z - i u / (2 sqrt(z)),
        d2Theta = u_zz' - i sqrt(z) u_zz - i u_z / sqrt(z)
                  + i u / (4 z sqrt(z)).
    """
    _require_truncatable(p, M)
    if parity not in _PARITY_INIT:
        raise ConfigError(f"parity must be 'even' or 'odd', got {parity!r}")
    if not p.symmetric:
        raise ConfigError("parity initial data requires a symmetric potential")
    zc = complex(z)
    rz = branch.sqrt(zc)
    real = zc.imag == 0.0
    res = integrate_joint(
        p,
        zc.real if real else zc,
        0.0,
        M,
        _PARITY_INIT[parity],
        order=2 if with_derivs else 0,
        tol=tol,
        real=real,
    )
    th = res.du - 1j * rz * res.u
    out = ThetaEval(z=zc, M=M, theta=th, u=res.u, du=res.du)
    if with_derivs:
        out.d_z = res.dz_du - 1j * rz * res.dz_u - 1j * res.u / (2.0 * rz)
        out.d_z2 = (
            res.dz2_du
            - 1j * rz * res.dz2_u
            - 1j * res.dz_u / rz
            + 1j * res.u / (4.0 * zc * rz)
        )
    return out


def theta_pm(
    p: Potential,
    zeta,
    M: float,
    convention: str = "value",
    branch: SqrtBranch = SqrtBranch.RESONANCE,
    with_derivs: bool = True,
    tol: float = 1e-13,
):
    """Two-sided outgoing pair Theta^+ (at +M) and Theta^- (at -M).

    zeta = (w, z) packs the initial slope data and the energy.  Under the
    ``value`` convention u(0) = 1, u'(0) = w; under ``derivative``
    u(0) = -w, u'(0) = 1.  Both conditions use the outward derivative, so
    Theta^+ = (u' - i sqrt(z) u)(M) and Theta^- = (-u' - i sqrt(z) u)(-M);
    an even u with w = 0 then gives Theta^- = Theta^+ exactly.  The
    companion v with unit Wronskian gives the w-derivative algebraically:
    d/dw u = c u + v with c = w / (1 + w^2), so dTheta^{+-}/dw =
    c Theta^{+-} + Theta-functional applied to v.

    Returns the (plus, minus) pair of ThetaEval.
    """
    _require_truncatable(p, M)
    if p.half_line:
        raise ConfigError("two-sided conditions are undefined for half-line potentials")
    w, z = zeta
    wc, zc = complex(w), complex(z)
    rz = branch.sqrt(zc)
    denom = 1.0 + wc * wc
    if abs(denom) < 1e-12:
        raise PreconditionError("initial slope w = +-i degenerates the companion basis")
    if convention == "value":
        u0 = (1.0, wc)
        v0 = (-wc / denom, 1.0 / denom)
    elif convention == "derivative":
        u0 = (-wc, 1.0)
        v0 = (-1.0 / denom, -wc / denom)
    else:
        raise ConfigError(f"unknown slope convention {convention!r}")
    c = wc / denom

    real = zc.imag == 0.0 and wc.imag == 0.0
    out = []
    for side in (+1.0, -1.0):
        res = integrate_joint(
            p,
            zc.real if real else zc,
            0.0,
            side * M,
            (u0[0].real, u0[1].real) if real else u0,
            v_init=(v0[0].real, v0[1].real) if real else v0,
            order=1 if with_derivs else 0,
            tol=tol,
            real=real,
        )
        sgn = -1j if side > 0 else 1j
        mul = 1.0 if side > 0 else -1.0
        th = mul * (res.du + sgn * rz * res.u)
        ev = ThetaEval(z=zc, M=side * M, theta=th, u=res.u, du=res.du)
        if with_derivs:
            ev.d_z = mul * (res.dz_du + sgn * rz * res.dz_u + sgn * res.u / (2.0 * rz))
            ev.d_w = c * th + mul * (res.dv + sgn * rz * res.v)
        out.append(ev)
    return out[0], out[1]


def _theta_edge(p: Potential, z, M: float, with_derivs: bool, tol: float) -> ThetaEval:
    """Half-line outgoing condition with the z-dependent left tail in the initial data.

    The initial state u(0) = 1, u'(0) = -i sqrt(z) (bound branch: sqrt(-z))
    matches the free decaying exponential on x < 0, so its z-derivatives
    enter the variational initial data rather than starting at zero.
    """
    zc = complex(z)
    real = zc.imag == 0.0
    if real and zc.real >= 0.0:
        raise PreconditionError("edge condition needs z < 0 or complex z (bound branch)")
    rz = SqrtBranch.BOUND.sqrt(zc)
    s = -1j * rz  # sqrt(-z); positive real for z < 0
    res = integrate_joint(
        p,
        zc.real if real else zc,
        0.0,
        M,
        (1.0, s.real if real else s),
        order=2 if with_derivs else 0,
        tol=tol,
        real=real,
        dz_init=(0.0, (-1.0 / (2.0 * s)).real if real else -1.0 / (2.0 * s)),
        dz2_init=(0.0, (-1.0 / (4.0 * s**3)).real if real else -1.0 / (4.0 * s**3)),
    )
    th = res.du - 1j * rz * res.u
    out = ThetaEval(z=zc, M=M, theta=th, u=res.u, du=res.du)
    if with_derivs:
        out.d_z = res.dz_du - 1j * rz * res.dz_u - 1j * res.u / (2.0 * rz)
        out.d_z2 = (
            res.dz2_du
            - 1j * rz * res.dz2_u
            - 1j * res.dz_u / rz
            + 1j * res.u / (4.0 * zc * rz)
        )
    return out


def _in_omega(z: complex, E: float, k: float, M: float) -> bool:
    return bool(abs(z - E) <= math.exp(-k * M) / (M * M))


def _iterate_frozen_1d(
    theta_fn,
    E: float,
    d_frozen: complex,
    step_tol: float,
    res_tol: float,
    max_iter: int,
    newton_after: int = 50,
):
    """z <- z - Theta(z)/dTheta, with dTheta frozen at E until it stalls.

    Accepts either an absolute residual below res_tol or a pending Newton
    correction |Theta/dTheta| below step_tol/10: when k M is large the
    attainable |Theta| floor scales like tol * e^{k M} (growing-mode noise)
    while |dTheta| grows at the same rate, so the root itself is still
    determined to machine precision.

    Returns (z, residual, iterates, gaps, converged, newton_used).
    """
    z = complex(E)
    iterates = [z]
    gaps: list = []
    newton = False
    for it in range(1, max_iter + 1):
        ev = theta_fn(z, newton)
        res = abs(ev.theta)
        d = ev.d_z if newton else d_frozen
        if gaps and gaps[-1] < step_tol and (res < res_tol or res < 0.1 * step_tol * abs(d)):
            return z, res, iterates, gaps, True, newton
        z_new = z - ev.theta / d
        gaps.append(abs(z_new - z))
        iterates.append(z_new)
        z = z_new
        if not newton and it >= newton_after:
            newton = True
    ev = theta_fn(z, True)
    res = abs(ev.theta)
    if gaps and gaps[-1] < step_tol and (res < res_tol or res < 0.1 * step_tol * abs(ev.d_z)):
        return z, res, iterates, gaps, True, newton
    raise NonConvergenceError(
        f"outgoing-condition iteration did not converge in {max_iter} steps "
        f"(last step {gaps[-1] if gaps else float('nan'):.3e}, residual {res:.3e})",
        iterates=iterates,
    )


def solve_parity(
    p: Potential,
    E: float,
    parity: str = "even",
    M: float = 8.0,
    branch: SqrtBranch | None = None,
    tol: float = 1e-13,
    res_tol: float = 1e-11,
    max_iter: int = 200,
) -> ResonanceResult:
    """Root of Theta near the parity eigenvalue E for truncation radius M.

    E is the defect eigenvalue of the untruncated problem (positive: the
    truncation turns it into a resonance with Im z* < 0; negative: it stays
    a real bound state energy).  The frozen derivative, the asymptotic
    first step, and the decay rate k at E are all reported.
    """
    _reject_zero_energy(E)
    _require_truncatable(p, M)
    if branch is None:
        branch = _default_branch(E)
    k = monodromy(p.periodic, E, tol=tol).k
    at_E = theta(p, E, M, parity=parity, branch=branch, with_derivs=True, tol=tol)
    z1 = E - at_E.theta / at_E.d_z
    step_tol = 1e-13 * max(1.0, abs(E))

    def theta_fn(z: complex, with_derivs: bool) -> ThetaEval:
        return theta(p, z, M, parity=parity, branch=branch, with_derivs=with_derivs, tol=tol)

    z_star, res, iterates, gaps, converged, newton = _iterate_frozen_1d(
        theta_fn, E, at_E.d_z, step_tol, res_tol, max_iter
    )
    lifetime = 1.0 / (2.0 * abs(z_star.imag)) if z_star.imag < 0.0 else None
    return ResonanceResult(
        z_star=z_star,
        E=E,
        M=M,
        k=k,
        residual=res,
        iterations=len(gaps),
        converged=converged,
        mode="resonance" if branch is SqrtBranch.RESONANCE else "bound",
        iterates=iterates,
        gaps=gaps,
        asymptotic_z1=z1,
        abs_theta_at_E=abs(at_E.theta),
        abs_d_theta_at_E=abs(at_E.d_z),
        in_omega=_in_omega(z_star, E, k, M),
        branch=branch,
        parity=parity,
        lifetime=lifetime,
        newton_used=newton,
    )


def asymptotic_parity(
    p: Potential,
    E: float,
    parity: str = "even",
    M: float = 8.0,
    branch: SqrtBranch | None = None,
    tol: float = 1e-13,
):
    """Leading correction (Re, Im) to z*(M) - E in closed Bloch form.

    Evaluates ((u' v' + E u v)(M) - i sqrt(E)) / ((v'^2 + E v^2)(M) I_M)
    with I_M the mass int_0^M u^2.  The decaying solution u and its mass
    are propagated through the Floquet eigenbasis (coefficient times
    lambda_small^m per period plus a geometric series for the quadrature),
    which stays accurate at large k M where direct forward shooting of u
    loses all digits to growing-mode contamination; the growing companion
    v is forward-integrated, which is stable.
    """
    _reject_zero_energy(E)
    _require_truncatable(p, M)
    if parity not in _PARITY_INIT:
        raise ConfigError(f"parity must be 'even' or 'odd', got {parity!r}")
    if not p.symmetric:
        raise ConfigError("parity initial data requires a symmetric potential")
    if branch is None:
        branch = _default_branch(E)
    rz = branch.sqrt(E)

    x0 = float(p.rho_ceil())
    u_init = _PARITY_INIT[parity]

    if M <= x0 + 1.0:
        res = integrate_joint(p, E, 0.0, M, u_init, quad=True, tol=tol, real=True)
        uM, duM, mass = res.u, res.du, res.quad_uu
    else:
        head = integrate_joint(p, E, 0.0, x0, u_init, quad=True, tol=tol, real=True)
        fd = monodromy(p.periodic, E, tol=tol, base=x0)
        if not fd.in_gap():
            raise PreconditionError(f"E={E} is not in a spectral gap")
        e_small = fd.right_eigenvector("small").real
        ell_small = fd.left_eigenvector("small").real
        s_head = np.array([head.u, head.du])
        a = float(ell_small @ s_head) / float(ell_small @ e_small)

        period = integrate_joint(
            p, E, x0, x0 + 1.0, (e_small[0], e_small[1]), quad=True, tol=tol, real=True
        )
        lam = float(fd.lambda_small.real)
        m_full = int(math.floor(M - x0 + 1e-12))
        frac = M - x0 - m_full
        lam2 = lam * lam
        geom = (1.0 - lam2**m_full) / (1.0 - lam2)
        mass = head.quad_uu + a * a * period.quad_uu * geom
        state_m = a * (lam**m_full) * e_small
        if frac > 1e-12:
            tail = integrate_joint(
                p, E, x0 + m_full, M, (state_m[0], state_m[1]), quad=True, tol=tol, real=True
            )
            mass += tail.quad_uu
            uM, duM = tail.u, tail.du
        else:
            uM, duM = state_m[0], state_m[1]

    v = integrate_joint(p, E, 0.0, M, _COMPANION_INIT[parity], tol=tol, real=True)
    den = (v.du * v.du + E * v.u * v.u) * mass
    corr = ((duM * v.du + E * uM * v.u) - 1j * rz) / den
    return corr.real, corr.imag


def solve_general(
    p: Potential,
    E: float,
    w0: float,
    M: float = 8.0,
    branch: SqrtBranch | None = None,
    convention: str = "value",
    tol: float = 1e-13,
    res_tol: float = 1e-11,
    max_iter: int = 200,
) -> ResonanceResult:
    """Joint root (w*, z*) of the pair (Theta^+, Theta^-) near (w0, E).

    The 2x2 inverse linearization Xi is frozen at (w0, E):

        Xi = (1/N) [[ dz Theta^-, -dz Theta^+],
                    [-dw Theta^-,  dw Theta^+]],
        N = dw Theta^+ dz Theta^- - dz Theta^+ dw Theta^-,

    and (w, z) <- (w, z) - Xi (Theta^+, Theta^-) iterates to the root.
    """
    _reject_zero_energy(E)
    _require_truncatable(p, M)
    if branch is None:
        branch = _default_branch(E)

    k = monodromy(p.periodic, E, tol=tol).k

    def pair(zeta, with_derivs: bool):
        return theta_pm(p, zeta, M, convention=convention, branch=branch,
                        with_derivs=with_derivs, tol=tol)

    def xi_of(evp: ThetaEval, evm: ThetaEval) -> np.ndarray:
        n = evp.d_w * evm.d_z - evp.d_z * evm.d_w
        scale = abs(evp.d_w * evm.d_z) + abs(evp.d_z * evm.d_w)
        if abs(n) < 1e-12 * scale:
            raise PreconditionError(
                "linearization of (Theta^+, Theta^-) is singular at the seed; "
                "the two conditions do not independently constrain (w, z)"
            )
        return np.array([[evm.d_z, -evp.d_z], [-evm.d_w, evp.d_w]], dtype=complex) / n

    ev_p, ev_m = pair((w0, E), True)
    xi = xi_of(ev_p, ev_m)
    n_at_seed = abs(ev_p.d_w * ev_m.d_z - ev_p.d_z * ev_m.d_w)

    w1, z1 = asymptotic_general(p, E, w0, M, convention=convention, branch=branch, tol=tol)

    step_tol = 1e-13 * max(1.0, abs(E))
    zeta = np.array([w0, E], dtype=complex)
    iterates = [complex(zeta[1])]
    gaps: list = []
    newton = False
    converged = False
    res = float("inf")
    for it in range(1, max_iter + 1):
        evp, evm = pair((zeta[0], zeta[1]), newton)
        res = max(abs(evp.theta), abs(evm.theta))
        use_xi = xi_of(evp, evm) if newton else xi
        step = use_xi @ np.array([evp.theta, evm.theta])
        pending = float(max(abs(step[0]), abs(step[1])))
        # same stall rule as the 1d loop: a pending correction below
        # step_tol/10 locates the root even when the raw residual floor
        # (tol * e^{k M} noise) sits above res_tol
        if gaps and gaps[-1] < step_tol and (res < res_tol or pending < 0.1 * step_tol):
            converged = True
            break
        zeta = zeta - step
        gaps.append(pending)
        iterates.append(complex(zeta[1]))
        if not newton and it >= 50:
            newton = True
    if not converged:
        raise NonConvergenceError(
            f"two-sided iteration did not converge in {max_iter} steps "
            f"(last step {gaps[-1] if gaps else float('nan'):.3e}, residual {res:.3e})",
            iterates=iterates,
        )

    z_star, w_star = complex(zeta[1]), complex(zeta[0])
    lifetime = 1.0 / (2.0 * abs(z_star.imag)) if z_star.imag < 0.0 else None
    return ResonanceResult(
        z_star=z_star,
        E=E,
        M=M,
        k=k,
        residual=res,
        iterations=len(gaps),
        converged=converged,
        mode="resonance" if branch is SqrtBranch.RESONANCE else "bound",
        iterates=iterates,
        gaps=gaps,
        asymptotic_z1=z1,
        abs_theta_at_E=max(abs(ev_p.theta), abs(ev_m.theta)),
        abs_d_theta_at_E=math.sqrt(n_at_seed),
        in_omega=_in_omega(z_star, E, k, M),
        branch=branch,
        w_star=w_star,
        asymptotic_w1=w1,
        convention=convention,
        lifetime=lifetime,
        newton_used=newton,
    )


def asymptotic_general(
    p: Potential,
    E: float,
    w0: float,
    M: float = 8.0,
    convention: str = "value",
    branch: SqrtBranch | None = None,
    tol: float = 1e-13,
):
    """First-order (w1, z1) prediction for the two-sided root.

    Built from the one-sided boundary values A^{+-} = Theta^{+-}(w0, E),
    the same outward functionals applied to the companion,
    B^+ = (v' - i sqrt(E) v)(M) and B^- = (-v' - i sqrt(E) v)(-M), and the
    oriented mass integrals I+ = int_0^M u^2, I- = int_{-M}^0 u^2:

        w1 = w0 - (I- B^- A^+ + I+ B^+ A^-) / (I B^+ B^-),
        z1 = E  - (B^+ A^- - B^- A^+) / (I B^+ B^-),  I = I+ + I-.

    For parity-symmetric data A^- = A^+, B^- = -B^+, I- = I+ and the w
    correction cancels identically.
    """
    _reject_zero_energy(E)
    _require_truncatable(p, M)
    if branch is None:
        branch = _default_branch(E)
    rz = branch.sqrt(E)
    wc = float(w0)
    denom = 1.0 + wc * wc
    if convention == "value":
        u0 = (1.0, wc)
        v0 = (-wc / denom, 1.0 / denom)
    elif convention == "derivative":
        u0 = (-wc, 1.0)
        v0 = (-1.0 / denom, -wc / denom)
    else:
        raise ConfigError(f"unknown slope convention {convention!r}")

    plus = integrate_joint(p, E, 0.0, M, u0, v_init=v0, quad=True, tol=tol, real=True)
    minus = integrate_joint(p, E, 0.0, -M, u0, v_init=v0, quad=True, tol=tol, real=True)

    a_plus = plus.du - 1j * rz * plus.u
    a_minus = -(minus.du + 1j * rz * minus.u)
    b_plus = plus.dv - 1j * rz * plus.v
    b_minus = -(minus.dv + 1j * rz * minus.v)
    i_plus = plus.quad_uu
    i_minus = -minus.quad_uu  # orient int over [-M, 0]
    i_tot = i_plus + i_minus

    den = i_tot * b_plus * b_minus
    w1 = wc - (i_minus * b_minus * a_plus + i_plus * b_plus * a_minus) / den
    z1 = E - (b_plus * a_minus - b_minus * a_plus) / den
    return w1, z1


def solve_bound_negative(
    p: Potential,
    E: float,
    parity: str | None = "even",
    w0: float | None = None,
    M: float = 8.0,
    tol: float = 1e-13,
    res_tol: float = 1e-11,
    max_iter: int = 200,
    margin_tol: float = 1e-8,
) -> ResonanceResult:
    """Perturbed bound state of the truncated potential near E < 0.

    Uses the bound square-root branch throughout; all quantities stay real
    and z*(M) is a genuine eigenvalue approaching E exponentially.  Before
    iterating, the non-cancellation margin |v' + sqrt(|E|) v|(M) relative
    to its terms is checked; a collapsing margin signals a spurious
    truncation eigenvalue crossing and aborts.
    """
    _reject_zero_energy(E)
    if E > 0.0:
        raise PreconditionError("solve_bound_negative needs E < 0; use solve_parity "
                                "or solve_general for resonances at E > 0")
    _require_truncatable(p, M)

    if parity is not None and not p.symmetric:
        raise ConfigError("parity initial data requires a symmetric potential")

    if parity is not None:
        v = integrate_joint(p, E, 0.0, M, _COMPANION_INIT[parity], tol=tol, real=True)
    else:
        if w0 is None:
            raise ConfigError("solve_bound_negative needs a parity or an initial slope w0")
        denom = 1.0 + w0 * w0
        v = integrate_joint(p, E, 0.0, M, (-w0 / denom, 1.0 / denom), tol=tol, real=True)
    s = math.sqrt(-E)
    margin = abs(v.du + s * v.u) / (abs(v.du) + s * abs(v.u))
    if margin < margin_tol:
        raise PreconditionError(
            f"bound-state margin |v' + sqrt(|E|) v| collapsed at M={M} "
            f"(relative size {margin:.3e}); the correction formula degenerates here"
        )

    if parity is not None:
        result = solve_parity(p, E, parity=parity, M=M, branch=SqrtBranch.BOUND,
                              tol=tol, res_tol=res_tol, max_iter=max_iter)
    else:
        result = solve_general(p, E, w0, M=M, branch=SqrtBranch.BOUND,
                               tol=tol, res_tol=res_tol, max_iter=max_iter)
    result.margin = margin
    return result


def solve_edge(
    p: Potential,
    E: float,
    M: float = 8.0,
    tol: float = 1e-13,
    res_tol: float = 1e-11,
    max_iter: int = 200,
    margin_tol: float = 1e-8,
) -> ResonanceResult:
    """Perturbed edge eigenvalue of a truncated half-line potential, E < 0.

    The left tail is the free exponential exp(sqrt(-z) x), folded into the
    z-dependent initial data of Theta^+; only the right condition at +M is
    imposed and everything stays real.
    """
    if not p.half_line:
        raise ConfigError("solve_edge requires a half-line potential")
    _reject_zero_energy(E)
    if E > 0.0:
        raise PreconditionError("edge states need E < 0 (below the free half spectrum)")
    _require_truncatable(p, M)

    k = monodromy(p.periodic, E, tol=tol).k
    at_E = _theta_edge(p, E, M, with_derivs=True, tol=tol)
    rel = abs(at_E.d_z) / (1.0 + abs(at_E.u) + abs(at_E.du))
    if rel < margin_tol:
        raise PreconditionError(
            f"edge derivative dTheta(E) is degenerate at M={M} (relative size {rel:.3e})"
        )
    z1 = E - at_E.theta / at_E.d_z
    step_tol = 1e-13 * max(1.0, abs(E))

    def theta_fn(z: complex, with_derivs: bool) -> ThetaEval:
        return _theta_edge(p, z, M, with_derivs=with_derivs, tol=tol)

    z_star, res, iterates, gaps, converged, newton = _iterate_frozen_1d(
        theta_fn, E, at_E.d_z, step_tol, res_tol, max_iter
    )
    return ResonanceResult(
        z_star=z_star,
        E=E,
        M=M,
        k=k,
        residual=res,
        iterations=len(gaps),
        converged=converged,
        mode="edge",
        iterates=iterates,
        gaps=gaps,
        asymptotic_z1=z1,
        abs_theta_at_E=abs(at_E.theta),
        abs_d_theta_at_E=abs(at_E.d_z),
        in_omega=_in_omega(z_star, E, k, M),
        branch=SqrtBranch.BOUND,
        margin=rel,
        lifetime=None,
        newton_used=newton,
    )


@dataclass
class ResonantState:
    """Sampled resonant or perturbed-bound eigenfunction with free tails."""

    xs: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    z: complex
    M: float


def resonant_state(
    p: Potential,
    result: ResonanceResult,
    x_max: float | None = None,
    n_per_unit: int = 100,
) -> ResonantState:
    """Reconstruct the state of the truncated problem at z = z*.

    Inside [-M, M] the ODE is integrated with the mode's initial data; past
    the truncation the free outgoing/decaying exponential continues the
    boundary values, so the value is continuous by construction and the
    derivative jump at M equals the converged residual Theta(z*).
    """
    z = result.z_star
    M = result.M
    if x_max is None:
        x_max = M + 4.0
    if x_max <= M:
        raise ConfigError("x_max must exceed the truncation radius M")
    rz = result.branch.sqrt(z)

    n_in = int(round(n_per_unit * M)) + 1
    xs_in = np.linspace(0.0, M, n_in)
    n_out = int(round(n_per_unit * (x_max - M))) + 1
    xs_out = np.linspace(M, x_max, n_out)

    if result.mode == "edge":
        init = (1.0, -1j * rz)
    elif result.w_star is not None:
        if result.convention == "derivative":
            init = (-result.w_star, 1.0)
        else:
            init = (1.0, result.w_star)
    else:
        init = _PARITY_INIT[result.parity]

    res = integrate_joint(p, z, 0.0, M, init, tol=1e-13, t_eval=xs_in)
    u_in, du_in = res.u_samples, res.du_samples
    tail = u_in[-1] * np.exp(1j * rz * (xs_out - M))
    dtail = 1j * rz * tail

    xs = np.concatenate([xs_in, xs_out[1:]])
    phi = np.concatenate([u_in, tail[1:]])
    dphi = np.concatenate([du_in, dtail[1:]])

    if result.mode == "edge":
        xs_l = -np.linspace(0.0, x_max, int(round(n_per_unit * x_max)) + 1)[1:][::-1]
        phi_l = np.exp(-1j * rz * xs_l)  # exp(sqrt(-z) x): decays as x -> -inf
        dphi_l = -1j * rz * phi_l
    elif result.w_star is not None:
        res_l = integrate_joint(p, z, 0.0, -M, init, tol=1e-13,
                                t_eval=-np.linspace(0.0, M, n_in))
        xs_lo = np.linspace(-x_max, -M, n_out)
        tail_l = res_l.u_samples[-1] * np.exp(-1j * rz * (xs_lo + M))
        dtail_l = -1j * rz * tail_l
        # keep the interior sample at -M (its derivative carries the
        # Theta^- mismatch) and drop the duplicated origin
        xs_l = np.concatenate([xs_lo[:-1], res_l.xs[::-1][:-1]])
        phi_l = np.concatenate([tail_l[:-1], res_l.u_samples[::-1][:-1]])
        dphi_l = np.concatenate([dtail_l[:-1], res_l.du_samples[::-1][:-1]])
    else:
        sgn = 1.0 if result.parity == "even" else -1.0
        xs_l = -xs[1:][::-1]
        phi_l = sgn * phi[1:][::-1]
        dphi_l = -sgn * dphi[1:][::-1]

    return ResonantState(
        xs=np.concatenate([xs_l, xs]),
        phi=np.concatenate([phi_l, phi]),
        dphi=np.concatenate([dphi_l, dphi]),
        z=z,
        M=M,
    )
