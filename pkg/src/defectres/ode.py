"""Initial value problems for u'' = (V(x) - z) u and companion systems.

Conventions used throughout the package:

- a state is the pair (u(x), u'(x));
- the companion solution v is normalized so the Wronskian u v' - u' v = 1;
- z-derivative blocks solve the inhomogeneous chains
  (d/dz u)'' = (V - z) (d/dz u) - u and
  (d^2/dz^2 u)'' = (V - z) (d^2/dz^2 u) - 2 (d/dz u),
  integrated jointly with u so all blocks share one error control;
- running quadratures int u^2 dx and int u v dx ride along as extra
  components, oriented from x0 to x1.

Integration is adaptive eighth order (DOP853) with rtol = atol = tol.
A max step of half the defect support radius guards against the solver
stepping across a compactly supported defect from a free region.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import StepSizeUnderflow
from .potential import Potential, scalar_evaluator


@dataclass
class StateVector:
    """Solution value and derivative at a point: (u, u')."""

    u: complex
    du: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.du])


@dataclass
class TransferMatrix:
    """Propagator of states: T(x0 -> x1) @ (u(x0), u'(x0)) = (u(x1), u'(x1)).

    Columns are the solutions launched from (1, 0) and (0, 1).  Constancy
    of the Wronskian forces det T = 1 exactly; the numerical determinant
    drifts only by integration error.
    """

    matrix: np.ndarray
    x0: float
    x1: float
    z: complex

    @property
    def det(self) -> complex:
        m = self.matrix
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]

    def apply(self, state: StateVector) -> StateVector:
        out = self.matrix @ state.as_array()
        return StateVector(out[0], out[1])

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        # composition: self maps other.x1 -> self.x1
        return TransferMatrix(self.matrix @ other.matrix, other.x0, self.x1, self.z)


@dataclass
class VariationalState:
    """State of u together with its first two z-derivatives."""

    u: complex
    du: complex
    dz_u: complex = 0.0
    dz_du: complex = 0.0
    dz2_u: complex = 0.0
    dz2_du: complex = 0.0

    @classmethod
    def from_state(cls, state: StateVector) -> "VariationalState":
        return cls(u=state.u, du=state.du)


@dataclass
class JointState:
    """Result of a joint integration; unused blocks stay None.

    When sampling points were requested, xs / u_samples / du_samples hold
    the trajectory of the u block on those points.
    """

    x: float
    u: complex
    du: complex
    v: complex | None = None
    dv: complex | None = None
    dz_u: complex | None = None
    dz_du: complex | None = None
    dz2_u: complex | None = None
    dz2_du: complex | None = None
    quad_uu: complex | None = None
    quad_uv: complex | None = None
    xs: np.ndarray | None = None
    u_samples: np.ndarray | None = None
    du_samples: np.ndarray | None = None

    def state(self) -> StateVector:
        return StateVector(self.u, self.du)


def _max_step(p: Potential) -> float:
    return 0.5 * min(1.0, p.defect.support_radius)


def integrate_joint(
    p: Potential,
    z,
    x0: float,
    x1: float,
    u_init,
    v_init=None,
    order: int = 0,
    quad: bool = False,
    tol: float = 1e-10,
    truncation: float | None = None,
    t_eval=None,
    real: bool = False,
    dz_init=(0.0, 0.0),
    dz2_init=(0.0, 0.0),
) -> JointState:
    """Integrate u (and optionally v, z-derivative blocks, quadratures) from x0 to x1.

    order 0/1/2 selects how many z-derivative blocks ride along; their
    initial data default to zero but can be overridden for z-dependent
    initial conditions.  real=True integrates in float arithmetic, valid
    when z and all initial data are real.
    """
    V = scalar_evaluator(p, truncation=truncation)
    dtype = float if real else complex
    zc = float(np.real(z)) if real else complex(z)

    iv = izu = izz = iq = iqv = None
    n = 2
    if v_init is not None:
        iv, n = n, n + 2
    if order >= 1:
        izu, n = n, n + 2
    if order >= 2:
        izz, n = n, n + 2
    if quad:
        iq, n = n, n + 1
        if v_init is not None:
            iqv, n = n, n + 1

    y0 = np.zeros(n, dtype=dtype)
    y0[0], y0[1] = u_init[0], u_init[1]
    if iv is not None:
        y0[iv], y0[iv + 1] = v_init[0], v_init[1]
    if izu is not None:
        y0[izu], y0[izu + 1] = dz_init[0], dz_init[1]
    if izz is not None:
        y0[izz], y0[izz + 1] = dz2_init[0], dz2_init[1]

    def rhs(x, y):
        q = V(x) - zc
        out = np.empty_like(y)
        out[0] = y[1]
        out[1] = q * y[0]
        if iv is not None:
            out[iv] = y[iv + 1]
            out[iv + 1] = q * y[iv]
        if izu is not None:
            out[izu] = y[izu + 1]
            out[izu + 1] = q * y[izu] - y[0]
        if izz is not None:
            out[izz] = y[izz + 1]
            out[izz + 1] = q * y[izz] - 2.0 * y[izu]
        if iq is not None:
            out[iq] = y[0] * y[0]
        if iqv is not None:
            out[iqv] = y[0] * y[iv]
        return out

    if x0 == x1:
        yf = y0
        sol = None
    else:
        sol = solve_ivp(
            rhs,
            (x0, x1),
            y0,
            method="DOP853",
            rtol=tol,
            atol=tol,
            max_step=_max_step(p),
            t_eval=t_eval,
            dense_output=False,
        )
        if not sol.success:
            raise StepSizeUnderflow(
                f"integrator failed between x={x0} and x={x1}: {sol.message}",
                x=float(sol.t[-1]) if len(sol.t) else x0,
            )
        yf = sol.y[:, -1]

    out = JointState(x=x1, u=yf[0], du=yf[1])
    if iv is not None:
        out.v, out.dv = yf[iv], yf[iv + 1]
    if izu is not None:
        out.dz_u, out.dz_du = yf[izu], yf[izu + 1]
    if izz is not None:
        out.dz2_u, out.dz2_du = yf[izz], yf[izz + 1]
    if iq is not None:
        out.quad_uu = yf[iq]
    if iqv is not None:
        out.quad_uv = yf[iqv]
    if t_eval is not None and sol is not None:
        out.xs = sol.t
        out.u_samples = sol.y[0]
        out.du_samples = sol.y[1]
    return out


def integrate(
    p: Potential,
    z,
    x0: float,
    x1: float,
    init,
    tol: float = 1e-10,
    truncation: float | None = None,
) -> StateVector:
    """Propagate a state of u'' = (V - z) u from x0 to x1.

    init may be a StateVector or any (u, u') pair.  Backward spans
    (x1 < x0) are allowed.
    """
    pair = (init.u, init.du) if isinstance(init, StateVector) else (init[0], init[1])
    res = integrate_joint(p, z, x0, x1, pair, tol=tol, truncation=truncation)
    return StateVector(res.u, res.du)


def transfer_matrix(
    p: Potential,
    z,
    x0: float,
    x1: float,
    tol: float = 1e-10,
    truncation: float | None = None,
) -> TransferMatrix:
    """Transfer matrix of u'' = (V - z) u over [x0, x1], both columns in one solve."""
    res = integrate_joint(
        p, z, x0, x1, (1.0, 0.0), v_init=(0.0, 1.0), tol=tol, truncation=truncation
    )
    m = np.array([[res.u, res.v], [res.du, res.dv]], dtype=complex)
    return TransferMatrix(m, x0, x1, complex(z))


def integrate_variational(
    p: Potential,
    z,
    x0: float,
    x1: float,
    init: VariationalState,
    tol: float = 1e-10,
    truncation: float | None = None,
) -> VariationalState:
    """Propagate u together with d/dz u and d^2/dz^2 u in one joint solve."""
    res = integrate_joint(
        p,
        z,
        x0,
        x1,
        (init.u, init.du),
        order=2,
        tol=tol,
        truncation=truncation,
        dz_init=(init.dz_u, init.dz_du),
        dz2_init=(init.dz2_u, init.dz2_du),
    )
    return VariationalState(res.u, res.du, res.dz_u, res.dz_du, res.dz2_u, res.dz2_du)


def wronskian(a: StateVector, b: StateVector) -> complex:
    """u_a v'_b - u'_a v_b; constant in x for two solutions at the same z."""
    return a.u * b.du - a.du * b.u
