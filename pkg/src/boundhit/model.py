"""Model definition layer.

Parameters and coefficient functions for a diffusion X on [0,1] whose drift is
steered by a decaying drive variable Z, optionally with the solution field fed
back into the drive (mean-field variant):

    dX = (2*delta*Z + 1 - delta - X) dt + c*sqrt(X(1-X)) dB
    dZ = -2*delta*R*((2*delta/(1-delta))*Z + 1) * Z * omega dt

with omega = 1 for the plain model or omega = omega(V(X,Z)) for the feedback
model. The statistic of interest is V(x,z) = E[f(Z_tau) exp(-eta*tau)] over
paths started at (x,z), tau the first time X reaches 1.

Everything here is a pure function of its arguments; shared read-only use from
any number of workers is safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Model constants.

    Args:
        delta: drive amplitude, in (0,1).
        c: noise intensity, > 0.
        R: relaxation rate of the drive variable, > 0.
        eta: discount rate, >= 0.

    The boundedness conditions 2*(1-delta) > c**2 and 2*delta > c**2 keep the
    state inside [0,1] (only the upper boundary is reachable, and only while
    the drive is large enough).
    """

    delta: float = 0.5
    c: float = 0.4
    R: float = 0.2
    eta: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0,1), got {self.delta}")
        if not self.c > 0.0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.R > 0.0:
            raise ValueError(f"R must be positive, got {self.R}")
        if self.eta < 0.0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        csq = self.c * self.c
        if not 2.0 * (1.0 - self.delta) > csq:
            raise ValueError(
                f"need 2*(1-delta) > c^2 for boundedness, got "
                f"2*{1.0 - self.delta} <= {csq}"
            )
        if not 2.0 * self.delta > csq:
            raise ValueError(
                f"need 2*delta > c^2 for boundedness, got 2*{self.delta} <= {csq}"
            )

    @property
    def beta(self) -> float:
        """Quadratic coefficient 2*delta/(1-delta) in the drive decay."""
        return 2.0 * self.delta / (1.0 - self.delta)


_OMEGA_KINDS = ("linear", "tanh", "shifted_tanh")


@dataclass(frozen=True)
class OmegaSpec:
    """Feedback nonlinearity applied to the drive decay.

    kind "linear" is the constant 1 (no feedback); "tanh" is
    0.5*(1 + tanh(v/kappa)); "shifted_tanh" is 0.5*(1 + tanh((v - 0.5)/kappa))
    with its transition at v = 0.5. kappa > 0 sets the transition sharpness.
    """

    kind: str = "linear"
    kappa: float = 0.5

    def __post_init__(self):
        if self.kind not in _OMEGA_KINDS:
            raise ValueError(f"unknown omega kind {self.kind!r}; expected one of {_OMEGA_KINDS}")
        if self.kind != "linear" and not self.kappa > 0.0:
            raise ValueError(f"kappa must be positive for kind {self.kind!r}, got {self.kappa}")


_BOUNDARY_KINDS = ("f1", "f2", "f3", "tabulated")


@dataclass(frozen=True)
class BoundarySpec:
    """Payoff data f(z) imposed where the state reaches the upper boundary.

    f1 is the constant 1 (V then measures the hitting probability when
    eta = 0). f2 is a ramp clipped to [0,1] that vanishes at the threshold
    rho; it is Lipschitz but has a kink there. f3 is the squared positive
    part of the same ramp argument, so it vanishes at rho with zero slope.
    "tabulated" interpolates user data piecewise-linearly and clamps outside
    its knots.
    """

    kind: str = "f1"
    knots_z: tuple[float, ...] = field(default=())
    knots_f: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in _BOUNDARY_KINDS:
            raise ValueError(
                f"unknown boundary kind {self.kind!r}; expected one of {_BOUNDARY_KINDS}"
            )
        if self.kind == "tabulated":
            if len(self.knots_z) < 2 or len(self.knots_z) != len(self.knots_f):
                raise ValueError("tabulated boundary data needs matching z/f knots, >= 2 points")
            if any(b <= a for a, b in zip(self.knots_z, self.knots_z[1:])):
                raise ValueError("tabulated z knots must be strictly increasing")


def rho(params: ModelParams) -> float:
    """Drive threshold below which the upper boundary is unreachable.

    Returns 1/2 - c^2/(4*delta), guaranteed to lie in (0, 1/2) under the
    parameter invariants.
    """
    return 0.5 - params.c * params.c / (4.0 * params.delta)


def drift(x: float, z: float, params: ModelParams, omega_value: float = 1.0) -> tuple[float, float]:
    """Drift vector (dx, dz) of the coupled system.

    dz is always <= 0 and vanishes only at z = 0; omega_value scales the
    drive decay (pass 1.0 for the plain model).
    """
    dx = 2.0 * params.delta * z + 1.0 - params.delta - x
    dz = -2.0 * params.delta * params.R * (params.beta * z + 1.0) * z * omega_value
    return dx, dz


def diffusion(x: float, params: ModelParams) -> float:
    """Noise coefficient c*sqrt(x(1-x)), clamped to 0 outside [0,1].

    The clamp lets the same formula serve path simulation, where the Euler
    iterate can momentarily leave [0,1].
    """
    return params.c * math.sqrt(max(0.0, x * (1.0 - x)))


def omega_eval(spec: OmegaSpec, v: float) -> float:
    """Evaluate the feedback nonlinearity at field value v."""
    if spec.kind == "linear":
        return 1.0
    if spec.kind == "tanh":
        return 0.5 * (1.0 + math.tanh(v / spec.kappa))
    return 0.5 * (1.0 + math.tanh((v - 0.5) / spec.kappa))


def omega_bar(spec: OmegaSpec, v_center: float, v_below: float) -> float:
    """Upwind-selected nonlinearity value for the drive-derivative term.

    Returns omega(v_center) when v_center >= v_below and omega(v_below)
    otherwise; in particular omega_bar(v, v) == omega_eval(v) exactly.
    """
    if v_center >= v_below:
        return omega_eval(spec, v_center)
    return omega_eval(spec, v_below)


def boundary_f(spec: BoundarySpec, z: float, params: ModelParams) -> float:
    """Evaluate the boundary payoff at drive value z in [0,1]."""
    if not 0.0 <= z <= 1.0:
        raise ValueError(f"boundary data is defined on [0,1], got z={z}")
    if spec.kind == "f1":
        return 1.0
    if spec.kind == "tabulated":
        return float(np.interp(z, spec.knots_z, spec.knots_f))
    # ramp argument vanishing exactly at z = rho
    arg = 2.0 * params.delta * z - params.delta + 0.5 * params.c * params.c
    if spec.kind == "f2":
        return min(1.0, max(0.0, 10.0 * arg))
    return max(arg, 0.0) ** 2


def fichera(
    x: float,
    z: float,
    inward_normal: tuple[float, float],
    params: ModelParams,
) -> tuple[float, bool]:
    """Boundary classifier: where must the payoff condition be imposed?

    For a degenerate-elliptic operator whose diffusion vanishes in the normal
    direction, the sign of (b - div a) . n at a boundary point (n the unit
    inward normal) decides whether boundary data is required there: negative
    means the characteristics leave the domain and a condition is needed.

    Returns (value, needs_bc). On the edge x = 1 the sign flips exactly at
    z = rho; the other three edges never require data.
    """
    on_boundary = x == 0.0 or x == 1.0 or z == 0.0 or z == 1.0
    if not on_boundary:
        raise ValueError(f"({x}, {z}) is not on the boundary of the unit square")
    n1, n2 = inward_normal
    bx = 2.0 * params.delta * z + 1.0 - params.delta - x - 0.5 * params.c * params.c * (1.0 - 2.0 * x)
    bz = -2.0 * params.delta * params.R * (params.beta * z + 1.0) * z
    value = bx * n1 + bz * n2
    return value, value < 0.0


def exact_Z(t: float, z0: float, params: ModelParams) -> float:
    """Closed-form drive trajectory from z0 at time t.

    Solves dZ/dt = -alpha*Z*(beta*Z + 1) with alpha = 2*delta*R (obtained by
    substituting W = 1/Z, which turns the equation into a linear one):

        Z(t) = z0*exp(-alpha*t) / (1 + beta*z0*(1 - exp(-alpha*t)))

    Nonincreasing in t with limit 0.
    """
    if t < 0.0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if not 0.0 <= z0 <= 1.0:
        raise ValueError(f"z0 must lie in [0,1], got {z0}")
    alpha = 2.0 * params.delta * params.R
    decay = math.exp(-alpha * t)
    return z0 * decay / (1.0 + params.beta * z0 * (1.0 - decay))
