"""OND control family, the reference PD law, and analytic diagnostics.

The regularized OND law on the error state ``(e1, e2)`` is

    u = -k e1 - |e2| e2 / (|e1| + mu)

and the energy ``V = k e1**2 / 2 + e2**2 / 2`` decays at the rate
``-|e2|**3 / (|e1| + mu)`` along its closed loop with a double integrator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, SingularityError
from .plants import sign

DEFAULT_MU = 1e-4


class ErrorState(NamedTuple):
    e1: float
    e2: float


@dataclass(frozen=True)
class OndGains:
    """Gains of the OND family.

    ``tau`` and ``Kg`` are only used by the scaled variant; ``S`` bounds the
    total commanded acceleration when set.
    """

    k: float
    mu: float = DEFAULT_MU
    tau: float | None = None
    Kg: float | None = None
    S: float | None = None

    def __post_init__(self):
        if not self.k > 0:
            raise ConfigurationError(f"OND gain k must be > 0, got {self.k}")
        if self.mu < 0:
            raise ConfigurationError(f"mu must be >= 0, got {self.mu}")
        if self.mu >= 1e-2 * self.k:
            warnings.warn(f"mu={self.mu} is not much smaller than k={self.k}", stacklevel=2)
        if self.S is not None and not self.S > 0:
            raise ConfigurationError("saturation bound S must be > 0")

    def require_scaling(self):
        if not (self.tau and self.tau > 0 and self.Kg and self.Kg > 0):
            raise ConfigurationError("scaled OND needs tau > 0 and Kg > 0")


@dataclass(frozen=True)
class PdGains:
    gamma: float
    tau: float
    S: float | None = None

    def __post_init__(self):
        if not (self.gamma > 0 and self.tau > 0):
            raise ConfigurationError(f"PD needs gamma > 0 and tau > 0, got {self}")


def ond_raw(x1: float, x2: float, k: float) -> float:
    """Unregularized OND law; undefined on the x2-axis."""
    if x1 == 0.0:
        if x2 == 0.0:
            return 0.0
        raise SingularityError(x1, x2)
    return -k * x1 - x2 * x2 * sign(x2) / abs(x1)


def ond_regularized(err: ErrorState, g: OndGains) -> float:
    e1, e2 = err
    return -g.k * e1 - abs(e2) * e2 / (abs(e1) + g.mu)


def ond_scaled(err: ErrorState, x2: float, g: OndGains) -> float:
    """OND for the lag motor: proportional part, damping scaled by ``tau/K``,
    plus compensation ``x2 / K`` of the plant's own viscous damping."""
    g.require_scaling()
    e1, e2 = err
    damping = -(g.tau / g.Kg) * abs(e2) * e2 / (abs(e1) + g.mu)
    return -g.k * e1 + damping + x2 / g.Kg


def pd_control(r: float, x1: float, x2: float, g: PdGains) -> float:
    return g.gamma * (r - x1) - g.gamma * g.tau * x2


def saturate(u: float, S: float | None) -> float:
    if S is None:
        return u
    return min(max(u, -S), S)


def lyapunov_energy(err: ErrorState, k: float) -> float:
    e1, e2 = err
    return 0.5 * k * e1 * e1 + 0.5 * e2 * e2


def lyapunov_rate(err: ErrorState, mu: float) -> float:
    e1, e2 = err
    return -abs(e2) * e2 * e2 / (abs(e1) + mu)


def convergence_form(err: ErrorState, k: float, mu: float) -> float:
    """Closed-form contraction certificate ``-(3/4)|e2| e2^2 (|e1|+2mu)/(e1+mu sign e1)^2``.

    The denominator is evaluated as ``(|e1| + mu)**2``, which is the same
    value for ``e1 != 0`` and its continuous extension at ``e1 = 0``.
    ``k`` drops out of the expression; it is kept for a uniform signature.
    """
    e1, e2 = err
    return -0.75 * abs(e2) * e2 * e2 * (abs(e1) + 2.0 * mu) / (abs(e1) + mu) ** 2


def jacobian_quadratic_form(err: ErrorState, k: float, mu: float) -> float:
    """``x^T J x`` computed from the Jacobian of the regularized error dynamics
    with ``P = diag(k, 1) / 2``.

    Evaluates to ``-(1/2)|e2| e2^2 (|e1|+2mu)/(|e1|+mu)^2``: the same sign and
    zero set as :func:`convergence_form`, with coefficient 1/2 instead of 3/4.
    """
    e1, e2 = err
    d = abs(e1) + mu
    df_de1 = -k + abs(e2) * e2 * sign(e1) / (d * d)
    df_de2 = -2.0 * abs(e2) / d
    # x^T J x = x^T P A x for symmetric P
    ax1 = e2
    ax2 = df_de1 * e1 + df_de2 * e2
    return 0.5 * (k * e1 * ax1 + e2 * ax2)


def attractor_residual(x1: float, x2: float, k: float) -> float:
    return x2 + math.sqrt(k) * x1


def raw_ond_solution(x10: float, x20: float, k: float, t):
    """Closed-form ``x1(t)`` of the double integrator under :func:`ond_raw`.

    With ``s = -x2 / x1`` the loop reduces to ``s' = k`` while approaching
    the origin (``s >= 0``) and to ``s' = k + 2 s**2`` while moving away.
    The second phase lasts until ``s`` reaches zero at ``t*``.
    """
    if x10 == 0.0:
        raise SingularityError(x10, x20)
    t = np.asarray(t, dtype=float)
    s0 = -x20 / x10
    if s0 >= 0:
        return x10 * np.exp(-s0 * t - 0.5 * k * t * t)
    a, c = math.sqrt(2.0 * k), math.sqrt(0.5 * k)
    t_star = math.atan(-s0 / c) / a
    base = -0.5 * math.log(math.cos(a * t_star))
    early = t < t_star
    log_x = np.where(
        early,
        0.5 * np.log(np.cos(a * (np.minimum(t, t_star) - t_star))) + base,
        base - 0.5 * k * (t - t_star) ** 2,
    )
    return x10 * np.exp(log_x)


CONTROLLER_KINDS = ("ond-raw", "ond-regularized", "ond-scaled", "pd")


@dataclass(frozen=True)
class ControllerSpec:
    """Tagged controller description used by the simulation engine."""

    kind: str
    ond: OndGains | None = None
    pd: PdGains | None = None

    def __post_init__(self):
        if self.kind not in CONTROLLER_KINDS:
            raise ConfigurationError(f"unknown controller kind {self.kind!r}")
        if self.kind == "pd" and self.pd is None:
            raise ConfigurationError("pd controller needs PdGains")
        if self.kind != "pd" and self.ond is None:
            raise ConfigurationError(f"{self.kind} controller needs OndGains")
        if self.kind == "ond-scaled":
            self.ond.require_scaling()

    @classmethod
    def ond_regularized(cls, k, mu=DEFAULT_MU, S=None):
        return cls("ond-regularized", ond=OndGains(k=k, mu=mu, S=S))

    @classmethod
    def ond_raw(cls, k, S=None):
        return cls("ond-raw", ond=OndGains(k=k, mu=0.0, S=S))

    @classmethod
    def ond_scaled(cls, k, tau, Kg, mu=DEFAULT_MU, S=None):
        return cls("ond-scaled", ond=OndGains(k=k, mu=mu, tau=tau, Kg=Kg, S=S))

    @classmethod
    def pd_law(cls, gamma, tau, S=None):
        return cls("pd", pd=PdGains(gamma=gamma, tau=tau, S=S))

    @property
    def bound(self) -> float | None:
        return self.pd.S if self.kind == "pd" else self.ond.S

    @property
    def diag_gain(self) -> float:
        """Proportional gain used for the energy diagnostics."""
        return self.pd.gamma if self.kind == "pd" else self.ond.k

    @property
    def diag_mu(self) -> float:
        return DEFAULT_MU if self.kind == "pd" else (self.ond.mu or DEFAULT_MU)

    def command(self, r: float, r_dot: float, x1: float, v: float) -> float:
        """Unsaturated control from the measured position ``x1`` and velocity ``v``."""
        kind = self.kind
        if kind == "pd":
            return pd_control(r, x1, v, self.pd)
        e = ErrorState(x1 - r, v - r_dot)
        if kind == "ond-regularized":
            return ond_regularized(e, self.ond)
        if kind == "ond-scaled":
            return ond_scaled(e, v, self.ond)
        return ond_raw(e.e1, e.e2, self.ond.k)
