"""Kernel functions together with the analytic constants the selectors need."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

#: tolerance of the unit-mass and zero-first-moment checks run at construction
MOMENT_TOL = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """A kernel K with integral one and the norms used by the variance terms.

    ``evaluate`` must accept ndarray input and vanish outside
    [-support_radius, support_radius]. ``l2_norm_sq`` is the squared L2 norm
    of K over the real line.
    """

    name: str
    evaluate: Callable
    support_radius: float
    l1_norm: float
    l2_norm_sq: float
    sup_norm: float

    def scaled(self, x, h: float):
        """The rescaled kernel K_h(x) = K(x / h) / h."""
        return self.evaluate(np.asarray(x, dtype=float) / h) / h


def _checked(spec: KernelSpec) -> KernelSpec:
    # Built-ins must integrate to 1 and have vanishing first moment
    # (an order-1 kernel); both are verified numerically.
    r = spec.support_radius
    if not np.isfinite(r) or r <= 0:
        raise ValueError("built-in kernels must have compact support")
    mass, _ = quad(spec.evaluate, -r, r)
    first, _ = quad(lambda u: u * spec.evaluate(u), -r, r)
    if abs(mass - 1.0) > MOMENT_TOL:
        raise ValueError(f"kernel {spec.name!r}: integral {mass} differs from 1")
    if abs(first) > MOMENT_TOL:
        raise ValueError(f"kernel {spec.name!r}: first moment {first} differs from 0")
    return spec


def _epanechnikov_eval(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def _uniform_eval(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.5, 0.0)


def _biweight_eval(u):
    u = np.asarray(u, dtype=float)
    sq = 1.0 - u * u
    return np.where(np.abs(u) <= 1.0, 0.9375 * sq * sq, 0.0)


def epanechnikov() -> KernelSpec:
    """The parabolic kernel K(u) = (3/4)(1 - u^2) on [-1, 1]."""
    return _checked(
        KernelSpec(
            name="epanechnikov",
            evaluate=_epanechnikov_eval,
            support_radius=1.0,
            l1_norm=1.0,
            l2_norm_sq=0.6,
            sup_norm=0.75,
        )
    )


def uniform() -> KernelSpec:
    """The box kernel K(u) = 1/2 on [-1, 1]."""
    return _checked(
        KernelSpec(
            name="uniform",
            evaluate=_uniform_eval,
            support_radius=1.0,
            l1_norm=1.0,
            l2_norm_sq=0.5,
            sup_norm=0.5,
        )
    )


def biweight() -> KernelSpec:
    """The quartic kernel K(u) = (15/16)(1 - u^2)^2 on [-1, 1]."""
    return _checked(
        KernelSpec(
            name="biweight",
            evaluate=_biweight_eval,
            support_radius=1.0,
            l1_norm=1.0,
            l2_norm_sq=5.0 / 7.0,
            sup_norm=0.9375,
        )
    )


_BUILTINS = {
    "epanechnikov": epanechnikov,
    "uniform": uniform,
    "biweight": biweight,
}


def kernel_by_name(name: str) -> KernelSpec:
    """Look up a built-in kernel; raises KeyError with the known names."""
    try:
        factory = _BUILTINS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown kernel {name!r}; choose from {sorted(_BUILTINS)}") from None
    return factory()
