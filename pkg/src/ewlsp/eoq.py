"""Single-commodity closed forms.

The stationary cost function C(T) = K/T + H*T is strictly convex with unique
minimizer sqrt(K/H); under an interval cap the optimum clips to the cap. The
scaling identity C(a*T) + C(T/a) = (a^2+1)/a * C(T) holds for every T > 0
since both the K/T and H*T parts pick up the same (a + 1/a) factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import Instance


@dataclass(frozen=True)
class EoqSolution:
    interval_T: float
    cost_rate: float
    binding: bool


def _check_positive(**kwargs: float) -> None:
    for name, value in kwargs.items():
        if not (math.isfinite(value) and value > 0):
            raise ValueError(f"{name} must be finite and > 0, got {value!r}")


def cost(K: float, H: float, T: float) -> float:
    return K / T + H * T


def optimal_interval(K: float, H: float) -> EoqSolution:
    """Unconstrained optimum: T = sqrt(K/H), cost 2*sqrt(K*H)."""
    _check_positive(K=K, H=H)
    T = math.sqrt(K / H)
    return EoqSolution(interval_T=T, cost_rate=cost(K, H, T), binding=False)


def constrained_interval(K: float, H: float, T_max: float) -> EoqSolution:
    """Optimum under an interval cap; convexity makes the clipped point optimal."""
    _check_positive(K=K, H=H, T_max=T_max)
    T_star = math.sqrt(K / H)
    binding = T_max < T_star
    T = T_max if binding else T_star
    return EoqSolution(interval_T=T, cost_rate=cost(K, H, T), binding=binding)


def cost_identity_check(K: float, H: float, T: float, alpha: float) -> tuple[float, float]:
    """Both sides of C(a*T) + C(T/a) = (a^2+1)/a * C(T); returned rather than
    asserted so tests can probe the identity and the max{a, 1/a} bound."""
    _check_positive(K=K, H=H, T=T, alpha=alpha)
    lhs = cost(K, H, alpha * T) + cost(K, H, T / alpha)
    rhs = (alpha * alpha + 1.0) / alpha * cost(K, H, T)
    return lhs, rhs


def capped_interval(K: float, H: float, V: float, gamma: float) -> float:
    """Best stationary interval for one commodity alone in the warehouse:
    min(sqrt(K/H), V/gamma)."""
    _check_positive(K=K, H=H, V=V, gamma=gamma)
    return min(math.sqrt(K / H), V / gamma)


def compute_M(instance: Instance) -> float:
    """Sum over commodities of the capacity-constrained stationary cost;
    calibrates the cycle-length search range of the alignment DP."""
    total = 0.0
    for c in instance.commodities:
        T = capped_interval(c.K, c.H, instance.V, c.gamma)
        total += cost(c.K, c.H, T)
    return total
