"""Domain types and canonical serialized formats.

The model is the multi-commodity EOQ under a shared warehouse: each commodity
has unit demand rate, a fixed ordering cost K, a physical holding coefficient
2H (so a stationary policy with interval T costs K/T + H*T per unit of time),
and a space coefficient gamma. All solvers exchange policies through the
types below; `CyclicPolicy` is the universal representation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .errors import IncommensurateIntervals, SchemaError

# Relative tolerance for the per-commodity demand-conservation invariant
# (sum of order quantities over one cycle equals the cycle length).
CONSERVATION_RTOL = 1e-9


@dataclass(frozen=True)
class Commodity:
    """Per-item economics under unit demand rate."""

    id: int
    ordering_cost_K: float
    holding_rate_H: float
    space_per_unit_gamma: float

    def __post_init__(self):
        if not isinstance(self.id, int):
            raise ValueError(f"commodity id must be an integer, got {self.id!r}")
        for name, value in (
            ("K", self.ordering_cost_K),
            ("H", self.holding_rate_H),
            ("gamma", self.space_per_unit_gamma),
        ):
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"commodity {self.id}: {name} must be finite and > 0, got {value!r}")

    # Short aliases; the long field names document the units once,
    # formulas elsewhere read better with K/H/gamma.
    @property
    def K(self) -> float:
        return self.ordering_cost_K

    @property
    def H(self) -> float:
        return self.holding_rate_H

    @property
    def gamma(self) -> float:
        return self.space_per_unit_gamma

    def sosi_cost(self, T: float) -> float:
        """Long-run average cost K/T + H*T of the stationary policy with interval T."""
        return self.K / T + self.H * T


@dataclass(frozen=True)
class Instance:
    """A commodity list plus the shared warehouse capacity."""

    commodities: tuple[Commodity, ...]
    capacity_V: float

    def __post_init__(self):
        if not self.commodities:
            raise ValueError("instance needs at least one commodity")
        object.__setattr__(self, "commodities", tuple(self.commodities))
        ids = [c.id for c in self.commodities]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate commodity ids: {sorted(ids)}")
        v = self.capacity_V
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ValueError(f"capacity must be finite and > 0, got {v!r}")

    @property
    def n(self) -> int:
        return len(self.commodities)

    @property
    def V(self) -> float:
        return self.capacity_V

    def commodity(self, cid: int) -> Commodity:
        for c in self.commodities:
            if c.id == cid:
                return c
        raise KeyError(f"no commodity with id {cid}")

    def ids(self) -> list[int]:
        return [c.id for c in self.commodities]

    def degenerate_for(self, eps: float) -> bool:
        """Report (not enforce) granularity degeneracy: some commodity's
        capacity-constrained peak space falls below the (eps/n)*V granule."""
        granule = eps / self.n * self.V
        for c in self.commodities:
            t_cap = min(math.sqrt(c.K / c.H), self.V / c.gamma)
            if c.gamma * t_cap < granule:
                return True
        return False


@dataclass(frozen=True)
class SosiPolicy:
    """Stationary order sizes and stationary intervals: orders of size T_i every T_i."""

    intervals_T: Mapping[int, float]
    phases: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "intervals_T", dict(self.intervals_T))
        object.__setattr__(self, "phases", dict(self.phases))
        if not self.intervals_T:
            raise ValueError("SOSI policy needs at least one commodity")
        for cid, T in self.intervals_T.items():
            if not (math.isfinite(T) and T > 0):
                raise ValueError(f"interval for commodity {cid} must be > 0, got {T!r}")
        for cid, phi in self.phases.items():
            if cid not in self.intervals_T:
                raise ValueError(f"phase given for unknown commodity {cid}")
            if not (0 <= phi < self.intervals_T[cid]):
                raise ValueError(f"phase for commodity {cid} must lie in [0, T), got {phi!r}")

    def phase(self, cid: int) -> float:
        return self.phases.get(cid, 0.0)

    def validate_against(self, instance: Instance) -> None:
        known = set(instance.ids())
        missing = set(self.intervals_T) - known
        if missing:
            raise ValueError(f"SOSI policy references unknown commodities {sorted(missing)}")


@dataclass(frozen=True)
class CyclicPolicy:
    """Periodic schedule: per commodity, sorted (time, quantity) orders on [0, tau)."""

    cycle_length_tau: float
    schedules: Mapping[int, tuple[tuple[float, float], ...]]

    def __post_init__(self):
        tau = self.cycle_length_tau
        if not (math.isfinite(tau) and tau > 0):
            raise ValueError(f"cycle length must be > 0, got {tau!r}")
        normalized = {}
        for cid, orders in self.schedules.items():
            orders = tuple((float(t), float(q)) for t, q in orders)
            if not orders:
                raise ValueError(f"commodity {cid}: at least one order per cycle required")
            times = [t for t, _ in orders]
            if any(not (0 <= t < tau) for t in times):
                raise ValueError(f"commodity {cid}: order times must lie in [0, tau)")
            if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
                raise ValueError(f"commodity {cid}: order times must be strictly increasing")
            if any(q <= 0 for _, q in orders):
                raise ValueError(f"commodity {cid}: order quantities must be > 0")
            total = math.fsum(q for _, q in orders)
            if abs(total - tau) > CONSERVATION_RTOL * max(abs(tau), 1.0):
                raise ValueError(
                    f"commodity {cid}: quantities sum to {total!r}, expected cycle length {tau!r}"
                )
            normalized[cid] = orders
        object.__setattr__(self, "schedules", normalized)

    @property
    def tau(self) -> float:
        return self.cycle_length_tau

    def order_count(self, cid: int) -> int:
        return len(self.schedules[cid])

    def scaled(self, factor: float) -> "CyclicPolicy":
        """Uniformly scale all times and quantities; peak space scales by `factor`."""
        if factor <= 0:
            raise ValueError("scale factor must be > 0")
        return CyclicPolicy(
            cycle_length_tau=self.tau * factor,
            schedules={
                cid: tuple((t * factor, q * factor) for t, q in orders)
                for cid, orders in self.schedules.items()
            },
        )

    def restricted_to(self, ids: Sequence[int]) -> "CyclicPolicy":
        keep = {cid: self.schedules[cid] for cid in ids}
        return CyclicPolicy(self.tau, keep)


@dataclass(frozen=True)
class RandomizedPolicy:
    """A deterministic seed->policy sampler plus provenance metadata."""

    sampler: Callable[[int], CyclicPolicy]
    description: str = ""

    def sample(self, seed: int) -> CyclicPolicy:
        return self.sampler(seed)


def _as_fraction(x: float, max_denominator: int = 10**12) -> Fraction | None:
    """Rational snap of a float; None when no denominator <= bound reproduces it."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    frac = Fraction(x).limit_denominator(max_denominator)
    if abs(float(frac) - x) <= 1e-12 * max(abs(x), 1.0):
        return frac
    return None


def _joint_cycle(fracs: dict[int, Fraction]) -> tuple[Fraction, int]:
    tau = Fraction(0)
    for f in fracs.values():
        tau = f if tau == 0 else _lcm_fraction(tau, f)
    return tau, sum(int(tau / f) for f in fracs.values())


def sosi_to_cyclic(
    policy: SosiPolicy,
    instance: Instance,
    horizon: float | None = None,
    max_orders: int = 2_000_000,
) -> CyclicPolicy:
    """Expand a SOSI policy into its joint cyclic schedule.

    Exact mode (default): the cycle is the least common integer multiple of
    all intervals, found through rational snapping; raises
    IncommensurateIntervals when none exists below `max_orders` total orders.
    Approximate mode: `horizon` is used as the cycle, and each commodity's
    last quantity is clipped so the schedule stays conservation-consistent.
    """
    policy.validate_against(instance)
    items = sorted(policy.intervals_T.items())
    if horizon is None:
        # Two rationalizations are tried whole-policy: denominator-limited
        # snapping (canonicalizes decimal-entered values like 1/3) and the
        # exact binary expansion (keeps shared-mantissa families, e.g.
        # power-of-two grids, commensurable). Either must fit the order cap.
        candidates: list[dict[int, Fraction]] = []
        snapped = {cid: _as_fraction(T) for cid, T in items}
        if all(f is not None and f > 0 for f in snapped.values()):
            candidates.append(snapped)
        candidates.append({cid: Fraction(float(T)) for cid, T in items})
        fracs = None
        tau = Fraction(0)
        total_orders = 0
        for cand in candidates:
            tau, total_orders = _joint_cycle(cand)
            if total_orders <= max_orders:
                fracs = cand
                break
        if fracs is None:
            raise IncommensurateIntervals(
                f"joint cycle needs {total_orders} orders (> {max_orders})"
            )
        schedules = {}
        for cid, f in fracs.items():
            m = int(tau / f)
            phi = _as_fraction(policy.phase(cid)) or Fraction(policy.phase(cid))
            times = sorted((phi + k * f) % tau for k in range(m))
            schedules[cid] = tuple((float(t), float(f)) for t in times)
        return CyclicPolicy(float(tau), schedules)

    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    schedules = {}
    for cid, T in items:
        phi = policy.phase(cid)
        times = []
        t = phi
        while t < horizon - 1e-15 * horizon:
            times.append(t)
            t += T
        if not times:
            times = [phi % horizon]
        orders = [(t, T) for t in times]
        covered = math.fsum(q for _, q in orders)
        orders[-1] = (orders[-1][0], orders[-1][1] + (horizon - covered))
        if orders[-1][1] <= 0:
            orders.pop()
            covered = math.fsum(q for _, q in orders)
            orders[-1] = (orders[-1][0], orders[-1][1] + (horizon - covered))
        schedules[cid] = tuple(orders)
    return CyclicPolicy(float(horizon), schedules)


def _lcm_fraction(a: Fraction, b: Fraction) -> Fraction:
    return Fraction(
        math.lcm(a.numerator, b.numerator), math.gcd(a.denominator, b.denominator)
    )


# ---------------------------------------------------------------------------
# Canonical JSON formats
# ---------------------------------------------------------------------------


def parse_instance(text: bytes | str) -> Instance:
    """Parse the canonical instance JSON; SchemaError carries the field path."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"$: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise SchemaError("$: expected an object")
    if "capacity" not in raw:
        raise SchemaError("$.capacity: missing")
    if not isinstance(raw["capacity"], (int, float)) or isinstance(raw["capacity"], bool):
        raise SchemaError("$.capacity: expected a number")
    if "commodities" not in raw or not isinstance(raw["commodities"], list):
        raise SchemaError("$.commodities: expected an array")
    commodities = []
    for k, entry in enumerate(raw["commodities"]):
        path = f"$.commodities[{k}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{path}: expected an object")
        for key in ("id", "K", "H", "gamma"):
            if key not in entry:
                raise SchemaError(f"{path}.{key}: missing")
        if not isinstance(entry["id"], int) or isinstance(entry["id"], bool):
            raise SchemaError(f"{path}.id: expected an integer")
        for key in ("K", "H", "gamma"):
            if not isinstance(entry[key], (int, float)) or isinstance(entry[key], bool):
                raise SchemaError(f"{path}.{key}: expected a number")
        commodities.append(
            Commodity(
                id=entry["id"],
                ordering_cost_K=float(entry["K"]),
                holding_rate_H=float(entry["H"]),
                space_per_unit_gamma=float(entry["gamma"]),
            )
        )
    return Instance(commodities=tuple(commodities), capacity_V=float(raw["capacity"]))


def serialize_instance(instance: Instance) -> bytes:
    payload = {
        "capacity": instance.capacity_V,
        "commodities": [
            {"id": c.id, "K": c.ordering_cost_K, "H": c.holding_rate_H, "gamma": c.space_per_unit_gamma}
            for c in instance.commodities
        ],
    }
    return json.dumps(payload, sort_keys=True).encode("utf-8")


def parse_policy(text: bytes | str) -> CyclicPolicy:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"$: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise SchemaError("$: expected an object")
    if "tau" not in raw or not isinstance(raw["tau"], (int, float)):
        raise SchemaError("$.tau: expected a number")
    if "schedules" not in raw or not isinstance(raw["schedules"], dict):
        raise SchemaError("$.schedules: expected an object")
    schedules = {}
    for key, orders in raw["schedules"].items():
        path = f"$.schedules.{key}"
        try:
            cid = int(key)
        except ValueError as exc:
            raise SchemaError(f"{path}: key must be an integer id") from exc
        if not isinstance(orders, list):
            raise SchemaError(f"{path}: expected an array of [t, q] pairs")
        parsed = []
        for k, pair in enumerate(orders):
            if not (isinstance(pair, list) and len(pair) == 2):
                raise SchemaError(f"{path}[{k}]: expected a [t, q] pair")
            parsed.append((float(pair[0]), float(pair[1])))
        schedules[cid] = tuple(parsed)
    return CyclicPolicy(cycle_length_tau=float(raw["tau"]), schedules=schedules)


def serialize_policy(policy: CyclicPolicy) -> bytes:
    payload = {
        "tau": policy.tau,
        "schedules": {
            str(cid): [[t, q] for t, q in orders] for cid, orders in sorted(policy.schedules.items())
        },
    }
    return json.dumps(payload, sort_keys=True).encode("utf-8")
