"""Grid-aligned dynamic program for a handful of commodities.

Commodities are guessed into frequency classes; class q may order only on a
fine uniform grid (its plus-points) and must hit zero inventory on a coarse
uniform grid (its minus-points). Between two successive minus-points of level
q, the policy for classes >= q depends on finer classes only through an exact
inventory profile of class q-1 and a quantized lower bound on the space held
by everything at least two levels up; intervals with identical triples behave
identically, which is what the memoized recursion exploits.

Grid sizes are free parameters: the recursion is correct for any admissible
geometry, only the approximation guarantee depends on the counts. The
published counts are powers of n/eps and explode immediately, so the solver
defaults to a miniature geometry with the same divisibility structure
(level ratio M, refinement S with M | S and S | M^2). Empty guessed classes
between occupied ones are handled by descending directly to the next
occupied level while folding the skipped classes into the lower bound;
identical subintervals collapse in the memo table instead of an explicit
copy representation, which reproduces the same values with sharper bounds.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Mapping

from .eoq import compute_M
from .errors import BudgetExceeded, StateSpaceExceeded
from .evaluator import EvalReport, evaluate
from .model import CyclicPolicy, Instance

DEFAULT_PTAS_CAP = 3
DEFAULT_STATE_CAP = 10**6
ACTION_CAP = 1 << 22


def state_cap_from_env(default: int = DEFAULT_STATE_CAP) -> int:
    raw = os.environ.get("EWLSP_STATE_CAP")
    return int(raw) if raw else default


@dataclass(frozen=True)
class GridSpec:
    """Per-class grid point counts over the cycle [0, tau).

    minus_counts[q-1] and plus_counts[q-1] subdivide the cycle for class q.
    Admissibility (checked at construction): minus | plus per level, minus
    nesting and plus nesting across levels, each level's minus grid refining
    the previous level's plus grid, and each level's plus grid embedding in
    the minus grids two or more levels deeper.
    """

    tau_cycle: float
    minus_counts: tuple[int, ...]
    plus_counts: tuple[int, ...]

    def __post_init__(self):
        if self.tau_cycle <= 0:
            raise ValueError("cycle length must be > 0")
        m, p = self.minus_counts, self.plus_counts
        if len(m) != len(p) or not m:
            raise ValueError("need matching nonempty count tuples")
        for q in range(len(m)):
            if m[q] < 1 or p[q] < m[q] or p[q] % m[q]:
                raise ValueError(f"level {q + 1}: minus points must be a subset of plus points")
        for q in range(len(m) - 1):
            if m[q + 1] % m[q]:
                raise ValueError(f"levels {q + 1},{q + 2}: minus grids must nest")
            if p[q] % m[q + 1]:
                raise ValueError(f"level {q + 2} minus grid must refine level {q + 1} plus grid")
            if p[q + 1] % p[q]:
                raise ValueError(f"levels {q + 1},{q + 2}: plus grids must nest")
            for deeper in range(q + 2, len(m)):
                if m[deeper] % p[q]:
                    raise ValueError(
                        f"level {q + 1} plus grid must embed in level {deeper + 1} minus grid"
                    )

    @staticmethod
    def desk(tau: float, levels: int, M: int = 4, S: int = 8) -> "GridSpec":
        """Miniature geometry: minus = M^(q-1), plus = S * M^(q-1)."""
        if S % M or (M * M) % S:
            raise ValueError("need M | S and S | M^2")
        return GridSpec(
            tau_cycle=tau,
            minus_counts=tuple(M**q for q in range(levels)),
            plus_counts=tuple(S * M**q for q in range(levels)),
        )

    @staticmethod
    def paper(tau: float, levels: int, n: int, eps: float) -> "GridSpec":
        """Published counts with integer base max(2, round(n/eps))."""
        b = max(2, round(n / eps))
        minus = tuple(max(1, b ** (3 * (q + 1) - 4)) for q in range(levels))
        plus = tuple(b ** (3 * (q + 1) + 1) for q in range(levels))
        return GridSpec(tau_cycle=tau, minus_counts=minus, plus_counts=plus)


@dataclass(frozen=True)
class DpState:
    """Memo key. `profile` holds, per previous-level commodity, its order
    bits at the interval's x-points plus the grid distance from the exit to
    its next order; everything is relative to the interval entry, so sibling
    intervals with equal statistics share one entry."""

    level: int
    profile: tuple
    lb_units: int


@dataclass(frozen=True)
class Guess:
    tau: float
    assignment: Mapping[int, int]  # commodity id -> guessed class (1-based)

    def __post_init__(self):
        object.__setattr__(self, "assignment", dict(self.assignment))


def enumerate_guesses(instance: Instance, eps: float, budget: int = 100_000) -> list[Guess]:
    """Geometric cycle-length grid over the constrained-cost range, crossed
    with all class assignments; deterministic ordering throughout."""
    n = instance.n
    M_const = compute_M(instance)
    k_max = max(c.K for c in instance.commodities)
    k_min = min(c.K for c in instance.commodities)
    h_min = min(c.H for c in instance.commodities)
    lo = k_max / (2.0 * eps * n * M_const)
    hi = max(lo, 2.0 * n * M_const / (eps * eps * h_min))
    taus = [lo]
    while taus[-1] < hi:
        taus.append(min(taus[-1] * (1.0 + eps), hi))
    u_count = 4.0 * n * n * M_const * M_const / (eps * eps * k_min * h_min)
    q_levels = max(1, math.ceil(math.log(u_count) / math.log((n / eps) ** 3)))
    total = len(taus) * q_levels**n
    if total > budget:
        raise BudgetExceeded(total, budget)
    ids = sorted(instance.ids())
    return [
        Guess(tau=tau, assignment=dict(zip(ids, combo)))
        for tau in taus
        for combo in itertools.product(range(1, q_levels + 1), repeat=n)
    ]


class _DpSolver:
    """One (guess, grid) dynamic program over translation-invariant states."""

    def __init__(self, instance: Instance, guess: Guess, eps: float, grid: GridSpec, state_cap: int):
        self.instance = instance
        self.eps = eps
        self.grid = grid
        self.state_cap = state_cap
        self.tau = grid.tau_cycle
        occupied = sorted(set(guess.assignment.values()))
        if occupied[-1] > len(grid.minus_counts):
            raise ValueError("grid does not cover the deepest guessed class")
        self.levels = occupied
        self.ids_at = [
            sorted(i for i, q in guess.assignment.items() if q == lvl) for lvl in occupied
        ]
        self.F = grid.plus_counts[occupied[-1] - 1]
        self.unit = self.tau / self.F
        self.minus = [grid.minus_counts[q - 1] for q in occupied]
        self.plus = [grid.plus_counts[q - 1] for q in occupied]
        self.space_bound = (1.0 + eps) * instance.V * (1.0 + 1e-12)
        self.granule = eps * instance.V / instance.n
        self.memo: dict[DpState, tuple[float | None, tuple | None]] = {}
        self._action_cache: dict[int, list] = {}

    # -- geometry -----------------------------------------------------------

    def interval_len(self, j: int) -> int:
        return self.F // self.minus[j]

    def slot_step(self, j: int) -> int:
        return self.F // self.plus[j]

    def slots(self, j: int) -> int:
        return self.plus[j] // self.minus[j]

    # -- action table ---------------------------------------------------------

    def _actions(self, j: int) -> list[tuple[tuple[int, ...], float, tuple[float, ...], int]]:
        """All single-commodity order patterns over one level-j interval:
        (slot indices incl. the mandatory entry order, holding integral in
        time^2, inventory at each slot point in time, order count)."""
        if j in self._action_cache:
            return self._action_cache[j]
        S = self.slots(j)
        step_t = self.slot_step(j) * self.unit
        out = []
        for mask in range(1 << (S - 1)):
            slots = [0] + [s for s in range(1, S) if mask >> (s - 1) & 1]
            nxt = slots[1:] + [S]
            hold = 0.0
            for a, b in zip(slots, nxt):
                d = (b - a) * step_t
                hold += 0.5 * d * d
            levels = []
            k = 0
            for s in range(S):
                while k + 1 < len(slots) and slots[k + 1] <= s:
                    k += 1
                levels.append((nxt[k] - s) * step_t)
            out.append((tuple(slots), hold, tuple(levels), len(slots)))
        self._action_cache[j] = out
        return out

    # -- profile decoding -------------------------------------------------------

    def _profile_next_orders(self, j: int, profile: tuple) -> list[tuple[int, list[int]]]:
        """Per previous-level commodity: position (F units from entry) of the
        first order strictly after each of its x-points."""
        if not profile:
            return []
        prev_ids = self.ids_at[j - 1]
        xstep = self.slot_step(j - 1)
        R = self.interval_len(j) // xstep
        out = []
        for cid, (bits, after) in zip(prev_ids, profile):
            positions = [0] * R
            nxt = (R + after) * xstep
            for r in range(R - 1, -1, -1):
                if r + 1 < R and bits[r + 1]:
                    nxt = (r + 1) * xstep
                positions[r] = nxt
            out.append((cid, positions))
        return out

    def _level_before(self, positions: list[int], xstep: int, at: int) -> float:
        """Inventory (time units) just before position `at` > 0 (F units)."""
        rr = at // xstep
        if at % xstep == 0:
            if positions[rr - 1] == at:
                return 0.0
            nxt = positions[rr] if rr < len(positions) else positions[-1]
        else:
            nxt = positions[rr]
        return (nxt - at) * self.unit

    # -- recursion ----------------------------------------------------------------

    def solve(self) -> tuple[float, CyclicPolicy] | None:
        top = DpState(level=0, profile=(), lb_units=0)
        cost = self._value(top)
        if cost is None:
            return None
        copies = self.minus[0]
        orders: dict[int, list[tuple[int, int]]] = {i: [] for ids in self.ids_at for i in ids}
        for m in range(copies):
            self._materialize(top, m * self.interval_len(0), orders)
        schedules = {}
        for cid, lst in orders.items():
            lst.sort()
            schedules[cid] = tuple((pos * self.unit, q * self.unit) for pos, q in lst)
        policy = CyclicPolicy(cycle_length_tau=self.tau, schedules=schedules)
        return copies * cost / self.tau, policy

    def _value(self, state: DpState) -> float | None:
        if state in self.memo:
            return self.memo[state][0]
        if len(self.memo) >= self.state_cap:
            raise StateSpaceExceeded(f"memo grew past {self.state_cap} states")
        self.memo[state] = (None, None)  # occupy the slot; overwritten below
        j = state.level
        ids = self.ids_at[j]
        S = self.slots(j)
        if (1 << ((S - 1) * len(ids))) > ACTION_CAP:
            raise StateSpaceExceeded(f"action space 2^{(S - 1) * len(ids)} at level {j}")
        actions = self._actions(j)
        prev_orders = self._profile_next_orders(j, state.profile)
        lb_space = state.lb_units * self.granule

        # Space held by the previous class at each of this interval's slots.
        prev_space = [lb_space] * S
        if prev_orders:
            xstep = self.slot_step(j - 1)
            my_step = self.slot_step(j)
            for cid, positions in prev_orders:
                gamma = self.instance.commodity(cid).gamma
                for s in range(S):
                    pos = s * my_step
                    r = pos // xstep
                    prev_space[s] += gamma * (positions[r] - pos) * self.unit

        gammas = [self.instance.commodity(i).gamma for i in ids]
        Ks = [self.instance.commodity(i).K for i in ids]
        Hs = [self.instance.commodity(i).H for i in ids]
        best: float | None = None
        best_combo = None
        for combo in itertools.product(actions, repeat=len(ids)):
            acceptable = True
            for s in range(S):
                space = prev_space[s]
                for g, act in zip(gammas, combo):
                    space += g * act[2][s]
                if space > self.space_bound:
                    acceptable = False
                    break
            if not acceptable:
                continue
            cost = 0.0
            for K, H, act in zip(Ks, Hs, combo):
                cost += K * act[3] + 2.0 * H * act[1]
            if best is not None and cost >= best:
                continue  # children only add nonnegative cost
            child_cost = self._descend(state, j, combo, prev_orders)
            if child_cost is None:
                continue
            total = cost + child_cost
            if best is None or total < best:
                best, best_combo = total, combo
        self.memo[state] = (best, best_combo)
        return best

    def _child_states(self, state: DpState, j: int, combo, prev_orders):
        """Child states over the subintervals of the next occupied level."""
        child_len = self.interval_len(j + 1)
        ratio = self.interval_len(j) // child_len
        gap_one = self.levels[j + 1] == self.levels[j] + 1
        ids = self.ids_at[j]
        my_step = self.slot_step(j)
        S = self.slots(j)
        prev_xstep = self.slot_step(j - 1) if prev_orders else 0
        children = []
        for m in range(ratio):
            entry, exit_ = m * child_len, (m + 1) * child_len
            profile = ()
            if gap_one:
                profile = tuple(self._child_profile(act[0], entry, exit_, my_step, S) for act in combo)
            fold = 0.0
            for cid, positions in prev_orders:
                gamma = self.instance.commodity(cid).gamma
                fold += gamma * self._level_before(positions, prev_xstep, exit_)
            if not gap_one:
                # this level's space folds into the bound of the skipped-to level
                for i, act in zip(ids, combo):
                    gamma = self.instance.commodity(i).gamma
                    nxt_pos = S * my_step
                    for s in act[0]:
                        if s * my_step >= exit_:
                            nxt_pos = s * my_step
                            break
                    fold += gamma * (nxt_pos - exit_) * self.unit
            lb_units = state.lb_units + int(fold / self.granule)
            children.append((entry, DpState(level=j + 1, profile=profile, lb_units=lb_units)))
        return children

    def _descend(self, state: DpState, j: int, combo, prev_orders) -> float | None:
        if j + 1 >= len(self.levels):
            return 0.0
        total = 0.0
        for _, child in self._child_states(state, j, combo, prev_orders):
            value = self._value(child)
            if value is None:
                return None
            total += value
        return total

    @staticmethod
    def _child_profile(slots: tuple[int, ...], entry: int, exit_: int, step: int, S: int):
        first = entry // step
        R = (exit_ - entry) // step
        in_slots = set(slots)
        bits = tuple(1 if (first + r) in in_slots else 0 for r in range(R))
        exit_slot = first + R
        after = None
        for s in slots:
            if s >= exit_slot:
                after = s - exit_slot
                break
        if after is None:
            after = S - exit_slot  # the next sibling's mandatory entry order
        return (bits, after)

    def _materialize(self, state: DpState, abs_entry: int, orders: dict[int, list[tuple[int, int]]]):
        value, combo = self.memo[state]
        if value is None or combo is None:
            raise RuntimeError("materializing an infeasible state")
        j = state.level
        step = self.slot_step(j)
        S = self.slots(j)
        for i, act in zip(self.ids_at[j], combo):
            slots = act[0]
            nxt = list(slots[1:]) + [S]
            for s, e in zip(slots, nxt):
                orders[i].append((abs_entry + s * step, (e - s) * step))
        if j + 1 >= len(self.levels):
            return
        prev_orders = self._profile_next_orders(j, state.profile)
        for entry, child in self._child_states(state, j, combo, prev_orders):
            self._materialize(child, abs_entry + entry, orders)


def dp_solve(
    instance: Instance,
    guess: Guess,
    eps: float,
    grid: GridSpec | None = None,
    state_cap: int | None = None,
) -> tuple[float, CyclicPolicy] | None:
    """Best grid-aligned policy (cost rate, policy) for one guess, or None
    when every action chain violates the space check."""
    levels = max(guess.assignment.values())
    if grid is None:
        grid = GridSpec.paper(guess.tau, levels, instance.n, eps)
    solver = _DpSolver(instance, guess, eps, grid, state_cap or state_cap_from_env())
    return solver.solve()


def ptas_solve(
    instance: Instance,
    eps: float,
    grid_M: int = 4,
    grid_S: int = 8,
    state_cap: int | None = None,
    guess_budget: int = 100_000,
    n_cap: int = DEFAULT_PTAS_CAP,
    details: dict | None = None,
) -> tuple[CyclicPolicy, EvalReport]:
    """Sweep all guesses with the miniature geometry, scale the winner into
    the capacity, and return it with its exact evaluation. When a dict is
    passed as `details`, the winning guess and grid are recorded in it."""
    if instance.n > n_cap:
        raise BudgetExceeded(instance.n, n_cap)
    best: tuple[float, CyclicPolicy, Guess, GridSpec] | None = None
    for guess in enumerate_guesses(instance, eps, budget=guess_budget):
        grid = GridSpec.desk(guess.tau, max(guess.assignment.values()), M=grid_M, S=grid_S)
        result = dp_solve(instance, guess, eps, grid=grid, state_cap=state_cap)
        if result is None:
            continue
        _, policy = result
        report = evaluate(policy, instance)
        if report.v_max > instance.V:
            policy = policy.scaled(instance.V / report.v_max)
            report = evaluate(policy, instance)
        if not report.feasible:
            continue
        if best is None or report.total_cost_rate < best[0]:
            best = (report.total_cost_rate, policy, guess, grid)
    if best is None:
        raise StateSpaceExceeded("no guess produced a feasible policy")
    if details is not None:
        details["guess"] = best[2]
        details["grid"] = best[3]
    return best[1], evaluate(best[1], instance)


def is_b_aligned(
    policy: CyclicPolicy, assignment: Mapping[int, int], grid: GridSpec, rtol: float = 1e-9
) -> bool:
    """Check alignment straight off the schedule: orders only on the class
    plus-grid and an order at every class minus-point (zero-inventory
    arrivals, given zero-inventory quantities)."""
    tau = policy.tau
    for cid, q in assignment.items():
        plus = grid.plus_counts[q - 1]
        minus = grid.minus_counts[q - 1]
        step = tau / plus
        times = [t for t, _ in policy.schedules[cid]]
        for t in times:
            if abs(t / step - round(t / step)) > rtol * plus:
                return False
        order_slots = {round(t / step) for t in times}
        ratio = plus // minus
        for k in range(minus):
            if k * ratio not in order_slots:
                return False
    return True
