"""Randomized sub-2 pipeline: volume classes, sparse/dense split, per-class
policies, power-of-2 synchronization, and the final scale-down.

The chain is driven by a concrete capacity-feasible reference policy standing
in for the existential near-optimal cyclic policy: the classic scale-down
solution with intervals snapped onto a shared power-of-two grid. Every
quantity the original scheme obtains by enumeration (class memberships, class
sizes, per-class average space) is read off that reference instead, keeping
all the lemma-level inequalities checkable while making the pipeline runnable
at desk scale. An exhaustive mode that enumerates class-type labelings is
kept for instances with very few nonempty classes.

The output is a union of cyclic blocks over disjoint commodity subsets.
Blocks produced by different random draws are mutually incommensurable in
general, so the union's peak is certified by the sum of exact per-block
peaks, which is precisely the accounting the analysis itself uses and is
conservative for feasibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Hashable, Mapping, Sequence

import numpy as np

from . import ptas
from .couples import CoupleInput, classify_pairs, synthesize_couple
from .errors import BudgetExceeded, InfeasibleMatching, StateSpaceExceeded
from .evaluator import EvalReport, combine_reports, evaluate, evaluate_sosi
from .matching import (
    INF_CLASS,
    MatchingInstance,
    MimickingPartition,
    edge_weight,
    solve_b_matching,
)
from .model import CyclicPolicy, Instance, SosiPolicy, sosi_to_cyclic
from .po2 import PO2_MEAN_CONSTANT, po2_round
from .relaxation import solve_sosi_relaxation
from .two_approx import solve_two_approx

ALPHA_FALLBACK = 0.875 * PO2_MEAN_CONSTANT  # (7/8) / (sqrt(2) ln 2)


def paper_sparsity_threshold(eps: float) -> int:
    return math.ceil(100.0 * math.log(1.0 / eps) / eps**4)


def paper_heavy_subgroups(eps: float) -> int:
    return math.ceil(20.0 * math.log(1.0 / eps) / eps**2)


@dataclass(frozen=True)
class PipelineConfig:
    eps: float = 0.05
    delta: float = 17.0 / 10000.0
    sparsity_threshold: int | None = None  # None -> 100 ln(1/eps)/eps^4
    Q: int | None = None  # None -> 20 ln(1/eps)/eps^2
    alpha_fallback: float = ALPHA_FALLBACK
    rng_seed: int = 0
    guess_mode: str = "reference"  # "reference" | "exhaustive"
    ptas_budget: int = 3
    vbar_slack: float = 0.0
    dense_degree_lower: int | None = None  # None -> sparsity threshold
    max_ref_orders: int = 500_000

    def __post_init__(self):
        if not (0 < self.eps < 0.1):
            raise ValueError("eps must lie in (0, 1/10)")
        if not (0 < self.delta < 0.5):
            raise ValueError("delta must lie in (0, 1/2)")
        if self.Q is not None and self.Q < 1:
            raise ValueError("Q must be >= 1")
        if self.guess_mode not in ("reference", "exhaustive"):
            raise ValueError(f"unknown guess mode {self.guess_mode!r}")

    @property
    def effective_threshold(self) -> int:
        return self.sparsity_threshold if self.sparsity_threshold is not None else paper_sparsity_threshold(self.eps)

    @property
    def effective_Q(self) -> int:
        return self.Q if self.Q is not None else paper_heavy_subgroups(self.eps)

    @property
    def effective_dense_lower(self) -> int:
        return self.dense_degree_lower if self.dense_degree_lower is not None else self.effective_threshold


# ---------------------------------------------------------------------------
# Policy blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    """One self-contained cyclic piece of the assembled policy."""

    ids: tuple[int, ...]
    sosi: SosiPolicy | None = None
    cyclic: CyclicPolicy | None = None
    provenance: str = ""

    def __post_init__(self):
        if (self.sosi is None) == (self.cyclic is None):
            raise ValueError("block must hold exactly one of a SOSI or a cyclic policy")

    def report(self, instance: Instance) -> EvalReport:
        if self.sosi is not None:
            return evaluate_sosi(self.sosi, instance)
        return evaluate(self.cyclic, instance)

    def scaled(self, factor: float) -> "Block":
        if factor == 1.0:
            return self
        if self.sosi is not None:
            scaled = SosiPolicy(
                intervals_T={cid: T * factor for cid, T in self.sosi.intervals_T.items()},
                phases={cid: p * factor for cid, p in self.sosi.phases.items()},
            )
            return replace(self, sosi=scaled)
        return replace(self, cyclic=self.cyclic.scaled(factor))


@dataclass(frozen=True)
class AssembledPolicy:
    """Union of blocks over disjoint commodity subsets.

    The reported peak is the sum of exact per-block peaks: an upper bound on
    the true joint peak, hence a sound feasibility certificate.
    """

    blocks: tuple[Block, ...]

    def __post_init__(self):
        seen: set[int] = set()
        for b in self.blocks:
            overlap = seen & set(b.ids)
            if overlap:
                raise ValueError(f"blocks overlap on commodities {sorted(overlap)}")
            seen.update(b.ids)

    def report(self, instance: Instance) -> EvalReport:
        return combine_reports((b.report(instance) for b in self.blocks), instance)

    def scaled(self, factor: float) -> "AssembledPolicy":
        return AssembledPolicy(tuple(b.scaled(factor) for b in self.blocks))

    def to_json(self) -> dict:
        """Wire format: every block is ordinary cyclic-policy JSON plus a
        provenance tag; stationary blocks flatten into one single-commodity
        sawtooth per commodity so each entry re-parses as a policy."""
        out = []
        for b in self.blocks:
            if b.sosi is not None:
                for cid, T in sorted(b.sosi.intervals_T.items()):
                    phase = b.sosi.phase(cid)
                    out.append(
                        {
                            "tau": T,
                            "schedules": {str(cid): [[phase, T]]},
                            "provenance": b.provenance,
                        }
                    )
            else:
                out.append(
                    {
                        "tau": b.cyclic.tau,
                        "schedules": {
                            str(c): [[t, q] for t, q in orders]
                            for c, orders in sorted(b.cyclic.schedules.items())
                        },
                        "provenance": b.provenance,
                    }
                )
        return {"blocks": out}


def sub_instance(instance: Instance, ids: Sequence[int]) -> Instance:
    keep = set(ids)
    return Instance(
        commodities=tuple(c for c in instance.commodities if c.id in keep),
        capacity_V=instance.capacity_V,
    )


# ---------------------------------------------------------------------------
# Reference policy and class decomposition
# ---------------------------------------------------------------------------


def build_reference_policy(
    instance: Instance, eps: float, max_orders: int = 500_000
) -> CyclicPolicy:
    """Capacity-feasible cyclic stand-in for the near-optimal benchmark.

    The scale-down solution's intervals are snapped down onto base * 2^k
    (base = the smallest interval), which preserves feasibility, costs at
    most another factor 2, and guarantees an exact joint cycle.
    """
    policy, _, _ = solve_two_approx(instance)
    base = min(policy.intervals_T.values())
    snapped = {
        cid: base * 2.0 ** math.floor(math.log2(T / base) + 1e-12)
        for cid, T in policy.intervals_T.items()
    }
    return sosi_to_cyclic(SosiPolicy(intervals_T=snapped), instance, max_orders=max_orders)


@dataclass(frozen=True)
class ClassDecomposition:
    L: int
    classes: Mapping[Hashable, tuple[int, ...]]  # only nonempty classes
    avg_space: Mapping[int, float]  # gamma_i * avg inventory under the reference
    avg_space_per_class: Mapping[Hashable, float]
    labels: Mapping[Hashable, str]  # prefix-sparse | suffix-sparse | dense
    vbar_sparse: float
    vbar_dense: float

    def ids_with_label(self, label: str) -> list[int]:
        out: list[int] = []
        for ell in sorted(self.classes, key=_class_sort_key):
            if self.labels[ell] == label:
                out.extend(self.classes[ell])
        return out


def _class_sort_key(ell: Hashable) -> float:
    return math.inf if ell == INF_CLASS else float(ell)


def decompose_classes(
    ref: CyclicPolicy,
    instance: Instance,
    cfg: PipelineConfig,
    forced_labels: Mapping[Hashable, str] | None = None,
) -> ClassDecomposition:
    """Slab assignment from the evaluator's exact average inventories.

    Class ell collects commodities whose average occupied space lies in
    (V/(1+eps)^ell, V/(1+eps)^(ell-1)]; everything below the resolution
    V/(1+eps)^L falls into the tail class. A class is sparse when its size is
    at most the sparsity threshold; sparse classes split into a prefix
    holding the first Delta nonempty ones and a suffix with the rest.
    `forced_labels` lets the exhaustive mode override the type labeling.
    """
    eps = cfg.eps
    V = instance.V
    n = instance.n
    L = math.ceil(math.log(n / eps) / math.log1p(eps))
    rep = evaluate(ref, instance)

    avg_space: dict[int, float] = {}
    classes: dict[Hashable, list[int]] = {}
    for c in instance.commodities:
        s = c.gamma * rep.avg_inventory[c.id]
        avg_space[c.id] = s
        if s <= V / (1.0 + eps) ** L:
            ell: Hashable = INF_CLASS
        else:
            ell = min(L, math.floor(math.log(V / s) / math.log1p(eps)) + 1)
            ell = max(1, ell)
        classes.setdefault(ell, []).append(c.id)

    threshold = cfg.effective_threshold
    per_class = {ell: math.fsum(avg_space[i] for i in ids) for ell, ids in classes.items()}

    if forced_labels is None:
        sparse = [ell for ell in sorted(classes, key=_class_sort_key) if len(classes[ell]) <= threshold]
        dense = [ell for ell in classes if len(classes[ell]) > threshold]
        delta_count = math.ceil(
            math.log(125.0 * math.log(1.0 / eps) / eps**6) / math.log1p(eps)
        )
        labels: dict[Hashable, str] = {ell: "dense" for ell in dense}
        nonempty_seen = 0
        cut = len(sparse)
        for k, ell in enumerate(sparse):
            nonempty_seen += 1
            if nonempty_seen == delta_count:
                cut = k + 1
                break
        for k, ell in enumerate(sparse):
            labels[ell] = "prefix-sparse" if k < cut else "suffix-sparse"
    else:
        labels = {ell: forced_labels[ell] for ell in classes}

    vbar_sparse = math.fsum(per_class[ell] for ell in classes if labels[ell] != "dense")
    vbar_dense = math.fsum(per_class[ell] for ell in classes if labels[ell] == "dense")
    return ClassDecomposition(
        L=L,
        classes={ell: tuple(ids) for ell, ids in classes.items()},
        avg_space=avg_space,
        avg_space_per_class=per_class,
        labels=labels,
        vbar_sparse=vbar_sparse,
        vbar_dense=vbar_dense,
    )


@dataclass(frozen=True)
class HeavyLightSplit:
    heavy: tuple[int, ...]
    light: tuple[int, ...]
    subgroups: tuple[tuple[int, ...], ...]


def split_heavy_light(
    ids: Sequence[int],
    intervals: Mapping[int, float],
    instance: Instance,
    ell: int,
    eps: float,
    Q: int,
) -> HeavyLightSplit:
    """Heavy commodities occupy more than 3/4 of the class slab on average;
    they are chopped into Q subgroups whose sizes differ by at most one."""
    slab = instance.V / (1.0 + eps) ** (ell - 1)
    heavy, light = [], []
    for i in sorted(ids):
        c = instance.commodity(i)
        if c.gamma * intervals[i] / 2.0 > 0.75 * slab:
            heavy.append(i)
        else:
            light.append(i)
    Q = max(1, min(Q, len(heavy))) if heavy else 1
    base, extra = divmod(len(heavy), Q)
    subgroups, pos = [], 0
    for q in range(Q):
        size = base + (1 if q < extra else 0)
        subgroups.append(tuple(heavy[pos : pos + size]))
        pos += size
    return HeavyLightSplit(tuple(heavy), tuple(light), tuple(g for g in subgroups if g))


# ---------------------------------------------------------------------------
# Branches
# ---------------------------------------------------------------------------


def _relaxation_block(instance: Instance, ids: Sequence[int], rhs: float, provenance: str) -> Block:
    sol = solve_sosi_relaxation(sub_instance(instance, ids), rhs=rhs)
    return Block(ids=tuple(ids), sosi=SosiPolicy(intervals_T=dict(sol.intervals_T)), provenance=provenance)


def _prefix_blocks(instance: Instance, cfg: PipelineConfig, prefix_ids: list[int], diag: dict) -> list[Block]:
    """Near-optimal treatment of the few prefix-sparse commodities: the
    alignment DP when it fits its budgets, the scale-down policy otherwise
    (both capacity-feasible on their own)."""
    if not prefix_ids:
        return []
    sub = sub_instance(instance, prefix_ids)
    if len(prefix_ids) <= cfg.ptas_budget:
        try:
            policy, _ = ptas.ptas_solve(sub, min(0.5, 10 * cfg.eps))
            diag["prefix_method"] = "ptas"
            return [Block(ids=tuple(prefix_ids), cyclic=policy, provenance="prefix:ptas")]
        except (BudgetExceeded, StateSpaceExceeded):
            pass  # hostile parameter spreads blow up the guess grid; fall back
    policy, _, _ = solve_two_approx(sub)
    diag["prefix_method"] = "two-approx"
    return [Block(ids=tuple(prefix_ids), sosi=policy, provenance="prefix:two-approx")]


def run_easy_scenario(
    instance: Instance, cfg: PipelineConfig, decomp: ClassDecomposition, ref: CyclicPolicy
) -> tuple[AssembledPolicy, dict]:
    """High sparse volume: prefix commodities solved near-optimally, the rest
    through the average-space relaxation, then one uniform scale-down."""
    eps, V = cfg.eps, instance.V
    diag: dict = {"scenario": "easy"}
    prefix_ids = decomp.ids_with_label("prefix-sparse")
    rest_ids = decomp.ids_with_label("suffix-sparse") + decomp.ids_with_label("dense")
    blocks = _prefix_blocks(instance, cfg, prefix_ids, diag)
    if rest_ids:
        v_tilde = decomp.vbar_dense + cfg.vbar_slack * V
        blocks.append(
            _relaxation_block(instance, rest_ids, rhs=2.0 * (v_tilde + eps * V), provenance="suffix+dense:relaxation")
        )
    assembled = AssembledPolicy(tuple(blocks))
    diag["paper_scale"] = 2.0 - 2.0 * cfg.delta + 5.0 * eps
    return _scale_to_capacity(assembled, instance, diag)


def run_low_dense_scenario(
    instance: Instance, cfg: PipelineConfig, decomp: ClassDecomposition
) -> tuple[AssembledPolicy, dict]:
    """Both sparse and dense volumes small: one whole-instance relaxation."""
    eps, V = cfg.eps, instance.V
    diag: dict = {"scenario": "low-dense"}
    total = decomp.vbar_sparse + decomp.vbar_dense
    block = _relaxation_block(
        instance, instance.ids(), rhs=2.0 * (total + eps * V), provenance="all:relaxation"
    )
    diag["paper_scale"] = 2.0 - 2.0 * cfg.delta + 4.0 * eps
    return _scale_to_capacity(AssembledPolicy((block,)), instance, diag)


def build_matching_instance(
    instance: Instance, cfg: PipelineConfig, decomp: ClassDecomposition
) -> tuple[MatchingInstance, dict[tuple[int, Hashable], float]]:
    """Mimicking-partition matching over suffix-sparse and dense classes."""
    eps, V, n = cfg.eps, instance.V, instance.n
    suffix = [ell for ell, lab in decomp.labels.items() if lab == "suffix-sparse"]
    dense = [ell for ell, lab in decomp.labels.items() if lab == "dense"]
    class_side = sorted(suffix + dense, key=_class_sort_key)
    ids = [i for ell in class_side for i in decomp.classes[ell]]

    weights: dict[tuple[int, Hashable], float] = {}
    intervals: dict[tuple[int, Hashable], float] = {}
    for i in ids:
        c = instance.commodity(i)
        for ell in class_side:
            T, w = edge_weight(c, ell, eps, V, n, decomp.L)
            weights[(i, ell)] = w
            intervals[(i, ell)] = T

    granule = eps * V / max(1, len(dense))
    bounds: dict[Hashable, tuple[int, int]] = {}
    for ell in class_side:
        size = len(decomp.classes[ell])
        if decomp.labels[ell] == "suffix-sparse":
            bounds[ell] = (size, size)
        elif ell == INF_CLASS:
            bounds[ell] = (min(cfg.effective_dense_lower, size), len(ids))
        else:
            vbar = decomp.avg_space_per_class[ell]
            if cfg.guess_mode == "exhaustive":
                vbar = math.ceil(vbar / granule) * granule  # grid over-estimate
            else:
                vbar += cfg.vbar_slack * V
            n_tilde = math.floor((1.0 + eps) ** float(ell) * vbar / V + 1e-9)
            bounds[ell] = (min(cfg.effective_dense_lower, size), max(n_tilde, size))
    mi = MatchingInstance(
        commodity_side=tuple(ids),
        class_side=tuple(class_side),
        weights=weights,
        degree_bounds=bounds,
    )
    return mi, intervals


def _theta_rng(seed: int, ell_index: int, q: int) -> np.random.Generator:
    # Documented stream split: one child per (class index, subgroup index).
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(ell_index, q)))
    )


def run_dense_branch(
    instance: Instance,
    cfg: PipelineConfig,
    decomp: ClassDecomposition,
    ref: CyclicPolicy,
    seed: int,
) -> tuple[list[Block], dict]:
    """Suffix-sparse and dense classes: mimicking partition, then per dense
    class either the matched stationary policies (light majority), or
    power-of-2 rounding with couple synthesis guarded by the concentration
    event, falling back to the alpha-scaled stationary policy."""
    eps, V = cfg.eps, instance.V
    diag: dict = {"classes": {}, "couples": 0, "far_pair_counts": [], "a_ell": {}}
    mi, interval_table = build_matching_instance(instance, cfg, decomp)
    if not mi.commodity_side:
        return [], diag
    matched = solve_b_matching(mi)
    t_hat = {i: interval_table[(i, matched.assignment[i])] for i in mi.commodity_side}
    partition = MimickingPartition(
        assignment=matched.assignment, sosi_policies=t_hat, total_weight=matched.total_weight
    )
    diag["matched_weight"] = partition.total_weight

    members: dict[Hashable, list[int]] = {}
    for i, ell in partition.assignment.items():
        members.setdefault(ell, []).append(i)

    blocks: list[Block] = []
    for ell in sorted(members, key=_class_sort_key):
        ids = sorted(members[ell])
        label = decomp.labels[ell]
        if label == "suffix-sparse" or ell == INF_CLASS:
            blocks.append(
                Block(ids=tuple(ids), sosi=SosiPolicy({i: t_hat[i] for i in ids}), provenance=f"class{ell}:sosi")
            )
            diag["classes"][str(ell)] = "sosi"
            continue

        split = split_heavy_light(ids, t_hat, instance, int(ell), eps, cfg.effective_Q)
        if len(split.light) >= len(ids) / 2.0:
            blocks.append(
                Block(ids=tuple(ids), sosi=SosiPolicy({i: t_hat[i] for i in ids}), provenance=f"class{ell}:light-majority")
            )
            diag["classes"][str(ell)] = "light-majority"
            continue

        rounded: dict[int, float] = {}
        class_blocks: list[Block] = []
        for q, group in enumerate(split.subgroups):
            rng = _theta_rng(seed, int(ell), q)
            theta = float(rng.uniform(-0.5, 0.5))
            outcome = po2_round({i: t_hat[i] for i in group}, theta)
            rounded.update(outcome.rounded_T)
            entries = [(i, instance.commodity(i).gamma, outcome.rounded_T[i]) for i in group]
            near, far, leftover = classify_pairs(entries, eps)
            diag["far_pair_counts"].append(len(far))
            for lead, trail in near:
                a, b = (lead, trail) if lead[2] >= trail[2] else (trail, lead)
                couple = synthesize_couple(
                    CoupleInput(
                        commodity_A=instance.commodity(a[0]),
                        commodity_B=instance.commodity(b[0]),
                        T_A=a[2],
                        T_B=b[2],
                        epsilon=eps,
                    )
                )
                diag["couples"] += 1
                class_blocks.append(
                    Block(ids=(a[0], b[0]), cyclic=couple.policy, provenance=f"class{ell}:couple-case{couple.case_id}")
                )
            singles = [i for pair in far for i in (pair[0][0], pair[1][0])]
            if leftover is not None:
                singles.append(leftover[0])
            if singles:
                class_blocks.append(
                    Block(
                        ids=tuple(sorted(singles)),
                        sosi=SosiPolicy({i: outcome.rounded_T[i] for i in singles}),
                        provenance=f"class{ell}:rounded-sosi",
                    )
                )
        if split.light:
            class_blocks.append(
                Block(
                    ids=tuple(split.light),
                    sosi=SosiPolicy({i: t_hat[i] for i in split.light}),
                    provenance=f"class{ell}:light-sosi",
                )
            )

        lhs = math.fsum(instance.commodity(i).gamma * rounded[i] for i in split.heavy)
        rhs = (1.0 + eps) * PO2_MEAN_CONSTANT * math.fsum(
            instance.commodity(i).gamma * t_hat[i] for i in split.heavy
        )
        event_holds = lhs <= rhs
        diag["a_ell"][str(ell)] = event_holds
        if event_holds:
            blocks.extend(class_blocks)
            diag["classes"][str(ell)] = "po2-sync"
        else:
            blocks.append(
                Block(
                    ids=tuple(ids),
                    sosi=SosiPolicy({i: cfg.alpha_fallback * t_hat[i] for i in ids}),
                    provenance=f"class{ell}:alpha-fallback",
                )
            )
            diag["classes"][str(ell)] = "alpha-fallback"
    return blocks, diag


def run_difficult_scenario(
    instance: Instance, cfg: PipelineConfig, decomp: ClassDecomposition, ref: CyclicPolicy, seed: int
) -> tuple[AssembledPolicy, dict]:
    eps, V = cfg.eps, instance.V
    diag: dict = {"scenario": "difficult"}
    prefix_ids = decomp.ids_with_label("prefix-sparse")
    blocks: list[Block] = []
    if prefix_ids:
        vbar_prefix = math.fsum(decomp.avg_space[i] for i in prefix_ids)
        blocks.append(
            _relaxation_block(instance, prefix_ids, rhs=2.0 * (vbar_prefix + eps * V), provenance="prefix:relaxation")
        )
    dense_blocks, dense_diag = run_dense_branch(instance, cfg, decomp, ref, seed)
    blocks.extend(dense_blocks)
    diag["dense"] = dense_diag
    diag["paper_scale"] = (1.0 + 8.0 * eps) * (
        1.0 + 0.875 * PO2_MEAN_CONSTANT + cfg.delta / 2.0 + 12.0 * eps
    )
    return _scale_to_capacity(AssembledPolicy(tuple(blocks)), instance, diag)


def _scale_to_capacity(
    assembled: AssembledPolicy, instance: Instance, diag: dict
) -> tuple[AssembledPolicy, dict]:
    """Uniformly stretch intervals down (divide times by the overshoot) so the
    certified peak fits the capacity; the measured factor is used when it is
    smaller than the analysis' worst case, never hurting the guarantee."""
    report = assembled.report(instance)
    factor = report.v_max / instance.V
    diag["measured_scale"] = max(1.0, factor)
    if factor > 1.0:
        assembled = assembled.scaled(1.0 / factor)
        report = assembled.report(instance)
    diag["v_max"] = report.v_max
    diag["cost_rate"] = report.total_cost_rate
    return assembled, diag


def solve_sub2(
    instance: Instance,
    cfg: PipelineConfig | None = None,
    seed: int | None = None,
    reference: CyclicPolicy | None = None,
) -> tuple[AssembledPolicy, EvalReport, dict]:
    """Full randomized pipeline; the returned report is a hard feasibility
    certificate (summed per-block peaks at or below capacity).

    `reference` overrides the auto-built benchmark policy. Stationary
    references have average space at most half their peak, which keeps the
    high-sparse-volume scenario out of reach; passing a schedule with a
    tighter peak-to-average gap exercises the remaining branches.
    """
    cfg = cfg or PipelineConfig()
    seed = cfg.rng_seed if seed is None else seed
    ref = reference if reference is not None else build_reference_policy(
        instance, cfg.eps, max_orders=cfg.max_ref_orders
    )
    ref_report = evaluate(ref, instance)

    if cfg.guess_mode == "exhaustive":
        assembled, diag = _solve_exhaustive(instance, cfg, ref, seed)
    else:
        decomp = decompose_classes(ref, instance, cfg)
        assembled, diag = _dispatch(instance, cfg, decomp, ref, seed)
        diag["vbar_sparse"] = decomp.vbar_sparse
        diag["vbar_dense"] = decomp.vbar_dense

    report = assembled.report(instance)
    if not report.feasible:
        raise AssertionError(f"pipeline produced infeasible policy: v_max={report.v_max}")
    diag["ref_cost_rate"] = ref_report.total_cost_rate
    diag["cost_vs_ref"] = report.total_cost_rate / ref_report.total_cost_rate
    diag["seed"] = seed
    # both published target constants; the suite asserts the first
    diag["target_ratio"] = 2.0 - 17.0 / 5000.0 + cfg.eps
    diag["target_ratio_variant"] = 2.0 - 17.0 / 6250.0 + cfg.eps
    return assembled, report, diag


def _dispatch(
    instance: Instance, cfg: PipelineConfig, decomp: ClassDecomposition, ref: CyclicPolicy, seed: int
) -> tuple[AssembledPolicy, dict]:
    V = instance.V
    if decomp.vbar_sparse >= (0.5 + cfg.delta) * V:
        return run_easy_scenario(instance, cfg, decomp, ref)
    if decomp.vbar_dense < (0.5 - 2.0 * cfg.delta) * V:
        return run_low_dense_scenario(instance, cfg, decomp)
    return run_difficult_scenario(instance, cfg, decomp, ref, seed)


def _solve_exhaustive(
    instance: Instance, cfg: PipelineConfig, ref: CyclicPolicy, seed: int
) -> tuple[AssembledPolicy, dict]:
    """Enumerate class-type labelings for instances with few nonempty classes,
    keeping the cheapest feasible outcome; demonstrates the guessing layer."""
    import itertools

    base = decompose_classes(ref, instance, cfg)
    nonempty = sorted(base.classes, key=_class_sort_key)
    if len(nonempty) > 3:
        raise BudgetExceeded(3 ** len(nonempty), 27)
    best: tuple[AssembledPolicy, dict] | None = None
    for combo in itertools.product(("prefix-sparse", "suffix-sparse", "dense"), repeat=len(nonempty)):
        # sparse prefix classes must precede sparse suffix classes
        sparse_seq = [lab for lab in combo if lab != "dense"]
        if any(
            a == "suffix-sparse" and b == "prefix-sparse"
            for a, b in zip(sparse_seq, sparse_seq[1:])
        ):
            continue
        labels = dict(zip(nonempty, combo))
        try:
            decomp = decompose_classes(ref, instance, cfg, forced_labels=labels)
            candidate, diag = _dispatch(instance, cfg, decomp, ref, seed)
            rep = candidate.report(instance)
            if not rep.feasible:
                continue
        except (InfeasibleMatching, BudgetExceeded):
            continue
        diag["labels"] = {str(k): v for k, v in labels.items()}
        if best is None or rep.total_cost_rate < best[1]["cost_rate"]:
            diag["cost_rate"] = rep.total_cost_rate
            best = (candidate, diag)
    if best is None:
        raise InfeasibleMatching("no labeling produced a feasible policy")
    return best
