"""Bag-filling allocators and the case-split driver.

All allocators operate on an ordered, normalized, irreducible instance and
hand every agent a bundle she values at least `alpha` (exactly, in rational
arithmetic). Bags are seeded with pairs {k, 2n-k+1} of one high- and one
low-ranked good, or triples {k, 2n-k+1, 2n+k} in the second allocator, and
grown with unbagged goods until somebody clears the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .core import Allocation, Bundle, Instance, is_ordered, rat_to_text, value
from .errors import ContractViolation, DomainError, GuaranteeViolation
from .transforms import (
    OrderMap,
    ReductionTrace,
    RuleId,
    rule_counts_from_trace,
    lift_allocation,
    rule_applicable,
    take_rule_award,
    to_delta_oni,
)

DELTA_DEFAULT = Fraction(3, 956)
EPS_MAX = Fraction(3, 3836)
ALPHA_MAX = Fraction(3, 4) + EPS_MAX


@dataclass(frozen=True)
class AgentClassification:
    """Frozen agent classes of an ordered normalized instance.

    `n2` holds agents that value some starting bag above 1, `n1` the rest;
    `n1_1` are the n1 agents that still value good 2n+1 at least 1/4 - 5*delta,
    `n1_2` the others. Membership is computed once and never updated.
    """

    n1: frozenset[int]
    n2: frozenset[int]
    n1_1: frozenset[int]
    n1_2: frozenset[int]


@dataclass
class BagState:
    """Working state of a bag-filling run: open bags, the pool of unbagged
    goods, and the bundles awarded so far."""

    bags: dict[int, list[int]]
    pool: list[int]
    satisfied: dict[int, Bundle]

    def check_partition(self, goods: set[int]) -> None:
        held: list[int] = []
        for b in self.bags.values():
            held.extend(b)
        held.extend(self.pool)
        for b in self.satisfied.values():
            held.extend(b)
        if len(held) != len(set(held)) or set(held) != goods:
            raise ContractViolation("bag state does not partition the good set")

    def dump(self, alpha: Fraction, waiting: set[int]) -> dict:
        return {
            "alpha": rat_to_text(alpha),
            "bags": {str(k): list(b) for k, b in sorted(self.bags.items())},
            "pool": list(self.pool),
            "waiting": sorted(waiting),
            "satisfied": {str(a): list(b.goods) for a, b in sorted(self.satisfied.items())},
        }


def b_bag_ids(k: int, n: int) -> tuple[int, int]:
    return (k, 2 * n - k + 1)


def c_bag_ids(k: int, n: int) -> tuple[int, int, int]:
    return (k, 2 * n - k + 1, 2 * n + k)


def classify_agents(inst: Instance, delta: Fraction) -> AgentClassification:
    """Classify agents of an ordered normalized instance by their starting bags."""
    if not is_ordered(inst):
        raise ContractViolation("classification requires an ordered instance")
    n, m = inst.n, inst.m
    if m < 2 * n:
        raise ContractViolation(f"classification requires m >= 2n, got n={n}, m={m}")
    one = Fraction(1)
    heavy_tail = Fraction(1, 4) - 5 * delta
    n1, n2, n1_1, n1_2 = set(), set(), set(), set()
    for i in range(1, n + 1):
        row = inst.values[i - 1]
        if any(row[k - 1] + row[2 * n - k] > one for k in range(1, n + 1)):
            n2.add(i)
            continue
        n1.add(i)
        tail = row[2 * n] if m >= 2 * n + 1 else Fraction(0)
        (n1_1 if tail >= heavy_tail else n1_2).add(i)
    return AgentClassification(
        n1=frozenset(n1), n2=frozenset(n2), n1_1=frozenset(n1_1), n1_2=frozenset(n1_2)
    )


def _pick_recipient(eligible: list[int], priority: frozenset[int]) -> int:
    preferred = [i for i in eligible if i in priority]
    return preferred[0] if preferred else eligible[0]


def _fill_b_bags(
    inst: Instance,
    alpha: Fraction,
    priority: frozenset[int],
    audit: list | None = None,
) -> Allocation:
    """Award-or-grow loop over the pair-seeded bags.

    Awards always take precedence: the lowest-index open bag some waiting
    agent values at least alpha goes to that agent (priority members first,
    then lowest index). Otherwise the lowest-index pool good joins the
    lowest-index open bag. Runs out of pool goods only on inputs breaking the
    allocator's preconditions, and then fails loudly with its state attached.
    """
    n, m = inst.n, inst.m
    if n == 0:
        return Allocation(bundles=(), unassigned=Bundle.of(range(1, m + 1)))
    if not is_ordered(inst):
        raise ContractViolation("bag filling requires an ordered instance")
    if m < 2 * n:
        raise ContractViolation(f"bag filling requires m >= 2n, got n={n}, m={m}")

    state = BagState(
        bags={k: list(b_bag_ids(k, n)) for k in range(1, n + 1)},
        pool=list(range(2 * n + 1, m + 1)),
        satisfied={},
    )
    waiting = set(range(1, n + 1))
    all_goods = set(range(1, m + 1))

    while waiting:
        award = None
        for k in sorted(state.bags):
            eligible = [i for i in sorted(waiting) if value(inst, i, state.bags[k]) >= alpha]
            if eligible:
                award = (k, _pick_recipient(eligible, priority), eligible)
                break
        if award is not None:
            k, agent, eligible = award
            bundle = Bundle.of(state.bags.pop(k))
            state.satisfied[agent] = bundle
            waiting.discard(agent)
            if audit is not None:
                audit.append(
                    {
                        "bag": bundle,
                        "recipient": agent,
                        "eligible": tuple(eligible),
                        "eligible_priority": tuple(i for i in eligible if i in priority),
                    }
                )
        else:
            if not state.pool:
                raise GuaranteeViolation(
                    "bag filling ran out of goods with agents unsatisfied",
                    state.dump(alpha, waiting),
                )
            g = state.pool.pop(0)
            state.bags[min(state.bags)].append(g)
        state.check_partition(all_goods)

    bundles = tuple(state.satisfied[i] for i in range(1, n + 1))
    return Allocation(bundles=bundles, unassigned=Bundle.of(state.pool))


def bag_fill(inst: Instance, alpha: Fraction, *, audit: list | None = None) -> Allocation:
    """Baseline allocator: every agent receives a bag worth at least alpha.

    Sound for ordered normalized irreducible instances with alpha <= 3/4.
    """
    if alpha > Fraction(3, 4):
        raise DomainError("plain bag filling is only guaranteed for alpha <= 3/4")
    return _fill_b_bags(inst, alpha, frozenset(), audit)


def _small_n1_1(cls: AgentClassification, n: int, delta: Fraction) -> bool:
    # Exact comparison of |N11| / n against (1/4 - delta) / (1/4 + delta/3),
    # written multiplicatively.
    return len(cls.n1_1) * (Fraction(1, 4) + delta / 3) <= n * (Fraction(1, 4) - delta)


def approx_mms1(
    inst: Instance,
    delta: Fraction,
    classification: AgentClassification | None = None,
    *,
    audit: list | None = None,
) -> Allocation:
    """Pair-bag filling at threshold 3/4 + delta, priority to the n1_1 class.

    Applicable when the n1_1 class is small: |n1_1| * (1/4 + delta/3) must
    not exceed n * (1/4 - delta), and delta <= 0.011.
    """
    if not Fraction(0) <= delta <= Fraction(11, 1000):
        raise ContractViolation("approx_mms1 requires 0 <= delta <= 11/1000")
    cls = classification if classification is not None else classify_agents(inst, delta)
    if not _small_n1_1(cls, inst.n, delta):
        raise ContractViolation("approx_mms1 requires the small-n1_1 case split")
    return _fill_b_bags(inst, Fraction(3, 4) + delta, cls.n1_1, audit)


def _approx_mms2_with_stats(
    inst: Instance,
    delta: Fraction,
    classification: AgentClassification | None = None,
    audit: list | None = None,
) -> tuple[Allocation, dict[str, int]]:
    if not Fraction(0) <= delta <= DELTA_DEFAULT:
        raise ContractViolation("approx_mms2 requires 0 <= delta <= 3/956")
    cls = classification if classification is not None else classify_agents(inst, delta)
    n, m = inst.n, inst.m
    if _small_n1_1(cls, n, delta):
        raise ContractViolation("approx_mms2 requires the large-n1_1 case split")
    alpha = Fraction(3, 4) + delta
    priority = frozenset(cls.n1_2 | cls.n2)
    counts = {"R2": 0, "R3": 0, "R5": 0}

    bundles: list[Bundle | None] = [None] * n
    waiting = set(range(1, n + 1))
    bags = {k: b_bag_ids(k, n) for k in range(1, n + 1)}

    # Stage 1: hand out starting bags already clearing the threshold, whole.
    while True:
        award = None
        for k in sorted(bags):
            eligible = [i for i in sorted(waiting) if value(inst, i, bags[k]) >= alpha]
            if eligible:
                award = (k, _pick_recipient(eligible, priority), eligible)
                break
        if award is None:
            break
        k, agent, eligible = award
        bundle = Bundle.of(bags.pop(k))
        bundles[agent - 1] = bundle
        waiting.discard(agent)
        if audit is not None:
            audit.append(
                {
                    "bag": bundle,
                    "recipient": agent,
                    "eligible": tuple(eligible),
                    "eligible_priority": tuple(i for i in eligible if i in priority),
                }
            )

    # Stage 2: reductions on the residual instance. Labels stay in the input
    # instance's coordinates so awards map straight into the allocation.
    awarded_goods = {g for b in bundles if b is not None for g in b}
    keep_goods = [g for g in range(1, m + 1) if g not in awarded_goods]
    keep_agents = sorted(waiting)
    work = Instance(
        n=len(keep_agents),
        m=len(keep_goods),
        values=tuple(
            tuple(inst.values[a - 1][g - 1] for g in keep_goods) for a in keep_agents
        ),
        agent_labels=tuple(keep_agents),
        good_labels=tuple(keep_goods),
    )

    def current_priority(w: Instance) -> set[int]:
        return {pos for pos in range(1, w.n + 1) if w.agent_labels[pos - 1] in priority}

    while work.n > 0:
        agent = rule_applicable(work, RuleId.R5, alpha, priority=current_priority(work))
        if agent is None:
            break
        work, removed, label = take_rule_award(work, RuleId.R5, agent, alpha)
        bundles[label - 1] = removed
        counts["R5"] += 1

    while work.n > 0:
        fired = False
        for rule in (RuleId.R2, RuleId.R3):
            agent = rule_applicable(work, rule, alpha)
            if agent is not None:
                work, removed, label = take_rule_award(work, rule, agent, alpha)
                bundles[label - 1] = removed
                counts[rule.value] += 1
                fired = True
                break
        if not fired:
            break
        # The two top goods only ever shrink here, so the pair rule must stay off.
        assert rule_applicable(work, RuleId.R5, alpha) is None

    # Stage 3: triple-seeded bags over what is left, filled from beyond 3n.
    assert work.n == 0 or rule_applicable(work, RuleId.R5, alpha) is None
    n3, m3 = work.n, work.m
    cbags = {k: [g for g in c_bag_ids(k, n3) if g <= m3] for k in range(1, n3 + 1)}
    pool = list(range(3 * n3 + 1, m3 + 1))
    remaining = set(range(1, n3 + 1))
    for k in range(1, n3 + 1):
        while True:
            eligible = [i for i in sorted(remaining) if value(work, i, cbags[k]) >= alpha]
            if eligible:
                break
            if not pool:
                state = BagState(
                    bags={j: cbags[j] for j in range(1, n3 + 1) if j >= k},
                    pool=pool,
                    satisfied={},
                )
                raise GuaranteeViolation(
                    "triple-bag filling ran out of goods with agents unsatisfied",
                    state.dump(alpha, {work.agent_labels[i - 1] for i in remaining}),
                )
            cbags[k].append(pool.pop(0))
        pos = _pick_recipient(
            eligible, frozenset(i for i in remaining if work.agent_labels[i - 1] in priority)
        )
        label = work.agent_labels[pos - 1]
        bundle = Bundle.of(work.good_labels[g - 1] for g in cbags[k])
        bundles[label - 1] = bundle
        remaining.discard(pos)
        if audit is not None:
            audit.append(
                {
                    "bag": bundle,
                    "recipient": label,
                    "eligible": tuple(work.agent_labels[i - 1] for i in eligible),
                    "eligible_priority": tuple(
                        work.agent_labels[i - 1] for i in eligible
                        if work.agent_labels[i - 1] in priority
                    ),
                }
            )

    leftovers = [work.good_labels[g - 1] for g in pool]
    assert all(b is not None for b in bundles)
    alloc = Allocation(bundles=tuple(bundles), unassigned=Bundle.of(leftovers))
    alloc.validate(m)
    return alloc, counts


def approx_mms2(
    inst: Instance,
    delta: Fraction,
    classification: AgentClassification | None = None,
    *,
    audit: list | None = None,
) -> Allocation:
    """Allocator for the large-n1_1 case: award starting bags with priority to
    n1_2 and n2 agents, reduce with the pair rule then the triple/quad rules,
    and finish by filling triple-seeded bags. Requires delta <= 3/956."""
    return _approx_mms2_with_stats(inst, delta, classification, audit)[0]


@dataclass(frozen=True)
class SolveInfo:
    """Diagnostics of one driver run: which allocator ran, how often each
    rule fired, and the residual instance the allocator saw."""

    branch: str  # "bagfill" | "mms1" | "mms2"
    rule_counts: dict[str, int]
    oni: Instance
    oni_map: OrderMap
    trace: ReductionTrace
    alpha_inner: Fraction


def solve(
    inst: Instance,
    alpha: Fraction,
    *,
    delta: Fraction = DELTA_DEFAULT,
    node_budget: int | None = None,
    audit: list | None = None,
) -> tuple[Allocation, SolveInfo]:
    """End-to-end driver with diagnostics; see `main_approx_mms`."""
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    if alpha > ALPHA_MAX:
        raise DomainError(
            f"alpha must be at most 3/4 + 3/3836 = {rat_to_text(ALPHA_MAX)}, got {rat_to_text(alpha)}"
        )

    if alpha <= Fraction(3, 4):
        oni, omap, trace = to_delta_oni(inst, Fraction(0), node_budget=node_budget)
        inner = _fill_b_bags(oni, alpha, frozenset(), audit)
        branch = "bagfill"
        counts: dict[str, int] = {}
        alpha_inner = alpha
    else:
        eps = alpha - Fraction(3, 4)
        if not Fraction(0) < delta <= DELTA_DEFAULT:
            raise DomainError("delta must be in (0, 3/956]")
        if 4 * eps / (1 - 4 * eps) > delta:
            raise DomainError("delta too small for this alpha: need 4*eps/(1-4*eps) <= delta")
        oni, omap, trace = to_delta_oni(inst, eps, node_budget=node_budget)
        cls = classify_agents(oni, delta)
        alpha_inner = Fraction(3, 4) + delta
        if _small_n1_1(cls, oni.n, delta):
            inner = approx_mms1(oni, delta, cls, audit=audit)
            branch = "mms1"
            counts = {}
        else:
            inner, counts = _approx_mms2_with_stats(oni, delta, cls, audit)
            branch = "mms2"

    rule_counts = rule_counts_from_trace(trace)
    for key, c in counts.items():
        rule_counts[key] = rule_counts.get(key, 0) + c
    final = lift_allocation(trace, omap, inst, inner)
    final.validate(inst.m)
    info = SolveInfo(
        branch=branch,
        rule_counts=rule_counts,
        oni=oni,
        oni_map=omap,
        trace=trace,
        alpha_inner=alpha_inner,
    )
    return final, info


def main_approx_mms(
    inst: Instance,
    alpha: Fraction,
    *,
    delta: Fraction = DELTA_DEFAULT,
    node_budget: int | None = None,
) -> Allocation:
    """Compute an allocation giving every agent at least alpha times her
    maximin share, for any 0 < alpha <= 3/4 + 3/3836.

    Above 3/4 the driver builds the irreducible residual instance at
    eps = alpha - 3/4, classifies agents against `delta`, dispatches on the
    size of the n1_1 class, and lifts the result; at or below 3/4 it runs
    plain bag filling on the residual instance at threshold alpha.
    """
    return solve(inst, alpha, delta=delta, node_budget=node_budget)[0]


def complete_allocation(alloc: Allocation) -> Allocation:
    """Fold the unassigned pool into agent 1's bundle (values are nonnegative,
    so any per-agent guarantee is preserved). No-op without agents."""
    if alloc.n_agents == 0 or len(alloc.unassigned) == 0:
        return alloc
    bundles = (alloc.bundles[0].union(alloc.unassigned),) + alloc.bundles[1:]
    return Allocation(bundles=bundles, unassigned=Bundle())
