import json
import logging
from dataclasses import dataclass
from itertools import combinations, product
from math import comb, floor, fsum
from typing import TYPE_CHECKING, Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from django.conf import settings

from core.exceptions import SortitionError, SupportCapExceeded

if TYPE_CHECKING:
    from core.instances import Instance

logger = logging.getLogger(__name__)

FAIR_FILL = 'fair'
UNIFORM_FILL = 'uniform'
FILL_MODES = (FAIR_FILL, UNIFORM_FILL)

PROB_TOL = 1e-12


@dataclass(frozen=True)
class Panel:
    members: Tuple[int, ...]

    def __post_init__(self):
        members = tuple(int(i) for i in self.members)
        if any(b <= a for a, b in zip(members, members[1:])):
            raise ValueError(f"Panel members must be strictly increasing, got {members}")
        if members and members[0] < 0:
            raise ValueError(f"Negative agent index in panel {members}")
        object.__setattr__(self, 'members', members)

    @classmethod
    def of(cls, agents: Iterable[int]) -> 'Panel':
        agents = [int(i) for i in agents]
        if len(set(agents)) != len(agents):
            raise ValueError(f"Duplicate agents in panel {agents}")
        return cls(tuple(sorted(agents)))

    @property
    def k(self) -> int:
        return len(self.members)

    def __len__(self): return len(self.members)

    def __contains__(self, agent): return agent in self.members

    def __iter__(self): return iter(self.members)


Sampler = Callable[[np.random.Generator], Panel]


@dataclass(frozen=True, eq=False)
class PanelDistribution:
    """
    Finite distribution over panels of one size k.

    Panels are stored as rows of an (S, k) index matrix with a matching
    probability vector so downstream code can work on the whole support at once.
    """
    k: int
    members: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        members = np.asarray(self.members, dtype=np.int64).reshape(-1, self.k)
        probs = np.asarray(self.probs, dtype=float)
        if len(members) == 0 or len(members) != len(probs):
            raise ValueError(f"Support has {len(members)} panels and {len(probs)} probabilities")
        if np.any(probs <= 0):
            raise ValueError("Every panel in a support needs positive probability")
        total = fsum(probs)
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"Support probabilities sum to {total!r}, not 1")
        if self.k > 1 and np.any(np.diff(members, axis=1) <= 0):
            raise ValueError("Panel rows must be strictly increasing")
        if len(np.unique(members, axis=0)) != len(members):
            raise ValueError("Support contains the same panel twice")
        members.flags.writeable = False
        probs.flags.writeable = False
        object.__setattr__(self, 'members', members)
        object.__setattr__(self, 'probs', probs)

    @classmethod
    def from_support(cls, k: int, support: Dict[Tuple[int, ...], float]) -> 'PanelDistribution':
        panels = sorted(support)
        return cls(k, np.array(panels, dtype=np.int64).reshape(-1, k), np.array([support[p] for p in panels]))

    @property
    def support(self) -> List[Tuple[Panel, float]]:
        return [(Panel(tuple(row)), float(p)) for row, p in zip(self.members.tolist(), self.probs)]

    def __len__(self): return len(self.probs)

    def to_dict(self):
        return {'k': self.k,
                'support': [{'members': row, 'prob': float(p)} for row, p in zip(self.members.tolist(), self.probs)]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class BallTrace:
    """Groups captured by the greedy ball-growing pass, in capture order"""
    n: int
    k: int
    groups: Tuple[Tuple[int, ...], ...]
    leftover: Tuple[int, ...]
    radii: Tuple[float, ...]

    @property
    def q(self) -> int:
        return -(-self.n // self.k)

    @property
    def grouped_agents(self) -> Tuple[int, ...]:
        return tuple(sorted(a for group in self.groups for a in group))

    def to_dict(self):
        return {'n': self.n, 'k': self.k, 'group_size': self.q,
                'groups': [list(g) for g in self.groups],
                'radii': list(self.radii),
                'leftover': list(self.leftover)}


@dataclass(frozen=True)
class FillPlan:
    """Expected number of fill slots handed to the leftover agents, per final-stage branch"""
    with_leftover_draw: float
    without_leftover_draw: float


def _check_sizes(n: int, k: int):
    if not 1 <= k <= n:
        raise ValueError(f"Need 1 <= k <= n, got k={k}, n={n}")


def _check_fill(fill: str):
    if fill not in FILL_MODES:
        raise ValueError(f"Unknown fill mode {fill!r}, expected one of {FILL_MODES}")


def uniform_sample(n: int, k: int, rng: np.random.Generator) -> Panel:
    _check_sizes(n, k)
    return Panel(tuple(np.sort(rng.choice(n, size=k, replace=False)).tolist()))


def uniform_support(n: int, k: int, cap: Optional[int] = None) -> PanelDistribution:
    _check_sizes(n, k)
    cap = settings.SORTITION_SUPPORT_CAP if cap is None else cap
    size = comb(n, k)
    if size > cap:
        raise SupportCapExceeded(
            f"Uniform support has C({n}, {k}) = {size} panels, above the cap of {cap}; use Monte Carlo mode")
    logger.info("Enumerating %d uniform panels (n=%d, k=%d)", size, n, k)
    members = np.fromiter((i for panel in combinations(range(n), k) for i in panel),
                          dtype=np.int64, count=size * k).reshape(size, k)
    return PanelDistribution(k, members, np.full(size, 1.0 / size))


def fgc_ball_trace(agent_dist: Union[np.ndarray, 'Instance'], k: int) -> BallTrace:
    """
    Greedy capture: while at least ceil(n/k) agents remain, take the remaining agent
    whose ceil(n/k)-th nearest remaining agent (itself included) is closest and
    capture that many agents around it.
    """
    d = np.asarray(getattr(agent_dist, 'agent_dist', agent_dist), dtype=float)
    n = d.shape[0]
    _check_sizes(n, k)
    q = -(-n // k)

    # captured agents are masked with inf columns, so every row ranks remaining agents only
    work = np.array(d, dtype=float)
    alive = np.ones(n, dtype=bool)
    agents = np.arange(n)
    groups, radii = [], []
    while alive.sum() >= q:
        reach = np.partition(work, q - 1, axis=1)[:, q - 1]
        reach[~alive] = np.inf
        center = int(np.argmin(reach))
        # by distance to the center, then by agent index
        order = np.lexsort((agents, work[center]))
        captured = np.sort(order[:q])
        groups.append(tuple(captured.tolist()))
        radii.append(float(reach[center]))
        logger.debug("Captured %s around agent %d at radius %g", groups[-1], center, radii[-1])
        alive[captured] = False
        work[:, captured] = np.inf

    return BallTrace(n, k, tuple(groups), tuple(agents[alive].tolist()), tuple(radii))


def fair_fill_plan(trace: BallTrace) -> FillPlan:
    """
    Choose how many fill slots the leftover agents get on average so that they,
    and by conservation the grouped agents, end up with inclusion exactly k/n.
    """
    n, k, q = trace.n, trace.k, trace.q
    groups, rho = len(trace.groups), len(trace.leftover)
    unchosen = groups * (q - 1)
    open_with = k - groups - 1
    open_without = k - groups
    if groups == k or rho == 0:
        return FillPlan(0.0, 0.0)

    lo_with, hi_with = max(0, open_with - unchosen), min(open_with, rho - 1)
    lo_without, hi_without = max(0, open_without - unchosen), min(open_without, rho)

    prop_with, prop_without = open_with * rho / n, open_without * rho / n
    if (lo_with - PROB_TOL <= prop_with <= hi_with + PROB_TOL
            and lo_without - PROB_TOL <= prop_without <= hi_without + PROB_TOL):
        return FillPlan(prop_with, prop_without)

    # a_with / q + (q - rho) / (q * rho) * a_without = k/n - 1/q
    target = (k / n - 1 / q) * q * rho
    lo = max(lo_with, (target - hi_without * (q - rho)) / rho)
    hi = min(hi_with, (target - lo_without * (q - rho)) / rho)
    if lo > hi + PROB_TOL:
        raise SortitionError(f"No fair fill exists for n={n}, k={k} with {groups} groups and {rho} leftover agents")
    a_with = min(max(prop_with, lo), hi)
    a_without = (target - rho * a_with) / (q - rho)
    logger.info("Fill plan for n=%d, k=%d moved off proportional: %g, %g", n, k, a_with, a_without)
    return FillPlan(a_with, a_without)


def _roundings(mean: float) -> List[Tuple[int, float]]:
    base = floor(mean + PROB_TOL)
    frac = mean - base
    if frac <= PROB_TOL:
        return [(base, 1.0)]
    return [(base, 1.0 - frac), (base + 1, frac)]


def _final_stage_outcomes(chosen: Sequence[int], trace: BallTrace, fill: str,
                          plan: FillPlan) -> Iterator[Tuple[Tuple[int, ...], float]]:
    """Every (added agents, probability) outcome of the leftover lottery and the fill"""
    open_slots = trace.k - len(chosen)
    if open_slots == 0:
        yield (), 1.0
        return

    q, leftover = trace.q, trace.leftover
    unchosen = tuple(sorted(set(trace.grouped_agents) - set(chosen)))
    branches = [((agent,), 1 / q) for agent in leftover] + [((), 1 - len(leftover) / q)]

    for drawn, p_branch in branches:
        slots = open_slots - len(drawn)
        left_pool = tuple(a for a in leftover if a not in drawn)
        if fill == UNIFORM_FILL:
            pool = tuple(sorted(left_pool + unchosen))
            ways = comb(len(pool), slots)
            for extra in combinations(pool, slots):
                yield drawn + extra, p_branch / ways
            continue

        mean = plan.with_leftover_draw if drawn else plan.without_leftover_draw
        for x, p_x in _roundings(mean):
            ways = comb(len(left_pool), x) * comb(len(unchosen), slots - x)
            for from_left in combinations(left_pool, x):
                for from_groups in combinations(unchosen, slots - x):
                    yield drawn + from_left + from_groups, p_branch * p_x / ways


def _final_stage_draw(chosen: Sequence[int], trace: BallTrace, fill: str, plan: FillPlan,
                      rng: np.random.Generator) -> List[int]:
    open_slots = trace.k - len(chosen)
    if open_slots == 0: return []

    leftover = list(trace.leftover)
    # one categorical draw: each leftover agent 1/q, nobody the rest
    pick = int(rng.integers(trace.q))
    drawn = [leftover.pop(pick)] if pick < len(leftover) else []
    slots = open_slots - len(drawn)

    unchosen = sorted(set(trace.grouped_agents) - set(chosen))
    if fill == UNIFORM_FILL:
        pool = np.array(sorted(leftover + unchosen), dtype=np.int64)
        return drawn + rng.choice(pool, size=slots, replace=False).tolist()

    mean = plan.with_leftover_draw if drawn else plan.without_leftover_draw
    base = floor(mean + PROB_TOL)
    x = base + int(rng.random() < mean - base)
    from_left = rng.choice(np.array(leftover, dtype=np.int64), size=x, replace=False).tolist() if x else []
    from_groups = rng.choice(np.array(unchosen, dtype=np.int64), size=slots - x, replace=False).tolist()
    return drawn + from_left + from_groups


def sample_from_trace(trace: BallTrace, rng: np.random.Generator, fill: str = FAIR_FILL,
                      plan: Optional[FillPlan] = None) -> Panel:
    _check_fill(fill)
    plan = plan or fair_fill_plan(trace)
    chosen = [group[int(rng.integers(len(group)))] for group in trace.groups]
    return Panel.of(chosen + _final_stage_draw(chosen, trace, fill, plan, rng))


def fgc_sample(instance: 'Instance', k: int, rng: np.random.Generator, fill: str = FAIR_FILL) -> Panel:
    return sample_from_trace(fgc_ball_trace(instance.agent_dist, k), rng, fill)


def fgc_support_size(trace: BallTrace, fill: str = FAIR_FILL, plan: Optional[FillPlan] = None) -> int:
    """Number of raw outcomes the exact enumeration walks through, before merging"""
    q, k, groups, rho = trace.q, trace.k, len(trace.groups), len(trace.leftover)
    first_stage = q ** groups
    if groups == k:
        return first_stage

    unchosen = groups * (q - 1)
    if fill == UNIFORM_FILL:
        pool = trace.n - groups
        final = rho * comb(pool - 1, k - groups - 1) + comb(pool, k - groups)
    else:
        plan = plan or fair_fill_plan(trace)
        slots = k - groups
        final = rho * sum(comb(rho - 1, x) * comb(unchosen, slots - 1 - x)
                          for x, _ in _roundings(plan.with_leftover_draw))
        final += sum(comb(rho, x) * comb(unchosen, slots - x) for x, _ in _roundings(plan.without_leftover_draw))
    return first_stage * final


def fgc_support(instance: Union['Instance', BallTrace], k: Optional[int] = None, fill: str = FAIR_FILL,
                cap: Optional[int] = None) -> PanelDistribution:
    """Exact panel distribution of Fair Greedy Capture, duplicates merged"""
    _check_fill(fill)
    trace = instance if isinstance(instance, BallTrace) else fgc_ball_trace(instance.agent_dist, k)
    cap = settings.SORTITION_SUPPORT_CAP if cap is None else cap
    plan = fair_fill_plan(trace)

    size = fgc_support_size(trace, fill, plan)
    if size > cap:
        raise SupportCapExceeded(f"FGC support needs {size} outcomes, above the cap of {cap}; use Monte Carlo mode")
    logger.info("Enumerating %d FGC outcomes (n=%d, k=%d, fill=%s)", size, trace.n, trace.k, fill)

    first_prob = float(trace.q) ** -len(trace.groups)
    merged: Dict[Tuple[int, ...], List[float]] = {}
    for chosen in product(*trace.groups):
        for added, p in _final_stage_outcomes(chosen, trace, fill, plan):
            merged.setdefault(tuple(sorted(chosen + added)), []).append(first_prob * p)

    support = {panel: fsum(parts) for panel, parts in merged.items()}
    return PanelDistribution.from_support(trace.k, support)


def fgc_two_stage_sample(trace: BallTrace, n: int, k: int, rng: np.random.Generator,
                         fill: str = FAIR_FILL) -> Panel:
    """
    Two-stage view of the same process: stage one treats the leftover agents as a
    partial group padded with empty seats, stage two fills what is still open.
    """
    _check_fill(fill)
    if trace.n != n or trace.k != k:
        raise ValueError(f"Trace was built for n={trace.n}, k={trace.k}, not n={n}, k={k}")

    q = trace.q
    padded = [list(group) for group in trace.groups]
    if trace.leftover:
        padded.append(list(trace.leftover) + [None] * (q - len(trace.leftover)))

    seats = [group[int(rng.integers(q))] for group in padded]
    chosen = seats[:len(trace.groups)]
    drawn = [a for a in seats[len(trace.groups):] if a is not None]

    open_slots = k - len(chosen) - len(drawn)
    if open_slots == 0:
        return Panel.of(chosen + drawn)

    remaining_left = [a for a in trace.leftover if a not in drawn]
    unchosen = sorted(set(trace.grouped_agents) - set(chosen))
    if fill == UNIFORM_FILL:
        pool = np.array(sorted(remaining_left + unchosen), dtype=np.int64)
        return Panel.of(chosen + drawn + rng.choice(pool, size=open_slots, replace=False).tolist())

    plan = fair_fill_plan(trace)
    mean = plan.with_leftover_draw if drawn else plan.without_leftover_draw
    base = floor(mean + PROB_TOL)
    x = base + int(rng.random() < mean - base)
    extra = []
    if x:
        extra += rng.choice(np.array(remaining_left, dtype=np.int64), size=x, replace=False).tolist()
    extra += rng.choice(np.array(unchosen, dtype=np.int64), size=open_slots - x, replace=False).tolist()
    return Panel.of(chosen + drawn + extra)


def fixed_panel_algorithm(panel: Panel) -> PanelDistribution:
    return PanelDistribution(len(panel), np.array([panel.members]), np.array([1.0]))


def bad_fair_algorithm(n: int) -> PanelDistribution:
    """Half the time the first n/2 agents, otherwise the other half"""
    if n < 2 or n % 2:
        raise ValueError(f"n must be a positive even number, got {n}")
    half = n // 2
    return PanelDistribution(half, np.arange(n).reshape(2, half), np.array([0.5, 0.5]))


def inclusion_probabilities(dist: PanelDistribution, n: int) -> np.ndarray:
    if dist.members.max() >= n:
        raise ValueError(f"Support references agent {int(dist.members.max())} but n={n}")
    weights = np.repeat(dist.probs, dist.k)
    return np.bincount(dist.members.ravel(), weights=weights, minlength=n)


def uniform_sampler(n: int, k: int) -> Sampler:
    _check_sizes(n, k)
    return lambda rng: uniform_sample(n, k, rng)


def fgc_sampler(instance: 'Instance', k: int, fill: str = FAIR_FILL) -> Sampler:
    _check_fill(fill)
    trace = fgc_ball_trace(instance.agent_dist, k)
    plan = fair_fill_plan(trace)
    return lambda rng: sample_from_trace(trace, rng, fill, plan)


def two_stage_sampler(trace: BallTrace, fill: str = FAIR_FILL) -> Sampler:
    return lambda rng: fgc_two_stage_sample(trace, trace.n, trace.k, rng, fill)


def fixed_sampler(dist: PanelDistribution) -> Sampler:
    """Draw panels from an explicit distribution"""
    rows = dist.members.tolist()
    return lambda rng: Panel(tuple(rows[int(rng.choice(len(rows), p=dist.probs))]))


def inclusion_frequencies(sampler: Sampler, n: int, draws: int, seed: int,
                          block_size: Optional[int] = None) -> np.ndarray:
    """Monte Carlo marginals; block b of draws uses the stream default_rng([seed, b])"""
    if draws < 1:
        raise ValueError(f"draws must be at least 1, got {draws}")
    block_size = block_size or settings.SORTITION_MC_BLOCK_SIZE
    counts = np.zeros(n, dtype=np.int64)
    for block, start in enumerate(range(0, draws, block_size)):
        rng = np.random.default_rng([seed, block])
        for _ in range(min(block_size, draws - start)):
            counts[list(sampler(rng).members)] += 1
    return counts / draws
