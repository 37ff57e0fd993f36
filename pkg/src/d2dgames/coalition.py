"""Coalition formation for D2D group content distribution.

Device UEs partition themselves into coalitions, each anchored by exactly one
cellular user whose RB the coalition reuses. Inside a coalition every normal
UE listens to its nearest seed; seeds multicast, so all links of a coalition
share the anchor RB and interfere with each other and with the cellular link,
while different coalitions are orthogonal. Switch dynamics move one UE at a
time whenever the two affected coalitions' combined value strictly rises,
which makes the total value a potential function and guarantees convergence
to a switch-stable partition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from d2dgames import radio
from d2dgames.seeding import derive_seed

# smallest combined-value gain treated as a strict improvement
GAIN_EPS = 1e-9

Point = tuple[float, float]


@dataclass(frozen=True)
class ContentScenario:
    """Counts and pacing of the popular-content distribution task."""

    n_d2d: int = 20
    k_seeds: int = 4
    m_cue: int = 6
    file_packets: int = 500
    packets_per_rate_unit: float = 10.0

    def validate(self) -> "ContentScenario":
        if not 0 < self.k_seeds <= self.n_d2d:
            raise ValueError(
                f"need 0 < k_seeds <= n_d2d, got K={self.k_seeds}, N={self.n_d2d}"
            )
        if self.m_cue < 1:
            raise ValueError(f"m_cue must be >= 1, got {self.m_cue}")
        if self.file_packets < 1:
            raise ValueError(f"file_packets must be >= 1, got {self.file_packets}")
        if not self.packets_per_rate_unit >= 0:
            raise ValueError(
                f"packets_per_rate_unit must be >= 0, got {self.packets_per_rate_unit}"
            )
        return self


@dataclass(frozen=True)
class ContentInstance:
    """One geometric realization of a scenario: positions plus the seed set."""

    scenario: ContentScenario
    ue_pos: tuple[Point, ...]
    cue_pos: tuple[Point, ...]
    enb_pos: Point
    seeds: frozenset[int]

    def distances(self) -> np.ndarray:
        pos = np.asarray(self.ue_pos)
        diff = pos[:, None, :] - pos[None, :, :]
        return np.sqrt((diff**2).sum(axis=2))


@dataclass(frozen=True)
class Partition:
    """Disjoint coalitions covering all UEs; tuple index = anchor CUE/RB."""

    members: tuple[frozenset[int], ...]

    def validate(self, n_ues: int) -> "Partition":
        seen: set[int] = set()
        for ms in self.members:
            if seen & ms:
                raise ValueError("coalitions overlap")
            seen |= ms
        if seen != set(range(n_ues)):
            raise ValueError("coalitions must cover every UE exactly once")
        return self

    def anchor_of(self, ue: int) -> int:
        for anchor, ms in enumerate(self.members):
            if ue in ms:
                return anchor
        raise KeyError(ue)

    def move(self, ue: int, target: int) -> "Partition":
        src = self.anchor_of(ue)
        new = list(self.members)
        new[src] = new[src] - {ue}
        new[target] = new[target] | {ue}
        return Partition(members=tuple(new))

    def total_value(self, value_fn: Callable[[int, frozenset], float]) -> float:
        return sum(value_fn(a, ms) for a, ms in enumerate(self.members))


def generate_content_instance(
    scenario: ContentScenario,
    params: radio.RadioParams,
    rng_seed: int,
    hotspot_radius_m: float = 15.0,
    hotspot_center: Point | None = None,
) -> ContentInstance:
    """Drop UEs in a dense hotspot disc and CUEs across the whole cell.

    The hotspot sits toward the cell edge by default (crowded venues are
    rarely centered on the base station) and is tight enough that every UE is
    in D2D range of every other. The first ``k_seeds`` UE indices start out
    holding the full file.
    """
    scenario.validate()
    params.validate()
    rng = np.random.default_rng(rng_seed)
    if hotspot_center is None:
        hotspot_center = (0.8 * params.cell_radius_m, 0.0)
    ue = []
    while len(ue) < scenario.n_d2d:
        p = radio._draw_disc_point(rng, hotspot_center, hotspot_radius_m)
        if math.hypot(*p) <= params.cell_radius_m:
            ue.append(p)
    cue = tuple(
        radio._draw_disc_point(rng, (0.0, 0.0), params.cell_radius_m)
        for _ in range(scenario.m_cue)
    )
    return ContentInstance(
        scenario=scenario,
        ue_pos=tuple(ue),
        cue_pos=cue,
        enb_pos=(0.0, 0.0),
        seeds=frozenset(range(scenario.k_seeds)),
    )


def _content_links(inst: ContentInstance):
    enb = ("enb", 0)
    links = []
    for i, cpos in enumerate(inst.cue_pos):
        links.append((enb, inst.enb_pos, ("cue", i), cpos))
        links.append((("cue", i), cpos, enb, inst.enb_pos))
    for i, pi in enumerate(inst.ue_pos):
        links.append((("ue", i), pi, enb, inst.enb_pos))
        links.append((enb, inst.enb_pos, ("ue", i), pi))
        for k, cpos in enumerate(inst.cue_pos):
            links.append((("ue", i), pi, ("cue", k), cpos))
            links.append((("cue", k), cpos, ("ue", i), pi))
        for j, pj in enumerate(inst.ue_pos):
            if i != j:
                links.append((("ue", i), pi, ("ue", j), pj))
    return links


def draw_content_gains(
    inst: ContentInstance, params: radio.RadioParams, rng_seed: int
) -> radio.GainTensor:
    return radio.build_gain_tensor(
        _content_links(inst), inst.scenario.m_cue, params, rng_seed
    )


class _ContentChannel:
    """Dense received-power arrays for fast coalition-value evaluation."""

    def __init__(self, inst: ContentInstance, gains: radio.GainTensor, params: radio.RadioParams):
        n = inst.scenario.n_d2d
        m = inst.scenario.m_cue
        p_d = params.p_d2d_w
        self.sigma = radio.effective_noise_w(params)
        self.uu = np.zeros((n, n, m))          # seed tx -> ue rx power, per RB
        self.cell_at_ue = np.zeros((n, m))     # cellular tx -> ue rx power on its RB
        self.ue_at_cellrx = np.zeros((n, m))   # ue tx -> cellular rx power, per RB
        self.cell_signal = np.zeros(m)
        for rb in range(m):
            cell_tx = radio.cellular_tx_node(params, rb)
            cell_rx = radio.cellular_rx_node(params, rb)
            p_cell = radio.default_power_w(params, cell_tx)
            self.cell_signal[rb] = p_cell * gains.get(cell_tx, cell_rx, rb)
            for i in range(n):
                self.cell_at_ue[i, rb] = p_cell * gains.get(cell_tx, ("ue", i), rb)
                self.ue_at_cellrx[i, rb] = p_d * gains.get(("ue", i), cell_rx, rb)
                for j in range(n):
                    if i != j:
                        self.uu[i, j, rb] = p_d * gains.get(("ue", i), ("ue", j), rb)


def _coalition_detail(
    channel: _ContentChannel,
    dist: np.ndarray,
    seeds: frozenset[int],
    anchor: int,
    members: frozenset[int],
) -> tuple[float, dict[int, float]]:
    """Coalition value and the per-normal-UE link rates inside it."""
    seed_list = sorted(members & seeds)
    normals = sorted(members - seeds)
    serving: dict[int, int] = {}
    if seed_list:
        for u in normals:
            serving[u] = min(seed_list, key=lambda s: (dist[s, u], s))
    transmitting = sorted(set(serving.values()))
    interf_c = sum(channel.ue_at_cellrx[s, anchor] for s in transmitting)
    value = math.log2(1.0 + channel.cell_signal[anchor] / (channel.sigma + interf_c))
    rates: dict[int, float] = {}
    for u in normals:
        s = serving.get(u)
        if s is None:
            rates[u] = 0.0
            continue
        interf = channel.cell_at_ue[u, anchor]
        for t in transmitting:
            if t != s:
                interf += channel.uu[t, u, anchor]
        r = math.log2(1.0 + channel.uu[s, u, anchor] / (channel.sigma + interf))
        rates[u] = r
        value += r
    return value, rates


def coalition_value(
    anchor: int,
    members: frozenset[int],
    gains: radio.GainTensor,
    params: radio.RadioParams,
    inst: ContentInstance,
    seeds: frozenset[int] | None = None,
) -> float:
    """Cellular rate on the anchor RB plus the coalition's internal D2D rates."""
    channel = _ContentChannel(inst, gains, params)
    use_seeds = inst.seeds if seeds is None else seeds
    value, _ = _coalition_detail(channel, inst.distances(), use_seeds, anchor, members)
    return value


def make_value_fn(
    inst: ContentInstance,
    gains: radio.GainTensor,
    params: radio.RadioParams,
    seeds: frozenset[int] | None = None,
) -> Callable[[int, frozenset], float]:
    """Memoized coalition-value function for one channel realization."""
    channel = _ContentChannel(inst, gains, params)
    dist = inst.distances()
    use_seeds = inst.seeds if seeds is None else frozenset(seeds)
    cache: dict[tuple[int, frozenset], float] = {}

    def value_fn(anchor: int, members: frozenset) -> float:
        key = (anchor, members)
        v = cache.get(key)
        if v is None:
            v, _ = _coalition_detail(channel, dist, use_seeds, anchor, members)
            cache[key] = v
        return v

    return value_fn


def initial_partition(inst: ContentInstance) -> Partition:
    """Every UE joins the coalition of its nearest cellular anchor."""
    cue = np.asarray(inst.cue_pos)
    members: list[set[int]] = [set() for _ in range(inst.scenario.m_cue)]
    for u, pos in enumerate(inst.ue_pos):
        d = np.hypot(cue[:, 0] - pos[0], cue[:, 1] - pos[1])
        members[int(np.argmin(d))].add(u)
    return Partition(members=tuple(frozenset(ms) for ms in members))


def switch_step(
    partition: Partition, value_fn: Callable[[int, frozenset], float]
) -> tuple[Partition, bool]:
    """Execute the first strictly-improving single-UE move, if any.

    Players and target coalitions are scanned in fixed index order; a move
    needs the combined value of the two touched coalitions to rise by more
    than :data:`GAIN_EPS`.
    """
    n_coal = len(partition.members)
    for ue in sorted(set().union(*partition.members)):
        src = partition.anchor_of(ue)
        v_src = value_fn(src, partition.members[src])
        v_src_out = value_fn(src, partition.members[src] - {ue})
        for dst in range(n_coal):
            if dst == src:
                continue
            v_dst = value_fn(dst, partition.members[dst])
            v_dst_in = value_fn(dst, partition.members[dst] | {ue})
            if (v_src_out + v_dst_in) - (v_src + v_dst) > GAIN_EPS:
                return partition.move(ue, dst), True
    return partition, False


def run_switch_dynamics(
    partition0: Partition,
    value_fn: Callable[[int, frozenset], float],
    max_steps: int = 100_000,
) -> Partition:
    """Iterate switch moves to a switch-stable partition."""
    partition = partition0
    for _ in range(max_steps):
        partition, moved = switch_step(partition, value_fn)
        if not moved:
            return partition
    raise RuntimeError(
        f"switch dynamics did not stabilize within {max_steps} moves; "
        "the value function is likely inconsistent"
    )


def merge_split(
    coalitions0: Iterable[frozenset],
    value_fn: Callable[[frozenset], float],
    max_steps: int = 100_000,
) -> list[frozenset]:
    """Generic merge-and-split on an anchor-free strategic-form value function.

    Merges any two coalitions whose union is worth strictly more than the sum
    of the parts, and splits any coalition into two parts worth strictly more
    together; first improvement in canonical order, until neither applies.
    """
    cache: dict[frozenset, float] = {}

    def v(c: frozenset) -> float:
        if c not in cache:
            cache[c] = value_fn(c)
        return cache[c]

    parts = [frozenset(c) for c in coalitions0 if c]
    for _ in range(max_steps):
        parts.sort(key=lambda c: sorted(c))
        changed = False
        for a in range(len(parts)):
            for b in range(a + 1, len(parts)):
                union = parts[a] | parts[b]
                if v(union) > v(parts[a]) + v(parts[b]) + GAIN_EPS:
                    merged = union
                    parts = [p for i, p in enumerate(parts) if i not in (a, b)]
                    parts.append(merged)
                    changed = True
                    break
            if changed:
                break
        if changed:
            continue
        for idx, c in enumerate(parts):
            if len(c) < 2:
                continue
            rest = sorted(c - {min(c)})
            for pick in range(1, 2 ** len(rest)):
                s1 = frozenset({min(c)} | {rest[i] for i in range(len(rest)) if (pick >> i) & 1})
                s2 = c - s1
                if not s2:
                    continue
                if v(s1) + v(s2) > v(c) + GAIN_EPS:
                    parts = [p for i, p in enumerate(parts) if i != idx]
                    parts.extend([s1, s2])
                    changed = True
                    break
            if changed:
                break
        if not changed:
            return sorted(parts, key=lambda c: sorted(c))
    raise RuntimeError(f"merge/split did not stabilize within {max_steps} operations")


def _noncoop_sinr(
    channel: _ContentChannel,
    dist: np.ndarray,
    seeds: frozenset[int],
    assignment: np.ndarray,
    ue: int,
    anchor: int,
) -> float:
    members = frozenset(np.flatnonzero(assignment == anchor)) | {ue}
    seed_list = sorted(s for s in members if s in seeds and s != ue)
    if not seed_list:
        return 0.0
    serving: dict[int, int] = {}
    for u in sorted(m for m in members if m not in seeds):
        serving[u] = min(seed_list, key=lambda s: (dist[s, u], s))
    s_own = serving[ue]
    transmitting = set(serving.values())
    interf = channel.cell_at_ue[ue, anchor]
    for t in transmitting:
        if t != s_own:
            interf += channel.uu[t, ue, anchor]
    return channel.uu[s_own, ue, anchor] / (channel.sigma + interf)


def noncooperative_baseline(
    gains: radio.GainTensor,
    params: radio.RadioParams,
    inst: ContentInstance,
    seeds: frozenset[int] | None = None,
    partition0: Partition | None = None,
    max_sweeps: int = 50,
) -> Partition:
    """Selfish channel selection: every normal UE chases its own best SINR.

    Seeds sit in their warm-start coalition (initially: nearest anchor) and do
    not act. Normal UEs repeatedly jump to the (RB, nearest-seed) choice with
    the best own SINR given everyone else's previous choice, ignoring the harm
    to others, until a fixed point or the sweep cap.
    """
    use_seeds = inst.seeds if seeds is None else frozenset(seeds)
    channel = _ContentChannel(inst, gains, params)
    dist = inst.distances()
    n = inst.scenario.n_d2d
    m = inst.scenario.m_cue
    if partition0 is None:
        partition0 = initial_partition(inst)
    assignment = np.empty(n, dtype=int)
    for u in range(n):
        assignment[u] = partition0.anchor_of(u)
    normals = [u for u in range(n) if u not in use_seeds]
    for _ in range(max_sweeps):
        moved = False
        for u in normals:
            current = int(assignment[u])
            assignment[u] = -1  # evaluate candidate RBs without u counted twice
            best_r, best_g = current, _noncoop_sinr(channel, dist, use_seeds, assignment, u, current)
            for r in range(m):
                if r == current:
                    continue
                g = _noncoop_sinr(channel, dist, use_seeds, assignment, u, r)
                if g > best_g * (1.0 + 1e-12) and g > best_g:
                    best_r, best_g = r, g
            assignment[u] = best_r
            if best_r != current:
                moved = True
        if not moved:
            break
    members = [frozenset(np.flatnonzero(assignment == r)) for r in range(m)]
    return Partition(members=tuple(members))


@dataclass
class ServiceCurve:
    """Cumulative possessed packets per round, plus the per-round total values."""

    allocator: str
    cumulative: list[int]
    total_values: list[float] = field(default_factory=list)


def simulate_content_distribution(
    scenario: ContentScenario,
    params: radio.RadioParams,
    allocator: str,
    rounds: int,
    rng_seed: int,
    hotspot_radius_m: float = 15.0,
    hotspot_center: Point | None = None,
) -> ServiceCurve:
    """Round-based dissemination: fresh fading, re-formed partition, delivery.

    Each round every normal UE receives ``floor(packets_per_rate_unit * rate)``
    packets from its serving seed, capped at the remaining file; UEs that
    complete the file serve as seeds from the next round on. The random draws
    depend only on ``rng_seed`` and the round index, so coalition and
    noncooperative runs with equal seeds see identical channels.
    """
    if allocator not in ("coalition", "noncooperative"):
        raise ValueError(f"unknown allocator {allocator!r}")
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    scenario.validate()
    inst = generate_content_instance(
        scenario, params, derive_seed(rng_seed, 0), hotspot_radius_m, hotspot_center
    )
    dist = inst.distances()
    total_file = scenario.file_packets
    packets = np.zeros(scenario.n_d2d, dtype=int)
    seeds = set(inst.seeds)
    for s in seeds:
        packets[s] = total_file
    partition = initial_partition(inst)
    curve = ServiceCurve(allocator=allocator, cumulative=[int(packets.sum())])
    for t in range(1, rounds + 1):
        gains = draw_content_gains(inst, params, derive_seed(rng_seed, t))
        frozen_seeds = frozenset(seeds)
        if allocator == "coalition":
            value_fn = make_value_fn(inst, gains, params, seeds=frozen_seeds)
            partition = run_switch_dynamics(partition, value_fn)
        else:
            partition = noncooperative_baseline(
                gains, params, inst, seeds=frozen_seeds, partition0=partition
            )
        channel = _ContentChannel(inst, gains, params)
        round_value = 0.0
        for anchor, members in enumerate(partition.members):
            value, rates = _coalition_detail(channel, dist, frozen_seeds, anchor, members)
            round_value += value
            for u, r in rates.items():
                if packets[u] < total_file:
                    gained = int(math.floor(scenario.packets_per_rate_unit * r))
                    packets[u] = min(total_file, packets[u] + gained)
        for u in range(scenario.n_d2d):
            if packets[u] >= total_file:
                seeds.add(u)
        curve.cumulative.append(int(packets.sum()))
        curve.total_values.append(round_value)
    return curve
