"""Single-cell radio model: geometry, channel gains, SINR and spectral efficiency.

Nodes are identified by small tuples: ``("enb", 0)`` for the base station,
``("cue", i)`` for cellular users, ``("dtx", j)`` / ``("drx", j)`` for the two
ends of a D2D pair, and ``("ue", i)`` for standalone device nodes used by the
group-communication scenario. Channel gains are linear power gains
(path loss times small-scale fading); rates are spectral efficiencies in
bits/s/Hz so that bandwidth never enters any reported number.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

UPLINK = "uplink"
DOWNLINK = "downlink"

# Device-to-device links (including cross links between different pairs) are
# modeled line-of-sight; everything touching the eNB, and the interference
# links between cellular users and devices, are non-line-of-sight.
_DEVICE_KINDS = frozenset({"dtx", "drx", "ue"})

Node = tuple[str, int]
Point = tuple[float, float]


def dbm_to_watt(p_dbm: float) -> float:
    """Convert a power level in dBm to watts."""
    if not math.isfinite(p_dbm):
        raise ValueError(f"power must be finite, got {p_dbm!r}")
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watt_to_dbm(p_w: float) -> float:
    if p_w <= 0.0:
        raise ValueError(f"power must be > 0 W, got {p_w!r}")
    return 10.0 * math.log10(p_w) + 30.0


@dataclass(frozen=True)
class RadioParams:
    """Static physical-layer parameters of the isolated, single-sector cell."""

    cell_radius_m: float = 500.0
    max_d2d_distance_m: float = 20.0
    p_cue_dbm: float = 23.0
    p_d2d_dbm: float = 23.0
    p_enb_dbm: float = 30.0
    noise_dbm: float = -104.0
    noise_figure_db: float = 7.0
    carrier_ghz: float = 2.0
    link_direction: str = DOWNLINK

    def validate(self) -> "RadioParams":
        if not self.cell_radius_m > 0:
            raise ValueError(
                f"cell_radius_m must be > 0 (invariant: cell_radius > 0), got {self.cell_radius_m}"
            )
        if not 0 < self.max_d2d_distance_m < self.cell_radius_m:
            raise ValueError(
                "max_d2d_distance_m must satisfy 0 < max_d2d_distance < cell_radius, "
                f"got {self.max_d2d_distance_m}"
            )
        for name in ("p_cue_dbm", "p_d2d_dbm", "p_enb_dbm", "noise_dbm", "noise_figure_db"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)}")
        if not self.carrier_ghz > 0:
            raise ValueError(f"carrier_ghz must be > 0, got {self.carrier_ghz}")
        if self.link_direction not in (UPLINK, DOWNLINK):
            raise ValueError(
                f"link_direction must be '{UPLINK}' or '{DOWNLINK}', got {self.link_direction!r}"
            )
        return self

    @property
    def p_cue_w(self) -> float:
        return dbm_to_watt(self.p_cue_dbm)

    @property
    def p_d2d_w(self) -> float:
        return dbm_to_watt(self.p_d2d_dbm)

    @property
    def p_enb_w(self) -> float:
        return dbm_to_watt(self.p_enb_dbm)


def effective_noise_w(params: RadioParams) -> float:
    """Thermal noise plus receiver noise figure, in watts."""
    return dbm_to_watt(params.noise_dbm + params.noise_figure_db)


def pathloss_db(d_m: float, fc_ghz: float, los: bool) -> float:
    """Urban-micro log-distance path loss in dB.

    LOS:  22 log10(d) + 28 + 20 log10(fc); NLOS: 36.7 log10(d) + 22.7 + 26 log10(fc).
    Distances below 10 m are clamped to 10 m so the model stays finite at short range.
    """
    if d_m <= 0:
        raise ValueError(f"distance must be > 0 m, got {d_m}")
    if fc_ghz <= 0:
        raise ValueError(f"carrier frequency must be > 0 GHz, got {fc_ghz}")
    d = max(d_m, 10.0)
    if los:
        return 22.0 * math.log10(d) + 28.0 + 20.0 * math.log10(fc_ghz)
    return 36.7 * math.log10(d) + 22.7 + 26.0 * math.log10(fc_ghz)


@dataclass(frozen=True)
class Topology:
    """Node layout of one cell: eNB, cellular users, and D2D pairs.

    There is one resource block per cellular user, so ``rb_count == len(cue)``.
    """

    enb_pos: Point
    cue: tuple[Point, ...]
    d2d_pairs: tuple[tuple[Point, Point], ...]

    @property
    def rb_count(self) -> int:
        return len(self.cue)

    @property
    def n_pairs(self) -> int:
        return len(self.d2d_pairs)

    def to_jsonable(self) -> dict:
        return {
            "enb_pos": list(self.enb_pos),
            "cue": [list(p) for p in self.cue],
            "d2d_pairs": [[list(tx), list(rx)] for tx, rx in self.d2d_pairs],
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "Topology":
        return cls(
            enb_pos=tuple(obj["enb_pos"]),
            cue=tuple(tuple(p) for p in obj["cue"]),
            d2d_pairs=tuple((tuple(tx), tuple(rx)) for tx, rx in obj["d2d_pairs"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_jsonable(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        return cls.from_jsonable(json.loads(text))


@dataclass
class GainTensor:
    """Per-RB linear power gains for every modeled transmitter→receiver link."""

    rb_count: int
    gains: dict[tuple[Node, Node, int], float]

    def __post_init__(self):
        for key, g in self.gains.items():
            if not (g > 0.0 and math.isfinite(g)):
                raise ValueError(f"gain for {key} must be positive and finite, got {g}")

    def get(self, tx: Node, rx: Node, rb: int) -> float:
        return self.gains[(tx, rx, rb)]

    def to_jsonable(self) -> dict:
        entries = [
            [tx[0], tx[1], rx[0], rx[1], rb, g]
            for (tx, rx, rb), g in sorted(self.gains.items())
        ]
        return {"rb_count": self.rb_count, "entries": entries}

    @classmethod
    def from_jsonable(cls, obj: dict) -> "GainTensor":
        gains = {
            ((tk, ti), (rk, ri), rb): g
            for tk, ti, rk, ri, rb, g in obj["entries"]
        }
        return cls(rb_count=obj["rb_count"], gains=gains)

    def to_json(self) -> str:
        return json.dumps(self.to_jsonable(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GainTensor":
        return cls.from_jsonable(json.loads(text))


@dataclass
class Allocation:
    """Spectrum assignment and transmit powers produced by an allocator.

    ``rb_of_d2d`` maps a D2D pair index to the RB it occupies; pairs absent
    from the map are silent. Pairs listed in ``relay_d2d`` do not transmit
    directly: their traffic is carried as a two-hop cellular relay
    (source→eNB→destination) on their assigned RB, scheduled orthogonally, so
    they inject no interference. ``tx_power_w`` overrides per-transmitter
    powers; missing transmitters fall back to the class defaults in
    :class:`RadioParams`.
    """

    rb_of_d2d: dict[int, int] = field(default_factory=dict)
    tx_power_w: dict[Node, float] = field(default_factory=dict)
    relay_d2d: frozenset[int] = frozenset()

    def active_direct(self) -> list[int]:
        return sorted(j for j in self.rb_of_d2d if j not in self.relay_d2d)

    def direct_on_rb(self, rb: int) -> list[int]:
        return sorted(
            j for j, r in self.rb_of_d2d.items() if r == rb and j not in self.relay_d2d
        )


def _draw_disc_point(rng: np.random.Generator, center: Point, radius: float) -> Point:
    r = radius * math.sqrt(rng.uniform())
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return (center[0] + r * math.cos(theta), center[1] + r * math.sin(theta))


def generate_topology(params: RadioParams, m: int, n: int, rng_seed: int) -> Topology:
    """Draw a seeded random cell layout with m cellular users and n D2D pairs.

    Cellular users and D2D transmitters are uniform in the cell disc; each D2D
    receiver is uniform in a disc of radius ``max_d2d_distance_m`` around its
    transmitter, redrawn until it falls inside the cell.
    """
    params.validate()
    if m < 1:
        raise ValueError(f"need at least one cellular user, got m={m}")
    if n < 0:
        raise ValueError(f"pair count must be >= 0, got n={n}")
    rng = np.random.default_rng(rng_seed)
    enb = (0.0, 0.0)
    cue = tuple(_draw_disc_point(rng, enb, params.cell_radius_m) for _ in range(m))
    pairs = []
    for _ in range(n):
        tx = _draw_disc_point(rng, enb, params.cell_radius_m)
        while True:
            rx = _draw_disc_point(rng, tx, params.max_d2d_distance_m)
            if math.hypot(rx[0], rx[1]) <= params.cell_radius_m:
                break
        pairs.append((tx, rx))
    return Topology(enb_pos=enb, cue=cue, d2d_pairs=tuple(pairs))


def is_los(tx: Node, rx: Node) -> bool:
    return tx[0] in _DEVICE_KINDS and rx[0] in _DEVICE_KINDS


def build_gain_tensor(
    links: Sequence[tuple[Node, Point, Node, Point]],
    rb_count: int,
    params: RadioParams,
    rng_seed: int,
) -> GainTensor:
    """Path loss times per-(link, RB) unit-mean exponential fading power.

    The fading draw order is fixed by the link order, so identical inputs give
    a bit-identical tensor.
    """
    rng = np.random.default_rng(rng_seed)
    gains: dict[tuple[Node, Node, int], float] = {}
    for tx, tx_pos, rx, rx_pos in links:
        d = max(math.hypot(tx_pos[0] - rx_pos[0], tx_pos[1] - rx_pos[1]), 1e-9)
        pl_lin = 10.0 ** (-pathloss_db(d, params.carrier_ghz, is_los(tx, rx)) / 10.0)
        fading = rng.exponential(1.0, size=rb_count)
        for rb in range(rb_count):
            gains[(tx, rx, rb)] = pl_lin * float(fading[rb])
    return GainTensor(rb_count=rb_count, gains=gains)


def _topology_links(topology: Topology) -> list[tuple[Node, Point, Node, Point]]:
    enb: Node = ("enb", 0)
    links = []
    for i, cpos in enumerate(topology.cue):
        links.append((enb, topology.enb_pos, ("cue", i), cpos))
        links.append((("cue", i), cpos, enb, topology.enb_pos))
    for j, (tx, rx) in enumerate(topology.d2d_pairs):
        links.append((("dtx", j), tx, enb, topology.enb_pos))
        links.append((enb, topology.enb_pos, ("drx", j), rx))
        for i, cpos in enumerate(topology.cue):
            links.append((("dtx", j), tx, ("cue", i), cpos))
            links.append((("cue", i), cpos, ("drx", j), rx))
        for k, (_, rx2) in enumerate(topology.d2d_pairs):
            links.append((("dtx", j), tx, ("drx", k), rx2))
    return links


def draw_gains(topology: Topology, params: RadioParams, rng_seed: int) -> GainTensor:
    """Draw the full gain tensor for one fading realization of a topology."""
    params.validate()
    return build_gain_tensor(
        _topology_links(topology), topology.rb_count, params, rng_seed
    )


def cellular_tx_node(params: RadioParams, rb: int) -> Node:
    return ("enb", 0) if params.link_direction == DOWNLINK else ("cue", rb)


def cellular_rx_node(params: RadioParams, rb: int) -> Node:
    return ("cue", rb) if params.link_direction == DOWNLINK else ("enb", 0)


def default_power_w(params: RadioParams, node: Node) -> float:
    kind = node[0]
    if kind == "enb":
        return params.p_enb_w
    if kind == "cue":
        return params.p_cue_w
    if kind in ("dtx", "ue"):
        return params.p_d2d_w
    raise ValueError(f"node {node!r} is not a transmitter")


def tx_power_w(allocation: Allocation, params: RadioParams, node: Node) -> float:
    p = allocation.tx_power_w.get(node)
    return default_power_w(params, node) if p is None else p


def sinr(
    allocation: Allocation,
    gains: GainTensor,
    params: RadioParams,
    receiver: Node,
    rb: int,
) -> float:
    """SINR at ``receiver`` on resource block ``rb`` under the given allocation.

    Interference aggregates the co-channel cellular transmitter (cross tier)
    and every co-channel directly-transmitting D2D pair (co tier). Raises if
    the receiver is not active on that RB.
    """
    if receiver[0] == "drx":
        j = receiver[1]
        if allocation.rb_of_d2d.get(j) != rb or j in allocation.relay_d2d:
            raise ValueError(f"D2D receiver {j} is not directly active on RB {rb}")
        tx = ("dtx", j)
        interferers = [("dtx", k) for k in allocation.direct_on_rb(rb) if k != j]
        interferers.append(cellular_tx_node(params, rb))
    elif receiver == cellular_rx_node(params, rb):
        tx = cellular_tx_node(params, rb)
        interferers = [("dtx", k) for k in allocation.direct_on_rb(rb)]
    else:
        raise ValueError(f"receiver {receiver!r} is not active on RB {rb}")
    signal = tx_power_w(allocation, params, tx) * gains.get(tx, receiver, rb)
    denom = effective_noise_w(params)
    for node in interferers:
        denom += tx_power_w(allocation, params, node) * gains.get(node, receiver, rb)
    return signal / denom


def rate(gamma: float) -> float:
    """Shannon spectral efficiency log2(1 + SINR) in bits/s/Hz."""
    if gamma < 0:
        raise ValueError(f"SINR must be >= 0, got {gamma}")
    return math.log2(1.0 + gamma)


def _relay_rate(allocation: Allocation, gains: GainTensor, params: RadioParams, j: int) -> float:
    # Two orthogonal hops through the eNB; the bottleneck is halved because the
    # relay occupies two scheduling slots.
    rb = allocation.rb_of_d2d[j]
    sigma = effective_noise_w(params)
    up = rate(params.p_cue_w * gains.get(("dtx", j), ("enb", 0), rb) / sigma)
    down = rate(params.p_enb_w * gains.get(("enb", 0), ("drx", j), rb) / sigma)
    return 0.5 * min(up, down)


def sum_rate(allocation: Allocation, gains: GainTensor, params: RadioParams) -> float:
    """Total spectral efficiency over all cellular links and D2D flows."""
    total = 0.0
    for rb in range(gains.rb_count):
        total += rate(sinr(allocation, gains, params, cellular_rx_node(params, rb), rb))
    for j in allocation.active_direct():
        total += rate(sinr(allocation, gains, params, ("drx", j), allocation.rb_of_d2d[j]))
    for j in sorted(allocation.relay_d2d):
        total += _relay_rate(allocation, gains, params, j)
    return total
