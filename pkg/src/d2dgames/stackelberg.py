"""Leader-follower pricing game on a single resource block.

The cellular user (leader) charges the D2D user (follower) per unit of
transmit power. The follower's problem is concave in its power, so its best
response has a water-filling style closed form; the leader picks the price by
exhaustive grid search because its utility need not be concave in the price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from d2dgames import radio

LN2 = math.log(2.0)


@dataclass
class StackelbergInstance:
    g_dd: float            # D2D transmitter -> D2D receiver
    g_db: float            # D2D transmitter -> cellular receiver
    g_cc: float            # cellular transmitter -> cellular receiver
    g_cd: float            # cellular transmitter -> D2D receiver
    p_c_w: float
    sigma_w: float
    p_max_w: float
    lambda_min: float = 0.0
    lambda_max: float | None = None   # defaults to g_dd / (sigma * ln 2)
    lambda_points: int = 2000

    def __post_init__(self):
        for name in ("g_dd", "g_db", "g_cc", "g_cd"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.p_c_w < 0 or self.p_max_w < 0:
            raise ValueError("powers must be >= 0")
        if self.sigma_w <= 0:
            raise ValueError(f"sigma_w must be > 0, got {self.sigma_w}")
        if self.lambda_max is None:
            self.lambda_max = self.g_dd / (self.sigma_w * LN2)
        if not (self.lambda_min >= 0 and self.lambda_max > self.lambda_min):
            raise ValueError("price range must satisfy 0 <= lambda_min < lambda_max")
        if self.lambda_points < 2:
            raise ValueError(f"lambda_points must be >= 2, got {self.lambda_points}")

    def lambda_grid(self) -> np.ndarray:
        return np.linspace(self.lambda_min, self.lambda_max, self.lambda_points)

    @property
    def follower_interference_w(self) -> float:
        return self.sigma_w + self.p_c_w * self.g_cd

    def follower_utility(self, p_w: float, lam: float) -> float:
        return math.log2(1.0 + p_w * self.g_dd / self.follower_interference_w) - lam * p_w

    def leader_utility(self, lam: float, p_w: float) -> float:
        own = math.log2(1.0 + self.p_c_w * self.g_cc / (self.sigma_w + p_w * self.g_db))
        return own + lam * p_w


@dataclass
class StackelbergOutcome:
    lambda_star: float
    p_star_w: float
    u_leader: float
    u_follower: float


def follower_best_response(instance: StackelbergInstance, lam: float) -> float:
    """Power maximizing throughput minus payment: clamp(1/(lam ln2) - I/g, 0, p_max)."""
    if lam < 0:
        raise ValueError(f"price must be >= 0, got {lam}")
    if lam == 0.0:
        return instance.p_max_w
    p = 1.0 / (lam * LN2) - instance.follower_interference_w / instance.g_dd
    return min(max(p, 0.0), instance.p_max_w)


def leader_optimize(instance: StackelbergInstance) -> StackelbergOutcome:
    """Grid search the price; ties break toward the smaller price."""
    grid = instance.lambda_grid()
    if len(grid) == 0:
        raise ValueError("empty price grid")
    best = None
    for lam in grid:
        lam = float(lam)
        p = follower_best_response(instance, lam)
        u_l = instance.leader_utility(lam, p)
        if best is None or u_l > best[0]:
            best = (u_l, lam, p)
    u_l, lam, p = best
    return StackelbergOutcome(
        lambda_star=lam,
        p_star_w=p,
        u_leader=u_l,
        u_follower=instance.follower_utility(p, lam),
    )


def verify_equilibrium(
    instance: StackelbergInstance,
    outcome: StackelbergOutcome,
    eps: float = 1e-9,
    power_grid_points: int = 1001,
) -> bool:
    """Check no grid deviation improves either side by more than ``eps``.

    Follower deviations range over a power grid at the equilibrium price;
    leader deviations range over the instance's price grid with the follower
    best-responding.
    """
    if math.isinf(eps):
        return True
    u_f_star = instance.follower_utility(outcome.p_star_w, outcome.lambda_star)
    for p in np.linspace(0.0, instance.p_max_w, power_grid_points):
        if instance.follower_utility(float(p), outcome.lambda_star) > u_f_star + eps:
            return False
    u_l_star = outcome.u_leader
    for lam in instance.lambda_grid():
        lam = float(lam)
        p = follower_best_response(instance, lam)
        if instance.leader_utility(lam, p) > u_l_star + eps:
            return False
    return True


def choose_channel(instances: list[StackelbergInstance]) -> tuple[int, StackelbergOutcome]:
    """Follower-side channel selection: best follower utility across candidate RBs."""
    if not instances:
        raise ValueError("no candidate channels")
    outcomes = [leader_optimize(inst) for inst in instances]
    best = max(range(len(instances)), key=lambda i: (outcomes[i].u_follower, -i))
    return best, outcomes[best]


def stackelberg_from_radio(
    topology: radio.Topology,
    gains: radio.GainTensor,
    params: radio.RadioParams,
    pair: int = 0,
    rb: int = 0,
    lambda_points: int = 2000,
) -> StackelbergInstance:
    """Single-pair, single-RB pricing instance drawn from a channel realization."""
    cell_tx = radio.cellular_tx_node(params, rb)
    cell_rx = radio.cellular_rx_node(params, rb)
    return StackelbergInstance(
        g_dd=gains.get(("dtx", pair), ("drx", pair), rb),
        g_db=gains.get(("dtx", pair), cell_rx, rb),
        g_cc=gains.get(cell_tx, cell_rx, rb),
        g_cd=gains.get(cell_tx, ("drx", pair), rb),
        p_c_w=radio.default_power_w(params, cell_tx),
        sigma_w=radio.effective_noise_w(params),
        p_max_w=params.p_d2d_w,
        lambda_points=lambda_points,
    )
