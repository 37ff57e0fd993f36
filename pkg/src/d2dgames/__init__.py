"""Game-theoretic radio resource allocation for D2D underlay cells."""

from d2dgames.radio import (
    Allocation,
    GainTensor,
    RadioParams,
    Topology,
    dbm_to_watt,
    draw_gains,
    effective_noise_w,
    generate_topology,
    pathloss_db,
    rate,
    sinr,
    sum_rate,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "GainTensor",
    "RadioParams",
    "Topology",
    "dbm_to_watt",
    "draw_gains",
    "effective_noise_w",
    "generate_topology",
    "pathloss_db",
    "rate",
    "sinr",
    "sum_rate",
    "__version__",
]
