"""Antenna-selection workbench for reduced-RF-chain systems.

Synthesizes RF switching fabrics and their insertion losses, simulates and
approximates the resulting sum rates, and evaluates end-to-end energy
efficiency.
"""

from .analysis import (
    OrderStatSpec,
    PowerScaling,
    RankSetDistribution,
    approx_capacity,
    moment_ordered_norm,
    power_scaling_ff,
    power_scaling_pc,
    rank_set_distribution,
)
from .channel import (
    ChannelMatrix,
    CovarianceSpec,
    IDENTITY,
    RngStreamSpec,
    column_powers,
    draw_channel,
)
from .connectivity import ConnectivityMap, build_connectivity
from .energy import (
    EnergyParams,
    EnergyReport,
    baseband_flops,
    energy_efficiency,
    interface_power,
    total_power,
)
from .fabric import (
    ArchitectureKind,
    DEFAULT_CATALOG,
    FabricDesign,
    StageDecomposition,
    SwitchCatalog,
    SwitchEntry,
    critical_path_loss,
    decompose_stage,
    design_fabric,
    load_catalog,
    round_up_factorizable,
)
from .rates import (
    FrameConfig,
    RateSample,
    TrainingMode,
    ergodic_rate,
    frame_split,
    sum_capacity,
    training_overhead,
    zf_sum_rate,
)
from .scenarios import LossMode, Precoder, ScenarioConfig, SelectionMode
from .selection import (
    PowerAllocation,
    SelectionMask,
    mask_capacity,
    select_csi,
    select_csi_greedy,
    select_power_ff,
    select_power_pc,
    waterfill_users,
)

__version__ = "0.1.0"
