from .energy import EnergyMeter, measure
from .harness import (
    RunConfig,
    RunResult,
    run_experiment,
    sweep_batch_sizes,
    sweep_prune_rates,
)
