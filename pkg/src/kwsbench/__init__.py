"""Keyword-spotting CNN inference with footprint, power and regression tooling."""
from .engine import ConvParams, DenseParams, conv2d, dense, maxpool, relu, softmax
from .footprint import FootprintReport, LayerFootprint, format_count, layer_footprint, model_footprint
from .frontend import MfccConfig, PcmBuffer, extract_mfcc, load_wav
from .powerbench import (BenchResult, PowerSample, PowerTrace, energy_per_query,
                         measure_latency, peak_power, run_bench)
from .stats import RegressionResult, correlate_table, ols, t_sf
from .zoo import (ArchSpec, LayerSpec, Model, WeightSet, builtin_arch, init_weights,
                  load_weights, parse_arch_config, save_weights, serialize_arch)

__version__ = "0.1.0"
