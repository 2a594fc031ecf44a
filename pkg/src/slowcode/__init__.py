"""Slow-time unimodular code design against FMCW mutual interference."""

from .core import (
    Code,
    CodeSet,
    DesignConfig,
    Emitter,
    FmcwParams,
    deserialize_codebook,
    random_unimodular_code,
    serialize_codebook,
)
from .pcaf import PcafGrid, build_B_fast, build_B_naive, objective_siso, pcaf_grid
from .siso import design_siso, doppler_shift_pair
from .mimo import design_mimo
from .metrics import RegionSpec, isl, psl_db, zero_delay_cut
from .fmcw_sim import SimScenario, range_doppler_map, synthesize_samples, power_ratio_db

__all__ = [
    "Code", "CodeSet", "DesignConfig", "Emitter", "FmcwParams",
    "deserialize_codebook", "serialize_codebook", "random_unimodular_code",
    "PcafGrid", "pcaf_grid", "build_B_fast", "build_B_naive", "objective_siso",
    "design_siso", "doppler_shift_pair", "design_mimo",
    "RegionSpec", "psl_db", "isl", "zero_delay_cut",
    "SimScenario", "synthesize_samples", "range_doppler_map", "power_ratio_db",
]
