"""Simulator and analysis toolkit for a multiplexed microwave QD readout matrix."""

from .device import (
    AccessTransistorParams,
    BiasRegion,
    ChargeTransition,
    DeviceParams,
    access_capacitance,
    access_resistance,
    bias_region,
    coulomb_current,
    default_access_params,
    dispersive_capacitance,
)
from .cells import (
    CellState,
    MatrixConfig,
    cell_branch_impedance,
    equilibrium_gate_voltage,
    lines_required,
    matrix_gate_load,
    retention_time,
    step_cell,
)
from .rf import (
    Carrier,
    CarrierSet,
    NoiseModel,
    ResonatorSpec,
    calibrate_resonator,
    demodulate,
    dip_metrics,
    input_impedance,
    reflection_coefficient,
    reflection_from_impedance,
)
from .mux import (
    DecayRecord,
    Drive,
    Segment,
    SegmentWindow,
    StabilityMap,
    Trace,
    WaveformProgram,
    build_combined,
    build_freq_mux,
    build_time_mux,
    demux,
    run_experiment,
    run_retention,
    run_source_sweep,
    static_dc_map,
    static_dc_sweep,
    static_rf_map,
)
from .analysis import (
    PeakFit,
    ResonanceFit,
    RetentionFit,
    extract_charging_energy,
    fit_lorentzian,
    fit_resonance,
    fit_retention,
    match_decay_peaks,
    min_integration_time,
    snr,
    subtract_background,
)
from .errors import CalibrationError, DipNotFound, FitNonConvergence, ValidationError

__version__ = "0.1.0"
