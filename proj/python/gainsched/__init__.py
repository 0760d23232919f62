"""Droop gain scheduling for distribution feeders with storage."""

from ._core import (
    Feeder,
    GainschedError,
    ac_power_flow,
    build_rx,
    closed_loop,
    design_direct,
    feeder_from_json,
    lindistflow_voltage,
    load_feeder,
    run_rho,
    simulate_dynamics,
    steady_state,
    trace_metrics,
)

__all__ = [
    "Feeder",
    "GainschedError",
    "ac_power_flow",
    "build_rx",
    "closed_loop",
    "design_direct",
    "feeder_from_json",
    "lindistflow_voltage",
    "load_feeder",
    "run_rho",
    "simulate_dynamics",
    "steady_state",
    "trace_metrics",
]
