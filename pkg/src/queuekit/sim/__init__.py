"""Discrete-event simulation oracle for the analytic modules."""
from .core import EventQueue, SimConfig, SimEstimate, SimResult, make_rng
from .polling import simulate_polling
from .ruin import simulate_ruin
from .stations import simulate_single_queue, simulate_tandem

__all__ = [
    "EventQueue", "SimConfig", "SimEstimate", "SimResult", "make_rng",
    "simulate_single_queue", "simulate_tandem", "simulate_polling", "simulate_ruin",
]
