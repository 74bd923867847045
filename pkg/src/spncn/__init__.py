"""Spiking neural coding networks trained with spike-triggered local updates."""
from .neuron import LIF, FilterMode, LifConfig, LifState, TraceConfig, lif_step, trace_update
from .encode import EncoderConfig
from .network import SpNCN, SpncnConfig, SpncnParams, SpncnState

__version__ = "0.1.0"
