"""Fractional Keller-Segel dynamics in a Couette shear on a periodic box.

Modules
-------
symbol        accumulated symbol of the linear shear/fractional operator
spectral      grids, FFT conventions, norms
propagator    exact linear evolution in the shear frame, remapping
interaction   attractive kernel and chemotactic term
timestepper   exponential Heun integrator and blow-up detection
diagnostics   norm time series, decay fits, suppression verdict
estimates     numerical checks of the Green's-function estimates
config, snapshot, experiments, cli
              configuration files, binary snapshots, run drivers, command line
"""
from .errors import *  # noqa: F401,F403
from .symbol import FlowParams, FreqPoint, QuadratureConfig, accumulated_symbol, green_hat
from .spectral import Field, GridSpec, SpectralField
from .propagator import ShearFrame, SimState
from .timestepper import StepConfig, StepStatus, run
from .diagnostics import NormsConfig, TimeSeries

__version__ = "0.1.0"
