"""Two-state Gross-Pitaevskii simulation of a Bragg-outcoupled, optically focused atom laser."""

from .bragg import BraggConfig, bragg_wavenumber, calibrate_outcoupling, recoil_velocity, resonance_frequency
from .classical import calibrate_xi, integrate_trajectory
from .gpe import LossModel, Physics, StepperConfig, TwoStateSystem, evolve, ground_state, prepare_system
from .grid import ComplexField, SimGrid, atom_number, centroid_and_rms
from .params import BeamParams, SpeciesParams, TrapParams, interaction_strength
from .potentials import FocusConfig, focusing_potential, optimal_power, peak_intensity

__version__ = "0.1.0"
