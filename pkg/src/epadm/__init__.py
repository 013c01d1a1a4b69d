"""Euler-Poincare ideal fluid on fixed 3+1 (ADM) backgrounds.

Evolves the momentum one-form density ``m = dl/du`` and the density ``J0``
on a periodic grid, with closed-form variational derivatives, pointwise
velocity recovery, moving-frame variants and Kelvin-circulation diagnostics.
"""

from .diagnostics import MaterialLoop, circulation, circulation_moving, conserved_report
from .dynamics import FluidState, InertialModel, cfl_dt, ep_rhs, evolve, rk4_step, velocity_recovery
from .eos import Eos, ScaledEos
from .frames import FrameMotion, MovingFrameModel, MovingFrameState, frame_equivalence_check, make_frame
from .geometry import AdmBackground, BackgroundFields, builtin_background
from .grid import Grid
from .kinematics import builtin_map, four_form_oracle, number_current_from_map
from .lagrangian import EulerianFluid, dl_dJ0, dl_du, matter_source_terms, stress_energy
from .scenarios import Scenario, acoustic_dispersion, make_scenario

__version__ = "0.1.0"
