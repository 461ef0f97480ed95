"""Tame KAM straightening of perturbed constant vector fields on tori,
with applications to quasi-periodic transport equations."""
from .fourier import FourierField, sobolev_norm, evaluate_at
from .diffeo import TorusDiffeo, VectorFieldOnTorus
from .kam import SchemeConstants, kam_iterate, kam_step, StraighteningResult
from .transport import TransportOperator, reduce, evolve_characteristics, forced_solve
from .params import ParamGrid, sweep, measure_excluded

__version__ = "0.1.0"
