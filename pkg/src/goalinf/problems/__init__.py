from .diagonal import diagonal_problem
from .heat import HeatConfig, HeatModel, heat_problem, selection_operator

__all__ = ["diagonal_problem", "HeatConfig", "HeatModel", "heat_problem", "selection_operator"]
