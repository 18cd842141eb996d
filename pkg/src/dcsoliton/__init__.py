"""Reversible three-state cellular automaton with mirror-point analysis."""

from .engine import RunOutcome, Trajectory, evolve, run_to_mirror, step_backward, step_forward
from .lattice import A, B, C, CellState, Grid, Mask, bundled_mask, bundled_masks, parse_mask, random_initial

__version__ = "0.1.0"

__all__ = [
    "A", "B", "C", "CellState", "Grid", "Mask", "RunOutcome", "Trajectory",
    "bundled_mask", "bundled_masks", "evolve", "parse_mask", "random_initial",
    "run_to_mirror", "step_backward", "step_forward",
]
