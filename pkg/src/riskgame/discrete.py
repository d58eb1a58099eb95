"""Finite action grids and dense expected-payoff matrices."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import GameSpec, utility2

__all__ = ["ActionGrid", "DiscreteGame", "build_grid", "payoff_matrices", "matrix_game"]


@dataclass(frozen=True)
class ActionGrid:
    actions_p1: np.ndarray
    actions_p2: np.ndarray
    shift: bool = False

    def __post_init__(self):
        for acts in (self.actions_p1, self.actions_p2):
            if acts.ndim != 1 or np.any(np.diff(acts) <= 0):
                raise ValueError("grid actions must be strictly increasing")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.actions_p1), len(self.actions_p2)


@dataclass(frozen=True)
class DiscreteGame:
    grid: ActionGrid
    U1: np.ndarray
    U2: np.ndarray
    spec: GameSpec | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.U1.shape

    def to_csv(self, path, player: int = 1):
        """Write one payoff matrix; rows are player-1 action indices."""
        U = self.U1 if player == 1 else self.U2
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["a1\\a2", *(repr(float(b)) for b in self.grid.actions_p2)])
            for a, row in zip(self.grid.actions_p1, U):
                writer.writerow([repr(float(a)), *(repr(float(v)) for v in row)])


def build_grid(a: int, shift: bool) -> ActionGrid:
    """``a`` points per player in [0, 1), anchored at 0.

    Without shift both players get ``i / a``. With shift the base points
    ``j / (2a)`` alternate between the players, so the grids never intersect.
    """
    if a < 2:
        raise ValueError("need at least two actions per player")
    if shift:
        base = np.arange(2 * a) / (2 * a)
        return ActionGrid(base[0::2].copy(), base[1::2].copy(), True)
    acts = np.arange(a) / a
    return ActionGrid(acts, acts.copy(), False)


def payoff_matrices(grid: ActionGrid, spec: GameSpec, chunk_rows: int = 256) -> DiscreteGame:
    if spec.n != 2:
        raise ValueError("discretisation is two-player only")
    a1, a2 = grid.shape
    U1 = np.empty((a1, a2))
    U2 = np.empty((a1, a2))
    b = grid.actions_p2[None, :]
    for start in range(0, a1, chunk_rows):
        rows = slice(start, min(start + chunk_rows, a1))
        U1[rows], U2[rows] = utility2(grid.actions_p1[rows, None], b, spec)
    return DiscreteGame(grid, U1, U2, spec)


def matrix_game(U1, U2, actions_p1=None, actions_p2=None) -> DiscreteGame:
    """Wrap arbitrary bimatrix payoffs (used for control games and tests)."""
    U1 = np.asarray(U1, dtype=float)
    U2 = np.asarray(U2, dtype=float)
    if U1.shape != U2.shape or U1.ndim != 2:
        raise ValueError("payoff matrices must share a 2-D shape")
    a1, a2 = U1.shape
    acts1 = np.arange(a1) / a1 if actions_p1 is None else np.asarray(actions_p1, dtype=float)
    acts2 = np.arange(a2) / a2 if actions_p2 is None else np.asarray(actions_p2, dtype=float)
    return DiscreteGame(ActionGrid(acts1, acts2, False), U1, U2, None)
