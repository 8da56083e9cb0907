"""Stationary distributions of finite discrete-time Markov chains."""

from __future__ import annotations

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateChainError

ROW_TOL = 1e-12
RESIDUAL_TOL = 1e-10


def check_stochastic(P: np.ndarray, tol: float = ROW_TOL) -> None:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"transition matrix must be square, got shape {P.shape}")
    # accumulated entries can overshoot 1 by an ulp
    if np.any(P < -tol) or np.any(P > 1 + tol):
        raise ValueError("transition matrix has entries outside [0, 1]")
    worst = np.max(np.abs(P.sum(axis=1) - 1.0))
    if worst > tol:
        raise ValueError(f"transition matrix rows do not sum to 1 (max deviation {worst:.3g})")


def recurrent_classes(P: np.ndarray) -> list[list[int]]:
    """Closed communicating classes of the chain, each as a sorted index list."""
    adj = (np.asarray(P) > 0).astype(np.int8)
    _, labels = connected_components(adj, directed=True, connection="strong")
    classes = []
    for lab in np.unique(labels):
        members = np.flatnonzero(labels == lab)
        outside = np.ones(len(labels), dtype=bool)
        outside[members] = False
        if not adj[np.ix_(members, outside)].any():
            classes.append(members.tolist())
    return classes


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Solve ``pi P = pi, sum(pi) = 1`` for a chain with one recurrent class.

    The balance system ``(P^T - I) pi = 0`` has one redundant row; it is
    replaced by the normalisation row and solved by LU with partial pivoting.
    Transient states get probability 0.
    """
    P = np.asarray(P, dtype=float)
    check_stochastic(P)
    classes = recurrent_classes(P)
    if len(classes) != 1:
        raise DegenerateChainError(
            f"chain has {len(classes)} recurrent classes, stationary vector is not unique: {classes}",
            classes=classes,
        )
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    # round-off can leave tiny negatives on transient states
    pi = np.where(np.abs(pi) < 1e-15, 0.0, pi)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    residual = np.max(np.abs(pi @ P - pi))
    if residual > RESIDUAL_TOL:
        # one step of iterative refinement
        r = rhs - A @ pi
        pi = np.clip(pi + np.linalg.solve(A, r), 0.0, None)
        pi /= pi.sum()
    return pi

