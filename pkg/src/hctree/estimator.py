"""Scikit-learn estimator facade over the constraint engine.

``TripletHierarchyClassifier`` treats labeled triplets as a multiclass
problem: X holds point-index triplets, y holds the cut-off point of each
triplet (or -1 for a simultaneous three-way split).  ``fit`` builds a
hierarchical tree consistent with (or minimizing violations of) the training
labels; ``predict`` reads labels for new triplets off the fitted tree.
"""

from __future__ import annotations

import random
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .core import OrientedSet, PointSet, SplitPair, ThreeWay, default_points, write_newick
from .builder import build_agnostic, build_binary, build_nonbinary
from .msf import build_via_msf
from .tree_ops import orientation_of

THREE_WAY_LABEL = -1


def check_triplet_array(X) -> np.ndarray:
    """Validate an (m, 3) array of distinct non-negative point indices."""
    arr = np.asarray(X)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"X must have shape (m, 3), got {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        cast = arr.astype(np.int64)
        if not np.array_equal(cast, arr):
            raise ValueError("triplet entries must be integers")
        arr = cast
    if arr.size and arr.min() < 0:
        raise ValueError("point indices must be non-negative")
    if any(len(set(row)) != 3 for row in arr.tolist()):
        raise ValueError("triplet points must be pairwise distinct")
    return arr.astype(np.int64)


def check_label_array(y, X: np.ndarray) -> np.ndarray:
    """Validate labels: each entry is a point of its triplet, or -1."""
    arr = np.asarray(y)
    if arr.shape != (X.shape[0],):
        raise ValueError(f"y must have shape ({X.shape[0]},), got {arr.shape}")
    arr = arr.astype(np.int64)
    for row, lab in zip(X.tolist(), arr.tolist()):
        if lab != THREE_WAY_LABEL and lab not in row:
            raise ValueError(f"label {lab} is not a point of triplet {row}")
    return arr


class TripletHierarchyClassifier(ClassifierMixin, BaseEstimator):
    """Learn a hierarchical tree from labeled triplets.

    Parameters
    ----------
    engine : "baseline" or "msf"
        Exact constructor used on consistent data.
    mode : "realizable" or "agnostic"
        Realizable fitting raises on contradictory labels; agnostic fitting
        cuts a minimum number of constraint edges per level instead.
    nonbinary : bool
        Allow three-way labels and fit a multiway tree (baseline realizable
        pipeline only).
    n_points : int, optional
        Total number of points; inferred as max index + 1 when omitted.
    random_state : int, optional
        Seeds the binarization of multiway splits; None keeps the
        deterministic comb.
    """

    def __init__(self, engine: str = "baseline", mode: str = "realizable",
                 nonbinary: bool = False, n_points: Optional[int] = None,
                 random_state: Optional[int] = None):
        self.engine = engine
        self.mode = mode
        self.nonbinary = nonbinary
        self.n_points = n_points
        self.random_state = random_state

    def _constraints(self, X: np.ndarray, y: np.ndarray):
        out = []
        for row, lab in zip(X.tolist(), y.tolist()):
            if lab == THREE_WAY_LABEL:
                out.append(ThreeWay(*row))
            else:
                pair = [p for p in row if p != lab]
                out.append(SplitPair(pair[0], pair[1], lab))
        return tuple(out)

    def fit(self, X, y):
        if self.engine not in ("baseline", "msf"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.mode not in ("realizable", "agnostic"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.nonbinary and (self.mode == "agnostic" or self.engine == "msf"):
            raise ValueError("non-binary fitting is baseline realizable only")
        X = check_triplet_array(X)
        y = check_label_array(y, X)
        n = int(X.max()) + 1 if X.size else 1
        if self.n_points is not None:
            if self.n_points < n:
                raise ValueError("n_points is smaller than the largest index in X")
            n = self.n_points
        constraints = self._constraints(X, y)
        if not self.nonbinary and any(isinstance(c, ThreeWay) for c in constraints):
            raise ValueError("three-way labels require nonbinary=True")
        oset = OrientedSet(default_points(n), constraints)
        rng = None if self.random_state is None else random.Random(self.random_state)

        self.violations_ = 0
        if self.mode == "agnostic":
            tree, violations = build_agnostic(oset, rng)
            self.violations_ = violations
        else:
            if self.nonbinary:
                outcome = build_nonbinary(oset)
            elif self.engine == "msf":
                outcome = build_via_msf(oset)
            else:
                outcome = build_binary(oset, rng)
            if not outcome.ok:
                raise ValueError(
                    "labels are contradictory; closed set "
                    f"{outcome.witness.points} (use mode='agnostic')"
                )
            tree = outcome.tree
        self.tree_ = tree
        self.n_points_ = n
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "tree_"):
            raise ValueError("estimator is not fitted")
        X = check_triplet_array(X)
        if X.size and X.max() >= self.n_points_:
            raise ValueError("X references points outside the fitted range")
        out = np.empty(X.shape[0], dtype=np.int64)
        for i, row in enumerate(X.tolist()):
            c = orientation_of(self.tree_, *sorted(row))
            out[i] = THREE_WAY_LABEL if isinstance(c, ThreeWay) else c.cut
        return out

    def to_newick(self, points: Optional[PointSet] = None) -> str:
        if not hasattr(self, "tree_"):
            raise ValueError("estimator is not fitted")
        return write_newick(self.tree_, points or default_points(self.n_points_))
