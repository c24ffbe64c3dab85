"""Jaccard-coefficient label matching of a predicted labeling onto the ground truth.

Three phases:

1. every predicted cluster u goes to the truth label with the largest J[u, v];
2. if there are at least as many predicted clusters as truth labels, each
   unmatched truth label o takes over the predicted cluster tau with the largest
   J[tau, o], provided tau's current target t keeps another cluster and tau is
   not t's best cluster; otherwise J[tau, o] is struck and the next candidate tried;
3. with fewer predicted clusters, each unmatched o receives a new cluster split
   off the best-overlapping tau: the spots of tau that lie closer (minimum
   Euclidean distance) to truth region o than to truth region t.

Ties on Jaccard values go to the smallest token.
"""

from __future__ import annotations

import dataclasses
from typing import Optional

import numpy as np

from .core import Labeling, SlamError, SpatialDataset, token_key


class MatchingError(SlamError):
    pass


class ReassignmentExhaustedError(MatchingError):
    pass


@dataclasses.dataclass(frozen=True)
class Split:
    source: str  # predicted label the spots were taken from
    spots: tuple[int, ...]
    target: str  # truth label the new cluster is mapped to
    source_target: str  # truth label the source cluster stays mapped to


@dataclasses.dataclass(frozen=True)
class MatchResult:
    matched: Labeling
    assignment: dict  # predicted token -> truth token
    splits: tuple[Split, ...]
    jaccard: np.ndarray  # K1 x K, rows pred_tokens, columns truth_tokens
    pred_tokens: tuple[str, ...]
    truth_tokens: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "assignment": dict(self.assignment),
            "splits": [
                {
                    "source": s.source,
                    "n_spots": len(s.spots),
                    "spots": list(s.spots),
                    "target": s.target,
                    "source_target": s.source_target,
                }
                for s in self.splits
            ],
            "pred_tokens": list(self.pred_tokens),
            "truth_tokens": list(self.truth_tokens),
        }


def _members(labels, tokens):
    arr = np.asarray(labels, dtype=object)
    return [arr == t for t in tokens]


def _jaccard(pred_masks, truth_masks) -> np.ndarray:
    P = np.array(pred_masks, dtype=np.int64).reshape(len(pred_masks), -1)
    T = np.array(truth_masks, dtype=np.int64).reshape(len(truth_masks), -1)
    inter = P @ T.T
    union = P.sum(axis=1)[:, None] + T.sum(axis=1)[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        J = np.where(union > 0, inter / np.where(union > 0, union, 1), 0.0)
    return J


def jaccard_matrix(pred: Labeling, truth: Labeling) -> np.ndarray:
    """J[u, v] = |C_u & C_v| / |C_u | C_v| over pred.tokens x truth.tokens."""
    if len(pred) != len(truth):
        raise MatchingError("labelings have different lengths")
    return _jaccard(_members(pred.labels, pred.tokens), _members(truth.labels, truth.tokens))


def _min_dists(coords, points_mask, region_mask):
    """For each point in ``points_mask``, minimum distance to the spots in ``region_mask``."""
    P = coords[points_mask]
    R = coords[region_mask]
    if R.shape[0] == 0:
        return np.full(P.shape[0], np.inf)
    out = np.empty(P.shape[0])
    for start in range(0, P.shape[0], 1024):
        block = P[start:start + 1024]
        d2 = ((block[:, None, :] - R[None, :, :]) ** 2).sum(axis=2)
        out[start:start + 1024] = np.sqrt(d2.min(axis=1))
    return out


def match_labels(pred: Labeling, truth: Labeling, dataset: Optional[SpatialDataset] = None) -> MatchResult:
    if len(pred) != len(truth):
        raise MatchingError("labelings have different lengths")
    pred_tokens = pred.tokens
    truth_tokens = truth.tokens
    J0 = jaccard_matrix(pred, truth)
    K1, K = J0.shape

    # argmax over truth columns: np.argmax returns the first maximum, i.e. the
    # smallest token because columns are sorted
    assignment = {u: truth_tokens[int(np.argmax(J0[i]))] for i, u in enumerate(pred_tokens)}

    def unmatched(assign):
        used = set(assign.values())
        return [v for v in truth_tokens if v not in used]

    splits: list[Split] = []
    current = np.asarray(pred.labels, dtype=object).copy()

    if unmatched(assignment) and K1 >= K:
        for o in unmatched(assignment):
            oi = truth_tokens.index(o)
            struck = np.zeros(K1, dtype=bool)
            while True:
                if struck.all():
                    raise ReassignmentExhaustedError(
                        f"no predicted cluster can be reassigned to truth label {o!r}"
                    )
                column = np.where(struck, -np.inf, J0[:, oi])
                ti = int(np.argmax(column))
                tau = pred_tokens[ti]
                t = assignment[tau]
                holders = [u for u, v in assignment.items() if v == t]
                best_for_t = pred_tokens[int(np.argmax(J0[:, truth_tokens.index(t)]))]
                if len(holders) > 1 and tau != best_for_t:
                    assignment[tau] = o
                    break
                struck[ti] = True

    elif unmatched(assignment):
        if dataset is None:
            raise MatchingError("cluster split needs spot coordinates (pass the dataset)")
        coords = dataset.coords
        truth_arr = np.asarray(truth.labels, dtype=object)
        pending = unmatched(assignment)
        counter = 0
        while pending:
            o = pending[0]
            live = sorted(set(current), key=token_key)
            J = _jaccard(_members(current, live), _members(truth.labels, truth_tokens))
            oi = truth_tokens.index(o)
            tau = live[int(np.argmax(J[:, oi]))]
            t = assignment[tau]
            in_tau = current == tau
            d_o = _min_dists(coords, in_tau, truth_arr == o)
            d_t = _min_dists(coords, in_tau, truth_arr == t)
            chosen = np.flatnonzero(in_tau)[d_o < d_t]
            if chosen.size == 0:
                raise MatchingError(
                    f"split for truth label {o!r} from cluster {tau!r} selected no spots"
                )
            counter += 1
            phi = f"{tau}~split{counter}"
            while phi in assignment:
                counter += 1
                phi = f"{tau}~split{counter}"
            current[chosen] = phi
            assignment[phi] = o
            splits.append(Split(tau, tuple(int(i) for i in chosen), o, t))
            if not np.any(current == tau):
                del assignment[tau]
            pending = unmatched(assignment)
            if counter > 4 * (K + K1) + 4:
                raise MatchingError("cluster split did not converge")

    matched = tuple(assignment[u] for u in current)
    matched_labeling = Labeling(matched, truth.label_space, role="predicted")
    return MatchResult(
        matched=matched_labeling,
        assignment=dict(sorted(assignment.items(), key=lambda kv: token_key(kv[0]))),
        splits=tuple(splits),
        jaccard=J0,
        pred_tokens=pred_tokens,
        truth_tokens=truth_tokens,
    )


def needs_matching(pred: Labeling, truth: Labeling) -> bool:
    """Matching is only applied when the predicted tokens fall outside the truth label space."""
    return not set(pred.tokens) <= set(truth.label_space)


def align_labels(pred: Labeling, truth: Labeling, dataset: SpatialDataset) -> tuple[Labeling, Optional[MatchResult]]:
    """Return ``pred`` in the truth label space, matching only if needed."""
    if not needs_matching(pred, truth):
        return Labeling(pred.labels, truth.label_space, role="predicted"), None
    result = match_labels(pred, truth, dataset)
    return result.matched, result
