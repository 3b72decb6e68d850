"""Hard and soft voting over member predictions.

Members contribute per-sample labels (hard) or score rows (soft) with
optional positive weights.  Ties always resolve to the lowest class
index; hard voting can optionally break weight ties by summed scores
before falling back to the index rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EnsembleError(ValueError):
    """Inconsistent vote input."""


@dataclass(frozen=True)
class VoteMember:
    member_id: str
    labels: np.ndarray
    scores: np.ndarray | None = None

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size < 1:
            raise EnsembleError(f"member '{self.member_id}': labels must be a "
                                f"non-empty 1-D vector")
        if labels.min() < 0:
            raise EnsembleError(f"member '{self.member_id}': negative label")
        object.__setattr__(self, "labels", labels)
        if self.scores is not None:
            scores = np.asarray(self.scores, dtype=np.float64)
            if scores.ndim != 2 or scores.shape[0] != labels.size:
                raise EnsembleError(f"member '{self.member_id}': scores must be "
                                    f"n x C with n = {labels.size}")
            object.__setattr__(self, "scores", scores)


@dataclass(frozen=True)
class VoteInput:
    members: tuple[VoteMember, ...]
    weights: tuple[float, ...] | None = None
    n_classes: int | None = None

    def __post_init__(self) -> None:
        members = tuple(self.members)
        if not members:
            raise EnsembleError("need at least one member")
        n = members[0].labels.size
        for m in members:
            if m.labels.size != n:
                raise EnsembleError(f"member '{m.member_id}' has {m.labels.size} "
                                    f"predictions, expected {n}")
        if self.weights is not None:
            weights = tuple(float(w) for w in self.weights)
            if len(weights) != len(members):
                raise EnsembleError(f"{len(weights)} weights for {len(members)} members")
            if any(w <= 0 for w in weights):
                raise EnsembleError("weights must be positive")
            object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "members", members)

    def resolved_classes(self) -> int:
        c = 0
        for m in self.members:
            c = max(c, int(m.labels.max()) + 1)
            if m.scores is not None:
                c = max(c, m.scores.shape[1])
        if self.n_classes is not None:
            if self.n_classes < c:
                raise EnsembleError(f"n_classes={self.n_classes} is below the "
                                    f"largest member label")
            c = self.n_classes
        return c

    def resolved_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(len(self.members))
        return np.array(self.weights)


def hard_vote(vote: VoteInput, tie_break: str = "lowest_index") -> np.ndarray:
    """Weighted plurality vote over member labels.

    With ``tie_break="score_sum"`` exact weight ties are resolved by the
    weighted sum of member scores over the tied classes, falling back to
    the lowest class index when scores are absent or also tied.
    """
    if tie_break not in ("lowest_index", "score_sum"):
        raise EnsembleError(f"unknown tie_break '{tie_break}'")
    c = vote.resolved_classes()
    weights = vote.resolved_weights()
    n = vote.members[0].labels.size
    tally = np.zeros((n, c))
    for w, m in zip(weights, vote.members):
        tally[np.arange(n), m.labels] += w
    labels = np.argmax(tally, axis=1)
    if tie_break == "score_sum" and any(m.scores is not None for m in vote.members):
        bonus = np.zeros((n, c))
        for w, m in zip(weights, vote.members):
            if m.scores is not None:
                bonus[:, : m.scores.shape[1]] += w * m.scores
        for i in range(n):
            tied = np.flatnonzero(tally[i] == tally[i, labels[i]])
            if tied.size > 1:
                labels[i] = tied[np.argmax(bonus[i, tied])]
    return labels


def soft_vote(vote: VoteInput) -> np.ndarray:
    """Argmax of the weighted mean score rows."""
    return np.argmax(soft_vote_scores(vote), axis=1)


def soft_vote_scores(vote: VoteInput) -> np.ndarray:
    """The weighted mean score matrix behind ``soft_vote``."""
    c = vote.resolved_classes()
    weights = vote.resolved_weights()
    n = vote.members[0].labels.size
    mixed = np.zeros((n, c))
    for w, m in zip(weights, vote.members):
        if m.scores is None:
            raise EnsembleError(f"member '{m.member_id}' has no scores, "
                                f"soft voting needs score rows")
        mixed[:, : m.scores.shape[1]] += w * m.scores
    return mixed / weights.sum()
