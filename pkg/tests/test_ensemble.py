"""Hard and soft voting over member predictions."""

import numpy as np
import pytest

from deepfeat.ensemble import (
    EnsembleError,
    VoteInput,
    VoteMember,
    hard_vote,
    soft_vote,
    soft_vote_scores,
)


def _member(mid, labels, scores=None):
    return VoteMember(member_id=mid, labels=np.asarray(labels, dtype=np.int64),
                      scores=None if scores is None else np.asarray(scores))


class TestHardVote:
    def test_majority_wins(self):
        vote = VoteInput(members=(
            _member("a", [0, 1, 2]),
            _member("b", [0, 1, 1]),
            _member("c", [0, 2, 1]),
        ))
        assert list(hard_vote(vote)) == [0, 1, 1]

    def test_weighted_majority(self):
        vote = VoteInput(members=(
            _member("a", [0, 0]),
            _member("b", [1, 1]),
        ), weights=(1.0, 3.0))
        assert list(hard_vote(vote)) == [1, 1]

    def test_tie_breaks_to_lowest_index(self):
        vote = VoteInput(members=(
            _member("a", [0]),
            _member("b", [2]),
        ))
        assert list(hard_vote(vote)) == [0]

    def test_tie_breaks_by_score_sum(self):
        vote = VoteInput(members=(
            _member("a", [0], scores=[[0.51, 0.49]]),
            _member("b", [1], scores=[[0.10, 0.90]]),
        ))
        assert list(hard_vote(vote, tie_break="score_sum")) == [1]

    def test_unknown_tie_break(self):
        vote = VoteInput(members=(_member("a", [0]),))
        with pytest.raises(EnsembleError):
            hard_vote(vote, tie_break="random")

    def test_score_sum_without_scores_falls_back(self):
        vote = VoteInput(members=(
            _member("a", [0]),
            _member("b", [1]),
        ))
        assert list(hard_vote(vote, tie_break="score_sum")) == [0]


class TestSoftVote:
    def test_weighted_average_of_scores(self):
        # (1 * [0.6, 0.4] + 3 * [0.1, 0.9]) / 4 = [0.225, 0.775]
        vote = VoteInput(members=(
            _member("a", [0], scores=[[0.6, 0.4]]),
            _member("b", [1], scores=[[0.1, 0.9]]),
        ), weights=(1.0, 3.0))
        scores = soft_vote_scores(vote)
        assert np.allclose(scores, [[0.225, 0.775]])
        assert list(soft_vote(vote)) == [1]

    def test_missing_scores_rejected(self):
        vote = VoteInput(members=(
            _member("a", [0], scores=[[1.0, 0.0]]),
            _member("b", [0]),
        ))
        with pytest.raises(EnsembleError):
            soft_vote(vote)


class TestVoteProperties:
    def test_member_permutation_invariance(self, rng):
        for _ in range(25):
            n = int(rng.integers(1, 12))
            c = int(rng.integers(2, 5))
            k = int(rng.integers(2, 6))
            members = []
            for m in range(k):
                scores = rng.random((n, c))
                scores /= scores.sum(axis=1, keepdims=True)
                members.append(_member(f"m{m}", rng.integers(0, c, size=n), scores))
            weights = tuple(float(w) for w in rng.uniform(0.5, 2.0, size=k))
            vote = VoteInput(members=tuple(members), weights=weights, n_classes=c)
            perm = rng.permutation(k)
            vote_p = VoteInput(members=tuple(members[i] for i in perm),
                               weights=tuple(weights[i] for i in perm), n_classes=c)
            assert np.array_equal(hard_vote(vote), hard_vote(vote_p))
            assert np.allclose(soft_vote_scores(vote), soft_vote_scores(vote_p))

    def test_identical_members_identity(self, rng):
        for _ in range(25):
            n = int(rng.integers(1, 12))
            c = int(rng.integers(2, 5))
            labels = rng.integers(0, c, size=n)
            scores = rng.random((n, c))
            scores /= scores.sum(axis=1, keepdims=True)
            k = int(rng.integers(1, 6))
            members = tuple(_member(f"m{i}", labels, scores) for i in range(k))
            vote = VoteInput(members=members, n_classes=c)
            assert np.array_equal(hard_vote(vote), labels)
            assert np.array_equal(soft_vote(vote), np.argmax(scores, axis=1))


class TestVoteValidation:
    def test_length_mismatch(self):
        with pytest.raises(EnsembleError):
            VoteInput(members=(_member("a", [0, 1]), _member("b", [0])))

    def test_weight_count_mismatch(self):
        with pytest.raises(EnsembleError):
            VoteInput(members=(_member("a", [0]),), weights=(1.0, 2.0))

    def test_non_positive_weight(self):
        with pytest.raises(EnsembleError):
            VoteInput(members=(_member("a", [0]),), weights=(0.0,))

    def test_no_members(self):
        with pytest.raises(EnsembleError):
            VoteInput(members=())

    def test_negative_label(self):
        with pytest.raises(EnsembleError):
            _member("a", [-1, 0])

    def test_score_shape_mismatch(self):
        with pytest.raises(EnsembleError):
            _member("a", [0, 1], scores=[[1.0, 0.0]])
