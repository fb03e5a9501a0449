"""Generative review model: truth scores, reviewer profiles, review synthesis."""

import numpy as np
import pytest

from dprsim.assignment import random_assignment
from dprsim.rankings import truth_concordance
from dprsim.simulate import (
    PROFILES_STREAM,
    REVIEWS_STREAM,
    SCORES_STREAM,
    ReviewerProfile,
    SimParams,
    sample_reviewers,
    sample_true_scores,
    simulate_reviews,
    stream,
    true_ranking,
)


class TestSimParams:
    def test_defaults_match_running_values(self):
        p = SimParams()
        assert (p.n_p, p.n_r) == (40, 7)
        assert (p.sd_s, p.br_sd, p.er_df) == (20.0, 10.0, 10.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_p": 1},
            {"n_r": 1},
            {"n_r": 40},
            {"sd_s": -1.0},
            {"br_sd": -0.5},
            {"er_df": 0.0},
        ],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            SimParams(**kwargs)


class TestTrueScores:
    def test_degenerate_spread_gives_all_fifty(self):
        scores = sample_true_scores(20, 0.0, stream(0, 0, SCORES_STREAM))
        assert np.all(scores == 50.0)

    def test_all_draws_within_bounds(self):
        scores = sample_true_scores(5000, 30.0, stream(1, 0, SCORES_STREAM))
        assert scores.min() >= 0.0
        assert scores.max() <= 100.0

    def test_sample_mean_near_center(self):
        scores = sample_true_scores(100_000, 20.0, stream(2, 0, SCORES_STREAM))
        assert abs(scores.mean() - 50.0) < 0.3

    def test_true_ranking_sorts_descending_with_id_ties(self):
        assert true_ranking([10.0, 30.0, 30.0, 5.0]).tolist() == [1, 2, 0, 3]


class TestReviewerProfiles:
    def test_zero_bias_spread(self):
        profiles = sample_reviewers(50, 0.0, 10.0, stream(3, 0, PROFILES_STREAM))
        assert all(p.mu == 0.0 for p in profiles)

    def test_error_levels_nonnegative(self):
        profiles = sample_reviewers(1000, 10.0, 5.0, stream(4, 0, PROFILES_STREAM))
        assert all(p.sigma >= 0.0 for p in profiles)

    def test_mean_error_matches_degrees_of_freedom(self):
        profiles = sample_reviewers(100_000, 10.0, 10.0, stream(5, 0, PROFILES_STREAM))
        sigma = np.array([p.sigma for p in profiles])
        assert abs(sigma.mean() - 10.0) < 0.2

    def test_error_stream_untouched_by_bias_spread(self):
        a = sample_reviewers(100, 1.0, 10.0, stream(6, 0, PROFILES_STREAM))
        b = sample_reviewers(100, 20.0, 10.0, stream(6, 0, PROFILES_STREAM))
        assert [p.sigma for p in a] == [p.sigma for p in b]
        assert np.allclose(
            np.array([p.mu for p in a]) * 20.0, [p.mu for p in b]
        )


class TestSimulateReviews:
    def test_noise_free_reviews_match_truth_order(self):
        rng = stream(7, 0, REVIEWS_STREAM)
        truth = sample_true_scores(12, 20.0, stream(7, 0, SCORES_STREAM))
        profiles = [ReviewerProfile(mu=float(5 * i), sigma=0.0) for i in range(12)]
        assignment = random_assignment(12, 4, seed=3)
        partials = simulate_reviews(truth, profiles, assignment, rng)
        positions = {int(p): k for k, p in enumerate(true_ranking(truth))}
        for pr in partials:
            ids = pr.proposals()
            assert ids == sorted(ids, key=lambda p: positions[p])
        # and the true ranking is perfectly concordant with such reviews
        from dprsim.rankings import fit_concordance

        assert fit_concordance(true_ranking(truth), partials) == 1.0

    def test_bias_invariance_is_exact(self):
        results = []
        for br_sd in (1.0, 10.0, 20.0):
            truth = sample_true_scores(20, 20.0, stream(8, 0, SCORES_STREAM))
            profiles = sample_reviewers(20, br_sd, 10.0, stream(8, 0, PROFILES_STREAM))
            assignment = random_assignment(20, 5, seed=4)
            partials = simulate_reviews(
                truth, profiles, assignment, stream(8, 0, REVIEWS_STREAM)
            )
            results.append(tuple(tuple(pr.proposals()) for pr in partials))
        assert results[0] == results[1] == results[2]

    def test_partials_cover_assignment_exactly(self):
        truth = sample_true_scores(40, 20.0, stream(9, 0, SCORES_STREAM))
        profiles = sample_reviewers(40, 10.0, 10.0, stream(9, 0, PROFILES_STREAM))
        assignment = random_assignment(40, 7, seed=5)
        partials = simulate_reviews(
            truth, profiles, assignment, stream(9, 0, REVIEWS_STREAM)
        )
        assert len(partials) == 40
        counts = np.zeros(40, dtype=int)
        for pr, held in zip(partials, assignment.reviews):
            assert pr.size == 7
            assert set(pr.proposals()) == set(held)
            for p in pr.proposals():
                counts[p] += 1
        assert np.all(counts == 7)

    def test_no_tie_groups_emitted(self):
        truth = sample_true_scores(10, 20.0, stream(10, 0, SCORES_STREAM))
        profiles = sample_reviewers(10, 10.0, 10.0, stream(10, 0, PROFILES_STREAM))
        assignment = random_assignment(10, 3, seed=6)
        partials = simulate_reviews(
            truth, profiles, assignment, stream(10, 0, REVIEWS_STREAM)
        )
        assert all(len(g) == 1 for pr in partials for g in pr.groups)

    def test_deterministic_per_seed(self):
        def run():
            truth = sample_true_scores(15, 20.0, stream(11, 2, SCORES_STREAM))
            profiles = sample_reviewers(15, 10.0, 10.0, stream(11, 2, PROFILES_STREAM))
            assignment = random_assignment(15, 4, seed=7)
            return simulate_reviews(
                truth, profiles, assignment, stream(11, 2, REVIEWS_STREAM)
            )

        assert run() == run()

    def test_degraded_reviews_are_less_concordant(self):
        # statistical smoke check of the noise model at two error levels
        def mean_ci(er_df):
            vals = []
            for rep in range(30):
                truth = sample_true_scores(20, 20.0, stream(12, rep, SCORES_STREAM))
                profiles = sample_reviewers(
                    20, 10.0, er_df, stream(12, rep, PROFILES_STREAM)
                )
                assignment = random_assignment(20, 5, seed=rep)
                partials = simulate_reviews(
                    truth, profiles, assignment, stream(12, rep, REVIEWS_STREAM)
                )
                from dprsim.mbc import mbc_aggregate

                inferred = mbc_aggregate(partials, 5, 20)
                vals.append(truth_concordance(inferred, true_ranking(truth)))
            return np.mean(vals)

        assert mean_ci(2.0) > mean_ci(25.0)
