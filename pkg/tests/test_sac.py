# ABOUTME: Tests for two-stage inference and sliding candidate selection
# ABOUTME: Coupling, allocation boxes, thresholds, dominance over the plain prediction, and fallback

import numpy as np
import pytest

from edgesched.datagen import InstanceDistribution, sample_instance
from edgesched.exceptions import InvalidArgumentError, ShapeError
from edgesched.model import check_constraints, evaluate
from edgesched.nn.networks import build_network
from edgesched.scheduling.extender import shift_offsets
from edgesched.scheduling.sac import (
    SacConfig,
    TwoStageNet,
    allocation_to_unit,
    couple_and_allocate,
    couple_features,
    padded_decisions,
    predict_offload,
    select_candidate,
    shifted_probabilities,
    tsnet_sac_schedule,
    tsnet_schedule,
    unit_to_allocation,
)
from edgesched.types import SystemParams
from tests.conftest import SMALL_EXT, SMALL_NET


@pytest.fixture
def instance(params):
    return sample_instance(InstanceDistribution.mixed(), 5, seed=21, n_bar=params.n_bar)


class TestCoupling:
    """Test how decisions reach ResourceNet."""

    @pytest.fixture
    def x(self):
        return np.ones((1, 4, 2))

    def test_padded_decisions_mark_pads_offloaded(self):
        mask = np.array([True, True, False])
        assert padded_decisions([0, 1], mask).tolist() == [0.0, 1.0, 1.0]

    def test_dot(self, x):
        out = couple_features(x, np.array([[0.0, 1.0, 0.0, 1.0]]), "dot")
        assert out[0, :, 0].tolist() == [0.0, 1.0, 0.0, 1.0]

    def test_concat(self, x):
        out = couple_features(x, np.array([[0.0, 1.0, 0.0, 1.0]]), "concat")
        assert out.shape == (1, 4, 3)
        assert out[0, :, 2].tolist() == [0.0, 1.0, 0.0, 1.0]

    def test_none(self, x):
        assert couple_features(x, np.zeros((1, 4)), "none") is x

    def test_shape_mismatch(self, x):
        with pytest.raises(ShapeError):
            couple_features(x, np.zeros((1, 3)), "dot")


class TestAllocationBoxes:
    """Test the [0, 1] allocation map."""

    def test_box_edges(self, params):
        lo = [params.p_ul_min, params.p_dl_min, params.f_ap_min]
        hi = [params.p_ul_max, params.p_dl_max, params.f_ap_max]
        unit = allocation_to_unit(np.array([lo, hi]), params)
        np.testing.assert_allclose(unit, [[0] * 3, [1] * 3])

    def test_inverse(self, params):
        unit = np.array([[0.25, 0.5, 0.75]])
        back = allocation_to_unit(unit_to_allocation(unit, params), params)
        np.testing.assert_allclose(back, unit)

    def test_zero_width_box(self):
        params = SystemParams(p_ul_min=0.1, p_ul_max=0.1)
        assert allocation_to_unit(np.array([0.1, 50.0, 2e9]), params)[0] == 0.5
        assert unit_to_allocation(np.array([0.9, 0.0, 0.0]), params)[0] == 0.1


class TestTwoStageNet:
    """Test pairing of the two networks."""

    def test_rejects_swapped_kinds(self, untrained_nets):
        with pytest.raises(InvalidArgumentError):
            TwoStageNet(
                untrained_nets.resource,
                untrained_nets.offload,
                untrained_nets.normalizer,
                SMALL_EXT,
            )

    def test_rejects_mismatched_n_bar(self, untrained_nets):
        with pytest.raises(InvalidArgumentError):
            TwoStageNet(
                build_network("offload", SMALL_NET, 6),
                untrained_nets.resource,
                untrained_nets.normalizer,
                SMALL_EXT,
            )

    def test_features_are_padded(self, untrained_nets, instance):
        x, mask = untrained_nets.features(instance)
        assert x.shape == (8, 4)
        assert mask.sum() == 5


class TestStages:
    """Test the individual inference stages."""

    def test_predict_offload_thresholds(self, untrained_nets, instance):
        x, mask = untrained_nets.features(instance)
        probs = untrained_nets.offload.predict(x[None])[0][mask]
        for sigma in (0.2, 0.5, 0.8):
            m = predict_offload(untrained_nets.offload, x, mask, sigma)
            assert m.tolist() == (probs >= sigma).astype(int).tolist()

    def test_all_local_decisions_carry_no_allocation(self, untrained_nets, instance, params):
        x, mask = untrained_nets.features(instance)
        schedule = couple_and_allocate(untrained_nets.resource, x, mask, np.zeros(5), params)
        assert schedule.m == (0,) * 5
        assert schedule.f_ap == (0.0,) * 5

    def test_allocations_stay_in_boxes(self, untrained_nets, instance, params):
        x, mask = untrained_nets.features(instance)
        schedule = couple_and_allocate(untrained_nets.resource, x, mask, np.ones(5), params)
        assert all(params.p_ul_min <= p <= params.p_ul_max for p in schedule.p_ul)
        assert all(params.f_ap_min <= f <= params.f_ap_max for f in schedule.f_ap)

    def test_decision_count_must_match(self, untrained_nets, instance, params):
        x, mask = untrained_nets.features(instance)
        with pytest.raises(ShapeError):
            couple_and_allocate(untrained_nets.resource, x, mask, np.ones(4), params)

    def test_shifted_probabilities_realign(self, untrained_nets, instance):
        x, mask = untrained_nets.features(instance)
        offsets = shift_offsets(4, 8)
        probs = shifted_probabilities(untrained_nets.offload, x, mask, offsets)
        assert probs.shape == (4, 5)
        plain = untrained_nets.offload.predict(x[None])[0][mask]
        np.testing.assert_allclose(probs[0], plain)
        # No positional encoding: a rotation permutes the outputs with the inputs.
        np.testing.assert_allclose(probs, np.broadcast_to(plain, probs.shape), atol=1e-10)


class TestSlidingSchedule:
    """Test candidate generation and selection."""

    def test_k_one_equals_plain_prediction(self, untrained_nets, instance, params):
        plain = tsnet_schedule(untrained_nets, instance, params, 0.3)
        sac = tsnet_sac_schedule(untrained_nets, instance, params, SacConfig(k=1, sigma=0.3))
        assert plain.schedule == sac.schedule
        assert len(plain.candidates) == 1

    def test_never_worse_than_plain_prediction(self, untrained_nets, labeled, params):
        for record in labeled:
            plain = tsnet_schedule(untrained_nets, record.instance, params, 0.3).utility
            sac = tsnet_sac_schedule(untrained_nets, record.instance, params, SacConfig(k=8))
            assert sac.utility <= plain * (1 + 1e-12)

    def test_winner_is_feasible_and_complete(self, untrained_nets, instance, params):
        decision = tsnet_sac_schedule(untrained_nets, instance, params, SacConfig(k=4))
        assert decision.schedule.n == instance.n
        assert check_constraints(decision.schedule, params).feasible
        assert decision.utility == evaluate(instance, decision.schedule, params).U
        assert [c.offset for c in decision.candidates] == [0, 2, 4, 6]
        assert not decision.fallback

    def test_winner_has_minimum_utility(self, untrained_nets, instance, params):
        decision = tsnet_sac_schedule(untrained_nets, instance, params, SacConfig(k=8))
        assert decision.utility == min(c.utility for c in decision.candidates)

    def test_ties_go_to_smallest_shift(self, untrained_nets, instance, params):
        x, mask = untrained_nets.features(instance)
        probs = np.tile(np.array([0.9, 0.1, 0.9, 0.1, 0.9]), (3, 1))
        decision = select_candidate(
            untrained_nets, instance, params, probs, [0, 3, 6], 0.5, x, mask
        )
        assert decision.shift_index == 0
        assert len({c.utility for c in decision.candidates}) == 1

    def test_falls_back_to_all_local(self, untrained_nets, instance):
        cramped = SystemParams(f_ap_min=8e9, f_total=7e9)
        x, mask = untrained_nets.features(instance)
        probs = np.ones((2, 5))
        decision = select_candidate(
            untrained_nets, instance, cramped, probs, [0, 4], 0.5, x, mask
        )
        assert decision.fallback
        assert decision.shift_index == -1
        assert decision.schedule.m == (0,) * 5
        assert all(c.schedule is None for c in decision.candidates)
