"""Instance model, validation and gap-query tests."""
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusbandit import (
    ArmId,
    Cluster,
    ClusteredInstance,
    ConstraintViolation,
    NonUniqueOptimum,
    load_instance,
    validate,
)


def two_cluster_instance():
    return ClusteredInstance(
        (Cluster(0.02, (0.40, 0.41, 0.42)), Cluster(0.02, (0.60, 0.61, 0.62)))
    )


@st.composite
def instances(draw):
    n_clusters = draw(st.integers(min_value=1, max_value=3))
    clusters = []
    for _ in range(n_clusters):
        size = draw(st.integers(min_value=1, max_value=4))
        means = draw(
            st.lists(
                st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
                min_size=size,
                max_size=size,
            )
        )
        width = draw(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
        clusters.append(Cluster(width, tuple(means)))
    return ClusteredInstance(tuple(clusters))


class TestConstruction:
    def test_basic_shape(self):
        inst = two_cluster_instance()
        assert inst.num_clusters == 2
        assert inst.num_arms == 6
        assert inst.cluster_sizes == (3, 3)
        assert inst.widths == (0.02, 0.02)
        assert inst.flat_means == (0.40, 0.41, 0.42, 0.60, 0.61, 0.62)

    def test_flat_and_arm_id_roundtrip(self):
        inst = two_cluster_instance()
        for flat, aid in enumerate(inst.arm_ids()):
            assert inst.flat_index(aid) == flat
            assert inst.arm_id(flat) == aid

    def test_empty_cluster_rejected(self):
        with pytest.raises(ValueError):
            Cluster(0.1, ())

    def test_no_clusters_rejected(self):
        with pytest.raises(ValueError):
            ClusteredInstance(())

    @pytest.mark.parametrize("mean", [-0.1, 1.5])
    def test_out_of_range_mean_rejected(self, mean):
        with pytest.raises(ValueError):
            Cluster(0.1, (mean,))

    @pytest.mark.parametrize("width", [-0.01, 1.01])
    def test_out_of_range_width_rejected(self, width):
        with pytest.raises(ValueError):
            Cluster(width, (0.5,))


class TestValidate:
    def test_spread_equal_to_width_violates(self):
        inst = ClusteredInstance((Cluster(0.02, (0.40, 0.41, 0.42)),))
        report = validate(inst, "advisory")
        assert report.satisfied == (False,)
        assert report.violations == ((0, pytest.approx(0.02), 0.02),)

    def test_spread_below_width_ok(self):
        inst = ClusteredInstance((Cluster(0.03, (0.40, 0.41, 0.42)),))
        report = validate(inst, "advisory")
        assert report.ok
        assert report.max_spread[0] == pytest.approx(0.02)

    def test_single_arm_always_ok(self):
        for width in (0.0, 0.5, 1.0):
            assert validate(ClusteredInstance((Cluster(width, (0.7,)),))).ok

    def test_zero_width_zero_spread_ok(self):
        assert validate(ClusteredInstance((Cluster(0.0, (0.5, 0.5)),))).ok

    def test_strict_raises_with_violation_payload(self):
        inst = two_cluster_instance()
        with pytest.raises(ConstraintViolation) as exc:
            validate(inst, "strict")
        assert [v[0] for v in exc.value.violations] == [0, 1]

    def test_width_override(self):
        inst = two_cluster_instance()
        assert validate(inst, "advisory", widths=(0.03, 0.03)).ok
        with pytest.raises(ValueError):
            validate(inst, "advisory", widths=(0.03,))

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            validate(two_cluster_instance(), "lenient")

    @given(instances())
    @settings(max_examples=150)
    def test_advisory_never_raises(self, inst):
        report = validate(inst, "advisory")
        assert len(report.satisfied) == inst.num_clusters


class TestBestArmAndGaps:
    def test_best_arm_examples(self):
        assert two_cluster_instance().best_arm() == (ArmId(1, 2), 0.62)
        inst = ClusteredInstance((Cluster(0.5, (0.3, 0.7)), Cluster(0.9, (0.1, 0.2, 0.8))))
        assert inst.best_arm() == (ArmId(1, 2), 0.8)

    def test_tie_raises(self):
        inst = ClusteredInstance((Cluster(1.0, (0.5,)), Cluster(1.0, (0.5,))))
        with pytest.raises(NonUniqueOptimum):
            inst.best_arm()
        with pytest.raises(NonUniqueOptimum):
            inst.gaps()

    def test_gap_values(self):
        gaps = two_cluster_instance().gaps()
        expected = {
            ArmId(0, 0): 0.22,
            ArmId(0, 1): 0.21,
            ArmId(0, 2): 0.20,
            ArmId(1, 0): 0.02,
            ArmId(1, 1): 0.01,
            ArmId(1, 2): 0.0,
        }
        assert set(gaps) == set(expected)
        for aid, g in expected.items():
            assert gaps[aid] == pytest.approx(g, abs=1e-12)
        assert gaps[ArmId(1, 2)] == 0.0

    @given(instances())
    @settings(max_examples=150)
    def test_best_matches_linear_scan(self, inst):
        means = inst.flat_means
        top = max(means)
        try:
            aid, mu = inst.best_arm()
        except NonUniqueOptimum:
            assert sum(1 for m in means if m == top) > 1
            return
        assert mu == top
        assert means[inst.flat_index(aid)] == top

    @given(instances(), st.randoms(use_true_random=False))
    @settings(max_examples=100)
    def test_gaps_invariant_under_cluster_relabeling(self, inst, rnd):
        try:
            gaps = inst.gaps()
        except NonUniqueOptimum:
            return
        order = list(range(inst.num_clusters))
        rnd.shuffle(order)
        permuted = ClusteredInstance(tuple(inst.clusters[c] for c in order))
        pgaps = permuted.gaps()
        for new_c, old_c in enumerate(order):
            for k in range(inst.clusters[old_c].size):
                assert pgaps[ArmId(new_c, k)] == gaps[ArmId(old_c, k)]


class TestSerialization:
    def test_round_trip(self):
        inst = two_cluster_instance()
        again = ClusteredInstance.from_dict(inst.to_dict())
        assert again == inst

    def test_json_file(self, tmp_path):
        payload = {
            "clusters": [
                {"width": 0.02, "means": [0.40, 0.41, 0.42]},
                {"width": 0.02, "means": [0.60, 0.61, 0.62]},
            ],
            "true_widths_note": "widths match the true spreads here",
        }
        path = tmp_path / "instance.json"
        path.write_text(json.dumps(payload))
        inst = load_instance(path)
        assert inst.clusters == two_cluster_instance().clusters
        assert inst.note == "widths match the true spreads here"

    def test_malformed_dict_rejected(self):
        with pytest.raises(ValueError):
            ClusteredInstance.from_dict({"clusters": [{"means": [0.5]}]})
        with pytest.raises(ValueError):
            ClusteredInstance.from_dict({})
