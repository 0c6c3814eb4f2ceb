import json
import math

import numpy as np
import pytest

import basinrec as br


def constant_labeler(value):
    def labeler(ics):
        return np.full(len(ics), value, dtype=np.int8)
    return labeler


def coin_labeler(seed):
    rng = np.random.default_rng(seed)

    def labeler(ics):
        return rng.integers(0, 2, len(ics)).astype(np.int8)
    return labeler


class TestBoxEntropy:
    def test_pure_box_is_zero(self):
        assert br.box_entropy((25, 0)) == 0.0
        assert br.box_entropy((0, 7)) == 0.0

    def test_even_split_is_log_two(self):
        assert br.box_entropy((12, 12)) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_count_symmetry(self):
        for a, b in ((3, 22), (1, 9), (10, 15)):
            assert br.box_entropy((a, b)) == br.box_entropy((b, a))

    def test_nonnegative_and_bounded(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            a, b = rng.integers(0, 26, 2)
            if a + b == 0:
                continue
            h = br.box_entropy((a, b))
            assert 0.0 <= h <= math.log(2.0) + 1e-15

    def test_base_two(self):
        h_nat = br.box_entropy((12, 12))
        h_two = br.box_entropy((12, 12), log_base="2")
        assert h_two == h_nat / math.log(2.0)
        assert h_two == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            br.box_entropy((0, 0))
        with pytest.raises(ValueError):
            br.box_entropy((-1, 5))
        with pytest.raises(ValueError):
            br.box_entropy((5, 5), log_base="10")


class TestBasinEntropy:
    def test_constant_labeler_gives_zero(self, params12):
        result = br.basin_entropy(params12, br.EntropyConfig(seed=3),
                                  labeler=constant_labeler(1))
        assert result.value == 0.0
        assert all(b.entropy == 0.0 for b in result.boxes)
        assert all(b.counts[1] == 25 for b in result.boxes)

    def test_fair_coin_matches_monte_carlo_oracle(self, params12):
        cfg = br.EntropyConfig(seed=10)
        result = br.basin_entropy(params12, cfg, labeler=coin_labeler(77))

        # oracle: 1000 replications of the plug-in estimator at p = 1/2
        rng = np.random.default_rng(123)
        reps = np.empty(1000)
        for k in range(1000):
            counts = rng.binomial(25, 0.5, cfg.n_boxes)
            hs = np.empty(cfg.n_boxes)
            for i, c in enumerate(counts):
                hs[i] = br.box_entropy((c, 25 - c)) if 0 < c < 25 else 0.0
            reps[k] = hs.mean()
        assert abs(result.value - reps.mean()) <= 3.0 * reps.std()

    def test_bistable_trend_r20_above_r12(self):
        cfg = br.EntropyConfig(seed=2)
        integ = br.IntegratorConfig()
        low = br.basin_entropy(br.LorenzParams(r=12.0), cfg, integ)
        high = br.basin_entropy(br.LorenzParams(r=20.0), cfg, integ)
        assert high.value > low.value

    def test_bounds(self, params12):
        result = br.basin_entropy(params12, br.EntropyConfig(seed=8),
                                  labeler=coin_labeler(5))
        assert 0.0 <= result.value <= math.log(2.0)

    def test_mixing_never_decreases_value(self, params12):
        # all-pure baseline, then one box forced to an even split
        cfg = br.EntropyConfig(seed=4, n_boxes=5)
        pure = br.basin_entropy(params12, cfg, labeler=constant_labeler(0))

        def one_mixed(ics):
            labels = np.zeros(len(ics), dtype=np.int8)
            labels[:13] = 1  # first box samples split ~ evenly
            return labels

        mixed = br.basin_entropy(params12, cfg, labeler=one_mixed)
        assert mixed.value >= pure.value

    def test_determinism(self, params12):
        cfg = br.EntropyConfig(seed=11)
        integ = br.IntegratorConfig()
        a = br.basin_entropy(params12, cfg, integ)
        b = br.basin_entropy(params12, cfg, integ)
        assert a.value == b.value
        assert a.boxes == b.boxes

    def test_worker_invariance(self, params12):
        cfg = br.EntropyConfig(seed=12, n_boxes=6, trajs_per_box=5)
        a = br.basin_entropy(params12, cfg, workers=1)
        b = br.basin_entropy(params12, cfg, workers=3)
        assert a.value == b.value

    def test_base_conversion_exact(self, params12):
        cfg_nat = br.EntropyConfig(seed=13)
        cfg_two = br.EntropyConfig(seed=13, log_base="2")
        nat = br.basin_entropy(params12, cfg_nat, labeler=coin_labeler(9))
        two = br.basin_entropy(params12, cfg_two, labeler=coin_labeler(9))
        assert two.value == nat.value / math.log(2.0)

    def test_undecided_only_boxes_flagged(self, params12):
        result = br.basin_entropy(params12, br.EntropyConfig(seed=14, n_boxes=4),
                                  labeler=constant_labeler(-1))
        assert result.value == 0.0
        assert result.n_unusable == 4
        assert all(not b.usable for b in result.boxes)
        assert all(b.counts[2] == 25 for b in result.boxes)

    def test_boxes_inside_domain(self, params12):
        cfg = br.EntropyConfig(seed=15, box_side=30.0)
        captured = {}

        def recording(ics):
            captured["ics"] = ics.copy()
            return np.zeros(len(ics), dtype=np.int8)

        br.basin_entropy(params12, cfg, labeler=recording)
        ics = captured["ics"]
        assert ics.min() >= -50.0 and ics.max() <= 50.0

    def test_rejects_nonbistable(self):
        with pytest.raises(ValueError):
            br.basin_entropy(br.LorenzParams(r=30.0), br.EntropyConfig())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            br.EntropyConfig(trajs_per_box=1)
        with pytest.raises(ValueError):
            br.EntropyConfig(n_boxes=0)
        with pytest.raises(ValueError):
            br.EntropyConfig(box_side=0.0)
        with pytest.raises(ValueError):
            br.EntropyConfig(log_base="e")


class TestEntropyIO:
    def test_csv_and_summary(self, tmp_path, params12):
        from basinrec.entropy import save_entropy
        cfg = br.EntropyConfig(seed=3, n_boxes=4)
        result = br.basin_entropy(params12, cfg, labeler=constant_labeler(1))
        path = tmp_path / "entropy.csv"
        save_entropy(result, path, params12, cfg, br.IntegratorConfig())
        lines = path.read_text().splitlines()
        assert lines[0] == "box_index,cx,cy,cz,n0,n1,n_undecided,entropy"
        assert len(lines) == 5
        summary = json.loads((tmp_path / "entropy.summary.json").read_text())
        assert summary["basin_entropy"] == 0.0
        assert summary["config"]["n_boxes"] == 4
        assert summary["config"]["seed"] == 3
