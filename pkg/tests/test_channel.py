import math

import numpy as np
import pytest

from irsmimo import channel as ch
from irsmimo.scenario import (
    build_antenna_positions,
    config_from_dict,
    config_hash,
    draw_sample,
)
from conftest import tiny_scenario_dict


@pytest.fixture
def geo(tiny_config):
    return build_antenna_positions(tiny_config)


class TestPathloss:
    def test_indoor_office_at_10m(self):
        # -PL0 - 10 * 3.83 * log10(10) = -PL0 - 38.3
        assert ch.pathloss_nlos_db(10.0, "IO", 35.0) == pytest.approx(-73.3)

    def test_shopping_mall_at_10m(self):
        assert ch.pathloss_nlos_db(10.0, "SM", 30.0) == pytest.approx(-62.1)

    def test_reference_distance_gives_minus_pl0(self):
        assert ch.pathloss_nlos_db(1.0, "IO", 41.2) == pytest.approx(-41.2)

    def test_subreference_clamps_and_counts(self):
        ch.reset_clamp_count()
        before = ch.clamp_count()
        val = ch.pathloss_nlos_db(0.2, "IO", 35.0)
        assert val == ch.pathloss_nlos_db(1.0, "IO", 35.0)
        assert ch.clamp_count() == before + 1

    def test_vectorized(self):
        out = ch.pathloss_nlos_db(np.array([1.0, 10.0, 100.0]), "SM", 30.0)
        assert np.allclose(out, [-30.0, -62.1, -94.2])

    def test_unknown_profile(self):
        with pytest.raises(ValueError, match="profile"):
            ch.pathloss_nlos_db(5.0, "OUTDOOR", 30.0)


class TestCellPattern:
    def test_boresight_is_unity(self):
        assert ch.cell_pattern(0.0, 0.57) == pytest.approx(1.0)

    def test_grazing_and_beyond_are_zero(self):
        assert ch.cell_pattern(np.pi / 2, 0.57) == 0.0
        assert ch.cell_pattern(2.5, 0.57) == 0.0

    def test_cosine_law_inside(self):
        theta = 0.7
        assert ch.cell_pattern(theta, 0.57) == pytest.approx(math.cos(theta) ** 0.57)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            ch.cell_pattern(-0.2, 0.57)
        with pytest.raises(ValueError):
            ch.cell_pattern(3.5, 0.57)


class TestDirectChannel:
    def test_shape(self, tiny_config, geo):
        sample = draw_sample(tiny_config, 0)
        h = ch.direct_channel(sample, geo, tiny_config)
        assert h.shape == (2, 2, 8)

    def test_los_term_hand_computed(self, tiny_config, geo):
        # strip scattering, force the blockage indicator on
        data = tiny_scenario_dict(**{"channel.n_clusters": 0, "channel.x_d": 1})
        cfg = config_from_dict(data)
        sample = draw_sample(cfg, 0)
        assert np.all(sample.x_d == 1.0)
        h = ch.direct_channel(sample, geo, cfg)
        lam = cfg.wavelength
        g = 10.0 ** (cfg.channel.tx_gain_db / 10.0) * 10.0 ** (cfg.channel.rx_gain_db / 10.0)
        d = np.linalg.norm(sample.ue_elements[0][0] - geo.bs[3])
        expect = math.sqrt(g) * lam / (4 * np.pi * d) * np.exp(-2j * np.pi * d / lam)
        assert h[0, 0, 3] == pytest.approx(expect, rel=1e-12)

    def test_blocked_los_without_clusters_is_zero(self, geo):
        cfg = config_from_dict(tiny_scenario_dict(**{"channel.n_clusters": 0}))
        assert cfg.channel.x_d == 0
        sample = draw_sample(cfg, 0)
        h = ch.direct_channel(sample, geo, cfg)
        assert np.all(h == 0.0)

    def test_nlos_term_matches_loop_oracle(self, tiny_config, geo):
        sample = draw_sample(tiny_config, 1)
        h = ch.direct_channel(sample, geo, tiny_config)
        cfg = tiny_config
        lam = cfg.wavelength
        n_c, n_p = cfg.channel.n_clusters, cfg.channel.n_paths
        i, n, m = 1, 0, 5
        d_center = np.linalg.norm(np.array(cfg.bs.position) - sample.ue_centers[i])
        beta = 10.0 ** (ch.pathloss_nlos_db(d_center, cfg.channel.profile, cfg.pl0_db()) / 20.0)
        acc = 0.0
        for q in range(n_c):
            for p in range(n_p):
                pt = sample.path_points[i, q, p]
                dd = np.linalg.norm(pt - geo.bs[m]) + np.linalg.norm(
                    pt - sample.ue_elements[i][n]
                )
                acc += sample.fading[i, q, p] * np.exp(-2j * np.pi * dd / lam)
        assert h[i, n, m] == pytest.approx(beta / (n_p * n_c) * acc, rel=1e-10)


class TestIrsLinks:
    def test_shapes(self, tiny_config, geo):
        s = ch.bs_irs_channels(geo, tiny_config)
        assert s.shape == (4, 8, 8)
        sample = draw_sample(tiny_config, 0)
        t = ch.irs_ue_channel(sample, geo, tiny_config, 1, 2)
        assert t.shape == (2, 8)

    def test_bs_irs_entry_hand_computed(self, tiny_config, geo):
        s = ch.bs_irs_channel(geo, tiny_config, 0)
        lam = tiny_config.wavelength
        gt = 10.0 ** (tiny_config.channel.tx_gain_db / 10.0)
        gc = tiny_config.cell_gain()
        p, m = 2, 4
        vec = geo.bs[m] - geo.tiles[0, p]
        d = np.linalg.norm(vec)
        theta = math.acos(vec @ geo.tile_normals[0] / d)
        f = math.cos(theta) ** tiny_config.channel.cell_q
        expect = math.sqrt(gt * gc * f) * lam / (4 * np.pi * d) * np.exp(-2j * np.pi * d / lam)
        assert s[p, m] == pytest.approx(expect, rel=1e-12)

    def test_behind_wall_is_dark(self, tiny_config, geo):
        # a point behind the west wall sees a zero pattern
        behind = np.array([[-1.0, 6.0, 1.5]])
        block = ch._los_link(geo.tiles[0], geo.tile_normals[0], behind, 1.0, tiny_config)
        assert np.all(block == 0.0)

    def test_irs_links_deterministic_across_samples(self, tiny_config, geo):
        s0 = ch.bs_irs_channels(geo, tiny_config)
        s1 = ch.bs_irs_channels(geo, tiny_config)
        assert np.array_equal(s0, s1)


class TestChannelSet:
    def test_composite_matches_loop(self, tiny_config, geo):
        sample = draw_sample(tiny_config, 3)
        cs = ch.build_channel_set(sample, geo, tiny_config)
        rng = np.random.default_rng(0)
        beams = np.exp(2j * np.pi * rng.random(cs.s.shape[:2]))
        h = ch.composite_channel(cs, beams)
        for i in range(tiny_config.ue.count):
            acc = cs.hbar[i].copy()
            for k in range(cs.s.shape[0]):
                acc += cs.t[i, k] @ np.diag(beams[k]) @ cs.s[k]
            assert np.allclose(h[i], acc, rtol=1e-12, atol=0)

    def test_composite_rejects_wrong_beam_shape(self, tiny_config, geo):
        cs = ch.build_channel_set(draw_sample(tiny_config, 0), geo, tiny_config)
        with pytest.raises(ValueError, match="beam"):
            ch.composite_channel(cs, np.ones((3, 8)))

    def test_precomputed_s_reused(self, tiny_config, geo):
        s = ch.bs_irs_channels(geo, tiny_config)
        cs = ch.build_channel_set(draw_sample(tiny_config, 0), geo, tiny_config, s=s)
        assert cs.s is s

    def test_roundtrip_is_bit_exact(self, tiny_config, geo, tmp_path):
        cs = ch.build_channel_set(draw_sample(tiny_config, 7), geo, tiny_config)
        path = tmp_path / "cs.npz"
        ch.save_channel_set(path, cs)
        back = ch.load_channel_set(path)
        assert np.array_equal(back.hbar, cs.hbar)
        assert np.array_equal(back.s, cs.s)
        assert np.array_equal(back.t, cs.t)
        assert back.sample_index == cs.sample_index
        assert back.config_hash == cs.config_hash

    def test_load_rejects_wrong_version(self, tiny_config, geo, tmp_path):
        cs = ch.build_channel_set(draw_sample(tiny_config, 0), geo, tiny_config)
        path = tmp_path / "cs.npz"
        np.savez(
            path,
            version=np.array([99]),
            config_hash=np.array([cs.config_hash]),
            sample_index=np.array([0]),
            hbar=cs.hbar,
            s=cs.s,
            t=cs.t,
        )
        with pytest.raises(IOError, match="version"):
            ch.load_channel_set(path)

    def test_load_enforces_config_hash(self, tiny_config, geo, tmp_path):
        cs = ch.build_channel_set(draw_sample(tiny_config, 0), geo, tiny_config)
        path = tmp_path / "cs.npz"
        ch.save_channel_set(path, cs)
        assert ch.load_channel_set(path, expected_hash=cs.config_hash).sample_index == 0
        with pytest.raises(ValueError, match="hash"):
            ch.load_channel_set(path, expected_hash="deadbeef" * 8)

    def test_hash_recorded(self, tiny_config, geo):
        cs = ch.build_channel_set(draw_sample(tiny_config, 0), geo, tiny_config)
        assert cs.config_hash == config_hash(tiny_config)
