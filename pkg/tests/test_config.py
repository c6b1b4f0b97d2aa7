"""Scenario configuration: defaults, validation, and derived objects."""

import json

import numpy as np
import pytest

from specprecode import (ConfigError, EvmConstraint, ScenarioConfig,
                         analytic_inband_reference)
from specprecode.config import (DEFAULT_SCENARIO, EDGE_RAMP, MASK2_DB,
                                expand_evm_profile, selective_edge_profile)

from conftest import small_numerology


class TestDefaults:
    def test_empty_dict_resolves(self):
        cfg = ScenarioConfig.from_dict({})
        num = cfg.numerology
        assert (num.fft_size, num.cp_len, num.n_active, num.prb_size) == (512, 36, 300, 12)
        assert num.n_prb == 25
        assert cfg.freq_grid.size == 8 and cfg.mask.n_points == 8
        assert cfg.precoder == "ssp" and cfg.constellation == "64QAM"
        assert (cfg.seed, cfg.symbols, cfg.n_tx) == (1, 20, 2)
        assert cfg.evm_mode == "wideband" and cfg.evm_eps_avg == 0.08
        assert cfg.psd_oversample == 4 and cfg.psd_bin_hz == 100e3

    def test_looser_mask_entries_get_larger_bounds(self):
        cfg = ScenarioConfig.from_dict({})
        mask_db = np.asarray(cfg.mask.mask_db)
        tight = cfg.mask.gamma[mask_db == -75.0]
        loose = cfg.mask.gamma[mask_db == -65.0]
        assert loose.min() > tight.max()

    def test_second_mask_is_uniformly_tighter(self):
        assert len(MASK2_DB) == len(DEFAULT_SCENARIO["mask_db_per_100khz"])
        assert all(b < a for a, b in zip(DEFAULT_SCENARIO["mask_db_per_100khz"],
                                         MASK2_DB))

    def test_normalized_round_trips(self):
        cfg = ScenarioConfig.from_dict({"seed": 5, "ssp": {"sweeps": 7}})
        again = ScenarioConfig.from_dict(cfg.normalized())
        assert again.seed == 5 and again.ssp.sweeps == 7
        assert again.normalized() == cfg.normalized()

    def test_normalized_is_a_copy(self):
        cfg = ScenarioConfig.from_dict({})
        snap = cfg.normalized()
        snap["numerology"]["fft_size"] = 64
        assert cfg.normalized()["numerology"]["fft_size"] == 512


class TestValidation:
    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"bandwidth": 5e6})

    def test_unknown_nested_key(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"ssp": {"momentum": 0.9}})

    def test_wrong_types_rejected(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"numerology": {"fft_size": "big"}})
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"seed": True})
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"frequencies_hz": 5e6})

    def test_value_ranges(self):
        for bad in ({"n_tx": 0}, {"seed": -1}, {"symbols": 0},
                    {"precoder": "zf"}, {"constellation": "czerwony"}):
            with pytest.raises(ConfigError):
                ScenarioConfig.from_dict(bad)

    def test_mask_length_must_match_frequencies(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"mask_db_per_100khz": [-75.0, -65.0]})

    def test_solver_blocks_validated(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"admm": {"rho": -1.0}})
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"ssp": {"phase": "loose"}})
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"essp": {"relaxation": 2.5}})

    def test_budgeted_precoders_need_a_budget(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"precoder": "essp",
                                      "evm": {"eps_avg_fraction": None}})
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"precoder": "essp",
                                      "evm": {"mode": "frequency_selective"}})
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"precoder": "ensp",
                                      "evm": {"mode": "frequency_selective",
                                              "profile_per_prb": [0.1] * 25}})

    def test_unbudgeted_precoder_tolerates_missing_budget(self):
        cfg = ScenarioConfig.from_dict({"evm": {"eps_avg_fraction": None}})
        assert cfg.evm_constraint() is None

    def test_profile_coverage_checked_up_front(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"evm": {"mode": "frequency_selective",
                                              "profile_per_prb": [0.1] * 3}})

    def test_psd_oversample_floor(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"psd": {"oversample": 2}})

    def test_aclr_bands_must_fit_psd_span(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"aclr": {"spacing_hz": 14e6}})


class TestProfiles:
    def test_reference_profile_shape(self):
        prof = selective_edge_profile(25)
        assert len(prof) == 25
        assert prof[0] == EDGE_RAMP and prof[-1] == list(reversed(EDGE_RAMP))
        assert prof[1:4] == [0.12, 0.095, 0.08]
        assert prof[4:21] == [0.07] * 17

    def test_reference_profile_minimum_size(self):
        assert len(selective_edge_profile(9)) == 9
        with pytest.raises(ConfigError):
            selective_edge_profile(8)

    def test_expand_scalars_and_ramps(self):
        num = small_numerology()          # 8 active, 2 blocks of 4
        eps = expand_evm_profile([[0.1, 0.2, 0.3, 0.4], 0.05], num)
        assert eps.tolist() == [0.1, 0.2, 0.3, 0.4, 0.05, 0.05, 0.05, 0.05]

    def test_expanded_reference_is_symmetric(self):
        cfg = ScenarioConfig.from_dict({})
        eps = expand_evm_profile(selective_edge_profile(25), cfg.numerology)
        assert eps.shape == (300,)
        assert np.array_equal(eps, eps[::-1])
        assert eps[0] == 0.20 and eps[150] == 0.07

    def test_expand_validation(self):
        num = small_numerology()
        with pytest.raises(ConfigError):
            expand_evm_profile([0.1], num)
        with pytest.raises(ConfigError):
            expand_evm_profile([-0.1, 0.1], num)
        with pytest.raises(ConfigError):
            expand_evm_profile([[0.1, 0.2], 0.1], num)
        with pytest.raises(ConfigError):
            expand_evm_profile([[0.1, 0.2, -0.3, 0.4], 0.1], num)


class TestDerivedObjects:
    def test_wideband_constraint(self):
        con = ScenarioConfig.from_dict({}).evm_constraint()
        assert isinstance(con, EvmConstraint)
        assert con.mode == "wideband" and con.eps_avg == 0.08

    def test_selective_constraint(self):
        cfg = ScenarioConfig.from_dict({
            "precoder": "essp",
            "evm": {"mode": "frequency_selective",
                    "profile_per_prb": selective_edge_profile(25)}})
        con = cfg.evm_constraint()
        assert con.mode == "frequency_selective"
        assert con.eps.shape == (300,) and con.eps[0] == 0.20

    def test_psd_reference_scales_with_antennas(self):
        one = ScenarioConfig.from_dict({"n_tx": 1}).psd_config()
        two = ScenarioConfig.from_dict({"n_tx": 2}).psd_config()
        assert two.ref_density == pytest.approx(2.0 * one.ref_density, rel=1e-12)
        num = ScenarioConfig.from_dict({}).numerology
        expect = analytic_inband_reference(num) / (num.symbol_len * num.sample_rate_hz)
        assert one.ref_density == pytest.approx(expect, rel=1e-12)
        assert one.ref_db == -21.5


class TestLoad:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ScenarioConfig.load(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            ScenarioConfig.load(path)

    def test_non_object_root(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2, 3]")
        with pytest.raises(ConfigError):
            ScenarioConfig.load(path)

    def test_valid_file(self, tmp_path):
        path = tmp_path / "ok.json"
        path.write_text(json.dumps({"seed": 9, "precoder": "admm"}))
        cfg = ScenarioConfig.load(path)
        assert cfg.seed == 9 and cfg.precoder == "admm"
