import math

import pytest

from cloudsg.config import (ConfigError, RunConfig, load_config, parse_config,
                            serialize_config)


MINIMAL = """
[scenario]
name = warm_bubble
cells = 20,20

[time]
t_end = 5.0
"""


class TestParsing:
    def test_minimal_fills_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.scenario["cells"] == (20, 20)
        assert cfg.time["t_end"] == 5.0
        assert cfg.solver["mu_q"] == 1e-2
        assert cfg.stochastic["modes"] == 0
        assert math.isinf(cfg.time["dt_max"])

    def test_roundtrip_identity(self):
        cfg = parse_config(MINIMAL)
        again = parse_config(serialize_config(cfg))
        for sec in ("scenario", "time", "solver", "stochastic", "output"):
            assert getattr(cfg, sec) == getattr(again, sec)

    def test_comments_and_formats(self):
        cfg = parse_config("[scenario]\ncells = 16x12  # mesh\nnu = 0.5\n"
                           "[stochastic]\nmodes = 3\n")
        assert cfg.scenario["cells"] == (16, 12)
        assert cfg.scenario["nu"] == 0.5
        assert cfg.stochastic["modes"] == 3

    def test_unknown_section_with_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config("\n[warp]\nspeed = 9\n")

    def test_unknown_key_with_line(self):
        with pytest.raises(ConfigError, match="line 3.*color"):
            parse_config("\n[scenario]\ncolor = blue\n")

    def test_bad_type_with_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config("[time]\nt_end = soon\n")
        with pytest.raises(ConfigError, match="line 2"):
            parse_config("[stochastic]\nmodes = 2.5\n")

    def test_key_outside_section(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("t_end = 3\n")

    def test_negative_cells_rejected(self):
        with pytest.raises(ConfigError, match="cells"):
            parse_config("[scenario]\ncells = -4,-4\n")

    def test_bad_method_rejected(self):
        with pytest.raises(ConfigError, match="method"):
            parse_config("[stochastic]\nmethod = sampling\n")


class TestRunConfig:
    def test_unknown_key_in_constructor(self):
        with pytest.raises(ConfigError):
            RunConfig(time={"tend": 3.0})

    def test_replace_makes_copy(self):
        cfg = RunConfig()
        other = cfg.replace("scenario", cells=(8, 8))
        assert other.scenario["cells"] == (8, 8)
        assert cfg.scenario["cells"] == (40, 40)

    def test_scenario_config_mapping(self):
        cfg = RunConfig(scenario={"name": "rayleigh_benard",
                                  "cells": (12, 6), "nu": 0.2,
                                  "perturb": "initial", "seed": 5})
        sc = cfg.scenario_config()
        assert sc.scenario == "rayleigh_benard"
        assert sc.cells == (12, 6)
        assert sc.nu == 0.2
        assert sc.seed == 5

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(MINIMAL)
        assert load_config(path).time["t_end"] == 5.0
