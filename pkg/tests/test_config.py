"""Flat key/value config parsing and object construction."""

import hashlib

import numpy as np
import numpy.testing as npt
import pytest

from sse_lab.config import (
    ConfigError,
    complex_matrix,
    config_hash,
    load_config,
    parse_config_text,
    plan_from_config,
    system_from_config,
)
from sse_lab.system import build_flat_bath

FLAT_TEXT = """\
# reference decay experiment
system.kind = "flat-bath"
system.gamma = 0.05
system.levels = 21
system.spacing = 0.1

noise.sigma = 1.0

run.dt = 0.05
run.horizon = 1.0
run.n_traj = 8
run.master_seed = 11
run.record_stride = 4
run.observables = ["survival", "occupations"]
"""


class TestParse:
    def test_sections_and_values(self):
        cfg = parse_config_text(FLAT_TEXT)
        assert cfg["system"]["kind"] == "flat-bath"
        assert cfg["system"]["levels"] == 21
        assert cfg["noise"]["sigma"] == 1.0
        assert cfg["run"]["observables"] == ["survival", "occupations"]

    def test_comments_and_blanks_skipped(self):
        assert parse_config_text("\n# note\n  \n") == {}

    def test_json_value_kinds(self):
        cfg = parse_config_text(
            'a.flag = true\na.text = "hi"\na.mat = [[1, 2], [3, 4]]'
        )
        assert cfg["a"]["flag"] is True
        assert cfg["a"]["text"] == "hi"
        assert cfg["a"]["mat"] == [[1, 2], [3, 4]]

    @pytest.mark.parametrize(
        "text, lineno",
        [
            ("a.b = 1\nbroken line\n", 2),
            ("nodots = 1", 1),
            ("a.b.c = 1", 1),
            ("a. = 1", 1),
            ("a.b = {not json}", 1),
            ('a.b = 1\n\na.c = "unterminated', 3),
        ],
    )
    def test_errors_carry_line_numbers(self, text, lineno):
        with pytest.raises(ConfigError, match=f"line {lineno}"):
            parse_config_text(text)


def test_load_config_digest(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(FLAT_TEXT)
    cfg, digest = load_config(path)
    assert cfg["run"]["n_traj"] == 8
    assert digest == hashlib.sha256(FLAT_TEXT.encode()).hexdigest()


def test_config_hash_is_order_insensitive():
    a = {"run": {"dt": 0.1, "n_traj": 4}}
    b = {"run": {"n_traj": 4, "dt": 0.1}}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({"run": {"dt": 0.2, "n_traj": 4}})


class TestComplexMatrix:
    def test_re_im_pairs(self):
        got = complex_matrix([[[0.0, 0.0], [0.1, -0.5]], [[0.1, 0.5], [0.0, 0.0]]], "v")
        npt.assert_allclose(got, [[0.0, 0.1 - 0.5j], [0.1 + 0.5j, 0.0]])

    def test_rejects_malformed_leaves(self):
        with pytest.raises(ConfigError, match="re, im"):
            complex_matrix([[0.0, 0.1, 0.2]], "v")
        with pytest.raises(ConfigError):
            complex_matrix(3.0, "v")


class TestSystemFromConfig:
    def test_flat_bath_kind(self):
        cfg = parse_config_text(FLAT_TEXT)
        spec = system_from_config(cfg)
        want = build_flat_bath(
            gamma_target=0.05, level_count=21, spacing=0.1, e_s=0.0
        )
        npt.assert_array_equal(spec.energies, want.energies)
        npt.assert_array_equal(spec.v, want.v)
        assert spec.manifold == want.manifold

    def test_explicit_kind(self):
        cfg = parse_config_text(
            'system.kind = "explicit"\n'
            "system.energies = [0.0, 1.0]\n"
            "system.v = [[[0.0, 0.0], [0.1, 0.0]], [[0.1, 0.0], [0.0, 0.0]]]\n"
            "system.manifold = [0]\n"
            "system.initial = 0\n"
        )
        spec = system_from_config(cfg)
        npt.assert_array_equal(spec.energies, [0.0, 1.0])
        assert spec.v[0, 1] == 0.1 + 0.0j
        assert spec.manifold == (0,)

    def test_missing_section_and_fields(self):
        with pytest.raises(ConfigError, match="system"):
            system_from_config({})
        with pytest.raises(ConfigError, match="system.gamma"):
            system_from_config({"system": {"kind": "flat-bath", "levels": 5}})
        with pytest.raises(ConfigError, match="unknown kind"):
            system_from_config({"system": {"kind": "lorentzian"}})


class TestPlanFromConfig:
    def test_full_plan(self):
        plan = plan_from_config(parse_config_text(FLAT_TEXT))
        assert plan.noise.sigma == 1.0
        assert plan.n_traj == 8
        assert plan.master_seed == 11
        assert plan.observables == ("survival", "occupations")
        assert plan.record_stride == 4

    def test_overrides(self):
        plan = plan_from_config(
            parse_config_text(FLAT_TEXT),
            seed_override=77,
            sigma_override=0.0,
            n_traj_override=3,
        )
        assert plan.master_seed == 77
        assert plan.noise.sigma == 0.0
        assert plan.n_traj == 3

    def test_observables_accept_bare_string(self):
        cfg = parse_config_text(FLAT_TEXT)
        cfg["run"]["observables"] = "survival"
        assert plan_from_config(cfg).observables == ("survival",)

    def test_defaults(self):
        cfg = parse_config_text(FLAT_TEXT)
        del cfg["noise"]
        del cfg["run"]["record_stride"]
        del cfg["run"]["observables"]
        cfg["run"]["dt"] = 0.1
        plan = plan_from_config(cfg)
        assert plan.noise.sigma == 0.0
        assert plan.record_stride == 1
        assert plan.observables == ("survival",)

    def test_missing_run_section(self):
        cfg = {"system": parse_config_text(FLAT_TEXT)["system"]}
        with pytest.raises(ConfigError, match="run"):
            plan_from_config(cfg)

    def test_plan_violations_become_config_errors(self):
        cfg = parse_config_text(FLAT_TEXT)
        cfg["run"]["record_stride"] = 7  # does not divide 20 steps
        with pytest.raises(ConfigError, match="field run"):
            plan_from_config(cfg)
