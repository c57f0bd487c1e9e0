import json
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from config import (
    Config,
    ConfigError,
    DomainChoice,
    ExperimentConfig,
    load_experiment,
    load_experiment_text,
)
from field import ChargeMode, FieldKind, Pattern, SplitLine


class ExperimentConfigTests(unittest.TestCase):
    def test_defaults(self):
        config = ExperimentConfig()
        self.assertEqual(config.domain, DomainChoice.PAIR)
        self.assertEqual(config.h, 0.125)
        self.assertEqual(config.field_spec().kind, FieldKind.HOMOGENEOUS)
        self.assertTrue(config.is_density)
        self.assertEqual(config.seed, 20100)

    def test_parse_key_value_text(self):
        config = load_experiment_text(
            "domain=square\n"
            "leg=1\n"
            "h=0.25\n"
            "field.kind=reference_pattern\n"
            "field.pattern=split_hypotenuse\n"
            "solver.k=3\n"
            "output.dump=yes\n"
        )
        self.assertEqual(config.domain, DomainChoice.SQUARE)
        self.assertEqual(config.n, 4)
        self.assertEqual(config.k, 3)
        self.assertTrue(config.dump)
        self.assertEqual(config.field_spec().pattern, Pattern.SPLIT_HYPOTENUSE)

    def test_unknown_key_is_rejected(self):
        with self.assertRaises(ConfigError) as ctx:
            load_experiment_text("solver.kk=3\n")
        self.assertIn("solver.kk", str(ctx.exception))
        with self.assertRaises(ConfigError):
            load_experiment_text("field.sigma.H=2\n")

    def test_incompatible_spacing_is_a_config_error(self):
        with self.assertRaises(ConfigError) as ctx:
            load_experiment_text("leg=2\nh=0.3\n")
        self.assertIsInstance(ctx.exception, ValueError)
        with self.assertRaises(ConfigError):
            load_experiment_text("h=0.25\nn=8\n")

    def test_sweep_sequence(self):
        config = load_experiment_text("k_sequence=1,2,4\n")
        self.assertIsNone(config.n)
        self.assertEqual(config.sweep_spacings(), [(1, 0.25), (2, 0.125), (4, 0.0625)])
        with self.assertRaises(ConfigError):
            config.h
        with self.assertRaises(ConfigError):
            load_experiment_text("leg=0.3\nk_sequence=1\n")

    def test_point_charges_need_a_cutoff_for_sweeps(self):
        with self.assertRaises(ConfigError):
            load_experiment_text("field.kind=point_charges\nk_sequence=1,2\n")
        config = load_experiment_text("field.kind=point_charges\nn=8\nfield.charge.mode=coulomb\n")
        spec = config.field_spec()
        self.assertEqual(spec.cutoff, 0.125)
        self.assertEqual(spec.charge_mode, ChargeMode.COULOMB)

    def test_piecewise_sigma_overrides(self):
        text = "field.kind=piecewise_constant_density\n" + "".join(
            f"field.sigma.{b}={v}\n" for b, v in zip("ABCDEFG", (1, 2, 1, 2, 1, 2, 2))
        )
        spec = load_experiment_text(text).field_spec()
        self.assertEqual(spec.sigma_map()["D"], 2.0)
        parity = load_experiment_text("field.kind=piecewise_constant_density\nfield.sigma.dark=3\n").field_spec()
        self.assertEqual(parity.sigma_map()["G"], 3.0)

    def test_invalid_field_is_a_config_error(self):
        with self.assertRaises(ConfigError):
            load_experiment_text("field.kind=reference_pattern\nfield.sigma.light=-1\n")
        with self.assertRaises(ConfigError):
            load_experiment_text("field.kind=constant_vector_potential\nfield.efield.direction=1,1\n")
        with self.assertRaises(ConfigError):
            load_experiment_text("solver.method=qr\n")

    def test_split_line_rule(self):
        spec = load_experiment_text("field.kind=reference_pattern\nfield.split_line=light\n").field_spec()
        self.assertEqual(spec.split_line, SplitLine.LIGHT)
        self.assertEqual(spec.pattern, Pattern.SPLIT_DIAGONAL)
        default = load_experiment_text("field.kind=reference_pattern\n").field_spec()
        self.assertEqual(default.split_line, SplitLine.MEAN)
        with self.assertRaises(ConfigError):
            load_experiment_text("field.kind=reference_pattern\nfield.split_line=edge\n")
        with self.assertRaises(ConfigError):
            load_experiment_text("field.kind=homogeneous\nfield.split_line=light\n")

    def test_pattern_must_match_the_field_kind(self):
        with self.assertRaises(ConfigError) as ctx:
            load_experiment_text("field.kind=reference_pattern\nfield.pattern=parity\n")
        self.assertIn("piecewise_constant_density", str(ctx.exception))
        with self.assertRaises(ConfigError):
            load_experiment_text("field.kind=piecewise_constant_density\nfield.pattern=split_diagonal\n")
        with self.assertRaises(ConfigError):
            load_experiment_text("field.kind=constant_vector_potential\nfield.pattern=split_hypotenuse\n")
        parity = load_experiment_text("field.kind=piecewise_constant_density\nfield.pattern=parity\n")
        self.assertEqual(parity.field_spec().sigma_map()["B"], 2.0)

    def test_perturbation_keys(self):
        config = load_experiment_text("field.perturb.block=d\nfield.perturb.factor=1.2\n")
        self.assertEqual((config.perturb_block, config.perturb_factor), ("D", 1.2))

    def test_text_round_trip(self):
        configs = [
            ExperimentConfig(),
            load_experiment_text("field.kind=constant_vector_potential\nfield.efield.magnitude=5\n"
                                 "field.efield.direction=0.6,0.8\nkinetic=0.5\n"),
            load_experiment_text("field.kind=homogeneous\nfield.sigma.value=3\nk_sequence=1,2\n"),
            load_experiment_text("field.kind=reference_pattern\nfield.pattern=split_diagonal\n"
                                 "field.split_line=light\n"),
        ]
        for config in configs:
            self.assertEqual(load_experiment_text(config.to_text()), config)


class LoadExperimentTests(unittest.TestCase):
    def test_shipped_experiments_load(self):
        experiments = Path(__file__).resolve().parent.parent / "experiments"
        configs = {path.name: load_experiment(path) for path in sorted(experiments.glob("*.env"))}
        self.assertIn("efield_leg.env", configs)
        self.assertEqual(configs["efield_leg.env"].direction, (0.0, 1.0))
        self.assertEqual(configs["efield.env"].direction, (1.0, 0.0))
        self.assertEqual(configs["pattern.env"].n, 240)
        for name in ("pattern.env", "table.env"):
            self.assertEqual(configs[name].field_spec().split_line, SplitLine.LIGHT)

    def test_json_file_is_flattened(self):
        data = {
            "domain": "gww_a",
            "n": 8,
            "field": {"kind": "constant_vector_potential", "efield": {"magnitude": 5, "direction": [0.6, 0.8]}},
            "solver": {"k": 4},
        }
        with tempfile.TemporaryDirectory() as tmp_dir:
            path = Path(tmp_dir) / "efield.json"
            path.write_text(json.dumps(data), encoding="utf-8")
            config = load_experiment(path)
        self.assertEqual(config.domain, DomainChoice.GWW_A)
        self.assertEqual(config.direction, (0.6, 0.8))
        self.assertEqual(config.magnitude, 5.0)
        self.assertEqual(config.k, 4)

    def test_env_file(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            path = Path(tmp_dir) / "square.env"
            path.write_text("# unit square\ndomain=square\nleg=1\nn=8\n", encoding="utf-8")
            config = load_experiment(path)
        self.assertEqual((config.domain, config.n), (DomainChoice.SQUARE, 8))

    def test_missing_or_broken_files(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            with self.assertRaises(ConfigError):
                load_experiment(Path(tmp_dir) / "missing.env")
            broken = Path(tmp_dir) / "broken.json"
            broken.write_text("{not json", encoding="utf-8")
            with self.assertRaises(ConfigError):
                load_experiment(broken)


class ConfigTests(unittest.TestCase):
    def test_ensure_output_dir_creates_directory(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            target = os.path.join(tmp_dir, "out")
            with patch.object(Config, "OUTPUT_DIR", target):
                self.assertEqual(Config.ensure_output_dir(), target)
            self.assertTrue(os.path.isdir(target))


if __name__ == "__main__":
    unittest.main()
