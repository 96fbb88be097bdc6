import io
import json
import os
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pandas as pd

from krein_index.cli import (EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, ModelChoice, OutputFormat, build_parser, main,
                             resolve_config)
from krein_index.errors import ConfigError

# pylint: disable=missing-class-docstring,missing-function-docstring

SMALL_GRID = ["--n", "256", "--half-length", "20", "--tol", "1e-10"]


def _run(argv: list[str]) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


class TestUsageErrors(unittest.TestCase):

    def test_missing_subcommand(self):
        with redirect_stderr(io.StringIO()), self.assertRaises(SystemExit) as ctx:
            main([])
        self.assertEqual(ctx.exception.code, EXIT_USAGE)

    def test_missing_parameter(self):
        with tempfile.TemporaryDirectory() as out:
            code, _, err = _run(["index", "--s", "2", "--c", "1", "--out", out])
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("--p", err)

    def test_unknown_self_check_case(self):
        code, _, err = _run(["self-check", "nope"])
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("gkdv-p2", err)

    def test_odd_grid_size(self):
        with tempfile.TemporaryDirectory() as out:
            code, _, _ = _run(["solve-wave", "--s", "2", "--p", "2", "--n", "255", "--out", out])
        self.assertEqual(code, EXIT_USAGE)

    def test_outside_existence_window(self):
        with tempfile.TemporaryDirectory() as out:
            code, _, err = _run(["index", "--s", "0.5", "--p", "3", "--c", "1", "--out", out])
        self.assertEqual(code, EXIT_NUMERICAL)
        self.assertIn("p_max", err)


class TestConfig(unittest.TestCase):

    def test_precedence(self):
        with tempfile.TemporaryDirectory() as tmp:
            config_path = os.path.join(tmp, "run.json")
            with open(config_path, "w", encoding="utf-8") as f:
                json.dump({"s": 1.5, "p": 3, "output_dir": "from-file", "format": "json"}, f)
            args = build_parser().parse_args(["index", "--p", "2", "--config", config_path])
            config = resolve_config(args, {"KREIN_INDEX_OUTPUT_DIR": "from-env", "KREIN_INDEX_WORKERS": "3"})
        self.assertEqual(config.s, 1.5)
        self.assertEqual(config.p, 2.0)
        self.assertEqual(config.c, 1.0)
        self.assertEqual(config.output_dir, "from-file")
        self.assertEqual(config.workers, 3)
        self.assertEqual(config.model, ModelChoice.FKDV)
        self.assertEqual(config.format, OutputFormat.JSON)
        self.assertEqual(config.stem("index"), "index_fkdv_s1.5_p2_c1")

    def test_environment_only(self):
        args = build_parser().parse_args(["index", "--s", "2", "--p", "2"])
        config = resolve_config(args, {"KREIN_INDEX_OUTPUT_DIR": "from-env"})
        self.assertEqual(config.output_dir, "from-env")
        self.assertEqual(config.workers, 1)
        self.assertEqual(config.numerics().n, 1024)

    def test_unknown_key(self):
        with tempfile.TemporaryDirectory() as tmp:
            config_path = os.path.join(tmp, "run.json")
            with open(config_path, "w", encoding="utf-8") as f:
                json.dump({"speed": 2}, f)
            args = build_parser().parse_args(["index", "--config", config_path])
            with self.assertRaisesRegex(ConfigError, "speed"):
                resolve_config(args, {})

    def test_grid_overrides(self):
        args = build_parser().parse_args(["index", "--s", "2", "--p", "2"] + SMALL_GRID)
        numerics = resolve_config(args, {}).numerics()
        self.assertEqual((numerics.n, numerics.half_length, numerics.solver.tol), (256, 20.0, 1e-10))


class TestCommands(unittest.TestCase):

    def test_solve_wave(self):
        with tempfile.TemporaryDirectory() as out:
            code, stdout, _ = _run(["solve-wave", "--s", "2", "--p", "2", "--c", "1", "--out", out] + SMALL_GRID)
            self.assertEqual(code, EXIT_OK)
            self.assertIn("residual=", stdout)
            frame = pd.read_csv(os.path.join(out, "wave_fkdv_s2_p2_c1.csv"), float_precision="round_trip")
            with open(os.path.join(out, "wave_fkdv_s2_p2_c1.json"), encoding="utf-8") as f:
                metadata = json.load(f)
        expected = np.sqrt(2.0) / np.cosh(frame["x"].to_numpy())
        self.assertLess(np.max(np.abs(frame["U"].to_numpy() - expected)), 1e-7)
        self.assertEqual(metadata["p"], 2.0)

    def test_index(self):
        with tempfile.TemporaryDirectory() as out:
            code, stdout, _ = _run(["index", "--s", "2", "--p", "2", "--c", "1", "--out", out] + SMALL_GRID)
            with open(os.path.join(out, "index_fkdv_s2_p2_c1.json"), encoding="utf-8") as f:
                payload = json.load(f)
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(stdout.strip(), "K_Ham=0 verdict=STABLE")
        self.assertEqual(payload["n_L"], 1)
        self.assertEqual(payload["verdict"], "STABLE")

    def test_spectrum_is_reproducible(self):
        argv = ["spectrum", "--s", "2", "--p", "2", "--c", "1"] + SMALL_GRID
        contents = []
        for _ in range(2):
            with tempfile.TemporaryDirectory() as out:
                code, stdout, _ = _run(argv + ["--out", out])
                self.assertEqual(code, EXIT_OK)
                with open(os.path.join(out, "spectrum_fkdv_s2_p2_c1.csv"), "rb") as f:
                    contents.append(f.read())
        self.assertEqual(contents[0], contents[1])
        self.assertIn("K_Ham=0", stdout)
        self.assertTrue(contents[0].startswith(b"re,im,class,krein_form_value\n"))

    def test_schrodinger_spectrum(self):
        with tempfile.TemporaryDirectory() as out:
            code, stdout, _ = _run(["spectrum", "--model", "schrodinger", "--c", "0.5", "--format", "json",
                                    "--out", out, "--n", "256", "--half-length", "20"])
            self.assertEqual(code, EXIT_OK)
            self.assertTrue(os.path.exists(os.path.join(out, "spectrum_schrodinger_c0.5.json")))
        self.assertIn("k_r=", stdout)

    def test_dump_operator(self):
        with tempfile.TemporaryDirectory() as out:
            code, stdout, _ = _run(["dump-operator", "--s", "2", "--p", "2", "--c", "1", "--which", "sandwich",
                                    "--eps", "0.01", "--out", out] + SMALL_GRID)
            path = os.path.join(out, "operator_fkdv_s2_p2_c1_sandwich_eps0.01.bin")
            size = os.path.getsize(path)
            with open(f"{path}.json", encoding="utf-8") as f:
                header = json.load(f)
            entries = np.fromfile(path, dtype="<f8").reshape(256, 256)
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(stdout.strip().split()[0], "order=256")
        self.assertEqual(size, 256 * 256 * 8)
        self.assertEqual(header["order"], 256)
        asymmetry = np.max(np.abs(entries - entries.T))
        self.assertLessEqual(asymmetry, 1e-12 * np.max(np.abs(entries)))

    def test_symmetrized_needs_bbm(self):
        with tempfile.TemporaryDirectory() as out:
            code, _, _ = _run(["dump-operator", "--s", "2", "--p", "2", "--which", "symmetrized", "--out", out]
                              + SMALL_GRID)
        self.assertEqual(code, EXIT_USAGE)

    def test_sweep(self):
        with tempfile.TemporaryDirectory() as out:
            code, stdout, _ = _run(["sweep", "--axis", "p", "--start", "1", "--stop", "2", "--steps", "2",
                                    "--s", "2", "--c", "1", "--out", out] + SMALL_GRID)
            frame = pd.read_csv(os.path.join(out, "sweep_fkdv_p_1_2_2.csv"))
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(stdout.strip(), "no flip")
        self.assertEqual(list(frame["verdict"]), ["STABLE", "STABLE"])


if __name__ == "__main__":
    unittest.main()
