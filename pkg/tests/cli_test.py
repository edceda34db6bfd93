import unittest
import io
import json
import os
import tempfile
from contextlib import redirect_stdout
from unittest import mock

from . import SEEDS, TINY_CONFIG
from droid.cli import get_arg_parser, main
from droid.config import ExperimentConfig


def run_main(args):
    f = io.StringIO()
    with redirect_stdout(f):
        try:
            main(args)
        except SystemExit as err:
            return err.code, f.getvalue()
    return None, f.getvalue()


class T(unittest.TestCase):

    def setUp(self):
        patcher = mock.patch.dict(os.environ)
        patcher.start()
        self.addCleanup(patcher.stop)
        os.environ.pop(ExperimentConfig.SEED_ENV, None)
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = tmp.name
        self.config = os.path.join(self.tmp, "experiment.json")
        with open(self.config, "w") as fp:
            fp.write(TINY_CONFIG)
        self.out = os.path.join(self.tmp, "out")

    def test_build_config_cli(self):
        args = get_arg_parser().parse_args(["run", "--config", self.config, "--seed", "9", "--stages", "demo,real"])
        conf = ExperimentConfig.fromcliargs(args)
        self.assertEqual(args.stages, "demo,real")
        self.assertEqual(args.out, "droid_out")
        self.assertEqual(set(conf["seeds"].values()), {9})
        self.assertEqual(conf["identify"]["population"], 6)

        conf = ExperimentConfig.fromcliargs(get_arg_parser().parse_args(["demo", "-c", self.config]))
        self.assertEqual(dict(conf["seeds"]), SEEDS)

    def test_version(self):
        code, output = run_main(["--version"])
        self.assertEqual(code, 0)
        self.assertIn("Version:", output)

    def test_description(self):
        description = get_arg_parser().description
        self.assertIn("--template_conf", description)
        self.assertNotIn("  ", description)

    def test_template_conf(self):
        code, output = run_main(["--template_conf"])
        self.assertEqual(code, 0)
        self.assertEqual(ExperimentConfig.fromstring(output), ExperimentConfig.default())

    def test_exit_codes(self):
        code, _ = run_main(["demo", "-c", self.config, "-o", self.out, "-q"])
        self.assertEqual(code, 0)
        self.assertTrue(os.path.isfile(os.path.join(self.out, "demo", "demo.csv")))

        # No command
        self.assertEqual(run_main(["-q"])[0], 2)
        # Unknown stage
        self.assertEqual(run_main(["run", "--stages", "demo,foo", "-o", self.out, "-q"])[0], 2)
        # Invalid configuration
        bad = os.path.join(self.tmp, "bad.json")
        with open(bad, "w") as fp:
            json.dump({"identify": {"population": 2, "parents": 5}}, fp)
        self.assertEqual(run_main(["demo", "-c", bad, "-o", self.out, "-q"])[0], 2)
        self.assertEqual(run_main(["demo", "-c", os.path.join(self.tmp, "missing.json"), "-q"])[0], 2)
        # Missing inputs
        self.assertEqual(run_main(["identify", "-c", self.config, "-o", self.out, "-q"])[0], 3)
        self.assertEqual(run_main(["report", "-o", self.out, "-q"])[0], 3)

    def test_report(self):
        code, _ = run_main(["run", "-c", self.config, "-o", self.out, "-q"])
        self.assertEqual(code, 0)
        code, output = run_main(["report", "-o", self.out, "-q"])
        self.assertEqual(code, 0)
        self.assertIn("Transfer evaluation summary", output)
        self.assertIn("DROID-DR", output)
        with open(os.path.join(self.out, "eval", "summary.txt")) as fp:
            self.assertEqual(fp.read(), output)
