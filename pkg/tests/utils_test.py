import os
import tempfile
import unittest

import numpy as np

from droid.utils import derive_seed, fmt, read_csv, sha256_file, sha256_json, write_csv


class T(unittest.TestCase):
    def test_derive_seed(self):
        self.assertEqual(derive_seed(7, 1, 2), derive_seed(7, 1, 2))
        self.assertNotEqual(derive_seed(7, 1, 2), derive_seed(7, 2, 1))
        self.assertNotEqual(derive_seed(7), derive_seed(8))
        seed = derive_seed(-1, 3)
        self.assertGreaterEqual(seed, 0)
        self.assertLess(seed, 2 ** 64)

    def test_sha256_json_ignores_key_order(self):
        self.assertEqual(sha256_json({"a": 1, "b": [1, 2]}), sha256_json({"b": [1, 2], "a": 1}))
        self.assertNotEqual(sha256_json({"a": 1}), sha256_json({"a": 2}))

    def test_fmt(self):
        self.assertEqual(fmt(None), "")
        self.assertEqual(fmt(True), "1")
        self.assertEqual(fmt(np.bool_(False)), "0")
        self.assertEqual(fmt(3), "3")
        self.assertEqual(fmt(np.float64(0.1)), "0.1")
        self.assertEqual(float(fmt(1 / 3)), 1 / 3)

    def test_csv_write_read(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "t.csv")
            write_csv(path, ["t", "q", "ok"], [[0.0, 2 / 3, True], [0.5, -1e-300, False]])
            rows = read_csv(path)
            self.assertEqual(rows[0], ["t", "q", "ok"])
            self.assertEqual(float(rows[1][1]), 2 / 3)
            self.assertEqual(rows[2][2], "0")
            with open(path, "rb") as fp:
                self.assertNotIn(b"\r\n", fp.read())
            digest = sha256_file(path)
            write_csv(path, ["t", "q", "ok"], [[0.0, 2 / 3, True], [0.5, -1e-300, False]])
            self.assertEqual(sha256_file(path), digest)
