import tempfile
import unittest
from pathlib import Path

import numpy as np

from dumps import FieldDump
from geometry import build_square
from grid import build_grid


class FieldDumpTests(unittest.TestCase):
    def setUp(self):
        self.grid = build_grid(build_square(1.0), 0.25)
        self.values = np.linspace(0.1, 0.9, self.grid.size)

    def test_header_and_payload_layout(self):
        dump = FieldDump.from_grid(self.grid, self.values, "psi1_square")
        data = dump.to_bytes()
        header, payload = data.split(b"\n", 1)
        self.assertEqual(header, b"4 4 0.25 9 psi1_square")
        self.assertEqual(len(payload), 9 * 8)
        np.testing.assert_array_equal(np.frombuffer(payload, dtype="<f8"), self.values)

    def test_write_then_read(self):
        dump = FieldDump.from_grid(self.grid, self.values, "psi1_square")
        with tempfile.TemporaryDirectory() as tmp_dir:
            path = dump.write(Path(tmp_dir) / "nested" / "psi1.bin")
            loaded = FieldDump.read(path)
        self.assertEqual((loaded.nx, loaded.ny, loaded.h, loaded.n_interior), (4, 4, 0.25, 9))
        self.assertEqual(loaded.quantity, "psi1_square")
        np.testing.assert_array_equal(loaded.payload, self.values)

    def test_invalid_payloads(self):
        with self.assertRaises(ValueError):
            FieldDump.from_grid(self.grid, self.values[:-1], "psi1")
        bad = self.values.copy()
        bad[3] = np.nan
        with self.assertRaises(ValueError):
            FieldDump.from_grid(self.grid, bad, "psi1")
        with self.assertRaises(ValueError):
            FieldDump.from_grid(self.grid, self.values, "psi one")

    def test_malformed_bytes(self):
        with self.assertRaises(ValueError):
            FieldDump.from_bytes(b"no header at all")
        with self.assertRaises(ValueError):
            FieldDump.from_bytes(b"4 4 0.25\n")


if __name__ == "__main__":
    unittest.main()
