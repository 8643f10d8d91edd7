import numpy as np
import pytest

from toeplitz_ml.errors import DomainError
from toeplitz_ml.fileio import (
    format_complex,
    parse_complex,
    read_matrix,
    read_snapshots,
    read_toeplitz,
    write_matrix,
    write_snapshots,
    write_toeplitz,
)
from toeplitz_ml.matrix import HermToeplitz, generate_snapshots


class TestComplexText:
    @pytest.mark.parametrize("z", [0.5 - 0.25j, 1e-300 + 3j, -2.0 + 0j, complex(0.1, -0.0)])
    def test_roundtrip(self, z):
        s = format_complex(z)
        assert s.endswith("i")
        assert parse_complex(s) == z

    def test_format(self):
        assert format_complex(0.5 - 0.25j) == "0.5-0.25i"

    def test_real_entry(self):
        assert parse_complex("1.5") == 1.5

    def test_garbage(self):
        with pytest.raises(DomainError):
            parse_complex("abci")


class TestFiles:
    def test_sym_toeplitz(self, tmp_path, sinc17):
        p = tmp_path / "t.csv"
        write_toeplitz(p, sinc17)
        assert p.read_text().splitlines()[0] == "toeplitz-sym,17"
        back = read_toeplitz(p)
        np.testing.assert_array_equal(back.lags, sinc17.lags)

    def test_herm_toeplitz(self, tmp_path, rng):
        H = HermToeplitz(1.5, rng.standard_normal(3) + 1j * rng.standard_normal(3))
        p = tmp_path / "h.csv"
        write_toeplitz(p, H)
        back = read_toeplitz(p)
        assert back.lag0 == H.lag0
        np.testing.assert_array_equal(back.lags, H.lags)

    def test_headerless_matrix(self, tmp_path, sinc17):
        p = tmp_path / "m.csv"
        write_matrix(p, sinc17.dense())
        np.testing.assert_array_equal(read_toeplitz(p).lags, sinc17.lags)

    def test_complex_matrix(self, tmp_path, trial85):
        _, R = trial85
        p = tmp_path / "r.csv"
        write_matrix(p, R)
        np.testing.assert_array_equal(read_matrix(p), R)

    def test_snapshots(self, tmp_path, sinc17):
        S = generate_snapshots(sinc17, 9, seed=4)
        p = tmp_path / "s.csv"
        write_snapshots(p, S)
        assert p.read_text().splitlines()[0] == "snapshots,17,9,4"
        back = read_snapshots(p)
        assert back.seed == 4
        np.testing.assert_array_equal(back.snapshots, S.snapshots)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("1,2\n3,4\n")
        with pytest.raises(DomainError):
            read_snapshots(p)

    def test_lag_count_mismatch(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("toeplitz-sym,3\n1.0,0.5\n")
        with pytest.raises(DomainError):
            read_toeplitz(p)
