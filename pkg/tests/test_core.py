import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slowcode.core import (
    Code,
    CodebookParseError,
    CodeSet,
    ConfigError,
    DesignConfig,
    Emitter,
    FmcwParams,
    InvalidDimensionError,
    ValidationError,
    codebook_from_dict,
    design_config_from_dict,
    deserialize_codebook,
    emitters_from_list,
    random_code_set,
    random_unimodular_code,
    serialize_codebook,
)


class TestCode:
    def test_rejects_short(self):
        with pytest.raises(InvalidDimensionError):
            Code(np.array([1.0 + 0j]))

    def test_rejects_non_unimodular(self):
        with pytest.raises(ValidationError):
            Code(np.array([1.0, 0.5 + 0j]))

    @given(st.floats(min_value=1e-11, max_value=1e-9), st.booleans())
    def test_near_boundary_rejected(self, eps, up):
        mag = 1 + eps if up else 1 - eps
        with pytest.raises(ValidationError):
            Code(np.array([1.0, mag], dtype=complex))

    @given(st.floats(min_value=0, max_value=9e-13))
    def test_within_tolerance_accepted(self, eps):
        c = Code(np.array([1.0, 1.0 + eps], dtype=complex))
        assert c.n_len == 2

    def test_entries_read_only(self):
        c = random_unimodular_code(4, 0)
        with pytest.raises(ValueError):
            c.entries[0] = 1


class TestCodeSet:
    def test_mismatched_lengths(self):
        with pytest.raises(ValidationError):
            CodeSet((random_unimodular_code(4, 0), random_unimodular_code(5, 0)))

    def test_empty(self):
        with pytest.raises(ValidationError):
            CodeSet(())


class TestConfigs:
    def test_design_config_bounds(self):
        with pytest.raises(ConfigError):
            DesignConfig(16, 4, 16)
        with pytest.raises(ConfigError):
            DesignConfig(16, 0, 32)
        with pytest.raises(ValueError):
            DesignConfig(16, 4, 32, outer_tol=0)
        with pytest.raises(ValueError):
            DesignConfig(16, 4, 32, inner_cap=0)

    def test_lags_and_bins(self):
        cfg = DesignConfig(4, 2, 8)
        assert list(cfg.lags) == [-3, -2, -1, 0, 1, 2, 3]
        assert list(cfg.bins) == [-2, -1, 0, 1, 2]

    def test_fmcw_derived(self):
        p = FmcwParams()
        assert p.slope == pytest.approx(3e12)
        assert p.prf == pytest.approx(20e3)
        assert p.wavelength == pytest.approx(0.0125)

    def test_fmcw_invalid(self):
        with pytest.raises(ConfigError):
            FmcwParams(bandwidth=-1)

    def test_emitter_invalid(self):
        with pytest.raises(ConfigError):
            Emitter(0.0)
        with pytest.raises(ConfigError):
            Emitter(10.0, kind="clutter")

    def test_unknown_fields(self):
        with pytest.raises(ConfigError, match="unknown"):
            design_config_from_dict({"n_len": 8, "p_max": 2, "n_f": 16, "bogus": 1})
        with pytest.raises(ConfigError):
            emitters_from_list([{"range_m": 5, "rcs": 1}])


class TestRandomCodes:
    def test_deterministic(self):
        a = random_unimodular_code(4, 7)
        b = random_unimodular_code(4, 7)
        assert np.array_equal(a.entries, b.entries)

    def test_unimodular(self):
        c = random_unimodular_code(64, 3)
        assert np.max(np.abs(np.abs(c.entries) - 1)) < 1e-12

    def test_mean_small(self):
        c = random_unimodular_code(256, 1)
        assert abs(np.mean(c.entries)) < 0.2

    def test_short_rejected(self):
        with pytest.raises(InvalidDimensionError):
            random_unimodular_code(1, 0)


class TestCodebook:
    @given(st.integers(2, 40), st.integers(1, 3), st.integers(0, 2**31))
    def test_roundtrip_bitwise(self, tmp_path_factory, n, count, seed):
        rng = np.random.default_rng(seed)
        sets = [random_code_set(count, n, rng, "X"), random_code_set(1, n, rng, "Y")]
        path = tmp_path_factory.mktemp("cb") / "cb.json"
        serialize_codebook(sets, path)
        back = deserialize_codebook(path)
        assert [s.label for s in back] == ["X", "Y"]
        for a, b in zip(sets, back):
            for ca, cb in zip(a, b):
                assert np.array_equal(ca.phases, cb.phases)
                assert np.array_equal(ca.entries, cb.entries)

    def test_half_magnitude_entry(self):
        doc = {"n_len": 2, "sets": [{"label": "x", "entries": [[[1, 0], [0.5, 0]]]}]}
        with pytest.raises(ValidationError):
            codebook_from_dict(doc)

    def test_mismatched_lengths_in_set(self):
        doc = {"n_len": 2, "sets": [{"label": "x", "phases": [[0, 0], [0, 0, 0]]}]}
        with pytest.raises(ValidationError):
            codebook_from_dict(doc)

    def test_malformed_json_has_line(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"n_len": 2,\n "sets": [}')
        with pytest.raises(CodebookParseError, match="line 2"):
            deserialize_codebook(p)

    def test_field_context(self):
        doc = {"n_len": 2, "sets": [{"label": "x", "phases": [[0, "a"]]}]}
        with pytest.raises(CodebookParseError, match=r"sets\[0\]\.phases\[0\]\[1\]"):
            codebook_from_dict(doc)

    def test_missing_field(self):
        with pytest.raises(CodebookParseError, match="sets"):
            codebook_from_dict({"n_len": 2})

    def test_file_layout(self, tmp_path):
        p = tmp_path / "cb.json"
        serialize_codebook([CodeSet((random_unimodular_code(3, 0),), "x")], p)
        doc = json.loads(p.read_text())
        assert set(doc) == {"n_len", "sets"}
        assert set(doc["sets"][0]) == {"label", "phases"}
