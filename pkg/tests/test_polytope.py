"""Halfspace regions, pyramid construction and the region file format."""

import math

import numpy as np
import pytest
import yaml

from trigopt.errors import ConfigError, PolytopeFormatError
from trigopt.nlp.expr import evaluate_expr, var
from trigopt.scenarios.polytope import Polytope, load_polytopes, pyramid_regions, rectangle, save_polytopes
from trigopt.settings import REPO_ROOT

REGIONS_DIR = REPO_ROOT / "config" / "regions"
PDG_CENTERS = [(2000.0, 400.0, 0.0), (1000.0, 250.0, 0.0), (100.0, -100.0, 0.0)]


class TestPolytope:
    def test_rectangle_membership(self):
        box = rectangle((0.0, 2.0), (1.0, 3.0))
        assert [1.0, 2.0] in box
        assert box.contains([2.0, 3.0])
        assert not box.contains([2.1, 2.0])
        np.testing.assert_allclose(box.residual([1.0, 2.0]), [-1.0, -1.0, -1.0, -1.0])

    def test_empty_rectangle(self):
        with pytest.raises(ConfigError):
            rectangle((1.0, 1.0), (0.0, 1.0))

    def test_rows_over_expressions(self):
        box = rectangle((0.0, 2.0), (1.0, 3.0))
        rows = box.rows([var(0), var(1)], scale=2.0)
        values = [evaluate_expr(row, [1.0, 2.0]) for row in rows]
        np.testing.assert_allclose(values, box.residual([1.0, 2.0]) / 2.0)

    def test_bounding_interval(self):
        box = rectangle((0.0, 2.0), (1.0, 3.0))
        lo, hi = box.bounding_interval([-1.0, -1.0], [4.0, 4.0])
        np.testing.assert_allclose(hi, [2.0, 1.0, 1.0, 2.0])
        np.testing.assert_allclose(lo, [-3.0, -4.0, -4.0, -3.0])

    def test_mismatched_offsets(self):
        with pytest.raises(PolytopeFormatError):
            Polytope(np.eye(2), [1.0, 2.0, 3.0])

    def test_zero_row(self):
        with pytest.raises(PolytopeFormatError):
            Polytope([[0.0, 0.0], [1.0, 0.0]], [0.0, 0.0])

    def test_non_finite_entry(self):
        with pytest.raises(PolytopeFormatError):
            Polytope([[np.nan, 1.0]], [0.0])

    def test_point_dimension(self):
        with pytest.raises(PolytopeFormatError):
            rectangle((0.0, 1.0), (0.0, 1.0)).residual([0.5, 0.5, 0.5])


class TestPyramids:
    def test_point_above_apex_is_inside(self):
        (pyramid,) = pyramid_regions(70.0, [PDG_CENTERS[0]])
        residual = pyramid.residual(np.add(PDG_CENTERS[0], [0.0, 0.0, 100.0]))
        np.testing.assert_allclose(residual, np.full(4, 1.0 - 100.0 * math.sin(math.radians(70.0))))
        assert residual[0] == pytest.approx(-92.97, abs=0.01)

    def test_apex_is_outside(self):
        (pyramid,) = pyramid_regions(70.0, [PDG_CENTERS[1]])
        assert not pyramid.contains(PDG_CENTERS[1])

    def test_invalid_angle(self):
        with pytest.raises(ConfigError):
            pyramid_regions(90.0, PDG_CENTERS)

    def test_shipped_file_matches_construction(self):
        shipped = load_polytopes(REGIONS_DIR / "pdg_pyramids.yaml", dim=3)
        built = pyramid_regions(70.0, PDG_CENTERS)
        assert [p.name for p in shipped] == [p.name for p in built]
        for file_region, region in zip(shipped, built):
            np.testing.assert_allclose(file_region.A, region.A, rtol=0, atol=1e-12)
            np.testing.assert_allclose(file_region.b, region.b, rtol=0, atol=1e-9)


class TestRegionFiles:
    def test_shipped_rectangles(self):
        regions = load_polytopes(REGIONS_DIR / "ugv_rectangles.yaml", dim=2)
        assert [p.name for p in regions] == ["R1", "R2", "R3", "R4", "R5"]
        assert regions[0].contains([0.0, 0.0])
        assert regions[-1].contains([10.0, 10.0])

    def test_save_load(self, tmp_path):
        regions = pyramid_regions(65.0, PDG_CENTERS[:2], d=[1.0, 2.0, 3.0, 4.0])
        path = save_polytopes(regions, tmp_path / "regions" / "pyramids.yaml")
        loaded = load_polytopes(path)
        for original, restored in zip(regions, loaded):
            assert restored.name == original.name
            np.testing.assert_array_equal(restored.A, original.A)
            np.testing.assert_array_equal(restored.b, original.b)

    def test_wrong_dimension(self):
        with pytest.raises(PolytopeFormatError):
            load_polytopes(REGIONS_DIR / "ugv_rectangles.yaml", dim=3)

    def test_missing_file(self, tmp_path):
        with pytest.raises(PolytopeFormatError):
            load_polytopes(tmp_path / "absent.yaml")

    def test_missing_offsets(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump({"polytopes": [{"name": "a", "A": [[1.0, 0.0]]}]}))
        with pytest.raises(PolytopeFormatError):
            load_polytopes(path)

    def test_mismatched_b(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump({"polytopes": [{"A": [[1.0, 0.0], [0.0, 1.0]], "b": [1.0]}]}))
        with pytest.raises(PolytopeFormatError):
            load_polytopes(path)

    def test_declared_dimension_checked(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump({"polytopes": [{"dim": 3, "A": [[1.0, 0.0]], "b": [1.0]}]}))
        with pytest.raises(PolytopeFormatError):
            load_polytopes(path)

    def test_not_a_region_document(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(PolytopeFormatError):
            load_polytopes(path)
