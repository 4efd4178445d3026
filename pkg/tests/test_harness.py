import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbcontrol.harness import (COLUMNS, RhoSchedule, StudyError, StudyTable, eoc,
                               run_constrained_study, run_convergence_study)
from dbcontrol.mesh import build_unit_cube
from dbcontrol.saddle import ConvergenceError

from oracles import eoc_reference

pytestmark = pytest.mark.property


class TestRhoSchedule:
    def test_h_squared_exact_on_cube(self):
        s = RhoSchedule("h_squared")
        for level in range(3):
            assert s(build_unit_cube(level).nominal_h) == 4.0 ** -(level + 1)
        for level in range(3, 8):
            assert s(2.0 ** -(level + 1)) == 4.0 ** -(level + 1)

    def test_natural_log(self):
        h = 1.0 / 16
        assert RhoSchedule("h_squared_over_log")(h) == pytest.approx(h * h / math.log(16.0), rel=1e-15)

    def test_log_needs_h_below_one(self):
        with pytest.raises(ValueError):
            RhoSchedule("h_squared_over_log")(1.0)

    def test_fixed(self):
        assert RhoSchedule.parse("fixed:0.01")(0.3) == 0.01
        with pytest.raises(ValueError):
            RhoSchedule("fixed", 2.0)
        with pytest.raises(ValueError):
            RhoSchedule("fixed")

    def test_parse(self):
        assert RhoSchedule.parse("h2") == RhoSchedule("h_squared")
        assert RhoSchedule.parse("h2log") == RhoSchedule("h_squared_over_log")
        with pytest.raises(ValueError):
            RhoSchedule.parse("h3")
        for text in ("h2", "h2log"):
            assert RhoSchedule.parse(text).label() == text

    @settings(max_examples=50, deadline=None)
    @given(level=st.integers(0, 14), kind=st.sampled_from(["h_squared", "h_squared_over_log"]))
    def test_range(self, level, kind):
        rho = RhoSchedule(kind)(2.0 ** -(level + 1))
        assert 0.0 < rho <= 1.0


class TestEoc:
    def test_definition(self):
        errs = [1.0, 0.25, 0.0625, 0.03]
        rates = eoc(errs)
        assert rates[0] is None
        assert np.allclose(rates[1:], eoc_reference(errs))
        assert rates[1] == pytest.approx(2.0)

    @settings(max_examples=50, deadline=None)
    @given(errs=st.lists(st.floats(1e-12, 1e3), min_size=2, max_size=8),
           scale=st.floats(1e-6, 1e6))
    def test_scale_invariance(self, errs, scale):
        a = eoc(errs)[1:]
        b = eoc([e * scale for e in errs])[1:]
        assert np.allclose(a, b, atol=1e-9)

    def test_undefined_for_zero(self):
        assert eoc([1.0, 0.0, 0.5]) == [None, None, None]


def test_table_uses_harmonic_part_for_eoc():
    t = StudyTable()
    t.append({"level": 1, "l2_error": 1.0, "l2_error_vs_harmonic_part": 0.4})
    t.append({"level": 2, "l2_error": 0.9, "l2_error_vs_harmonic_part": 0.1})
    assert t.column("eoc") == [None, pytest.approx(2.0)]
    assert set(t.rows[0]) == set(COLUMNS)


def test_constant_target_on_disc():
    t = run_convergence_study("disc", "const:1", "h2log", range(1, 4))
    assert all(e <= 1e-8 for e in t.column("l2_error"))
    assert t.metadata["load_quadrature_degree"] == 4


def test_square_sweep_structure():
    t = run_convergence_study("square", "harm2d", "h2", range(1, 4), count_cg=True)
    assert t.column("level") == [1, 2, 3]
    assert t.column("M") == [25, 81, 289]
    assert all(isinstance(k, int) for k in t.column("pcg_iterations"))
    assert all(isinstance(k, int) for k in t.column("cg_iterations"))
    errs = t.column("l2_error")
    assert errs[0] > errs[1] > errs[2]
    assert t.column("rho") == [h * h for h in t.column("h")]


def test_target_dimension_mismatch():
    with pytest.raises(ValueError):
        run_convergence_study("square", "harm3d", "h2", range(1, 2))


def test_failure_keeps_partial_table(monkeypatch):
    from dbcontrol import harness
    real = harness.solve_unconstrained

    def failing(problem, *args, **kwargs):
        if problem.mesh.level == 2:
            raise ConvergenceError("forced")
        return real(problem, *args, **kwargs)

    monkeypatch.setattr(harness, "solve_unconstrained", failing)
    with pytest.raises(StudyError) as info:
        run_convergence_study("square", "harm2d", "h2", range(1, 4))
    assert info.value.table.column("level") == [1]
    assert "level 2" in str(info.value)


def test_wide_bounds_match_unconstrained():
    free = run_convergence_study("cube", "harm3d", "h2", range(1, 3))
    boxed = run_constrained_study(range(1, 3), -10.0, 10.0)
    assert np.allclose(boxed.column("l2_error"), free.column("l2_error"), rtol=1e-8)
    assert boxed.column("pdas_iterations") == [1, 1]
    assert boxed.column("changing_points") == ["0", "0"]
