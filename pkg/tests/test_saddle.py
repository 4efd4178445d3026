import numpy as np
import pytest
from scipy import sparse as sp

from dbcontrol.assembly import assemble_problem
from dbcontrol.linalg import extreme_rayleigh
from dbcontrol.mesh import DOMAINS, build_mesh
from dbcontrol.saddle import (ConvergenceError, SaddleSystem, iteration_cap, precond_apply,
                              schur_apply, solve_unconstrained, spectral_probe)
from dbcontrol.targets import HARM2D, HARM3D, constant

from oracles import dense_kkt, dense_schur

pytestmark = pytest.mark.property


def _dense(p):
    return p.mass.toarray(), p.stiffness.toarray()


class TestSchurOperator:
    def test_against_dense(self, square1, rng):
        M, K = _dense(square1)
        S_ref = dense_schur(M, K, square1.rho, square1.n_interior)
        sys = SaddleSystem(square1)
        for _ in range(5):
            p = rng.standard_normal(square1.n_interior)
            assert np.allclose(schur_apply(sys, p), S_ref @ p, rtol=0, atol=1e-10 * np.abs(S_ref).max())

    def test_zero(self, square2):
        assert np.all(schur_apply(SaddleSystem(square2), np.zeros(square2.n_interior)) == 0.0)

    @pytest.mark.parametrize("inner", ["direct", "cg"])
    def test_symmetry_and_linearity(self, square2, rng, inner):
        sys = SaddleSystem(square2, inner=inner)
        N = square2.n_interior
        for _ in range(3):
            p, q = rng.standard_normal(N), rng.standard_normal(N)
            Sp, Sq = schur_apply(sys, p), schur_apply(sys, q)
            assert abs(q @ Sp - p @ Sq) <= 1e-9 * np.linalg.norm(p) * np.linalg.norm(q)
            a, b = rng.standard_normal(2)
            lhs = schur_apply(sys, a * p + b * q)
            assert np.linalg.norm(lhs - a * Sp - b * Sq) <= 1e-10 * np.linalg.norm(lhs)

    def test_length_check(self, square1):
        with pytest.raises(ValueError):
            schur_apply(SaddleSystem(square1), np.ones(3))


class TestPreconditioner:
    def test_lumped_sandwich_inverse(self, square2, rng):
        K0 = square2.dirichlet_stiffness
        D0 = square2.lumped_interior_mass.diagonal()
        x = rng.standard_normal(square2.n_interior)
        r = K0 @ ((K0 @ x) / D0)
        assert np.allclose(precond_apply(square2, r), x, atol=1e-10 * np.abs(x).max())

    def test_scaled_square_inverse(self, cube1, rng):
        K0 = cube1.dirichlet_stiffness
        x = rng.standard_normal(cube1.n_interior)
        r = cube1.h ** -3 * (K0 @ (K0 @ x))
        assert np.allclose(precond_apply(cube1, r, "scaled_square"), x, atol=1e-10)

    @pytest.mark.parametrize("variant", ["lumped_sandwich", "scaled_square"])
    def test_linear_and_positive(self, square2, rng, variant):
        N = square2.n_interior
        R = rng.standard_normal((N, 100))
        Z = np.column_stack([precond_apply(square2, r, variant) for r in R.T])
        assert np.all(np.einsum("ij,ij->j", R, Z) > 0.0)
        a, b = 0.3, -1.7
        comb = precond_apply(square2, a * R[:, 0] + b * R[:, 1], variant)
        assert np.linalg.norm(comb - a * Z[:, 0] - b * Z[:, 1]) <= 1e-12 * np.linalg.norm(comb)

    def test_unknown_variant(self, square1):
        with pytest.raises(ValueError):
            precond_apply(square1, np.ones(square1.n_interior), "amg")


class TestSolve:
    @pytest.mark.parametrize("method", ["schur_pcg", "schur-cg", "direct"])
    def test_against_dense_kkt(self, square1, method):
        M, K = _dense(square1)
        y_ref, p_ref = dense_kkt(M, K, square1.rho, square1.load, square1.n_interior)
        rep = solve_unconstrained(square1, method)
        assert np.linalg.norm(rep.y - y_ref) <= 1e-7 * np.linalg.norm(y_ref)
        assert np.linalg.norm(rep.p - p_ref) <= 1e-7 * np.linalg.norm(p_ref)

    def test_block_residuals_and_harmonicity(self, cube1):
        sys = SaddleSystem(cube1)
        tol = 1e-8
        for method in ("schur_pcg", "schur_cg", "direct"):
            rep = solve_unconstrained(cube1, method, tol=tol)
            r1, r2 = sys.block_residual(rep.y, rep.p)
            assert r1 <= 10 * tol and r2 <= 10 * tol
            Ky = cube1.interior_stiffness @ rep.y
            y_A = np.sqrt(rep.y @ (cube1.state_matrix() @ rep.y))
            assert np.linalg.norm(Ky) / y_A <= 10 * tol
            assert len(rep.control) == cube1.n_total - cube1.n_interior

    def test_methods_agree(self, make_problem):
        for domain in ("lshape", "disc"):
            prob = make_problem(domain, 1, HARM2D)
            ys = [solve_unconstrained(prob, m).y for m in ("schur_pcg", "schur_cg", "direct")]
            for y in ys[1:]:
                assert np.linalg.norm(y - ys[0]) <= 1e-6 * np.linalg.norm(ys[0])

    @pytest.mark.parametrize("domain", DOMAINS)
    def test_constant_target(self, domain):
        mesh = build_mesh(domain, 1)
        prob = assemble_problem(mesh, constant(2.5), mesh.nominal_h ** 2)
        rep = solve_unconstrained(prob)
        assert np.max(np.abs(rep.y - 2.5)) <= 1e-8
        assert np.max(np.abs(rep.p)) <= 1e-8

    def test_iteration_cap_enforced(self, square2):
        with pytest.raises(ConvergenceError) as info:
            solve_unconstrained(square2, "schur_cg", maxit=2)
        assert info.value.stats.iterations == 2

    def test_unknown_method(self, square1):
        with pytest.raises(ValueError):
            solve_unconstrained(square1, "minres")

    def test_iteration_cap_formula(self):
        assert iteration_cap(1.0 / 64) == 20 * 8 + 1000
        assert iteration_cap(1.0 / 8) == 20 * 3 + 1000

    def test_inner_solver_description(self, cube1):
        rep = solve_unconstrained(cube1)
        assert "M+rho*K" in rep.inner_solver_description and "K0" in rep.inner_solver_description

    def test_pcg_beats_cg(self, make_problem):
        prob = make_problem("square", 4, HARM2D)
        pcg_it = solve_unconstrained(prob, "schur_pcg").outer_stats.iterations
        cg_it = solve_unconstrained(prob, "schur_cg").outer_stats.iterations
        assert pcg_it < cg_it


class TestSpectralProbe:
    def test_exact_preconditioner_gives_one(self, square1):
        M, K = _dense(square1)
        S = dense_schur(M, K, square1.rho, square1.n_interior)
        sys = SaddleSystem(square1)
        lo, hi = extreme_rayleigh(sys.schur_operator(), sp.csr_matrix(S), n_iters=50)
        assert lo == pytest.approx(1.0, abs=1e-6) and hi == pytest.approx(1.0, abs=1e-6)

    def test_matches_dense_eigenvalues(self, square2):
        M, K = _dense(square2)
        N = square2.n_interior
        S = dense_schur(M, K, square2.rho, N)
        K0 = K[:N, :N]
        D0 = square2.lumped_interior_mass.diagonal()
        C = K0 @ np.diag(1.0 / D0) @ K0
        ev = np.sort(np.linalg.eigvals(np.linalg.solve(C, S)).real)
        lo, hi = spectral_probe(square2)
        assert lo == pytest.approx(ev[0], rel=1e-6) and hi == pytest.approx(ev[-1], rel=1e-6)

    def test_cube_variants_positive(self, cube1):
        for variant in ("lumped_sandwich", "scaled_square"):
            lo, hi = spectral_probe(cube1, variant, n_iters=30)
            assert 0.0 < lo <= hi
