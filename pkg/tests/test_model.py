"""Tests for system builders, modal analysis and the damping metric."""

import numpy as np
import pytest

from oracles import generalized_modes, sdof_model

from perdyn.model import (SystemModel, beam_matrices, benchmark_beam,
                          benchmark_chain, build_beam, build_chain,
                          constant_step_force, damping_level,
                          gaussian_multiharmonic_force, modal_analysis,
                          step_function)


class TestBuildChain:
    def test_sdof_frequency(self):
        model = build_chain(1, 1.0, 100.0)
        modal = modal_analysis(model)
        assert modal.frequencies[0] == pytest.approx(10.0, abs=1e-12)

    def test_two_dof_closed_form(self):
        # fixed-free 2-dof chain: omega^2 = (K/M) * (3 -+ sqrt(5))/2
        model = build_chain(2, 1.0, 100.0)
        modal = modal_analysis(model)
        base = np.sqrt(100.0)
        expected = base * np.sqrt([(3.0 - np.sqrt(5.0)) / 2.0,
                                   (3.0 + np.sqrt(5.0)) / 2.0])
        np.testing.assert_allclose(modal.frequencies, expected, rtol=1e-12)

    def test_zero_dampers_gives_zero_damping_matrix(self):
        model = build_chain(5, 2.0, 50.0, [(0, None, 0.0), (1, 2, 0.0)])
        assert np.all(model.damping == 0.0)

    def test_damper_assembly(self):
        model = build_chain(3, 1.0, 10.0, [(0, None, 2.0), (1, 2, 3.0)])
        expected = np.array([[2.0, 0.0, 0.0],
                             [0.0, 3.0, -3.0],
                             [0.0, -3.0, 3.0]])
        np.testing.assert_allclose(model.damping, expected)

    def test_out_of_range_damper_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            build_chain(3, 1.0, 10.0, [(5, None, 1.0)])

    def test_negative_coefficient_rejected(self):
        with pytest.raises(ValueError, match=">= 0"):
            build_chain(3, 1.0, 10.0, [(0, None, -1.0)])

    def test_builder_symmetry(self):
        model = benchmark_chain(0.3, n_dof=9)
        for mat in (model.mass, model.damping, model.stiffness):
            dev = np.abs(mat - mat.T).max()
            assert dev <= 1e-12 * max(np.abs(mat).max(), 1.0)


class TestBuildBeam:
    def test_dof_count(self):
        model = build_beam(3.0, 437.5e3, 235.5, 24)
        assert model.n_dof == 48

    def test_static_tip_deflection_single_element(self):
        # cantilever tip deflection under constant end force: f l^3 / (3 EI)
        length, ei, f0 = 2.0, 1.0e4, 50.0
        model = build_beam(length, ei, 10.0, 1,
                           point_loads=[(1, 1.0, lambda t: f0)])
        u_static = np.linalg.solve(model.stiffness, model.force_at(1.0))
        assert u_static[0] == pytest.approx(f0 * length**3 / (3.0 * ei), rel=1e-12)

    def test_static_tip_deflection_by_long_integration(self):
        from perdyn.baselines import newmark
        length, ei, f0 = 2.0, 1.0e4, 50.0
        model = build_beam(length, ei, 10.0, 1,
                           supports=[(1, 0.0, 200.0)],
                           point_loads=[(1, 1.0, lambda t: f0)])
        t_settle = 40.0
        traj = newmark(model, 0.005, t_settle)
        assert traj.displacements[-1, 0] == pytest.approx(
            f0 * length**3 / (3.0 * ei), rel=1e-4)

    def test_no_supports_no_damping(self):
        model = build_beam(3.0, 437.5e3, 235.5, 6)
        assert np.all(model.damping == 0.0)

    def test_support_node_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            build_beam(3.0, 437.5e3, 235.5, 4, supports=[(9, 1.0, 0.0)])

    def test_rigid_body_translation_free_free(self):
        mass, stiff = beam_matrices(3.0, 437.5e3, 235.5, 8)
        rigid = np.zeros(stiff.shape[0])
        rigid[0::2] = 1.0  # unit deflection, zero rotation everywhere
        residual = np.abs(stiff @ rigid).max()
        assert residual <= 1e-9 * np.abs(stiff).max()

    def test_rigid_body_rotation_free_free(self):
        length, n_el = 3.0, 8
        mass, stiff = beam_matrices(length, 437.5e3, 235.5, n_el)
        x = np.linspace(0.0, length, n_el + 1)
        rigid = np.zeros(stiff.shape[0])
        rigid[0::2] = x    # w = x
        rigid[1::2] = 1.0  # theta = 1
        assert np.abs(stiff @ rigid).max() <= 1e-9 * np.abs(stiff).max()

    def test_total_mass(self):
        total = 235.5
        mass, _ = beam_matrices(3.0, 437.5e3, total, 12)
        ones_w = np.zeros(mass.shape[0])
        ones_w[0::2] = 1.0
        assert ones_w @ mass @ ones_w == pytest.approx(total, rel=1e-9)

    def test_benchmark_beam_configuration(self):
        model = benchmark_beam()
        assert model.n_dof == 48
        # two damped supports on deflection dofs only
        diag = np.diag(model.damping)
        assert np.count_nonzero(diag) == 2
        assert np.count_nonzero(model.damping) == 2
        # step load appears after t_c at the tip deflection dof
        assert np.all(model.force_at(0.0) == 0.0)
        f = model.force_at(0.02)
        assert f[2 * 24 - 2] == pytest.approx(-1.0e3)

    def test_builder_symmetry(self):
        model = benchmark_beam(n_elements=6)
        for mat in (model.mass, model.damping, model.stiffness):
            dev = np.abs(mat - mat.T).max()
            assert dev <= 1e-12 * max(np.abs(mat).max(), 1.0)


class TestModalAnalysis:
    def test_sdof(self):
        modal = modal_analysis(build_chain(1, 1.0, 100.0))
        assert modal.frequencies[0] == pytest.approx(10.0)
        assert abs(modal.mode_shapes[0, 0]) == pytest.approx(1.0)

    def test_mass_normalization(self, chain12):
        modal = modal_analysis(chain12)
        gram = modal.mode_shapes.T @ chain12.mass @ modal.mode_shapes
        np.testing.assert_allclose(gram, np.eye(12), atol=1e-9)

    def test_frequencies_match_brute_force(self, chain12):
        modal = modal_analysis(chain12)
        ref_freqs, _ = generalized_modes(chain12.stiffness, chain12.mass)
        np.testing.assert_allclose(modal.frequencies, ref_freqs, rtol=1e-8)

    def test_modal_residual(self, chain12):
        modal = modal_analysis(chain12)
        res = (chain12.stiffness @ modal.mode_shapes
               - chain12.mass @ modal.mode_shapes @ np.diag(modal.frequencies**2))
        assert np.abs(res).max() <= 1e-8 * np.abs(chain12.stiffness).max()

    def test_frequencies_sorted(self, chain12):
        freqs = modal_analysis(chain12).frequencies
        assert np.all(np.diff(freqs) >= 0.0)
        assert np.all(freqs >= 0.0)

    def test_min_period(self):
        modal = modal_analysis(build_chain(1, 1.0, 100.0))
        assert modal.min_period == pytest.approx(2.0 * np.pi / 10.0)


class TestDampingLevel:
    def test_undamped_is_zero(self):
        assert damping_level(build_chain(3, 1.0, 10.0)) == 0.0

    def test_sdof_is_twice_zeta(self):
        model = sdof_model(omega=3.0, zeta=0.2)
        assert damping_level(model) == pytest.approx(0.4, rel=1e-12)

    def test_linear_in_zeta(self):
        lvl1 = damping_level(benchmark_chain(0.05))
        lvl2 = damping_level(benchmark_chain(0.35))
        assert lvl2 / lvl1 == pytest.approx(7.0, abs=1e-10)

    def test_zero_stiffness_rejected(self):
        model = SystemModel(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)))
        with pytest.raises(ValueError, match="stiffness"):
            damping_level(model)


class TestSystemModelValidation:
    def test_asymmetric_mass_rejected(self):
        mass = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(ValueError, match="symmetric"):
            SystemModel(mass, np.zeros((2, 2)), np.eye(2))

    def test_indefinite_mass_rejected(self):
        mass = np.diag([1.0, -1.0])
        with pytest.raises(ValueError, match="positive definite"):
            SystemModel(mass, np.zeros((2, 2)), np.eye(2))

    def test_indefinite_stiffness_rejected(self):
        with pytest.raises(ValueError, match="semidefinite"):
            SystemModel(np.eye(2), np.zeros((2, 2)), np.diag([1.0, -1.0]))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="disagree"):
            SystemModel(np.eye(2), np.zeros((3, 3)), np.eye(2))

    def test_arrays_read_only(self):
        model = build_chain(2, 1.0, 1.0)
        with pytest.raises(ValueError):
            model.mass[0, 0] = 5.0


class TestForceBuilders:
    def test_step(self):
        step = step_function(0.5, 3.0)
        assert step(0.49) == 0.0
        assert step(0.5) == 3.0

    def test_constant_step_force(self):
        force = constant_step_force(4, 2, 0.1, 7.0)
        np.testing.assert_array_equal(force(0.0), np.zeros(4))
        out = force(0.2)
        assert out[2] == 7.0 and np.count_nonzero(out) == 1

    def test_gaussian_multiharmonic(self):
        force = gaussian_multiharmonic_force(3, 1, t0=2.0, s=0.5,
                                             components=[(1.0, 3.0), (0.5, 7.0)])
        t = 1.7
        expected = np.exp(-(t - 2.0)**2 / 0.5) * (np.sin(3 * t) + 0.5 * np.sin(7 * t))
        assert force(t)[1] == pytest.approx(expected, rel=1e-12)
        assert force(t)[0] == 0.0

    def test_bad_dof_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            constant_step_force(3, 3, 0.0, 1.0)
