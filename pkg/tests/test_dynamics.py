"""Driven-dynamics tests: integrator certificates, metrics, decay fits."""

import math

import numpy as np
import pytest

from dipolarray import dynamics
from dipolarray.greens import PhysicalParams
from dipolarray.lattice import FiniteLattice, build_hexagon_bearded
from dipolarray.utils import FitError, IntegrationError

P0 = PhysicalParams(spacing=0.05, mu_b=0.0)
P12 = PhysicalParams(spacing=0.05, mu_b=12.0)

SIGMA_PLUS = np.array([-1.0, -1j]) / math.sqrt(2.0)


def single_atom():
    return FiniteLattice(positions=np.zeros((1, 2)),
                         sublattice=np.array([1]),
                         boundary_type="single", spacing=0.05)


def atom_pair(d):
    return FiniteLattice(positions=np.array([[0.0, 0.0], [d, 0.0]]),
                         sublattice=np.array([1, 2]),
                         boundary_type="pair", spacing=d)


def small_cluster():
    pos = np.array([[0.0, 0.0], [0.05, 0.0], [0.025, 0.043]])
    return FiniteLattice(positions=pos, sublattice=np.array([1, 2, 1]),
                         boundary_type="cluster", spacing=0.05)


class TestAssembly:
    def test_single_atom_eigenvalues(self):
        ham = dynamics.assemble_finite_hamiltonian(
            single_atom(), PhysicalParams(spacing=0.05, mu_b=3.0),
            detuning=2.0)
        w = np.sort(np.linalg.eigvals(ham.matrix).real)
        assert np.allclose(w, [-5.0, 1.0], atol=1e-12)
        assert np.allclose(np.linalg.eigvals(ham.matrix).imag, -0.5,
                           atol=1e-12)

    def test_pair_super_and_subradiance(self):
        ham = dynamics.assemble_finite_hamiltonian(atom_pair(0.01), P0)
        rates = np.sort(-np.linalg.eigvals(ham.matrix).imag)
        assert rates[-1] == pytest.approx(1.0, abs=0.05)
        assert rates[0] == pytest.approx(0.0, abs=0.05)

    def test_anti_hermitian_part_negative_semidefinite(self):
        lat = build_hexagon_bearded(5)
        ham = dynamics.assemble_finite_hamiltonian(lat, P12)
        anti = (ham.matrix - ham.matrix.conj().T) / 2j
        assert np.linalg.eigvalsh(anti).max() < 1e-8

    def test_coincident_atoms_rejected(self):
        lat = FiniteLattice(positions=np.zeros((2, 2)),
                            sublattice=np.array([1, 2]),
                            boundary_type="bad", spacing=0.05)
        with pytest.raises(ValueError, match="coincident"):
            dynamics.assemble_finite_hamiltonian(lat, P0)


class TestEnvelope:
    def test_gaussian_peak_and_plateau(self):
        proto = dynamics.DriveProtocol(target=0, omega=0.2, detuning=15.0,
                                       envelope="gaussian", t0=1.5,
                                       tau=math.sqrt(0.15))
        assert dynamics.drive_envelope(proto, 1.5) == 0.2
        assert dynamics.drive_envelope(proto, 5.0) == 0.2
        assert dynamics.drive_envelope(proto, 0.0) == \
            pytest.approx(0.2 * math.exp(-15.0), rel=1e-12)

    def test_sigmoid_midpoint(self):
        proto = dynamics.DriveProtocol(target=0, omega=1.0, detuning=10.0,
                                       envelope="sigmoid", t0=3.0, tau=0.3)
        assert dynamics.drive_envelope(proto, 3.0) == pytest.approx(0.5)

    def test_switch_off(self):
        proto = dynamics.DriveProtocol(target=0, omega=1.0, detuning=0.0,
                                       envelope="constant", t_off=2.0)
        assert dynamics.drive_envelope(proto, 1.99) == 1.0
        assert dynamics.drive_envelope(proto, 2.0) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError, match="normalized"):
            dynamics.DriveProtocol(target=0, omega=1.0, detuning=0.0,
                                   polarization=(1.0, 1.0))
        with pytest.raises(ValueError, match="envelope"):
            dynamics.DriveProtocol(target=0, omega=1.0, detuning=0.0,
                                   envelope="triangle")


class TestEvolve:
    def test_single_atom_closed_form(self):
        ham = dynamics.assemble_finite_hamiltonian(single_atom(), P0)
        traj = dynamics.evolve(ham, None, t_end=5.0, dt=5e-3, c0=SIGMA_PLUS)
        expected = np.exp(-traj.times)
        assert np.max(np.abs(traj.total_population() - expected)) < 1e-6

    def test_fourth_order_convergence(self):
        ham = dynamics.assemble_finite_hamiltonian(small_cluster(), P12,
                                                   detuning=5.0)
        proto = dynamics.DriveProtocol(target=0, omega=0.5, detuning=5.0,
                                       envelope="sigmoid", t0=1.0, tau=0.4)
        finals = []
        for dt in (8e-3, 4e-3, 2e-3):
            traj = dynamics.evolve(ham, proto, t_end=2.0, dt=dt,
                                   snapshot_stride=10 ** 9)
            finals.append(traj.states[-1])
        e1 = np.linalg.norm(finals[0] - finals[1])
        e2 = np.linalg.norm(finals[1] - finals[2])
        assert e1 / e2 == pytest.approx(16.0, rel=0.4)

    def test_norm_never_grows_without_drive(self):
        ham = dynamics.assemble_finite_hamiltonian(build_hexagon_bearded(3),
                                                   P12)
        rng = np.random.default_rng(0)
        c0 = rng.standard_normal(2 * ham.n_atoms) + \
            1j * rng.standard_normal(2 * ham.n_atoms)
        traj = dynamics.evolve(ham, None, t_end=3.0, dt=5e-3, c0=c0)
        assert np.all(np.diff(traj.step_norms) <= traj.step_norms[:-1] * 1e-10)
        assert np.all(traj.drive_off)

    def test_instability_detected(self):
        lat = single_atom()
        ham = dynamics.assemble_finite_hamiltonian(lat, P0)
        # flip the sign of the decay to force growth
        bad = dynamics.FiniteHamiltonian(matrix=ham.matrix.conj(), lat=lat,
                                         detuning=0.0)
        with pytest.raises(IntegrationError, match="norm grew"):
            dynamics.evolve(bad, None, t_end=1.0, dt=5e-3, c0=SIGMA_PLUS)

    def test_linearity_in_drive(self):
        ham = dynamics.assemble_finite_hamiltonian(small_cluster(), P12,
                                                   detuning=5.0)
        protos = [dynamics.DriveProtocol(target=0, omega=om, detuning=5.0,
                                         envelope="constant")
                  for om in (0.1, 0.2)]
        t1, t2 = dynamics.evolve_multi(ham, protos, t_end=1.0, dt=5e-3)
        assert np.allclose(2.0 * t1.states[-1], t2.states[-1], atol=1e-12)

    def test_multi_matches_single(self):
        ham = dynamics.assemble_finite_hamiltonian(small_cluster(), P12,
                                                   detuning=5.0)
        proto = dynamics.DriveProtocol(target=1, omega=0.3, detuning=5.0,
                                       envelope="constant")
        solo = dynamics.evolve(ham, proto, t_end=1.0, dt=5e-3)
        multi = dynamics.evolve_multi(ham, [proto], t_end=1.0, dt=5e-3)[0]
        assert np.allclose(solo.states[-1], multi.states[-1], atol=1e-13)

    def test_superposition_helper(self):
        ham = dynamics.assemble_finite_hamiltonian(small_cluster(), P12,
                                                   detuning=5.0)
        protos = [dynamics.DriveProtocol(target=0, omega=0.4, detuning=5.0,
                                         polarization=pol,
                                         envelope="constant")
                  for pol in ((1.0, 0.0), (0.0, 1.0))]
        trajs = dynamics.evolve_multi(ham, protos, t_end=1.0, dt=5e-3)
        s2 = 1.0 / math.sqrt(2.0)
        eq_direct = dynamics.evolve(
            ham, dynamics.DriveProtocol(target=0, omega=0.4, detuning=5.0,
                                        polarization=(s2, s2),
                                        envelope="constant"),
            t_end=1.0, dt=5e-3)
        eq_combined = dynamics.combine_trajectories(trajs, [s2, s2])
        assert np.allclose(eq_combined.states[-1], eq_direct.states[-1],
                           atol=1e-13)


@pytest.fixture(scope="module")
def hexagon():
    return build_hexagon_bearded(4)


class TestMetrics:
    def fake_traj(self, lat, pops):
        states = np.zeros((1, 2 * lat.n_atoms), dtype=complex)
        states[0, 0::2] = np.sqrt(pops)
        return dynamics.Trajectory(times=np.array([0.0]), states=states,
                                   step_times=np.array([0.0]),
                                   step_norms=np.array([1.0]),
                                   drive_off=np.zeros(0, dtype=bool), dt=1.0)

    def test_mirror_symmetric_state_is_half(self, hexagon):
        b_idx, theta = dynamics.boundary_order(hexagon)
        src = int(b_idx[np.argmin(np.abs(theta))])
        pops = np.zeros(hexagon.n_atoms)
        pops[b_idx] = 1.0
        pops[src] = 0.0
        # mirror symmetry about the source direction: y -> -y leaves this
        # uniform boundary distribution invariant
        traj = self.fake_traj(hexagon, pops)
        ff = dynamics.forward_fraction(traj, hexagon, src, 0.0, +1)
        assert ff == pytest.approx(0.5, abs=0.02)

    def test_all_on_source_is_error(self, hexagon):
        b_idx, theta = dynamics.boundary_order(hexagon)
        src = int(b_idx[0])
        pops = np.zeros(hexagon.n_atoms)
        pops[src] = 1.0
        with pytest.raises(ValueError, match="denominator"):
            dynamics.forward_fraction(self.fake_traj(hexagon, pops), hexagon,
                                      src, 0.0, +1)

    def test_source_off_boundary_rejected(self, hexagon):
        centroid = hexagon.positions.mean(axis=0)
        inner = int(np.argmin(np.linalg.norm(hexagon.positions - centroid,
                                             axis=1)))
        pops = np.ones(hexagon.n_atoms)
        with pytest.raises(ValueError, match="boundary"):
            dynamics.forward_fraction(self.fake_traj(hexagon, pops), hexagon,
                                      inner, 0.0, +1)

    def test_chirality_argument(self, hexagon):
        pops = np.ones(hexagon.n_atoms)
        b_idx, _ = dynamics.boundary_order(hexagon)
        with pytest.raises(ValueError):
            dynamics.forward_fraction(self.fake_traj(hexagon, pops), hexagon,
                                      int(b_idx[0]), 0.0, 0)


class TestLifetimeScaling:
    def test_in_gap_states_live_on_the_perimeter(self):
        # energy-window selection and spatial edge support agree: every
        # in-gap eigenstate of the smallest hexagon is edge confined
        from dipolarray import bloch
        from dipolarray.greens import RegularizationParams
        lat = build_hexagon_bearded(4)
        window = bloch.band_gap(P12, RegularizationParams.for_spacing(0.05),
                                24).window
        ham = dynamics.assemble_finite_hamiltonian(lat, P12)
        w, v = np.linalg.eig(ham.matrix)
        ingap = (w.real > window[0]) & (w.real < window[1])
        assert ingap.sum() > 0
        layers = np.repeat(dynamics.edge_layers(lat, depth=4), 2)
        for col in np.flatnonzero(ingap):
            weight = np.abs(v[:, col]) ** 2
            assert weight[layers].sum() / weight.sum() > 0.5


class TestWindows:
    def synthetic(self, hexagon, weights):
        n = hexagon.n_atoms
        states = np.zeros((len(weights), 2 * n), dtype=complex)
        for i, w in enumerate(weights):
            states[i, 0::2] = np.sqrt(w)
        times = np.arange(len(weights), dtype=float)
        return dynamics.Trajectory(times=times, states=states,
                                   step_times=times,
                                   step_norms=np.ones(len(weights)),
                                   drive_off=np.zeros(0, dtype=bool), dt=1.0)

    def test_window_population_selects_nearest_atoms(self, hexagon):
        b_idx, theta = dynamics.boundary_order(hexagon)
        pops = np.zeros(hexagon.n_atoms)
        pops[b_idx[np.abs(theta) < 0.3]] = 1.0
        traj = self.synthetic(hexagon, [pops])
        _, p_at = dynamics.window_population(traj, hexagon, 0.0, 6)
        _, p_away = dynamics.window_population(traj, hexagon, math.pi, 6)
        assert p_at[0] == pytest.approx(6.0)
        assert p_away[0] == 0.0

    def test_transmission_modes(self, hexagon):
        b_idx, theta = dynamics.boundary_order(hexagon)
        near = np.zeros(hexagon.n_atoms)
        near[b_idx[np.abs(theta) < 0.3]] = 1.0
        far = np.zeros(hexagon.n_atoms)
        far[b_idx[np.abs(np.abs(theta) - math.pi) < 0.3]] = 0.5
        # a unit pulse at angle zero followed by a half-size pulse opposite,
        # both at interior time samples
        zero = 0.0 * near
        traj = self.synthetic(hexagon, [zero, near, zero, far, zero])
        peak = dynamics.transmission(traj, hexagon, 0.0, math.pi, 6,
                                     mode="peak")
        integ = dynamics.transmission(traj, hexagon, 0.0, math.pi, 6)
        assert peak == pytest.approx(0.5)
        assert integ == pytest.approx(0.5)
        with pytest.raises(ValueError):
            dynamics.transmission(traj, hexagon, 0.0, math.pi, 6,
                                  mode="median")


class TestDecayFit:
    def test_single_atom_rate(self):
        ham = dynamics.assemble_finite_hamiltonian(single_atom(), P0)
        traj = dynamics.evolve(ham, None, t_end=6.0, dt=5e-3, c0=SIGMA_PLUS)
        assert dynamics.fit_decay_rate(traj, 0.0) == pytest.approx(0.5,
                                                                   abs=1e-6)

    def test_short_trajectory_rejected(self):
        ham = dynamics.assemble_finite_hamiltonian(single_atom(), P0)
        traj = dynamics.evolve(ham, None, t_end=2.0, dt=5e-3, c0=SIGMA_PLUS)
        with pytest.raises(FitError):
            dynamics.fit_decay_rate(traj, 0.0)

    def test_non_monotone_rejected(self):
        times = np.linspace(0.0, 8.0, 200)
        pops = np.exp(-times) * (1.0 + 0.3 * np.sin(4.0 * times))
        states = np.zeros((times.size, 2), dtype=complex)
        states[:, 0] = np.sqrt(pops)
        traj = dynamics.Trajectory(times=times, states=states,
                                   step_times=times, step_norms=np.sqrt(pops),
                                   drive_off=np.ones(times.size - 1,
                                                     dtype=bool), dt=1.0)
        with pytest.raises(FitError, match="monotone"):
            dynamics.fit_decay_rate(traj, 0.0)
