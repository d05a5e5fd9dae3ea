"""Split-operator propagation: packet preparation, exact sub-steps, stability.

The potential half of the step has an exact closed form for a traceless
Hermitian two-channel matrix, so it is checked against both the SU(2)
axis-angle identity and an independent scaled Taylor-series exponential.
The kinetic half is exact free flight in the spectral basis, so it is
checked against lattice plane waves and the analytic Gaussian spreading
law.  The composed step must conserve norm to roundoff, converge at
second order under step halving, and move a free packet at group speed.
"""

import numpy as np
import pytest

from ciscat import (
    AbsorberSpec,
    ConfigError,
    Grid2D,
    NumericalInstabilityError,
    PacketSpec,
    PropagationConfig,
    SpinorField,
    SplitOperatorPropagator,
    TwoStatePotential,
    absorber_mask,
    adiabatic_populations,
    auto_dtau,
    backscatter_fraction,
    capped_jt,
    energy_expectation,
    kinetic_half_step,
    linear_jt,
    mean_wavenumber_xi,
    norm,
    populations_in_basis,
    potential_step,
    prepare_packet,
    run,
    step,
    to_adiabatic,
)
from ciscat.models import BarrierSpec

BETA_ORDER = ["row1", "row2", "row3"]


def identity_frame(x, y):
    shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
    u = np.zeros((2, 2) + shape, dtype=np.complex128)
    u[0, 0] = 1.0
    u[1, 1] = 1.0
    return u


def constant_model(hval: float, cval: complex, barrier=None) -> TwoStatePotential:
    """Spatially uniform two-channel matrix with a trivial eigenframe."""

    def h(x, y):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape,
                       float(hval))

    def c(x, y):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape,
                       complex(cval))

    return TwoStatePotential(label="constant", h=h, c=c,
                             unitary=identity_frame, barrier=barrier,
                             coupling_is_real=bool(np.isreal(cval)))


def free_model() -> TwoStatePotential:
    return constant_model(0.0, 0.0)


def expm_taylor(m: np.ndarray, terms: int = 30) -> np.ndarray:
    """Scaling-and-squaring Taylor exponential, independent of any closed form."""
    scale = max(0, int(np.ceil(np.log2(max(np.linalg.norm(m, 2), 1e-30)))) + 1)
    a = m / (2.0 ** scale)
    out = np.eye(2, dtype=np.complex128)
    term = np.eye(2, dtype=np.complex128)
    for n in range(1, terms):
        term = term @ a / n
        out = out + term
    for _ in range(scale):
        out = out @ out
    return out


def entries_of_potential_step(model, grid, dtau):
    """Extract the per-node 2x2 update by propagating the two basis spinors."""
    ones = np.ones((grid.n_xi, grid.n_eta), dtype=np.complex128)
    zeros = np.zeros_like(ones)
    col1 = potential_step(SpinorField(grid, ones, zeros), model, dtau)
    col2 = potential_step(SpinorField(grid, zeros, ones), model, dtau)
    return col1.g1, col2.g1, col1.g2, col2.g2  # u11, u12, u21, u22


def gaussian_blob(grid, center, sigma, carrier_k=0.0):
    xx, yy = grid.meshgrid()
    env = np.exp(-((xx - center[0]) ** 2 + (yy - center[1]) ** 2)
                 / (4.0 * sigma ** 2))
    return env * np.exp(1j * carrier_k * xx)


def density_moments_xi(field):
    """Centroid and standard deviation of the total density along xi."""
    dens = (np.abs(field.g1) ** 2 + np.abs(field.g2) ** 2).sum(axis=1)
    xi = field.grid.xi
    total = dens.sum()
    mean = float((dens * xi).sum() / total)
    var = float((dens * (xi - mean) ** 2).sum() / total)
    return mean, np.sqrt(var)


def l2_distance(a: SpinorField, b: SpinorField) -> float:
    d1 = a.g1 - b.g1
    d2 = a.g2 - b.g2
    return float(np.sqrt((np.abs(d1) ** 2 + np.abs(d2) ** 2).sum()
                         * a.grid.cell_area))


class TestSpecValidation:
    def test_packet_direction_must_be_unit_sign(self):
        with pytest.raises(ConfigError, match="direction"):
            PacketSpec(direction=0)

    def test_packet_sigma_must_be_positive(self):
        with pytest.raises(ConfigError, match="sigma_long"):
            PacketSpec(sigma_long=-1.0)

    def test_packet_rolloff_bounds(self):
        with pytest.raises(ConfigError, match="rolloff"):
            PacketSpec(slab_halfwidth=3.0, slab_rolloff=5.0)
        with pytest.raises(ConfigError, match="rolloff"):
            PacketSpec(slab_rolloff=0.0)

    def test_absorber_kind_and_margin(self):
        with pytest.raises(ConfigError, match="kind"):
            AbsorberSpec(kind="soft")
        with pytest.raises(ConfigError, match="margin"):
            AbsorberSpec(margin_frac=0.6)
        with pytest.raises(ConfigError, match="power"):
            AbsorberSpec(power=0)

    def test_config_scalar_bounds(self):
        grid = Grid2D(64, 64, (-12.0, 12.0), (-12.0, 12.0))
        model = linear_jt()
        packet = PacketSpec(center=(-8.0, 0.0), slab_halfwidth=3.0,
                            slab_rolloff=1.0)
        good = dict(grid=grid, model=model, packet=packet)
        with pytest.raises(ConfigError, match="beta"):
            PropagationConfig(beta=0.0, **good)
        with pytest.raises(ConfigError, match="dtau"):
            PropagationConfig(dtau=-0.1, **good)
        with pytest.raises(ConfigError, match="n_steps"):
            PropagationConfig(n_steps=0, **good)
        with pytest.raises(ConfigError, match="marker_frac"):
            PropagationConfig(marker_frac=1.0, **good)
        with pytest.raises(ConfigError, match="threads"):
            PropagationConfig(threads=0, **good)
        with pytest.raises(ConfigError, match="snapshot_every"):
            PropagationConfig(snapshot_every=-1, **good)

    def test_carrier_beyond_half_nyquist_rejected(self):
        # h = 0.75 puts half-Nyquist at ~2.09; delta=16, beta=1 gives k = 4.
        grid = Grid2D(64, 64, (-24.0, 24.0), (-24.0, 24.0))
        with pytest.raises(ConfigError, match="Nyquist"):
            PropagationConfig(grid=grid, model=capped_jt(delta=16.0, rho0=1.0),
                              beta=1.0)

    def test_carrier_k_from_beta_and_splitting(self):
        grid = Grid2D(256, 256, (-24.0, 24.0), (-24.0, 24.0))
        cfg = PropagationConfig(grid=grid, model=capped_jt(delta=16.0, rho0=1.0),
                                beta=0.25, packet=PacketSpec(center=(-14.0, 0.0),
                                                             slab_halfwidth=6.0,
                                                             slab_rolloff=3.0))
        assert cfg.carrier_k() == pytest.approx(2.0, rel=1e-15)


class TestStepSizing:
    def test_auto_dtau_keeps_kinetic_phase_under_budget(self):
        grid = Grid2D(256, 256, (-24.0, 24.0), (-24.0, 24.0))
        dtau = auto_dtau(grid)
        assert dtau == pytest.approx(0.001397423919276593, rel=1e-12)
        assert dtau * grid.k_squared().max() < np.pi / 4.0

    def test_auto_dtau_scales_with_cell_size_squared(self):
        coarse = auto_dtau(Grid2D(256, 256, (-24.0, 24.0), (-24.0, 24.0)))
        fine = auto_dtau(Grid2D(256, 256, (-12.0, 12.0), (-12.0, 12.0)))
        assert fine == pytest.approx(coarse / 4.0, rel=1e-12)

    def test_marker_follows_travel_direction(self):
        grid = Grid2D(64, 64, (-24.0, 24.0), (-24.0, 24.0))
        model = linear_jt()
        fwd = PropagationConfig(grid=grid, model=model,
                                packet=PacketSpec(center=(-14.0, 0.0)))
        rev = PropagationConfig(grid=grid, model=model,
                                packet=PacketSpec(center=(14.0, 0.0),
                                                  direction=-1))
        assert fwd.marker_xi() == pytest.approx(18.0)
        assert rev.marker_xi() == pytest.approx(-18.0)

    def test_resolved_n_steps_is_travel_time_over_dtau(self):
        # travel 32 at group speed 2k = 4 is tau = 8; dtau 0.01 gives 800.
        grid = Grid2D(256, 256, (-24.0, 24.0), (-24.0, 24.0))
        cfg = PropagationConfig(grid=grid, model=capped_jt(delta=4.0, rho0=1.0),
                                beta=1.0, dtau=0.01,
                                packet=PacketSpec(center=(-14.0, 0.0),
                                                  slab_halfwidth=6.0,
                                                  slab_rolloff=3.0))
        assert cfg.resolved_n_steps() == 800

    def test_explicit_n_steps_wins(self):
        grid = Grid2D(64, 64, (-12.0, 12.0), (-12.0, 12.0))
        cfg = PropagationConfig(grid=grid, model=linear_jt(), n_steps=7,
                                packet=PacketSpec(center=(-8.0, 0.0),
                                                  slab_halfwidth=3.0,
                                                  slab_rolloff=1.0))
        assert cfg.resolved_n_steps() == 7


class TestPreparePacket:
    def make_config(self, **overrides):
        grid = Grid2D(256, 256, (-24.0, 24.0), (-24.0, 24.0))
        packet = overrides.pop("packet", PacketSpec(center=(-17.5, 0.0),
                                                    sigma_long=2.0,
                                                    slab_halfwidth=6.0,
                                                    slab_rolloff=3.0))
        return PropagationConfig(grid=grid, model=capped_jt(), beta=1.0,
                                 packet=packet, **overrides)

    def test_unit_norm(self):
        packet = prepare_packet(self.make_config())
        assert norm(packet) == pytest.approx(1.0, abs=1e-12)

    def test_starts_purely_on_ground_branch(self):
        cfg = self.make_config()
        packet = prepare_packet(cfg)
        pops = adiabatic_populations(packet, cfg.model)
        assert pops.ground == pytest.approx(1.0, abs=1e-12)
        assert pops.excited <= 1e-12

    def test_mean_wavenumber_matches_carrier(self):
        cfg = self.make_config()
        packet = prepare_packet(cfg)
        assert mean_wavenumber_xi(packet) == pytest.approx(cfg.carrier_k(),
                                                           rel=0.01)

    def test_reversed_launch_carries_negative_wavenumber(self):
        cfg = self.make_config(packet=PacketSpec(center=(17.5, 0.0),
                                                 direction=-1, sigma_long=2.0,
                                                 slab_halfwidth=6.0,
                                                 slab_rolloff=3.0))
        packet = prepare_packet(cfg)
        assert mean_wavenumber_xi(packet) == pytest.approx(-cfg.carrier_k(),
                                                           rel=0.01)

    def test_slab_is_flat_inside_and_zero_outside(self):
        cfg = self.make_config()
        packet = prepare_packet(cfg)
        dens = np.abs(packet.g1) ** 2 + np.abs(packet.g2) ** 2
        grid = cfg.grid
        i0 = int(np.argmin(np.abs(grid.xi + 17.5)))
        flat = dens[i0, np.abs(grid.eta) <= 2.5]
        outside = dens[i0, np.abs(grid.eta) >= 6.5]
        assert flat.max() == pytest.approx(flat.min(), rel=1e-12)
        assert outside.max() <= 1e-30

    def test_launch_overlapping_cone_region_rejected(self):
        cfg_kwargs = dict(packet=PacketSpec(center=(-6.0, 0.0), sigma_long=2.0,
                                            slab_halfwidth=6.0,
                                            slab_rolloff=3.0))
        with pytest.raises(ConfigError, match="tail mass"):
            prepare_packet(self.make_config(**cfg_kwargs))


class TestPotentialStep:
    def test_zero_dtau_is_identity(self):
        grid = Grid2D(8, 8, (-1.0, 1.0), (-1.0, 1.0))
        rng = np.random.default_rng(11)
        g1 = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        g2 = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        field = SpinorField(grid, g1, g2)
        out = potential_step(field, capped_jt(), 0.0)
        assert np.array_equal(out.g1, field.g1)
        assert np.array_equal(out.g2, field.g2)

    def test_matches_su2_axis_angle_closed_form(self):
        # For h = E cos(phi), c = E sin(phi) the update is
        # cos(E t) I - i sin(E t) (cos(phi) sz + sin(phi) sx).
        grid = Grid2D(8, 8, (-1.0, 1.0), (-1.0, 1.0))
        rng = np.random.default_rng(23)
        for _ in range(100):
            phi = rng.uniform(-np.pi, np.pi)
            gap = rng.uniform(0.1, 3.0)
            dtau = rng.uniform(0.01, 0.8)
            model = constant_model(gap * np.cos(phi), gap * np.sin(phi))
            u11, u12, u21, u22 = entries_of_potential_step(model, grid, dtau)
            c, s = np.cos(gap * dtau), np.sin(gap * dtau)
            assert abs(u11[0, 0] - (c - 1j * s * np.cos(phi))) < 1e-14
            assert abs(u22[0, 0] - (c + 1j * s * np.cos(phi))) < 1e-14
            assert abs(u12[0, 0] - (-1j * s * np.sin(phi))) < 1e-14
            assert abs(u21[0, 0] - (-1j * s * np.sin(phi))) < 1e-14

    def test_matches_series_exponential_for_complex_coupling(self):
        grid = Grid2D(8, 8, (-1.0, 1.0), (-1.0, 1.0))
        rng = np.random.default_rng(37)
        for _ in range(20):
            hval = rng.uniform(-2.0, 2.0)
            cval = rng.uniform(-2.0, 2.0) + 1j * rng.uniform(-2.0, 2.0)
            dtau = rng.uniform(0.01, 0.8)
            model = constant_model(hval, cval)
            ham = np.array([[hval, cval], [np.conj(cval), -hval]])
            expected = expm_taylor(-1j * dtau * ham)
            u11, u12, u21, u22 = entries_of_potential_step(model, grid, dtau)
            got = np.array([[u11[0, 0], u12[0, 0]], [u21[0, 0], u22[0, 0]]])
            assert np.abs(got - expected).max() < 1e-12

    def test_update_is_unitary_nodewise(self):
        grid = Grid2D(16, 16, (-5.0, 5.0), (-5.0, 5.0))
        u11, u12, u21, u22 = entries_of_potential_step(linear_jt(), grid, 0.3)
        det = u11 * u22 - u12 * u21
        col_norm = np.abs(u11) ** 2 + np.abs(u21) ** 2
        assert np.abs(np.abs(det) - 1.0).max() < 1e-14
        assert np.abs(col_norm - 1.0).max() < 1e-14

    def test_scalar_obstacle_contributes_pure_phase(self):
        grid = Grid2D(16, 16, (-5.0, 5.0), (-5.0, 5.0))
        barrier = BarrierSpec(height=3.0, radius=1.5)
        model = constant_model(0.0, 0.0, barrier=barrier)
        dtau = 0.17
        u11, u12, u21, u22 = entries_of_potential_step(model, grid, dtau)
        xx, yy = grid.meshgrid()
        r2 = xx ** 2 + yy ** 2
        expected = np.exp(-1j * dtau * 3.0 * np.exp(-((r2 / 1.5 ** 2) ** 4)))
        assert np.abs(u11 - expected).max() < 1e-14
        assert np.abs(u22 - expected).max() < 1e-14
        assert np.abs(u12).max() == 0.0


class TestKineticHalfStep:
    def test_constant_field_is_stationary(self):
        grid = Grid2D(32, 32, (-4.0, 4.0), (-4.0, 4.0))
        g = np.full((32, 32), 0.7 - 0.2j)
        out = kinetic_half_step(SpinorField(grid, g, g), 0.5)
        assert np.abs(out.g1 - g).max() < 1e-14
        assert np.abs(out.g2 - g).max() < 1e-14

    def test_lattice_plane_wave_picks_up_dispersion_phase(self):
        grid = Grid2D(32, 32, (-4.0, 4.0), (-4.0, 4.0))
        k_m = 2.0 * np.pi * 5 / 8.0  # five cycles across the box
        xx, _ = grid.meshgrid()
        wave = np.exp(1j * k_m * xx)
        dtau = 0.37
        out = kinetic_half_step(SpinorField(grid, np.zeros_like(wave), wave),
                                dtau)
        expected = wave * np.exp(-0.5j * dtau * k_m ** 2)
        assert np.abs(out.g2 - expected).max() < 1e-12
        assert np.abs(np.abs(out.g2) - 1.0).max() < 1e-13

    def test_gaussian_spreading_law(self):
        # Free-flight width: sigma(tau)^2 = sigma0^2 + tau^2 / sigma0^2.
        grid = Grid2D(128, 128, (-20.0, 20.0), (-20.0, 20.0))
        sigma0, tau = 2.0, 3.0
        psi = gaussian_blob(grid, (0.0, 0.0), sigma0)
        out = kinetic_half_step(SpinorField(grid, np.zeros_like(psi), psi),
                                2.0 * tau)
        _, sigma_meas = density_moments_xi(out)
        expected = np.sqrt(sigma0 ** 2 + tau ** 2 / sigma0 ** 2)
        assert sigma_meas == pytest.approx(expected, rel=1e-3)


class TestStep:
    def make_field(self, grid, carrier_k=1.2):
        psi = gaussian_blob(grid, (-5.0, 1.0), 1.5, carrier_k)
        psi /= np.sqrt((np.abs(psi) ** 2).sum() * grid.cell_area)
        return SpinorField(grid, 0.6 * psi, 0.8 * psi)

    def test_free_step_reduces_to_pure_kinetic_flight(self):
        grid = Grid2D(64, 64, (-12.0, 12.0), (-12.0, 12.0))
        field = self.make_field(grid)
        dtau = 0.05
        composed = step(field, free_model(), dtau)
        direct = kinetic_half_step(field, 2.0 * dtau)
        assert l2_distance(composed, direct) < 1e-12
        assert composed.tau == pytest.approx(dtau)

    def test_unitary_part_conserves_norm(self):
        grid = Grid2D(64, 64, (-12.0, 12.0), (-12.0, 12.0))
        field = self.make_field(grid)
        out = step(field, capped_jt(delta=2.0, rho0=2.0), 0.05, mask=None)
        assert abs(norm(out) - norm(field)) < 1e-13

    def test_mask_removes_mass_quadratically(self):
        grid = Grid2D(64, 64, (-12.0, 12.0), (-12.0, 12.0))
        field = self.make_field(grid)
        mask = np.full((64, 64), 0.5)
        out = step(field, free_model(), 0.05, mask=mask)
        assert norm(out) == pytest.approx(0.25 * norm(field), rel=1e-12)

    def test_corrupted_factor_table_trips_drift_guard(self):
        grid = Grid2D(64, 64, (-12.0, 12.0), (-12.0, 12.0))
        cfg = PropagationConfig(grid=grid, model=linear_jt(), n_steps=3,
                                packet=PacketSpec(center=(-8.0, 0.0),
                                                  sigma_long=1.5,
                                                  slab_halfwidth=3.0,
                                                  slab_rolloff=1.0))
        prop = SplitOperatorPropagator(cfg)
        prop.u11 = prop.u11 * 1.01
        with pytest.raises(NumericalInstabilityError, match="drift"):
            prop.run()

    def test_second_order_convergence_under_step_halving(self):
        grid = Grid2D(64, 64, (-12.0, 12.0), (-12.0, 12.0))
        model = capped_jt(delta=2.0, rho0=2.0)
        field = self.make_field(grid)
        base_dtau, base_steps = 0.02, 16

        def evolve(refinement):
            out = field
            dtau = base_dtau / 2 ** refinement
            for _ in range(base_steps * 2 ** refinement):
                out = step(out, model, dtau)
            return out

        psi0, psi1, psi2 = evolve(0), evolve(1), evolve(2)
        eps0 = l2_distance(psi0, psi1)
        eps1 = l2_distance(psi1, psi2)
        assert 3.5 < eps0 / eps1 < 4.5


class TestAbsorberMask:
    def test_interior_is_exactly_one(self):
        grid = Grid2D(64, 64, (-12.0, 12.0), (-12.0, 12.0))
        mask = absorber_mask(grid, AbsorberSpec(margin_frac=0.25, power=4))
        xx, yy = grid.meshgrid()
        interior = (np.abs(xx) <= 5.5) & (np.abs(yy) <= 5.5)
        assert np.all(mask[interior] == 1.0)
        assert mask.min() >= 0.0 and mask.max() <= 1.0

    def test_taper_reaches_boundary_near_zero(self):
        grid = Grid2D(64, 64, (-12.0, 12.0), (-12.0, 12.0))
        mask = absorber_mask(grid, AbsorberSpec(margin_frac=0.25, power=4))
        assert mask[0, 32] < 0.01
        assert mask[32, 0] < 0.01

    def test_mask_is_symmetric_and_monotone(self):
        grid = Grid2D(64, 64, (-12.0, 12.0), (-12.0, 12.0))
        mask = absorber_mask(grid, AbsorberSpec(margin_frac=0.2, power=8))
        assert np.array_equal(mask, mask[::-1, :])
        assert np.array_equal(mask, mask[:, ::-1])
        center_out = mask[32:, 32]
        assert np.all(np.diff(center_out) <= 0.0)

    def test_disabled_absorber_returns_none(self):
        grid = Grid2D(64, 64, (-12.0, 12.0), (-12.0, 12.0))
        assert absorber_mask(grid, AbsorberSpec(kind="none")) is None


class TestBackscatterFraction:
    def test_prepared_packet_sits_on_launch_side(self):
        grid = Grid2D(128, 128, (-12.0, 12.0), (-12.0, 12.0))
        cfg = PropagationConfig(grid=grid, model=linear_jt(),
                                packet=PacketSpec(center=(-8.0, 0.0),
                                                  sigma_long=1.0,
                                                  slab_halfwidth=3.0,
                                                  slab_rolloff=1.0))
        packet = prepare_packet(cfg)
        assert backscatter_fraction(packet, -2.5) >= 1.0 - 1e-6

    def test_symmetric_density_splits_evenly(self):
        grid = Grid2D(64, 64, (-12.0, 12.0), (-12.0, 12.0))
        psi = gaussian_blob(grid, (0.0, 0.0), 2.0)
        field = SpinorField(grid, psi, psi)
        assert backscatter_fraction(field, 0.0) == pytest.approx(0.5,
                                                                 abs=1e-12)

    def test_direction_flip_complements_the_fraction(self):
        grid = Grid2D(64, 64, (-12.0, 12.0), (-12.0, 12.0))
        psi = gaussian_blob(grid, (-3.0, 0.0), 2.0)
        field = SpinorField(grid, psi, 0.3 * psi)
        fwd = backscatter_fraction(field, -5.0, direction=1)
        rev = backscatter_fraction(field, -5.0, direction=-1)
        assert fwd + rev == pytest.approx(1.0, abs=1e-12)


class TestRun:
    def test_free_packet_coasts_at_group_speed_and_spreads(self):
        grid = Grid2D(128, 128, (-20.0, 20.0), (-20.0, 20.0))
        sigma0 = 2.5
        cfg = PropagationConfig(
            grid=grid, model=free_model(), beta=1.0, n_steps=1288,
            packet=PacketSpec(center=(-10.0, 0.0), sigma_long=sigma0,
                              slab_halfwidth=5.0, slab_rolloff=2.0),
            absorber=AbsorberSpec(kind="none"))
        traj = run(cfg)
        final = traj.final
        tau_f = final.tau
        center, sigma_meas = density_moments_xi(final)
        displacement = 2.0 * cfg.carrier_k() * tau_f
        assert center == pytest.approx(-10.0 + displacement,
                                       abs=0.01 * displacement)
        expected_sigma = np.sqrt(sigma0 ** 2 + tau_f ** 2 / sigma0 ** 2)
        assert sigma_meas == pytest.approx(expected_sigma, rel=1e-3)
        # trivial frame: nothing may leak into the upper channel
        assert np.abs(final.g1).max() < 1e-15

    def test_norm_survives_ten_thousand_steps(self):
        grid = Grid2D(64, 64, (-12.0, 12.0), (-12.0, 12.0))
        cfg = PropagationConfig(
            grid=grid, model=linear_jt(), beta=1.0, n_steps=10_000,
            packet=PacketSpec(center=(-6.0, 0.0), sigma_long=1.5,
                              slab_halfwidth=3.0, slab_rolloff=1.0),
            absorber=AbsorberSpec(kind="none"))
        traj = run(cfg)
        assert traj.diagnostics[0].norm == pytest.approx(1.0, abs=1e-12)
        assert abs(traj.diagnostics[-1].norm - traj.diagnostics[0].norm) < 1e-10

    def test_energy_is_conserved_through_the_collision(self):
        grid = Grid2D(128, 128, (-16.0, 16.0), (-16.0, 16.0))
        model = capped_jt(delta=2.0, rho0=2.0)
        cfg = PropagationConfig(
            grid=grid, model=model, beta=0.5, marker_frac=0.4,
            packet=PacketSpec(center=(-9.0, 0.0), sigma_long=1.0,
                              slab_halfwidth=4.0, slab_rolloff=2.0),
            absorber=AbsorberSpec(kind="none"))
        traj = run(cfg)
        e0 = energy_expectation(traj.snapshots[0], model)
        e1 = energy_expectation(traj.final, model)
        assert e1 == pytest.approx(e0, rel=1e-3)

    def test_pictures_agree_nodewise_after_the_collision(self):
        grid = Grid2D(128, 128, (-16.0, 16.0), (-16.0, 16.0))
        model = capped_jt(delta=2.0, rho0=2.0)
        cfg = PropagationConfig(
            grid=grid, model=model, beta=0.5, marker_frac=0.4,
            packet=PacketSpec(center=(-9.0, 0.0), sigma_long=1.0,
                              slab_halfwidth=4.0, slab_rolloff=2.0))
        traj = run(cfg)
        final = traj.final
        xx, yy = grid.meshgrid()
        u = model.unitary(xx, yy)
        rotated = to_adiabatic(final, u)
        dens_two_channel = np.abs(final.g1) ** 2 + np.abs(final.g2) ** 2
        dens_branch = np.abs(rotated.g1) ** 2 + np.abs(rotated.g2) ** 2
        assert np.abs(dens_two_channel - dens_branch).max() < 1e-12
        pops = populations_in_basis(final, u)
        p_exc_direct = float((np.abs(rotated.g1) ** 2).sum() * grid.cell_area)
        assert pops.excited == pytest.approx(p_exc_direct, abs=1e-10)

    def test_snapshot_cadence_and_final_are_recorded(self):
        grid = Grid2D(32, 32, (-8.0, 8.0), (-8.0, 8.0))
        cfg = PropagationConfig(
            grid=grid, model=free_model(), n_steps=12, snapshot_every=5,
            packet=PacketSpec(center=(-4.0, 0.0), sigma_long=1.0,
                              slab_halfwidth=2.0, slab_rolloff=1.0),
            absorber=AbsorberSpec(kind="none"))
        traj = run(cfg)
        assert [r.step for r in traj.diagnostics] == [0, 5, 10, 12]
        assert len(traj.snapshots) == 4
        assert traj.snapshots[-1].tau == pytest.approx(12 * cfg.resolved_dtau())

    def test_absorber_books_removed_mass(self):
        grid = Grid2D(64, 64, (-12.0, 12.0), (-12.0, 12.0))
        cfg = PropagationConfig(
            grid=grid, model=free_model(), beta=4.0, n_steps=1200,
            packet=PacketSpec(center=(-6.0, 0.0), sigma_long=1.0,
                              slab_halfwidth=3.0, slab_rolloff=1.0))
        traj = run(cfg)
        last = traj.diagnostics[-1]
        # the fast free packet ran into the boundary band and lost mass there
        assert last.absorbed > 0.5
        assert last.norm + last.absorbed == pytest.approx(1.0, abs=1e-6)


class TestCollisionRegressions:
    """Slow, full-pipeline checks against the stored collision runs."""

    def test_slow_collision_leaves_ground_branch_almost_pure(self, fig6_bundle):
        summary = fig6_bundle[("row1", "left")]
        assert summary["excited_fraction"] < 0.01

    def test_backscatter_grows_as_collisions_slow(self, fig6_bundle):
        fractions = [fig6_bundle[(row, "left")]["backscatter"]
                     for row in BETA_ORDER]
        assert fractions[0] < fractions[1] < fractions[2]

    def test_matched_speeds_backscatter_alike_for_both_frames(self, fig6_bundle):
        for row in BETA_ORDER:
            left = fig6_bundle[(row, "left")]["backscatter"]
            right = fig6_bundle[(row, "right")]["backscatter"]
            assert abs(left - right) / max(left, right) < 0.06
