import numpy as np
import pytest

from gaugelab.errors import DimensionMismatch, GridTooNarrow, ZeroNorm, ZeroWeight
from gaugelab.noether import braket_kg, Identity, noether_charge, noether_momentum, position_expectation
from gaugelab.packet import (KGrid, MomentumPacket, PhysicalConstants, dispersion, from_spectrum,
                             gaussian_amplitude, gaussian_field, normalize, shell_amplitude, synthesize,
                             synthesize_amplitudes, to_spectrum)


@pytest.fixture
def grid():
    return KGrid(1, 256, 1 / 64, offset=5.0)


@pytest.fixture
def packet(grid):
    return normalize(gaussian_amplitude(grid, 5.0, 0.05), grid)


class TestConstants:
    def test_defaults_are_natural_units(self):
        c = PhysicalConstants()
        assert (c.hbar, c.c, c.m, c.q) == (1.0, 1.0, 1.0, -1.0)
        assert c.compton_wavenumber == 1.0
        assert c.gamma == -1.0

    @pytest.mark.parametrize("kwargs", [{"hbar": 0.0}, {"c": -1.0}, {"m": float("nan")}, {"q": 0.0}])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            PhysicalConstants(**kwargs)


class TestGrid:
    def test_node_positions(self):
        g = KGrid(1, 8, 0.5, offset=1.0)
        assert g.k_axes[0] == pytest.approx(1.0 + 0.5 * (np.arange(8) - 4))
        assert g.x_spacing[0] == pytest.approx(2 * np.pi / 4.0)

    def test_offset_must_be_half_multiple(self):
        KGrid(3, 8, 0.5, offset=0.25)
        with pytest.raises(ValueError):
            KGrid(1, 8, 0.5, offset=0.1)

    def test_staggered(self):
        assert KGrid(3, 8, 0.5, offset=0.25).staggered
        assert not KGrid(3, 8, 0.5, offset=1.0).staggered

    @pytest.mark.parametrize("points", [0, 7])
    def test_points_even_positive(self, points):
        with pytest.raises(ValueError):
            KGrid(1, points, 0.1)

    def test_spectrum_inverse(self, grid):
        rng = np.random.default_rng(3)
        values = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
        assert from_spectrum(grid, to_spectrum(grid, values)) == pytest.approx(values, abs=1e-12)


class TestGaussianAmplitude:
    def test_even_about_zero(self):
        g = KGrid(1, 128, 0.05)
        a = gaussian_amplitude(g, 0.0, 0.2)
        # node j <-> k = (j - 64) dk, so the mirror of node j is 128 - j
        assert a[1:] == pytest.approx(a[1:][::-1], abs=0)

    def test_peak_at_center(self, grid):
        a = gaussian_amplitude(grid, 5.0, 0.05)
        assert grid.k_axes[0][np.argmax(a)] == pytest.approx(5.0)

    def test_support_outside_grid(self, grid):
        with pytest.raises(GridTooNarrow):
            gaussian_amplitude(grid, 5.0, 0.5)

    def test_nonpositive_width(self, grid):
        with pytest.raises(ValueError):
            gaussian_amplitude(grid, 5.0, 0.0)


class TestNormalize:
    def test_unit_sum(self, packet, grid):
        assert np.sum(np.abs(packet.alpha) ** 2) * grid.dk_volume == pytest.approx(1.0, abs=1e-10)

    def test_sigma_matches_riemann_sum(self, grid):
        a = gaussian_amplitude(grid, 5.0, 0.05)
        total = sum(abs(v) ** 2 for v in a) * grid.spacing[0]
        assert normalize(a, grid).sigma == pytest.approx(total ** -0.5, rel=1e-12)

    def test_already_normalized(self, packet, grid):
        assert normalize(packet.alpha, grid).sigma == pytest.approx(1.0, abs=1e-12)

    def test_complex_scale_is_global_phase(self, grid, packet):
        z = 3.0 - 4.0j
        scaled = normalize(z * gaussian_amplitude(grid, 5.0, 0.05), grid)
        assert scaled.alpha == pytest.approx(packet.alpha * z / abs(z), abs=1e-12)
        assert scaled.sigma == pytest.approx(packet.sigma / abs(z), rel=1e-12)
        assert noether_momentum(scaled) == pytest.approx(noether_momentum(packet), abs=1e-12)

    def test_zero_input(self, grid):
        with pytest.raises(ZeroNorm):
            normalize(np.zeros(grid.shape), grid)

    def test_packet_rejects_unnormalized(self, grid):
        with pytest.raises(ValueError):
            MomentumPacket(grid, 2.0 * gaussian_amplitude(grid, 5.0, 0.05))

    def test_packet_rejects_edge_amplitude(self, grid):
        alpha = np.zeros(grid.shape, dtype=complex)
        alpha[1] = 1.0 / np.sqrt(grid.dk_volume)
        with pytest.raises(GridTooNarrow):
            MomentumPacket(grid, alpha)


class TestShellAmplitude:
    def test_needs_3d(self, grid):
        with pytest.raises(DimensionMismatch):
            shell_amplitude(grid, 4.0, 0.2)

    def test_isotropic_depends_on_radius_only(self):
        g = KGrid(3, 32, 0.5)
        a = shell_amplitude(g, 4.0, 0.4)
        k = np.sqrt(g.k_norm_sq)
        assert a == pytest.approx(np.exp(-(k - 4.0) ** 2 / 0.64))
        # (kx, ky, kz) and (ky, kz, kx) share a radius
        assert a == pytest.approx(np.transpose(a, (1, 2, 0)))

    def test_zero_weight(self):
        g = KGrid(3, 32, 0.5)
        with pytest.raises(ZeroWeight):
            shell_amplitude(g, 4.0, 0.4, lambda d: np.zeros(d.shape[1:]))

    def test_too_large(self):
        g = KGrid(3, 16, 0.5)
        with pytest.raises(GridTooNarrow):
            shell_amplitude(g, 4.0, 0.4)


class TestDispersion:
    def test_rest(self):
        c = PhysicalConstants(hbar=2.0, c=3.0, m=5.0)
        assert dispersion(0.0, c) == pytest.approx(5.0 * 9.0 / 2.0)

    def test_unit_k(self):
        assert dispersion(1.0, PhysicalConstants()) == pytest.approx(np.sqrt(2.0))

    def test_mass_shell(self):
        c = PhysicalConstants(hbar=0.5, c=2.0, m=3.0)
        k = np.random.default_rng(1).normal(size=(3, 10))
        omega = dispersion(k, c)
        lhs = c.hbar ** 2 * ((omega / c.c) ** 2 - np.sum(k ** 2, axis=0))
        assert lhs == pytest.approx(np.full(10, (c.m * c.c) ** 2), rel=1e-12)


class TestSynthesize:
    def test_plane_wave_has_constant_modulus(self):
        g = KGrid(1, 64, 0.1)
        alpha = np.zeros(g.shape, dtype=complex)
        alpha[32] = 1.0
        psi = synthesize_amplitudes(g, alpha, PhysicalConstants()).psi
        assert np.abs(psi) == pytest.approx(np.full(64, np.abs(psi[0])), abs=1e-12)

    def test_envelope_peaks_at_origin(self, packet, grid):
        psi = synthesize(packet).psi
        assert grid.x_axes[0][np.argmax(np.abs(psi))] == pytest.approx(0.0)

    def test_matches_direct_summation(self):
        g = KGrid(1, 64, 0.125, offset=2.0)
        c = PhysicalConstants()
        p = normalize(gaussian_amplitude(g, 2.0, 0.3), g, c)
        k = g.k_axes[0]
        x = g.x_axes[0]
        t = 0.7
        omega = dispersion(k[None, :], c)
        measure = g.spacing[0] / np.sqrt(2 * np.pi * 2 * omega)
        direct = np.array([np.sum(measure * p.alpha * np.exp(1j * (k * xi - omega * t))) for xi in x])
        assert synthesize(p, t).psi == pytest.approx(direct, abs=1e-10)

    def test_linear_before_normalization(self, grid):
        c = PhysicalConstants()
        a1 = gaussian_amplitude(grid, 5.0, 0.05)
        a2 = 1j * gaussian_amplitude(grid, 5.2, 0.1)
        total = synthesize_amplitudes(grid, a1 + a2, c, 0.3).psi
        parts = synthesize_amplitudes(grid, a1, c, 0.3).psi + synthesize_amplitudes(grid, a2, c, 0.3).psi
        assert total == pytest.approx(parts, abs=1e-12)

    def test_charge_is_hbar(self, packet):
        assert noether_charge(packet) == pytest.approx(1.0, abs=1e-8)
        assert braket_kg(synthesize(packet), Identity()).real == pytest.approx(1.0, abs=1e-8)

    def test_charge_scales_with_hbar(self, grid):
        c = PhysicalConstants(hbar=0.5)
        p = normalize(gaussian_amplitude(grid, 5.0, 0.05), grid, c)
        assert noether_charge(p) == pytest.approx(0.5, abs=1e-8)


class TestTranslation:
    def test_moves_position(self):
        g = KGrid(1, 256, 1 / 64, offset=1.0)
        p = normalize(gaussian_amplitude(g, 1.0, 0.05), g).translated(30.0)
        assert position_expectation(synthesize(p))[0] == pytest.approx(30.0, abs=1e-8)

    def test_keeps_probabilities(self, packet):
        assert packet.translated(12.5).probability == pytest.approx(packet.probability)
        assert packet.with_phase(-2j).probability == pytest.approx(packet.probability)


class TestGaussianField:
    def test_normalized_low_energy(self):
        g = KGrid(1, 512, 2 * np.pi / 51.2)
        psi = gaussian_field(g, 1.0, 1.0, 0.5)
        assert psi.norm_sq == pytest.approx(1.0, abs=1e-12)
        assert psi.is_localized()
