import numpy as np
import pytest

from cnumlab.griffiths import concentration_check
from cnumlab.magnet import (
    LatticeTooLargeError,
    SpinLattice,
    build_spin_hamiltonian,
    chain_measure_sequence,
    commutator_h0_m,
    free_energy_derivative_error,
    magnet_csv,
    magnetization_distribution,
    sector_counts,
    sector_spectrum,
    spin_algebra_error,
    thermodynamics,
    total_spin_multiplicities,
)

B41 = np.linspace(-2.0, 2.0, 41)


def test_two_spin_spectrum_and_zeeman_split():
    lat = SpinLattice(L=2, B=0.3)
    E = np.linalg.eigvalsh(build_spin_hamiltonian(lat).toarray())
    # triplet -1/4 - B m for m = 1, 0, -1 and singlet 3/4
    expected = sorted([-0.25 - 0.3, -0.25, -0.25 + 0.3, 0.75])
    assert np.allclose(E, expected, atol=1e-12)
    assert np.allclose(sector_spectrum(lat).all_energies(0.3), expected, atol=1e-12)


@pytest.mark.parametrize("s", [0.5, 1.0, 1.5])
def test_spin_algebra_and_conserved_magnetization(s):
    lat = SpinLattice(d=1, L=3, s=s)
    assert spin_algebra_error(lat) < 1e-12
    assert commutator_h0_m(lat) < 1e-12


def test_square_lattice_bonds_listed_once():
    lat = SpinLattice(d=2, L=3)
    bonds = lat.bonds()
    assert len(bonds) == 2 * 9
    assert len({(x, y) for x, y, _ in bonds}) == len(bonds)
    assert len(SpinLattice(L=2).bonds()) == 1


@pytest.mark.parametrize("L", range(2, 11))
def test_zero_field_magnetization_vanishes(L):
    rep = thermodynamics(SpinLattice(L=L, beta=1.0), [0.0])
    assert abs(rep.m[0]) < 1e-12


def test_two_spin_low_temperature_m2():
    # triplet ground state: <M^2> = 2/3, so m2 = (2/3)/4
    rep = thermodynamics(SpinLattice(L=2, beta=50.0), [0.0])
    assert rep.m2[0] == pytest.approx(1 / 6, abs=1e-3)


@pytest.mark.parametrize("L", [2, 5, 8])
def test_grid_identities(L):
    lat = SpinLattice(L=L, beta=1.3)
    rep = thermodynamics(lat, B41)
    assert np.all(rep.m2 >= rep.m ** 2 - 1e-15)
    assert free_energy_derivative_error(lat, B41) < 1e-6
    assert np.allclose(rep.m, -rep.m[::-1], atol=1e-14)
    assert np.allclose(rep.g, rep.g[::-1], atol=1e-14)
    # g is concave in B
    assert np.all(rep.g[:-2] + rep.g[2:] - 2 * rep.g[1:-1] <= 1e-12)


def test_infinite_temperature_distribution():
    dist = magnetization_distribution(SpinLattice(L=2, beta=1e-12), 0.0)
    order = np.argsort(dist.points)
    assert np.allclose(dist.points[order], [-1.0, 0.0, 1.0])
    assert np.allclose(dist.masses[order], [0.25, 0.5, 0.25], atol=1e-10)


def test_distribution_symmetric_and_counts_match():
    lat = SpinLattice(L=8, beta=2.0)
    dist = magnetization_distribution(lat, 0.0)
    order = np.argsort(dist.points)
    assert np.allclose(dist.masses[order], dist.masses[order][::-1], atol=1e-14)
    spectrum = sector_spectrum(lat)
    counts = sector_counts(8, 0.5)
    for m, e in zip(spectrum.m_values, spectrum.energies):
        assert len(e) == counts[m]
    # multiplet dimensions add up to the full space
    mult = total_spin_multiplicities(8, 0.5)
    assert sum(n * (2 * S + 1) for S, n in mult.items()) == 2 ** 8
    assert mult[4.0] == 1


def test_ferromagnet_ground_state_is_fully_polarized_multiplet():
    lat = SpinLattice(L=6)
    spectrum = sector_spectrum(lat)
    ground = min(e.min() for e in spectrum.energies)
    assert ground == pytest.approx(-6 * 0.25, abs=1e-12)
    for e in spectrum.energies:
        assert e.min() == pytest.approx(ground, abs=1e-12)


def test_cap_and_validation():
    with pytest.raises(LatticeTooLargeError):
        SpinLattice(L=15)
    with pytest.raises(ValueError):
        SpinLattice(s=0.3)
    with pytest.raises(ValueError):
        SpinLattice(J=-1.0)
    with pytest.raises(ValueError):
        SpinLattice(L=3, couplings={(0, 0): 1.0})
    lat = SpinLattice(L=3, couplings={(0, 1): 1.0, (1, 0): 1.0})
    assert lat.bonds() == [(0, 1, 1.0)]


def test_chain_sequence_concentrates_at_high_temperature():
    seq = chain_measure_sequence(range(4, 13, 2), beta=0.2)
    assert list(seq.ns) == list(range(4, 13, 2))
    rep = concentration_check(seq, 0.0, 0.0, 0.25)
    assert rep.slope < 0


def test_magnet_csv():
    rep = thermodynamics(SpinLattice(L=2), [0.0, 0.5])
    lines = magnet_csv(rep).splitlines()
    assert lines[0] == "B,m,g,m2"
    assert len(lines) == 3
