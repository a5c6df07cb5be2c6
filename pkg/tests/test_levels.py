"""Unit tests for the 8-level primitives: sublevels, pulses, emission
maps, precession and photon measurement."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photonchain import levels
from photonchain.levels import (
    CLOSING_DOMAIN,
    CYCLING_DOMAIN,
    EMIT_CLOSING,
    EMIT_CYCLING,
    EMIT_INITIAL,
    INITIAL_DOMAIN,
    OMEGA_L,
    AtomKet,
    EmissionLevelError,
    InvalidPulseError,
    JointKet,
    MeasBasis,
    Sublevel,
    emit_closing,
    emit_cycling,
    emit_initial,
    larmor_precess,
    measure_photon,
    precession_coefficients,
    precession_phases,
    raman_rotation,
    rotating_frame_phases,
    rotation_matrix,
)

S2 = 1.0 / np.sqrt(2.0)


def ket(F, mF):
    return AtomKet.basis(Sublevel(F, mF))


def test_sublevel_ordering():
    labels = [(s.F, s.mF) for s in levels.SUBLEVELS]
    assert labels == [(1, -1), (1, 0), (1, 1),
                      (2, -2), (2, -1), (2, 0), (2, 1), (2, 2)]
    for i, s in enumerate(levels.SUBLEVELS):
        assert s.index == i


def test_invalid_sublevels_rejected():
    with pytest.raises(ValueError):
        Sublevel(3, 0)
    with pytest.raises(ValueError):
        Sublevel(1, 2)


def test_precession_coefficients():
    coeff = precession_coefficients()
    for s, c in zip(levels.SUBLEVELS, coeff):
        expected = (+1 if s.F == 1 else -1) * s.mF
        assert c == expected
    # without the manifold flip both manifolds share the F=1 sign
    no_flip = precession_coefficients(flip_f2_sign=False)
    for s, c in zip(levels.SUBLEVELS, no_flip):
        assert c == s.mF


@given(theta=st.floats(-2 * np.pi, 2 * np.pi),
       phase=st.floats(-np.pi, np.pi))
def test_rotation_matrix_unitary(theta, phase):
    u = rotation_matrix(Sublevel(1, 1), Sublevel(2, 0), theta, phase)
    assert np.allclose(u.conj().T @ u, np.eye(8), atol=1e-12)


@given(t1=st.floats(-np.pi, np.pi), t2=st.floats(-np.pi, np.pi),
       phase=st.floats(-np.pi, np.pi))
def test_rotation_composition(t1, t2, phase):
    # same axis: angles add
    a, b = Sublevel(1, -1), Sublevel(2, 0)
    u1 = rotation_matrix(a, b, t1, phase)
    u2 = rotation_matrix(a, b, t2, phase)
    u12 = rotation_matrix(a, b, t1 + t2, phase)
    assert np.allclose(u2 @ u1, u12, atol=1e-12)


def test_raman_rotation_matches_matrix():
    state = AtomKet(np.ones(8, dtype=complex) / np.sqrt(8))
    a, b = Sublevel(1, 1), Sublevel(2, 2)
    rotated = raman_rotation(state, a, b, 0.7, 0.3)
    u = rotation_matrix(a, b, 0.7, 0.3)
    assert np.allclose(rotated.amps, u @ state.amps)


def test_pi_pulse_transfers_population():
    out = raman_rotation(ket(1, 1), Sublevel(1, 1), Sublevel(2, 0), np.pi)
    assert out.population(Sublevel(2, 0)) == pytest.approx(1.0)


def test_identical_pulse_levels_rejected():
    with pytest.raises(InvalidPulseError):
        raman_rotation(ket(1, 0), Sublevel(1, 0), Sublevel(1, 0), np.pi)


@pytest.mark.parametrize("iso,dom", [(EMIT_INITIAL, INITIAL_DOMAIN),
                                     (EMIT_CYCLING, CYCLING_DOMAIN),
                                     (EMIT_CLOSING, CLOSING_DOMAIN)])
def test_emission_isometries(iso, dom):
    assert iso.shape == (16, 8)
    # exact isometry on the physical domain columns ...
    vdom = iso[:, list(dom)]
    assert np.allclose(vdom.conj().T @ vdom, np.eye(len(dom)), atol=1e-14)
    # ... and every completion column stays normalized
    assert np.allclose(np.linalg.norm(iso, axis=0), 1.0, atol=1e-14)


def test_emit_initial_amplitudes():
    # |2,0> -> (|1,1>|R> - |1,-1>|L>)/sqrt(2)
    joint = emit_initial(ket(2, 0)).matrix()
    assert joint[Sublevel(1, 1).index, 0] == pytest.approx(S2)
    assert joint[Sublevel(1, -1).index, 1] == pytest.approx(-S2)
    assert np.count_nonzero(joint) == 2


def test_emit_cycling_amplitudes():
    j = emit_cycling(ket(2, 2)).matrix()
    assert j[Sublevel(1, 1).index, 0] == pytest.approx(1.0)
    j = emit_cycling(ket(2, -2)).matrix()
    assert j[Sublevel(1, -1).index, 1] == pytest.approx(1.0)


def test_emit_closing_amplitudes():
    j = emit_closing(ket(2, -1)).matrix()
    assert j[Sublevel(1, 0).index, 0] == pytest.approx(1.0)
    j = emit_closing(ket(2, 1)).matrix()
    assert j[Sublevel(1, 0).index, 1] == pytest.approx(-1.0)


def test_emission_domains():
    assert INITIAL_DOMAIN == (Sublevel(2, 0).index,)
    assert set(CYCLING_DOMAIN) == {Sublevel(2, -2).index,
                                   Sublevel(2, 2).index}
    assert set(CLOSING_DOMAIN) == {Sublevel(2, -1).index,
                                   Sublevel(2, 1).index}


def test_off_domain_emission_rejected():
    with pytest.raises(EmissionLevelError):
        emit_initial(ket(1, 0))
    with pytest.raises(EmissionLevelError):
        emit_cycling(ket(2, 0))
    with pytest.raises(EmissionLevelError):
        emit_closing(ket(2, 2))


@given(st.lists(st.floats(-1, 1), min_size=16, max_size=16),
       st.sampled_from(["initial", "cycling", "closing"]))
def test_emission_preserves_norm_on_domain(re, which):
    iso, dom = {
        "initial": (EMIT_INITIAL, INITIAL_DOMAIN),
        "cycling": (EMIT_CYCLING, CYCLING_DOMAIN),
        "closing": (EMIT_CLOSING, CLOSING_DOMAIN),
    }[which]
    amps = np.zeros(8, dtype=complex)
    for j, i in enumerate(dom):
        amps[i] = re[2 * j] + 1j * re[2 * j + 1]
    nrm = np.linalg.norm(amps)
    if nrm < 1e-6:
        return
    joint = JointKet(iso @ (amps / nrm))
    assert np.linalg.norm(joint.amps) == pytest.approx(1.0)


def test_precession_phase_values():
    # |1,1> advances at +omega_L, |2,2> at -2 omega_L
    t = 1.25e-6
    ph = precession_phases(t, delta=0.0)
    assert ph[Sublevel(1, 1).index] == pytest.approx(np.exp(-1j * OMEGA_L * t))
    assert ph[Sublevel(2, 2).index] == pytest.approx(
        np.exp(+2j * OMEGA_L * t))
    assert ph[Sublevel(1, 0).index] == pytest.approx(1.0)


def test_rotating_frame_phases_delta_only():
    t, d = 37e-6, 3e-4
    assert np.allclose(rotating_frame_phases(t, 0.0), np.ones(8))
    full = precession_phases(t, d)
    nominal = precession_phases(t, 0.0)
    assert np.allclose(rotating_frame_phases(t, d), full / nominal)


def test_larmor_precess_joint_leaves_photon():
    joint = emit_initial(ket(2, 0))
    out = larmor_precess(joint, 2.0e-6, delta=0.01)
    m_in, m_out = joint.matrix(), out.matrix()
    # each atom row picks up only a row-wise phase
    ratio = m_out[Sublevel(1, 1).index, 0] / m_in[Sublevel(1, 1).index, 0]
    assert abs(abs(ratio) - 1.0) < 1e-12
    assert np.linalg.norm(out.amps) == pytest.approx(1.0)


def test_negative_duration_rejected():
    with pytest.raises(ValueError):
        precession_phases(-1e-6)
    with pytest.raises(ValueError):
        rotating_frame_phases(-1e-6)


def test_basis_states():
    z = MeasBasis.z()
    assert np.allclose(z.plus_state(), [1, 0])
    x = MeasBasis.x()
    assert np.allclose(x.plus_state(), [S2, S2])
    e = MeasBasis.equator(np.pi / 2)
    assert np.allclose(e.minus_state(), [S2, -1j * S2])
    # plus/minus are orthonormal
    for b in (z, x, e, MeasBasis.equator(0.77)):
        assert abs(np.vdot(b.plus_state(), b.minus_state())) < 1e-12


@given(st.floats(-np.pi, np.pi))
def test_basis_code_roundtrip(phi):
    b = MeasBasis.equator(phi)
    assert MeasBasis.from_code(b.code()) == b
    assert MeasBasis.from_code("Z") == MeasBasis.z()
    assert MeasBasis.from_code("X") == MeasBasis.x()


def test_measure_photon_born_statistics():
    # initial emission measured in X: deterministic correlation with the
    # atom phase, 50/50 outcomes
    rng = np.random.default_rng(5)
    joint = emit_initial(ket(2, 0))
    outcomes = [measure_photon(joint, MeasBasis.z(), rng)[0]
                for _ in range(4000)]
    frac = np.mean([o == 1 for o in outcomes])
    assert abs(frac - 0.5) < 4 * np.sqrt(0.25 / 4000)


def test_measure_photon_collapse():
    rng = np.random.default_rng(0)
    joint = emit_initial(ket(2, 0))
    outcome, atom = measure_photon(joint, MeasBasis.z(), rng)
    target = Sublevel(1, 1) if outcome == 1 else Sublevel(1, -1)
    assert atom.population(target) == pytest.approx(1.0)


def test_unnormalized_kets_rejected():
    with pytest.raises(ValueError):
        AtomKet(np.ones(8))
    with pytest.raises(ValueError):
        JointKet(np.zeros(16))
