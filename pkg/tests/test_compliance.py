import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from shapely.geometry import Point, Polygon

from omegaturn.chain import ChainGeometry, link_corners, material_points
from omegaturn.compliance import (AdmittanceParams, AdmittanceState, ContactSet, PegBoard, admittance_step,
                                  amplitude_jacobian, amplitude_shape, detect_contacts, empty_board,
                                  external_torques, nominal_amplitudes, peg_study, random_board,
                                  simulate_compliant, summarize_study)
from omegaturn.designs import frozen_design
from omegaturn.drag import FrictionModel
from omegaturn.gaits import two_wave_shape
from omegaturn.simulate import integrate_gait

GEOM = ChainGeometry()
MODEL = FrictionModel()
OMEGA = frozen_design(8, 1.0)
P = AdmittanceParams()


def world_rects(pose, theta):
    corners = link_corners(theta, GEOM)
    c, s = np.cos(pose[2]), np.sin(pose[2])
    rot = np.array([[c, -s], [s, c]])
    return [Polygon(k @ rot.T + pose[:2]) for k in corners]


def test_board_lattice_spacing():
    board = PegBoard(0.3)
    pts = board.centers()
    d = np.hypot(*(pts[:, None] - pts[None]).transpose(2, 0, 1))
    np.fill_diagonal(d, np.inf)
    assert np.allclose(d.min(axis=1), board.pitch)
    with pytest.raises(ValueError):
        PegBoard(0.01)


def test_random_board_offsets_are_seeded():
    a, b = random_board(0.45, 3), random_board(0.45, 3)
    assert a.origin == b.origin != random_board(0.45, 4).origin


def test_far_body_has_no_contacts():
    assert len(detect_contacts((0, 0, 0), np.zeros(8), GEOM, empty_board())) == 0


def test_constructed_edge_contact():
    # straight body along x; one peg whose disc overlaps the top edge of the middle link by delta
    delta, r = 0.004, 0.0125
    board = PegBoard(1.0, peg_radius=r)
    peg = np.array([[0.0, 0.5 * GEOM.link_width + r - delta]])
    c = detect_contacts((0, 0, 0), np.zeros(8), GEOM, board, peg)
    assert len(c) == 1 and c.link[0] == 4
    assert np.isclose(c.depth[0], delta)
    assert np.allclose(c.normal[0], [0, -1])


def test_contacts_match_sampling_oracle(rng):
    board = PegBoard(0.3)
    pegs = board.centers()
    for _ in range(30):
        theta = rng.uniform(-1, 1, 8)
        pose = np.r_[rng.uniform(-0.2, 0.2, 2), rng.uniform(-np.pi, np.pi)]
        got = detect_contacts(pose, theta, GEOM, board, pegs)
        rects = world_rects(pose, theta)
        want = set()
        for pi, q in enumerate(pegs):
            disc = Point(q).buffer(board.peg_radius, 64)
            for li, rect in enumerate(rects):
                if disc.intersection(rect).area > 1e-9:
                    want.add(li)
        have = set(int(x) for x in got.link)
        assert have == want
        assert np.all(got.depth > 0) and np.allclose(np.linalg.norm(got.normal, axis=1), 1.0)


def test_torques_match_virtual_work(rng):
    theta = rng.uniform(-0.8, 0.8, 8)
    contacts = ContactSet(np.array([0, 5]), np.zeros((2, 2)), np.array([[0.6, 0.8], [-1.0, 0.0]]),
                          np.array([0.003, 0.001]), np.array([[0.01, 0.02], [-0.03, -0.025]]))
    tau = external_torques(contacts, 50.0, theta, GEOM)
    f = 50.0 * contacts.depth[:, None] * contacts.normal
    h = 1e-6
    fd = np.empty(8)
    for j in range(8):
        e = np.zeros(8)
        e[j] = h
        p1, _ = material_points(theta + e, np.zeros(8), GEOM, contacts.link, contacts.local)
        p0, _ = material_points(theta - e, np.zeros(8), GEOM, contacts.link, contacts.local)
        fd[j] = np.sum(f * (p1 - p0) / (2 * h))
    assert np.allclose(tau, fd, atol=1e-8)
    assert np.allclose(external_torques(contacts, 100.0, theta, GEOM), 2 * tau)
    assert np.all(external_torques(ContactSet(), 50.0, theta, GEOM) == 0)


def test_amplitude_shape_reproduces_profiles():
    t = np.linspace(0, 10, 9)
    A = nominal_amplitudes(t, OMEGA)
    assert np.allclose(amplitude_shape(t, A, OMEGA, 8), two_wave_shape(t, OMEGA, 8), atol=1e-12)


def test_equilibrium_is_held():
    s = AdmittanceState(np.array(P.A0), np.zeros(2))
    out = admittance_step(s, np.zeros(8), P, 1.0, OMEGA, 8)
    assert np.array_equal(out.A, s.A) and np.array_equal(out.A_dot, s.A_dot)


def test_constant_torque_steady_state_without_overshoot():
    tau = np.linspace(-0.05, 0.08, 8)
    t = 2.0
    J = amplitude_jacobian(t, OMEGA, 8)
    target = np.array(P.A0) + (J @ tau) / np.array(P.K)
    s = AdmittanceState(np.array(P.A0), np.zeros(2))
    hist = []
    for _ in range(2000):
        s = admittance_step(s, tau, P, t, OMEGA, 8)
        hist.append(s.A.copy())
    hist = np.array(hist)
    assert np.allclose(hist[-1], target, atol=1e-3)
    dist = np.abs(hist - target)
    assert np.all(np.diff(dist, axis=0) <= 1e-12)
    assert np.allclose(P.damping_ratio, np.sqrt(2))


@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-1, 1), st.floats(-1, 1))
def test_energy_decays_without_torque(d1, d2, v1, v2):
    s = AdmittanceState(np.array(P.A0) + [d1, d2], np.array([v1, v2]))
    e = s.energy(P)
    for k in range(200):
        s = admittance_step(s, np.zeros(8), P, 0.1 * k, OMEGA, 8, bounds=(-10, 10))
        e_new = s.energy(P)
        assert e_new <= e + 1e-6
        e = e_new


def test_impulse_response_matches_fine_step_oracle():
    p = AdmittanceParams(control_dt=1e-4)
    M, B, K = (np.array(x) for x in (p.M, p.B, p.K))
    A0 = np.array(p.A0)
    v0 = np.array([0.5, -0.3])
    s = AdmittanceState(A0.copy(), v0.copy())
    steps = 20000
    for _ in range(steps):
        s = admittance_step(s, np.zeros(8), p, 0.0, OMEGA, 8)
    sol = solve_ivp(lambda _, y: np.r_[y[2:], -(B * y[2:] + K * (y[:2] - A0)) / M], (0, steps * p.control_dt),
                    np.r_[A0, v0], rtol=1e-11, atol=1e-12)
    assert np.allclose(s.A, sol.y[:2, -1], atol=1e-4)


def test_clamp_keeps_amplitudes_in_range():
    s = AdmittanceState(np.array([1.5, 0.05]), np.array([5.0, -5.0]))
    for _ in range(50):
        s = admittance_step(s, np.full(8, 3.0), P, 0.7, OMEGA, 8)
        assert np.all(s.A >= 0) and np.all(s.A <= OMEGA.theta_max)


def test_empty_board_matches_open_loop():
    run = simulate_compliant(OMEGA, empty_board(), P, GEOM, MODEL, cycles=1)
    ref = integrate_gait(OMEGA, GEOM, MODEL, 400, 1)
    assert abs(run.metrics.angular_displacement - np.degrees(ref.poses[-1, 2])) < 0.5
    assert np.allclose(run.amplitudes, nominal_amplitudes(run.trajectory.t, OMEGA))
    assert run.contact_counts.sum() == 0


def test_open_loop_keeps_profile_amplitudes_among_pegs():
    board = random_board(0.45, 1)
    run = simulate_compliant(OMEGA, board, P, GEOM, MODEL, cycles=1, compliant=False)
    assert run.contact_counts.sum() > 0
    assert np.allclose(run.amplitudes, nominal_amplitudes(run.trajectory.t, OMEGA))
    comp = simulate_compliant(OMEGA, board, P, GEOM, MODEL, cycles=1, compliant=True)
    assert not np.allclose(comp.amplitudes, run.amplitudes)
    assert np.all(comp.amplitudes <= OMEGA.theta_max + 1e-12)


def test_study_rows_and_summary():
    rows = peg_study(OMEGA, [0.6], 2, P, GEOM, MODEL, cycles=1)
    assert len(rows) == 4
    (s,) = summarize_study(rows)
    assert s["spacing"] == 0.6 and np.isfinite(s["ratio"])


def test_params_validation():
    with pytest.raises(ValueError):
        AdmittanceParams(M=(0.0, 1.0))
    with pytest.raises(ValueError):
        AdmittanceParams(control_dt=0)
    with pytest.raises(ValueError):
        simulate_compliant(OMEGA, empty_board(), AdmittanceParams(control_dt=0.3), GEOM, MODEL)
