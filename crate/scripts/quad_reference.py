#!/usr/bin/env python3
"""Reference evaluation of the MAS quadrupole coefficients.

Computes the first- and second-order secular quadrupole coefficients
(w1, w21, w22) for a single crystallite by rotating the Cartesian EFG
tensor with plain 3x3 rotation matrices — deliberately avoiding the
Wigner-matrix route used by the Rust implementation, so the two can be
compared as independent calculations.

Conventions (must match crates/mqpulse/src/hamiltonian.rs):
  * Euler angles (alpha, beta, gamma): R = Rz(alpha) @ Ry(beta) @ Rz(gamma)
    maps principal-axis-frame coordinates to rotor-frame coordinates.
  * Rotor tilted at the magic angle; lab coordinates of a rotor-fixed
    vector are Ry(theta_m) @ Rz(omega_r t) @ v.
  * omega_q = 2 pi 3 C_Q / (2I (2I-1)); second order carries 1/omega_0.

Usage:
    python3 scripts/quad_reference.py

Prints the golden values asserted in the hamiltonian unit tests.
"""

import numpy as np

MAGIC_ANGLE = np.arccos(1.0 / np.sqrt(3.0))


def rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def ry(b):
    c, s = np.cos(b), np.sin(b)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def quad_frequencies(cq_hz, eta, spin, larmor_hz, rotor_hz, alpha, beta, gamma, t):
    # Traceless EFG tensor in its principal frame, normalized to V_zz = 1.
    v_pas = np.diag([-(1.0 - eta) / 2.0, -(1.0 + eta) / 2.0, 1.0])

    r_pr = rz(alpha) @ ry(beta) @ rz(gamma)
    v_rot = r_pr @ v_pas @ r_pr.T

    phi = 2.0 * np.pi * rotor_hz * t
    r_rl = ry(MAGIC_ANGLE) @ rz(phi)
    v_lab = r_rl @ v_rot @ r_rl.T

    # Rank-2 spherical components of a symmetric traceless tensor.
    v0 = np.sqrt(1.5) * v_lab[2, 2]
    v1 = -(v_lab[0, 2] + 1j * v_lab[1, 2])
    v2 = (v_lab[0, 0] - v_lab[1, 1]) / 2.0 + 1j * v_lab[0, 1]

    two_i = 2.0 * spin
    omega_q = 2.0 * np.pi * 3.0 * cq_hz / (two_i * (two_i - 1.0))
    c = omega_q / 3.0
    omega0 = 2.0 * np.pi * larmor_hz

    w1 = c / np.sqrt(6.0) * np.real(v0)
    second = c * c / (2.0 * omega0)
    w21 = -second * abs(v1) ** 2
    w22 = second * abs(v2) ** 2
    return w1, w21, w22


def main():
    cases = [
        # (alpha, beta, gamma, t)
        (0.3, 1.1, 2.0, 0.0),
        (0.3, 1.1, 2.0, 7.3e-6),
    ]
    for alpha, beta, gamma, t in cases:
        w1, w21, w22 = quad_frequencies(
            cq_hz=3.2e6,
            eta=0.2,
            spin=1.5,
            larmor_hz=130.9e6,
            rotor_hz=30e3,
            alpha=alpha,
            beta=beta,
            gamma=gamma,
            t=t,
        )
        print(f"alpha={alpha} beta={beta} gamma={gamma} t={t}")
        print(f"  w1  = {w1:.16e}")
        print(f"  w21 = {w21:.16e}")
        print(f"  w22 = {w22:.16e}")


if __name__ == "__main__":
    main()
