"""1-dof needle-tissue-fixture physics.

Coordinate convention: z increases with insertion depth. The needle is a
kinematic god-object driven by the scaled hand position; the tissue surface
is a lumped mass-spring-damper that is free, slaved to the needle, or
viscously coupled to it depending on the contact phase.

Forces on the needle:
  no contact               F_h = 0
  contact, no penetration  F_h = -K_t (z_t - z_rest) - B_t v_t   (surface slaved)
  penetration              F_h = -V_t (v_t - v_n)
  fixture (one sided)      F_vf = -K_vf (z_n - z_vf)  for z_n >= z_vf, else 0

The linear surface ODEs are advanced with their exact zero-order-hold
discretization (matrix exponential precomputed per parameter set), so the
free response matches the closed-form solution to machine precision at any
stable step size.
"""

from __future__ import annotations

import enum
import math
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm

from .params import TissueParams


class NonFiniteStateError(ArithmeticError):
    """Integration produced a non-finite surface state."""


class ContactPhase(enum.Enum):
    NO_CONTACT = "NoContact"
    CONTACT_NO_PENETRATION = "ContactNoPenetration"
    PENETRATION = "Penetration"


# Legal phase transitions (self-loops implied).
LEGAL_TRANSITIONS = {
    (ContactPhase.NO_CONTACT, ContactPhase.CONTACT_NO_PENETRATION),
    (ContactPhase.CONTACT_NO_PENETRATION, ContactPhase.NO_CONTACT),
    (ContactPhase.CONTACT_NO_PENETRATION, ContactPhase.PENETRATION),
    (ContactPhase.PENETRATION, ContactPhase.NO_CONTACT),
}


class NeedleState(NamedTuple):
    z_n: float  # m
    v_n: float  # m/s


class TissueState(NamedTuple):
    z_t: float  # surface position, m
    v_t: float  # surface velocity, m/s
    phase: ContactPhase
    fixture_contact: bool


def initial_state(params: TissueParams) -> TissueState:
    return TissueState(params.z_t_rest, 0.0, ContactPhase.NO_CONTACT, False)


def slaved_contact_force(z_n: float, v_n: float, params: TissueParams) -> float:
    """Contact force with the surface kinematically slaved to the needle."""
    return -params.k_t * (z_n - params.z_t_rest) - params.b_t * v_n


def fixture_force(z_n: float, params: TissueParams, z_vf: float | None = None) -> float:
    """One-sided forbidden-region barrier; continuous and zero below z_vf."""
    depth = params.z_vf if z_vf is None else z_vf
    if z_n >= depth:
        return -params.k_vf * (z_n - depth)
    return 0.0


def classify_phase(state: TissueState, needle: NeedleState, params: TissueParams) -> ContactPhase:
    """Phase that the dynamics should use for the upcoming step.

    Contact engages when the needle reaches the free surface. During contact
    the coupling must stay compressive (F_h <= 0, pushing the needle out);
    a tensile slaved force releases the surface. Penetration fires once
    |F_h| exceeds the threshold and persists until full retraction behind
    the surface.
    """
    if state.phase is ContactPhase.NO_CONTACT:
        if needle.z_n >= state.z_t:
            return ContactPhase.CONTACT_NO_PENETRATION
        return ContactPhase.NO_CONTACT
    if state.phase is ContactPhase.CONTACT_NO_PENETRATION:
        f_h = slaved_contact_force(needle.z_n, needle.v_n, params)
        if f_h > 0.0:
            return ContactPhase.NO_CONTACT
        if abs(f_h) > params.f_p:
            return ContactPhase.PENETRATION
        return ContactPhase.CONTACT_NO_PENETRATION
    # Penetration
    if needle.z_n < state.z_t:
        return ContactPhase.NO_CONTACT
    return ContactPhase.PENETRATION


def _zoh(a: np.ndarray, b: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    phi = expm(a * dt)
    gamma = np.linalg.solve(a, (phi - np.eye(2)) @ b)
    return phi, gamma


class TissueModel:
    """Immutable stepper for one parameter set and step size.

    The state-transition matrices are precomputed; ``step`` is a pure
    function of its inputs and costs a handful of scalar operations.
    """

    def __init__(self, params: TissueParams, dt: float):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if dt > 0.002:
            raise ValueError("dt above 2 ms is outside the validated stability margin")
        params.validate()
        self.params = params
        self.dt = dt

        m, k, b, v = params.m_t, params.k_t, params.b_t, params.v_t
        a_free = np.array([[0.0, 1.0], [-k / m, -b / m]])
        a_pen = np.array([[0.0, 1.0], [-k / m, -(b + v) / m]])
        b_pen = np.array([0.0, v / m])
        phi_f, _ = _zoh(a_free, b_pen, dt)
        phi_p, gam_p = _zoh(a_pen, b_pen, dt)
        # Unrolled to scalars: the loop runs at 1 kHz in pure Python.
        self._f11, self._f12 = phi_f[0, 0], phi_f[0, 1]
        self._f21, self._f22 = phi_f[1, 0], phi_f[1, 1]
        self._p11, self._p12 = phi_p[0, 0], phi_p[0, 1]
        self._p21, self._p22 = phi_p[1, 0], phi_p[1, 1]
        self._g1, self._g2 = gam_p[0], gam_p[1]

    def step(
        self,
        state: TissueState,
        needle: NeedleState,
        z_vf: float | None = None,
    ) -> tuple[TissueState, float, float]:
        """Advance one step; returns (new state, F_h, F_vf)."""
        p = self.params
        phase = classify_phase(state, needle, p)

        if phase is ContactPhase.NO_CONTACT:
            x = state.z_t - p.z_t_rest
            z_t = p.z_t_rest + self._f11 * x + self._f12 * state.v_t
            v_t = self._f21 * x + self._f22 * state.v_t
            f_h = 0.0
        elif phase is ContactPhase.CONTACT_NO_PENETRATION:
            z_t, v_t = needle.z_n, needle.v_n
            f_h = -p.k_t * (z_t - p.z_t_rest) - p.b_t * v_t
        else:
            x = state.z_t - p.z_t_rest
            z_t = p.z_t_rest + self._p11 * x + self._p12 * state.v_t + self._g1 * needle.v_n
            v_t = self._p21 * x + self._p22 * state.v_t + self._g2 * needle.v_n
            f_h = -p.v_t * (v_t - needle.v_n)

        if not (math.isfinite(z_t) and math.isfinite(v_t)):
            raise NonFiniteStateError(f"surface state diverged: z_t={z_t!r} v_t={v_t!r}")

        f_vf = fixture_force(needle.z_n, p, z_vf)
        depth = p.z_vf if z_vf is None else z_vf
        new_state = TissueState(z_t, v_t, phase, needle.z_n >= depth)
        return new_state, f_h, f_vf


