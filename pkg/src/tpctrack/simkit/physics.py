"""Charged-particle transport: Lorentz force, Bethe stopping power, RK4 tracking.

Momenta are carried in MeV/c and kinetic energies in MeV; positions in
meters. Forces returned by lorentz_acceleration are in SI newtons. The
inner RK4 loop runs on plain floats: per-step numpy overhead dominates the
arithmetic for states this small.

The static drift field acts on the drifting electrons, not on the MeV-scale
primary ion (its work over a full track is orders of magnitude below the
ionization loss), so track propagation applies the magnetic force only.
This keeps the deposited-energy bookkeeping identity exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from ..detector import DetectorSpec, GasSpec

C_LIGHT = 299792458.0            # m/s
Q_E = 1.602176634e-19            # C
MEV_C_SI = 1.0e6 * Q_E / C_LIGHT  # kg m/s per MeV/c
ELECTRON_MASS_MEV = 0.51099895
K_BETHE = 0.307075               # MeV cm^2 / mol, 4*pi*N_A*r_e^2*m_e*c^2
PROTON_MASS_MEV = 938.27208816
CARBON12_MASS_MEV = 11174.863    # 12 u minus 6 electron masses


@dataclass(frozen=True)
class Species:
    name: str
    mass: float            # MeV/c^2
    charge_number: int
    mass_number: int

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("species mass must be positive")
        if self.charge_number < 1:
            raise ValueError("charge_number must be >= 1")


PROTON = Species("proton", PROTON_MASS_MEV, 1, 1)
CARBON = Species("carbon", CARBON12_MASS_MEV, 6, 12)

SPECIES = {"proton": PROTON, "carbon": CARBON}


@dataclass(frozen=True)
class ParticleState:
    """Kinematic state; energy-momentum consistency is enforced on build."""

    position: Tuple[float, float, float]   # m
    momentum: Tuple[float, float, float]   # MeV/c
    kinetic_energy: float                  # MeV
    species: Species

    def __post_init__(self):
        if self.kinetic_energy < 0:
            raise ValueError("kinetic energy must be non-negative")
        m = self.species.mass
        p2 = sum(c * c for c in self.momentum)
        e_tot = self.kinetic_energy + m
        if abs(e_tot * e_tot - (p2 + m * m)) > 1e-9 * e_tot * e_tot:
            raise ValueError("energy-momentum relation violated")


def momentum_from_kinetic(kinetic_energy: float, mass: float) -> float:
    """|p| in MeV/c for a particle of given kinetic energy and mass (MeV)."""
    return math.sqrt(kinetic_energy * (kinetic_energy + 2.0 * mass))


def make_state(
    species: Species,
    position_m: Sequence[float],
    direction: Sequence[float],
    kinetic_energy: float,
) -> ParticleState:
    """State with momentum of the right magnitude along a unit direction."""
    norm = math.sqrt(sum(c * c for c in direction))
    if norm == 0:
        raise ValueError("direction must be non-zero")
    p = momentum_from_kinetic(kinetic_energy, species.mass)
    mom = tuple(p * c / norm for c in direction)
    return ParticleState(tuple(position_m), mom, kinetic_energy, species)


def velocity_m_per_s(state: ParticleState) -> Tuple[float, float, float]:
    """Relativistic velocity v = p c^2 / E_total."""
    m = state.species.mass
    px, py, pz = state.momentum
    e_tot = math.sqrt(px * px + py * py + pz * pz + m * m)
    return (px / e_tot * C_LIGHT, py / e_tot * C_LIGHT, pz / e_tot * C_LIGHT)


def lorentz_acceleration(
    state: ParticleState,
    e_field: Sequence[float],
    b_field: Sequence[float],
) -> Tuple[float, float, float]:
    """Force F = q (E + v x B) in newtons, v derived from the state's momentum."""
    q = state.species.charge_number * Q_E
    vx, vy, vz = velocity_m_per_s(state)
    ex, ey, ez = e_field
    bx, by, bz = b_field
    fx = q * (ex + vy * bz - vz * by)
    fy = q * (ey + vz * bx - vx * bz)
    fz = q * (ez + vx * by - vy * bx)
    return (fx, fy, fz)


def stopping_power(
    species: Species, kinetic_energy: float, gas: GasSpec
) -> Optional[float]:
    """Bethe mean energy loss in MeV/mm, or None below the formula's validity.

    dE/dx = K z^2 (Z/A) rho / beta^2 * [ln(2 m_e c^2 beta^2 gamma^2 / I) - beta^2]

    None signals "particle effectively stopped" to the integrator; it is not
    an error. This happens when the logarithm's argument drops to <= 1.
    """
    if kinetic_energy <= 0:
        return None
    m = species.mass
    gamma = 1.0 + kinetic_energy / m
    beta2 = 1.0 - 1.0 / (gamma * gamma)
    i_mev = gas.mean_excitation_energy * 1e-6
    arg = 2.0 * ELECTRON_MASS_MEV * beta2 * gamma * gamma / i_mev
    if arg <= 1.0:
        return None
    bracket = math.log(arg) - beta2
    if bracket <= 0.0:
        return None
    z2 = species.charge_number * species.charge_number
    de_dx_cm = K_BETHE * z2 * gas.z_over_a * gas.density / beta2 * bracket
    return de_dx_cm / 10.0  # MeV/mm


@dataclass
class Trajectory:
    """RK4 track: per-step positions (m) and energies deposited on each step.

    positions[0] is the starting point with deposit 0. exit_energy is the
    kinetic energy left when the track ended (below cutoff or on exit).
    """

    positions: List[Tuple[float, float, float]] = field(default_factory=list)
    deposits: List[float] = field(default_factory=list)
    initial_energy: float = 0.0
    exit_energy: float = 0.0
    termination: str = ""       # stopped | exited | max_steps
    n_steps: int = 0

    @property
    def total_deposited(self) -> float:
        return sum(self.deposits)


def propagate_track(
    initial: ParticleState,
    detector: DetectorSpec,
    step_s: float = 1e-10,
    energy_cutoff_mev: float = 0.05,
    max_steps: int = 40000,
    energy_loss: bool = True,
) -> Trajectory:
    """Fixed-step RK4 under the magnetic force with Bethe energy loss.

    Deterministic. Terminates when the particle leaves the chamber, its
    kinetic energy falls below the cutoff (or the Bethe formula loses
    validity), or max_steps is exceeded (flagged via termination).
    """
    x, y, z = initial.position
    if not _inside(x, y, z, detector):
        raise ValueError("initial position must be inside the chamber")

    species = initial.species
    mass = species.mass
    gas = detector.gas
    # dp/dt in MeV/c per second: q v x B / (SI momentum per MeV/c)
    k_force = species.charge_number * Q_E / MEV_C_SI
    bz = detector.b_field
    dt = step_s

    px, py, pz = initial.momentum
    e_kin = initial.kinetic_energy

    traj = Trajectory(initial_energy=e_kin)
    traj.positions.append((x, y, z))
    traj.deposits.append(0.0)

    # derivative: dr/dt = p c / |E|, dp/dt = k (v x B), B = (0,0,bz)
    mass2 = mass * mass
    kb = k_force * bz

    def deriv(xpx, xpy, xpz):
        e_tot = math.sqrt(xpx * xpx + xpy * xpy + xpz * xpz + mass2)
        inv = C_LIGHT / e_tot
        vx = xpx * inv
        vy = xpy * inv
        vz = xpz * inv
        return vx, vy, vz, kb * vy, -kb * vx, 0.0

    steps = 0
    termination = "max_steps"
    if energy_loss and e_kin <= energy_cutoff_mev:
        termination = "stopped"
        max_steps = 0
    while steps < max_steps:
        dx1, dy1, dz1, dpx1, dpy1, dpz1 = deriv(px, py, pz)
        dx2, dy2, dz2, dpx2, dpy2, dpz2 = deriv(
            px + 0.5 * dt * dpx1, py + 0.5 * dt * dpy1, pz + 0.5 * dt * dpz1
        )
        dx3, dy3, dz3, dpx3, dpy3, dpz3 = deriv(
            px + 0.5 * dt * dpx2, py + 0.5 * dt * dpy2, pz + 0.5 * dt * dpz2
        )
        dx4, dy4, dz4, dpx4, dpy4, dpz4 = deriv(
            px + dt * dpx3, py + dt * dpy3, pz + dt * dpz3
        )
        nx = x + dt / 6.0 * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4)
        ny = y + dt / 6.0 * (dy1 + 2.0 * dy2 + 2.0 * dy3 + dy4)
        nz = z + dt / 6.0 * (dz1 + 2.0 * dz2 + 2.0 * dz3 + dz4)
        npx = px + dt / 6.0 * (dpx1 + 2.0 * dpx2 + 2.0 * dpx3 + dpx4)
        npy = py + dt / 6.0 * (dpy1 + 2.0 * dpy2 + 2.0 * dpy3 + dpy4)
        npz = pz + dt / 6.0 * (dpz1 + 2.0 * dpz2 + 2.0 * dpz3 + dpz4)

        if not _inside(nx, ny, nz, detector):
            termination = "exited"
            break

        deposit = 0.0
        if energy_loss:
            ds_mm = (
                math.sqrt((nx - x) ** 2 + (ny - y) ** 2 + (nz - z) ** 2) * 1000.0
            )
            sp = stopping_power(species, e_kin, gas)
            if sp is None:
                termination = "stopped"
                break
            deposit = sp * ds_mm
            if deposit >= e_kin - energy_cutoff_mev:
                # ranges out inside this step: deposit down to the cutoff
                deposit = e_kin - energy_cutoff_mev
                e_kin = energy_cutoff_mev
                x, y, z = nx, ny, nz
                traj.positions.append((nx, ny, nz))
                traj.deposits.append(deposit)
                steps += 1
                termination = "stopped"
                break
            e_kin -= deposit
            scale = momentum_from_kinetic(e_kin, mass) / math.sqrt(
                npx * npx + npy * npy + npz * npz
            )
            npx *= scale
            npy *= scale
            npz *= scale

        x, y, z, px, py, pz = nx, ny, nz, npx, npy, npz
        traj.positions.append((nx, ny, nz))
        traj.deposits.append(deposit)
        steps += 1
        if e_kin <= energy_cutoff_mev:
            termination = "stopped"
            break

    traj.exit_energy = e_kin
    traj.termination = termination
    traj.n_steps = steps
    return traj


def _inside(x: float, y: float, z: float, detector: DetectorSpec) -> bool:
    r = detector.radius
    return (x * x + y * y) <= r * r and 0.0 <= z <= detector.length_z
