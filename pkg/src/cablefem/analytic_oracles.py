"""Closed-form references for validating the field solvers.

Nothing here imports the solver modules, so a disagreement between an
oracle and a simulation points at the simulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MU0 = 4e-7 * math.pi
SERIES_LIMIT = 35.0          # |k a| above which the asymptotic form is used


@dataclass(frozen=True)
class OracleResult:
    value: float
    bound: float                 # relative truncation bound
    method: str = "series"
    unit: str = ""
    extra: dict | None = None

    @property
    def asymptotic(self) -> bool:
        return self.method == "asymptotic"


def _series(terms_fn, tol: float, max_terms: int = 400):
    """Sum a series whose terms eventually shrink geometrically.

    Stops once the tail bound ``|t_m| * rho / (1 - rho)`` drops below
    ``tol * |sum|`` (``rho`` is the current term ratio, required < 1/2).
    """
    total = 0j
    prev = None
    for m in range(max_terms):
        t = terms_fn(m)
        total += t
        if prev is not None and prev != 0:
            rho = abs(t / prev)
            if rho < 0.5:
                bound = abs(t) * rho / (1 - rho)
                if bound <= tol * abs(total):
                    return total, bound / abs(total)
        prev = t
    raise ArithmeticError("series did not converge")


def bessel_j0_j1(z: complex, tol: float = 1e-13):
    """J0(z) and J1(z) by their power series, with relative tail bounds."""
    w = -(z * z) / 4.0

    def t0(m, _c=[1 + 0j]):
        if m == 0:
            _c[0] = 1 + 0j
        else:
            _c[0] *= w / (m * m)
        return _c[0]

    def t1(m, _c=[1 + 0j]):
        if m == 0:
            _c[0] = 1 + 0j
        else:
            _c[0] *= w / (m * (m + 1))
        return _c[0]

    j0, b0 = _series(t0, tol)
    s1, b1 = _series(t1, tol)
    return j0, 0.5 * z * s1, max(b0, b1)


def kelvin(x: float, tol: float = 1e-13):
    """ber, bei, ber', bei' at real ``x`` from ber + j*bei = sum (j x^2/4)^m / (m!)^2."""
    w = 1j * x * x / 4.0
    term = 1 + 0j
    val = 1 + 0j
    der = 0j
    m = 0
    while True:
        m += 1
        term *= w / (m * m)
        val += term
        der += (2.0 * m / x) * term if x else 0.0
        if abs(term) <= tol * 1e-3 * max(abs(val), 1e-300) and m > x:
            break
        if m > 500:
            raise ArithmeticError("Kelvin series did not converge")
    return val.real, val.imag, der.real, der.imag


def _hankel_ratio(z: complex, n_terms: int = 12):
    """J0/J1 for large |z| with Im z > 0 (second Hankel function dominates)."""
    def s(nu):
        total, a = 1 + 0j, 1.0
        last = 1.0
        for k in range(1, n_terms + 1):
            a *= (4 * nu * nu - (2 * k - 1) ** 2) / (k * 8.0)
            t = ((-1j) ** k) * a / z ** k
            if abs(t) > last:
                break
            total += t
            last = abs(t)
        return total, last

    s0, e0 = s(0)
    s1, e1 = s(1)
    return -1j * s0 / s1, max(e0, e1)


def internal_impedance_ratio(radius: float, conductivity: float, mu_r: complex, frequency: float):
    """Z_internal / R_dc of a round wire, and the truncation bound and method."""
    if radius <= 0 or conductivity <= 0 or frequency < 0:
        raise ValueError("radius and conductivity must be positive, frequency non-negative")
    if frequency == 0:
        return 1.0 + 0j, 0.0, "series"
    omega = 2 * math.pi * frequency
    ka = np.sqrt(-1j * omega * MU0 * complex(mu_r) * conductivity) * radius
    if ka.imag < 0:
        ka = -ka
    if abs(ka) <= SERIES_LIMIT:
        j0, j1, bound = bessel_j0_j1(ka)
        return complex(0.5 * ka * j0 / j1), bound, "series"
    ratio, bound = _hankel_ratio(ka)
    return complex(0.5 * ka * ratio), bound, "asymptotic"


def round_wire_ac_resistance(radius: float, conductivity: float, mu_r: complex = 1.0,
                             frequency: float = 50.0) -> OracleResult:
    """AC resistance per metre of an isolated round wire (skin effect only)."""
    ratio, bound, method = internal_impedance_ratio(radius, conductivity, mu_r, frequency)
    r_dc = 1.0 / (math.pi * radius * radius * conductivity)
    return OracleResult(r_dc * ratio.real, bound, method, "ohm/m",
                        {"r_dc": r_dc, "ratio": ratio.real, "x_internal": r_dc * ratio.imag})


def ac_resistance_ratio_kelvin(q: float) -> float:
    """R_ac/R_dc for a nonmagnetic wire with ``q = radius / skin_depth`` (Kelvin form)."""
    x = math.sqrt(2.0) * q
    if x == 0:
        return 1.0
    ber, bei, berp, beip = kelvin(x)
    return 0.5 * x * (ber * beip - bei * berp) / (berp * berp + beip * beip)


def dc_resistance(radius: float, resistivity: float) -> float:
    """Ohm per metre of a solid round conductor."""
    return resistivity / (math.pi * radius * radius)


# --- Ampere's law -------------------------------------------------------------------

def ampere_loop_field(currents, positions, loop) -> complex:
    """Circulation of H around a closed polygon for straight line currents.

    Each segment contributes ``I * (subtended angle) / (2*pi)``, which is the
    exact line integral of the line-current field along that segment, so the
    result is the enclosed current (winding-number weighted).
    """
    cur = np.atleast_1d(np.asarray(currents, dtype=complex))
    pos = np.atleast_2d(np.asarray(positions, float))
    poly = np.asarray(loop, float)
    a = poly[None, :, :] - pos[:, None, :]
    b = np.roll(poly, -1, axis=0)[None, :, :] - pos[:, None, :]
    cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    dot = (a * b).sum(axis=-1)
    winding = np.arctan2(cross, dot).sum(axis=1) / (2 * math.pi)
    return complex(np.sum(cur * winding))


def circle_loop(center, radius: float, n: int = 720) -> np.ndarray:
    t = 2 * math.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


# --- sheath circuit model -------------------------------------------------------------

def dirichlet_green(x, c, boundary_radius: float) -> float:
    """Vector potential per ampere at ``x`` of a line current at ``c`` inside a
    grounded circle (A = 0 on ``|x| = boundary_radius``)."""
    x = np.asarray(x, float)
    c = np.asarray(c, float)
    rc = np.hypot(*c)
    if rc == 0:
        return MU0 / (2 * math.pi) * math.log(boundary_radius / np.hypot(*(x - c)))
    img = c * boundary_radius ** 2 / rc ** 2
    return MU0 / (2 * math.pi) * math.log(rc * np.hypot(*(x - img)) / (boundary_radius * np.hypot(*(x - c))))


def _regular_part(c, boundary_radius: float) -> float:
    rc = np.hypot(*c)
    if rc == 0:
        return MU0 / (2 * math.pi) * math.log(boundary_radius)
    img = np.asarray(c) * boundary_radius ** 2 / rc ** 2
    return MU0 / (2 * math.pi) * math.log(rc * np.hypot(*(np.asarray(c) - img)) / boundary_radius)


def trefoil_inductances(centers, sheath_radius: float, boundary_radius: float):
    """Inductance coefficients (H/m) between conductors and thin sheaths.

    Returns ``(M_sc, M_ss)`` where ``M_sc[j, i]`` is the mean vector potential
    on sheath ``j`` per ampere in conductor ``i``. Uniformly distributed tube
    currents act outside the tube as line currents, and the boundary term is
    harmonic, so circle averages reduce to centre values.
    """
    c = np.asarray(centers, float)
    n = len(c)
    m_sc = np.empty((n, n))
    m_ss = np.empty((n, n))
    for j in range(n):
        for i in range(n):
            if i == j:
                own = MU0 / (2 * math.pi) * -math.log(sheath_radius) + _regular_part(c[i], boundary_radius)
                m_sc[j, i] = own
                m_ss[j, i] = own
            else:
                g = dirichlet_green(c[j], c[i], boundary_radius)
                m_sc[j, i] = g
                m_ss[j, i] = g
    return m_sc, m_ss


def sheath_circuit_model(centers, sheath_radius: float, sheath_thickness: float,
                         sheath_resistivity: float, phase_currents, frequency: float,
                         boundary_radius: float) -> OracleResult:
    """Solid-bonded sheath currents of an untwisted cable without armor.

    Thin-tube sheaths with uniform current; each sheath satisfies
    ``R_s * I_s + j*omega*<A>_sheath = 0``.
    """
    omega = 2 * math.pi * frequency
    area = 2 * math.pi * sheath_radius * sheath_thickness
    r_s = sheath_resistivity / area
    m_sc, m_ss = trefoil_inductances(centers, sheath_radius, boundary_radius)
    ic = np.asarray(phase_currents, dtype=complex)
    z = r_s * np.eye(len(ic)) + 1j * omega * m_ss
    i_s = np.linalg.solve(z, -1j * omega * m_sc @ ic)
    thin = sheath_thickness / sheath_radius
    warnings = ["sheath thickness exceeds 10% of its radius"] if thin > 0.1 else []
    p_sheath = 0.5 * r_s * float(np.sum(np.abs(i_s) ** 2))
    return OracleResult(float(np.max(np.abs(i_s))), 0.0, "circuit", "A",
                        {"currents": i_s, "sheath_loss": p_sheath, "warnings": warnings,
                         "r_sheath": r_s})


def shorted_loop_currents(impedance: np.ndarray, driven: np.ndarray, currents) -> np.ndarray:
    """Currents in shorted loops from a full impedance matrix.

    ``impedance`` is the (driven + loop) square matrix of self/mutual
    impedances per metre; ``driven`` flags the rows whose currents are
    imposed. The remaining loops satisfy ``sum_j Z_kj I_j = 0``.
    """
    z = np.asarray(impedance, dtype=complex)
    d = np.asarray(driven, bool)
    i_d = np.asarray(currents, dtype=complex)
    loops = ~d
    return np.linalg.solve(z[np.ix_(loops, loops)], -z[np.ix_(loops, d)] @ i_d)
