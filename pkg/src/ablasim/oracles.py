"""Independent reference solutions for verifying the FEM solvers.

Three mechanisms, deliberately disjoint from the FEM code paths:

* a Fourier-series solution of the 1D slab conduction problem with fixed end
  temperatures and a uniform source (closed-form coefficients, explicit tail
  bound),
* a fine-grid explicit finite-difference solution of the 1D single-relaxation
  (telegraph) heat equation, which degenerates to forward-time central-space
  diffusion at tau = 0, and
* a sympy-driven manufactured-solution generator that turns a chosen exact
  field into the forcing and boundary data that make it solve the PDE.

A small structured strip mesher lives here too: the 1D comparisons and the
convergence studies need simple axisymmetric rectangles with controlled
tagging, which the production mesher deliberately does not produce.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import BoundaryTag, Region
from .mesh import Mesh


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class Oracle1DConfig:
    """Slab problem on x in [0, length].

    Boundary data: fixed end temperatures (Dirichlet) or insulated ends
    (Neumann), a uniform volumetric source, and a uniform initial state.
    nx is the finite-difference resolution; the series oracle shares the
    x grid for comparability.
    """

    length: float
    rho: float
    c: float
    k: float
    tau: float = 0.0
    t_initial: float = 37.0
    left: tuple = ("dirichlet", 37.0)
    right: tuple = ("dirichlet", 37.0)
    source: float = 0.0  # W/m^3, uniform
    nx: int = 400
    cfl: float = 0.8

    def validate(self):
        if not (self.length > 0 and self.rho > 0 and self.c > 0 and self.k > 0):
            raise OracleError("length and material constants must be positive")
        if self.tau < 0:
            raise OracleError("tau must be non-negative")
        if self.nx < 8:
            raise OracleError("nx too small")
        for side in (self.left, self.right):
            if side[0] not in ("dirichlet", "neumann"):
                raise OracleError(f"unknown boundary kind {side[0]!r}")
        if not (0 < self.cfl <= 0.95):
            raise OracleError("cfl must lie in (0, 0.95]")

    @property
    def alpha(self) -> float:
        return self.k / (self.rho * self.c)


def oracle_be_1d(cfg: Oracle1DConfig, times, tail_tol: float = 1e-9):
    """Analytic Fourier-series solution of the parabolic slab problem.

    Requires Dirichlet ends (the classical sine series).  Returns (x, T) with
    T of shape (len(times), nx + 1).  The series is truncated once the
    geometric tail bound drops below tail_tol at the smallest requested time.
    """
    cfg.validate()
    if cfg.left[0] != "dirichlet" or cfg.right[0] != "dirichlet":
        raise OracleError("series oracle requires Dirichlet ends")
    times = np.asarray(times, dtype=float)
    if np.any(times <= 0.0):
        raise OracleError("series oracle needs strictly positive times")
    L = cfg.length
    Ta = float(cfg.left[1])
    Tb = float(cfg.right[1])
    T0 = cfg.t_initial
    q = cfg.source
    al = cfg.alpha
    x = np.linspace(0.0, L, cfg.nx + 1)

    # steady part: -k T'' = q with the fixed ends
    steady = Ta + (Tb - Ta) * x / L + q * x * (L - x) / (2.0 * cfg.k)

    # transient coefficients: B_n of (T0 - steady) in the sine basis
    def coeff(n: int) -> float:
        sgn = -1.0 if n % 2 else 1.0  # (-1)^n
        odd = 0.0 if n % 2 == 0 else 1.0
        b = 2.0 * (T0 - Ta) * (1.0 - sgn) / (n * math.pi)
        b += 2.0 * (Tb - Ta) * sgn / (n * math.pi)
        b -= (q / cfg.k) * 4.0 * L * L * odd / (n * math.pi) ** 3
        return b

    t_min = float(times.min())
    c_mag = (
        2.0 * abs(T0 - Ta) + 2.0 * abs(Tb - Ta) + 4.0 * abs(q) * L * L / (cfg.k * math.pi**2)
    ) / math.pi + 1e-300
    n_terms = 8
    while True:
        lam = al * (n_terms * math.pi / L) ** 2
        decay = 2.0 * al * n_terms * (math.pi / L) ** 2 * t_min
        tail = (c_mag / n_terms) * math.exp(-lam * t_min) / max(1.0 - math.exp(-decay), 1e-16)
        if tail < tail_tol:
            break
        n_terms *= 2
        if n_terms > 3_000_000:
            raise OracleError("series does not reach the tail tolerance (time too small)")

    n = np.arange(1, n_terms + 1)
    bn = np.array([coeff(int(m)) for m in n])
    lam = al * (n * math.pi / L) ** 2
    sines = np.sin(np.outer(x, n) * math.pi / L)  # (nx+1, N)
    out = np.empty((len(times), len(x)))
    for it, t in enumerate(times):
        out[it] = steady + sines @ (bn * np.exp(-lam * t))
    return x, out


def oracle_hbe_1d(cfg: Oracle1DConfig, times):
    """Explicit finite-difference solution of tau T_tt + T_t = alpha T_xx + s.

    Central differences in space and time; the time step obeys the hyperbolic
    CFL bound dt = cfl * dx / c with c = sqrt(alpha/tau).  At tau = 0 the
    scheme degenerates to forward-time central-space diffusion with
    dt = cfl * dx^2 / (2 alpha).  Requested times are reached by linear
    interpolation between the two bracketing steps.

    Returns (x, T) like oracle_be_1d.
    """
    cfg.validate()
    times = np.asarray(times, dtype=float)
    if np.any(times < 0.0):
        raise OracleError("times must be non-negative")
    L = cfg.length
    nx = cfg.nx
    dx = L / nx
    al = cfg.alpha
    s = cfg.source / (cfg.rho * cfg.c)
    if cfg.tau > 0.0:
        # von Neumann bound for the damped-wave central scheme: dt <= dx/c
        cspeed = math.sqrt(al / cfg.tau)
        dt = cfg.cfl * dx / cspeed
    else:
        dt = cfg.cfl * 0.5 * dx * dx / al
    t_end = float(times.max())
    n_steps = max(1, int(math.ceil(t_end / dt)))

    x = np.linspace(0.0, L, nx + 1)
    T = np.full(nx + 1, cfg.t_initial)
    _apply_bc(T, cfg)
    out = np.empty((len(times), nx + 1))
    order = np.argsort(times)
    next_out = 0

    lap = np.empty(nx + 1)

    def laplacian(u):
        lap[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (dx * dx)
        lap[0] = lap[-1] = 0.0
        return lap

    t_now = 0.0
    # flux-form start: the heat flux is zero at t = 0, so rho c Tdot(0) = Q
    # and the back level sits at T - dt*Tdot(0).  This is what makes the
    # insulated-rod energy budget track the source input exactly; without a
    # source it is the usual quiescent start.
    T_prev = T - dt * s
    for idx in order:
        if times[idx] == 0.0:
            out[idx] = T
            next_out += 1
    while t_now < t_end - 1e-15:
        if cfg.tau > 0.0:
            # tau (Tn+1 - 2Tn + Tn-1)/dt^2 + (Tn+1 - Tn-1)/(2dt) = al lap + s
            a = cfg.tau / (dt * dt)
            b = 1.0 / (2.0 * dt)
            rhs = al * laplacian(T) + s + a * (2.0 * T - T_prev) + b * T_prev
            T_new = rhs / (a + b)
        else:
            T_new = T + dt * (al * laplacian(T) + s)
        _apply_bc(T_new, cfg)
        T_prev, T = T, T_new
        t_prev_time = t_now
        t_now += dt
        for idx in order[next_out:]:
            tv = times[idx]
            if tv <= t_now + 1e-15 and tv > 0.0:
                w = (tv - t_prev_time) / dt
                out[idx] = (1.0 - w) * T_prev + w * T
                next_out += 1
            else:
                break
    return x, out


def _apply_bc(T: np.ndarray, cfg: Oracle1DConfig):
    if cfg.left[0] == "dirichlet":
        T[0] = cfg.left[1]
    else:
        T[0] = T[1]
    if cfg.right[0] == "dirichlet":
        T[-1] = cfg.right[1]
    else:
        T[-1] = T[-2]


def rod_energy(cfg: Oracle1DConfig, x: np.ndarray, T: np.ndarray) -> float:
    """Trapezoid enthalpy of a 1D profile relative to the initial state."""
    return float(cfg.rho * cfg.c * np.trapezoid(T - cfg.t_initial, x))


def front_position(x: np.ndarray, T: np.ndarray, t_initial: float) -> float:
    """Half-amplitude crossing of a left-driven thermal front.

    The amplitude is the current maximum elevation over the initial state;
    the front is the first crossing of half that level when scanning from
    the right, linearly interpolated.
    """
    dT = T - t_initial
    peak = float(dT.max())
    if peak <= 0.0:
        return 0.0
    half = 0.5 * peak
    above = dT >= half
    if not above.any():
        return 0.0
    i_last = int(np.flatnonzero(above).max())
    if i_last == len(x) - 1:
        return float(x[-1])
    x0, x1 = x[i_last], x[i_last + 1]
    y0, y1 = dT[i_last], dT[i_last + 1]
    return float(x0 + (half - y0) / (y1 - y0) * (x1 - x0))


# ---------------------------------------------------------------------------
# manufactured solutions


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact field, matching source, and initial-rate sampler.

    temperature(r, z, t) and source(r, z, t) are vectorized callables.  In
    hyperbolic mode the source is the effective one, Q + tau dQ/dt, i.e. what
    the weak form consumes directly.
    """

    temperature: object
    source: object
    temperature_rate: object


def manufactured_solution(expr, rho: float, c: float, k: float,
                          tau: float = 0.0, mode: str = "be") -> ManufacturedSolution:
    """Derive the forcing that makes `expr` an exact solution.

    Args:
        expr: sympy expression (or string) in symbols r, z, t.
        rho, c, k: material constants of the single-region problem.
        tau: relaxation time (hyperbolic mode only).
        mode: "be" (parabolic) or "hbe" (hyperbolic, effective source).

    Returns:
        ManufacturedSolution with numpy-vectorized samplers.
    """
    import sympy as sp

    r, z, t = sp.symbols("r z t", real=True)
    T = sp.sympify(expr, locals={"r": r, "z": z, "t": t})
    lap = sp.diff(r * sp.diff(T, r), r) / r + sp.diff(T, z, 2)
    lap = sp.simplify(lap)
    if mode == "be":
        Q = rho * c * sp.diff(T, t) - k * lap
    elif mode == "hbe":
        Q = tau * rho * c * sp.diff(T, t, 2) + rho * c * sp.diff(T, t) - k * lap
    else:
        raise OracleError(f"unknown mode {mode!r}")
    Q = sp.simplify(Q)
    f_T = sp.lambdify((r, z, t), T, "numpy")
    f_Q = sp.lambdify((r, z, t), Q, "numpy")
    f_Tt = sp.lambdify((r, z, t), sp.diff(T, t), "numpy")

    def wrap(f):
        def g(rv, zv, tv):
            rv = np.asarray(rv, dtype=float)
            zv = np.asarray(zv, dtype=float)
            out = f(rv, zv, tv)
            return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(rv, zv).shape).copy()

        return g

    return ManufacturedSolution(
        temperature=wrap(f_T), source=wrap(f_Q), temperature_rate=wrap(f_Tt)
    )


# ---------------------------------------------------------------------------
# structured strip meshes for tests and validation


def build_strip_mesh(
    r0: float,
    r1: float,
    z0: float,
    z1: float,
    nr: int,
    nz: int,
    region: Region = Region.MUSCLE,
    electrode_layers: int = 0,
    tag_sides: dict | None = None,
) -> Mesh:
    """Structured triangulated rectangle [r0, r1] x [z0, z1].

    electrode_layers > 0 marks that many leftmost element columns as
    Electrode region and tags the vertical interface ElectrodeSurface (the
    coaxial benchmark uses this to expose a hot Dirichlet surface).
    tag_sides maps side names ("left", "right", "bottom", "top") to
    BoundaryTag values; unmentioned sides stay untagged (natural).
    """
    if r0 < 0 or r1 <= r0 or z1 <= z0 or nr < 1 or nz < 1:
        raise OracleError("bad strip-mesh parameters")
    if electrode_layers >= nr:
        raise OracleError("electrode_layers must leave room for the main region")
    rs = np.linspace(r0, r1, nr + 1)
    zs = np.linspace(z0, z1, nz + 1)
    nodes = np.empty(((nr + 1) * (nz + 1), 2))
    for j in range(nz + 1):
        for i in range(nr + 1):
            nodes[j * (nr + 1) + i] = (rs[i], zs[j])

    def nid(i, j):
        return j * (nr + 1) + i

    tris = []
    regs = []
    for j in range(nz):
        for i in range(nr):
            a = nid(i, j)
            b = nid(i + 1, j)
            cc = nid(i + 1, j + 1)
            d = nid(i, j + 1)
            reg = Region.ELECTRODE if i < electrode_layers else region
            tris.append((a, b, cc))
            tris.append((a, cc, d))
            regs.extend([int(reg), int(reg)])

    edges = []
    tags = []
    tag_sides = dict(tag_sides or {})
    if "left" in tag_sides:
        for j in range(nz):
            edges.append((nid(0, j), nid(0, j + 1)))
            tags.append(int(tag_sides["left"]))
    if "right" in tag_sides:
        for j in range(nz):
            edges.append((nid(nr, j), nid(nr, j + 1)))
            tags.append(int(tag_sides["right"]))
    if "bottom" in tag_sides:
        for i in range(nr):
            edges.append((nid(i, 0), nid(i + 1, 0)))
            tags.append(int(tag_sides["bottom"]))
    if "top" in tag_sides:
        for i in range(nr):
            edges.append((nid(i, nz), nid(i + 1, nz)))
            tags.append(int(tag_sides["top"]))
    if electrode_layers > 0:
        ie = electrode_layers
        for j in range(nz):
            edges.append((nid(ie, j), nid(ie, j + 1)))
            tags.append(int(BoundaryTag.ELECTRODE_SURFACE))

    edges_arr = (
        np.asarray(edges, dtype=np.int32).reshape(-1, 2)
        if edges
        else np.empty((0, 2), dtype=np.int32)
    )
    edges_arr = np.sort(edges_arr, axis=1)
    mesh = Mesh(
        nodes=nodes,
        triangles=np.asarray(tris, dtype=np.int32),
        tri_region=np.asarray(regs, dtype=np.int8),
        edges=edges_arr,
        edge_tag=np.asarray(tags, dtype=np.int8),
    )
    mesh.validate()
    return mesh
