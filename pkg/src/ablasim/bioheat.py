"""Transient thermal stepping: parabolic everywhere, or hyperbolic in muscle.

The parabolic path advances (M/dt + K + R) T_{n+1} = M/dt T_n + F by implicit
Euler.  The hyperbolic path adds the relaxation term tau rho c d2T/dt2 on
Muscle elements only (blood and electrode stay parabolic), discretized with
backward differences in time on the same implicit template:

    tau C (T_{n+1} - 2 T_n + T_{n-1})/dt^2 + C (T_{n+1} - T_n)/dt
        + (K + R) T_{n+1} = F

which is unconditionally stable and degenerates bit-for-bit to the parabolic
update at tau = 0 (every tau-weighted term is skipped, so the assembled
system and right-hand sides are the same floating-point objects).  The
tau dQ/dt contribution of a source switched on at t = 0 enters as the
backward-difference impulse (tau/dt) F_Q on the first step only.

Blood-facing interface nodes are duplicated so temperature may jump across
the electrode-blood and muscle-blood surfaces: dof i < n_nodes carries the
solid side (and every ordinary node), appended dofs carry the blood side.
The two sides exchange heat through contact-conductance films
h (T_solid - T_blood) assembled from the interface edges; ratio 0 makes the
interfaces adiabatic.  The alternative "robin_fixed" mode replaces the film
coupling by one-sided Robin data toward a fixed bath temperature, leaving
the blood side adiabatic at the interface.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fem
from .electric import JouleSource, joule_heat, solve_potential
from .geometry import BoundaryTag, ModelGeometry, Region, REGION_NAMES
from .materials import MaterialTable
from .mesh import DEFAULT_TARGET_EDGE_LENGTH, Mesh, build_mesh
from .postprocess import (
    TimeSeriesRecord,
    lesion_metrics,
    locate,
    max_temperature_in_region,
)


class BioheatError(ValueError):
    pass


class SimulationError(RuntimeError):
    """A staged failure; records completed before the failure are attached."""

    def __init__(self, stage: str, message: str, records=None):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.records = list(records or [])


@dataclass(frozen=True)
class BoundaryConditions:
    """Film coefficients and reference temperatures.

    convection_ratio scales both films jointly; the effective coefficients
    are ratio * h_e at the electrode-blood surface and ratio * h_c at the
    muscle-blood surface.
    """

    h_e: float = 2000.0
    h_c: float = 40000.0
    convection_ratio: float = 1.0
    T_blood: float = 37.0
    T_outer: float = 37.0
    T_initial: float = 37.0

    def validate(self):
        if self.h_e < 0 or self.h_c < 0:
            raise BioheatError("film coefficients must be non-negative")
        if self.convection_ratio < 0:
            raise BioheatError("convection ratio must be non-negative")


@dataclass(frozen=True)
class SimulationConfig:
    """Everything a transient run needs, defaulted to the reference setup."""

    method: str = "BE"
    applied_voltage: float = 30.0
    convection_ratio: float = 1.0
    dt: float = 0.1
    t_end: float = 120.0
    target_edge_length: float = DEFAULT_TARGET_EDGE_LENGTH
    solver_tol: float = 1e-10
    lumped_mass: bool = False
    probe_depths: tuple = (1.3e-3, 2.6e-3, 5.2e-3)
    lesion_threshold: float = 50.0
    interface_mode: str = "robin_fixed"
    source_impulse: bool = False
    output_stride: int = 1
    geometry: ModelGeometry = field(default_factory=ModelGeometry)
    materials: MaterialTable = field(default_factory=MaterialTable)
    boundary: BoundaryConditions = field(default_factory=BoundaryConditions)

    def validate(self):
        if self.method not in ("BE", "HBE"):
            raise BioheatError(f"method must be BE or HBE, got {self.method!r}")
        if not self.dt > 0:
            raise BioheatError("dt must be positive")
        if self.t_end < self.dt:
            raise BioheatError("t_end must be at least one step")
        if not self.lesion_threshold > 37.0:
            raise BioheatError("lesion threshold must exceed baseline 37 degC")
        if self.applied_voltage < 0:
            raise BioheatError("applied voltage must be non-negative")
        if self.convection_ratio < 0:
            raise BioheatError("convection ratio must be non-negative")
        if self.interface_mode not in ("contact", "robin_fixed"):
            raise BioheatError(f"unknown interface mode {self.interface_mode!r}")
        if self.output_stride < 1:
            raise BioheatError("output stride must be >= 1")
        if not (0 < self.solver_tol < 1):
            raise BioheatError("solver tolerance must lie in (0, 1)")
        self.geometry.validate()
        self.materials.validate()
        self.boundary.validate()

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    def effective_boundary(self) -> BoundaryConditions:
        return dataclasses.replace(self.boundary, convection_ratio=self.convection_ratio)


@dataclass(frozen=True)
class ThermalState:
    """Temperatures on the thermal dofs at one time level.

    T[:n_nodes] is the mesh-nodal (solid-side) view; appended entries are the
    blood side of duplicated interface nodes.  rate is maintained in HBE mode
    only (the previous level is recovered as T - dt * rate).
    """

    t: float
    T: np.ndarray
    method: str
    rate: np.ndarray | None = None
    step_index: int = 0


class ThermalSystem:
    """Assembled thermal operators over the split-dof space of one mesh."""

    def __init__(self, mesh: Mesh, materials: MaterialTable, bc: BoundaryConditions,
                 *, lumped_mass: bool = False, lumped_films: bool = True,
                 interface_mode: str = "robin_fixed", solver_tol: float = 1e-10):
        bc.validate()
        if interface_mode not in ("contact", "robin_fixed"):
            raise BioheatError(f"unknown interface mode {interface_mode!r}")
        self.mesh = mesh
        self.materials = materials
        self.bc = bc
        self.interface_mode = interface_mode
        self.lumped_films = lumped_films
        self.solver_tol = solver_tol
        n = mesh.n_nodes

        eb = mesh.edges_with_tag(BoundaryTag.ELECTRODE_BLOOD_INTERFACE)
        mb = mesh.edges_with_tag(BoundaryTag.MUSCLE_BLOOD_INTERFACE)
        split = np.unique(np.concatenate([eb.ravel(), mb.ravel()])) if (len(eb) + len(mb)) else np.empty(0, dtype=np.int64)
        self.split_nodes = split
        self.n_nodes = n
        self.n_dofs = n + len(split)
        blood_dof = np.arange(n, dtype=np.int64)
        blood_dof[split] = n + np.arange(len(split))
        self.blood_dof = blood_dof

        # per-element dof triples: blood elements address the blood side
        tri_dofs = mesh.triangles.astype(np.int64).copy()
        is_blood = mesh.tri_region == int(Region.BLOOD)
        tri_dofs[is_blood] = blood_dof[mesh.triangles[is_blood]]
        self.tri_dofs = tri_dofs

        rho_c = materials.coefficient_map("rho_c")
        cond = materials.coefficient_map("k")
        self.mass = fem.assemble_mass(mesh, rho_c, lumped=lumped_mass,
                                      dofs=tri_dofs, n_dofs=self.n_dofs)
        self.stiffness = fem.assemble_stiffness(mesh, cond, dofs=tri_dofs, n_dofs=self.n_dofs)
        # relaxation mass carries rho c on Muscle elements only (scaled by tau later)
        tau_coeff = {r: (materials.of(r).rho_c if r == Region.MUSCLE else 0.0) for r in Region}
        self.tau_mass = fem.assemble_mass(mesh, tau_coeff, lumped=lumped_mass,
                                          dofs=tri_dofs, n_dofs=self.n_dofs)
        self.films, self.film_load = self._assemble_films(eb, mb)
        self.mass_colsum = np.asarray(self.mass.sum(axis=0)).ravel()

        outer = mesh.nodes_with_tag(BoundaryTag.OUTER_GROUND_AND_THERMAL)
        self.dirichlet_values = np.zeros(self.n_dofs)
        fixed = [outer, blood_dof[outer]]
        self.dirichlet_values[outer] = bc.T_outer
        self.dirichlet_values[blood_dof[outer]] = bc.T_outer
        if interface_mode == "robin_fixed":
            # blood is pinned at the bath temperature: the films reference a
            # fixed 37 degC and the blood domain carries no dynamics
            blood_nodes = np.unique(mesh.triangles[is_blood])
            blood_dofs_all = np.unique(blood_dof[blood_nodes])
            fixed.append(blood_dofs_all)
            self.dirichlet_values[blood_dofs_all] = bc.T_blood
        fixed = np.unique(np.concatenate(fixed))
        self.dirichlet_dofs = fixed
        self.free_mask = fem.dirichlet_mask(self.n_dofs, fixed)

        # per-region rho c * lumped dof volumes, for stored-energy accounting
        self.energy_weights = {}
        for region in Region:
            sel = {r: (1.0 if r == region else 0.0) for r in Region}
            w = fem.assemble_source_load(mesh, sel, dofs=tri_dofs, n_dofs=self.n_dofs)
            self.energy_weights[REGION_NAMES[int(region)]] = materials.of(region).rho_c * w

        self._steppers = {}

    def _assemble_films(self, eb: np.ndarray, mb: np.ndarray):
        """Contact films between solid- and blood-side dofs (or one-sided
        Robin data toward T_blood in robin_fixed mode)."""
        nd = self.n_dofs
        load = np.zeros(nd)
        rows, cols, vals = [], [], []
        ratio = self.bc.convection_ratio
        for edges, h_base in ((eb, self.bc.h_e), (mb, self.bc.h_c)):
            h = ratio * h_base
            if len(edges) == 0 or h == 0.0:
                continue
            blocks, loads = fem.edge_film_blocks(self.mesh.nodes, edges)
            solid = edges.astype(np.int64)
            blood = self.blood_dof[solid]
            if self.lumped_films:
                # row-sum lumping; the row sums equal the load weights, so the
                # uniform-T_blood equilibrium is preserved exactly while the
                # positive off-diagonal (which drags nodes below T_blood next
                # to steep gradients) is removed
                blocks = np.zeros_like(blocks)
                blocks[:, 0, 0] = loads[:, 0]
                blocks[:, 1, 1] = loads[:, 1]
            if self.interface_mode == "contact":
                for a_idx, b_idx, sign in (
                    (solid, solid, 1.0),
                    (blood, blood, 1.0),
                    (solid, blood, -1.0),
                    (blood, solid, -1.0),
                ):
                    rows.append(np.repeat(a_idx, 2, axis=1).ravel())
                    cols.append(np.tile(b_idx, (1, 2)).ravel())
                    vals.append(sign * h * blocks.ravel())
            else:
                rows.append(np.repeat(solid, 2, axis=1).ravel())
                cols.append(np.tile(solid, (1, 2)).ravel())
                vals.append(h * blocks.ravel())
                np.add.at(load, solid.ravel(), h * self.bc.T_blood * loads.ravel())
        if rows:
            mat = sp.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(nd, nd),
            ).tocsr()
        else:
            mat = sp.csr_matrix((nd, nd))
        return mat, load

    def initial_state(self, method: str) -> ThermalState:
        T = np.full(self.n_dofs, self.bc.T_initial)
        T[self.dirichlet_dofs] = self.dirichlet_values[self.dirichlet_dofs]
        rate = np.zeros(self.n_dofs) if method == "HBE" else None
        return ThermalState(t=0.0, T=T, method=method, rate=rate, step_index=0)

    def source_loads(self, q: JouleSource | None):
        """(full dof load, muscle-only dof load) of a per-element source."""
        if q is None:
            z = np.zeros(self.n_dofs)
            return z, z
        full = fem.assemble_source_load(self.mesh, q.q_elem, dofs=self.tri_dofs, n_dofs=self.n_dofs)
        is_muscle = self.mesh.tri_region == int(Region.MUSCLE)
        muscle_only = fem.assemble_source_load(
            self.mesh, np.where(is_muscle, q.q_elem, 0.0), dofs=self.tri_dofs, n_dofs=self.n_dofs
        )
        return full, muscle_only

    def stepper(self, method: str, dt: float, q: JouleSource | None, tau: float = 0.0,
                source_impulse: bool = False):
        if method not in ("BE", "HBE"):
            raise BioheatError(f"method must be BE or HBE, got {method!r}")
        if not dt > 0:
            raise BioheatError("dt must be positive")
        if tau < 0:
            raise BioheatError("tau must be non-negative")
        key = (method, float(dt), float(tau), bool(source_impulse))
        stepper = self._steppers.get(key)
        if stepper is None:
            stepper = _Stepper(self, method, float(dt), float(tau), bool(source_impulse))
            self._steppers[key] = stepper
        stepper.set_source(q)
        return stepper

    def nodal(self, state_or_values) -> np.ndarray:
        """Mesh-nodal (solid-side) view of a dof vector or state."""
        T = state_or_values.T if isinstance(state_or_values, ThermalState) else state_or_values
        return np.asarray(T, dtype=float)[: self.n_nodes]

    def blood_side(self, state_or_values) -> np.ndarray:
        """Mesh-nodal view taking the blood side at duplicated nodes."""
        T = state_or_values.T if isinstance(state_or_values, ThermalState) else state_or_values
        return np.asarray(T, dtype=float)[self.blood_dof]

    def stored_energy(self, state: ThermalState) -> dict:
        dT = state.T - self.bc.T_initial
        return {name: float(w @ dT) for name, w in self.energy_weights.items()}


class _Stepper:
    """One factorized implicit time-advance operator for a fixed (method, dt, tau)."""

    def __init__(self, system: ThermalSystem, method: str, dt: float, tau: float,
                 source_impulse: bool = False):
        self.system = system
        self.method = method
        self.dt = dt
        self.tau = tau if method == "HBE" else 0.0
        self.source_impulse = source_impulse
        self.m_over_dt = system.mass * (1.0 / dt)
        a = self.m_over_dt + system.stiffness + system.films
        if self.tau > 0.0:
            self.tau_term = system.tau_mass * (self.tau / (dt * dt))
            a = a + self.tau_term
        else:
            self.tau_term = None
        self.matrix = a.tocsr()
        constrained = fem.constrain_matrix(self.matrix, system.dirichlet_dofs)
        self.solver = fem.FrozenSpdSolver(constrained, tol=system.solver_tol)
        self.a_xfix = self.matrix @ system.dirichlet_values
        self._q = None
        self.f_const = None
        self.f_muscle = None

    def set_source(self, q: JouleSource | None):
        if q is self._q and self.f_const is not None:
            return
        full, muscle_only = self.system.source_loads(q)
        self.f_const = full + self.system.film_load
        self.f_muscle = muscle_only
        self._q = q

    def advance(self, state: ThermalState) -> ThermalState:
        sysm = self.system
        T0 = state.T
        b = self.f_const + self.m_over_dt @ T0
        if self.tau > 0.0:
            t_prev = T0 - self.dt * state.rate
            b = b + self.tau_term @ (2.0 * T0 - t_prev)
            if self.source_impulse and state.step_index == 0:
                # optional tau dQ/dt impulse of a source switched on at t=0+
                # (equivalent to starting from zero relaxed flux; the default
                # quiescent start matches the reported transients)
                b = b + (self.tau / self.dt) * self.f_muscle
        bc = np.where(sysm.free_mask, b - self.a_xfix, 0.0) + sysm.dirichlet_values
        T1 = self.solver.solve(bc)
        residual = self.matrix @ T1 - b
        err_power = abs(float(residual[sysm.free_mask].sum()))
        de = float(sysm.mass_colsum @ (T1 - T0))
        dirich_power = abs(float(residual[~sysm.free_mask].sum()))
        src_power = abs(float(self.f_const.sum()))
        throughput = abs(de) / self.dt + src_power + dirich_power + 1e-300
        balance = err_power / throughput
        rate = (T1 - T0) / self.dt if self.method == "HBE" else None
        return ThermalState(
            t=state.t + self.dt,
            T=T1,
            method=self.method,
            rate=rate,
            step_index=state.step_index + 1,
        ), balance


def step_be(state: ThermalState, dt: float, operators: ThermalSystem,
            q: JouleSource | None = None) -> ThermalState:
    """Advance one implicit parabolic step; see ThermalSystem for operators."""
    if state.method != "BE":
        raise BioheatError("step_be requires a BE-mode state")
    new_state, _ = operators.stepper("BE", dt, q).advance(state)
    return new_state


def step_hbe(state: ThermalState, dt: float, operators: ThermalSystem,
             q: JouleSource | None = None, tau: float = 16.0,
             source_impulse: bool = False) -> ThermalState:
    """Advance one implicit hyperbolic step (tau on Muscle elements only)."""
    if state.method != "HBE":
        raise BioheatError("step_hbe requires an HBE-mode state")
    if state.rate is None:
        raise BioheatError("HBE state must carry a rate vector")
    new_state, _ = operators.stepper(
        "HBE", dt, q, tau=tau, source_impulse=source_impulse
    ).advance(state)
    return new_state


@dataclass
class RunResult:
    """Everything a finished (or partially finished) run produced."""

    config: SimulationConfig
    mesh: Mesh
    records: list
    final_state: ThermalState | None
    joule: JouleSource | None
    snapshots: dict


def _probe_points(config: SimulationConfig):
    zt = config.geometry.muscle_top_z
    return [(0.0, zt - d) for d in config.probe_depths]


def run_full(config: SimulationConfig, *, mesh: Mesh | None = None,
             snapshot_times=()) -> RunResult:
    """Build, solve, and step a full transient; returns records and snapshots.

    Snapshots are solid-side nodal fields taken at the step times nearest the
    requested times.  Any stage failure raises SimulationError naming the
    stage, with the records accumulated so far attached.
    """
    config.validate()
    records: list = []
    try:
        if mesh is None:
            mesh = build_mesh(config.geometry, config.target_edge_length)
    except Exception as exc:
        raise SimulationError("meshing", str(exc), records) from exc

    try:
        potential = solve_potential(mesh, config.materials, config.applied_voltage,
                                    tol=config.solver_tol)
        q = joule_heat(mesh, potential, config.materials)
    except Exception as exc:
        raise SimulationError("potential", str(exc), records) from exc

    try:
        system = ThermalSystem(
            mesh, config.materials, config.effective_boundary(),
            lumped_mass=config.lumped_mass, interface_mode=config.interface_mode,
            solver_tol=config.solver_tol,
        )
        tau = config.materials.tau_muscle if config.method == "HBE" else 0.0
        stepper = system.stepper(config.method, config.dt, q, tau=tau,
                                 source_impulse=config.source_impulse)
        probes = [locate(mesh, p) for p in _probe_points(config)]
        power = {REGION_NAMES[int(r)]: p for r, p in q.power_by_region.items()}
    except Exception as exc:
        raise SimulationError("assembly", str(exc), records) from exc

    n_steps = config.n_steps
    snap_steps = {}
    for ts in snapshot_times:
        k = min(max(int(round(ts / config.dt)), 0), n_steps)
        snap_steps.setdefault(k, float(ts))
    snapshots = {}

    state = system.initial_state(config.method)
    if 0 in snap_steps:
        snapshots[snap_steps[0]] = system.nodal(state).copy()
    for i in range(1, n_steps + 1):
        try:
            state, balance = stepper.advance(state)
        except Exception as exc:
            raise SimulationError(f"stepping:t={i * config.dt:g}s", str(exc), records) from exc
        if i % config.output_stride == 0 or i == n_steps:
            records.append(_make_record(config, system, state, power, probes, balance))
        if i in snap_steps:
            snapshots[snap_steps[i]] = system.nodal(state).copy()
    return RunResult(config=config, mesh=mesh, records=records,
                     final_state=state, joule=q, snapshots=snapshots)


def run_transient(config: SimulationConfig, *, mesh: Mesh | None = None) -> list:
    """Mesh, solve the potential once, and step from 37 degC to t_end.

    Returns one TimeSeriesRecord per output step (stride-filtered, final step
    always included).
    """
    return run_full(config, mesh=mesh).records


def _make_record(config: SimulationConfig, system: ThermalSystem, state: ThermalState,
                 power: dict, probes, balance: float) -> TimeSeriesRecord:
    nodal = system.nodal(state)
    area, volume = lesion_metrics(system.mesh, nodal, config.lesion_threshold)
    t_max, loc = max_temperature_in_region(system.mesh, nodal, Region.MUSCLE)
    joule_cum = {name: p * state.t for name, p in power.items()}
    return TimeSeriesRecord(
        t=state.t,
        method=config.method,
        applied_voltage=config.applied_voltage,
        convection_ratio=config.convection_ratio,
        lesion_area=area,
        lesion_volume=volume,
        t_max=t_max,
        t_max_location=loc,
        probe_temperatures=tuple(p(state.T) for p in probes),
        stored_energy=system.stored_energy(state),
        joule_energy=joule_cum,
        t_min=float(state.T.min()),
        t_max_domain=float(state.T.max()),
        balance_error=balance,
    )


def save_field_text(path, values):
    """Write a nodal field as "index value" lines (mesh-file node order)."""
    values = np.asarray(values, dtype=float)
    with open(path, "w") as f:
        f.write(f"{len(values)}\n")
        for i, v in enumerate(values):
            f.write(f"{i} {v:.17g}\n")


def load_field_text(path) -> np.ndarray:
    with open(path) as f:
        n = int(f.readline())
        out = np.empty(n)
        for _ in range(n):
            i, v = f.readline().split()
            out[int(i)] = float(v)
    return out
