"""Scenario configuration: defaults, TOML load/save and the initial state.

Keys carry their unit as a suffix (``kiln.length_m``). A few conveniences are
accepted on load and converted to SI: ``_rpm``, ``_C``, ``_bar``, ``_t_h``
and ``_h``. Files are always written in SI so that a round trip is exact.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import geometry as geo
from . import transport as tr
from .balances import BoundaryConditions, KilnModel, ModelParameters, Stream
from .integrator import SolverSettings
from .kinetics import default_reactions, load_reactions, with_tuning
from .thermo import GASES, R, SOLIDS, WallMaterial, default_species, load_species

AIR = {"N2": 0.7812, "O2": 0.2095, "Ar": 0.0093}
FEED = {"CaO": 0.73, "SiO2": 0.225, "Al2O3": 0.03, "Fe2O3": 0.015}
RPM = 2.0 * math.pi / 60.0
C0 = 273.15


class ScenarioError(ValueError):
    """Validation failure; ``errors`` lists every offending field."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def calibrate_repose_angle(velocity: float = 0.048, fill: float = 0.13, omega: float = 4 * RPM,
                           inclination: float = 0.02, radius: float = 2.0) -> float:
    """Repose angle for which a flat bed at ``fill`` moves at ``velocity``."""
    theta = float(geo.fill_angle_from_area(fill * math.pi * radius**2, radius))
    L_c = 2.0 * radius * math.sin(theta / 2)
    unit = float(tr.solid_velocity(omega, inclination, 0.0, L_c, radius, math.pi / 2))
    s = unit / velocity
    if not 0 < s < 1:
        raise ValueError("no repose angle reproduces the requested velocity")
    return math.asin(s)


DEFAULT_REPOSE = calibrate_repose_angle()


@dataclass(frozen=True)
class InitialCondition:
    gas_temperature: float = 800.0 + C0
    wall_temperature: float = 800.0 + C0
    solid_temperature: float = 800.0 + C0
    pressure_start: float = 1.00005e5  # Pa at z = 0
    pressure_end: float = 1.00010e5  # Pa at z = L
    water_fraction: float = 0.01
    gas_composition: dict = field(default_factory=lambda: dict(AIR))
    solid_seed_fraction: float = 0.01  # of the feed concentration


def _default_bc() -> BoundaryConditions:
    return BoundaryConditions(
        solid_feed=Stream(dict(FEED), 778.0, 0.048),
        solid_temperature=800.0 + C0,
        gas_streams=(Stream({"C_sus": 1.0}, 2.4, 3.0), Stream(dict(AIR), 7.2, 6.0)),
        gas_temperature=1200.0 + C0,
        pressure_anchor=1.00005e5,
    )


@dataclass(frozen=True)
class Scenario:
    dims: geo.KilnDimensions = field(default_factory=geo.KilnDimensions)
    omega: float = 4 * RPM
    a_omega: float = 0.0
    b_omega: float = DEFAULT_REPOSE
    bc: BoundaryConditions = field(default_factory=_default_bc)
    stream_names: tuple = ("fuel", "secondary_air")
    initial: InitialCondition = field(default_factory=InitialCondition)
    density_tuning: float = 1.0 / 9.0
    tuning: dict = field(default_factory=lambda: {r.id: r.tuning for r in default_reactions()})
    wall: WallMaterial = field(default_factory=WallMaterial)
    eps_wall: float = 0.85
    eps_solid: float = 0.9
    solver: SolverSettings = field(default_factory=SolverSettings)
    output_cadence: float = 1800.0
    species_file: str | None = None
    reactions_file: str | None = None

    def validate(self) -> list[str]:
        errs = list(self.dims.validate()) + list(self.bc.validate()) + list(self.solver.validate())
        if not self.omega > 0:
            errs.append("kiln.rotation_rad_s must be positive")
        try:
            tr.repose_angle(self.omega, self.a_omega, self.b_omega)
        except ValueError:
            errs.append("kiln.repose: repose angle must lie in (0, pi/2)")
        if not self.density_tuning > 0:
            errs.append("kiln.density_tuning must be positive")
        for k, v in self.tuning.items():
            if not v > 0:
                errs.append(f"reactions.tuning.{k} must be positive")
        known = {r.id for r in default_reactions()} if self.reactions_file is None else {
            r.id for r in load_reactions(self.reactions_file)}
        for k in set(self.tuning) - known:
            errs.append(f"reactions.tuning.{k}: unknown reaction")
        w = self.wall
        for name in ("molar_heat_capacity", "molar_density", "conductivity", "thickness"):
            if not getattr(w, name) > 0:
                errs.append(f"wall.{name} must be positive")
        for name in ("eps_wall", "eps_solid"):
            if not 0 < getattr(self, name) <= 1:
                errs.append(f"wall.{name}: emissivity must lie in (0, 1]")
        ic = self.initial
        for name in ("gas_temperature", "wall_temperature", "solid_temperature",
                     "pressure_start", "pressure_end"):
            if not getattr(ic, name) > 0:
                errs.append(f"initial.{name} must be positive")
        if not 0 <= ic.water_fraction < 1:
            errs.append("initial.water_fraction must lie in [0, 1)")
        if not 0 < ic.solid_seed_fraction <= 1:
            errs.append("initial.solid_seed_fraction must lie in (0, 1]")
        if set(ic.gas_composition) - set(GASES):
            errs.append("initial.gas_composition: unknown species")
        if not self.output_cadence > 0:
            errs.append("output.cadence_s must be positive")
        if len(self.stream_names) != len(self.bc.gas_streams):
            errs.append("gas_inlet: stream names and streams differ in length")
        return errs

    # -- model construction ----------------------------------------------------------

    def species(self):
        return default_species() if self.species_file is None else load_species(self.species_file)

    def reactions(self):
        base = default_reactions() if self.reactions_file is None else load_reactions(self.reactions_file)
        return with_tuning(base, self.tuning)

    def model_parameters(self) -> ModelParameters:
        return ModelParameters(
            dims=self.dims, bc=self.bc, omega=self.omega, a_omega=self.a_omega,
            b_omega=self.b_omega, density_tuning=self.density_tuning, wall=self.wall,
            eps_wall=self.eps_wall, eps_solid=self.eps_solid,
        )

    def build_model(self) -> KilnModel:
        return KilnModel(self.model_parameters(), self.reactions(), self.species())

    def initial_state(self, model: KilnModel | None = None):
        """Consistent (x, y) for the initial condition.

        Gas is the initial composition plus water at the initial temperature,
        pressure varies linearly along z, and the bed holds a small seed of the
        feed so that every segment has a defined solid temperature.
        """
        from .integrator import consistent_initialization

        model = self.build_model() if model is None else model
        ic = self.initial
        n = self.dims.n_segments
        z = self.dims.centers / self.dims.length
        P = ic.pressure_start + (ic.pressure_end - ic.pressure_start) * z
        feed = self.bc.solid_feed
        xs = np.array([feed.composition.get(s, 0.0) for s in SOLIDS])
        xs = xs / xs.sum()
        C_s = np.tile(xs * feed.concentration * ic.solid_seed_fraction, (n, 1))
        dry = np.array([ic.gas_composition.get(g, 0.0) for g in GASES])
        dry = dry / dry.sum()
        xg = dry * (1.0 - ic.water_fraction)
        xg[GASES.index("H2O")] += ic.water_fraction
        Vs = model.solid_volume_fraction(C_s)
        T_s = np.full(n, ic.solid_temperature)
        T_g = np.full(n, ic.gas_temperature)
        T_w = np.full(n, ic.wall_temperature)
        C_g = xg[None, :] * (P * (1.0 - Vs) / (R * T_g))[:, None]
        U_s, U_g, U_w = model.energies(T_s, T_g, T_w, C_s, C_g)
        x = np.concatenate([C_s, C_g, U_s[:, None], U_g[:, None], U_w[:, None]], axis=1)
        theta = model.fill_angle(C_s)
        y = np.stack([T_s, T_g, T_w, P, theta], axis=1)
        y = consistent_initialization(model, x, y)
        return x, y


def reference_scenario() -> Scenario:
    """Reference 50 m kiln at 4 rpm with the tuned reaction rates."""
    return Scenario()


# -- TOML mapping -------------------------------------------------------------------------

_CONVERT = {
    "_rpm": ("_rad_s", lambda v: v * RPM),
    "_C": ("_K", lambda v: v + C0),
    "_bar": ("_Pa", lambda v: v * 1e5),
    "_h": ("_s", lambda v: v * 3600.0),
}


def _si(table: dict, errs: list, where: str) -> dict:
    out = {}
    for key, val in table.items():
        if isinstance(val, dict) and key not in ("composition", "tuning", "gas_composition"):
            out[key] = _si(val, errs, f"{where}{key}.")
            continue
        for suf, (si, fn) in _CONVERT.items():
            if key.endswith(suf) and not key.endswith("_t_h"):
                base = key[: -len(suf)] + si
                if base in table:
                    errs.append(f"{where}{key}: given together with {base}")
                try:
                    out[base] = fn(float(val))
                except (TypeError, ValueError):
                    errs.append(f"{where}{key}: expected a number")
                break
        else:
            out[key] = val
    return out


def _take(tab: dict, key: str, default, errs: list, where: str, kind=float):
    if key not in tab:
        return default
    val = tab.pop(key)
    try:
        if kind is int:
            if isinstance(val, bool) or int(val) != val:
                raise ValueError
            return int(val)
        if kind is float:
            if isinstance(val, bool):
                raise ValueError
            return float(val)
        if kind is dict:
            if not isinstance(val, dict):
                raise ValueError
            return {str(k): float(v) for k, v in val.items()}
        return kind(val)
    except (TypeError, ValueError):
        errs.append(f"{where}{key}: invalid value {val!r}")
        return default


def scenario_from_dict(data: dict) -> Scenario:
    errs: list[str] = []
    data = _si(dict(data), errs, "")
    d = Scenario()
    sec = lambda name: dict(data.pop(name, {}) or {})  # noqa: E731

    k = sec("kiln")
    dims = geo.KilnDimensions(
        length=_take(k, "length_m", d.dims.length, errs, "kiln."),
        radius=_take(k, "radius_m", d.dims.radius, errs, "kiln."),
        inclination=_take(k, "inclination_rad", d.dims.inclination, errs, "kiln."),
        n_segments=_take(k, "n_segments", d.dims.n_segments, errs, "kiln.", int),
    )
    omega = _take(k, "rotation_rad_s", d.omega, errs, "kiln.")
    a_omega = _take(k, "repose_a_s", d.a_omega, errs, "kiln.")
    b_omega = _take(k, "repose_b_rad", d.b_omega, errs, "kiln.")
    density_tuning = _take(k, "density_tuning", d.density_tuning, errs, "kiln.")
    errs += [f"kiln.{key}: unknown key" for key in k]

    w = sec("wall")
    wall = WallMaterial(
        molar_heat_capacity=_take(w, "molar_heat_capacity_J_molK", d.wall.molar_heat_capacity, errs, "wall."),
        molar_density=_take(w, "molar_density_mol_m3", d.wall.molar_density, errs, "wall."),
        conductivity=_take(w, "conductivity_W_mK", d.wall.conductivity, errs, "wall."),
        thickness=_take(w, "thickness_m", d.wall.thickness, errs, "wall."),
    )
    eps_wall = _take(w, "emissivity", d.eps_wall, errs, "wall.")
    eps_solid = _take(w, "solid_emissivity", d.eps_solid, errs, "wall.")
    errs += [f"wall.{key}: unknown key" for key in w]

    f = sec("feed")
    comp = _take(f, "composition", dict(d.bc.solid_feed.composition), errs, "feed.", dict)
    conc = _take(f, "concentration_mol_m3", d.bc.solid_feed.concentration, errs, "feed.")
    vel = _take(f, "velocity_m_s", d.bc.solid_feed.velocity, errs, "feed.")
    if "mass_flow_t_h" in f:
        mdot = _take(f, "mass_flow_t_h", 0.0, errs, "feed.") * 1000.0 / 3600.0
        db = default_species()
        tot = sum(comp.values()) or 1.0
        M = sum(v / tot * db[s].molar_mass for s, v in comp.items() if s in SOLIDS)
        vel = mdot / (conc * M * dims.cross_section)
    T_feed = _take(f, "temperature_K", d.bc.solid_temperature, errs, "feed.")
    errs += [f"feed.{key}: unknown key" for key in f]

    g = sec("gas_inlet")
    T_gas = _take(g, "temperature_K", d.bc.gas_temperature, errs, "gas_inlet.")
    raw_streams = g.pop("streams", None)
    if raw_streams is None:
        streams, names = d.bc.gas_streams, d.stream_names
    else:
        streams, names = [], []
        for i, st in enumerate(raw_streams):
            st = _si(dict(st), errs, f"gas_inlet.streams[{i}].")
            where = f"gas_inlet.streams[{i}]."
            names.append(str(st.pop("name", f"stream{i}")))
            streams.append(Stream(
                _take(st, "composition", {}, errs, where, dict),
                _take(st, "concentration_mol_m3", 0.0, errs, where),
                _take(st, "velocity_m_s", 0.0, errs, where),
            ))
            errs += [f"{where}{key}: unknown key" for key in st]
        streams, names = tuple(streams), tuple(names)
    errs += [f"gas_inlet.{key}: unknown key" for key in g]

    p = sec("pressure")
    anchor = _take(p, "anchor_Pa", d.bc.pressure_anchor, errs, "pressure.")
    errs += [f"pressure.{key}: unknown key" for key in p]

    for label, st in [("feed", Stream(comp, conc, vel))] + list(zip(names, streams)):
        bad = set(st.composition) - set(SOLIDS if label == "feed" else GASES)
        if bad:
            errs.append(f"{label}.composition: unknown species {sorted(bad)}")
    bc = BoundaryConditions(Stream(comp, conc, vel), T_feed, tuple(streams), T_gas, anchor)

    i = sec("initial")
    di = d.initial
    initial = InitialCondition(
        gas_temperature=_take(i, "gas_temperature_K", di.gas_temperature, errs, "initial."),
        wall_temperature=_take(i, "wall_temperature_K", di.wall_temperature, errs, "initial."),
        solid_temperature=_take(i, "solid_temperature_K", di.solid_temperature, errs, "initial."),
        pressure_start=_take(i, "pressure_start_Pa", di.pressure_start, errs, "initial."),
        pressure_end=_take(i, "pressure_end_Pa", di.pressure_end, errs, "initial."),
        water_fraction=_take(i, "water_fraction", di.water_fraction, errs, "initial."),
        gas_composition=_take(i, "gas_composition", dict(di.gas_composition), errs, "initial.", dict),
        solid_seed_fraction=_take(i, "solid_seed_fraction", di.solid_seed_fraction, errs, "initial."),
    )
    errs += [f"initial.{key}: unknown key" for key in i]

    r = sec("reactions")
    tuning = dict(d.tuning)
    tuning.update(_take(r, "tuning", {}, errs, "reactions.", dict))
    species_file = r.pop("species_file", None)
    reactions_file = r.pop("reactions_file", None)
    errs += [f"reactions.{key}: unknown key" for key in r]

    s = sec("solver")
    ds = d.solver
    solver = SolverSettings(
        dt_init=_take(s, "dt_init_s", ds.dt_init, errs, "solver."),
        dt_min=_take(s, "dt_min_s", ds.dt_min, errs, "solver."),
        dt_max=_take(s, "dt_max_s", ds.dt_max, errs, "solver."),
        newton_tol=_take(s, "newton_tol", ds.newton_tol, errs, "solver."),
        newton_max_iter=_take(s, "newton_max_iter", ds.newton_max_iter, errs, "solver.", int),
        jacobian_fd_epsilon=_take(s, "jacobian_fd_epsilon", ds.jacobian_fd_epsilon, errs, "solver."),
        steady_state_tol=_take(s, "steady_state_tol_1_s", ds.steady_state_tol, errs, "solver."),
        steady_state_window=_take(s, "steady_state_window", ds.steady_state_window, errs, "solver.", int),
        max_sim_time=_take(s, "max_sim_time_s", ds.max_sim_time, errs, "solver."),
        growth=_take(s, "growth", ds.growth, errs, "solver."),
        negative_tol=_take(s, "negative_tol", ds.negative_tol, errs, "solver."),
    )
    errs += [f"solver.{key}: unknown key" for key in s]

    o = sec("output")
    cadence = _take(o, "cadence_s", d.output_cadence, errs, "output.")
    errs += [f"output.{key}: unknown key" for key in o]
    errs += [f"{key}: unknown section" for key in data]

    sc = Scenario(dims=dims, omega=omega, a_omega=a_omega, b_omega=b_omega, bc=bc,
                  stream_names=tuple(names), initial=initial, density_tuning=density_tuning,
                  tuning=tuning, wall=wall, eps_wall=eps_wall, eps_solid=eps_solid, solver=solver,
                  output_cadence=cadence, species_file=species_file, reactions_file=reactions_file)
    if not errs:
        try:
            errs += sc.validate()
        except (OSError, KeyError, ValueError) as exc:
            errs.append(f"data files: {exc}")
    if errs:
        raise ScenarioError(errs)
    return sc


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario file; absent keys take reference values."""
    text = Path(path).read_text()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError([f"parse error: {exc}"]) from exc
    return scenario_from_dict(data)


def scenario_to_dict(s: Scenario) -> dict:
    ic = s.initial
    out = {
        "kiln": {
            "length_m": s.dims.length, "radius_m": s.dims.radius,
            "inclination_rad": s.dims.inclination, "n_segments": s.dims.n_segments,
            "rotation_rad_s": s.omega, "repose_a_s": s.a_omega, "repose_b_rad": s.b_omega,
            "density_tuning": s.density_tuning,
        },
        "wall": {
            "molar_heat_capacity_J_molK": s.wall.molar_heat_capacity,
            "molar_density_mol_m3": s.wall.molar_density,
            "conductivity_W_mK": s.wall.conductivity, "thickness_m": s.wall.thickness,
            "emissivity": s.eps_wall, "solid_emissivity": s.eps_solid,
        },
        "feed": {
            "composition": dict(s.bc.solid_feed.composition),
            "concentration_mol_m3": s.bc.solid_feed.concentration,
            "velocity_m_s": s.bc.solid_feed.velocity, "temperature_K": s.bc.solid_temperature,
        },
        "gas_inlet": {
            "temperature_K": s.bc.gas_temperature,
            "streams": [
                {"name": name, "composition": dict(st.composition),
                 "concentration_mol_m3": st.concentration, "velocity_m_s": st.velocity}
                for name, st in zip(s.stream_names, s.bc.gas_streams)
            ],
        },
        "pressure": {"anchor_Pa": s.bc.pressure_anchor},
        "initial": {
            "gas_temperature_K": ic.gas_temperature, "wall_temperature_K": ic.wall_temperature,
            "solid_temperature_K": ic.solid_temperature, "pressure_start_Pa": ic.pressure_start,
            "pressure_end_Pa": ic.pressure_end, "water_fraction": ic.water_fraction,
            "gas_composition": dict(ic.gas_composition),
            "solid_seed_fraction": ic.solid_seed_fraction,
        },
        "reactions": {"tuning": dict(s.tuning)},
        "solver": {
            "dt_init_s": s.solver.dt_init, "dt_min_s": s.solver.dt_min, "dt_max_s": s.solver.dt_max,
            "newton_tol": s.solver.newton_tol, "newton_max_iter": s.solver.newton_max_iter,
            "jacobian_fd_epsilon": s.solver.jacobian_fd_epsilon,
            "steady_state_tol_1_s": s.solver.steady_state_tol,
            "steady_state_window": s.solver.steady_state_window,
            "max_sim_time_s": s.solver.max_sim_time, "growth": s.solver.growth,
            "negative_tol": s.solver.negative_tol,
        },
        "output": {"cadence_s": s.output_cadence},
    }
    if s.species_file is not None:
        out["reactions"]["species_file"] = s.species_file
    if s.reactions_file is not None:
        out["reactions"]["reactions_file"] = s.reactions_file
    return out


def write_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(tomli_w.dumps(scenario_to_dict(s)))


def with_overrides(s: Scenario, n_segments: int | None = None, duration: float | None = None,
                   cadence: float | None = None) -> Scenario:
    if n_segments is not None:
        s = replace(s, dims=replace(s.dims, n_segments=n_segments))
    if duration is not None:
        s = replace(s, solver=replace(s.solver, max_sim_time=duration))
    if cadence is not None:
        s = replace(s, output_cadence=cadence)
    errs = s.validate()
    if errs:
        raise ScenarioError(errs)
    return s

