"""Species property database and phase thermodynamics.

All functions broadcast over leading axes; the species axis is always last.
Concentrations are per unit segment volume, so evaluating an extensive
function with concentrations yields the corresponding volume density.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

R = 8.314462618  # J/(mol K)
T0 = 298.15  # K
P0 = 1.0e5  # Pa

SOLIDS = ("CaCO3", "CaO", "SiO2", "Al2O3", "Fe2O3", "C2S", "C3S", "C3A", "C4AF")
GASES = ("CO2", "N2", "O2", "Ar", "CO", "H2", "H2O", "C_sus")
ELEMENTS = ("Ca", "Si", "Al", "Fe", "C", "O", "H", "N", "Ar")


class UnknownSpeciesError(KeyError):
    pass


class DegeneratePhaseError(ValueError):
    pass


@dataclass(frozen=True)
class SpeciesProperties:
    """Constants of one compound, in SI units."""

    name: str
    phase: str
    molar_mass: float
    enthalpy_formation: float
    cp_coeffs: tuple[float, float, float]
    cp_range: tuple[float, float] | None = None
    density: float | None = None
    conductivity: float | tuple[tuple[float, float], tuple[float, float]] | None = None
    viscosity_anchors: tuple[tuple[float, float], tuple[float, float]] | None = None
    diffusion_volume: float | None = None
    elements: dict = field(default_factory=dict)

    def validate(self) -> list[str]:
        errors = []
        if self.molar_mass <= 0:
            errors.append(f"{self.name}: molar_mass must be positive")
        if self.phase == "solid" and not (self.density and self.density > 0):
            errors.append(f"{self.name}: density must be positive")
        if self.phase == "gas" and not (self.diffusion_volume and self.diffusion_volume > 0):
            errors.append(f"{self.name}: diffusion_volume must be positive")
        return errors


def _pairs(value):
    if value is None:
        return None
    return tuple((float(t), float(v)) for t, v in value)


def _record(rec: dict, phase: str) -> SpeciesProperties:
    cond = rec.get("conductivity")
    if phase == "gas":
        cond = _pairs(cond)
    rng = rec.get("cp_range")
    return SpeciesProperties(
        name=rec["name"],
        phase=phase,
        molar_mass=float(rec["molar_mass"]),
        enthalpy_formation=float(rec["enthalpy_formation"]),
        cp_coeffs=tuple(float(c) for c in rec["cp"]),
        cp_range=tuple(rng) if rng is not None else None,
        density=rec.get("density"),
        conductivity=cond,
        viscosity_anchors=_pairs(rec.get("viscosity")),
        diffusion_volume=rec.get("diffusion_volume"),
        elements=dict(rec.get("elements", {})),
    )


class SpeciesSet:
    """Ordered solid and gas species with array views of their constants.

    Parameters
    ----------
    solids, gases : sequence of SpeciesProperties
        Must follow the fixed orderings ``SOLIDS`` and ``GASES``.
    """

    def __init__(self, solids, gases):
        self.solids = tuple(solids)
        self.gases = tuple(gases)
        if tuple(s.name for s in self.solids) != SOLIDS:
            raise ValueError("solid species must be ordered as " + ", ".join(SOLIDS))
        if tuple(g.name for g in self.gases) != GASES:
            raise ValueError("gas species must be ordered as " + ", ".join(GASES))
        errors = [e for sp in self.species for e in sp.validate()]
        if errors:
            raise ValueError("; ".join(errors))
        self._index = {sp.name: i for i, sp in enumerate(self.species)}

        self.n_solids = len(self.solids)
        self.n_gases = len(self.gases)
        self.molar_mass = np.array([sp.molar_mass for sp in self.species])
        self.enthalpy_formation = np.array([sp.enthalpy_formation for sp in self.species])
        self.cp_coeffs = np.array([sp.cp_coeffs for sp in self.species])
        self.density = np.array([s.density for s in self.solids], dtype=float)
        self.solid_conductivity = np.array([s.conductivity for s in self.solids], dtype=float)
        self.diffusion_volume = np.array([g.diffusion_volume for g in self.gases], dtype=float)
        self.element_matrix = np.array(
            [[sp.elements.get(e, 0) for sp in self.species] for e in ELEMENTS], dtype=np.int64
        )
        self.element_matrix.setflags(write=False)

    @property
    def species(self) -> tuple[SpeciesProperties, ...]:
        return self.solids + self.gases

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(sp.name for sp in self.species)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownSpeciesError(name) from None

    def __getitem__(self, name: str) -> SpeciesProperties:
        return self.species[self.index(name)]

    def phase_slice(self, phase: str) -> slice:
        if phase == "solid":
            return slice(0, self.n_solids)
        if phase == "gas":
            return slice(self.n_solids, self.n_solids + self.n_gases)
        raise ValueError(f"unknown phase {phase!r}")

    def to_dict(self) -> dict:
        def rec(sp):
            d = {
                "name": sp.name,
                "molar_mass": sp.molar_mass,
                "enthalpy_formation": sp.enthalpy_formation,
                "cp": list(sp.cp_coeffs),
                "cp_range": list(sp.cp_range) if sp.cp_range else None,
                "elements": sp.elements,
            }
            if sp.phase == "solid":
                d["density"] = sp.density
                d["conductivity"] = sp.conductivity
            else:
                d["conductivity"] = [list(p) for p in sp.conductivity] if sp.conductivity else None
                d["viscosity"] = [list(p) for p in sp.viscosity_anchors] if sp.viscosity_anchors else None
                d["diffusion_volume"] = sp.diffusion_volume
            return d

        return {"solids": [rec(s) for s in self.solids], "gases": [rec(g) for g in self.gases]}


def load_species(path: str | Path | None = None) -> SpeciesSet:
    """Load a species database file; the embedded one when ``path`` is None."""
    if path is None:
        return default_species()
    data = json.loads(Path(path).read_text())
    return _from_dict(data)


def _from_dict(data: dict) -> SpeciesSet:
    return SpeciesSet(
        [_record(r, "solid") for r in data["solids"]],
        [_record(r, "gas") for r in data["gases"]],
    )


@lru_cache(maxsize=None)
def default_species() -> SpeciesSet:
    text = resources.files("kilnsim").joinpath("data/species.json").read_text()
    return _from_dict(json.loads(text))


def _db(db):
    return default_species() if db is None else db


def _coeffs(species, db):
    db = _db(db)
    if isinstance(species, str):
        return db.cp_coeffs[db.index(species)]
    return db.cp_coeffs[np.asarray(species)]


def molar_heat_capacity(species, T, db: SpeciesSet | None = None):
    """cp = C0 + C1 T + C2 T^2 in J/(mol K), extrapolated outside the fit range."""
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0):
        raise ValueError("temperature must be positive")
    c0, c1, c2 = _coeffs(species, db)
    return c0 + c1 * T + c2 * T * T


def out_of_range(species: str, T, db: SpeciesSet | None = None):
    """True where ``T`` lies outside the tabulated cp validity range."""
    rng = _db(db)[species].cp_range
    T = np.asarray(T, dtype=float)
    if rng is None:
        return np.zeros_like(T, dtype=bool)
    return (T < rng[0]) | (T > rng[1])


def _cp_all(T, cp):
    T = np.asarray(T, dtype=float)[..., None]
    return cp[:, 0] + cp[:, 1] * T + cp[:, 2] * T * T


def _h_all(T, cp, hf):
    T = np.asarray(T, dtype=float)[..., None]
    return (
        hf
        + cp[:, 0] * (T - T0)
        + cp[:, 1] / 2.0 * (T * T - T0 * T0)
        + cp[:, 2] / 3.0 * (T * T * T - T0 * T0 * T0)
    )


def molar_enthalpies(T, phase: str, db: SpeciesSet | None = None):
    """Per-species molar enthalpy (J/mol), shape ``T.shape + (n_species,)``."""
    db = _db(db)
    sl = db.phase_slice(phase)
    return _h_all(T, db.cp_coeffs[sl], db.enthalpy_formation[sl])


def molar_heat_capacities(T, phase: str, db: SpeciesSet | None = None):
    db = _db(db)
    return _cp_all(T, db.cp_coeffs[db.phase_slice(phase)])


def enthalpy(T, P, n, phase: str, db: SpeciesSet | None = None):
    """H = sum_i h_i(T) n_i. Ideal phases, so ``P`` does not enter."""
    n = np.asarray(n, dtype=float)
    return np.sum(molar_enthalpies(T, phase, db) * n, axis=-1)


def solid_volume(n, density_tuning: float = 1.0, db: SpeciesSet | None = None):
    db = _db(db)
    n = np.asarray(n, dtype=float)
    return n @ (db.molar_mass[: db.n_solids] / (db.density * density_tuning))


def gas_volume(T, P, n):
    n = np.asarray(n, dtype=float)
    return R * np.asarray(T, dtype=float) / np.asarray(P, dtype=float) * np.sum(n, axis=-1)


@dataclass(frozen=True)
class WallMaterial:
    """Refractory lining treated as a single pseudo-species.

    Defaults give a volumetric heat capacity of 2.8 MJ/(m3 K).
    """

    molar_heat_capacity: float = 100.0  # J/(mol K)
    molar_density: float = 28000.0  # mol/m3
    conductivity: float = 1.5  # W/(m K)
    thickness: float = 0.25  # m

    @property
    def volumetric_heat_capacity(self) -> float:
        return self.molar_heat_capacity * self.molar_density

    def energy_density(self, T):
        return self.volumetric_heat_capacity * (np.asarray(T, dtype=float) - T0)

    def temperature(self, U):
        return T0 + np.asarray(U, dtype=float) / self.volumetric_heat_capacity


def internal_energy_densities(T_s, T_g, T_w, P, C_s, C_g, wall: WallMaterial | None = None,
                              db: SpeciesSet | None = None):
    """(U_s, U_g, U_w) in J/m3; the gas subtracts flow work P V_g = R T_g sum C_g."""
    wall = WallMaterial() if wall is None else wall
    U_s = enthalpy(T_s, P, C_s, "solid", db)
    U_g = enthalpy(T_g, P, C_g, "gas", db) - R * np.asarray(T_g) * np.sum(C_g, axis=-1)
    return U_s, U_g, wall.energy_density(T_w)


def mixture_density_and_heat_capacity(C, V_hat, phase: str, T, db: SpeciesSet | None = None):
    """Phase density over its own volume and volumetric heat capacity.

    Returns
    -------
    rho : kg/m3, 0 where the phase is empty
    C_p : J/(m3 K) per unit segment volume
    empty : bool mask of empty phases
    """
    db = _db(db)
    sl = db.phase_slice(phase)
    C = np.asarray(C, dtype=float)
    V_hat = np.asarray(V_hat, dtype=float)
    mass = C @ db.molar_mass[sl]
    empty = mass <= 0.0
    if np.any((V_hat <= 0) & ~empty):
        raise DegeneratePhaseError("zero phase volume with nonzero concentration")
    rho = np.where(empty, 0.0, mass / np.where(V_hat > 0, V_hat, 1.0))
    Cp = np.sum(_cp_all(T, db.cp_coeffs[sl]) * C, axis=-1)
    return rho, Cp, empty
