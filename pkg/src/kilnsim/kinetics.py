"""Clinker and fuel reaction network: rate laws and stoichiometry."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .thermo import R, SpeciesSet, default_species

BAR = 1.0e5

_UNITS = ("per_hour", "kg_m3_s", "mol_m3_s")


@dataclass(frozen=True)
class ReactionSpec:
    id: str
    equation: str
    phase: str
    stoichiometry: dict
    k_r: float
    n: float
    activation_energy: float  # J/mol
    orders: dict
    pressure_orders: dict = field(default_factory=dict)
    source_unit: str = "mol_m3_s"
    reference_species: str | None = None
    tuning: float = 1.0

    def validate(self, db: SpeciesSet) -> list[str]:
        errs = []
        names = set(db.names)
        for sp in list(self.stoichiometry) + list(self.orders) + list(self.pressure_orders):
            if sp not in names:
                errs.append(f"{self.id}: unknown species {sp}")
        if self.activation_energy < 0:
            errs.append(f"{self.id}: activation energy must be >= 0")
        if any(a < 0 for a in self.orders.values()):
            errs.append(f"{self.id}: concentration orders must be >= 0")
        if not self.tuning > 0:
            errs.append(f"{self.id}: tuning factor must be positive")
        if self.source_unit not in _UNITS:
            errs.append(f"{self.id}: unknown unit {self.source_unit}")
        if self.source_unit == "kg_m3_s" and self.reference_species not in names:
            errs.append(f"{self.id}: kg-based rate needs a reference species")
        if self.phase not in ("solid", "gas"):
            errs.append(f"{self.id}: phase must be solid or gas")
        return errs


def _parse(data: dict) -> tuple[ReactionSpec, ...]:
    out = []
    for r in data["reactions"]:
        out.append(ReactionSpec(
            id=r["id"], equation=r["equation"], phase=r["phase"],
            stoichiometry={k: int(v) for k, v in r["stoichiometry"].items()},
            k_r=float(r["k_r"]), n=float(r["n"]), activation_energy=float(r["activation_energy"]),
            orders={k: float(v) for k, v in r["orders"].items()},
            pressure_orders={k: float(v) for k, v in r.get("pressure_orders", {}).items()},
            source_unit=r["source_unit"], reference_species=r.get("reference_species"),
            tuning=float(r.get("tuning", 1.0)),
        ))
    return tuple(out)


@lru_cache(maxsize=None)
def default_reactions() -> tuple[ReactionSpec, ...]:
    text = resources.files("kilnsim").joinpath("data/reactions.json").read_text()
    return _parse(json.loads(text))


def load_reactions(path: str | Path | None = None) -> tuple[ReactionSpec, ...]:
    if path is None:
        return default_reactions()
    return _parse(json.loads(Path(path).read_text()))


def with_tuning(reactions, tuning: dict) -> tuple[ReactionSpec, ...]:
    """Copy of ``reactions`` with tuning factors overridden by id."""
    unknown = set(tuning) - {r.id for r in reactions}
    if unknown:
        raise KeyError(f"unknown reaction ids: {sorted(unknown)}")
    return tuple(replace(r, tuning=float(tuning.get(r.id, r.tuning))) for r in reactions)


def stoichiometry_matrix(reactions=None, db: SpeciesSet | None = None) -> np.ndarray:
    """Signed integer matrix, rows r1..r11, columns solids then gases."""
    reactions = default_reactions() if reactions is None else reactions
    db = default_species() if db is None else db
    S = np.zeros((len(reactions), len(db.names)), dtype=np.int64)
    for j, r in enumerate(reactions):
        for sp, nu in r.stoichiometry.items():
            S[j, db.index(sp)] = nu
    return S


class ReactionNetwork:
    """Vectorised rate evaluation for a fixed reaction list."""

    def __init__(self, reactions=None, db: SpeciesSet | None = None):
        self.db = default_species() if db is None else db
        self.reactions = default_reactions() if reactions is None else tuple(reactions)
        errs = [e for r in self.reactions for e in r.validate(self.db)]
        if errs:
            raise ValueError("; ".join(errs))
        self.S = stoichiometry_matrix(self.reactions, self.db)
        self.S.setflags(write=False)
        ns = self.db.n_solids
        self._terms = []
        for r in self.reactions:
            conv = r.tuning * r.k_r
            if r.source_unit == "kg_m3_s":
                conv /= self.db.molar_mass[self.db.index(r.reference_species)]
            elif r.source_unit == "per_hour":
                conv /= 3600.0
            conc = [(self.db.index(sp), a) for sp, a in r.orders.items() if a != 0]
            pres = [(self.db.index(sp) - ns, b) for sp, b in r.pressure_orders.items() if b != 0]
            self._terms.append((r.phase == "solid", conv, r.n, r.activation_energy, conc, pres))

    def rates(self, T_s, T_g, P, C_s, C_g, clamp: bool = False):
        """Reaction rates in mol/(m3 s), shape ``T_s.shape + (n_reactions,)``.

        Concentrations enter the power law in mol/L and partial pressures in
        bar. With ``clamp`` negative concentrations count as zero; otherwise
        they raise.
        """
        C_s = np.asarray(C_s, dtype=float)
        C_g = np.asarray(C_g, dtype=float)
        if clamp:
            C_s = np.maximum(C_s, 0.0)
            C_g = np.maximum(C_g, 0.0)
        elif np.any(C_s < 0) or np.any(C_g < 0):
            raise ValueError("negative concentration passed to reaction_rates")
        C = np.concatenate([C_s, C_g], axis=-1) * 1e-3
        T_s = np.asarray(T_s, dtype=float)
        T_g = np.asarray(T_g, dtype=float)
        tot = np.sum(C_g, axis=-1)
        x = C_g / np.where(tot > 0, tot, 1.0)[..., None]
        P_bar = np.asarray(P, dtype=float) / BAR
        out = np.empty(np.broadcast(T_s, T_g).shape + (len(self._terms),))
        for j, (solid, conv, n, E, conc, pres) in enumerate(self._terms):
            T = T_s if solid else T_g
            r = conv * np.exp(-E / (R * T))
            if n:
                r = r * T**n
            for i, a in conc:
                r = r * C[..., i] ** a
            for i, b in pres:
                r = r * (x[..., i] * P_bar) ** b
            out[..., j] = r
        return out

    def production(self, r):
        """(R_s, R_g) = S^T r split by phase."""
        Rall = np.asarray(r, dtype=float) @ self.S
        ns = self.db.n_solids
        return Rall[..., :ns], Rall[..., ns:]


def reaction_rates(T_s, T_g, P, C_s, C_g, reactions=None, db: SpeciesSet | None = None):
    return ReactionNetwork(reactions, db).rates(T_s, T_g, P, C_s, C_g)


def production_rates(r, reactions=None, db: SpeciesSet | None = None):
    return ReactionNetwork(reactions, db).production(r)
