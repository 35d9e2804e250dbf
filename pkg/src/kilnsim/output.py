"""Delimited-text writers for profiles, outlet time series and the run summary, plus figures."""
from __future__ import annotations

import csv
import os
import tempfile
from pathlib import Path

import numpy as np

from .balances import IG, IP, IS, ITG, ITH, ITS, ITW, KilnModel
from .integrator import Trajectory
from .thermo import ELEMENTS

PROFILE_FILE = "profiles.csv"
TIMESERIES_FILE = "timeseries.csv"
SUMMARY_FILE = "summary.csv"
FIGURES = ("temperatures.png", "outlet.png", "solid_profile.png")

_OXIDES = {"Ca": ("CaO", 1.0), "Si": ("SiO2", 1.0), "Al": ("Al2O3", 0.5), "Fe": ("Fe2O3", 0.5)}


def profile_columns(model: KilnModel) -> list[str]:
    return (["time_s", "segment", "z_m"] + [f"C_{n}_mol_m3" for n in model.db.names]
            + ["T_s_K", "T_g_K", "T_w_K", "P_Pa", "theta_rad", "v_s_m_s", "v_g_m_s"])


def timeseries_columns(model: KilnModel) -> list[str]:
    ns = model.db.n_solids
    return (["time_s"] + [f"clinker_{n}_mass_pct" for n in model.db.names[:ns]]
            + [f"gas_{n}_mol_pct" for n in model.db.names[ns:]]
            + ["pressure_drop_Pa", "solid_exit_velocity_m_s", "gas_exit_velocity_m_s"])


def oxide_mass_fractions(C_s, model: KilnModel) -> dict:
    """CaO, SiO2, Al2O3 and Fe2O3 mass fractions of a solid mixture on an oxide basis."""
    db = model.db
    ns = db.n_solids
    el = np.asarray(C_s, dtype=float) @ db.element_matrix[:, :ns].T
    mass = {}
    for e, (ox, per) in _OXIDES.items():
        mass[ox] = el[ELEMENTS.index(e)] * per * db[ox].molar_mass
    tot = sum(mass.values())
    return {k: v / tot for k, v in mass.items()}


def feed_kpis(C_s, model: KilnModel) -> dict:
    """Lime saturation factor, silica modulus and alumina modulus."""
    w = oxide_mass_fractions(C_s, model)
    c, s, a, f = w["CaO"], w["SiO2"], w["Al2O3"], w["Fe2O3"]
    return {
        "LSF": 100.0 * c / (2.8 * s + 1.2 * a + 0.65 * f),
        "MS": s / (a + f) if a + f > 0 else float("nan"),
        "MA": a / f if f > 0 else float("nan"),
    }


def outlet_quantities(model: KilnModel, x, y) -> dict:
    """Clinker mass %, gas mole %, pressure drop and exit speeds for one state."""
    _, _, info = model.evaluate(x, y, details=True)
    db = model.db
    m = x[-1, IS] * db.molar_mass[: db.n_solids]
    c = x[0, IG]
    P = y[:, IP]
    # faces by linear extrapolation of the cell pressures
    p_in = 1.5 * P[-1] - 0.5 * P[-2]
    p_out = 1.5 * P[0] - 0.5 * P[1]
    return {
        "clinker_mass_pct": 100.0 * m / m.sum() if m.sum() > 0 else np.zeros_like(m),
        "gas_mol_pct": 100.0 * c / c.sum(),
        "pressure_drop_Pa": float(p_in - p_out),
        "solid_exit_velocity_m_s": float(info["v_s_face"][-1]),
        "gas_exit_velocity_m_s": float(-info["v_g_face"][0]),
        "info": info,
    }


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _profile_rows(model, traj):
    z = model.p.dims.centers
    for t, x, y in zip(traj.times, traj.x, traj.y):
        _, _, info = model.evaluate(x, y, details=True)
        vg = 0.5 * (info["v_g_face"][:-1] + info["v_g_face"][1:])
        for k in range(model.n):
            yield ([t, k, z[k]] + list(x[k, IS]) + list(x[k, IG])
                   + [y[k, ITS], y[k, ITG], y[k, ITW], y[k, IP], y[k, ITH], info["v_s"][k], vg[k]])


def _timeseries_rows(model, traj):
    for t, x, y in zip(traj.times, traj.x, traj.y):
        q = outlet_quantities(model, x, y)
        yield ([t] + list(q["clinker_mass_pct"]) + list(q["gas_mol_pct"])
               + [q["pressure_drop_Pa"], q["solid_exit_velocity_m_s"], q["gas_exit_velocity_m_s"]])


def summary_rows(model: KilnModel, traj: Trajectory, extra: dict | None = None):
    """(key, value, unit) rows describing the final state of the run."""
    x, y = traj.x[-1], traj.y[-1]
    db = model.db
    ns = db.n_solids
    q = outlet_quantities(model, x, y)
    rows = [("final_time", traj.times[-1], "s"), ("segments", model.n, "-")]
    feed = model.N_s_in / max(model.p.bc.solid_feed.velocity, 1e-300)
    rows += [(k, v, "-") for k, v in feed_kpis(feed, model).items()]
    rows += [(f"clinker_{n}", v, "mass %") for n, v in zip(db.names[:ns], q["clinker_mass_pct"])]
    rows += [(f"gas_outlet_{n}", v, "mol %") for n, v in zip(db.names[ns:], q["gas_mol_pct"])]
    rows += [
        ("pressure_drop", q["pressure_drop_Pa"], "Pa"),
        ("solid_exit_velocity", q["solid_exit_velocity_m_s"], "m/s"),
        ("gas_exit_velocity", q["gas_exit_velocity_m_s"], "m/s"),
        ("T_s_min", float(y[:, ITS].min()), "K"), ("T_s_max", float(y[:, ITS].max()), "K"),
        ("T_g_min", float(y[:, ITG].min()), "K"), ("T_g_max", float(y[:, ITG].max()), "K"),
        ("T_w_min", float(y[:, ITW].min()), "K"), ("T_w_max", float(y[:, ITW].max()), "K"),
        ("steps", len(traj.steps), "-"),
        ("settling_time", traj.steady_time if traj.steady_time is not None else "nan", "s"),
        ("wall_time", traj.wall_time, "s"),
    ]
    for k, v in (extra or {}).items():
        rows.append((k, v[0], v[1]) if isinstance(v, tuple) else (k, v, "-"))
    return rows


def _figures(model: KilnModel, traj: Trajectory, folder: Path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    z = model.p.dims.centers
    times = np.array(traj.times) / 3600.0
    cmap = plt.get_cmap("viridis")
    norm = max(times[-1], 1e-12)

    fig, axes = plt.subplots(1, 3, figsize=(13, 4), sharey=True)
    for ax, j, name in zip(axes, (ITS, ITG, ITW), ("solid", "gas", "wall")):
        for t, y in zip(times, traj.y):
            ax.plot(z, y[:, j] - 273.15, color=cmap(t / norm), lw=1)
        ax.set_title(name)
        ax.set_xlabel("z [m]")
    axes[0].set_ylabel("T [°C]")
    fig.colorbar(plt.cm.ScalarMappable(norm=plt.Normalize(0, times[-1]), cmap=cmap),
                 ax=axes, label="time [h]")
    fig.savefig(folder / FIGURES[0], dpi=110)
    plt.close(fig)

    db = model.db
    ns = db.n_solids
    out = [outlet_quantities(model, x, y) for x, y in zip(traj.x, traj.y)]
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(11, 4))
    cl = np.array([o["clinker_mass_pct"] for o in out])
    gs = np.array([o["gas_mol_pct"] for o in out])
    for i, n in enumerate(db.names[:ns]):
        a1.plot(times, cl[:, i], label=n)
    for n in ("CO2", "O2", "CO", "H2O"):
        a2.plot(times, gs[:, db.names[ns:].index(n)], label=n)
    a1.set(xlabel="time [h]", ylabel="mass %", title="solid outlet")
    a2.set(xlabel="time [h]", ylabel="mol %", title="gas outlet")
    a1.legend(fontsize=7)
    a2.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(folder / FIGURES[1], dpi=110)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 4))
    mass = traj.x[-1][:, IS] * db.molar_mass[:ns]
    for i, n in enumerate(db.names[:ns]):
        ax.plot(z, mass[:, i], marker="o", ms=3, label=n)
    ax.set(xlabel="z [m]", ylabel="kg/m³", title=f"solid mass concentration at t = {times[-1]:.1f} h")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(folder / FIGURES[2], dpi=110)
    plt.close(fig)


def write_outputs(traj: Trajectory, model: KilnModel, path, fmt: str = "csv",
                  extra_summary: dict | None = None, figures: bool = True) -> list[Path]:
    """Write profiles, outlet time series, summary and figures into ``path``.

    Everything is rendered in a scratch directory first and moved into place
    only when complete, so a failure leaves no partial set behind.
    """
    if fmt != "csv":
        raise ValueError(f"unsupported output format {fmt!r}")
    if traj is None or len(traj) == 0:
        raise ValueError("trajectory is empty")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    names = [PROFILE_FILE, TIMESERIES_FILE, SUMMARY_FILE] + (list(FIGURES) if figures else [])
    with tempfile.TemporaryDirectory(dir=out) as tmp:
        tmp = Path(tmp)
        _write_csv(tmp / PROFILE_FILE, profile_columns(model), _profile_rows(model, traj))
        _write_csv(tmp / TIMESERIES_FILE, timeseries_columns(model), _timeseries_rows(model, traj))
        _write_csv(tmp / SUMMARY_FILE, ["quantity", "value", "unit"], summary_rows(model, traj, extra_summary))
        if figures:
            _figures(model, traj, tmp)
        for n in names:
            os.replace(tmp / n, out / n)
    return [out / n for n in names]
