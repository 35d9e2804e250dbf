import csv
import math
from pathlib import Path

import pytest

from kilnsim import run_scenario, write_outputs
from kilnsim.integrator import Trajectory
from kilnsim.output import FIGURES, PROFILE_FILE, SUMMARY_FILE, TIMESERIES_FILE, feed_kpis, outlet_quantities
from kilnsim.scenario import reference_scenario, with_overrides
from kilnsim.thermo import SOLIDS

GOLDEN = Path(__file__).parent / "golden"
M = {"CaO": 56.0774, "SiO2": 60.0843, "Al2O3": 101.9613, "Fe2O3": 159.6882}


@pytest.fixture(scope="module")
def short_run():
    s = with_overrides(reference_scenario(), n_segments=3)
    return run_scenario(s, duration=60.0, cadence=0.0)


@pytest.fixture(scope="module")
def written(short_run, tmp_path_factory):
    out = tmp_path_factory.mktemp("out")
    write_outputs(short_run.trajectory, short_run.model, out)
    return out


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_golden_headers(written):
    for name, golden in ((PROFILE_FILE, "profiles.header"), (TIMESERIES_FILE, "timeseries.header")):
        header = (written / name).read_text().splitlines()[0]
        assert header == (GOLDEN / golden).read_text().strip(), name
    quantities = [r[0] for r in _rows(written / SUMMARY_FILE)]
    assert quantities == (GOLDEN / "summary.quantities").read_text().split()


def test_row_counts(written, short_run):
    traj = short_run.trajectory
    assert len(_rows(written / PROFILE_FILE)) == 1 + 3 * len(traj)
    assert len(_rows(written / TIMESERIES_FILE)) == 1 + len(traj)
    for name in FIGURES:
        assert (written / name).stat().st_size > 0


def test_values_parse_and_match_state(written, short_run):
    rows = _rows(written / PROFILE_FILE)
    head = rows[0]
    last = rows[-3:]
    x, y = short_run.trajectory.x[-1], short_run.trajectory.y[-1]
    for k, row in enumerate(last):
        rec = dict(zip(head, row))
        assert int(rec["segment"]) == k
        assert float(rec["T_s_K"]) == y[k, 0]
        assert float(rec["C_CaO_mol_m3"]) == x[k, SOLIDS.index("CaO")]


def test_timeseries_compositions_sum_to_100(written):
    rows = _rows(written / TIMESERIES_FILE)
    head = rows[0]
    clinker = [i for i, h in enumerate(head) if h.startswith("clinker_")]
    gas = [i for i, h in enumerate(head) if h.startswith("gas_") and h.endswith("_mol_pct")]
    for row in rows[1:]:
        assert sum(float(row[i]) for i in clinker) == pytest.approx(100.0)
        assert sum(float(row[i]) for i in gas) == pytest.approx(100.0)


def test_empty_trajectory_writes_nothing(short_run, tmp_path):
    with pytest.raises(ValueError):
        write_outputs(Trajectory(), short_run.model, tmp_path)
    assert list(tmp_path.iterdir()) == []


def test_unknown_format_rejected(short_run, tmp_path):
    with pytest.raises(ValueError):
        write_outputs(short_run.trajectory, short_run.model, tmp_path, fmt="xlsx")
    assert list(tmp_path.iterdir()) == []


def test_feed_kpis(short_run):
    m = short_run.model
    feed = reference_scenario().bc.solid_feed.composition
    w = {k: feed[k] * M[k] for k in M}
    lsf = 100 * w["CaO"] / (2.8 * w["SiO2"] + 1.2 * w["Al2O3"] + 0.65 * w["Fe2O3"])
    ms = w["SiO2"] / (w["Al2O3"] + w["Fe2O3"])
    ma = w["Al2O3"] / w["Fe2O3"]
    k = feed_kpis(m.N_s_in, m)
    assert k["LSF"] == pytest.approx(lsf, rel=1e-4)
    assert k["MS"] == pytest.approx(ms, rel=1e-4)
    assert k["MA"] == pytest.approx(ma, rel=1e-4)
    assert k["LSF"] == pytest.approx(95.02, abs=0.01)


def test_outlet_quantities_initial_state(short_run):
    traj = short_run.trajectory
    q = outlet_quantities(short_run.model, traj.x[0], traj.y[0])
    # linear initial pressure from 1.00005 bar to 1.00010 bar over the kiln
    assert q["pressure_drop_Pa"] == pytest.approx(5.0, rel=1e-6)
    assert q["gas_exit_velocity_m_s"] > 0
    assert math.isfinite(q["solid_exit_velocity_m_s"])
    assert q["gas_mol_pct"].sum() == pytest.approx(100.0)
