import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kilnsim.kinetics import (ReactionNetwork, default_reactions, load_reactions, production_rates,
                              reaction_rates, stoichiometry_matrix, with_tuning)
from kilnsim.thermo import GASES, SOLIDS, default_species

DB = default_species()
NET = ReactionNetwork()


def _state(solids=None, gases=None):
    cs = np.zeros(len(SOLIDS))
    cg = np.zeros(len(GASES))
    for k, v in (solids or {}).items():
        cs[SOLIDS.index(k)] = v
    for k, v in (gases or {}).items():
        cg[GASES.index(k)] = v
    return cs, cg


def test_eleven_reactions_with_default_tuning():
    rx = default_reactions()
    assert [r.id for r in rx] == [f"r{i}" for i in range(1, 12)]
    assert [r.tuning for r in rx[:6]] == [5.0, 200.0, 60.0, 5e3, 5e6, 3e4]


def test_stoichiometry_annihilated_by_element_matrix():
    S = stoichiometry_matrix()
    assert S.dtype == np.int64
    assert np.array_equal(DB.element_matrix @ S.T, np.zeros((9, 11), dtype=np.int64))


def test_stoichiometry_rows():
    S = stoichiometry_matrix()
    col = {n: i for i, n in enumerate(SOLIDS + GASES)}
    row = lambda j: {n: int(S[j, i]) for n, i in col.items() if S[j, i]}
    assert row(1) == {"CaO": -2, "SiO2": -1, "C2S": 1}
    assert row(4) == {"CaO": -4, "Al2O3": -1, "Fe2O3": -1, "C4AF": 1}
    assert row(7) == {"H2": -2, "O2": -1, "H2O": 2}


def test_unit_rate_production():
    r = np.zeros(11)
    r[1] = 1.0
    R_s, R_g = production_rates(r)
    expected = np.zeros(len(SOLIDS))
    expected[SOLIDS.index("CaO")] = -2
    expected[SOLIDS.index("SiO2")] = -1
    expected[SOLIDS.index("C2S")] = 1
    np.testing.assert_array_equal(R_s, expected)
    np.testing.assert_array_equal(R_g, np.zeros(len(GASES)))


def test_calcination_rate_hand_value():
    cs, cg = _state({"CaCO3": 100.0}, {"N2": 8.0})
    r = reaction_rates(1100.0, 1100.0, 1e5, cs, cg)
    hand = 1e8 * math.exp(-175700 / (8.314462618 * 1100)) * 0.1 / 0.10009 * 5
    assert hand == pytest.approx(2.266969, rel=1e-6)
    assert r[0] == pytest.approx(hand, rel=1e-12)
    assert np.all(r[1:] == 0.0)


def test_char_gasification_pressure_order():
    cs, cg = _state(gases={"C_sus": 1.0, "H2O": 1.0, "N2": 8.0})
    cs2, cg2 = _state(gases={"C_sus": 1.0, "H2O": 2.0, "N2": 7.0})
    r1 = reaction_rates(1500.0, 1500.0, 1e5, cs, cg)
    r2 = reaction_rates(1500.0, 1500.0, 1e5, cs2, cg2)
    assert r2[9] / r1[9] == pytest.approx(2.0**0.57, rel=1e-12)


def test_zero_reactant_zero_rate():
    cs, cg = _state({"CaO": 500.0}, {"N2": 8.0, "O2": 2.0})
    r = reaction_rates(1700.0, 1700.0, 1e5, cs, cg)
    assert np.all(r == 0.0)


def test_negative_concentration_rejected():
    cs, cg = _state({"CaCO3": -1.0}, {"N2": 8.0})
    with pytest.raises(ValueError):
        reaction_rates(1100.0, 1100.0, 1e5, cs, cg)
    r = NET.rates(1100.0, 1100.0, 1e5, cs, cg, clamp=True)
    assert r[0] == 0.0


def test_tuning_override():
    cs, cg = _state({"CaO": 500.0, "SiO2": 150.0}, {"N2": 8.0})
    base = reaction_rates(1500.0, 1500.0, 1e5, cs, cg)
    rx = with_tuning(default_reactions(), {"r2": 1.0})
    r = reaction_rates(1500.0, 1500.0, 1e5, cs, cg, reactions=rx)
    assert r[1] == pytest.approx(base[1] / 200.0, rel=1e-14)
    with pytest.raises(KeyError):
        with_tuning(default_reactions(), {"r99": 1.0})


def test_file_round_trip(tmp_path):
    import dataclasses
    import json
    data = {"reactions": [dataclasses.asdict(r) for r in default_reactions()]}
    p = tmp_path / "rx.json"
    p.write_text(json.dumps(data))
    assert load_reactions(p) == default_reactions()


def test_invalid_reaction_rejected():
    import dataclasses
    bad = dataclasses.replace(default_reactions()[0], stoichiometry={"Unobtainium": 1})
    with pytest.raises(ValueError):
        ReactionNetwork([bad])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0, 2000), min_size=17, max_size=17), st.floats(600, 2500), st.floats(600, 2500))
def test_rates_nonnegative_and_conserve_elements(c, T_s, T_g):
    c = np.array(c)
    r = NET.rates(T_s, T_g, 1e5, c[:9], c[9:] + 1e-3)
    assert np.all(r >= 0) and np.all(np.isfinite(r))
    R_s, R_g = NET.production(r)
    prod = np.concatenate([R_s, R_g])
    scale = np.max(np.abs(prod)) + 1e-300
    assert np.all(np.abs(DB.element_matrix @ prod) <= 1e-12 * scale * 20)
