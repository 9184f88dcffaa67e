import json

import numpy as np
import pytest

from romwalk.io import (
    COMPOSED_COLUMNS,
    ExportError,
    csv_text,
    export,
    export_csv,
    export_json,
    import_json,
    json_text,
)
from romwalk.planner import ComposedTrajectory, identify_p2_orbit, plan_transition_hlip
from romwalk.rom import DSP, SSP, RomParams


def test_gait_round_trip(default_gait, tmp_path):
    g, _ = default_gait
    back = import_json(export_json(g, tmp_path / "gait.json"))
    for a, b in zip(g.phases, back.phases):
        for name in ("t", "X", "Ldd", "u", "feet"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert back.spec == g.spec and back.params == g.params and back.law == g.law


def test_orbit_round_trip(tmp_path):
    o = identify_p2_orbit(RomParams(z0=0.9), 0.4, 0.1, 0.2)
    back = import_json(export(o, "json", tmp_path / "o.json"))
    assert (back.sigma2, back.y0, back.yd0, back.w) == (o.sigma2, o.y0, o.yd0, o.w)
    assert json_text(back) == json_text(o)


def test_lateral_round_trip(tmp_path):
    p = RomParams(z0=0.9)
    half = 0.5 * p.m * p.g
    lat = plan_transition_hlip([0.1, 0.0], [0.0, 0.05], [(DSP, 0.3, 10), (SSP, 0.3, 10)],
                               lambda t: half, lambda t: half, p)
    path = export_json(lat, tmp_path / "lat.json")
    back = import_json(path)
    np.testing.assert_array_equal(back.Y, lat.Y)
    assert back.domains == lat.domains
    assert json.loads(path.read_text())["kind"] == "lateral_transition"
    rows = export_csv(lat, tmp_path / "lat.csv").read_text().splitlines()
    assert rows[0] == "t,y,ydot,u_L,u_R,F_L,F_R" and len(rows) == lat.N + 1


def test_empty_composed_trajectory_is_header_only(tmp_path):
    empty = ComposedTrajectory(np.zeros(0), np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), np.zeros(0),
                               [], None, None)
    text = export_csv(empty, tmp_path / "c.csv").read_text()
    assert text == ",".join(COMPOSED_COLUMNS) + "\n"


def test_csv_floats_are_exact():
    x = 0.1 + 0.2
    line = csv_text(["v"], [[x]]).splitlines()[1]
    assert float(line) == x


def test_unwritable_path_raises(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    o = identify_p2_orbit(RomParams(), 0.4, 0.1, 0.0)
    with pytest.raises(ExportError, match="cannot write"):
        export_json(o, blocker / "sub" / "o.json")
    with pytest.raises(ExportError, match="cannot read"):
        import_json(tmp_path / "missing.json")
    with pytest.raises(ValueError):
        export(o, "xml", tmp_path / "o.xml")
    with pytest.raises(TypeError):
        export_json(object(), tmp_path / "x.json")
