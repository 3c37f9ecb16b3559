import io
import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wrmf import cli, verify
from wrmf.landscape import ModelParams
from wrmf.phase import order_parameter, pressure
from wrmf.tables import from_csv, sidecar_path, to_csv, to_json, write_tables


def run(argv):
    out = io.StringIO()
    code = cli.main(argv, out)
    return code, out.getvalue()


def sections(text):
    """Split stdout CSV into ``{name: table}`` on ``# name`` lines."""
    tables, name, buf = {}, None, []
    for line in text.splitlines(keepends=True):
        if line.startswith("# "):
            if name is not None:
                tables[name] = from_csv("".join(buf).strip("\n") + "\n")
            name, buf = line[2:].strip(), []
        else:
            buf.append(line)
    tables[name] = from_csv("".join(buf).strip("\n") + "\n")
    return tables


class TestTables:
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
    def test_csv_round_trip_exact(self, xs):
        back = from_csv(to_csv({"x": xs}))["x"]
        assert [float(v) for v in back] == xs

    def test_cells(self):
        text = to_csv({"b": [True, False], "i": [3, -4], "s": ["R", "M"], "f": [math.nan, 0.1]})
        assert text == "b,i,s,f\ntrue,3,R,nan\nfalse,-4,M,0.10000000000000001\n"
        assert "\r" not in text

    def test_ragged(self):
        with pytest.raises(ValueError):
            to_csv({"a": [1], "b": [1, 2]})

    def test_json_nan_is_null(self):
        doc = json.loads(to_json({"t": {"x": [1.0, math.nan]}}, {"version": "x"}))
        assert list(doc) == ["meta", "t"]
        assert doc["t"]["x"] == [1.0, None]

    def test_sidecars(self, tmp_path):
        out = tmp_path / "run.csv"
        paths = write_tables({"main": {"x": [1]}, "fits": {"y": [2]}}, out, "csv", None)
        assert paths == [out, sidecar_path(out, "fits")]
        assert (tmp_path / "run.fits.csv").read_text() == "y\n2\n"


class TestParsing:
    def test_grid(self):
        np.testing.assert_array_equal(cli.parse_grid("-2:4:4"), [-2.0, 0.0, 2.0, 4.0])

    @pytest.mark.parametrize("bad", ["1:2", "a:b:3", "2:1:3", "0:1:0", "0:1:2.5"])
    def test_bad_grid_exits_1(self, bad):
        assert run(["phase-diagram", "--mu0-grid", bad])[0] == 1

    def test_bad_flags(self):
        assert run(["eos", "--a", "-1"])[0] == 1
        assert run(["phase-diagram", "--jobs", "0"])[0] == 1
        assert run(["verify", "--tol", "nonsense=1"])[0] == 1
        with pytest.raises(SystemExit) as exc:
            cli.main(["no-such-command"], io.StringIO())
        assert exc.value.code == 1

    def test_config_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# sweep\na = 3\nmu0_grid = 0:1:2\nmu1_grid = 0:1:2\n")
        code, text = run(["phase-diagram", "--config", str(cfg), "--a", "2", "--format", "json", "--no-meta"])
        assert code == 0
        doc = json.loads(text)
        assert doc["phase_diagram"]["mu0"] == [0.0, 0.0, 1.0, 1.0]
        code, text = run(["phase-diagram", "--config", str(cfg), "--format", "json"])
        assert json.loads(text)["meta"]["config"]["a"] == 3.0
        code, text = run(["phase-diagram", "--config", str(cfg), "--a", "2", "--format", "json"])
        assert json.loads(text)["meta"]["config"]["a"] == 2.0


class TestDeterminism:
    ARGS = ["phase-diagram", "--mu0-grid", "-2:4:9", "--mu1-grid", "-2:4:9"]

    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_byte_identical(self, fmt, tmp_path):
        outs = []
        for k, jobs in enumerate(("1", "1", "2")):
            path = tmp_path / f"r{k}.{fmt}"
            assert run([*self.ARGS, "--format", fmt, "--no-meta", "--jobs", jobs, "--output", str(path)])[0] == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1] == outs[2]
        assert b"\r\n" not in outs[0]

    def test_meta_present_by_default(self):
        doc = json.loads(run([*self.ARGS, "--format", "json"])[1])
        assert doc["meta"]["command"] == "phase-diagram"
        assert "created" in doc["meta"]


class TestCommands:
    def test_phase_diagram(self):
        code, text = run(["phase-diagram", "--mu0-grid", "-2:4:13", "--mu1-grid", "-2:4:13"])
        assert code == 0
        t = sections(text)
        pd, sp = t["phase_diagram"], t["spinodal"]
        for m0, m1, region, n, inside in zip(pd["mu0"], pd["mu1"], pd["region"], pd["n_fixed_points"], pd["in_spinodal"]):
            if m0 == m1 and m0 > 1.0:
                assert region == "M"
            elif m0 != m1:
                assert region == "R"
            assert n == (3 if inside else 1)
        assert min(sp["xi"]) >= 1.0

    def test_landscape(self):
        code, text = run(["landscape", "--mu0", "2", "--mu1", "2", "--y-grid", "-10:10:41"])
        assert code == 0
        t = sections(text)
        assert len(t["landscape"]["y"]) == 41
        fp = t["fixed_points"]
        assert len(fp["y"]) == 3
        assert fp["is_maximizer"] == [True, False, True]

    def test_eos_one_component_jump(self):
        code, text = run(["eos", "--mode", "one", "--a", "5", "--theta", "1", "--mu-grid", "-1:1:5"])
        assert code == 0
        t = sections(text)
        eos, jump = t["eos"], t["jump"]
        assert max(eos["residual"]) <= 1e-12
        assert jump["delta_rho"][0] == pytest.approx(order_parameter(5.0, 0.0) / 5.0, rel=1e-12)
        assert jump["ybar_over_a"][0] == pytest.approx(jump["delta_rho"][0], rel=1e-12)
        branches = [b for m, b in zip(eos["mu"], eos["branch"]) if m == 0.0]
        assert branches == ["left", "right"]

    def test_eos_two_component(self):
        code, text = run(["eos", "--mode", "two", "--mu0-grid", "0:2:3", "--mu1-grid", "0:2:3"])
        assert code == 0
        eos = sections(text)["eos"]
        for m0, m1, region, p, warn in zip(eos["mu0"], eos["mu1"], eos["region"], eos["p"], eos["warning"]):
            if region == "C":
                assert math.isnan(p) and warn
            else:
                assert p == pytest.approx(pressure(ModelParams(1.0, m0, m1)), rel=1e-15)

    def test_maxwell(self):
        code, text = run(["maxwell", "--theta", "2", "--ratio-list", "1.5,3,10"])
        assert code == 0
        t = sections(text)
        mx = t["maxwell"]
        for res, p in zip(mx["residual"], mx["plateau_stable"]):
            assert abs(res) <= 1e-10 * (1 + abs(p))
        assert "plateau" in mx
        curve = t["curve"]
        ratio0 = [(r, p) for a, r, p in zip(curve["a"], curve["rho"], curve["p_hat_formal"]) if a == curve["a"][0]]
        dp = np.diff([p for _, p in ratio0])
        assert (dp < 0).any() and (dp > 0).any()

    def test_finite_volume(self):
        code, text = run(["finite-volume", "--mu0", "2", "--mu1", "0", "--V-list", "25,50,100,200"])
        assert code == 0
        t = sections(text)
        fvt = t["finite_volume"]
        assert all(x > y for x, y in zip(fvt["F_error"], fvt["F_error"][1:]))
        for e, b in zip(fvt["u_error"], fvt["u_bound"]):
            assert e <= b
        fits = t["fits"]
        slopes = dict(zip(fits["quantity"], fits["slope"]))
        assert set(slopes) == {"F_error", "u_error", "y_error"}
        assert all(s <= -0.9 for s in slopes.values())


class TestVerify:
    def test_impossible_tolerance_exits_3(self):
        code, text = run(["verify", "--tol", "lambert_identity=1e-20"])
        assert code == 3
        rep = json.loads(text)
        assert rep["failed"] == ["lambert_identity"]

    def test_report_schema(self, tmp_path):
        path = tmp_path / "report.json"
        code, _ = run(["verify", "--output", str(path)])
        assert code == 0
        rep = json.loads(path.read_text())
        jsonschema.validate(rep, verify.report_schema())
        assert rep["passed"] and len(rep["checks"]) == 12
