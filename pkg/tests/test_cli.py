import csv
import io
import json

import numpy as np
import pytest

from bifrac.cli import main, parse_range, parse_sweep, UsageError
from bifrac.fock import FockState, glauber_column


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_grid(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    return {(float(r["alpha"]), float(r["beta"])): complex(float(r["re"]), float(r["im"])) for r in rows}


class TestKernel:
    def test_fourier_value(self, capsys):
        code, out, _ = run(capsys, "kernel", "--theta", "1.5708", "--x", "0", "--y", "0")
        assert code == 0 and out == "0.39894+0.00000i\n"

    def test_exact_quarter_turn(self, capsys):
        code, out, _ = run(capsys, "kernel", "--theta", str(np.pi / 2), "--x", "1", "--y", "0.5")
        z = np.exp(0.5j) / np.sqrt(2 * np.pi)
        assert out == f"{z.real:.5f}{z.imag:+.5f}i\n"

    def test_delta_angle(self, capsys):
        code, _, err = run(capsys, "kernel", "--theta", "0", "--x", "0", "--y", "0")
        assert code == 3 and "SpecialAngle" in err

    def test_compose(self, capsys):
        code, out, _ = run(capsys, "kernel", "--compose", "0.3", "0.4", "--x", "0.5", "--z", "-0.2")
        lines = out.splitlines()
        assert code == 0 and len(lines) == 2 and lines[0] == lines[1]

    def test_missing_y(self, capsys):
        assert run(capsys, "kernel", "--theta", "0.3", "--x", "0")[0] == 2


class TestStateStats:
    @pytest.fixture(scope="class")
    @staticmethod
    def sweep(tmp_path_factory):
        path = tmp_path_factory.mktemp("stats") / "fig1.csv"
        assert main(["state-stats", "--alpha", "2", "--beta", "2", "--sweep-theta-alpha", "0.05:1.5:0.05",
                     "-o", str(path)]) == 0
        return list(csv.DictReader(path.open()))

    def test_header_and_rows(self, sweep):
        assert list(sweep[0]) == ["theta_alpha", "sigma_pp", "mean_n", "g2", "norm_captured", "rs_residual"]
        assert len(sweep) == 30
        assert sweep[-1]["theta_alpha"] == "1.5"

    def test_antibunching_crossing(self, sweep):
        g2 = {float(r["theta_alpha"]): float(r["g2"]) for r in sweep}
        assert g2[0.75] < 1 < g2[0.85]

    def test_rs_column(self, sweep):
        assert max(abs(float(r["rs_residual"])) for r in sweep) < 1e-6

    def test_vacuum(self, capsys):
        code, out, _ = run(capsys, "state-stats", "--alpha", "0", "--beta", "0", "--theta-alpha", "0")
        row = out.splitlines()[1].split(",")
        assert code == 0 and float(row[2]) == 0

    def test_infinitely_squeezed_refused(self, capsys):
        # at theta_alpha = pi/2 (theta_beta = 0) the state is not normalizable
        code, _, err = run(capsys, "state-stats", "--alpha", "0", "--beta", "0", "--theta-alpha", "1.5708")
        assert code == 3 and "ForbiddenBand" in err

    def test_general_route(self, capsys):
        code, out, _ = run(capsys, "state-stats", "--alpha", "1", "--beta", "0.5", "--theta-alpha", "0.6",
                           "--theta-beta", "0.3")
        row = dict(zip(*[line.split(",") for line in out.splitlines()]))
        assert code == 0 and abs(float(row["rs_residual"])) < 1e-6

    def test_bad_sweep(self, capsys):
        assert run(capsys, "state-stats", "--alpha", "0", "--beta", "0", "--sweep-theta-alpha", "1:0:0.1")[0] == 2


class TestGrid:
    def test_wigner_vacuum_peak(self, capsys):
        code, out, _ = run(capsys, "grid", "--kind", "wigner", "--op", "fock:0", "--range", "-3:3:61")
        g = read_grid(out)
        assert code == 0 and len(g) == 61 * 61
        peak = max(g, key=lambda k: g[k].real)
        assert peak == (0.0, 0.0) and g[peak].real == pytest.approx(1, abs=1e-8)

    def test_husimi(self, capsys):
        code, out, _ = run(capsys, "grid", "--kind", "q", "--op", "fock:0", "--angles", "1.5708", "1.5708")
        assert code == 0
        assert read_grid(out)[(1.0, 0.0)].real == pytest.approx(0.3679, abs=1e-4)

    def test_bifrac_zero_angles_relabels_weyl(self, capsys):
        _, weyl, _ = run(capsys, "grid", "--kind", "weyl", "--op", "coherent:1,0.5", "--range", "-2:2:21")
        _, bif, _ = run(capsys, "grid", "--kind", "bifrac-wigner", "--theta-alpha", "0", "--theta-beta", "0",
                        "--op", "coherent:1,0.5", "--range", "-2:2:21")
        w, b = read_grid(weyl), read_grid(bif)
        # A(a, b; 0, 0) = W~(b, -a), value strings identical
        wl = {k: line.split(",", 2)[2] for k, line in zip(w, weyl.splitlines()[1:])}
        bl = {k: line.split(",", 2)[2] for k, line in zip(b, bif.splitlines()[1:])}
        assert all(bl[(a, c)] == wl[(c, -a + 0.0)] for a, c in b)

    def test_verify_oracle(self, capsys, tmp_path):
        out = tmp_path / "a.csv"
        code, _, err = run(capsys, "grid", "--kind", "bifrac-wigner", "--angles", "0.6", "0.3", "--op", "fock:0",
                           "--verify-oracle", "-o", str(out))
        assert code == 0
        assert json.loads(err)["oracle_max_deviation"] < 2e-3
        meta = json.loads((tmp_path / "a.csv.meta.json").read_text())
        assert meta["trusted"] and meta["oracle"]["max_deviation"] < 2e-3

    def test_json(self, capsys):
        code, out, _ = run(capsys, "grid", "--kind", "weyl", "--op", "fock:1", "--range", "-1:1:3", "--format", "json")
        doc = json.loads(out)
        assert code == 0 and doc["kind"] == "WEYL" and doc["fock_dim"] == 64
        assert doc["values"][1][1] == [1.0, 0.0]

    def test_untrusted_refused_then_allowed(self, capsys):
        args = ["grid", "--kind", "weyl", "--op", "coherent:3,0", "--n", "12", "--range", "-1:1:3"]
        code, out, err = run(capsys, *args)
        assert code == 3 and out == "" and "untrusted" in err
        code, out, _ = run(capsys, *args, "--allow-untrusted")
        assert code == 0 and out

    def test_p_thermal_and_vacuum(self, capsys):
        code, out, _ = run(capsys, "grid", "--kind", "p", "--op", "thermal:0.5", "--n", "160", "--angles",
                           str(np.pi / 2), str(np.pi / 2), "--range", "-1:1:3")
        assert code == 0
        assert read_grid(out)[(1.0, 0.0)].real == pytest.approx(np.exp(-1), abs=1e-6)
        code, _, err = run(capsys, "grid", "--kind", "p", "--op", "fock:0", "--angles", "1.5708", "1.5708",
                           "--range", "-1:1:3")
        assert code == 3 and "PNotSmooth" in err

    def test_file_operator(self, capsys, tmp_path):
        v = glauber_column(0.4, 0.2, 16)
        path = tmp_path / "psi.json"
        path.write_text(FockState(v / np.linalg.norm(v)).to_json())
        _, a, _ = run(capsys, "grid", "--kind", "wigner", "--op", f"file:{path}", "--n", "16", "--range", "-1:1:3")
        _, b, _ = run(capsys, "grid", "--kind", "wigner", "--op", "coherent:0.4,0.2", "--n", "16", "--range", "-1:1:3")
        ga, gb = read_grid(a), read_grid(b)
        assert max(abs(ga[k] - gb[k]) for k in ga) < 1e-12

    @pytest.mark.parametrize("argv", [
        ["--kind", "bifrac-wigner", "--op", "fock:0"],
        ["--kind", "wigner", "--op", "fock:99"],
        ["--kind", "wigner", "--op", "thermal:1.5"],
        ["--kind", "wigner", "--op", "fock:0", "--range", "-1:1:1"],
        ["--kind", "wigner", "--op", "fock:0", "--n", "2"],
        ["--kind", "wigner", "--op", "squeezed:1"],
    ])
    def test_usage_errors(self, capsys, argv):
        assert run(capsys, "grid", *argv)[0] == 2

    def test_theta_options_need_each_other(self, capsys):
        assert run(capsys, "grid", "--kind", "q", "--op", "fock:0", "--theta-alpha", "0.3")[0] == 2

    def test_forbidden_angles(self, capsys):
        code, _, err = run(capsys, "grid", "--kind", "q", "--op", "fock:0", "--angles", "1.5708", "0")
        assert code == 3 and "ForbiddenBand" in err


class TestVerify:
    def test_subset(self, capsys):
        code, out, _ = run(capsys, "verify", "--only", "unitarity", "--n", "32")
        report = json.loads(out)
        assert code == 0
        assert [r["check_name"] for r in report] == ["bifrac.unitarity"]
        assert set(report[0]) == {"check_name", "status", "measured", "tolerance"}

    def test_seed_determinism(self, capsys):
        args = ["verify", "--seed", "7", "--only", "fracft", "--only", "states"]
        first = run(capsys, *args)[1]
        assert first == run(capsys, *args)[1]

    def test_no_match(self, capsys):
        assert run(capsys, "verify", "--only", "nonexistent")[0] == 2


def test_parsers():
    np.testing.assert_array_equal(parse_sweep("0.1:0.3:0.1"), [0.1, 0.2, 0.30000000000000004])
    assert parse_range("-1:1:5")[2] == 0
    with pytest.raises(UsageError):
        parse_range("1:2")
