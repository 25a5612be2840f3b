import json
import math

import numpy as np
import pytest

from nematic.cli import bundled_configs, main, resolve_config
from nematic.io import read_series, read_snapshot

SMALL = """
[grid]
resolution = 16
[params]
nu = {nu}
[scheme]
name = {scheme}
dt = 2e-3
t_end = {t_end}
[initial]
generator = random_smooth
seed = 2
amplitude = 0.2
[output]
dir = {out}
diag_every = 5
"""


def write_cfg(tmp_path, name="run.cfg", nu=1.0, scheme="imex_euler", t_end=0.1, out=None):
    path = tmp_path / name
    path.write_text(SMALL.format(nu=nu, scheme=scheme, t_end=t_end, out=out or tmp_path / "out"))
    return path


def test_bundled_configs_resolve():
    names = [n.removesuffix(".cfg") for n in bundled_configs()]
    assert {"equilibrium", "taylor_green", "perturbed", "mean_flow"} <= set(names)
    for name in names:
        assert resolve_config(name).exists()
        assert resolve_config(name + ".cfg") == resolve_config(name)


def test_equilibrium_run(tmp_path):
    out = tmp_path / "eq"
    assert main(["run", "equilibrium", "--out-dir", str(out)]) == 0
    data = read_series(out / "series.csv")
    assert np.all(data["A"] == 0.0)
    assert np.all(data["E"] == 0.0)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["time_to_steady"] == 0.0
    assert (out / "run.cfg").exists()
    assert read_snapshot(out / "checkpoint.nemf").t == pytest.approx(0.1)


def test_taylor_green_decay_rate(tmp_path):
    out = tmp_path / "tg"
    assert main(["run", "taylor_green", "--out-dir", str(out)]) == 0
    data = read_series(out / "series.csv")
    t, l2 = data["t"], data["l2_v"]
    rate = -np.polyfit(t, np.log(l2), 1)[0]
    assert rate == pytest.approx(8 * math.pi ** 2 * 0.05, rel=0.01)


def test_overrides_are_recorded(tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(write_cfg(tmp_path)), "--out-dir", str(out), "--seed", "5",
                 "--dt", "1e-3", "--alpha", "0.25"]) == 0
    sidecar = (out / "run.cfg").read_text()
    assert "seed = 5" in sidecar
    assert "dt = 0.001" in sidecar
    assert "alpha = 0.25" in sidecar


def test_snapshots_are_written(tmp_path):
    cfg = tmp_path / "snap.cfg"
    cfg.write_text(write_cfg(tmp_path).read_text() + "snapshot_every = 25\n")
    assert main(["run", str(cfg)]) == 0
    snaps = sorted((tmp_path / "out" / "snapshots").glob("snap_*.nemf"))
    assert [read_snapshot(p).t for p in snaps] == pytest.approx([0.0, 0.05, 0.1])


@pytest.mark.parametrize("scheme, nu", [("imex_euler", 1.0), ("imex_bdf2", 2.0)])
def test_resume_matches_uninterrupted_run(tmp_path, scheme, nu):
    full, part = tmp_path / "full", tmp_path / "part"
    assert main(["run", str(write_cfg(tmp_path, "f.cfg", nu, scheme, 0.2, full))]) == 0
    assert main(["run", str(write_cfg(tmp_path, "p.cfg", nu, scheme, 0.1, part))]) == 0
    assert (part / "checkpoint.nemf.prev").exists() == (scheme == "imex_bdf2")
    assert main(["resume", str(part / "checkpoint.nemf"), "--t-end", "0.2"]) == 0
    a, b = read_series(full / "series.csv"), read_series(part / "series.csv")
    assert np.array_equal(a["t"], b["t"])
    for name in ("E", "D", "A", "resid_d", "h2_d"):
        assert np.max(np.abs(a[name] - b[name])) <= 1e-12 * max(1.0, np.max(np.abs(a[name])))
    sa, sb = read_snapshot(full / "checkpoint.nemf"), read_snapshot(part / "checkpoint.nemf")
    assert np.max(np.abs(sa.d.samples - sb.d.samples)) <= 1e-12


def test_resume_before_checkpoint_is_rejected(tmp_path):
    part = tmp_path / "part"
    main(["run", str(write_cfg(tmp_path, out=part))])
    assert main(["resume", str(part / "checkpoint.nemf"), "--t-end", "0.05"]) == 1


def test_resume_without_config(tmp_path):
    part = tmp_path / "part"
    main(["run", str(write_cfg(tmp_path, out=part))])
    (part / "run.cfg").unlink()
    assert main(["resume", str(part / "checkpoint.nemf"), "--t-end", "0.2"]) == 1


def sweep_cfg(tmp_path):
    return write_cfg(tmp_path, "sweep.cfg", t_end=0.05, out=tmp_path / "sw")


def test_sweep_over_alpha(tmp_path, capsys):
    assert main(["sweep", str(sweep_cfg(tmp_path)), "--alphas", "0,0.5,1"]) == 0
    rows = (tmp_path / "sw" / "sweep.csv").read_text().splitlines()
    assert rows[0] == "alpha,nu,time_to_steady,theta,rate,error"
    assert [r.split(",")[0] for r in rows[1:]] == ["0", "0.5", "1"]
    for sub in ("alpha_0", "alpha_0.5", "alpha_1"):
        assert (tmp_path / "sw" / sub / "series.csv").exists()
    assert "alpha" in capsys.readouterr().out


def test_sweep_single_value_in_parallel(tmp_path):
    assert main(["sweep", str(sweep_cfg(tmp_path)), "--nus", "0.5,2", "--jobs", "2"]) == 0
    rows = (tmp_path / "sw" / "sweep.csv").read_text().splitlines()
    assert [r.split(",")[1] for r in rows[1:]] == ["0.5", "2"]
    assert main(["sweep", str(sweep_cfg(tmp_path)), "--alphas", "0.3"]) == 0
    assert len((tmp_path / "sw" / "sweep.csv").read_text().splitlines()) == 2


def test_sweep_rejects_out_of_range_alpha(tmp_path, capsys):
    assert main(["sweep", str(sweep_cfg(tmp_path)), "--alphas", "0,2"]) == 1
    assert "params.alpha" in capsys.readouterr().err


def power_law_csv(path):
    t = np.linspace(0, 20, 60)
    cols = {"t": t, "E": 1 + (1 + t) ** -2.0, "D": 2 * (1 + t) ** -3.0,
            "A": 0.5 * (1 + t) ** -2.5, "resid_d_dual": (1 + t) ** -1.5}
    lines = [",".join(cols)]
    lines += [",".join(format(cols[c][i], ".17g") for c in cols) for i in range(t.size)]
    path.write_text("\n".join(lines) + "\n")


def test_analyze_recovers_power_law(tmp_path, capsys):
    csv_path, report_path = tmp_path / "s.csv", tmp_path / "r.json"
    power_law_csv(csv_path)
    assert main(["analyze", str(csv_path), "--output", str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    assert report == json.loads(capsys.readouterr().out)
    assert report["fits"]["A"]["model"] == "power_law"
    assert report["fits"]["A"]["rate"] == pytest.approx(-2.5, abs=1e-6)
    # E - E_inf = (1+t)^-2 and the residual is its 3/4 power: theta = 1/4
    assert report["lojasiewicz"]["E_infinity"] == pytest.approx(1.0, abs=1e-6)
    assert report["lojasiewicz"]["theta"] == pytest.approx(0.25, abs=1e-6)


def test_analyze_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("t,E,D,A\n")
    assert main(["analyze", str(path)]) == 1


def test_analyze_snapshots(tmp_path, capsys):
    out = tmp_path / "out"
    main(["run", str(write_cfg(tmp_path, out=out))])
    ckpt = str(out / "checkpoint.nemf")
    capsys.readouterr()
    assert main(["analyze", "--snapshots", ckpt, ckpt]) == 0
    assert json.loads(capsys.readouterr().out)["delta"] == 0.0


@pytest.mark.parametrize("argv", [[], ["run"], ["frobnicate"], ["analyze"],
                                  ["sweep", "perturbed"], ["verify", "nonexistent"],
                                  ["run", "no_such_config"]])
def test_usage_errors_exit_one(argv):
    with pytest.raises(SystemExit) as info:
        raise SystemExit(main(argv))
    assert info.value.code == 1


def test_invalid_config_exits_one(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("[params]\nalpha = 1.5\n")
    assert main(["run", str(path)]) == 1
    assert "params.alpha" in capsys.readouterr().err


def test_blow_up_exits_two(tmp_path):
    path = tmp_path / "blow.cfg"
    path.write_text(f"""
[grid]
resolution = 16
[params]
nu = 0.01
[scheme]
dt = 0.5
t_end = 100
[initial]
generator = random_smooth
amplitude = 5
[output]
dir = {tmp_path / "blow"}
""")
    assert main(["run", str(path)]) == 2
    assert json.loads((tmp_path / "blow" / "summary.json").read_text())["error"]


def test_verify_suite_exit_codes(capsys):
    assert main(["verify", "lojasiewicz"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] criterion 6" in out
    assert "[FAIL]" not in out
