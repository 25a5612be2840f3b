from fractions import Fraction

import numpy as np
import pytest

from nematic.integrator import SchemeConfig, run
from nematic.io import (FormatError, GridMismatch, InitialConfig, IoError, ParseError,
                        RunConfig, UnknownGenerator, ValidationError, config_text,
                        generate_initial, load_config, parse_config, read_series,
                        read_snapshot, save_config, series_header, taylor_green,
                        write_series, write_snapshot)
from nematic.model import PhysParams, State
from nematic.spectral import TorusGrid, VectorField, divergence


# -- configuration --------------------------------------------------------------

def test_empty_config_gives_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.grid.padding_factor == Fraction(3, 2)
    assert cfg.scheme.scheme == "imex_euler"


def test_config_keys_are_parsed_and_typed():
    cfg = parse_config("""
[grid]
resolution = 16
padding_factor = 2
[params]
lambda = 0.5   # inline comment
alpha = 0.25
[scheme]
name = imex_bdf2
frozen_director = yes
[initial]
generator = taylor_green
mean_v = 0.5, -1
""")
    assert cfg.grid.resolution == 16
    assert cfg.grid.padding_factor == Fraction(2)
    assert cfg.params.lam == 0.5
    assert cfg.params.alpha == 0.25
    assert cfg.scheme.scheme == "imex_bdf2"
    assert cfg.scheme.frozen_director is True
    assert cfg.initial.mean_v == (0.5, -1.0)


@pytest.mark.parametrize("text, key", [
    ("[params]\nalpha = 1.5", "params.alpha"),
    ("[params]\nnu = 0", "params.nu"),
    ("[grid]\nresolution = 12", "grid.resolution"),
    ("[grid]\npadding_factor = 1/2", "grid.padding_factor"),
    ("[scheme]\ndt = -1", "scheme.dt"),
    ("[scheme]\nname = rk4", "scheme.name"),
    ("[scheme]\nfrozen_director = maybe", "scheme.frozen_director"),
    ("[output]\ndiag_every = 0", "output.diag_every"),
    ("[initial]\ngenerator = vortex_sheet", "initial.generator"),
    ("[params]\nbeta = 1", "params.beta"),
])
def test_invalid_values_name_their_key(text, key):
    with pytest.raises(ValidationError) as info:
        parse_config(text)
    assert info.value.key == key


def test_malformed_config_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_config("resolution = 16")


def test_missing_config_file(tmp_path):
    with pytest.raises(IoError):
        load_config(tmp_path / "absent.cfg")


def test_config_round_trip(tmp_path):
    cfg = parse_config("[params]\nalpha = 0.3\nnu = 0.1\n[initial]\nmean_v = 1, 2\n"
                       "[scheme]\nstabilization = 0.5\n[grid]\npadding_factor = 3/2")
    path = tmp_path / "run.cfg"
    save_config(cfg, path)
    assert load_config(path) == cfg
    assert parse_config(config_text(cfg)) == cfg


# -- initial data -----------------------------------------------------------------

@pytest.mark.parametrize("generator", ["perturbed_constant_director", "taylor_green",
                                       "random_smooth"])
def test_generators_are_deterministic_and_solenoidal(generator):
    g = TorusGrid(2, 16)
    spec = InitialConfig(generator=generator, seed=4, amplitude=0.3)
    a, b = generate_initial(spec, g), generate_initial(spec, g)
    assert np.array_equal(a.v.coeffs, b.v.coeffs)
    assert np.array_equal(a.d.coeffs, b.d.coeffs)
    assert np.max(np.abs(divergence(a.v).samples)) <= 1e-12


def test_seed_changes_the_field():
    g = TorusGrid(2, 16)
    a = generate_initial(InitialConfig(seed=1), g)
    b = generate_initial(InitialConfig(seed=2), g)
    assert not np.allclose(a.d.coeffs, b.d.coeffs)


def test_zero_amplitude_is_the_equilibrium():
    g = TorusGrid(2, 16)
    s = generate_initial(InitialConfig(amplitude=0.0), g)
    assert np.all(s.v.coeffs == 0)
    assert np.array_equal(s.d.samples, np.broadcast_to([[[1.0]], [[0.0]]], s.d.samples.shape))


def test_taylor_green_fields():
    g = TorusGrid(2, 32)
    s = taylor_green(g)
    x, y = g.coordinates()
    assert np.allclose(s.v.samples[0], np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y), atol=1e-14)
    assert np.abs(s.v.mean).max() <= 1e-17
    with_mean = taylor_green(g, mean_v=(0.5, 0.0))
    assert with_mean.v.mean == pytest.approx([0.5, 0.0], abs=1e-15)


def test_mean_v_with_wrong_length():
    with pytest.raises(ValidationError):
        generate_initial(InitialConfig(mean_v=(1.0, 0.0, 0.0)), TorusGrid(2, 8))


def test_unknown_generator():
    with pytest.raises(UnknownGenerator):
        generate_initial(InitialConfig(generator="nope"), TorusGrid(2, 8))


# -- series -----------------------------------------------------------------------

def test_series_header_order():
    assert series_header(2) == ["t", "E", "D", "A", "l2_v", "h1_v", "h2_d", "resid_d",
                                "resid_d_dual", "mean_v_1", "mean_v_2", "energy_residual",
                                "max_div_v"]
    assert series_header(3)[9:12] == ["mean_v_1", "mean_v_2", "mean_v_3"]


def test_series_round_trip_is_exact(tmp_path):
    g = TorusGrid(2, 16)
    traj = run(taylor_green(g), PhysParams(nu=0.1),
               SchemeConfig(dt=1e-3, t_end=0.01, frozen_director=True), diag_every=2)
    path = tmp_path / "series.csv"
    write_series(traj, path)
    data = read_series(path)
    assert np.array_equal(data["t"], traj.times)
    assert np.array_equal(data["E"], traj.series("E"))
    assert np.array_equal(data["mean_v_1"], [r.mean_v[0] for r in traj.records])
    first = path.read_text().splitlines()[1].split(",")
    assert all(x == format(float(x), ".17g") for x in first)


def test_empty_trajectory_writes_header_only(tmp_path):
    from nematic.integrator import Trajectory
    path = tmp_path / "series.csv"
    write_series(Trajectory(), path, dim=2)
    assert path.read_text() == ",".join(series_header(2)) + "\n"
    assert read_series(path)["t"].size == 0


def test_series_write_to_missing_directory(tmp_path):
    from nematic.integrator import Trajectory
    with pytest.raises(IoError):
        write_series(Trajectory(), tmp_path / "absent" / "series.csv", dim=2)


# -- snapshots --------------------------------------------------------------------

@pytest.fixture
def snapshot(tmp_path):
    g = TorusGrid(2, 16)
    s = generate_initial(InitialConfig(generator="random_smooth", seed=1), g)
    s = State(s.v, s.d, 0.375)
    path = tmp_path / "a.nemf"
    write_snapshot(s, path, PhysParams(alpha=0.3, nu=0.2))
    return s, path


def test_snapshot_round_trip(snapshot, tmp_path):
    s, path = snapshot
    back = read_snapshot(path)
    assert back.t == 0.375
    assert back.meta["params"] == PhysParams(alpha=0.3, nu=0.2)
    assert np.array_equal(back.v.samples, s.v.samples)
    assert np.array_equal(back.d.samples, s.d.samples)
    assert np.max(np.abs(back.d.coeffs - s.d.coeffs)) <= 1e-15
    again = tmp_path / "b.nemf"
    write_snapshot(back, again)
    assert again.read_bytes() == path.read_bytes()


def test_snapshot_three_dimensional(tmp_path):
    g = TorusGrid(3, 8)
    s = generate_initial(InitialConfig(seed=2), g)
    write_snapshot(s, tmp_path / "c.nemf")
    back = read_snapshot(tmp_path / "c.nemf", expected_grid=g)
    assert np.array_equal(back.d.samples, s.d.samples)


def test_truncated_snapshot(snapshot, tmp_path):
    _, path = snapshot
    blob = path.read_bytes()
    for size in (10, len(blob) - 8):
        bad = tmp_path / f"cut{size}.nemf"
        bad.write_bytes(blob[:size])
        with pytest.raises(FormatError):
            read_snapshot(bad)


@pytest.mark.parametrize("offset, patch", [(0, b"XXXX"), (4, (2).to_bytes(4, "little")),
                                           (12, (12).to_bytes(4, "little"))])
def test_corrupt_snapshot_header(snapshot, tmp_path, offset, patch):
    _, path = snapshot
    blob = bytearray(path.read_bytes())
    blob[offset:offset + len(patch)] = patch
    bad = tmp_path / "bad.nemf"
    bad.write_bytes(bytes(blob))
    with pytest.raises(FormatError):
        read_snapshot(bad)


def test_snapshot_grid_mismatch(snapshot):
    _, path = snapshot
    with pytest.raises(GridMismatch):
        read_snapshot(path, expected_grid=TorusGrid(2, 32))
    with pytest.raises(GridMismatch):
        read_snapshot(path, expected_grid=TorusGrid(3, 16))


def test_missing_snapshot(tmp_path):
    with pytest.raises(IoError):
        read_snapshot(tmp_path / "absent.nemf")


def test_snapshot_as_initial_condition(snapshot):
    s, path = snapshot
    back = generate_initial(InitialConfig(snapshot=str(path)), TorusGrid(2, 16))
    assert np.array_equal(back.v.samples, s.v.samples)


def test_restart_from_snapshot_is_deterministic(tmp_path):
    g = TorusGrid(2, 16)
    params = PhysParams(nu=1.0)
    s0 = generate_initial(InitialConfig(seed=6, amplitude=0.2), g)
    full = run(s0, params, SchemeConfig(dt=1e-3, t_end=0.04))
    half = run(s0, params, SchemeConfig(dt=1e-3, t_end=0.02))
    write_snapshot(half.final, tmp_path / "mid.nemf", params)
    mid = read_snapshot(tmp_path / "mid.nemf", expected_grid=g)
    rest = run(mid, params, SchemeConfig(dt=1e-3, t_end=0.04))
    assert rest.final.t == full.final.t
    assert np.max(np.abs(rest.final.d.coeffs - full.final.d.coeffs)) <= 1e-13
    assert np.max(np.abs(rest.final.v.coeffs - full.final.v.coeffs)) <= 1e-13
