import math

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from shanks_accel import cli
from shanks_accel.drivers import METHODS, RunRecord, Status
from shanks_accel.errors import ConfigError, IoError
from shanks_accel.records import (
    CSV_COLUMNS,
    dumps_csv,
    dumps_json,
    emit_records,
    loads_csv,
    loads_json,
    read_records,
)

TWO_NODE = "%%MatrixMarket matrix coordinate pattern general\n2 2 2\n1 2\n2 1\n"


def record(residuals, lambdas=(), status=Status.CONVERGED, method="AA"):
    return RunRecord(method, residuals=list(residuals), lambdas=list(lambdas), status=status)


def write_config(tmp_path, data, name="exp.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def linear_config(tmp_path, **extra):
    data = {
        "problem": {"kind": "linear", "p": 10, "spectral_radius": 0.8},
        "seed": 4,
        "tol": 1e-8,
        "methods": ["PlainFixedPoint", {"method": "AA", "window": 6}],
        "output": {"path": str(tmp_path / "runs.csv")},
    }
    data.update(extra)
    return data


# -- records


def test_csv_row_count():
    text = dumps_csv([record([1.0, 0.1, 0.01])])
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 4


def test_csv_lambda_column():
    text = dumps_csv([record([1.0, 0.5, 0.2], lambdas=[(2, 1e-4)])])
    rows = [line.split(",") for line in text.strip().split("\n")[1:]]
    assert [r[3] for r in rows] == ["", "0.0001", ""]


records_st = st.lists(
    st.builds(
        record,
        st.lists(st.floats(0, 1e12, allow_nan=False), min_size=1, max_size=6),
        st.lists(st.tuples(st.integers(1, 6), st.floats(0, 1e3)), max_size=3),
        st.sampled_from(list(Status)),
        st.sampled_from(METHODS),
    ),
    min_size=1,
    max_size=4,
)


@given(records_st)
def test_json_round_trip_is_lossless(recs):
    back = loads_json(dumps_json(recs))
    assert back == recs
    assert dumps_json(back) == dumps_json(recs)


@given(records_st)
def test_csv_round_trip_keeps_per_evaluation_fields(recs):
    # lambdas past the last evaluation have no row to live on
    recs = [
        record(r.residuals, [(i, lam) for i, lam in r.lambdas if i <= len(r.residuals)], r.status, r.method)
        for r in recs
    ]
    back = loads_csv(dumps_csv(recs))
    assert len(back) == len(recs)
    for a, b in zip(recs, back):
        assert (a.method, a.residuals, a.status) == (b.method, b.residuals, b.status)
        assert sorted(a.lambdas) == sorted(b.lambdas)


def test_json_rejects_inconsistent_count():
    text = dumps_json([record([1.0, 0.5])]).replace('"g_eval_count": 2', '"g_eval_count": 3')
    with pytest.raises(ValueError):
        loads_json(text)


def test_emit_and_read(tmp_path):
    recs = [record([1.0, 0.5], [(1, 0.1)]), record([2.0], method="RAA", status=Status.DIVERGED)]
    for fmt in ("csv", "json"):
        path = emit_records(recs, tmp_path / "sub" / f"out.{fmt}", fmt)
        back = read_records(path)
        assert [r.residuals for r in back] == [r.residuals for r in recs]
    with pytest.raises(ValueError):
        emit_records([], tmp_path / "x.csv")
    with pytest.raises(ValueError):
        emit_records(recs, tmp_path / "x.txt", "txt")
    (tmp_path / "blocker").write_text("")
    with pytest.raises(IoError):
        emit_records(recs, tmp_path / "blocker" / "x.csv")


# -- configuration


def test_parse_config_applies_experiment_settings(tmp_path):
    cfg = cli.load_config(write_config(tmp_path, linear_config(tmp_path)))
    assert [m.method for m in cfg.methods] == ["PlainFixedPoint", "AA"]
    assert all(m.tol == 1e-8 and m.seed == 4 for m in cfg.methods)
    assert cfg.methods[1].window == 6


@pytest.mark.parametrize(
    "patch,path",
    [
        ({"methods": [{"method": "AA", "tau": 0.5}]}, "methods.0.tau"),
        ({"methods": ["PlainFixedPoint", {"method": "AA", "bogus": 1}]}, "methods.1.bogus"),
        ({"methods": [{"method": "RNLA", "reg": {"kind": "grid", "grid": [1.0, 0.1]}}]}, "methods.0.reg"),
        ({"methods": []}, "methods"),
        ({"tol": -1.0}, "tol"),
        ({"problem": {"kind": "nope"}}, "problem.kind"),
        ({"problem": {"kind": "linear", "size": 3}}, "problem.size"),
        ({"output": {"format": "xml"}}, "output.format"),
        ({"extra": 1}, "extra"),
    ],
)
def test_config_errors_carry_field_path(tmp_path, patch, path):
    with pytest.raises(ConfigError) as info:
        cli.parse_config(linear_config(tmp_path, **patch))
    assert info.value.path == path


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        cli.load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("problem: [unclosed\n")
    with pytest.raises(ConfigError):
        cli.load_config(bad)


# -- running


def test_aa_beats_plain_on_linear(tmp_path):
    cfg = cli.parse_config(linear_config(tmp_path))
    plain, aa = cli.run_experiment(cfg)
    assert plain.status is Status.CONVERGED and aa.status is Status.CONVERGED
    assert aa.g_eval_count < plain.g_eval_count
    for r in (plain, aa):
        assert r.residuals[-1] < cfg.tol
        assert r.wall_ms == 0.0


def test_two_node_pagerank_plain_is_monotone(tmp_path):
    mtx = tmp_path / "two.mtx"
    mtx.write_text(TWO_NODE)
    data = {"problem": {"kind": "pagerank", "matrix": str(mtx), "alpha": 0.5}, "methods": ["PlainFixedPoint"]}
    (rec,) = cli.run_experiment(cli.parse_config(data))
    assert rec.status is Status.CONVERGED
    assert all(b < a for a, b in zip(rec.residuals, rec.residuals[1:]))
    assert rec.solution == pytest.approx([0.5, 0.5], abs=1e-7)


def test_problem_errors_do_not_abort_siblings(tmp_path):
    data = {
        "problem": {"kind": "pagerank", "matrix": str(tmp_path / "missing.mtx")},
        "methods": ["PlainFixedPoint", "AA"],
    }
    errors = []
    assert cli.run_experiment(cli.parse_config(data), errors) == []
    assert [m for m, _ in errors] == ["PlainFixedPoint", "AA"]


def test_parallel_matches_sequential(tmp_path):
    data = linear_config(tmp_path, methods=["PlainFixedPoint", "AA", "RAA", "RRRE"])
    seq = cli.run_experiment(cli.parse_config(data))
    par = cli.run_experiment(cli.parse_config({**data, "parallel": 3}))
    assert dumps_json(seq) == dumps_json(par)


def test_exit_codes():
    ok = record([0.0])
    stuck = record([1.0], status=Status.BUDGET_EXHAUSTED)
    blown = record([1e13], status=Status.DIVERGED)
    assert cli.exit_code([ok]) == 0
    assert cli.exit_code([ok, stuck]) == 1
    assert cli.exit_code([ok], failed=True) == 1
    assert cli.exit_code([]) == 1
    assert cli.exit_code([stuck, blown]) == 2


# -- command line


def test_main_writes_identical_files_for_same_seed(tmp_path, capsys):
    cfg = write_config(tmp_path, linear_config(tmp_path))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["--config", str(cfg), "--out", str(a), "--format", "json"]) == 0
    assert cli.main(["--config", str(cfg), "--out", str(b), "--format", "json"]) == 0
    assert a.read_bytes() == b.read_bytes()
    out = capsys.readouterr().out
    assert "PlainFixedPoint" in out and "AA" in out


def test_main_seed_override_changes_problem(tmp_path):
    cfg = write_config(tmp_path, linear_config(tmp_path))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["--config", str(cfg), "--out", str(a)])
    cli.main(["--config", str(cfg), "--out", str(b), "--seed", "99"])
    assert a.read_text() != b.read_text()
    assert cli.main(["--config", str(cfg), "--seed", str(2**64)]) == 1


def test_main_csv_residuals_are_finite(tmp_path):
    cfg = write_config(tmp_path, linear_config(tmp_path))
    out = tmp_path / "r.csv"
    cli.main(["--config", str(cfg), "--out", str(out)])
    recs = read_records(out)
    assert all(math.isfinite(r) for rec in recs for r in rec.residuals)
    assert all(rec.status is Status.CONVERGED for rec in recs)


def test_out_dir_env_override(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, linear_config(tmp_path))
    target = tmp_path / "elsewhere"
    monkeypatch.setenv(cli.OUT_DIR_ENV, str(target))
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "x" / "runs.csv")]) == 0
    assert (target / "runs.csv").exists()
    assert not (tmp_path / "x").exists()


def test_main_reports_config_errors(tmp_path, capsys):
    data = linear_config(tmp_path, methods=[{"method": "AA", "tau": 0.5}])
    assert cli.main(["--config", str(write_config(tmp_path, data))]) == 1
    assert "methods.0.tau" in capsys.readouterr().err
    assert cli.main([]) == 1


def test_main_diverged_exit_code(tmp_path):
    data = {
        "problem": {"kind": "linear", "p": 3, "spectral_radius": 3.0},
        "methods": ["PlainFixedPoint"],
        "output": {"path": str(tmp_path / "d.csv")},
    }
    assert cli.main(["--config", str(write_config(tmp_path, data))]) == 2


def test_list_methods(capsys):
    assert cli.main(["--list-methods"]) == 0
    assert capsys.readouterr().out.split() == list(METHODS)


def test_records_keep_solution_out_of_serialization():
    rec = record([1.0])
    rec.solution = np.ones(3)
    assert "solution" not in dumps_json([rec])
