import json
import subprocess
import sys

import numpy as np
import pytest

from troplab.cli import EXIT_ALARM, EXIT_OK, EXIT_USAGE, RunConfig, UsageError, run
from troplab.maps import LinearMap, identity_map, make_transpose
from troplab.matrix_core import Algebra, Element


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture
def transpose_file(tmp_path):
    return write(tmp_path, "theta.json", make_transpose(2).to_json())


def test_report_envelope(transpose_file, capsys):
    report, code = run(["factorize", transpose_file])
    assert code == EXIT_OK
    assert set(report) == {"command", "inputs_digest", "config", "results", "version"}
    printed = json.loads(capsys.readouterr().out)
    assert printed == report
    assert report["results"]["factorizable"] and not report["results"]["supporting_map_is_tro_hom"]


def test_reports_are_deterministic(transpose_file, capsys):
    first, _ = run(["classify", transpose_file, "--seed", "3"])
    second, _ = run(["classify", transpose_file, "--seed", "3"])
    assert first == second
    assert first["config"]["seed"] == 3


def test_classify_transpose(transpose_file):
    report, code = run(["classify", transpose_file, "--trials", "30"])
    res = report["results"]
    assert code == EXIT_OK and res["consistent"]
    assert res["cop"]["verdicts"]["op_level_1"] == "true"
    assert res["cop"]["verdicts"]["cop"] == "false"
    assert "order_zero" in res


def test_classify_alarm(monkeypatch, transpose_file):
    from troplab import cli, preservers
    real = cli.classify_cop

    def broken(*a, **k):
        rep = real(*a, **k)
        rep.verdicts["op_level_2"] = preservers.Verdict.TRUE
        return rep

    monkeypatch.setattr(cli, "classify_cop", broken)
    report, code = run(["classify", transpose_file, "--trials", "10"])
    assert code == EXIT_ALARM and not report["results"]["consistent"]


def test_factorize_failure(tmp_path):
    m2 = Algebra((2,))
    e11, e22 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    corner = LinearMap.from_function(m2, m2, lambda a: Element(m2, [e11 @ a.blocks[0] @ e22]))
    report, code = run(["factorize", write(tmp_path, "c.json", corner.to_json())])
    assert code == EXIT_OK
    fail = report["results"]["failure"]
    assert not report["results"]["factorizable"] and fail["tolerance_ratio"] > 1
    assert fail["witness"]


def test_decompose(tmp_path, transpose_file):
    report, code = run(["decompose", transpose_file])
    assert code == EXIT_OK and report["results"]["decomposed"]
    psi = LinearMap.from_json(report["results"]["tro_anti_hom_part"])
    assert np.allclose(psi.matrix, make_transpose(2).matrix)
    twice = write(tmp_path, "two.json", (2 * identity_map(Algebra((2,)))).to_json())
    assert run(["decompose", twice])[1] == EXIT_USAGE


def test_norms(transpose_file):
    report, code = run(["norms", transpose_file, "--n-max", "3", "--restarts", "5"])
    values = [row["lower_bound"] for row in report["results"]["norms"]]
    assert code == EXIT_OK and np.allclose(values, [1, 2, 2], atol=1e-6)
    assert run(["norms", transpose_file, "--n-max", "0"])[1] == EXIT_USAGE


def test_funcalc(tmp_path):
    from troplab.generators import generate
    gt = generate("weighted_tro_hom", Algebra((2,)), 1, 0, 0)
    path = write(tmp_path, "t.json", gt.map.to_json())
    report, code = run(["funcalc", "--map", path, "--f", "cube"])
    assert code == EXIT_OK and report["results"]["function"] == "cube"
    cube = LinearMap.from_json(report["results"]["map"])
    h = gt.h.blocks[0]
    assert np.allclose(cube(Algebra((2,)).unit()).blocks[0], h @ h.conj().T @ h)
    a = Algebra((2,)).unit()
    from troplab.matrix_core import element_to_json
    tensor = write(tmp_path, "x.json", {"terms": [{"f": "identity", "a": element_to_json(a)}]})
    report, code = run(["funcalc", "--map", path, "--f", "identity", "--tensor", tensor])
    assert code == EXIT_OK
    assert run(["funcalc", "--map", path, "--f", "sin"])[1] == EXIT_USAGE
    assert run(["funcalc", "--map", path, "--f", "abs", "--symmetric"])[1] == EXIT_USAGE
    sym = generate("symmetric_mixed_sign", Algebra((2,)), 1, 0, 0)
    spath = write(tmp_path, "s.json", sym.map.to_json())
    assert run(["funcalc", "--map", spath, "--f", "abs", "--symmetric"])[1] == EXIT_OK


def test_funcalc_non_op(tmp_path):
    m2 = Algebra((2,))
    traceless = identity_map(m2) - LinearMap.from_function(
        m2, m2, lambda a: Element(m2, [np.trace(a.blocks[0]) / 2 * np.eye(2)]))
    path = write(tmp_path, "t.json", traceless.to_json())
    assert run(["funcalc", "--map", path, "--f", "cube"])[1] == EXIT_USAGE


def test_tro_closure(tmp_path, transpose_file):
    report, code = run(["tro-closure", "--map", transpose_file])
    assert code == EXIT_OK and report["results"]["dim"] == 4
    m2 = Algebra((2,))
    d = np.diag([1.0, 2.0])
    m = LinearMap.from_function(Algebra((1,)), m2, lambda a: Element(m2, [a.blocks[0][0, 0] * d]))
    path = write(tmp_path, "m.json", m.to_json())
    report, code = run(["tro-closure", "--map", path, "--max-rounds", "1"])
    assert code == EXIT_ALARM and not report["results"]["stabilized"]


def test_generate_sidecar(tmp_path):
    out = tmp_path / "g.json"
    report, code = run(["generate", "--kind", "cp_order_zero", "--blocks", "1,2",
                        "--map-out", str(out), "--seed", "5"])
    assert code == EXIT_OK
    sidecar = tmp_path / "g.truth.json"
    assert sidecar.exists()
    truth = json.loads(sidecar.read_text())
    assert truth["expected"]["cp_order_zero"] is True
    t = LinearMap.from_json(json.loads(out.read_text()))
    assert t.domain.blocks == (1, 2)
    again, _ = run(["generate", "--kind", "cp_order_zero", "--blocks", "1,2", "--seed", "5"])
    assert again["results"]["map"] == t.to_json()
    assert run(["generate", "--kind", "weighted_triple_hom_mixed", "--blocks", "1"])[1] == EXIT_USAGE
    assert run(["generate", "--kind", "tro_hom", "--blocks", "x"])[1] == EXIT_USAGE


def test_repro_paper(capsys):
    report, code = run(["repro-paper", "--restarts", "5"])
    assert code == EXIT_OK and report["results"]["all_passed"]
    err = capsys.readouterr().err
    assert err.count("PASS") == 3


def test_io_errors(tmp_path, capsys):
    assert run(["factorize", str(tmp_path / "missing.json")])[1] == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text('{"domain": ')
    assert run(["factorize", str(bad)])[1] == EXIT_USAGE
    assert "line 1" in capsys.readouterr().err
    schema = write(tmp_path, "s.json", {"domain": {"blocks": [2]}})
    assert run(["factorize", schema])[1] == EXIT_USAGE
    assert "codomain" in capsys.readouterr().err


def test_out_flag(tmp_path, transpose_file, capsys):
    out = tmp_path / "report.json"
    report, code = run(["factorize", transpose_file, "--out", str(out)])
    assert code == EXIT_OK and capsys.readouterr().out == ""
    assert json.loads(out.read_text()) == report
    bad = tmp_path / "nodir" / "r.json"
    assert run(["factorize", transpose_file, "--out", str(bad)])[1] == EXIT_USAGE


@pytest.mark.parametrize("kwargs", [{"seed": -1}, {"trials": 0}, {"restarts": 0},
                                    {"tol_abs": 0.0}, {"rank_tol": -1.0}])
def test_config_validation(kwargs):
    with pytest.raises(UsageError):
        RunConfig(**kwargs)


def test_bad_config_flag_exits_one(transpose_file):
    assert run(["factorize", transpose_file, "--trials", "0"])[1] == EXIT_USAGE


@pytest.mark.parametrize("argv", [["no-such-verb"], ["norms"], ["norms", "x", "--n-max", "two"]])
def test_argparse_errors_exit_one(argv):
    with pytest.raises(SystemExit) as info:
        run(argv)
    assert info.value.code == EXIT_USAGE


def test_module_entry_point(transpose_file):
    proc = subprocess.run([sys.executable, "-m", "troplab", "factorize", transpose_file],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "factorize"


@pytest.mark.parametrize("argv", [["--seed", "3", "repro-paper"], ["repro-paper", "--seed", "3"]])
def test_global_flags_either_side_of_verb(argv):
    from troplab.cli import build_parser
    args = build_parser().parse_args(argv)
    assert args.seed == 3 and args.trials == 100
