from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from fracvar.cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, ConfigError, main, parse_config
from fracvar.domain import read_field_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def small_config(**overrides) -> dict:
    raw = json.loads((CONFIGS / "manu-cd-1d.json").read_text())
    raw["time"]["n"] = 16
    raw["box"]["n"] = [16]
    raw.update(overrides)
    return raw


def write_config(tmp_path: Path, raw: dict, name: str = "case.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


# {{{ config parsing

@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_parse(path):
    cfg = parse_config(json.loads(path.read_text()))
    assert cfg.alpha == 0.5 and "field" in cfg.outputs


@pytest.mark.parametrize("edit, field", [
    (lambda r: r["coefficients"].update(K=[[0.1, 0.0]]), "coefficients.K"),
    (lambda r: r["coefficients"].update(beta=-1.0), "coefficients.beta"),
    (lambda r: r["coefficients"].update(gamma=[1.0, 2.0]), "coefficients.gamma"),
    (lambda r: r["time"].update(n=2.5), "time.n"),
    (lambda r: r["box"].update(n=[2]), "box"),
    (lambda r: r.update(alpha=1.5), "alpha"),
    (lambda r: r.update(scheme="L1+boundary"), "scheme"),
    (lambda r: r.update(source={"kind": "named", "id": "nope"}), "source"),
    (lambda r: r.pop("coefficients"), "coefficients"),
])
def test_config_errors_name_the_field(edit, field):
    raw = small_config()
    edit(raw)
    with pytest.raises(ConfigError) as info:
        parse_config(raw)
    assert info.value.field.startswith(field)


def test_nonsymmetric_k_message(tmp_path, capsys):
    raw = small_config(source={"kind": "zero"}, u0={"kind": "zero"})
    raw["box"] = {"lo": [0.0, 0.0], "hi": [1.0, 1.0], "n": [8, 8]}
    raw["coefficients"] = {"gamma": [1.0, 0.0], "K": [[0.1, 0.01], [0.0, 0.1]]}
    code = main(["solve", str(write_config(tmp_path, raw)), "--out", str(tmp_path / "u.csv")])
    assert code == EXIT_USAGE
    err = capsys.readouterr().err
    assert "coefficients.K" in err and "symmetric" in err


def test_constant_source(tmp_path):
    raw = small_config(source={"kind": "constant", "value": 1.0}, u0={"kind": "zero"})
    cfg = parse_config(raw)
    assert cfg.exact is None
    out = tmp_path / "u.csv"
    assert main(["solve", str(write_config(tmp_path, raw)), "--out", str(out)]) == EXIT_PASS
    assert np.min(read_field_csv(out).values) >= 0.0


# }}}


# {{{ exit codes

def test_missing_config(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "absent.json")]) == EXIT_USAGE
    assert "cannot read" in capsys.readouterr().err


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{")
    assert main(["elcheck", str(path)]) == EXIT_USAGE


def test_argparse_errors_exit_two():
    with pytest.raises(SystemExit) as info:
        main(["lemmas", "--dim", "3"])
    assert info.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == EXIT_USAGE


def test_bad_alpha_exits_two():
    assert main(["lemmas", "--alpha", "1.5", "--n", "16"]) == EXIT_USAGE


def test_bad_thread_count_exits_two(monkeypatch):
    monkeypatch.setenv("FRACVAR_THREADS", "0")
    assert main(["lemmas", "--n", "16"]) == EXIT_USAGE


# }}}


# {{{ commands

def test_lemmas_small_n_reports_but_passes(tmp_path):
    out = tmp_path / "lemmas.json"
    assert main(["lemmas", "--n", "4", "--dim", "1", "--out", str(out)]) == EXIT_PASS
    report = json.loads(out.read_text())
    assert report["pass"] is False
    statuses = {c["details"].get("status") for c in report["checks"] if not c["passed"]}
    assert statuses == {"insufficient levels"}


def test_lemmas_moderate_n(tmp_path):
    out = tmp_path / "lemmas.json"
    assert main(["lemmas", "--n", "256", "--dim", "2", "--out", str(out)]) == EXIT_PASS
    report = json.loads(out.read_text())
    assert report["pass"] is True and report["n"] == 256


def test_elcheck(tmp_path):
    out = tmp_path / "el.json"
    code = main(["elcheck", str(write_config(tmp_path, small_config())), "--directions", "5",
                 "--out", str(out)])
    report = json.loads(out.read_text())
    assert code == EXIT_PASS and report["pass"]
    assert len(report["gradient_check"]["details"]["directions"]) == 5
    assert report["equivalence"]["passed"]


def test_elcheck_without_exact(tmp_path):
    raw = small_config(source={"kind": "zero"}, u0={"kind": "zero"})
    out = tmp_path / "el.json"
    assert main(["elcheck", str(write_config(tmp_path, raw)), "--out", str(out)]) == EXIT_PASS
    assert json.loads(out.read_text())["equivalence"].startswith("skipped")


def test_elcheck_rejects_zero_directions(tmp_path):
    path = write_config(tmp_path, small_config())
    assert main(["elcheck", str(path), "--directions", "0"]) == EXIT_USAGE


def test_solve_and_compare(tmp_path, capsys):
    path = write_config(tmp_path, small_config())
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["solve", str(path), "--out", str(a)]) == EXIT_PASS
    assert main(["solve", str(path), "--solver", "reference", "--out", str(b)]) == EXIT_PASS
    sidecar = json.loads(Path(str(a) + ".json").read_text())
    assert sidecar["diagnostics"]["el_residual_sup"] <= 1e-10
    assert sidecar["grid"]["time"]["n"] == 16
    capsys.readouterr()
    assert main(["compare", str(a), str(a), "--tol", "0"]) == EXIT_PASS
    assert capsys.readouterr().out.strip() == "l2 0"
    # 1D: both discretisations coincide up to roundoff
    assert main(["compare", str(a), str(b), "--norm", "linf", "--tol", "1e-12"]) == EXIT_PASS
    assert main(["compare", str(a), str(b), "--norm", "linf", "--tol", "-1"]) == EXIT_FAIL


def test_solve_uses_config_output_path(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    raw = small_config()
    raw["outputs"] = {"field": "from-config.csv"}
    assert main(["solve", str(write_config(tmp_path, raw))]) == EXIT_PASS
    assert (tmp_path / "from-config.csv").exists()
    raw["outputs"] = {}
    assert main(["solve", str(write_config(tmp_path, raw))]) == EXIT_USAGE


def test_compare_grid_mismatch(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["solve", str(write_config(tmp_path, small_config())), "--out", str(a)])
    raw = small_config()
    raw["box"]["n"] = [8]
    main(["solve", str(write_config(tmp_path, raw, "other.json")), "--out", str(b)])
    assert main(["compare", str(a), str(b)]) == EXIT_USAGE
    assert main(["compare", str(a), str(tmp_path / "absent.csv")]) == EXIT_USAGE


def test_converge_case_id(tmp_path):
    out = tmp_path / "conv.json"
    code = main(["converge", "manu-cd-1d", "--levels", "16", "32", "64", "--out", str(out)])
    report = json.loads(out.read_text())
    assert code == EXIT_PASS and report["passed"]
    assert [r["n"] for r in report["rows"]] == [16, 32, 64]


def test_converge_exact_case(tmp_path):
    out = tmp_path / "conv.json"
    assert main(["converge", "affine-exact", "--levels", "8", "16", "32",
                 "--out", str(out)]) == EXIT_PASS
    assert all(r["order_l2"] == "exact" for r in json.loads(out.read_text())["rows"])


def test_converge_config_and_level_rules(tmp_path):
    path = write_config(tmp_path, small_config())
    assert main(["converge", str(path), "--levels", "16", "32", "64"]) == EXIT_PASS
    assert main(["converge", "manu-cd-1d", "--levels", "16", "32"]) == EXIT_USAGE
    raw = small_config(source={"kind": "zero"}, u0={"kind": "zero"})
    assert main(["converge", str(write_config(tmp_path, raw, "z.json")),
                 "--levels", "8", "16", "32"]) == EXIT_USAGE


# }}}
