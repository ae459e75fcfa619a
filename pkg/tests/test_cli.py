"""Batch driver: config validation, exit codes, report files and figures."""

import csv
import json
from decimal import Decimal
from fractions import Fraction as F

import pytest

from _support import BM, SPONGE
from thincarpet.cli import EXIT_BUDGET, EXIT_CONFIG, EXIT_CONSISTENCY, EXIT_OK, main, validate_config
from thincarpet.errors import ConfigError, EnumerationBudget
from thincarpet.geometry import Box
from thincarpet.measures import from_1d_weights, product_measure
from thincarpet.report import MAX_FIGURE_BOXES, decimal_str, dumps, parse_exact, render_levelset
from thincarpet.systems import level_set

BM_SPEC = {"kind": "carpet", "widths": ["1/2", "1/2"], "heights": ["1/4"] * 4,
           "digits": [[1, 1], [2, 3], [1, 4]]}
BARANSKI_SPEC = {"kind": "carpet", "widths": ["1/2", "1/2"], "heights": ["1/3"] * 3,
                 "digits": [[1, 1], [1, 2], [1, 3], [2, 1], [2, 3]]}
CANTOR_SPEC = {"kind": "interval", "widths": ["1/3"] * 3, "digits": [1, 3]}


def invoke(tmp_path, cfg, *extra, task=None, name="out"):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / name
    code = main([task or cfg["task"], "--config", str(path), "--out", str(out), *extra])
    return code, out


def load(out):
    return json.loads((out / "report.json").read_text())


# -- success paths ----------------------------------------------------------

def test_certify_lebesgue(tmp_path):
    code, out = invoke(tmp_path, {"task": "certify", "spec": BM_SPEC, "measure": {"kind": "lebesgue"},
                                  "params": {"K": 2}})
    assert code == EXIT_OK
    rep = load(out)
    res = rep["result"]
    assert rep["status"] == "ok" and res["valid"] and res["levels"] == [1, 13]
    assert parse_exact(res["mass_last"]) == F(3, 8) ** 13
    assert parse_exact(res["bound"]) == 2
    assert res["mass_last"]["decimal"] == decimal_str(F(3, 8) ** 13)
    rows = list(csv.reader((out / "series.csv").open()))
    assert rows[0] == ["level", "mass_E", "mass_G", "c"]
    assert F(rows[2][1]) == F(3, 8) ** 13
    assert set(json.loads((out / "timings.json").read_text())) >= {"setup", "task"}


def test_reports_are_deterministic(tmp_path):
    cfg = {"task": "certify", "spec": BARANSKI_SPEC, "measure": {"kind": "split", "tau": "2", "depth": 4},
           "params": {"K": 1}, "seed": 5}
    _, a = invoke(tmp_path, cfg, name="a")
    _, b = invoke(tmp_path, cfg, name="b")
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_seed_flag_overrides(tmp_path):
    cfg = {"task": "diagnose", "measure": {"kind": "split", "tau": "2", "depth": 4},
           "params": {"radii": ["1/4"]}, "seed": 1}
    _, a = invoke(tmp_path, cfg, name="a")
    _, b = invoke(tmp_path, cfg, "--seed", "9", name="b")
    assert load(a)["seed"] == 1 and load(b)["seed"] == 9


def test_decay(tmp_path):
    code, out = invoke(tmp_path, {"task": "decay", "spec": CANTOR_SPEC, "params": {"levels": [1, 2, 3], "tau": "2"}})
    assert code == EXIT_OK
    text = (out / "report.json").read_text()
    for v in (F(4, 5), F(40, 61), F(4160, 6553)):
        assert f'"{v}"' in text


def test_adversary(tmp_path):
    code, out = invoke(tmp_path, {"task": "adversary", "spec": BM_SPEC, "params": {"level": 2, "tau": "2"}})
    assert code == EXIT_OK
    assert f'"{F(520, 1373)}"' in (out / "report.json").read_text()


def test_graph(tmp_path):
    code, out = invoke(tmp_path, {"task": "graph", "measure": {"kind": "lebesgue"},
                                  "params": {"function": {"kind": "affine", "const": "0", "grad": ["1"]},
                                             "levels": [1, 2, 3, 4]}})
    assert code == EXIT_OK
    res = load(out)["result"]
    assert res["non_increasing"]
    assert [parse_exact(m) for m in res["masses"]] == [F(2 ** (n + 1) - 1, 4 ** n) for n in (1, 2, 3, 4)]


def test_file_measure(tmp_path):
    mu = product_measure([from_1d_weights([1, 2]), from_1d_weights([1, 1, 1, 1])])
    (tmp_path / "mu.json").write_text(mu.to_json())
    code, _ = invoke(tmp_path, {"task": "certify", "spec": BM_SPEC,
                                "measure": {"kind": "file", "path": "mu.json"}, "params": {"K": 1}})
    assert code == EXIT_OK


# -- figures ----------------------------------------------------------------

def test_render_carpet(tmp_path):
    code, out = invoke(tmp_path, {"task": "render", "spec": BARANSKI_SPEC, "params": {"level": 1}})
    assert code == EXIT_OK
    svg = (out / "figure.svg").read_text()
    assert svg.startswith("<svg") and svg.count('fill="#4a4a4a"') == 5
    assert 'id="panel-xy"' in svg


def test_render_level_zero_is_one_square():
    svg = render_levelset(level_set(BM, 0))
    assert svg.count('fill="#4a4a4a"') == 1


def test_render_sponge_three_panels():
    svg = render_levelset(level_set(SPONGE, 1))
    for name in ("xy", "yz", "zx"):
        assert f'id="panel-{name}"' in svg


def test_render_budget():
    boxes = [Box.unit(2)] * (MAX_FIGURE_BOXES + 1)
    with pytest.raises(EnumerationBudget):
        render_levelset(boxes)


# -- failure paths ----------------------------------------------------------

@pytest.mark.parametrize("cfg", [
    {"task": "decay", "spec": CANTOR_SPEC, "params": {"levels": [1]}, "colour": "red"},
    {"task": "decay", "spec": CANTOR_SPEC, "params": {"levels": []}},
    {"task": "decay", "spec": CANTOR_SPEC, "params": {"levels": [1], "speed": 3}},
    {"task": "certify", "spec": BM_SPEC, "measure": {"kind": "gaussian"}},
    {"task": "certify", "spec": {"kind": "carpet", "widths": ["1/2", "1/3"], "heights": ["1"],
                                 "digits": [[1, 1]]}},
    {"task": "adversary", "spec": BM_SPEC, "params": {"solver": "magic"}},
    {"task": "certify", "spec": BM_SPEC, "measure": {"kind": "file", "path": "missing.json"}},
])
def test_config_errors(tmp_path, cfg):
    code, _ = invoke(tmp_path, cfg)
    assert code == EXIT_CONFIG


def test_subcommand_mismatch(tmp_path):
    code, _ = invoke(tmp_path, {"task": "decay", "spec": CANTOR_SPEC, "params": {"levels": [1]}}, task="render")
    assert code == EXIT_CONFIG


def test_invalid_json(tmp_path):
    (tmp_path / "c.json").write_text("{task: ")
    assert main(["decay", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_validate_config_normalises():
    cfg = validate_config({"task": "graph", "params": {"function": {"kind": "affine"}}})
    assert cfg["seed"] == 0 and cfg["measure"] == {"kind": "lebesgue"}
    with pytest.raises(ConfigError):
        validate_config({"task": "decay", "spec": CANTOR_SPEC, "measure": {"kind": "lebesgue"},
                         "params": {"levels": [1]}})


@pytest.mark.parametrize("cfg", [
    {"task": "render", "spec": BM_SPEC, "params": {"level": 6}},
    {"task": "adversary", "spec": BM_SPEC, "params": {"level": 3}},
])
def test_budget_exit(tmp_path, cfg):
    code, _ = invoke(tmp_path, cfg, "--budget", "50")
    assert code == EXIT_BUDGET


def test_degenerate_measure_exit(tmp_path):
    # all mass sits in the excluded cell of the carpet
    mu = product_measure([from_1d_weights([0, 1]), from_1d_weights([0, 1, 0])])
    (tmp_path / "mu.json").write_text(mu.to_json())
    code, _ = invoke(tmp_path, {"task": "certify", "spec": BARANSKI_SPEC,
                                "measure": {"kind": "file", "path": "mu.json"}, "params": {"K": 1}})
    assert code == EXIT_CONSISTENCY


# -- number formatting ------------------------------------------------------

def test_decimal_str():
    assert decimal_str(F(1, 3)) == "0.333333333333"
    assert decimal_str(F(2, 3)) == "0.666666666667"
    assert decimal_str(F(1)) == "1"
    # half-even at the twelfth digit
    assert decimal_str(Decimal("0.1234567890125")) == "0.123456789012"
    assert decimal_str(Decimal("0.1234567890135")) == "0.123456789014"


def test_dumps_roundtrip():
    text = dumps({"x": F(1594323, 549755813888), "y": [F(1, 2), 3], "z": None})
    back = json.loads(text)
    assert parse_exact(back["x"]) == F(3, 8) ** 13
    assert back["y"][1] == 3 and back["z"] is None
