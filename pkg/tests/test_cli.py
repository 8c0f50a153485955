from __future__ import annotations

import csv
import json
from fractions import Fraction

import pytest

from exactml import cli
from exactml.exact_arith import parse_rational
from exactml.integrator import mixture_marginal
from exactml.model import ModelSpec, collapse_data, normalizing_constant

SMALL = "66364720654753/59057383987217015339940000"


def run_main(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_small_coin_report(capsys):
    code, out, _ = run_main(["--s", "4", "--t", "1", "--U", "2,2,2,2,2", "--reduced"], capsys)
    assert code == cli.EXIT_OK
    rep = json.loads(out)
    assert rep["mixture"]["raw"]["exact"] == SMALL
    assert rep["model"]["A_reduced"] == [[4, 3, 2, 1, 0], [0, 1, 2, 3, 4]]
    assert rep["model"]["multiplicities"] == [1, 4, 6, 4, 1]
    assert len(rep["model"]["A"][0]) == 16
    assert rep["bounds"] == {"lattice_points": 91, "lower": 51, "upper": 91, "unimodular": False,
                             "independent_subsets": 16}
    assert rep["mixture"]["term_count"] == 91
    assert "diagnostics" not in rep


def test_report_round_trip():
    cfg = cli.build_config({"s": "4", "t": "1", "U": "3,1,4,1,5", "reduced": True})
    rep = cli.run(cfg).data
    red = ModelSpec((4,), (1,)).reduced()
    raw = mixture_marginal(red.matrix, (3, 1, 4, 1, 5)).exact
    const = normalizing_constant((3, 1, 4, 1, 5), red.multiplicities)
    assert parse_rational(rep["mixture"]["raw"]["exact"]) == raw
    assert parse_rational(rep["mixture"]["marginal"]["exact"]) == raw * const
    assert int(rep["normalizing_constant"]) == const
    indep = parse_rational(rep["independence"]["marginal"]["exact"])
    assert parse_rational(rep["bayes_factor"]["exact"]) == indep / (raw * const)


def test_unreduced_input_uses_plain_multinomial():
    U = [1, 0, 2, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1]
    rep = cli.run(cli.build_config({"s": "4", "t": "1", "U": U})).data
    raw = parse_rational(rep["mixture"]["raw"]["exact"])
    assert parse_rational(rep["mixture"]["marginal"]["exact"]) == raw * normalizing_constant(U)
    spec = ModelSpec((4,), (1,))
    Ured = collapse_data(spec.matrix(), U, spec.reduced())
    assert Ured == (1, 2, 2, 0, 1)
    red = cli.run(cli.build_config({"s": "4", "t": "1", "U": list(Ured), "reduced": True})).data
    assert parse_rational(red["mixture"]["raw"]["exact"]) == raw


def test_bounds_only(capsys):
    code, out, _ = run_main(["--fixture", "coin", "--bounds-only"], capsys)
    rep = json.loads(out)
    assert code == 0 and "mixture" not in rep
    assert (rep["bounds"]["lower"], rep["bounds"]["upper"]) == (22273, 48646)
    zero = cli.bounds_only(cli.build_config({"s": "4", "t": "1", "U": "0,0,0,0,0", "reduced": True}))
    assert (zero["lower"], zero["upper"]) == (1, 1)


def test_swiss_bounds_only(capsys):
    code, out, _ = run_main(["--fixture", "swiss", "--extended", "--bounds-only"], capsys)
    rep = json.loads(out)
    assert rep["bounds"]["lower"] == rep["bounds"]["upper"] == 3892097
    assert rep["bounds"]["unimodular"] is True


def test_config_errors(capsys):
    assert run_main(["--s", "4", "--U", "1"], capsys)[0] == cli.EXIT_CONFIG
    assert run_main(["--s", "4", "--t", "1", "--U", "1,2"], capsys)[0] == cli.EXIT_CONFIG
    assert run_main(["--s", "4", "--t", "1", "--U", "1,x"], capsys)[0] == cli.EXIT_CONFIG
    assert run_main(["--no-such-flag"], capsys)[0] == cli.EXIT_CONFIG
    assert run_main(["--s", "1", "--t", "1", "--U", "1,1", "--prior", "uniform", "--alpha", "1,2"],
                    capsys)[0] == cli.EXIT_CONFIG
    assert run_main(["--s", "1", "--t", "1", "--U", "1,1", "--explicit-matrix", "1,0;0,1"],
                    capsys)[0] == cli.EXIT_CONFIG


def test_budget_errors(capsys):
    code, _, err = run_main(["--fixture", "swiss"], capsys)
    assert code == cli.EXIT_BUDGET and "--extended" in err
    code, _, err = run_main(["--fixture", "coin", "--memory-budget", "1K"], capsys)
    assert code == cli.EXIT_BUDGET and "budget" in err


def test_dirichlet_flags(capsys):
    code, out, _ = run_main(["--s", "1", "--t", "1", "--U", "1,1", "--prior", "dirichlet", "--alpha", "1,2",
                             "--beta", "1/2,3", "--gamma", "2,5/3"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["prior"] == {"variant": "dirichlet", "alpha": ["1/1", "2/1"], "beta": [["1/2", "3/1"]],
                            "gamma": [["2/1", "5/3"]]}
    assert rep["mixture"]["raw"]["exact"] == "20/99"


def test_config_file_and_flag_override(tmp_path, capsys):
    job = {"s": [1], "t": [1], "U": [1, 1],
           "prior": {"variant": "dirichlet", "alpha": [1, 2], "beta": [["1/2", 3]], "gamma": [[2, "5/3"]]}}
    path = tmp_path / "job.json"
    path.write_text(json.dumps(job))
    code, out, _ = run_main(["--config", str(path)], capsys)
    assert json.loads(out)["mixture"]["raw"]["exact"] == "20/99"
    code, out, _ = run_main(["--config", str(path), "--alpha", "1,1", "--U", "2,0"], capsys)
    rep = json.loads(out)
    assert rep["prior"]["alpha"] == ["1/1", "1/1"] and rep["data"]["U"] == [2, 0]
    path.write_text("[1, 2]")
    assert run_main(["--config", str(path)], capsys)[0] == cli.EXIT_CONFIG


def test_explicit_matrix(capsys):
    code, out, _ = run_main(["--explicit-matrix", "4,3,2,1,0;0,1,2,3,4", "--U", "2,2,2,2,2"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["model"]["explicit"] is True
    assert rep["mixture"]["raw"]["exact"] == SMALL
    code, out, _ = run_main(["--explicit-matrix", "1,1,0,0;0,0,1,1;1,0,1,0;0,1,0,1", "--group-sizes", "2,2",
                             "--U", "1,2,3,4"], capsys)
    rep = json.loads(out)
    direct = cli.run(cli.build_config({"s": "1,1", "t": "1,1", "U": "1,2,3,4"})).data
    # the structured model orders its columns differently: (0,0),(0,1),(1,0),(1,1)
    assert rep["model"]["group_sizes"] == [2, 2]
    assert rep["mixture"]["raw"]["exact"] == cli.run(cli.build_config(
        {"s": "1,1", "t": "1,1", "U": "1,3,2,4"})).data["mixture"]["raw"]["exact"]
    assert direct["bounds"]["unimodular"] is True


def test_algorithms_and_split_agree():
    base = {"s": "4", "t": "1", "U": "5,3,7,2,6", "reduced": True}
    ref = cli.run(cli.build_config(base)).data["mixture"]["raw"]["exact"]
    for extra in ({"algorithm": "naive"}, {"algorithm": "streaming"}, {"split": "3,2"}, {"split": "auto"},
                  {"threads": 2}):
        rep = cli.run(cli.build_config({**base, **extra})).data
        assert rep["mixture"]["raw"]["exact"] == ref, extra
    assert cli.run(cli.build_config({**base, "split": "2,2,1"})).data["mixture"]["partition"] == [2, 2, 1]


def test_text_output_and_diagnostics(capsys):
    code, out, _ = run_main(["--fixture", "coin-small", "--output", "text", "--diagnostics"], capsys)
    assert code == 0
    assert f"exact: {SMALL}" in out
    assert "diagnostics:" in out and "total_seconds" in out


def test_out_file_and_timing_csv(tmp_path, capsys):
    out = tmp_path / "report.json"
    csv_path = tmp_path / "timing.csv"
    for _ in range(2):
        code, stdout, _ = run_main(["--fixture", "coin-small", "-o", str(out), "--timing-csv", str(csv_path)], capsys)
        assert code == 0 and stdout == ""
    assert json.loads(out.read_text())["mixture"]["raw"]["exact"] == SMALL
    rows = list(csv.reader(csv_path.open()))
    assert rows[0][0] == "N" and len(rows) == 3 and rows[1][0] == "10"


def test_parse_bytes():
    assert cli.parse_bytes("512") == 512
    assert cli.parse_bytes("2K") == 2048
    assert cli.parse_bytes("1g") == 2**30
    with pytest.raises(cli.ConfigError):
        cli.parse_bytes("lots")


def test_report_is_identical_across_thread_counts():
    base = {"fixture": "coin-small"}
    outs = {cli.run(cli.build_config({**base, "threads": t})).to_json() for t in (1, 2, 4)}
    assert len(outs) == 1


def test_exact_strings_are_never_floats():
    rep = cli.run(cli.build_config({"fixture": "coin-small"})).data
    for block in (rep["mixture"]["raw"], rep["mixture"]["marginal"], rep["independence"]["raw"]):
        num, den = block["exact"].split("/")
        assert num.isdigit() and den.isdigit()
        assert Fraction(int(num), int(den)).denominator == int(den)
