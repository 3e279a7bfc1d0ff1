import json
import subprocess
import sys

import pytest

from hmmldpc.cli import build_parser, main, parse_ebn0, parse_mask
from hmmldpc.code import LdpcCode
from hmmldpc.sim import CSV_HEADER

from .conftest import FIXTURES

CODE = str(FIXTURES / "code_n128_s1.json")


def test_parse_ebn0():
    assert parse_ebn0("1:2:0.5") == (1.0, 1.5, 2.0)
    assert parse_ebn0("2.0:3.0:0.1")[-1] == 3.0
    assert parse_ebn0("2.7") == (2.7,)
    assert parse_ebn0("1,2.5") == (1.0, 2.5)


def test_parse_mask():
    assert parse_mask("1,3,4") == (1, 3, 4)
    with pytest.raises(Exception):
        parse_mask("0,5")


def test_all_flags_parse():
    args = build_parser().parse_args(
        "fer --code-file c.json --frame-bits 128 --ebn0 2:3:0.5 --frames 10 --min-errors 5 --decoder hmm "
        "--walks 7 --iters 4 --bp-iters 100 --stage-mask 1,3,4 --erase-max 0.1 --erase-step 0.05 "
        "--repair2 --disable-repeats --extended-dedup --seed 3 --workers 2 --out r.csv --json r.json".split()
    )
    assert args.walks == 7 and args.stage_mask == (1, 3, 4) and args.repair2 and args.extended_dedup
    args = build_parser().parse_args("frame --emission extended --trace t/".split())
    assert args.emission == "extended" and args.trace == "t/"


def test_construct_json_and_alist(tmp_path, capsys):
    assert main(["construct", "--frame-bits", "64", "--seed", "2", "--out", str(tmp_path / "c.json")]) == 0
    assert main(["construct", "--frame-bits", "64", "--seed", "2", "--out", str(tmp_path / "c.alist")]) == 0
    a = LdpcCode.load(tmp_path / "c.json")
    b = LdpcCode.load(tmp_path / "c.alist")
    assert a.H == b.H and a.N == 64
    assert main(["construct", "--frame-bits", "64", "--seed", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["N"] == 64


def test_construct_impossible_reports_error(capsys):
    assert main(["construct", "--frame-bits", "8"]) == 2
    assert "error" in capsys.readouterr().err


def test_fer_outputs(tmp_path):
    out, js = tmp_path / "r.csv", tmp_path / "r.json"
    rc = main(["fer", "--code-file", CODE, "--decoder", "bp", "--ebn0", "2,3", "--frames", "50",
               "--out", str(out), "--json", str(js)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == CSV_HEADER and len(lines) == 3
    assert len(json.loads(js.read_text())["points"]) == 2


def test_stages_table(capsys):
    assert main(["stages", "--code-file", CODE, "--walks", "3", "--erase-step", "0.1", "--ebn0", "2",
                 "--frames", "10"]) == 0
    text = capsys.readouterr().out
    assert "stage1" in text and "failed" in text


def test_frame_with_trace(tmp_path, capsys):
    rc = main(["frame", "--code-file", CODE, "--walks", "3", "--erase-step", "0.1", "--ebn0", "2",
               "--frame", "1", "--emission", "extended", "--trace", str(tmp_path)])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["stage"] is not None
    assert json.loads((tmp_path / "outcome.json").read_text())["emission"] == "extended"
    assert (tmp_path / "trace_repeats_off.jsonl").exists()


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "hmmldpc", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("construct", "fer", "frame", "stages"):
        assert cmd in r.stdout
