import csv
import hashlib
import io
import subprocess
import sys

import pytest

from latticetag.cli import EXIT_AUTH, EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from latticetag.credentials import load_credential

S = "ab" * 32
SMALL_FLAGS = ["--m", "8", "--n", "2", "--q", "17"]


@pytest.fixture
def files(tmp_path):
    t, r, reg = tmp_path / "t.cred", tmp_path / "r.cred", tmp_path / "reg.bin"
    assert main(["--seed", S, "keygen", "tag", "--out", str(t)] + SMALL_FLAGS) == EXIT_OK
    assert main(["--seed", S, "keygen", "reader", "--out", str(r)] + SMALL_FLAGS) == EXIT_OK
    assert main(["register", "--registry", str(reg), str(t), str(r)]) == EXIT_OK
    return t, r, reg


def test_keygen_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["--seed", S, "keygen", "tag", "--out", str(a)] + SMALL_FLAGS)
    main(["keygen", "tag", "--out", str(b), "--seed", S] + SMALL_FLAGS)
    assert hashlib.sha256(a.read_bytes()).digest() == hashlib.sha256(b.read_bytes()).digest()
    assert load_credential(a).params.m == 8
    err = capsys.readouterr().err
    assert f"seed: {S}" in err


def test_keygen_default_params(tmp_path):
    out = tmp_path / "h.cred"
    assert main(["--seed", S, "keygen", "reader", "--out", str(out)]) == EXIT_OK
    assert load_credential(out).params.m == 2048


def test_keygen_bad_params(tmp_path):
    assert main(["keygen", "tag", "--out", str(tmp_path / "x"), "--m", "8", "--n", "2", "--q", "16"]) == EXIT_USAGE


def test_run_honest(files, tmp_path, capsys):
    t, r, reg = files
    report = tmp_path / "run.json"
    assert main(["--seed", S, "run", "--registry", str(reg), "--tag", str(t), "--reader", str(r), "--out", str(report)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "messages: 7" in out and "outcome: success" in out
    assert "registry scan: reader=1, tag=1" in out


def test_run_deterministic(files, tmp_path):
    t, r, reg = files
    texts = []
    for name in ("a.json", "b.json"):
        main(["--seed", S, "run", "--registry", str(reg), "--tag", str(t), "--reader", str(r), "--out", str(tmp_path / name)])
        texts.append((tmp_path / name).read_bytes())
    assert texts[0] == texts[1]


def test_run_seed_from_env(files, monkeypatch, capsys):
    t, r, reg = files
    monkeypatch.setenv("LATTICETAG_SEED", S)
    main(["run", "--registry", str(reg), "--tag", str(t), "--reader", str(r)])
    assert f"seed: {S}" in capsys.readouterr().err


def test_run_unregistered_tag(files, tmp_path, capsys):
    t, r, reg = files
    other = tmp_path / "other.cred"
    main(["--seed", "cd" * 32, "keygen", "tag", "--out", str(other)] + SMALL_FLAGS)
    assert main(["run", "--registry", str(reg), "--tag", str(other), "--reader", str(r)]) == EXIT_AUTH
    assert "TagRejected" in capsys.readouterr().out


def test_run_bad_file(files, tmp_path):
    t, r, reg = files
    bad = tmp_path / "bad.cred"
    bad.write_bytes(b"junk")
    assert main(["run", "--registry", str(reg), "--tag", str(bad), "--reader", str(r)]) == EXIT_DATA
    assert main(["run", "--registry", str(reg), "--tag", str(tmp_path / "missing"), "--reader", str(r)]) == EXIT_DATA


def test_attack_all(capsys):
    assert main(["--seed", S, "attack", "all"] + SMALL_FLAGS) == EXIT_OK
    out = capsys.readouterr().out
    assert sum("\tBLOCKED\t" in line for line in out.splitlines()) >= 8
    assert "NOT-BLOCKED" not in out


def test_attack_with_files(files, capsys):
    t, r, reg = files
    assert main(["--seed", S, "attack", "replay-tag", "--registry", str(reg), "--tag", str(t), "--reader", str(r)]) == EXIT_OK


def test_attack_report_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        main(["--seed", S, "attack", "replay-tag", "--out", str(tmp_path / name)] + SMALL_FLAGS)
        outs.append(hashlib.sha256((tmp_path / name).read_bytes()).hexdigest())
    assert outs[0] == outs[1]


def test_attack_unknown():
    with pytest.raises(SystemExit) as ei:
        main(["attack", "no-such-attack"])
    assert ei.value.code == EXIT_USAGE


def test_usage_errors():
    for argv in (["bogus"], ["--seed", "zz", "cost"], ["--seed", "00", "cost"], ["run"]):
        with pytest.raises(SystemExit) as ei:
            main(argv)
        assert ei.value.code == EXIT_USAGE, argv


def test_cost_csv(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["cost", "--convention", "paper", "--convention", "wire", "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 10
    head = [r for r in rows if r["m"] == "2048" and r["convention"] == "paper"][0]
    for ent, pub in (("tag", 0.129), ("reader", 0.132), ("server", 0.515)):
        assert float(head[f"storage_{ent}_mb"]) == pytest.approx(pub, rel=0.01)
    wire_row = [r for r in rows if r["m"] == "2048" and r["convention"] == "wire"][0]
    assert int(wire_row["comm_total_bits"]) == 186_139


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "latticetag", "--seed", S, "cost", "--m", "8", "--n", "2", "--q", "17"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("m,n,q,l,convention")
