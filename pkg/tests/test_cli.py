import csv
import io

import pytest

from lowmem_dealers import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_simulate_schema_and_determinism(capsys):
    argv = ("simulate", "--dealer", "adaptive", "--d", "8", "--n", "256", "--trials", "20", "--seed", "4")
    code, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert code == cli.OK and first == second
    assert first.splitlines()[0] == ",".join(cli.HEADER)
    (row,) = rows(first)
    assert row["dealer"] == "adaptive" and row["trials"] == "20" and row["seconds"] == "0"


def test_validation_errors_exit_one(capsys):
    assert run(capsys, "simulate", "--trials", "0")[0] == cli.INVALID
    assert run(capsys, "simulate", "--dealer", "adaptive", "--n", "100", "--d", "7")[0] == cli.INVALID
    assert run(capsys, "simulate", "--dealer", "prp", "--guesser", "myopic-sim")[0] == cli.INVALID
    code, _, err = run(capsys, "verify", "nonsense")
    assert code == cli.INVALID and "nonsense" in err
    assert run(capsys, "sweep", "--d-list", "a,b")[0] == cli.INVALID


def test_sweep_validates_every_cell_before_playing(capsys):
    code, out, _ = run(capsys, "sweep", "--dealer", "adaptive", "--n", "64", "--d-list", "4,5", "--trials", "2")
    assert code == cli.INVALID and out == ""


def test_single_cell_sweep_equals_simulate(capsys):
    base = ("--dealer", "adaptive", "--n", "128", "--d", "8", "--trials", "15", "--seed", "9")
    _, sim, _ = run(capsys, "simulate", *base)
    _, sw, _ = run(capsys, "sweep", *base)
    _, sw_list, _ = run(capsys, "sweep", *base, "--d-list", "8")
    assert sim == sw == sw_list


def test_sweep_has_one_header(capsys):
    _, out, _ = run(capsys, "sweep", "--n-list", "8,16,32", "--trials", "5")
    lines = out.splitlines()
    assert lines.count(",".join(cli.HEADER)) == 1 and len(lines) == 4


def test_out_file(tmp_path, capsys):
    path = tmp_path / "r.csv"
    assert run(capsys, "simulate", "--n", "16", "--trials", "3", "--out", str(path))[1] == ""
    assert path.read_text().startswith("dealer,guesser")


@pytest.mark.parametrize("dealer,n,extra", [("bitmap", 128, ()), ("adaptive", 128, ("--d", "8")),
                                            ("fy", 12, ()), ("perfect", 8, ())])
def test_codec_subcommand(capsys, dealer, n, extra):
    code, out, _ = run(capsys, "codec", "--dealer", dealer, "--n", str(n), "--block", "4", *extra)
    (row,) = rows(out)
    assert code == cli.OK and row["round_trip"] == "ok"
    assert int(row["total_bits"]) == n // 4 * (int(row["state_bits"]) + int(row["perm_bits"]))


def test_codec_search_limit(capsys):
    assert run(capsys, "codec", "--dealer", "fy", "--n", "128")[0] == cli.INVALID


def test_codec_rejects_bad_block(capsys):
    assert run(capsys, "codec", "--n", "128", "--block", "5")[0] == cli.INVALID


def test_verify_codec_suite(capsys):
    code, out, _ = run(capsys, "verify", "codec")
    assert code == cli.OK and out.startswith("PASS")


def test_score_halves_as_decks_double(capsys):
    _, out, _ = run(capsys, "sweep", "--dealer", "adaptive", "--guesser", "myopic-sim", "--n", "4096",
                    "--d-list", "16,32,64,128", "--trials", "20", "--seed", "3")
    means = [float(r["mean_score"]) for r in rows(out)]
    ratios = [a / b for a, b in zip(means, means[1:])]
    assert all(1.6 <= r <= 2.4 for r in ratios), ratios
