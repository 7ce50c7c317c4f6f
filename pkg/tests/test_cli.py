import json

import pytest

from embedlab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestGen:
    def test_deterministic_files(self, tmp_path, capsys):
        a = tmp_path / "a.txt"
        b = tmp_path / "b.txt"
        for out in (a, b):
            code, _, _ = run(
                capsys, "gen", "--model", "uniform", "--n", "10", "--m", "20",
                "--seed", "7", "--out", str(out),
            )
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_sphere_writes_companion_points(self, tmp_path, capsys):
        out = tmp_path / "s.txt"
        code, stdout, _ = run(
            capsys, "gen", "--model", "sphere", "--n", "8", "--D", "2", "--m", "15",
            "--seed", "1", "--out", str(out), "--json",
        )
        assert code == 0
        payload = json.loads(stdout)
        assert payload["points_path"] == str(out) + ".points"
        assert (tmp_path / "s.txt.points").exists()

    def test_missing_m_is_domain_error(self, tmp_path, capsys):
        code, _, err = run(
            capsys, "gen", "--model", "uniform", "--n", "10", "--seed", "0",
            "--out", str(tmp_path / "x.txt"),
        )
        assert code == 1
        assert "--m" in err

    def test_unknown_flag_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["gen", "--bogus", "1"])
        assert exc.value.code == 2


class TestCheckEmbedEval:
    def test_missing_file_exit_one_names_path(self, capsys):
        code, _, err = run(capsys, "check", "missing-instance.txt")
        assert code == 1
        assert "missing-instance.txt" in err

    def test_pipeline_round_trip(self, tmp_path, capsys):
        inst_path = tmp_path / "i.txt"
        coords_path = tmp_path / "c.txt"
        code, _, _ = run(
            capsys, "gen", "--model", "uniform", "--n", "6", "--m", "4",
            "--seed", "12", "--out", str(inst_path),
        )
        assert code == 0
        code, stdout, _ = run(capsys, "check", str(inst_path), "--json")
        assert code == 0
        verdict = json.loads(stdout)
        if verdict["status"] == "Realizable":
            code, out, _ = run(capsys, "embed", str(inst_path), "--out", str(coords_path), "--json")
            assert code == 0
            assert json.loads(out)["accuracy"] == 1.0
            code, out, _ = run(
                capsys, "eval", str(inst_path), "--coords", str(coords_path), "--json"
            )
            assert code == 0
            payload = json.loads(out)
            assert payload["accuracy"] == 1.0
            assert payload["satisfied"] == payload["total"] == 4
        else:
            assert verdict["witness_cycle"]
            code, _, err = run(capsys, "embed", str(inst_path), "--out", str(coords_path))
            assert code == 1

    def test_witness_printed(self, tmp_path, capsys):
        path = tmp_path / "bad.txt"
        path.write_text("triplets 3 2 0 external\n0 1 2\n0 2 1\n")
        code, out, _ = run(capsys, "check", str(path), "--witness")
        assert code == 0
        assert out.splitlines()[0] == "UNREALIZABLE"
        assert "witness" in out

    def test_json_valid_for_check(self, tmp_path, capsys):
        path = tmp_path / "ok.txt"
        path.write_text("triplets 3 1 0 external\n0 1 2\n")
        code, out, _ = run(capsys, "check", str(path), "--json")
        assert code == 0
        assert json.loads(out)["status"] == "Realizable"


class TestArboricityCli:
    def test_reports_density_fields(self, tmp_path, capsys):
        path = tmp_path / "i.txt"
        path.write_text("triplets 4 3 0 external\n0 1 2\n1 2 3\n2 3 0\n")
        code, out, _ = run(capsys, "arboricity", str(path), "--json")
        assert code == 0
        payload = json.loads(out)
        assert set(payload) == {
            "density_star", "rho", "forest_count_upper", "implied_dim_bound", "witness_subgraph",
        }
        num, den = payload["density_star"].split("/")
        assert int(num) > 0 and int(den) > 0


class TestTrainCli:
    def test_train_writes_coords_and_log(self, tmp_path, capsys):
        inst = tmp_path / "i.txt"
        run(
            capsys, "gen", "--model", "sphere", "--n", "20", "--D", "2", "--m", "200",
            "--seed", "3", "--out", str(inst),
        )
        coords = tmp_path / "c.txt"
        log = tmp_path / "log.csv"
        code, out, _ = run(
            capsys, "train", str(inst), "--d", "2", "--steps", "50", "--batch", "32",
            "--seed", "5", "--out", str(coords), "--log", str(log), "--eval-every", "25",
            "--json",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["steps_run"] == 50
        lines = log.read_text().splitlines()
        assert lines[0] == "step,loss,accuracy"
        assert len(lines) == 51
        # accuracy column is blank except on evaluation steps
        assert lines[1].endswith(",")
        assert not lines[25].endswith(",")

    def test_train_deterministic(self, tmp_path, capsys):
        inst = tmp_path / "i.txt"
        run(
            capsys, "gen", "--model", "uniform", "--n", "12", "--m", "40",
            "--seed", "8", "--out", str(inst),
        )
        outs = []
        for name in ("c1.txt", "c2.txt"):
            coords = tmp_path / name
            code, _, _ = run(
                capsys, "train", str(inst), "--d", "2", "--steps", "40", "--batch", "16",
                "--seed", "9", "--out", str(coords),
            )
            assert code == 0
            outs.append(coords.read_bytes())
        assert outs[0] == outs[1]


class TestBaselineCli:
    def test_reports_mean(self, tmp_path, capsys):
        inst = tmp_path / "i.txt"
        run(capsys, "gen", "--model", "uniform", "--n", "10", "--m", "50",
            "--seed", "2", "--out", str(inst))
        code, out, _ = run(capsys, "baseline", str(inst), "--trials", "2000", "--json")
        assert code == 0
        payload = json.loads(out)
        assert abs(payload["mean_accuracy"] - 0.5) < 0.05
        assert payload["trials"] == 2000


class TestMasCli:
    def test_reduce_solve_extract(self, tmp_path, capsys):
        graph = tmp_path / "g.digraph"
        graph.write_text("digraph 3\n0 1\n1 2\n2 0\n")
        reduced = tmp_path / "r.txt"
        code, _, _ = run(capsys, "mas", "reduce", str(graph), "--out", str(reduced))
        assert code == 0
        code, out, _ = run(capsys, "mas", "solve", str(graph), "--json")
        assert code == 0
        solved = json.loads(out)
        assert solved["method"] == "brute"
        assert solved["value"] == pytest.approx(2 / 3)
        coords = tmp_path / "c.txt"
        coords.write_text("1\n2\n3\n0\n")
        code, out, _ = run(capsys, "mas", "extract", str(graph), "--coords", str(coords), "--json")
        assert code == 0
        assert json.loads(out)["value"] == pytest.approx(2 / 3)

    def test_reduced_instance_readable(self, tmp_path, capsys):
        graph = tmp_path / "g.digraph"
        graph.write_text("digraph 2\n0 1\n")
        reduced = tmp_path / "r.txt"
        run(capsys, "mas", "reduce", str(graph), "--out", str(reduced))
        code, out, _ = run(capsys, "check", str(reduced))
        assert code == 0
        assert out.strip() == "REALIZABLE"


class TestSweepCli:
    def test_config_file_sweep(self, tmp_path, capsys):
        csv = tmp_path / "out.csv"
        cfg = tmp_path / "sweep.toml"
        cfg.write_text(
            "model = \"uniform\"\n"
            "n = 10\n"
            "m = 30\n"
            "d_grid = [1, 2]\n"
            "seeds = [0]\n"
            "steps = 10\n"
            "batch_size = 8\n"
            "baseline_trials = 20\n"
            f"out = \"{csv}\"\n"
        )
        code, out, _ = run(capsys, "sweep", "--config", str(cfg), "--json")
        assert code == 0
        assert json.loads(out)["rows"] == 2
        assert csv.exists()

    def test_preset_requires_out(self, capsys):
        code, _, err = run(capsys, "sweep", "--preset", "figure1-desk")
        assert code == 1

    def test_config_and_preset_conflict(self, capsys):
        code, _, err = run(capsys, "sweep", "--config", "a", "--preset", "b")
        assert code == 1


class TestVerifyCli:
    def test_lemma_baseline(self, capsys):
        code, out, _ = run(
            capsys, "verify", "lemma", "baseline", "--n", "12", "--m", "100",
            "--trials", "2000", "--json",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["passed"] is True

    def test_lemma_unknown_name(self, capsys):
        code, _, err = run(capsys, "verify", "lemma", "nope")
        assert code == 1

    def test_theorem3_small(self, capsys):
        code, out, _ = run(
            capsys, "verify", "theorem3", "--D", "4", "--n", "60", "--epsilon", "0.5",
            "--seeds", "2", "--restarts", "1", "--json",
        )
        assert code == 0
        payload = json.loads(out)
        assert 0 <= payload["realizable_fraction"] <= 1
