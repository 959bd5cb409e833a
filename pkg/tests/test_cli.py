import json

import pytest

from aprad.cli import (
    ConfigError,
    RunConfig,
    load_config_file,
    load_table_model_file,
    main,
)

DENSE_TABLE = """\
abcdefghij
default,0.18,0.07,0.05,0.14,0.12,0.11,0.10,0.09,0.08,0.06
"""


def write_table(tmp_path, text=DENSE_TABLE):
    path = tmp_path / "model.csv"
    path.write_text(text)
    return str(path)


class TestExitCodes:
    def test_zero_samples_is_config_error(self, capsys):
        assert main(["testbench", "--specs", "AAA", "--samples", "0"]) == 2
        assert "samples" in capsys.readouterr().err

    def test_unknown_flag_exits_two(self, capsys):
        assert main(["testbench", "--nonsense"]) == 2

    def test_unknown_method_rejected(self, capsys):
        assert main(["testbench", "--methods", "magic", "--samples", "10"]) == 2

    def test_bad_error_set_rejected(self, capsys):
        assert main(["ideal", "--error-set", "AAX"]) == 2

    def test_all_excluded_ideal_exits_three(self, capsys):
        assert main(["ideal", "--error-set", "***"]) == 3

    def test_budget_exhaustion_exits_four(self, tmp_path, capsys):
        table = write_table(tmp_path)
        code = main([
            "generate", "--model", f"table:{table}", "--error-set", "banned:abc",
            "--method", "asap", "--length", "50", "--budget", "200", "--seed", "11",
        ])
        assert code == 4
        assert "completed: False" in capsys.readouterr().out


class TestIdeal:
    def test_single_exclusion_rows(self, capsys):
        assert main(["ideal", "--error-set", "AAA", "--length", "3"]) == 0
        out = capsys.readouterr().out.strip().split("\n")
        assert out[0] == "sequence,probability"
        rows = [ln for ln in out[1:] if not ln.startswith("#")]
        assert len(rows) == 26
        for ln in rows:
            seq, prob = ln.split(",")
            assert seq != "AAA"
            assert float(prob) == pytest.approx(1 / 26)

    def test_empty_set_length_one(self, capsys):
        assert main(["ideal", "--error-set", "", "--length", "1"]) == 0
        rows = [
            ln for ln in capsys.readouterr().out.strip().split("\n")[1:]
            if not ln.startswith("#")
        ]
        assert len(rows) == 3
        assert all(float(ln.split(",")[1]) == pytest.approx(1 / 3) for ln in rows)


class TestGenerate:
    def test_deterministic_given_seed(self, capsys):
        args = ["generate", "--error-set", "AAA", "--method", "aprad", "--seed", "5"]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        assert capsys.readouterr().out == first

    def test_methods_agree_on_empty_error_set(self, capsys):
        seqs = set()
        for method in ("unconstrained", "rejection", "constrained", "asap", "aprad"):
            assert main([
                "generate", "--error-set", "", "--method", method, "--seed", "7",
            ]) == 0
            out = capsys.readouterr().out
            seqs.add(out.split("\n")[0])
        assert len(seqs) == 1

    def test_entropy_seed_printed_when_omitted(self, capsys):
        assert main(["generate", "--error-set", "AAA", "--method", "constrained"]) == 0
        assert "seed drawn from entropy" in capsys.readouterr().out

    def test_aprad_usually_finishes_dense_task(self, tmp_path, capsys):
        table = write_table(tmp_path)
        code = main([
            "generate", "--model", f"table:{table}", "--error-set", "banned:abc",
            "--method", "aprad", "--length", "50", "--budget", "2000", "--seed", "11",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "completed: True" in out
        banned = set("abc")
        seq_line = out.split("\n")[0].split(": ")[1]
        assert not banned & set(seq_line)


class TestTestbench:
    def test_csv_report_with_provenance(self, tmp_path, capsys):
        out_file = tmp_path / "report.csv"
        code = main([
            "testbench", "--specs", "AAA", "--methods", "aprad,constrained",
            "--samples", "300", "--seeds", "1,2", "--output", "csv",
            "--output-path", str(out_file),
        ])
        assert code == 0
        text = out_file.read_text()
        lines = text.strip().split("\n")
        assert lines[0].startswith("error_set,method,")
        assert len([ln for ln in lines if ln.startswith("AAA,")]) == 2
        assert lines[-1].startswith("# config_hash=")
        assert "seeds=1,2" in lines[-1]

    def test_json_output_parses(self, capsys):
        code = main([
            "testbench", "--specs", "AAA", "--methods", "aprad",
            "--samples", "200", "--seeds", "3", "--output", "json",
        ])
        assert code == 0
        out = capsys.readouterr().out
        body = out[: out.rindex("# config_hash")]
        data = json.loads(body)
        assert data["rows"][0]["method"] == "aprad"

    def test_deterministic_reports(self, capsys):
        args = [
            "testbench", "--specs", "AAA; AAA, AAC", "--methods", "asap",
            "--samples", "150", "--seeds", "1", "--output", "csv",
        ]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        assert capsys.readouterr().out == first

    def test_unconstrained_divergence_exits_three(self, capsys):
        code = main([
            "testbench", "--specs", "AAA", "--methods", "unconstrained",
            "--samples", "400", "--seeds", "1", "--output", "csv",
        ])
        assert code == 3


class TestConfigFile:
    def test_round_trip(self, tmp_path):
        cfg = RunConfig(
            vocab="AB", method="asap", length=2, samples=42, seeds=(9,),
            error_set="AA", specs=("AA", "AB, BA"), temperature=0.8, top_k=2,
            output="json",
        )
        path = tmp_path / "run.ini"
        path.write_text(cfg.to_ini())
        assert load_config_file(str(path)) == cfg

    def test_flags_override_config(self, tmp_path, capsys):
        path = tmp_path / "run.ini"
        path.write_text(RunConfig(method="asap", error_set="AAA").to_ini())
        assert main([
            "generate", "--config", str(path), "--method", "aprad", "--seed", "1",
        ]) == 0

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[run]\nbogus = 1\n")
        with pytest.raises(ConfigError):
            load_config_file(str(path))

    def test_hash_stable_under_round_trip(self, tmp_path):
        cfg = RunConfig(seeds=(4, 5))
        path = tmp_path / "run.ini"
        path.write_text(cfg.to_ini())
        assert load_config_file(str(path)).config_hash() == cfg.config_hash()


class TestTableModelFile:
    def test_load_and_vocab(self, tmp_path):
        model = load_table_model_file(write_table(tmp_path))
        assert model.vocab.size == 10
        assert model.conditional(())[0] == pytest.approx(0.18)

    def test_prefix_rows(self, tmp_path):
        text = (
            "A,B\n"
            "default,0.5,0.5\n"
            "-,0.9,0.1\n"
            "AB,0.2,0.8\n"
        )
        model = load_table_model_file(write_table(tmp_path, text))
        assert model.conditional(())[0] == pytest.approx(0.9)
        assert model.conditional((0, 1))[1] == pytest.approx(0.8)
        assert model.conditional((1,))[0] == pytest.approx(0.5)

    def test_missing_default_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_table_model_file(write_table(tmp_path, "A,B\n-,0.5,0.5\n"))

    def test_invalid_distribution_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_table_model_file(write_table(tmp_path, "A,B\ndefault,0.5,0.6\n"))
