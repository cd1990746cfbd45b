import json

import pytest

from cipheropt import cli
from cipheropt.cli import ConfigError, main, resolve_config
from cipheropt.graphs import (
    DirectedGraph,
    RandomActivationSchedule,
    StaticSchedule,
    save_graph_file,
)


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def parse(command, *argv):
    return cli.build_parser().parse_args([command, *argv])


SMALL = {
    "problem": {"m": 3, "s": 1, "d": 1, "instance_seed": 23},
    "schedule": "fig5a",
    "step_size": 5e-3,
    "c0": 0.3,
    "horizon": 8,
    "trials": 2,
}


class TestConfigResolution:
    def test_defaults_by_command(self):
        converge = resolve_config("converge", parse("converge"))
        privacy = resolve_config("privacy", parse("privacy"))
        assert converge["problem"]["m"] == 6
        assert converge["horizon"] == 2000
        assert privacy["problem"]["m"] == 3
        assert privacy["schedule"] == "fig5a"
        assert privacy["capture"] is True

    def test_file_then_flags_layering(self, tmp_path):
        cfg = write_config(tmp_path, {"trials": 7, "seed": 3})
        args = parse("converge", "--config", cfg, "--trials", "9")
        config = resolve_config("converge", args)
        assert config["trials"] == 9  # flag wins
        assert config["seed"] == 3

    def test_unknown_key_rejected(self, tmp_path):
        cfg = write_config(tmp_path, {"stepsize": 1e-3})
        with pytest.raises(ConfigError, match="unknown key 'stepsize'"):
            resolve_config("converge", parse("converge", "--config", cfg))

    def test_unknown_problem_key_rejected(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": {"agents": 4}})
        with pytest.raises(ConfigError, match="unknown problem key"):
            resolve_config("converge", parse("converge", "--config", cfg))

    def test_problem_must_be_a_table(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": 6})
        with pytest.raises(ConfigError, match="table"):
            resolve_config("converge", parse("converge", "--config", cfg))

    def test_problem_keys_merge_not_replace(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": {"m": 4}})
        config = resolve_config("converge", parse("converge", "--config", cfg))
        assert config["problem"]["m"] == 4
        assert config["problem"]["s"] == 3  # untouched default

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            resolve_config("converge", parse("converge", "--config", "/no/such.json"))

    def test_malformed_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n "trials": ,\n}')
        with pytest.raises(ConfigError, match="bad.json:2"):
            resolve_config("converge", parse("converge", "--config", str(path)))

    def test_top_level_must_be_object(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="object"):
            resolve_config("converge", parse("converge", "--config", str(path)))

    def test_stop_flag_comma_and_repeat(self):
        args = parse("stoptime", "--stop", "0.01,0.001", "--stop", "0.0005")
        config = resolve_config("stoptime", args)
        assert config["stop"] == [0.01, 0.001, 0.0005]

    def test_stop_flag_bad_float(self):
        with pytest.raises(ConfigError, match="--stop"):
            resolve_config("stoptime", parse("stoptime", "--stop", "lots"))

    def test_trials_floor(self):
        with pytest.raises(ConfigError, match="trials"):
            resolve_config("converge", parse("converge", "--trials", "0"))

    def test_bad_encryption_value_in_file(self, tmp_path):
        cfg = write_config(tmp_path, {"encryption": "maybe"})
        with pytest.raises(ConfigError, match="encryption"):
            resolve_config("converge", parse("converge", "--config", cfg))

    def test_bad_algorithm_in_file(self, tmp_path):
        cfg = write_config(tmp_path, {"algorithm": "adam"})
        with pytest.raises(ConfigError, match="unknown algorithm"):
            resolve_config("converge", parse("converge", "--config", cfg))


class TestScheduleLoading:
    def test_packaged_schedules(self):
        config = resolve_config("converge", parse("converge"))
        sched = cli._load_schedule(config, 0)
        assert isinstance(sched, RandomActivationSchedule)
        assert sched.m == 6
        config["schedule"] = "fig5a"
        assert cli._load_schedule(config, 0).m == 3

    def test_random_schedule_reseeded_per_trial(self):
        config = resolve_config("converge", parse("converge"))
        s0 = cli._load_schedule(config, 0)
        s1 = cli._load_schedule(config, 1)
        again = cli._load_schedule(config, 0)
        assert s0.seed != s1.seed
        assert s0.seed == again.seed

    def test_custom_schedule_file(self, tmp_path):
        path = tmp_path / "pair.graph"
        save_graph_file(StaticSchedule(DirectedGraph(2, frozenset({(1, 2), (2, 1)}))), path)
        config = resolve_config("converge", parse("converge"))
        config["schedule"] = str(path)
        assert cli._load_schedule(config, 0).m == 2

    def test_missing_schedule_file(self):
        config = resolve_config("converge", parse("converge"))
        config["schedule"] = "/no/such.graph"
        with pytest.raises(ConfigError, match="schedule file"):
            cli._load_schedule(config, 0)


class TestExitCodes:
    def test_success(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {**SMALL, "horizon": 4, "trials": 1})
        code = main(["converge", "--config", cfg, "--out", str(tmp_path / "out")])
        assert code == 0
        out = capsys.readouterr().out
        assert "wrote" in out

    def test_config_problem_exits_one(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"no_such": 1})
        code = main(["converge", "--config", cfg])
        assert code == 1
        assert "config error" in capsys.readouterr().err

    def test_runtime_problem_exits_two(self, tmp_path, capsys):
        # c0 = 0.4 is structurally invalid for six agents, but only the
        # engine can tell: that is a runtime failure, not a config one
        cfg = write_config(tmp_path, {"c0": 0.4, "horizon": 5, "trials": 1})
        code = main(["converge", "--config", cfg, "--out", str(tmp_path / "out")])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_unknown_flag_exits_one(self):
        with pytest.raises(SystemExit) as exc:
            main(["converge", "--frobnicate"])
        assert exc.value.code == 1


class TestConvergeCommand:
    def test_artifact_schema(self, tmp_path):
        cfg = write_config(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["converge", "--config", cfg, "--out", str(out)]) == 0
        path = out / "converge_algorithm1.csv"
        lines = path.read_text().splitlines()
        assert lines[0] == "iteration,mean_residual"
        assert lines[1] == "0,1.0"
        assert len(lines) == 1 + 8 + 1  # header + horizon + round zero

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, SMALL)
        a, b = tmp_path / "a", tmp_path / "b"
        main(["converge", "--config", cfg, "--out", str(a)])
        main(["converge", "--config", cfg, "--out", str(b)])
        name = "converge_algorithm1.csv"
        assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_all_algorithms(self, tmp_path):
        cfg = write_config(tmp_path, {**SMALL, "trials": 1, "horizon": 4})
        out = tmp_path / "out"
        code = main(["converge", "--config", cfg, "--out", str(out),
                     "--algorithm", "all"])
        assert code == 0
        for name in ("algorithm1", "push_diging", "subgradient_push", "ab_pushpull"):
            assert (out / f"converge_{name}.csv").is_file()

    def test_encryption_flag_does_not_change_results(self, tmp_path):
        cfg = write_config(tmp_path, {**SMALL, "trials": 1})
        a, b = tmp_path / "on", tmp_path / "off"
        main(["converge", "--config", cfg, "--out", str(a), "--encryption", "on"])
        main(["converge", "--config", cfg, "--out", str(b), "--encryption", "off"])
        name = "converge_algorithm1.csv"
        assert (a / name).read_bytes() == (b / name).read_bytes()


class TestStoptimeCommand:
    def test_trivial_criterion_stops_at_zero(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {**SMALL, "trials": 1, "horizon": 50})
        out = tmp_path / "out"
        code = main(["stoptime", "--config", cfg, "--out", str(out), "--stop", "1.0"])
        assert code == 0
        lines = (out / "stoptime.csv").read_text().splitlines()
        assert lines[0] == "criterion,encryption,iterations,reached"
        assert lines[1] == "1.0,on,0,1"
        assert lines[2] == "1.0,off,0,1"
        timing = (out / "stoptime_timing.txt").read_text().splitlines()
        assert timing[0].startswith("criterion encryption iterations")
        assert len(timing) == 3

    def test_encryption_does_not_change_iteration_counts(self, tmp_path):
        cfg = write_config(tmp_path, {
            "problem": {"m": 6, "s": 3, "d": 2, "instance_seed": 7},
            "horizon": 100, "trials": 1, "stop": [0.01],
        })
        out = tmp_path / "out"
        assert main(["stoptime", "--config", cfg, "--out", str(out)]) == 0
        rows = (out / "stoptime.csv").read_text().splitlines()[1:]
        on = [r for r in rows if ",on," in r]
        off = [r for r in rows if ",off," in r]
        assert len(on) == len(off) == 1
        assert on[0].split(",")[2] == off[0].split(",")[2]
        assert on[0].endswith(",1")  # the run reached the criterion

    def test_empty_stop_list_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {**SMALL, "stop": []})
        assert main(["stoptime", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


class TestPrivacyCommand:
    def test_default_scenarios_and_artifacts(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"samples": 40})
        out = tmp_path / "out"
        code = main(["privacy", "--config", cfg, "--out", str(out)])
        assert code == 0
        for name in ("privacy_scenario_b.txt", "privacy_distances.csv",
                     "privacy_hexdump.txt", "privacy_scenario_c.txt",
                     "privacy_addopt.txt"):
            assert (out / name).is_file(), name
        summary = json.loads(capsys.readouterr().out.splitlines()[-1])
        assert summary["scenario_b_dof"] == 1
        assert summary["substring_hits"] == 0
        assert summary["scenario_c_error"] <= 1e-8
        assert summary["addopt_error"] <= 1e-8
        assert summary["scenario_b_min_distance"] > 0

    def test_single_scenario_selection(self, tmp_path):
        cfg = write_config(tmp_path, {"samples": 10, "scenario": "b"})
        out = tmp_path / "out"
        assert main(["privacy", "--config", cfg, "--out", str(out)]) == 0
        assert (out / "privacy_scenario_b.txt").is_file()
        assert not (out / "privacy_scenario_c.txt").exists()
        assert not (out / "privacy_addopt.txt").exists()

    def test_plain_run_skips_the_hexdump(self, tmp_path):
        cfg = write_config(tmp_path, {"samples": 10, "scenario": "b"})
        out = tmp_path / "out"
        code = main(["privacy", "--config", cfg, "--out", str(out),
                     "--encryption", "off"])
        assert code == 0
        assert not (out / "privacy_hexdump.txt").exists()

    def test_capture_required(self, tmp_path):
        cfg = write_config(tmp_path, {"capture": False})
        assert main(["privacy", "--config", cfg, "--out", str(tmp_path / "o")]) == 1

    def test_distances_csv_schema(self, tmp_path):
        cfg = write_config(tmp_path, {"samples": 25, "scenario": "b"})
        out = tmp_path / "out"
        main(["privacy", "--config", cfg, "--out", str(out)])
        lines = (out / "privacy_distances.csv").read_text().splitlines()
        assert lines[0] == "sample,distance"
        assert len(lines) == 26


class TestTheoryCommand:
    def test_unconnected_schedule_yields_no_certificate(self, tmp_path, capsys):
        # the privacy playback graph stops being strongly connected after
        # its first round, so no window length can certify it
        cfg = write_config(tmp_path, {
            "problem": {"m": 3, "s": 1, "d": 1, "instance_seed": 23},
            "schedule": "fig5a", "certify_horizon": 40,
        })
        out = tmp_path / "out"
        assert main(["theory", "--config", cfg, "--out", str(out)]) == 0
        text = (out / "theory_certificate.txt").read_text()
        assert text.startswith("certificate: none")
        summary = json.loads(capsys.readouterr().out.splitlines()[-1])
        assert summary["certificate"] == "none"

    def test_static_two_cycle_certifies(self, tmp_path, capsys):
        sched_path = tmp_path / "pair.graph"
        save_graph_file(StaticSchedule(DirectedGraph(2, frozenset({(1, 2), (2, 1)}))),
                        sched_path)
        cfg = write_config(tmp_path, {
            "problem": {"m": 2, "s": 2, "d": 2, "instance_seed": 3},
            "schedule": str(sched_path), "c0": 0.49, "certify_horizon": 10,
        })
        out = tmp_path / "out"
        assert main(["theory", "--config", cfg, "--out", str(out)]) == 0
        text = (out / "theory_certificate.txt").read_text()
        assert "check [pass]" in text and "FAIL" not in text
        assert "theta0:" in text
        assert "analysis is conservative" in text  # ceiling sits below 1.1e-3
        summary = json.loads(capsys.readouterr().out.splitlines()[-1])
        assert summary["b_tilde"] == 1
        assert summary["feasible"] is True
