"""End-to-end tests of the command-line interface and its exit codes."""

import csv
import json

import numpy as np
import pytest

from kinstruct import io as kio
from kinstruct.cli import main
from kinstruct.simulate import JointType, observe, random_chain


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestUsageErrors:
    def test_unknown_flag(self, capsys):
        code, _, err = _run(capsys, "montecarlo", "--bogus")
        assert code == 64
        assert "usage" in err

    def test_missing_command(self, capsys):
        assert _run(capsys, )[0] == 64

    def test_conflicting_chain_sources(self, capsys, tmp_path):
        code, _, err = _run(
            capsys,
            "simulate",
            "--chain", str(tmp_path / "chain.json"),
            "--random",
            "--out", str(tmp_path / "data.json"),
        )
        assert code == 64
        assert "not allowed with" in err

    def test_conflicting_figure_flags(self, capsys, tmp_path):
        code, _, _ = _run(
            capsys,
            "montecarlo",
            "--series", "1", "--links", "2", "--obs", "8",
            "--out", str(tmp_path / "report.json"),
            "--figures", str(tmp_path),
            "--no-figures",
        )
        assert code == 64

    def test_bad_type_policy(self, capsys, tmp_path):
        code, _, err = _run(
            capsys,
            "simulate", "--random", "--types", "bendy",
            "--out", str(tmp_path / "data.json"),
        )
        assert code == 64
        assert "bendy" in err


class TestSimulate:
    def test_random_chain_writes_dataset_and_chain(self, capsys, tmp_path):
        out = tmp_path / "data.json"
        code, stdout, _ = _run(
            capsys,
            "simulate", "--random", "--seed", "3", "--links", "4",
            "--obs", "12", "--out", str(out),
        )
        assert code == 0
        assert "4-marker, 12-row dataset" in stdout
        obs = kio.read_dataset(out)
        assert obs.n_markers == 4 and obs.n_obs == 12
        chain = kio.read_chain(tmp_path / "data.chain.json")
        assert chain.n_links == 4

    def test_simulate_from_chain_file(self, capsys, tmp_path):
        chain_path = tmp_path / "chain.json"
        kio.write_chain(random_chain(5, 3), chain_path)
        out = tmp_path / "data.json"
        code, _, _ = _run(
            capsys,
            "simulate", "--chain", str(chain_path),
            "--trajectory", "fully-informative", "--out", str(out),
        )
        assert code == 0
        assert kio.read_dataset(out).n_obs == 4  # two rows per joint

    def test_missing_chain_file(self, capsys, tmp_path):
        code, _, err = _run(
            capsys,
            "simulate", "--chain", str(tmp_path / "absent.json"),
            "--out", str(tmp_path / "data.json"),
        )
        assert code == 1
        assert "error" in err


class TestIdentify:
    def test_round_trip_recovers_random_chain(self, capsys, tmp_path):
        data, result = tmp_path / "data.json", tmp_path / "result.json"
        assert _run(
            capsys,
            "simulate", "--random", "--seed", "11", "--links", "4",
            "--trajectory", "fully-informative", "--out", str(data),
        )[0] == 0
        code, stdout, _ = _run(
            capsys, "identify", "--data", str(data), "--out", str(result)
        )
        assert code == 0
        assert "markers:" in stdout and "joints:" in stdout

        chain = kio.read_chain(tmp_path / "data.chain.json")
        loaded = kio.read_identification_result(result)
        structure = loaded["structure"]
        marker_of_link = [0] * chain.n_links
        for marker, att in enumerate(chain.attachments):
            marker_of_link[att.link_index - 1] = marker
        assert list(structure.marker_sequence) == marker_of_link
        assert list(structure.joint_types) == [j.joint_type for j in chain.joints]
        assert list(structure.joint_signals) == list(chain.joint_signal_permutation)

    def test_frozen_joint_exits_two_with_diagnostics(self, capsys, tmp_path):
        chain = random_chain(21, 4, type_policy="revolute")
        rng = np.random.default_rng(0)
        trajectory = rng.uniform(-1.0, 1.0, size=(10, 3))
        trajectory[:, chain.joint_signal_permutation[1]] = 0.25  # freeze joint 1
        data, result = tmp_path / "data.json", tmp_path / "result.json"
        kio.write_dataset(observe(chain, trajectory), data)
        code, _, err = _run(
            capsys, "identify", "--data", str(data), "--out", str(result)
        )
        assert code == 2
        assert "ambiguous" in err
        loaded = kio.read_identification_result(result)
        assert loaded["structure"] is None
        assert loaded["problems"]

    def test_tolerance_overrides_are_recorded(self, capsys, tmp_path):
        data, result = tmp_path / "data.json", tmp_path / "result.json"
        _run(
            capsys,
            "simulate", "--random", "--seed", "2", "--links", "3",
            "--trajectory", "fully-informative", "--out", str(data),
        )
        code, _, _ = _run(
            capsys,
            "identify", "--data", str(data), "--out", str(result),
            "--tol-res", "1e-5", "--multistart", "4",
        )
        assert code == 0
        tol = kio.read_identification_result(result)["tolerances"]
        assert tol.tol_res == 1e-5 and tol.multistart_count == 4

    def test_missing_dataset_exits_one(self, capsys, tmp_path):
        code, _, _ = _run(
            capsys,
            "identify", "--data", str(tmp_path / "absent.json"),
            "--out", str(tmp_path / "result.json"),
        )
        assert code == 1


class TestMontecarlo:
    def test_single_series_two_links(self, capsys, tmp_path):
        out = tmp_path / "report.json"
        code, stdout, _ = _run(
            capsys,
            "montecarlo", "--series", "1", "--links", "2", "--obs", "10",
            "--seed", "4", "--out", str(out),
        )
        assert code == 0
        report = kio.read_mc_report(out)
        assert report.prismatic.total == 1  # one marker pair, one signal
        assert report.digest() in stdout

    def test_csv_and_figures_land_alongside(self, capsys, tmp_path):
        out, matrices = tmp_path / "report.json", tmp_path / "matrices.csv"
        code, stdout, _ = _run(
            capsys,
            "montecarlo", "--series", "1", "--links", "3", "--obs", "10",
            "--out", str(out), "--csv", str(matrices),
        )
        assert code == 0
        with open(matrices, newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["test", "tp", "fp", "fn", "tn"]
        assert len(rows) == 5
        assert (tmp_path / "confusion_matrices.png").exists()
        assert (tmp_path / "gating_economy.png").exists()
        assert "wrote figure" in stdout

    def test_no_figures_flag(self, capsys, tmp_path):
        code, _, _ = _run(
            capsys,
            "montecarlo", "--series", "1", "--links", "2", "--obs", "8",
            "--out", str(tmp_path / "report.json"),
            "--csv", str(tmp_path / "matrices.csv"),
            "--no-figures",
        )
        assert code == 0
        assert not (tmp_path / "confusion_matrices.png").exists()


class TestGenTrajectory:
    def test_fully_informative_rows(self, capsys, tmp_path):
        out = tmp_path / "traj.json"
        code, stdout, _ = _run(
            capsys, "gen-trajectory", "--links", "4", "--out", str(out)
        )
        assert code == 0
        assert "6-row trajectory" in stdout
        data = kio.read_trajectory(out)
        assert data.mode == "fully-informative"
        assert data.joint_values.shape == (6, 3)
        assert data.pairs == ((0, 1), (2, 3), (4, 5))

    def test_sinusoid_mode(self, capsys, tmp_path):
        out = tmp_path / "traj.json"
        code, _, _ = _run(
            capsys,
            "gen-trajectory", "--mode", "sinusoid", "--links", "3",
            "--obs", "25", "--seed", "8", "--out", str(out),
        )
        assert code == 0
        data = kio.read_trajectory(out)
        assert data.joint_values.shape == (25, 2)
        assert data.pairs is None

    def test_single_link_rejected(self, capsys, tmp_path):
        code, _, err = _run(
            capsys, "gen-trajectory", "--links", "1", "--out", str(tmp_path / "t.json")
        )
        assert code == 64
        assert "links" in err


class TestVersion:
    def test_version_flag(self, capsys):
        code, stdout, _ = _run(capsys, "--version")
        assert code == 0
        assert "kinstruct" in stdout
