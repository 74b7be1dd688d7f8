"""Command-line client: happy paths, exit codes, byte-stable outputs."""

import json

import pytest

from vnelab.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main

TINY_CONFIG = {
    "substrate_nodes": 10,
    "substrate_links": 16,
    "vnr_count": 20,
    "training_count": 10,
    "vnr_nodes": [2, 3],
    "epochs": 2,
    "master_seed": 11,
}


def write_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY_CONFIG))
    return str(path)


def generate(tmp_path, name="scenario"):
    code = main([
        "generate", "--config", write_config(tmp_path),
        "--name", name, "--out-dir", str(tmp_path),
    ])
    assert code == EXIT_OK
    return str(tmp_path / f"{name}.json")


def test_generate_prints_outcome(tmp_path, capsys):
    scenario = generate(tmp_path)
    out = capsys.readouterr().out
    assert scenario in out
    assert "10 nodes, 16 links" in out
    assert json.loads(open(scenario).read())["format"] == "vnelab-scenario/1"


def test_generate_defaults_without_config_flag(tmp_path, capsys):
    # no --config: the reference experiment settings apply
    code = main(["generate", "--name", "full", "--out-dir", str(tmp_path)])
    assert code == EXIT_OK
    assert "100 nodes, 570 links" in capsys.readouterr().out


def test_train_then_test_flow(tmp_path, capsys):
    scenario = generate(tmp_path)
    code = main([
        "train", "--scenario", scenario, "--name", "pol", "--out-dir", str(tmp_path),
    ])
    assert code == EXIT_OK
    assert "epochs: 2" in capsys.readouterr().out
    checkpoint = str(tmp_path / "pol.json")

    code = main([
        "test", "--scenario", scenario, "--engine", "qs-drl",
        "--checkpoint", checkpoint, "--out-dir", str(tmp_path),
    ])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "arrivals: 10" in out
    assert (tmp_path / "test-qs-drl.csv").exists()


def test_test_each_heuristic_engine(tmp_path):
    scenario = generate(tmp_path)
    for engine in ("baseline", "bl-vne", "cnl-vne"):
        code = main([
            "test", "--scenario", scenario, "--engine", engine,
            "--out-dir", str(tmp_path),
        ])
        assert code == EXIT_OK
        assert (tmp_path / f"test-{engine}.csv").exists()


def test_compare_flow(tmp_path, capsys):
    scenario = generate(tmp_path)
    code = main([
        "compare", "--scenario", scenario, "--seeds", "1,2",
        "--engines", "baseline,bl-vne", "--out-dir", str(tmp_path),
    ])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "baseline seed 1" in out
    assert "bl-vne seed 2" in out
    assert (tmp_path / "compare.csv").exists()


def test_reruns_are_byte_identical(tmp_path):
    scenario = generate(tmp_path)
    outputs = []
    for sub in ("one", "two"):
        out_dir = tmp_path / sub
        assert main([
            "test", "--scenario", scenario, "--engine", "baseline",
            "--name", "run", "--out-dir", str(out_dir),
        ]) == EXIT_OK
        outputs.append((out_dir / "run.csv").read_bytes())
    assert outputs[0] == outputs[1]


def test_bad_config_file_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"substrate_nodes": 1}')
    code = main(["generate", "--config", str(path), "--out-dir", str(tmp_path)])
    assert code == EXIT_CONFIG
    err = capsys.readouterr().err
    assert err.startswith("vnelab: error[config]:")
    assert "substrate_nodes" in err


def test_missing_scenario_exits_3(tmp_path, capsys):
    code = main([
        "test", "--scenario", str(tmp_path / "absent.json"),
        "--engine", "baseline", "--out-dir", str(tmp_path),
    ])
    assert code == EXIT_IO
    assert "error[io]" in capsys.readouterr().err


def test_unknown_engine_is_rejected_by_parser(tmp_path):
    scenario = generate(tmp_path)
    with pytest.raises(SystemExit) as exc:
        main(["test", "--scenario", scenario, "--engine", "mystery"])
    assert exc.value.code == 2


def test_compare_unknown_engine_exits_2(tmp_path, capsys):
    scenario = generate(tmp_path)
    code = main([
        "compare", "--scenario", scenario, "--seeds", "1",
        "--engines", "baseline,mystery", "--out-dir", str(tmp_path),
    ])
    assert code == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "mystery" in err
    assert "cnl-vne" in err  # the valid names are listed


def test_compare_bad_seed_list_exits_2(tmp_path, capsys):
    scenario = generate(tmp_path)
    code = main([
        "compare", "--scenario", scenario, "--seeds", "1,x",
        "--out-dir", str(tmp_path),
    ])
    assert code == EXIT_CONFIG
    assert "seeds" in capsys.readouterr().err


def test_drl_without_checkpoint_exits_2(tmp_path, capsys):
    scenario = generate(tmp_path)
    code = main([
        "test", "--scenario", scenario, "--engine", "qs-drl",
        "--out-dir", str(tmp_path),
    ])
    assert code == EXIT_CONFIG
    assert "checkpoint" in capsys.readouterr().err
