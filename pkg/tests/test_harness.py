import json

import pytest
from hypothesis import given, settings, strategies as st
from pydantic import ValidationError

from scatterlab.cli import main
from scatterlab.harness import (
    ExperimentConfig,
    TraceLedger,
    TraceRecord,
    emit_plot_data,
    load_config,
    read_ledger,
    replay,
    run_experiment,
)
from scatterlab.harness.io import read_csv
from scatterlab.harness.trace import FIELDS, PHASES, ROLES, TraceError, validate_record


SMALL = {
    "tm": {"bench": {"modes": 16, "channels": 64}, "tm": {"scaling_modes": [4, 16], "scaling_trials": 2}},
    "coherence": {"bench": {"modes": 8, "channels": 64}, "coherence": {"comparable_pairs": 10, "samples": 200}},
    "bilinear": {"bench": {"modes": 8, "channels": 32}, "bilinear": {"shots": 2}},
}


def small_config(study, out_dir, seed=3, **extra):
    return ExperimentConfig.model_validate({"study": study, "seed": seed, "out_dir": str(out_dir), **SMALL[study], **extra})


@pytest.fixture(scope="module", params=["tm", "coherence", "bilinear"])
def finished_run(request, tmp_path_factory):
    out = tmp_path_factory.mktemp(request.param)
    return request.param, run_experiment(small_config(request.param, out / "run"))


# configuration


def test_config_defaults():
    cfg = ExperimentConfig(study="tm")
    assert cfg.bench.modes == 16 and cfg.bench.channels == 256
    assert cfg.bench.seed == cfg.seed == 0
    assert cfg.tm.scaling_modes == [16, 64, 256]


@pytest.mark.parametrize(
    "data",
    [
        {"study": "tm", "colour": 1},
        {"study": "tm", "bench": {"mdoes": 16}},
        {"study": "optics"},
        {"study": "tm", "seed": -1},
        {"study": "tm", "seed": 1, "bench": {"seed": 2}},
        {"study": "tm", "tm": {"target": 999}},
        {"study": "tm", "tm": {"geometries": ["hexagonal"]}},
        {"study": "coherence", "bench": {"modes": 32}},
        {"study": "bilinear", "bilinear": {"shots": 1}},
    ],
)
def test_config_rejects(data):
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(data)


def test_config_files(tmp_path):
    (tmp_path / "c.yaml").write_text("study: bilinear\nseed: 4\nbilinear:\n  task: semantic\n")
    cfg = load_config(tmp_path / "c.yaml", seed=5)
    assert cfg.seed == 5 and cfg.bilinear.task == "semantic"
    (tmp_path / "c.json").write_text(json.dumps({"study": "tm", "bench": {"camera": {"photons": 1000}}}))
    assert load_config(tmp_path / "c.json").bench.camera.photons == 1000


# trace ledger


def record(step, **kw):
    base = dict(step_id=step, actor_role="experimentalist", phase="execute", attempted="x", found="y")
    base.update(kw)
    return TraceRecord(**base)


def test_ledger_round_trip(tmp_path):
    (tmp_path / "a.csv").write_text("1\n")
    ledger = TraceLedger(tmp_path / "trace.jsonl")
    ledger.record("lead-investigator", "explore", "plan", "ok")
    ledger.record("experimentalist", "execute", "measure", "done", evidence=["a.csv"])
    records = read_ledger(tmp_path / "trace.jsonl")
    assert [r.step_id for r in records] == [1, 2]
    assert records[1].evidence == ("a.csv",)
    assert TraceLedger(tmp_path / "trace.jsonl").last_step == 2


@pytest.mark.parametrize(
    "bad",
    [
        record(0),
        record(1, actor_role="intern"),
        record(1, phase="celebrate"),
        record(1, attempted=""),
        record(1, evidence=("missing.csv",)),
        record(1, timestamp="yesterday"),
    ],
)
def test_ledger_rejects(tmp_path, bad):
    with pytest.raises(TraceError):
        TraceLedger(tmp_path / "t.jsonl").append(bad)
    assert not (tmp_path / "t.jsonl").exists()


def test_ledger_step_must_increase(tmp_path):
    ledger = TraceLedger(tmp_path / "t.jsonl")
    ledger.append(record(3))
    for step in (1, 3):
        with pytest.raises(TraceError):
            ledger.append(record(step))
    ledger.append(record(7))


def test_corrupt_ledger_rejected(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text(record(2).to_json() + "\n" + record(1).to_json() + "\n")
    with pytest.raises(TraceError):
        read_ledger(path)
    path.write_text("{not json\n")
    with pytest.raises(TraceError):
        read_ledger(path)


json_values = st.one_of(st.none(), st.booleans(), st.integers(-5, 5), st.text(max_size=8), st.lists(st.text(max_size=4), max_size=2))


@settings(max_examples=200, deadline=None)
@given(
    step=st.one_of(st.integers(-3, 3), st.text(max_size=3), st.none()),
    role=st.one_of(st.sampled_from(ROLES), st.text(max_size=10)),
    phase=st.one_of(st.sampled_from(PHASES), st.text(max_size=10)),
    drop=st.sampled_from((None,) + FIELDS),
    extra=st.dictionaries(st.text(min_size=1, max_size=6), json_values, max_size=2),
)
def test_fuzzed_records(step, role, phase, drop, extra):
    data = {
        "step_id": step,
        "actor_role": role,
        "phase": phase,
        "attempted": "a",
        "found": "f",
        "evidence": [],
        "limitations": "",
        "next_handoff": "",
        "timestamp": "2026-01-01T00:00:00+00:00",
    }
    data.update(extra)
    if drop:
        data.pop(drop, None)
    valid = (
        drop is None
        and set(data) == set(FIELDS)
        and type(data["step_id"]) is int
        and data["step_id"] >= 1
        and data["actor_role"] in ROLES
        and data["phase"] in PHASES
        and isinstance(data["attempted"], str)
        and data["attempted"].strip() != ""
        and isinstance(data["evidence"], list)
        and all(isinstance(x, str) and x for x in data["evidence"])
        and all(isinstance(data[k], str) for k in ("found", "limitations", "next_handoff", "timestamp"))
    )
    try:
        rec = TraceRecord.from_mapping(data)
        validate_record(rec, 0, None)
        accepted = True
    except (TraceError, TypeError):
        accepted = False
    if valid:
        # evidence paths would still need to exist
        assert accepted or data["evidence"]
    else:
        assert not accepted


# runs


def test_run_ledger_and_replay(finished_run):
    study, run_dir = finished_run
    records = read_ledger(run_dir / "trace.jsonl")
    assert {r.actor_role for r in records} <= set(ROLES)
    assert {r.phase for r in records} == set(PHASES)
    inventory = replay(run_dir)
    assert inventory["steps"] == len(records)
    assert "config.json" in inventory["artifacts"]
    for path in inventory["artifacts"]:
        assert (run_dir / path).exists()


EXPECTED = {
    "tm": ["observed_tm.csv", "reference_blank.csv", "focus_map.csv", "enhancement_vs_modes.csv", "geometry_screen.csv", "metrics.json"],
    "coherence": ["operators.csv", "spectra.csv", "interval_table.csv", "sampling.csv", "verdicts.json"],
    "bilinear": ["accuracy_matrix.csv", "metrics.json", "complex_b_pairs.csv", "frames.csv"],
}


def test_run_artifacts(finished_run):
    study, run_dir = finished_run
    for name in EXPECTED[study] + ["config.json", "trace.jsonl", "plots/manifest.json"]:
        assert (run_dir / name).exists(), name
    assert "out_dir" not in json.loads((run_dir / "config.json").read_text())


PLOT_COLUMNS = {
    "tm": {"focus_map.csv": ["row", "col", "signal"], "enhancement_vs_modes.csv": ["modes", "mean_enhancement", "max_enhancement", "oracle_enhancement"], "geometry_screen.csv": ["geometry", "enhancement", "best"]},
    "coherence": {"intervals.csv": ["pair", "operator", "spectrum", "lo", "hi", "verdict"]},
    "bilinear": {"modulation.csv": ["channel", "phase", "intensity"], "complex_plane.csv": ["a", "b", "channel", "re", "im"]},
}


def test_plot_tables(finished_run):
    study, run_dir = finished_run
    manifest = json.loads((run_dir / "plots" / "manifest.json").read_text())
    assert set(manifest.values()) == {"ok"}
    for name, columns in PLOT_COLUMNS[study].items():
        rows = read_csv(run_dir / "plots" / name)
        assert rows and list(rows[0]) == columns
    if study == "bilinear":
        rows = read_csv(run_dir / "plots" / "accuracy_matrix.csv")
        assert {r["representation"] for r in rows} == {"complex_b", "concatenation"}


def test_plot_missing_artifact(tmp_path):
    run_dir = run_experiment(small_config("bilinear", tmp_path / "r", bilinear={"shots": 2, "save_frames": False}))
    status = emit_plot_data(run_dir)
    assert status["modulation.csv"] == "missing: frames.csv"
    assert status["complex_plane.csv"] == "ok"


def _artifacts(run_dir):
    return {
        p.relative_to(run_dir).as_posix(): p.read_bytes()
        for p in sorted(run_dir.rglob("*"))
        if p.is_file() and p.suffix in (".csv", ".json")
    }


@pytest.mark.parametrize("study", ["tm", "coherence", "bilinear"])
def test_run_twice_identical(tmp_path, study):
    first = _artifacts(run_experiment(small_config(study, tmp_path / "a")))
    second = _artifacts(run_experiment(small_config(study, tmp_path / "b")))
    assert first.keys() == second.keys() and first == second
    third = _artifacts(run_experiment(small_config(study, tmp_path / "c", seed=4)))
    assert third != first


def test_out_dir_created(tmp_path):
    target = tmp_path / "deep" / "nested" / "run"
    assert run_experiment(small_config("bilinear", target)) == target
    assert (target / "metrics.json").exists()


def test_default_out_root(tmp_path, monkeypatch):
    monkeypatch.setenv("SCATTERLAB_OUT_ROOT", str(tmp_path))
    cfg = ExperimentConfig.model_validate({"study": "bilinear", "seed": 2, **SMALL["bilinear"]})
    assert run_experiment(cfg) == tmp_path / "bilinear-seed2"


# command line


def test_cli_runs_and_replays(tmp_path, capsys):
    out = tmp_path / "cli"
    assert main(["bilinear", "--seed", "1", "--modes", "8", "--channels", "32", "--shots", "2", "--out-dir", str(out)]) == 0
    assert capsys.readouterr().out.strip() == str(out)
    assert json.loads((out / "config.json").read_text())["seed"] == 1
    assert main(["replay", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["steps"] >= 4


def test_cli_global_flags_before_subcommand(tmp_path):
    out = tmp_path / "g"
    args = ["--seed", "2", "--noiseless", "--out-dir", str(out), "coherence", "--ports", "4", "--channels", "16"]
    assert main(args + ["--comparable-pairs", "3", "--samples", "20"]) == 0
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["seed"] == 2 and cfg["bench"]["modes"] == 4 and cfg["bench"]["camera"]["photons"] is None


def test_cli_config_file(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("study: tm\nbench:\n  modes: 4\n  channels: 16\ntm:\n  scaling_modes: [4]\n  scaling_trials: 1\n")
    assert main(["tm", "--config", str(path), "--out-dir", str(tmp_path / "t"), "--geometry", "uniform:0.5"]) == 0
    assert json.loads((tmp_path / "t" / "config.json").read_text())["tm"]["geometries"] == ["uniform:0.5"]


def test_cli_errors(tmp_path, capsys):
    assert main(["tm", "--target", "10000", "--out-dir", str(tmp_path / "x")]) == 2
    assert "invalid configuration" in capsys.readouterr().err
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"study": "bilinear"}))
    assert main(["tm", "--config", str(path)]) == 2
    assert main(["replay", str(tmp_path / "nowhere")]) == 1
    with pytest.raises(SystemExit):
        main(["optics"])
