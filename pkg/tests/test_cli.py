from __future__ import annotations

import json

import pytest

from conftest import write_jsonl
from vtgkit.cli import main


@pytest.fixture
def data_file(tmp_path):
    return write_jsonl(tmp_path / "data.jsonl", [
        {"video_id": "v1", "duration": 30.0, "query": "a person opens the door",
         "span": [2.0, 8.0], "annotation_id": "a1", "provenance": "original"},
        {"video_id": "v1", "duration": 30.0, "query": "a person pours water",
         "span": [12.0, 18.0], "annotation_id": "a2", "provenance": "original"},
        {"video_id": "v2", "duration": 60.0, "query": "a dog jumps onto the couch",
         "span": [5.0, 15.0], "annotation_id": "a3", "provenance": "original"},
    ])


@pytest.fixture
def pred_file(tmp_path):
    return write_jsonl(tmp_path / "preds.jsonl", [
        {"annotation_id": "a1", "raw_text": "2.0 to 8.0"},
        {"annotation_id": "a2", "raw_text": "from 12.0s to 16.0s"},
        {"annotation_id": "a3", "raw_text": "no clue"},
    ])


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc_info:
        main(["frobnicate"])
    assert exc_info.value.code == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(["--version"])
    assert exc_info.value.code == 0
    assert "vtgkit" in capsys.readouterr().out


def test_stats(data_file, capsys):
    assert main(["stats", "--data", str(data_file), "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["n_videos"] == 2
    assert out["n_annotations"] == 3
    assert out["avg_duration"] == pytest.approx(45.0)


def test_stats_missing_file_exits_1(tmp_path, capsys):
    assert main(["stats", "--data", str(tmp_path / "nope.jsonl")]) == 1
    assert "error:" in capsys.readouterr().err


def test_print_config_no_side_effects(tmp_path, capsys):
    out = tmp_path / "should_not_exist.json"
    code = main(["encode", "--duration", "60", "--out", str(out), "--print-config"])
    assert code == 0
    assert not out.exists()
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["duration"] == 60.0


def test_config_precedence(tmp_path, capsys, monkeypatch):
    cfg_file = tmp_path / "cfg"
    cfg_file.write_text("fps = 8\nduration = 10\n")
    # file value
    main(["encode", "--config", str(cfg_file), "--print-config"])
    assert json.loads(capsys.readouterr().out)["fps"] == 8.0
    # env beats file
    monkeypatch.setenv("VTGKIT_FPS", "4")
    main(["encode", "--config", str(cfg_file), "--print-config"])
    assert json.loads(capsys.readouterr().out)["fps"] == 4.0
    # flag beats env
    main(["encode", "--config", str(cfg_file), "--fps", "2", "--print-config"])
    assert json.loads(capsys.readouterr().out)["fps"] == 2.0


def test_parse_roundtrip(pred_file, tmp_path, capsys):
    out = tmp_path / "parsed.jsonl"
    failures = tmp_path / "failures.jsonl"
    code = main(["parse", "--pred", str(pred_file), "--fps", "2.0",
                 "--out", str(out), "--failures", str(failures)])
    assert code == 0
    parsed = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(parsed) == 2
    assert parsed[0]["span"] == [2.0, 8.0]
    failed = [json.loads(l) for l in failures.read_text().splitlines()]
    assert len(failed) == 1 and failed[0]["annotation_id"] == "a3"


def test_eval_on_fixture(data_file, pred_file, tmp_path, capsys):
    report_path = tmp_path / "report.json"
    code = main(["eval", "--data", str(data_file), "--pred", str(pred_file),
                 "--out", str(report_path), "--json"])
    assert code == 0
    report = json.loads(report_path.read_text())
    metrics = report["per_benchmark"]["other"]
    # hand computation: a1 iou=1, a2 iou=4/6, a3 unparsed scored 0
    assert metrics["miou"] == pytest.approx((1.0 + 4 / 6 + 0.0) / 3 * 100)
    assert metrics["r1_03"] == pytest.approx(200 / 3)
    assert metrics["n_unparsed"] == 1


def test_eval_byte_identical_reruns(data_file, pred_file, tmp_path):
    paths = []
    for name in ("r1.json", "r2.json"):
        p = tmp_path / name
        assert main(["eval", "--data", str(data_file), "--pred", str(pred_file),
                     "--out", str(p)]) == 0
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_lint_cli(tmp_path, capsys):
    data = write_jsonl(tmp_path / "lintme.jsonl", [
        {"video_id": "v1", "duration": 30.0, "query": "the ending credits roll",
         "span": [25.0, 30.0], "annotation_id": "a1", "provenance": "original"},
    ])
    report_path = tmp_path / "lint_report.json"
    code = main(["lint", "--data", str(data), "--report", str(report_path), "--json"])
    assert code == 0
    report = json.loads(report_path.read_text())
    kinds = [f["kind"] for f in report["findings"]]
    assert "info_leakage" in kinds


def test_sample_cli(tmp_path, capsys):
    rows = [{"annotation_id": f"r{i}", "difficulty": (i % 100) / 100 + 0.005}
            for i in range(1000)]
    d_file = write_jsonl(tmp_path / "difficulties.jsonl", rows)
    out = tmp_path / "subset.jsonl"
    hist = tmp_path / "hist.json"
    code = main(["sample", "--difficulties", str(d_file), "--mu", "0.5", "--sigma", "0.1",
                 "--n", "200", "--seed", "17", "--out", str(out), "--hist", str(hist)])
    assert code == 0
    selected = [json.loads(l)["annotation_id"] for l in out.read_text().splitlines()]
    assert len(selected) == 200 and len(set(selected)) == 200
    hist_obj = json.loads(hist.read_text())
    assert abs(hist_obj["mean_difficulty"] - 0.5) < 0.05


def test_sample_cli_deterministic(tmp_path):
    rows = [{"annotation_id": f"r{i}", "difficulty": (i % 100) / 100 + 0.005}
            for i in range(500)]
    d_file = write_jsonl(tmp_path / "d.jsonl", rows)
    outs = []
    for name in ("s1.jsonl", "s2.jsonl"):
        out = tmp_path / name
        assert main(["sample", "--difficulties", str(d_file), "--mu", "0.5",
                     "--sigma", "0.2", "--n", "100", "--seed", "3", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_rollout_sim_and_monitor(data_file, tmp_path, capsys):
    trace = tmp_path / "trace.jsonl"
    groups = tmp_path / "groups.jsonl"
    code = main(["rollout-sim", "--data", str(data_file), "--steps", "80",
                 "--group-size", "4", "--seed", "5", "--improve-until", "30",
                 "--trace", str(trace), "--groups-out", str(groups)])
    assert code == 0
    assert len(trace.read_text().splitlines()) == 80
    code = main(["monitor", "--trace", str(trace), "--window", "10", "--tol", "0.5", "--json"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert "stop_step" in out


def test_monitor_no_plateau(tmp_path, capsys):
    trace = tmp_path / "trace.jsonl"
    with trace.open("w") as f:
        for i in range(1, 301):
            f.write(json.dumps({"step": i, "mean_reward": 0.001 * i, "group_std": 0.1}) + "\n")
    assert main(["monitor", "--trace", str(trace), "--window", "30", "--tol", "0.02"]) == 0
    assert "no plateau" in capsys.readouterr().out


def test_encode_cli(tmp_path, capsys):
    out = tmp_path / "plan.json"
    code = main(["encode", "--duration", "60", "--fps", "2", "--min-tokens", "16",
                 "--total-tokens", "3584", "--scheme", "interleaved", "--format", "raw",
                 "--out", str(out)])
    assert code == 0
    plan = json.loads(out.read_text())
    assert plan["plan"]["per_group_tokens"] == 59
    assert plan["payload"][0] == "0.0s"


def test_encode_infeasible_exits_1(capsys):
    assert main(["encode", "--duration", "10000", "--total-tokens", "100"]) == 1
    assert "infeasible" in capsys.readouterr().err


def test_annotate_cli(tmp_path, capsys):
    videos = write_jsonl(tmp_path / "videos.jsonl", [
        {"video_id": f"v{i}", "duration": 30.0 + i * 20} for i in range(10)
    ])
    out = tmp_path / "candidates.jsonl"
    accepted = tmp_path / "accepted.jsonl"
    code = main(["annotate", "--videos", str(videos), "--backend", "mock", "--n", "5",
                 "--seed", "7", "--out", str(out), "--accepted", str(accepted)])
    assert code == 0
    candidates = [json.loads(l) for l in out.read_text().splitlines()]
    assert candidates
    assert all(c["verification_status"] in ("lint_passed", "lint_failed") for c in candidates)
    for line in accepted.read_text().splitlines():
        assert json.loads(line)["provenance"] == "auto_annotated"


def test_export_cli(tmp_path, data_file, capsys):
    from vtgkit.audit import AuditStore
    from vtgkit.dataset import load_dataset

    store_dir = tmp_path / "store"
    dataset = load_dataset(data_file).dataset
    store = AuditStore(dataset, root=store_dir)
    store.register_worker("alice")
    store.register_worker("bob")
    batch = store.create_batch(["a1", "a2", "a3"])
    while (task := store.assign_next("alice", "review")) is not None:
        store.submit_review(task.task_id, "alice", "no_error")
    while (task := store.assign_next("bob", "validate")) is not None:
        store.submit_validation(task.task_id, "bob", "correct")
    store.batch_qc(batch.batch_id)

    out = tmp_path / "refined.jsonl"
    ledger = tmp_path / "ledger.json"
    code = main(["export", "--data", str(data_file), "--store", str(store_dir),
                 "--dataset", "refined", "--out", str(out), "--ledger", str(ledger)])
    assert code == 0
    refined = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(refined) == 3
    assert all(r["provenance"] == "human_refined" for r in refined)
    assert json.loads(ledger.read_text())["n_exported"] == 3
