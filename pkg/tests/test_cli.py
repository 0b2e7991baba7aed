import json

import pytest

import convshrink as cs
from convshrink.cli import main

from instances import catalog4, three_conv_backbone


@pytest.fixture()
def backbone_path(data_dir):
    return str(data_dir / "backbone_cifar5.json")


@pytest.fixture()
def device_path(data_dir):
    return str(data_dir / "device_edge_board.json")


def test_describe_prints_totals(backbone_path, capsys):
    assert main(["describe", backbone_path]) == 0
    out = capsys.readouterr().out
    assert "cifar5" in out
    assert "totals: macs=52814848 params=560992 activations=106852" in out


def test_describe_broken_continuity_exits_2(tmp_path, capsys):
    net = three_conv_backbone()
    doc = cs.arch.network_to_dict(net)
    doc["layers"][1]["in_channels"] = 999
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(doc))
    assert main(["describe", str(path)]) == 2
    err = capsys.readouterr().err
    assert "boundary 0/1" in err


def test_describe_missing_file_exits_4(tmp_path):
    assert main(["describe", str(tmp_path / "nope.json")]) == 4


def _compress_args(backbone_path, device_path, out, extra=()):
    return [
        "compress", "--backbone", backbone_path, "--device", device_path,
        "--synthetic-seed", "7", "--seed", "0", "--no-timestamp",
        "--t-budget", "0.02", "--s-budget", "1800000", "--out", str(out),
        *extra,
    ]


def test_compress_writes_deterministic_result(tmp_path, backbone_path, device_path, capsys):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(_compress_args(backbone_path, device_path, out1)) == 0
    assert main(_compress_args(backbone_path, device_path, out2)) == 0
    assert out1.read_bytes() == out2.read_bytes()
    doc = json.loads(out1.read_text())
    assert doc["feasible"] is True
    assert doc["wall_time_seconds"] == 0.0
    assert "generated_at" not in doc
    assert doc["report"]["S_p"] * 4 <= 1.8e6
    summary = capsys.readouterr().out
    assert "encoding=" in summary and "feasible=True" in summary


def test_compress_loose_budgets_yield_identity_encoding(tmp_path, backbone_path, device_path):
    out = tmp_path / "loose.json"
    args = [
        "compress", "--backbone", backbone_path, "--device", device_path,
        "--synthetic-seed", "7", "--no-timestamp",
        "--t-budget", "10.0", "--s-budget", "100000000", "--out", str(out),
    ]
    assert main(args) == 0
    assert json.loads(out.read_text())["encoding"] == "0"


def test_compress_infeasible_exits_3_but_writes_result(tmp_path, backbone_path, device_path):
    out = tmp_path / "infeasible.json"
    args = [
        "compress", "--backbone", backbone_path, "--device", device_path,
        "--synthetic-seed", "7", "--no-timestamp",
        "--a-threshold", "0.0001", "--t-budget", "0.000001",
        "--s-budget", "1000", "--out", str(out),
    ]
    assert main(args) == 3
    doc = json.loads(out.read_text())
    assert doc["feasible"] is False
    assert doc["violated"]


def test_compress_requires_profile_or_seed(tmp_path, backbone_path, device_path):
    args = [
        "compress", "--backbone", backbone_path, "--device", device_path,
        "--t-budget", "0.02", "--out", str(tmp_path / "x.json"),
    ]
    assert main(args) == 2


def test_simulate_daytime_trace(tmp_path, backbone_path, device_path, data_dir, capsys):
    out = tmp_path / "events.jsonl"
    args = [
        "simulate", "--backbone", backbone_path, "--device", device_path,
        "--synthetic-seed", "7", "--no-timestamp",
        "--trace", str(data_dir / "trace_daytime.csv"),
        "--trigger", "periodic:3600", "--t-budget", "0.02",
        "--out", str(out),
    ]
    assert main(args) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 4
    events = [json.loads(l) for l in lines]
    assert all(e["feasible"] for e in events)
    assert "4 adaptation events" in capsys.readouterr().out
    # byte-stable rerun
    out2 = tmp_path / "events2.jsonl"
    main(args[:-1] + [str(out2)])
    assert out.read_text() == out2.read_text()


def test_simulate_empty_trace(tmp_path, backbone_path, device_path):
    trace = tmp_path / "empty.csv"
    trace.write_text("t_seconds,battery_fraction,cache_bytes,inference_count\n")
    out = tmp_path / "events.jsonl"
    args = [
        "simulate", "--backbone", backbone_path, "--device", device_path,
        "--synthetic-seed", "7", "--trace", str(trace),
        "--trigger", "periodic:3600", "--t-budget", "0.02", "--out", str(out),
    ]
    assert main(args) == 0
    assert out.read_text() == ""


def test_simulate_rejects_bad_trigger(tmp_path, backbone_path, device_path, data_dir):
    args = [
        "simulate", "--backbone", backbone_path, "--device", device_path,
        "--synthetic-seed", "7", "--trace", str(data_dir / "trace_daytime.csv"),
        "--trigger", "sometimes", "--t-budget", "0.02",
        "--out", str(tmp_path / "x.jsonl"),
    ]
    assert main(args) == 2


def test_compare_emits_three_rows(tmp_path, backbone_path, device_path):
    out = tmp_path / "compare.csv"
    args = [
        "compare", "--backbone", backbone_path, "--device", device_path,
        "--synthetic-seed", "7", "--no-timestamp", "--t-budget", "0.02",
        "--s-budget", "1800000", "--exhaustive-cap", "100",
        "--out", str(out),
    ]
    assert main(args) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ("optimizer,status,A,A_loss,T,CSp_ratio,CSa_ratio,E,"
                       "evaluations,wall_time_seconds")
    rows = {l.split(",")[0]: l for l in lines[1:]}
    assert set(rows) == {"runtime3c", "greedy", "exhaustive"}
    # the 5-layer stock-catalog space (2^5 * 9^5) blows the tiny cap: skipped
    assert rows["exhaustive"].split(",")[1] == "skipped"
    assert rows["runtime3c"].split(",")[1] == "ok"
    rerun = tmp_path / "compare2.csv"
    assert main(args[:-1] + [str(rerun)]) == 0
    assert rerun.read_bytes() == out.read_bytes()


def test_compare_small_instance_counts(tmp_path):
    net = three_conv_backbone()
    cat = catalog4()
    net_path, cat_path = tmp_path / "net.json", tmp_path / "cat.json"
    cs.save_network(net, net_path)
    cat_doc = {"groups": [
        {"id": g.id, "label": g.label, "members": [
            {"kind": m.kind, "hyperparams": {
                k: v for k, v in (
                    ("squeeze_ratio", m.squeeze_ratio), ("expand_split", m.expand_split),
                    ("rank_divisor", m.rank_divisor), ("keep_ratio", m.keep_ratio),
                    ("skip_depth", m.skip_depth)) if v is not None}}
            for m in g.members]}
        for g in cat.non_identity()]}
    cat_path.write_text(json.dumps(cat_doc))
    dev_path = tmp_path / "dev.json"
    dev_path.write_text(json.dumps({
        "name": "t", "mem_bandwidth": 4e9, "compute_throughput": 4e9,
        "bytes_per_param": 4, "bytes_per_activation": 4, "cache_capacity": 2e6,
        "energy_per_mac": 1e-12, "energy_per_byte_moved": 8e-11}))
    out = tmp_path / "cmp.csv"
    base_bytes = cs.count_network(net).params * 4
    args = [
        "compare", "--backbone", str(net_path), "--device", str(dev_path),
        "--catalog", str(cat_path), "--synthetic-seed", "3", "--no-timestamp",
        "--t-budget", "0.05", "--s-budget", str(base_bytes * 0.7),
        "--out", str(out),
    ]
    assert main(args) == 0
    rows = out.read_text().splitlines()[1:]
    cells = {r.split(",")[0]: r.split(",") for r in rows}
    evals = {name: int(c[8]) for name, c in cells.items() if c[1] != "skipped"}
    assert evals["runtime3c"] < evals["exhaustive"]
