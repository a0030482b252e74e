import json
import os
import subprocess
import sys

import numpy as np
import pytest

from xcluster import io
from xcluster.builders import build_lp
from xcluster.cli import RunConfig, aggregate, main, run_campaign, run_one, worker_count
from xcluster.core import InputError
from xcluster.instances import Instance, gen_adversarial, gen_gaussian_mixture, gen_lower_bound
from xcluster.samplers import rng_stream


def test_instance_round_trip(tmp_path):
    inst = gen_gaussian_mixture(3, 2, 5, 0.1, rng_stream(1), seed=1)
    io.write_instance(inst, tmp_path / "a.json")
    back = io.read_instance(tmp_path / "a.json")
    assert np.array_equal(back.points, inst.points) and np.array_equal(back.centers, inst.centers)
    assert np.array_equal(back.labels, inst.labels) and back.meta["seed"] == 1


def test_instance_csv_round_trip(tmp_path):
    inst = gen_lower_bound(3)
    io.write_instance_csv(inst, tmp_path / "x.csv", tmp_path / "c.csv")
    back = io.read_instance(tmp_path / "x.csv", tmp_path / "c.csv")
    assert np.array_equal(back.points, inst.points) and np.array_equal(back.centers, inst.centers)


def test_tree_round_trip_bit_exact(tmp_path):
    C = rng_stream(3).normal(size=(30, 4))
    tree, _ = build_lp(C, 2.0, rng_stream(4))
    io.write_tree(tree, tmp_path / "t.json")
    back = io.read_tree(tmp_path / "t.json")
    assert [(n.dim, n.theta, n.center) for n in tree.nodes()] == [(n.dim, n.theta, n.center) for n in back.nodes()]


def test_deep_tree_round_trip(tmp_path):
    C = np.arange(3000.0)[:, None]
    from xcluster.core import Node, ThresholdTree
    root = node = Node()
    for j in range(2999):  # a caterpillar of depth 2999
        node.dim, node.theta = 0, j + 0.5
        node.left, node.right = Node(center=j, cluster=j), Node()
        node = node.right
    node.center = node.cluster = 2999
    tree = ThresholdTree(root, 1)
    io.write_tree(tree, tmp_path / "deep.json")
    assert io.read_tree(tmp_path / "deep.json").k == 3000


def test_malformed_inputs(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(InputError):
        io.read_instance(tmp_path / "bad.json")
    (tmp_path / "t.json").write_text(json.dumps({"format": "other"}))
    with pytest.raises(InputError):
        io.read_tree(tmp_path / "t.json")


def test_cli_gen_examples(tmp_path, capsys):
    assert main(["gen", "lower-bound", "--m", "3", "-o", str(tmp_path / "lb.json")]) == 0
    out = capsys.readouterr().out
    assert "n=36" in out and "OPT=36" in out
    assert main(["gen", "adversarial", "--m", "3", "-o", str(tmp_path / "adv.json")]) == 0
    assert "OPT=39" in capsys.readouterr().out
    for name in ("g1", "g2"):
        assert main(["gen", "gaussian", "--k", "5", "--d", "3", "--n", "50", "--sigma", "0.1",
                     "--seed", "7", "-o", str(tmp_path / f"{name}.json")]) == 0
    assert (tmp_path / "g1.json").read_bytes() == (tmp_path / "g2.json").read_bytes()


def test_cli_gen_errors(tmp_path, capsys):
    assert main(["gen", "lower-bound", "--m", "4", "-o", str(tmp_path / "x.json")]) == 2
    assert main(["gen", "gaussian", "--k", "2", "-o", str(tmp_path / "x.json")]) == 2
    assert "seed" in capsys.readouterr().err


def test_cli_build_determinism_and_eval(tmp_path, capsys):
    inst = tmp_path / "lb.json"
    main(["gen", "lower-bound", "--m", "5", "-o", str(inst)])
    for name in ("t1", "t2"):
        assert main(["build", "--instance", str(inst), "--algo", "lp", "--p", "2", "--seed", "1",
                     "-o", str(tmp_path / f"{name}.json")]) == 0
    assert (tmp_path / "t1.json").read_bytes() == (tmp_path / "t2.json").read_bytes()
    capsys.readouterr()
    assert main(["eval", "--instance", str(inst), "--tree", str(tmp_path / "t1.json"), "--p", "2"]) == 0
    assert "cost_unconstrained=200.0" in capsys.readouterr().out


def test_cli_single_center_tree(tmp_path):
    io.write_instance(Instance(np.zeros((3, 2)), np.zeros((1, 2))), tmp_path / "one.json")
    assert main(["build", "--instance", str(tmp_path / "one.json"), "--algo", "uniform", "--seed", "0",
                 "-o", str(tmp_path / "t.json")]) == 0
    root = json.loads((tmp_path / "t.json").read_text())["root"]
    assert root == {"cluster": 0, "center_index": 0}


def test_cli_missing_file(tmp_path):
    assert main(["build", "--instance", str(tmp_path / "nope.json"), "--algo", "uniform", "--seed", "0"]) == 2


def test_cli_oracle(tmp_path, capsys):
    io.write_instance(Instance(np.array([[0.0], [1.0], [9.0], [10.0]]), np.array([[0.5], [9.5]])),
                      tmp_path / "tiny.json")
    assert main(["oracle", "--instance", str(tmp_path / "tiny.json")]) == 0
    assert "optimal_cost=2.0" in capsys.readouterr().out
    assert main(["oracle", "--instance", str(tmp_path / "nope.json")]) == 2


def test_bench_single_run(tmp_path):
    inst = tmp_path / "lb.json"
    main(["gen", "lower-bound", "--m", "3", "-o", str(inst)])
    assert main(["bench", "--instances", str(inst), "--algo", "uniform", "--seed", "3",
                 "--workers", "1", "-o", str(tmp_path / "r.csv")]) == 0
    rows = io.read_report(tmp_path / "r.csv")
    assert len(rows) == 2 and rows[1]["status"] == "aggregate"
    assert rows[0]["accepted_cuts"] == "2" and list(rows[0]) == io.REPORT_COLUMNS + io.AGGREGATE_COLUMNS


def test_bench_order_independent_of_workers(tmp_path):
    inst = tmp_path / "lb.json"
    main(["gen", "lower-bound", "--m", "3", "-o", str(inst)])
    args = ["bench", "--instances", str(inst), "--algo", "uniform", "fast-lp", "--p", "2", "--seed", "5",
            "--reps", "4"]
    assert main(args + ["--workers", "1", "-o", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--workers", "2", "-o", str(tmp_path / "b.csv")]) == 0
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time"} for r in rows]
    assert strip(io.read_report(tmp_path / "a.csv")) == strip(io.read_report(tmp_path / "b.csv"))


def test_bench_records_failures_and_continues(tmp_path):
    good = tmp_path / "lb.json"
    main(["gen", "lower-bound", "--m", "3", "-o", str(good)])
    io.write_instance(Instance(np.zeros((2, 1)), None), tmp_path / "nocenters.json")
    rc = main(["bench", "--instances", str(good), str(tmp_path / "nocenters.json"), "--algo", "uniform",
               "--seed", "1", "--workers", "1", "-o", str(tmp_path / "r.csv")])
    rows = io.read_report(tmp_path / "r.csv")
    assert rc == 1
    assert [r["status"] for r in rows] == ["ok", "error", "aggregate", "aggregate"]


def test_bench_long_format(tmp_path):
    inst = tmp_path / "lb.json"
    main(["gen", "lower-bound", "--m", "3", "-o", str(inst)])
    main(["bench", "--instances", str(inst), "--algo", "lp", "--p", "2", "--seed", "1", "--reps", "3",
          "--workers", "1", "-o", str(tmp_path / "r.csv"), "--long", str(tmp_path / "l.csv")])
    rows = io.read_report(tmp_path / "l.csv")
    assert [r["statistic"] for r in rows] == ["ratio_mean", "ratio_median", "ratio_p95"]


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("XCLUSTER_WORKERS", "3")
    assert worker_count() == 3 and worker_count(5) == 5
    monkeypatch.setenv("XCLUSTER_WORKERS", "many")
    with pytest.raises(InputError):
        worker_count()


def test_run_config_validation():
    with pytest.raises(InputError):
        RunConfig("x", "greedy", 1.0, 4, 0)
    with pytest.raises(InputError):
        RunConfig("x", "lp", 0.5, 4, 0)


def test_console_script_installed(tmp_path):
    env = dict(os.environ, XCLUSTER_WORKERS="1")
    out = subprocess.run([sys.executable, "-m", "xcluster.cli", "gen", "adversarial", "--m", "3",
                          "-o", str(tmp_path / "a.json")], capture_output=True, text=True, env=env)
    assert out.returncode == 0 and "OPT=39" in out.stdout


@pytest.mark.xfail(strict=True, reason="imm/OPT at m=5 is about 1.46 while the median uniform ratio is about "
                                         "1.69; the separation only appears at larger k")
def test_imm_beats_uniform_median_on_adversarial_m5():
    inst = gen_adversarial(5)
    imm = run_one(RunConfig("adv5", "imm", 1.0, 4, 0), inst)["ratio_to_reference"]
    uni = [run_one(RunConfig("adv5", "uniform", 1.0, 4, s), inst)["ratio_to_reference"] for s in range(200)]
    assert imm > np.median(uni)
