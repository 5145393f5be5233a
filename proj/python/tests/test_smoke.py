import json
import math

import pytest

import tccdse


def test_kv_arithmetic():
    assert tccdse.kv_bytes_per_token(32, 8, 128, 2) == 131072
    assert tccdse.compaction_factor(16, 8, 2048, 1024) == 4.0
    assert tccdse.page_count(10, 4) == 3


def test_workload_and_evaluation():
    assert "llama8b-toy" in tccdse.presets()
    graph = json.loads(tccdse.gen_workload("llama8b-toy"))
    assert graph["nodes"]
    nodes = tccdse.process_nodes()
    assert nodes[0] == 3 and nodes[-1] == 28
    ppa = tccdse.evaluate_initial(json.dumps(graph), 7)
    assert ppa["placed"]
    assert ppa["binding"] == "Compute"
    assert ppa["tok_s"] <= min(ppa["compute_ceiling"], ppa["memory_ceiling"], ppa["noc_ceiling"])


def test_errors_map_to_value_error():
    with pytest.raises(ValueError):
        tccdse.gen_workload("no-such-model")
    with pytest.raises(ValueError):
        tccdse.evaluate_initial(tccdse.gen_workload(), 4)


def test_powerlaw_fit():
    x = [1.0, 2.0, 4.0, 8.0]
    k, c, r2 = tccdse.powerlaw_fit(x, [3.0 * v**-0.5 for v in x])
    assert math.isclose(k, -0.5, abs_tol=1e-12)
    assert math.isclose(c, 3.0, rel_tol=1e-12)
    assert math.isclose(r2, 1.0, abs_tol=1e-12)


def test_run_node_is_deterministic_and_monotone():
    g = tccdse.gen_workload()
    a = tccdse.run_node(g, 28, budget=30, seed=2, strategy="random")
    b = tccdse.run_node(g, 28, budget=30, seed=2, strategy="random")
    assert a["training_log"] == b["training_log"]
    assert a["evaluations"] == 30
    best = a["best_so_far"]
    assert all(x >= y for x, y in zip(best, best[1:]))
