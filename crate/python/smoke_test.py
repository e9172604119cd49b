"""Smoke test for the vcell_sim extension module.

Build and install first:  maturin develop -m crates/py/Cargo.toml --release
"""

import json
import math
import os
import tempfile

import vcell_sim


def check_clustering():
    pts = [(0.0, 0.0), (1.0, 0.0), (10.0, 0.0), (11.0, 0.0)]
    merges = vcell_sim.hierarchical_merges(pts)
    assert len(merges) == 3
    assert merges[0][2] == 1.0
    assert vcell_sim.hierarchical_labels(pts, 2) == [0, 0, 1, 1]
    assert vcell_sim.minimax_radius(pts, [0, 1, 2]) == (9.0, 1)
    assert sorted(set(vcell_sim.kmeans_labels(pts, 2, 7))) == [0, 1]
    assert len(vcell_sim.spectral_labels(pts, 2, 5.0, 7)) == 4


def check_matching():
    cols, total = vcell_sim.max_weight_matching([[3.0, 1.0], [2.0, 4.0]])
    assert cols == [0, 1] and total == 7.0


def check_power():
    power, rate, converged = vcell_sim.solve_power([[[1e-9]]], [[1e-13]], [20e3], [200.0])
    expected = 20e3 * math.log2(1 + 1e-9 * 200.0 / 1e-13)
    assert abs(power[0][0][0] - 200.0) < 1e-6
    assert abs(rate - expected) < 1e-6 * expected and converged
    _, gamma, rate2, rounds = vcell_sim.solve_alternating([[[1e-9]]], [[1e-13]], [20e3], [200.0], "msrm")
    assert gamma == [[[True]]] and abs(rate2 - expected) < 1e-6 * expected and rounds >= 1


def check_harness():
    cfg = vcell_sim.ExperimentConfig(json.dumps({
        "system": {"num_bs": 3, "num_users": 6, "num_bands": 2},
        "trials": 2,
        "master_seed": 5,
        "cell_counts": [1, 3],
        "schemes": ["continuous", "msrm"],
    }))
    cfg.validate()
    sc = vcell_sim.scenario(cfg, 0)
    assert len(sc.bs_positions) == 3 and len(sc.user_positions) == 6
    assert len(sc.gain) == 6 and len(sc.gain[0]) == 3 and len(sc.gain[0][0]) == 2
    rows = vcell_sim.run_trial(cfg, 0)
    assert len(rows) == 2 * 2 * 2  # cell counts x affiliations x schemes
    assert all(r["sum_rate_bps"] > 0 for r in rows)
    with tempfile.TemporaryDirectory() as d:
        raw, agg = os.path.join(d, "raw.csv"), os.path.join(d, "agg.csv")
        summary = vcell_sim.run_experiment(cfg, raw, agg)
        assert len(summary) == 8 and all(s["trials"] == 2 for s in summary)
        with open(raw) as f:
            lines = f.read().splitlines()
        assert lines[0] == "trial,clustering,sigma,affiliation,scheme,num_cells,eval_mode,sum_rate_bps,converged"
        assert len(lines) == 1 + 16


if __name__ == "__main__":
    check_clustering()
    check_matching()
    check_power()
    check_harness()
    print("smoke test passed")
