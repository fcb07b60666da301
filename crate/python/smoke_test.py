"""Smoke test for the pystudyforge extension module.

Build and run:
    cargo build --release -p studyforge-py --features extension-module
    cp target/release/libpystudyforge.so python/pystudyforge.so
    python3 python/smoke_test.py
"""

import json
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pystudyforge as sf  # noqa: E402


def ask_tell():
    study = sf.Study({"x": {"type": "uniform", "low": 0.0, "high": 1.0}}, "minimize", 1)
    for _ in range(40):
        tid, params = study.ask("tpe")
        assert 0.0 <= params["x"] <= 1.0
        study.tell(tid, sf.benchmark("quadratic-1d", params))
    best = study.best_trial()
    assert best["value"] < 1e-2, best
    assert len(study) == 40
    print("ask/tell ok:", best)


def pruning():
    study = sf.Study({"x": {"type": "uniform", "low": 0.0, "high": 1.0}}, "maximize", 0)
    for v in (0.6, 0.7, 0.8):
        tid = study.enqueue({"x": v})
        study.report(tid, 3, v)
        study.tell(tid, v)
    tid = study.enqueue({"x": 0.1})
    study.report(tid, 3, 0.65)
    assert study.should_prune(tid, 3)
    study.tell(tid, state="pruned")
    assert study.trials()[-1]["state"] == "pruned"
    try:
        study.tell(tid, 1.0)
    except sf.StudyforgeError:
        pass
    else:
        raise AssertionError("telling a finished trial must fail")
    print("pruning ok")


def config_run():
    with tempfile.TemporaryDirectory() as d:
        cfg = os.path.join(d, "quad.yaml")
        with open(cfg, "w") as f:
            f.write(f"objective: quadratic-1d\nseed: 1\noutput_dir: {d}/out\npolicy: {{n_trials: 20}}\n")
        best = sf.run(cfg, ["policy.n_trials=12"])
        with open(os.path.join(d, "out", "best.json")) as f:
            assert json.load(f) == best
        study = sf.Study.from_journal(os.path.join(d, "out", "journal.jsonl"))
        assert len(study) == 12
        assert study.best_trial() == best
        print("config run ok:", study)


if __name__ == "__main__":
    ask_tell()
    pruning()
    config_run()
    print("all smoke tests passed")
