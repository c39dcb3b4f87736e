import json
import time

import numpy as np
import pytest

from reducechop.harness import (
    BoundConfig,
    ConfigError,
    ExperimentConfig,
    _one_sided,
    instance_seeds,
    run_experiment,
    tail_state,
    verify_bounds,
)
from reducechop.sim import ghz_circuit, run_circuit


def test_protocol_defaults():
    cfg = ExperimentConfig(n=8, eps=0.08)
    assert cfg.shots == 20000 and cfg.threshold == 102 and cfg.cut == 5
    assert ExperimentConfig(n=8, eps=0.08, M=5000, CB_M=50).shots == 5000


def test_config_json_roundtrip_and_hash():
    cfg = ExperimentConfig(n=6, eps=0.05, instances=3)
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg and back.hash() == cfg.hash()
    assert ExperimentConfig(n=6, eps=0.03).hash() != cfg.hash()


@pytest.mark.parametrize(
    "text, match",
    [
        ('{"n": 6, "epsilon": 0.1}', "unknown config keys: epsilon"),
        ('{"L_U": 4}', "missing required key 'n'"),
        ('{"n": 6,\n "eps": }', "line 2"),
        ('{"n": 6, "eps": 1.5}', "eps"),
        ('{"n": 0}', "n must"),
        ('{"n": 6, "schedule": "fast"}', "schedule"),
        ('{"n": 6, "schema_version": 9}', "schema_version"),
        ('{"n": 40}', "qubit cap"),
    ],
)
def test_config_rejections(text, match):
    with pytest.raises(ConfigError, match=match):
        ExperimentConfig.from_json(text)


def test_qubit_cap_env(monkeypatch):
    monkeypatch.setenv("REDUCECHOP_MAX_QUBITS", "20")
    assert ExperimentConfig(n=16).n == 16


def test_smoke_run(tmp_path):
    cfg = ExperimentConfig(n=2, L_U=1, instances=1, M=2000)
    start = time.perf_counter()
    rec = run_experiment(cfg, tmp_path)
    assert time.perf_counter() - start < 1.0
    assert len(rec.instances) == 1 and rec.instances[0].trajectory
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config_hash"] == cfg.hash() and len(summary["instances"]) == 1
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
    assert header == "instance_id,phase,t,generation,K,p,loss,estimable"


def test_gate_failure_message():
    with pytest.raises(ConfigError, match="minimum M is"):
        run_experiment(ExperimentConfig(n=2, L_U=1, instances=1))


def test_reruns_are_byte_identical(tmp_path):
    cfg = ExperimentConfig(n=4, L_U=4, instances=3, eps=0.08, seed=11)
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b", workers=2)
    for name in ("trajectory.csv", "histogram.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_instance_seeds_are_stable_and_distinct():
    a = instance_seeds(0, 5)
    assert a == instance_seeds(0, 5) and len(set(a)) == 5
    assert instance_seeds(0, 3) == a[:3]


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        run_experiment(ExperimentConfig(n=2, L_U=1, instances=1, M=2000), blocker / "sub")


def test_tail_state():
    p = tail_state(6, 8, 0.05, 0.01)
    assert p.sum() == pytest.approx(1.0)
    assert 1 - p[:8].sum() == pytest.approx(0.06)


def test_verify_tail_bound_examples():
    ghz = run_circuit(ghz_circuit(6)).probabilities()
    rep = verify_bounds("lemma2", 1000, BoundConfig(probs=ghz, K=1))
    assert rep.passed and rep.violations == 0
    basis = np.zeros(64)
    basis[0] = 1.0
    rep = verify_bounds("lemma2", 100, BoundConfig(probs=basis, K=1))
    assert rep.rate == 0.0
    with pytest.raises(ValueError):
        verify_bounds("lemma2", 99)
    with pytest.raises(ValueError):
        verify_bounds("lemma9", 100)


def test_one_sided_check_has_teeth():
    assert _one_sided(0, 100, 0.01)[0]
    assert _one_sided(2, 100, 0.01)[0]
    assert not _one_sided(30, 100, 0.01)[0]
