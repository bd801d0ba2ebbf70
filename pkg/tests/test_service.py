import numpy as np
import pytest
from fastapi.testclient import TestClient
from scipy.special import expit

from tmle2.service.app import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def make_payload(n=260, seed=5):
    r = np.random.default_rng(seed)
    w = r.uniform(-1, 1, n)
    a = (r.random(n) < expit(2 * w - w**2)).astype(int)
    y = (r.random(n) < expit(w + a / 2)).astype(int)
    return {"w": w.tolist(), "a": a.tolist(), "y": y.tolist()}


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"


def test_density_simulate_small(client):
    req = {"n": 150, "reps": 3, "mixture_components": 2, "bias_mass": 0.04,
           "estimators": ["emp_1st", "emp_2nd"], "seed": 3}
    resp = client.post("/density/simulate", json=req)
    assert resp.status_code == 200
    body = resp.json()
    assert {r["estimator"] for r in body["rows"]} == {"emp_1st", "emp_2nd"}
    assert body["csv"].startswith("estimator,n,bias,sd,mse,reps,failures")
    assert all(r["failures"] == 0 for r in body["rows"])


def test_density_simulate_rejects_unknown_estimator(client):
    resp = client.post("/density/simulate", json={"reps": 1, "estimators": ["nope"]})
    assert resp.status_code == 422


def test_density_track_small(client):
    resp = client.post("/density/track", json={"n": 200, "seed": 2, "bias_mass": 0.05})
    assert resp.status_code == 200
    body = resp.json()
    assert body["records"][0]["step"] == 0
    assert body["csv"].startswith("step,rbar1,abs_d2_score")


def test_tsm_estimate(client):
    payload = make_payload()
    payload.update({"seed": 1, "folds": 5})
    resp = client.post("/tsm/estimate", json=payload)
    assert resp.status_code == 200
    body = resp.json()
    assert body["n"] == 260
    ci = body["ci_second"]
    assert ci["lower"] <= body["psi_second"] <= ci["upper"]
    assert body["converged"]


def test_tsm_estimate_validation(client):
    bad = make_payload(n=60)
    bad["a"] = [2] * 60
    resp = client.post("/tsm/estimate", json=bad)
    assert resp.status_code == 422

    short = make_payload(n=60)
    short["y"] = short["y"][:-1]
    resp = client.post("/tsm/estimate", json=short)
    assert resp.status_code == 422


def test_tsm_simulate_validation(client):
    resp = client.post("/tsm/simulate", json={"variant": 7})
    assert resp.status_code == 422
