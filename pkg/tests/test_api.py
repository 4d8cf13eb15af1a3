import pytest
from fastapi.testclient import TestClient

from flowagg.main import app

SESSION = {"config": {"name": "api", "duration": 20.0, "analyzer": {"mode": "MMOS_only"}, "traffic": {"rate": 10.0}}}


@pytest.fixture
def client(clean_sessions):
    return TestClient(app)


@pytest.fixture
def session(client):
    response = client.post("/simulations/", json=SESSION)
    assert response.status_code == 201
    return response.json()


def test_root_and_health(client):
    root = client.get("/")
    assert root.status_code == 200
    assert "simulations" in root.json()["endpoints"]
    assert "X-Process-Time" in root.headers
    assert client.get("/healthz").json() == {"status": "healthy"}


def test_create_and_advance(client, session):
    assert session == {
        "id": 1, "name": "api", "mode": "MMOS_only", "now": 0.0,
        "duration": 20.0, "finished": False, "suspended": False,
    }

    halfway = client.post("/simulations/1/advance", params={"until": 10}).json()
    assert halfway["now"] == 10.0 and not halfway["finished"]

    done = client.post("/simulations/1/advance").json()
    assert done["finished"]

    metrics = client.get("/simulations/1/metrics").json()
    assert len(metrics["flow_entries"]) == 20
    assert metrics["mode"] == "MMOS_only"
    assert [s["id"] for s in client.get("/simulations/").json()] == [1]


def test_switch_views(client, session):
    client.post("/simulations/1/advance", params={"until": 5})
    switches = client.get("/simulations/1/switches/").json()
    assert [s["switch_id"] for s in switches] == [1, 2, 3, 4, 5]
    assert all(s["health"] == "Healthy" and s["f_cap"] == 300 for s in switches)

    core = client.get("/simulations/1/switches/5").json()
    flows = client.get("/simulations/1/switches/5/flows").json()
    assert sum(count for _, count in flows["pairs"]) == flows["f_i"] == core["f"]
    assert client.get("/simulations/1/switches/42").status_code == 404


def test_policy_change(client, session):
    host = 0x020000000019  # first server
    response = client.put(f"/simulations/1/policies/5/{host}", json={"scheme": "FMS"})
    assert response.status_code == 200

    policy = client.get("/simulations/1/policies/").json()
    assert policy["default_scheme"] == "MMOS"
    assert policy["overrides"] == [{"switch_id": 5, "host": host, "scheme": "FMS"}]

    assert client.put(f"/simulations/1/policies/9/{host}", json={"scheme": "FMS"}).status_code == 409
    assert client.put(f"/simulations/1/policies/5/{host}", json={"scheme": "bogus"}).status_code == 422


def test_controller_stats(client, session):
    client.post("/simulations/1/advance", params={"until": 9})
    stats = client.get("/simulations/1/controller/stats").json()
    assert [w["window_index"] for w in stats] == list(range(len(stats)))
    assert sum(w["packet_in_count"] for w in stats) > 0


def test_unknown_session(client):
    assert client.get("/simulations/7").status_code == 404
    assert client.get("/simulations/7/switches/").status_code == 404
    assert client.delete("/simulations/7").status_code == 404


def test_data_session_needs_model(client):
    response = client.post("/simulations/", json={"config": {"analyzer": {"mode": "DATA"}}})
    assert response.status_code == 422
    assert response.json()["detail"][0]["loc"] == "svm_model_path"


def test_delete(client, session):
    assert client.delete("/simulations/1").status_code == 204
    assert client.get("/simulations/1").status_code == 404
