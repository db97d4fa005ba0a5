import json
import time

import pytest
from fastapi.testclient import TestClient

from causerank.api import create_app
from causerank.engine import Engine
from causerank.ingest import records_to_jsonl
from causerank.synth import ScenarioSpec, gen_planted_cause, gen_seasonal_spike, table_to_records


@pytest.fixture
def client():
    return TestClient(create_app(Engine(workers=1), run_workers=2), raise_server_exceptions=False)


def upload_scenario(client, scenario) -> str:
    body = records_to_jsonl(table_to_records(scenario.table))
    r = client.post("/v1/datasets", content=body.encode())
    assert r.status_code == 201
    dataset_id = r.json()["id"]
    r = client.post(
        f"/v1/datasets/{dataset_id}/queries",
        content=b"FAMILY BY name SELECT avg(value)",
    )
    assert r.status_code == 201, r.text
    return r.json()["table"]


def create_session(client, table_id, **extra) -> str:
    body = {"table": table_id, "target": "target", "method": "l2", "seed": 1, **extra}
    r = client.post("/v1/sessions", json=body)
    assert r.status_code == 201, r.text
    return r.json()["session"]["id"]


def wait_run(client, session_id, run_idx, timeout=30.0) -> dict:
    deadline = time.time() + timeout
    while time.time() < deadline:
        r = client.get(f"/v1/sessions/{session_id}/runs/{run_idx}")
        body = r.json()
        if body.get("status") == "done":
            return body["report"]
        if body.get("status") == "failed":
            raise AssertionError(f"run failed: {body}")
        time.sleep(0.05)
    raise AssertionError("run did not finish in time")


@pytest.fixture
def planted(client):
    scenario = gen_planted_cause(ScenarioSpec(n_families=8, features_per_family=2, T=300, seed=0))
    table_id = upload_scenario(client, scenario)
    return client, table_id, scenario


def test_run_returns_top_entries(planted):
    client, table_id, scenario = planted
    sid = create_session(client, table_id)
    r = client.post(f"/v1/sessions/{sid}/run", json={"token": "t-1"})
    assert r.status_code in (200, 202)
    run_idx = r.json()["run"]
    report = wait_run(client, sid, run_idx)
    entries = report["entries"]
    assert entries[0]["family"] == "cause"
    assert all({"family", "score", "p_value"} <= set(e) for e in entries)
    assert len(entries) <= 20


def test_run_token_is_idempotent(planted):
    client, table_id, scenario = planted
    sid = create_session(client, table_id)
    first = client.post(f"/v1/sessions/{sid}/run", json={"token": "same"}).json()
    second = client.post(f"/v1/sessions/{sid}/run", json={"token": "same"}).json()
    assert first["run"] == second["run"]
    wait_run(client, sid, first["run"])
    third = client.post(f"/v1/sessions/{sid}/run", json={"token": "same"}).json()
    assert third["run"] == first["run"] and third["status"] == "done"
    # a fresh token starts a new run
    fourth = client.post(f"/v1/sessions/{sid}/run", json={"token": "other"}).json()
    assert fourth["run"] != first["run"]


def test_target_in_condition_is_422(planted):
    client, table_id, scenario = planted
    r = client.post(
        "/v1/sessions",
        json={"table": table_id, "target": "target", "condition": ["target"]},
    )
    assert r.status_code == 422
    assert r.json()["code"] == "invalid-hypothesis"


def test_unscored_plot_is_404(planted):
    client, table_id, scenario = planted
    sid = create_session(client, table_id)
    r = client.get(f"/v1/sessions/{sid}/plots/cause")
    assert r.status_code == 404
    assert r.json()["code"] == "not-found"


def test_plot_after_run(planted):
    client, table_id, scenario = planted
    sid = create_session(client, table_id)
    run_idx = client.post(f"/v1/sessions/{sid}/run").json()["run"]
    wait_run(client, sid, run_idx)
    r = client.get(f"/v1/sessions/{sid}/plots/cause")
    assert r.status_code == 200
    plot = r.json()["plot"]
    assert len(plot["observed"]) == len(plot["predicted"]) == 300


def test_echo_header_round_trips(planted):
    client, table_id, scenario = planted
    sid = create_session(client, table_id)
    r = client.get(f"/v1/sessions/{sid}", headers={"X-Idempotency-Key": "abc123"})
    assert r.json()["echo"] == "abc123"
    r404 = client.get("/v1/sessions/nope", headers={"X-Idempotency-Key": "abc123"})
    assert r404.status_code == 404 and r404.json()["echo"] == "abc123"


def test_errors_for_unknown_resources(client):
    assert client.get("/v1/sessions/missing").status_code == 404
    assert client.post("/v1/datasets/missing/queries", content=b"x").status_code == 404
    r = client.post("/v1/sessions", json={"table": "missing", "target": "t"})
    assert r.status_code == 404


def test_bad_query_is_400_conflict_is_409(client):
    scenario = gen_planted_cause(ScenarioSpec(n_families=4, features_per_family=2, T=200, seed=1))
    body = records_to_jsonl(table_to_records(scenario.table))
    dataset_id = client.post("/v1/datasets", content=body.encode()).json()["id"]
    r = client.post(f"/v1/datasets/{dataset_id}/queries", content=b"FAMILY oops")
    assert r.status_code == 400 and r.json()["code"] == "bad-request"
    dup = b"FAMILY BY name SELECT avg(value);\nFAMILY BY name SELECT avg(value)"
    r = client.post(f"/v1/datasets/{dataset_id}/queries", content=dup)
    assert r.status_code == 409 and r.json()["code"] == "conflict"


def test_unknown_method_is_400(planted):
    client, table_id, scenario = planted
    r = client.post("/v1/sessions", json={"table": table_id, "target": "target", "method": "lasso"})
    assert r.status_code == 400


def test_fork_and_pseudocause_workflow(client):
    scenario = gen_seasonal_spike(ScenarioSpec(n_families=8, T=600, seed=2, period=60))
    table_id = upload_scenario(client, scenario)
    sid = create_session(client, table_id)
    run0 = client.post(f"/v1/sessions/{sid}/run").json()["run"]
    report0 = wait_run(client, sid, run0)

    fork = client.post(f"/v1/sessions/{sid}/fork", json={})
    assert fork.status_code == 201
    child = fork.json()["session"]
    assert child["parent"] == sid

    pc = client.post(
        f"/v1/sessions/{child['id']}/pseudocause",
        json={"kind": "seasonal", "params": {"period": 60}},
    )
    assert pc.status_code == 201, pc.text
    key = pc.json()["key"]
    assert key in pc.json()["condition"]

    run1 = client.post(f"/v1/sessions/{child['id']}/run").json()["run"]
    report1 = wait_run(client, child["id"], run1)
    rank_before = [e["family"] for e in report0["entries"]].index("spike-driver")
    rank_after = [e["family"] for e in report1["entries"]].index("spike-driver")
    assert rank_after <= rank_before

    state = client.get(f"/v1/sessions/{sid}").json()["session"]
    assert state["runs"] == 1 and state["condition"] == []  # parent untouched


def test_bad_pseudocause_params_are_400(planted):
    client, table_id, scenario = planted
    sid = create_session(client, table_id)
    r = client.post(f"/v1/sessions/{sid}/pseudocause", json={"kind": "seasonal", "params": {"period": 1}})
    assert r.status_code == 400
    r = client.post(f"/v1/sessions/{sid}/pseudocause", json={"kind": "wavelet"})
    assert r.status_code == 400


def test_session_state_includes_run_status(planted):
    client, table_id, scenario = planted
    sid = create_session(client, table_id)
    run_idx = client.post(f"/v1/sessions/{sid}/run").json()["run"]
    wait_run(client, sid, run_idx)
    state = client.get(f"/v1/sessions/{sid}").json()
    assert state["run_status"] == [{"run": 0, "status": "done"}]


def test_cli_and_api_reports_identical(tmp_path, planted, capsys):
    """The HTTP layer adds no semantics: same inputs, same ranked report."""
    from causerank.cli import main as cli_main
    from causerank.engine import save_table

    client, table_id, scenario = planted
    sid = create_session(client, table_id, seed=5)
    run_idx = client.post(f"/v1/sessions/{sid}/run").json()["run"]
    api_report = wait_run(client, sid, run_idx)
    api_entries = [
        {k: e[k] for k in ("family", "score", "p_value", "method")} for e in api_report["entries"]
    ]

    table_path = tmp_path / "t.npz"
    save_table(table_path, scenario.table)
    code = cli_main(
        ["rank", str(table_path), "--target", "target", "--method", "l2", "--seed", "5"]
    )
    assert code == 0
    out = capsys.readouterr().out
    cli_entries = [
        {k: obj[k] for k in ("family", "score", "p_value", "method")}
        for obj in map(json.loads, out.strip().splitlines())
    ]
    assert cli_entries == api_entries
