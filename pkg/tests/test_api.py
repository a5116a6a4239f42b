import pytest
from httpx import AsyncClient

from src.config import settings


class TestHealthEndpoint:
    """Test health check endpoint."""

    async def test_health_check(self, client: AsyncClient):
        """Test health endpoint returns correct status."""
        response = await client.get("/health")
        assert response.status_code == 200
        data = response.json()
        assert data["status"] == "healthy"
        assert data["version"] == settings.app_version
        assert "uptime" in data

    async def test_metrics(self, client: AsyncClient):
        """Test metrics are served as plain text."""
        response = await client.get("/metrics")
        assert response.status_code == 200
        assert "runs_started_total" in response.text

    async def test_metrics_disabled(self, client: AsyncClient, monkeypatch):
        """Test metrics can be switched off."""
        monkeypatch.setattr(settings, "metrics_enabled", False)
        response = await client.get("/metrics")
        assert response.status_code == 404


class TestRuns:
    """Test run execution."""

    async def test_create_run(self, client: AsyncClient, deterministic):
        """Test a size-based run on the cycle trap proves the optimum."""
        response = await client.post(
            "/api/v1/runs",
            json={"run_id": "api-size", "domain": "cycle", "params": {"k": 4, "goal": 14}, "evaluator": {"kind": "size"}},
        )
        assert response.status_code == 201
        data = response.json()
        assert data["run_id"] == "api-size"
        assert data["status"] == "PROVED_OPTIMAL"
        assert data["best_cost"] == 9
        assert data["best_size"] == 2
        assert data["oracle_cost"] == 9
        assert data["wall_ms"] == 0
        assert data["events"][-1]["plan"] == ["dec", "dec"]

    async def test_derived_run_id(self, client: AsyncClient):
        """Test a run without an id gets a derived one."""
        response = await client.post("/api/v1/runs", json={"domain": "cycle", "params": {"k": 4}})
        assert response.status_code == 201
        assert len(response.json()["run_id"]) >= settings.run_id_length

    async def test_budget_exhausted_is_not_an_error(self, client: AsyncClient):
        """Test exhausting the budget is reported as a status."""
        response = await client.post(
            "/api/v1/runs",
            json={"domain": "cycle", "params": {"k": 10}, "limits": {"max_expansions": 3}},
        )
        assert response.status_code == 201
        assert response.json()["status"] == "BUDGET_EXHAUSTED"

    @pytest.mark.parametrize(
        "body",
        [
            {"domain": "maze"},
            {"domain": "cycle", "params": {"k": 1}},
            {"domain": "cycle", "evaluator": {"kind": "wcost", "weight": "1/2"}},
            {"domain": "cycle", "prune_heuristic": "hadd"},
            {"domain": "cycle", "run_id": "bad id"},
        ],
    )
    async def test_invalid_spec(self, client: AsyncClient, body):
        """Test malformed specs are rejected by validation."""
        response = await client.post("/api/v1/runs", json=body)
        assert response.status_code == 422

    async def test_failed_run(self, client: AsyncClient):
        """Test a run that cannot execute is recorded as FAILED."""
        response = await client.post(
            "/api/v1/runs", json={"domain": "cycle", "params": {"k": 4}, "heuristic": "rp-cost"}
        )
        assert response.status_code == 201
        data = response.json()
        assert data["status"] == "FAILED"
        assert "grounded task" in data["error"]


class TestOracle:
    """Test the oracle endpoint."""

    async def test_oracle(self, client: AsyncClient):
        """Test the oracle reports reachable states and the optimum."""
        response = await client.post("/api/v1/oracle", json={"domain": "cycle", "params": {"k": 4, "goal": 14}})
        assert response.status_code == 200
        data = response.json()
        assert data["problem_id"] == "cycle:k=4,goal=14"
        assert data["reachable_states"] == 16
        assert data["optimal_cost"] == 9
        assert data["optimal_size"] == 2

    async def test_oracle_cap_exceeded(self, client: AsyncClient):
        """Test exceeding the state cap is unprocessable."""
        response = await client.post(
            "/api/v1/oracle", json={"domain": "cycle", "params": {"k": 8}, "state_cap": 10}
        )
        assert response.status_code == 422

    async def test_oracle_missing_parameter(self, client: AsyncClient):
        """Test a cycle without k is a bad request."""
        response = await client.post("/api/v1/oracle", json={"domain": "cycle"})
        assert response.status_code == 400


class TestTaskValidation:
    """Test task text validation."""

    async def test_validate_task(self, client: AsyncClient, sample_task_text):
        """Test a valid task is summarized."""
        response = await client.post(
            "/api/v1/tasks/validate", content=sample_task_text, headers={"Content-Type": "text/plain"}
        )
        assert response.status_code == 200
        assert response.json() == {"name": "sample", "facts": 3, "actions": 3, "epsilon": "1/5"}

    async def test_validate_task_error_line(self, client: AsyncClient):
        """Test format errors report their line."""
        response = await client.post(
            "/api/v1/tasks/validate",
            content="task t\nfact 0 a\nfrobnicate\n",
            headers={"Content-Type": "text/plain"},
        )
        assert response.status_code == 400
        detail = response.json()["detail"]
        assert detail["line"] == 3
        assert "unknown directive" in detail["message"]

    async def test_validate_task_without_actions(self, client: AsyncClient):
        """Test a task with no actions has no epsilon."""
        response = await client.post(
            "/api/v1/tasks/validate", content="task t\nfact 0 a\ngoal 0\n", headers={"Content-Type": "text/plain"}
        )
        assert response.status_code == 200
        assert response.json()["epsilon"] is None
