import logging
import time
from contextlib import asynccontextmanager

from fastapi import Body, FastAPI, HTTPException, Request, status
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse

from src.bench import InvariantViolation, OracleCapExceeded, build_problem, dijkstra_oracle, run_matrix
from src.config import settings
from src.graph import UnknownCostBounds, epsilon_of
from src.models import HealthResponse, OracleRequest, OracleResponse, RunRecord, RunSpec, TaskSummary
from src.observability import metrics_endpoint, runs_started_counter, setup_logging
from src.tasks import TaskFormatError, ground_problem, parse_task

# Setup logging
setup_logging()
logger = logging.getLogger(__name__)

# Application startup time
START_TIME = time.time()


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Manage application lifecycle."""
    logger.info(
        f"Starting {settings.app_name} v{settings.app_version} "
        f"(oracle cap {settings.oracle_state_cap}, wall clock {settings.record_wall_clock})"
    )
    yield
    logger.info(f"Shutting down after {runs_started_counter['count']} runs")


# Initialize FastAPI
app = FastAPI(
    title=settings.app_name,
    version=settings.app_version,
    lifespan=lifespan,
    docs_url="/docs" if settings.environment != "production" else None,
    redoc_url="/redoc" if settings.environment != "production" else None,
)


@app.get("/health", response_model=HealthResponse, tags=["Health"])
async def health_check():
    """Liveness check with version and uptime."""
    return HealthResponse(
        status="healthy",
        version=settings.app_version,
        uptime=time.time() - START_TIME,
    )


@app.get("/metrics", tags=["Observability"])
async def metrics():
    """Plain-text run counters."""
    if not settings.metrics_enabled:
        raise HTTPException(status_code=404, detail="Metrics disabled")
    return await metrics_endpoint()


@app.post("/api/v1/runs", response_model=RunRecord, status_code=status.HTTP_201_CREATED, tags=["Runs"])
async def create_run(spec: RunSpec):
    """
    Execute one search run and return its record.

    - **domain** / **params**: the instance
    - **evaluator**, **heuristic**, **prune_heuristic**: how the search is guided and pruned
    - **limits**: expansion, wall-clock and memory budgets (exhausting one is a status, not an error)

    The oracle optimum is attached when the instance fits under the configured state cap.
    """
    try:
        records = await run_in_threadpool(run_matrix, [spec], 1)
    except InvariantViolation as e:
        logger.error(f"Invariant violation: {e}")
        raise HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail=str(e))
    except ValueError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
    return records[0]


@app.post("/api/v1/oracle", response_model=OracleResponse, tags=["Runs"])
async def compute_oracle(request: OracleRequest):
    """Exact optimum by uniform-cost enumeration of the reachable states."""
    try:
        problem = build_problem(request.domain, request.params)
        distances = await run_in_threadpool(dijkstra_oracle, problem, request.state_cap)
    except OracleCapExceeded as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))
    except ValueError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))

    goals = [value for state, value in distances.items() if problem.is_goal(state)]
    optimum = min(goals) if goals else (None, None)
    return OracleResponse(
        problem_id=f"{request.domain.value}:{request.params.canonical()}",
        reachable_states=len(distances),
        optimal_cost=optimum[0],
        optimal_size=optimum[1],
    )


@app.post("/api/v1/tasks/validate", response_model=TaskSummary, tags=["Tasks"])
async def validate_task(text: str = Body(..., media_type="text/plain")):
    """Parse a task file body and summarize it; format errors carry the line number."""
    try:
        task = parse_task(text)
    except TaskFormatError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail={"line": e.line, "message": str(e)})
    except ValueError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail={"line": None, "message": str(e)})

    try:
        epsilon = str(epsilon_of(ground_problem(task)))
    except UnknownCostBounds:
        epsilon = None
    return TaskSummary(name=task.name, facts=len(task.facts), actions=len(task.actions), epsilon=epsilon)


@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    """Global exception handler for unhandled errors."""
    logger.error(f"Unhandled exception: {exc}", exc_info=True)
    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content={"detail": "Internal server error"},
    )


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(
        "src.main:app",
        host=settings.api_host,
        port=settings.api_port,
        reload=True,
    )
