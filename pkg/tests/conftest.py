import pytest
import pytest_asyncio
from httpx import AsyncClient, ASGITransport

from src.config import settings
from src.domains import CycleTrapConfig, TravelConfig, cycle_trap, ground_problem, rendezvous_task
from src.main import app
from src.tasks import parse_task

# Configure pytest-asyncio
pytest_plugins = ('pytest_asyncio',)


SAMPLE_TASK = """\
# two routes to g: a cheap two-step one and an expensive direct one
task sample
fact 0 start
fact 1 middle
fact 2 g
init 0
goal 2
action step-a 2
pre 0
add 1
end
action step-b 3
pre 1
add 2
del 1
end
action direct 10
pre 0
add 2
end
"""


@pytest_asyncio.fixture
async def client():
    """Provide async HTTP client for testing."""
    async with AsyncClient(transport=ASGITransport(app=app), base_url="http://test") as ac:
        yield ac


@pytest.fixture
def deterministic(monkeypatch):
    """Zero every wall-clock field so records compare byte for byte."""
    monkeypatch.setattr(settings, "record_wall_clock", False)
    yield settings


@pytest.fixture
def sample_task_text():
    """Provide a small task in the text format."""
    return SAMPLE_TASK


@pytest.fixture
def sample_task(sample_task_text):
    """Provide the parsed sample task."""
    return parse_task(sample_task_text)


@pytest.fixture
def small_cycle():
    """Cycle trap k=4 with goal 14: optimum (9, 2) through the expensive edge."""
    return cycle_trap(CycleTrapConfig(k=4, goal_residue=14))


@pytest.fixture
def corner_rendezvous():
    """Two passengers and one plane, all starting at c1."""
    config = TravelConfig(passengers=2, planes=1, passenger_cities=("c1", "c1"), plane_cities=("c1",))
    return ground_problem(rendezvous_task(config))
