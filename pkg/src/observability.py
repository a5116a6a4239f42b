import logging

from src.config import settings

logger = logging.getLogger(__name__)

# Simple in-memory counters (for basic metrics)
runs_started_counter = {"count": 0}
runs_completed_counter = {"count": 0}
runs_failed_counter = {"count": 0}
oracle_counter = {"count": 0}


def setup_logging():
    """Configure structured logging."""
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def render_metrics() -> str:
    """Render the counters in Prometheus text format."""
    return f"""# epsilon-bench metrics
runs_started_total {runs_started_counter['count']}
runs_completed_total {runs_completed_counter['count']}
runs_failed_total {runs_failed_counter['count']}
oracle_runs_total {oracle_counter['count']}
"""


async def metrics_endpoint():
    """Simple metrics endpoint."""
    from fastapi import Response

    return Response(content=render_metrics(), media_type="text/plain")
