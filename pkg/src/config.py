from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Harness configuration with environment variable support."""

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=False)

    # Application
    app_name: str = "epsilon-bench"
    app_version: str = "1.0.0"
    environment: str = "development"
    log_level: str = "INFO"

    # Oracle
    oracle_state_cap: int = 100_000

    # Matrix execution
    matrix_jobs: int = 1
    record_wall_clock: bool = True  # false zeroes every *_ms field
    run_id_length: int = 8

    # Service
    api_host: str = "127.0.0.1"
    api_port: int = 8000
    metrics_enabled: bool = True


settings = Settings()
