import logging
import os
from pathlib import Path

from dotenv import load_dotenv
from pydantic_settings import BaseSettings

load_dotenv()

LOG_FORMAT = "%(levelname)-5.5s [%(name)s] %(message)s"


class Settings(BaseSettings):
    # Application settings
    APP_NAME: str = "bracketlab"
    DEBUG: bool = os.getenv("DEBUG", "False") == "True"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "DEBUG" if DEBUG else "WARNING")

    # Parallelism and seeding
    BRACKETLAB_THREADS: int = int(
        os.getenv("BRACKETLAB_THREADS", str(os.cpu_count() or 1)))
    DEFAULT_SEED: int = int(os.getenv("DEFAULT_SEED", "20240601"))

    # Gowers engine budgets
    GOWERS_DIRECT_BUDGET: int = int(
        os.getenv("GOWERS_DIRECT_BUDGET", str(2**24)))
    GOWERS_RECURSIVE_BUDGET: int = int(
        os.getenv("GOWERS_RECURSIVE_BUDGET", str(2**30)))
    MC_MIN_SAMPLES: int = 1000
    MC_DEFAULT_SAMPLES: int = int(os.getenv("MC_DEFAULT_SAMPLES", "100000"))
    MC_BATCH: int = 256
    CORRELATION_BUDGET: int = int(os.getenv("CORRELATION_BUDGET", str(2**26)))
    BOX_COUNT_BUDGET: int = int(os.getenv("BOX_COUNT_BUDGET", str(2**26)))

    # Recurrence checkers
    CHECKER_MAX_TUPLES: int = int(os.getenv("CHECKER_MAX_TUPLES", str(2**24)))
    CHECKER_ZERO_TOLERANCE: float = 1e-9
    C_HAT_OVERRIDE: float | None = (
        float(os.environ["C_HAT_OVERRIDE"]) if os.getenv("C_HAT_OVERRIDE") else None
    )

    # Tolerances
    IMAG_TOLERANCE: float = 1e-12
    GCS_TOLERANCE: float = 1e-9
    INTEGER_TOLERANCE: float = 1e-8
    ORBIT_TOLERANCE: float = 1e-9

    # Reports
    REPORT_SCHEMA_VERSION: int = 1
    PILOT_FLOORS_PATH: str = os.getenv(
        "PILOT_FLOORS_PATH",
        str(Path(__file__).resolve().parent.parent / "data" / "pilot_floors.json"),
    )


settings = Settings()


def configure_logging(level: str | None = None) -> None:
    logging.basicConfig(
        format=LOG_FORMAT,
        level=(level or settings.LOG_LEVEL).upper(),
        force=True,
    )
