import os
import sys
import logging
from typing import Optional
from dataclasses import dataclass

from dotenv import load_dotenv

from corrsolve.lp_core import SolverOptions, available_backends


LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


@dataclass
class Config:

    # Solver settings
    lp_backend: str = "bundled"
    max_iterations: int = 50_000
    max_retries: int = 3  # numerical-trouble restarts of the bundled simplex

    # Enumeration and verification
    plan_cap: int = 1_000_000
    verify_tol: float = 1e-6

    # Performance settings
    max_workers: int = 4

    # Logging
    log_level: str = "INFO"
    log_file: Optional[str] = None

    def __post_init__(self):
        """Validate configuration after initialization."""
        if self.lp_backend not in available_backends():
            raise ValueError(
                f"Unknown LP backend '{self.lp_backend}' (choose from {available_backends()})"
            )

        if self.plan_cap <= 0:
            raise ValueError("Plan cap must be positive")

        if self.verify_tol <= 0:
            raise ValueError("Verification tolerance must be positive")

        if self.max_iterations <= 0:
            raise ValueError("Iteration limit must be positive")

        if self.max_retries < 1 or self.max_retries > 10:
            raise ValueError("Max retries must be between 1 and 10")

        if self.max_workers <= 0:
            raise ValueError("Max workers must be positive")

        self.log_level = self.log_level.upper()
        if not isinstance(logging.getLevelName(self.log_level), int):
            raise ValueError(f"Unknown log level: {self.log_level}")

    @classmethod
    def from_env(cls) -> 'Config':
        """Create configuration from environment variables."""
        load_dotenv()

        return cls(
            lp_backend=os.getenv("CORRSOLVE_LP_BACKEND", cls.lp_backend),
            max_iterations=int(os.getenv("CORRSOLVE_MAX_ITERATIONS", cls.max_iterations)),
            max_retries=int(os.getenv("CORRSOLVE_MAX_RETRIES", cls.max_retries)),
            plan_cap=int(os.getenv("CORRSOLVE_PLAN_CAP", cls.plan_cap)),
            verify_tol=float(os.getenv("CORRSOLVE_VERIFY_TOL", cls.verify_tol)),
            max_workers=int(os.getenv("CORRSOLVE_MAX_WORKERS", cls.max_workers)),
            log_level=os.getenv("CORRSOLVE_LOG_LEVEL", cls.log_level),
            log_file=os.getenv("CORRSOLVE_LOG_FILE") or None,
        )

    def solver_options(self, backend: Optional[str] = None) -> SolverOptions:
        """Solver options carrying this configuration's backend and limits."""
        return SolverOptions(
            backend=backend or self.lp_backend,
            max_iterations=self.max_iterations,
            max_retries=self.max_retries,
        )


def setup_logging(config: Config) -> None:
    """Configure root logging: stderr always, plus a log file when configured."""
    handlers = [logging.StreamHandler(sys.stderr)]
    if config.log_file:
        handlers.append(logging.FileHandler(config.log_file))

    logging.basicConfig(
        level=logging.getLevelName(config.log_level),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
