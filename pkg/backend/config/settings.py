"""Application settings and configuration."""
from pydantic_settings import BaseSettings
from typing import List, Literal, Optional


class Settings(BaseSettings):
    """Application settings loaded from environment variables (prefix CRABFACTOR_)."""

    # Server Configuration
    host: str = "0.0.0.0"
    port: int = 8000
    environment: str = "development"

    # Physics
    field_strength: float = 10.0
    evolution_steps: int = 1000
    spectrum_points: int = 201

    # CRAB optimizer
    n_c: int = 4
    restarts: int = 10
    max_iterations: int = 2000
    simplex_init_scale: float = 0.3
    f_tol: float = 1e-10
    x_tol: float = 1e-8
    default_seed: Optional[int] = None

    # Readout
    readout_ambiguity: float = 0.1

    # Counter-diabatic baseline
    cd_epsilon_r: float = 1e-12
    cd_coupling_scope: Literal["local", "global"] = "local"

    # Execution
    workers: int = 1

    # File Storage Paths
    results_dir: str = "./results"
    instances_dir: str = "./instances"

    # Logging
    log_level: str = "INFO"

    # CORS Settings
    cors_origins: str = ""

    class Config:
        env_file = ".env"
        env_prefix = "CRABFACTOR_"
        case_sensitive = False

    @property
    def cors_origins_list(self) -> List[str]:
        """Parse CORS origins from comma-separated string."""
        return [origin.strip() for origin in self.cors_origins.split(",") if origin.strip()]


# Global settings instance
settings = Settings()
