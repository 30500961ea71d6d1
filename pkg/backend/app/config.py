import os
from dotenv import load_dotenv
from typing import Dict, Any

# Load environment variables
load_dotenv()


class Config:
    # Application settings
    APP_NAME = "Signal Proportion Estimation Service"
    DEBUG = os.getenv("DEBUG", "false").lower() == "true"
    ENVIRONMENT = os.getenv("ENVIRONMENT", "development")

    # Server settings
    PORT = int(os.getenv("PORT", "8000"))
    HOST = os.getenv("HOST", "0.0.0.0")
    CORS_ORIGINS = [o.strip() for o in os.getenv("CORS_ORIGINS", "*").split(",") if o.strip()]

    # Logging settings
    LOG_LEVEL = os.getenv("LOG_LEVEL", "info")
    LOG_DIR = os.getenv("LOG_DIR", "")

    # Calibration defaults (1000 null replicates, alpha = 0.1)
    DEFAULT_REPS = int(os.getenv("DEFAULT_REPS", "1000"))
    DEFAULT_ALPHA = float(os.getenv("DEFAULT_ALPHA", "0.1"))

    # Baseline estimator tuning
    GW_ALPHA = float(os.getenv("GW_ALPHA", "0.05"))
    JC_GAMMA = float(os.getenv("JC_GAMMA", "0.5"))

    # Parallel execution; CHUNK_ROWS must not depend on the worker count
    THREADS = int(os.getenv("THREADS", "1"))
    CHUNK_ROWS = int(os.getenv("CHUNK_ROWS", "64"))

    # Numerical windows
    Z_CLAMP = 38.0
    T_MAX = 40.0
    T_MIN = 1e-8

    # Experiment scales
    DESK_REPLICATIONS = int(os.getenv("DESK_REPLICATIONS", "100"))
    FULL_REPLICATIONS = int(os.getenv("FULL_REPLICATIONS", "1000"))

    @classmethod
    def get_config(cls) -> Dict[str, Any]:
        """Get configuration as dictionary."""
        return {
            "APP_NAME": cls.APP_NAME,
            "ENVIRONMENT": cls.ENVIRONMENT,
            "CORS_ORIGINS": cls.CORS_ORIGINS,
            "LOG_LEVEL": cls.LOG_LEVEL,
            "DEFAULT_REPS": cls.DEFAULT_REPS,
            "DEFAULT_ALPHA": cls.DEFAULT_ALPHA,
            "GW_ALPHA": cls.GW_ALPHA,
            "JC_GAMMA": cls.JC_GAMMA,
            "THREADS": cls.THREADS,
            "CHUNK_ROWS": cls.CHUNK_ROWS,
            "Z_CLAMP": cls.Z_CLAMP,
            "T_MAX": cls.T_MAX,
            "T_MIN": cls.T_MIN,
            "DESK_REPLICATIONS": cls.DESK_REPLICATIONS,
            "FULL_REPLICATIONS": cls.FULL_REPLICATIONS,
        }


# Convenience function
def get_config():
    return Config.get_config()
