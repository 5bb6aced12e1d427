import os
from pydantic_settings import BaseSettings
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

class Settings(BaseSettings):
    """Toolkit settings loaded from environment variables"""
    
    # Runtime settings
    LOG_LEVEL: str = os.getenv("REGION_ATLAS_LOG_LEVEL", "info").lower()
    THREADS: int = int(os.getenv("REGION_ATLAS_THREADS", "1"))
    OUTPUT_DIR: str = os.getenv("REGION_ATLAS_OUTPUT_DIR", "./out")
    
    # Numerical tolerances
    TOLERANCE: float = float(os.getenv("REGION_ATLAS_TOLERANCE", "1e-9"))
    SLACK_THRESHOLD: float = float(os.getenv("REGION_ATLAS_SLACK_THRESHOLD", "1e-7"))
    BOX: float = float(os.getenv("REGION_ATLAS_BOX", "1e4"))
    
    # Exact counting caps
    PLANE_CAP: int = int(os.getenv("REGION_ATLAS_PLANE_CAP", "40"))
    NEURON_CAP: int = int(os.getenv("REGION_ATLAS_NEURON_CAP", "24"))
    KSET_CAP: int = int(os.getenv("REGION_ATLAS_KSET_CAP", "20"))
    
    # Sampling settings
    SAMPLES: int = int(os.getenv("REGION_ATLAS_SAMPLES", "2000000"))
    FAST_SAMPLES: int = int(os.getenv("REGION_ATLAS_FAST_SAMPLES", "100000"))
    BATCH: int = int(os.getenv("REGION_ATLAS_BATCH", "50000"))
    
    # Slice rendering
    SLICE_GRID: int = int(os.getenv("REGION_ATLAS_SLICE_GRID", "300"))
    SLICE_RANGE: float = float(os.getenv("REGION_ATLAS_SLICE_RANGE", "10.0"))
    
    class Config:
        env_file = ".env"
        env_prefix = "REGION_ATLAS_"
        case_sensitive = True
