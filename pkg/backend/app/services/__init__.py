"""Services package for the application."""

from app.services.baselines import BaselineService
from app.services.calibration import CalibrationService
from app.services.dependence import DependenceService
from app.services.estimators import EstimatorService
from app.services.harness import HarnessService

# Re-export services
__all__ = [
    'BaselineService',
    'CalibrationService',
    'DependenceService',
    'EstimatorService',
    'HarnessService',
]
