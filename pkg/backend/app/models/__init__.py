"""Models package for the application."""

from app.models.calibration import BoundingSequence, BoundingSpec, NullReplicates
from app.models.dependence import CorrelationMatrix, MacLevel, StructureSpec
from app.models.estimate import EstimateReport, EstimateResult, NullDistribution, ZScores
from app.models.experiment import ExperimentConfig, ExperimentResult, SignalSpec

# Re-export models
__all__ = [
    'BoundingSequence',
    'BoundingSpec',
    'NullReplicates',
    'CorrelationMatrix',
    'MacLevel',
    'StructureSpec',
    'EstimateReport',
    'EstimateResult',
    'NullDistribution',
    'ZScores',
    'ExperimentConfig',
    'ExperimentResult',
    'SignalSpec',
]
