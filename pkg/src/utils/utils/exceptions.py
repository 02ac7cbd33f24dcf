"""
Custom exception classes for the preferential-sampling workbench
Provides specific error types for better error handling and debugging
"""
from typing import Optional


class PrefSampleError(Exception):
    """Base exception for all workbench errors"""
    pass


class ConfigurationError(PrefSampleError):
    """Raised when an experiment configuration is invalid or inconsistent"""
    pass


class ValidationError(PrefSampleError):
    """Raised when input validation fails"""
    pass


class RegionError(ValidationError):
    """Raised when a location falls outside the study region"""
    pass


class CovarianceError(PrefSampleError):
    """Raised when a covariance matrix cannot be factorized"""

    def __init__(self, message: str, jitter: float):
        super().__init__(f"{message} (final jitter {jitter:.3e})")
        self.jitter = jitter


class LikelihoodError(PrefSampleError):
    """Raised when a likelihood or posterior term is not finite"""

    def __init__(self, message: str, term: Optional[str] = None):
        super().__init__(f"{message} [term: {term}]" if term else message)
        self.term = term


class SamplerError(PrefSampleError):
    """Raised when an MCMC run cannot be started or continued"""
    pass


class DataIngestError(PrefSampleError):
    """Raised when an input data file is malformed. Line numbers are 1-based and count the header."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class PipelineCellError(PrefSampleError):
    """Raised when a single (model, holdout) cell of a pipeline run fails"""
    pass
