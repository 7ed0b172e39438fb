"""
Error hierarchy for the HOMER toolkit

The CLI maps these classes to process exit codes (see constants.EXIT_*).
"""

from typing import Optional


class HomerError(Exception):
    """Base class for all toolkit errors"""


class ConfigError(HomerError, ValueError):
    """Invalid parameter or configuration file"""


class DatasetFormatError(HomerError, ValueError):
    """Malformed dataset file"""

    def __init__(self, path: str, line_no: Optional[int], message: str):
        self.path = str(path)
        self.line_no = line_no
        self.message = message
        location = f'{self.path}:{line_no}' if line_no is not None else self.path
        super().__init__(f'{location}: {message}')


class DimensionMismatchError(HomerError, ValueError):
    """Vectors of different dimensionality were compared"""


class UntrainedModelError(HomerError, RuntimeError):
    """A model was used before being trained"""


class ModelFormatError(HomerError, ValueError):
    """Model file could not be decoded"""


class ModelVersionError(ModelFormatError):
    """Model file declares a format version this build does not read"""


class ModelDataMismatchError(HomerError, ValueError):
    """Model and dataset disagree on vocabulary or feature space"""
