"""Exception hierarchy shared by the library and the command-line surface."""
from typing import Optional


class FaceRFCNError(Exception):
    """Base error. ``exit_code`` is the process status the CLI returns for it."""

    exit_code: int = 1


class ConfigError(FaceRFCNError):
    """Invalid run configuration or command-line usage."""

    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class BoxError(FaceRFCNError, ValueError):
    """Box violates its invariants or cannot be used for the requested transform."""


class ShapeError(FaceRFCNError, ValueError):
    """Tensor shape or length mismatch."""


class AnnotationParseError(FaceRFCNError):
    """Malformed annotation file."""

    def __init__(self, message: str, line_no: int):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class TrainingDivergedError(FaceRFCNError):
    """A training step produced a non-finite loss."""

    exit_code = 2

    def __init__(self, step: int, report: object):
        self.step = step
        self.report = report
        super().__init__(f"non-finite loss at step {step}: {report}")


class MissingArtifactError(FaceRFCNError):
    """A required checkpoint or input file does not exist."""

    exit_code = 3


class CheckpointError(FaceRFCNError):
    """Checkpoint file is corrupt or does not match the network it is loaded into."""

    exit_code = 3


class EvaluationInputError(FaceRFCNError):
    """Evaluation inputs are unusable (no ground truths, malformed detections)."""

    exit_code = 4
