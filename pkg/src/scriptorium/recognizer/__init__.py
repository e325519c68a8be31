"""Line-level text recognizer: recurrent network + alignment-free loss."""

from ..inventory import CharacterInventory, UnknownSymbolError
from .ctc import (
    InfeasibleAlignmentError,
    ctc_loss,
    decode_greedy,
    frame_confidence,
    min_frames,
)
from .model import (
    HistoryPoint,
    LineRecognizer,
    RecognizerModel,
    TrainingConfig,
    TrainingRun,
    normalize_line,
    train,
)

__all__ = [
    "CharacterInventory",
    "UnknownSymbolError",
    "InfeasibleAlignmentError",
    "ctc_loss",
    "decode_greedy",
    "frame_confidence",
    "min_frames",
    "HistoryPoint",
    "LineRecognizer",
    "RecognizerModel",
    "TrainingConfig",
    "TrainingRun",
    "normalize_line",
    "train",
]
