from emodistill.acoustic.blocks import ConditionedFFTBlock, sinusoidal_table
from emodistill.acoustic.loss import acoustic_loss, total_loss
from emodistill.acoustic.model import (
    AcousticConfig,
    AcousticModel,
    LengthRegulator,
    VariancePredictor,
)

__all__ = [
    "AcousticConfig",
    "AcousticModel",
    "ConditionedFFTBlock",
    "LengthRegulator",
    "VariancePredictor",
    "acoustic_loss",
    "sinusoidal_table",
    "total_loss",
]
