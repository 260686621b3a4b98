from emodistill.dino.encoder import MelStyleEncoder
from emodistill.dino.head import ProjectionHead
from emodistill.dino.loss import dino_loss
from emodistill.dino.model import Distiller, DistillerConfig

__all__ = [
    "Distiller",
    "DistillerConfig",
    "MelStyleEncoder",
    "ProjectionHead",
    "dino_loss",
]
