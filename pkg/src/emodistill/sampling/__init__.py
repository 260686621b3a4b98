from emodistill.sampling.crops import Crop, CropBatch, extract_crops, seconds_to_frames
from emodistill.sampling.perturb import formant_perturb, perturb_batch
from emodistill.sampling.sampler import ClusterSampler, SamplingSet, build_sampler

__all__ = [
    "ClusterSampler",
    "Crop",
    "CropBatch",
    "SamplingSet",
    "build_sampler",
    "extract_crops",
    "formant_perturb",
    "perturb_batch",
    "seconds_to_frames",
]
