from emodistill.cluster.hull import find_neutral, hull_measure
from emodistill.cluster.kmeans import kmeans
from emodistill.cluster.matching import (
    ClusterSet,
    PseudoLabelTable,
    attach_attribute_centroids,
    attach_neutral_geometry,
    cluster_speaker,
    match_speakers,
)
from emodistill.cluster.spherical import from_spherical, to_spherical

__all__ = [
    "ClusterSet",
    "PseudoLabelTable",
    "attach_attribute_centroids",
    "attach_neutral_geometry",
    "cluster_speaker",
    "find_neutral",
    "from_spherical",
    "hull_measure",
    "kmeans",
    "match_speakers",
    "to_spherical",
]
