"""Multi-resolution mesh networks: wavelet subbands, ridge mesh graphs and stacked ensembles."""

from ._version import __version__
from .data import Dataset, SessionSpec, SubjectRecord, load_dataset, save_dataset
from .wavelet import decompose, get_family, reconstruct, reconstruct_subband, subband_stack
from .mesh import MeshNetwork, build_mesh_network, embed_mesh
from .synth import SynthConfig, generate

__all__ = [
    "__version__", "Dataset", "SessionSpec", "SubjectRecord", "load_dataset", "save_dataset",
    "decompose", "get_family", "reconstruct", "reconstruct_subband", "subband_stack",
    "MeshNetwork", "build_mesh_network", "embed_mesh", "SynthConfig", "generate",
]
