"""Dataset construction: master stores, domain-windowed subsets, SigMF files."""

from .spec import DomainWindow, ExampleMeta, MasterSpec
from .dataset import Dataset, ShortfallError, generate_master, split, subset
from .sigmf import read_sigmf, write_sigmf

__all__ = [
    "MasterSpec",
    "DomainWindow",
    "ExampleMeta",
    "Dataset",
    "ShortfallError",
    "generate_master",
    "subset",
    "split",
    "write_sigmf",
    "read_sigmf",
]
