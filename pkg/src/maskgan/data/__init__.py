from .dataset import PairDataset, TrainingPair, batch_iterator, load_nifti_pairs
from .nifti import Volume, header_summary, parse_nifti, write_nifti
from .phantom import PhantomSpec, load_phantom, phantom_dataset, phantom_pair, write_phantom
from .preprocess import (STRUCTURES, LabelMap, extract_axial_slices, make_condition,
                         normalize_volume, resize)

__all__ = [
    "LabelMap", "PairDataset", "PhantomSpec", "STRUCTURES", "TrainingPair", "Volume",
    "batch_iterator", "extract_axial_slices", "header_summary", "load_nifti_pairs",
    "load_phantom", "make_condition", "normalize_volume", "parse_nifti", "phantom_dataset",
    "phantom_pair", "resize", "write_nifti", "write_phantom",
]
