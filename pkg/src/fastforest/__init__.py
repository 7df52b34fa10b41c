"""Random-forest induction with subbagging, logarithmic split-point sampling
and dynamic restricted subspacing, plus an ordinary random-forest baseline."""
from .data import Attribute, Dataset, DatasetError, load_dataset, stratified_folds, write_arff, write_csv
from .forest import (
    BAG,
    BAG_UNIQUE,
    BuildConfig,
    ForestModel,
    SamplerMode,
    build_forest,
    predict,
    predict_batch,
    subbag,
)
from .split import EXHAUSTIVE, LSPS, CandidateMode, fixed
from .tree import DYNAMIC, STATIC, SubspaceMode, drs, subspace_size

__version__ = "0.1.0"
