"""Bounded isotonic regression and omnipredictor learners for single- and multi-index models."""

from .bir import (BIRInstance, BIRSolution, BoundedIsotonicRegressor, InfeasibleError,
                  check_bir_optimality_certificate, solve_bir, solve_bir_reference)
from .data_io import Dataset, gen_agnostic, gen_realizable, load_dataset_csv, save_dataset_csv
from .evalgap import (ComparatorGrid, build_grid, empirical_omnigap, max_omnigap, omnigap_table,
                      omniprediction_gap)
from .learners import (IsotronRegressor, MultiIndexModel, OmnitronRegressor, TrainConfig, ideal_omnitron_fit,
                       isotron_fit, omnitron_fit)
from .links import PiecewiseLinearLink, eval_link, invert_link, matching_loss, proper_loss
from .maintainer import BIRPartialMaintainer, SegmentTree
from .pav import PAVRegressor, StepPredictor, pav_fit

__version__ = "0.1.0"
