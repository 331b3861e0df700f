"""Online change-point detection with NEWMA, its baselines and random-feature moments."""

__version__ = "0.1.0"

from .calibration import (
    auto_calibrate,
    choose_forgetting_factors,
    choose_num_features,
    detection_bounds,
    solve_lambda,
    window_decomposition,
    window_size,
)
from .detectors import Ewma, Newma, NewmaConfig, ScanB, SlidingWindow, StepResult, iter_stream, run_stream
from .errors import (
    ConfigurationError,
    DegenerateBandwidthError,
    InputError,
    NewmaError,
    NumericalError,
    ResourceLimitError,
    UnsupportedOperationError,
)
from .feature_map import FeatureMap, FeatureMapSpec, build_feature_map, kernel_estimate, median_trick_bandwidth
from .thresholding import AdaptiveThreshold, FixedThreshold, parse_threshold
