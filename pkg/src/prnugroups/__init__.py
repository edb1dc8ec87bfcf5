"""Camera source grouping from photo-response non-uniformity (PRNU) noise."""
from .calibration import LabeledPattern, ThresholdTable, calibrate, lookup, roc_stats
from .clustering import (ClusterConfig, ClusterResult, Group, cluster_block,
                         cluster_database, match_against, merge_blocks)
from .errors import PrnuError
from .filters import (FilterConfig, FilterKind, SuppressStrategy, extract_noise,
                      extract_noise_fourth_order, extract_noise_second_order,
                      extract_noise_wavelet, extract_pattern, normalize,
                      suppress_periodic)
from .fingerprint import (Fingerprint, Rotation, average_into, best_rotation_corr,
                          corr2, load_fingerprint, merge_fingerprints, rotate,
                          save_fingerprint)
from .imaging import center_crop, load_image, to_gray_sum

__version__ = "0.1.0"
