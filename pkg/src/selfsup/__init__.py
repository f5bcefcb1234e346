"""Self-supervised calibration of denoisers through J-invariant masking."""

from .calibrate import (CalibrationCurve, check_loss_decomposition, mse, optimal_mixing, psnr,
                        rescale_to_moments, select_best, self_supervised_loss, sweep)
from .denoise import (MedianRadius, NlmCutoff, WaveletThreshold, haar_wavelet_denoise, median_filter,
                      nl_means)
from .grid import Partition, gather, partition_grid, partition_random, partition_singletons, scatter
from .jinv import (InterpolateNeighbors, JInvariantDenoiser, RandomUniform, evaluate_j_invariant,
                   evaluate_single_J, interpolate_neighbors, verify_j_invariance)
from .kernels import BACKEND
from .noise import (Bernoulli, CauchyAdditive, Composite, GainField, Gaussian, Poisson, apply_noise,
                    noise_variance)

__version__ = "0.1.0"
