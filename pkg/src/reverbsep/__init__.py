"""Objectives and simulation tools for reverberant speech separation.

Modules
-------
signal
    ``Waveform`` and the vector / convolution primitives.
rir
    Image-method room impulse responses and the direct/late split.
metrics
    SNR, SI-SDR, alpha-SNR, alpha-SI-SDR, TSNR and TSI-SDR.
losses
    Separation loss, the auxiliary-autoencoding (A2T) loss, PIT and gradients.
contour
    Equal-valued contour exemplars for SNR and SI-SDR.
mixsim
    Seeded two-speaker noisy reverberant scenes.
toytrain
    A linear FIR separator trained by gradient descent.
experiment, cli
    Configuration, alpha sweeps and the ``reverbsep`` command.
"""

from .errors import *  # noqa: F401,F403
from .signal import Waveform, convolve_full, dot, energy, rescale_to_relative_snr, shift
from .metrics import (
    MetricValue,
    alpha_si_sdr,
    alpha_snr,
    si_sdr,
    si_sdr_cosine_form,
    snr,
    tsi_sdr,
    tsnr,
)
from .losses import LossBreakdown, LossConfig, a2t_loss, loss_gradient, separation_loss
from .rir import RirDecomposition, RirFilter, RoomSpec, decompose, render, simulate_rir

__version__ = "0.1.0"
