"""Periodic 2-D convolution in spatial (CNN) and spectral (FNO) form.

Submodules:

* :mod:`fnoconv.grids` - index sets and the normalized DFT pair
* :mod:`fnoconv.resample` - spectral padding, Nyquist splitting, resampling
* :mod:`fnoconv.conv` - the two convolution implementations
* :mod:`fnoconv.convert` - exact kernel conversion and gradient scaling
* :mod:`fnoconv.nn` - operator layers, hand-written gradients, models
* :mod:`fnoconv.checkpoint` - text checkpoints
* :mod:`fnoconv.experiments` - IDX data, training, sweeps
* :mod:`fnoconv.cli` - command line
"""

from fnoconv.conv import SpatialKernel, SpectralKernel, conv_spatial, conv_spectral
from fnoconv.convert import cnn_to_fno, fno_to_cnn, grad_convert_check
from fnoconv.grids import dft, freq_index_set, idft, is_hermitian
from fnoconv.resample import bilinear_resample, nyquist_merge, nyquist_split, trig_resample

__version__ = "0.1.0"

__all__ = [
    "SpatialKernel",
    "SpectralKernel",
    "bilinear_resample",
    "cnn_to_fno",
    "conv_spatial",
    "conv_spectral",
    "dft",
    "fno_to_cnn",
    "freq_index_set",
    "grad_convert_check",
    "idft",
    "is_hermitian",
    "nyquist_merge",
    "nyquist_split",
    "trig_resample",
]
