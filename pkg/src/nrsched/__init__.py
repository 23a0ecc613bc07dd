"""Double-DQN radio resource scheduling for a single 5G NR downlink cell."""

import os

# Every dense operation in this package is small (vectors of ~8, matrices up
# to 128x128); BLAS worker threads only add spin-wait overhead for these
# shapes. Defaults only: respected environment overrides win, and the
# setting takes effect just when this package is imported before numpy.
for _var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
del _var, os

__version__ = "0.1.0"
