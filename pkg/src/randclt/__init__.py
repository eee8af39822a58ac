"""Single-path central limit constructions on bit streams."""

from randclt.bitsource import PRNG_ID, SourceSpec, open_stream
from randclt.sampling import BlockScheme, block_bounds, next_sample, sample_run
from randclt.moments import (
    MomentTable,
    brute_force_moment,
    exact_rademacher_moment,
    normal_moment,
    scaled_block_moment,
)
from randclt.cdf import EmpiricalCDF, ks_distance, phi, pointwise_error

__version__ = "0.1.0"
