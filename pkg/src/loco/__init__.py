"""Low-rank compositional orthogonal rotations for fine-tuning.

Special-orthogonal transforms are built from low-rank skew-symmetric
factors through the Cayley transform; a small-core identity turns the
dense inversion into a 2r x 2r one, so rotations construct in
O(d r^2 + r^3) and apply to batches in O(N d r) without ever forming a
d x d matrix.  Chains of such rotations compose exactly or through a
certified first-order parallel form, and a frozen linear map plus a
trainable chain gives a fine-tuning adapter with analytic gradients,
test-time temperature scaling, and weight merging.
"""

from .adapter import (DemoResult, FactorGradients, LocoAdapter, mse_loss,
                      rotation_recovery_demo, temperature_sweep,
                      train_adapter)
from .baselines import (BlockDiagonalRotation, HouseholderChain,
                        householder_apply, materialize_blocks,
                        materialize_householder, oft_apply,
                        random_block_rotation, random_householder)
from .bench import BenchRecord, run_grid, write_bench_csv
from .cayley import (WoodburyCore, apply_rotation, cayley_naive,
                     cayley_woodbury, materialize, transpose_core)
from .chain import (MODE_EXACT, MODE_FIRST_ORDER, DeviationReport,
                    RotationChain, build_cores, chain_exact,
                    chain_first_order, deviation_report,
                    factors_with_update_norm, materialize_chain,
                    norm_error_sweep, random_chain, scaled_random_factors)
from .errors import (BlockMismatch, CheckpointFormatError, ConfigUnsupported,
                     DimensionMismatch, DimensionTooLarge, InvalidGrid,
                     InvalidRank, LocoError, NotSkewSymmetric, SingularMatrix,
                     ZeroReflector)
from .estimators import LowRankRotation, OrthogonalAdapterRegressor
from .linalg import (as_matrix, frobenius_norm, get_num_threads, lu_det,
                     lu_invert, matmul, set_num_threads, track_allocations)
from .rng import Rng, rand_gaussian
from .skew import LowRankSkewFactors, auxiliary_xy, build_skew, init_factors

__version__ = "0.1.0"

__all__ = [
    "BenchRecord", "BlockDiagonalRotation", "BlockMismatch",
    "CheckpointFormatError", "ConfigUnsupported", "DemoResult",
    "DeviationReport", "DimensionMismatch", "DimensionTooLarge",
    "FactorGradients", "HouseholderChain", "InvalidGrid", "InvalidRank",
    "LocoAdapter", "LocoError", "LowRankRotation", "LowRankSkewFactors",
    "MODE_EXACT", "MODE_FIRST_ORDER", "NotSkewSymmetric",
    "OrthogonalAdapterRegressor", "Rng", "RotationChain", "SingularMatrix",
    "WoodburyCore", "ZeroReflector", "apply_rotation", "as_matrix",
    "auxiliary_xy", "build_cores", "build_skew", "cayley_naive",
    "cayley_woodbury", "chain_exact", "chain_first_order",
    "deviation_report", "factors_with_update_norm", "frobenius_norm",
    "get_num_threads", "householder_apply", "init_factors", "lu_det",
    "lu_invert", "materialize", "materialize_blocks", "materialize_chain",
    "materialize_householder", "matmul", "mse_loss", "norm_error_sweep",
    "oft_apply", "rand_gaussian", "random_block_rotation", "random_chain",
    "random_householder", "rotation_recovery_demo", "run_grid",
    "scaled_random_factors", "set_num_threads", "temperature_sweep",
    "track_allocations", "train_adapter", "transpose_core", "write_bench_csv",
]
