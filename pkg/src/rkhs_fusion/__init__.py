"""Two-agent regression in finite-dimensional kernel spaces with fusion by
reconstructed data."""

from .agent import AgentSpace, AgentState, DataPoint, local_estimate
from .domain import Domain
from .errors import (Diverged, InsufficientRank, MaxIterationsExceeded, MixedSpace,
                     ParseError, RkhsFusionError, SingularSystem, ValidationError,
                     WindowNotFilled)
from .fusion import (FusionSpace, build_download_operator, build_fusion_space, download,
                     download_matrix_form, download_normalization, fuse, reconstruct_data,
                     upload)
from .operators import (agent_update_matrix, fixed_point_probe, fusion_operator_norm,
                        multi_agent_operator_norm, norm_trace, schur_report, stage_operator)
from .rkhs import (AnchorSet, FeatureKernel, FeatureSet, RkhsFunction, SumKernel, constant,
                   exponential, gram, inner_product, monomial, parse_feature)
from .runtime import (GeneratedSource, RecordedSource, RunConfig, Schedule, assemble_system,
                      run, window_statistic)

__version__ = "0.1.0"
