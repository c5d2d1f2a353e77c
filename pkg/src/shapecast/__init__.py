"""Shape-preserving forecasting for stationary functional time series.

Curves are split into amplitude and phase by elastic registration; phase
is modeled by a hidden-Markov state space over prototype warpings, and
amplitude by a switching-coefficient autoregression on functional
principal component scores. The two one-step predictions are recomposed,
which keeps the common pattern of the series intact.
"""

__version__ = "0.1.0"

from .curves import (
    BSplineBasis,
    Curve,
    Grid,
    bspline_expand,
    differentiate,
    inner_product,
    l2_distance,
    smooth_to_curve,
)
from .registration import (
    RegistrationResult,
    Srsf,
    WarpingFunction,
    align_pair,
    amplitude_distance,
    compose,
    fr_distance,
    invert_warping,
    register_sample,
    srsf_of_function,
    srsf_of_warping,
    warping_of_srsf,
)
from .warp_model import (
    MisclassOracleInput,
    Prototypes,
    StateChain,
    TransitionMatrix,
    combine_states,
    kmeans_scores,
    ls_transition,
    oracle_estimated_transition,
    predict_warp_indicator,
    predict_warping,
    project_stochastic,
    spherical_kmeans,
)
from .amplitude_model import (
    AoModel,
    FfpeSelection,
    FpcaModel,
    SwitchingVarModel,
    ao_predict,
    ffpe_modified,
    ffpe_standard,
    fit_ao,
    fit_switching_var,
    fpca,
    predict_scores_binary,
    predict_scores_weighted,
    select_order,
)
from .pipeline import (
    PredictionReport,
    SpModel,
    SpModelConfig,
    fit_sp,
    mc_cross_validate,
    rolling_evaluate,
    sp_fit_predict,
)
from .simulate import (
    Setup1Config,
    Setup2Config,
    gen_markov_states,
    gen_random_warp,
    gen_setup1,
    gen_setup2,
    run_experiment,
)
