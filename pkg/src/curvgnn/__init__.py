"""Graph neural networks on constant-curvature manifolds, with exact
Jacobian sensitivity analysis and curvature-dependent bound verification."""

from .bounds import (
    BoundReport,
    CurvatureBounds,
    beta,
    beta_certified,
    binary_tree_condition,
    intrinsic_jacobian_norm,
    lemma2_bounds,
    theorem1_bound,
    verify_differential_bounds,
    verify_theorem1,
)
from .graph import (
    Graph,
    adjacency_power_entry,
    generate,
    gromov_delta,
    load_edge_list,
    normalized_adjacency,
    pairs_at_distance,
)
from .layers import (
    Activation,
    ForwardTrace,
    ModelConfig,
    forward,
    init_weights,
    random_unit_features,
    rgnn_layer,
    spectral_norm,
)
from .manifold import (
    Euclidean,
    Manifold,
    PoincareBall,
    Sphere,
    clamp_to_injectivity,
    distance,
    exp_map,
    injectivity_radius,
    log_map,
    make_manifold,
    metric_norm,
    sn_kappa,
)
from .sensitivity import (
    JacobianBlock,
    SensitivityReport,
    jacobian,
    jacobian_blocks,
    jacobian_norm,
    sensitivity_protocol,
)
from .training import (
    DivergenceError,
    EpochLog,
    TrainConfig,
    edge_probability,
    split_edges,
    train,
)

__version__ = "0.1.0"
