from PySubstructuring.decomposition import (
    Decomposition,
    build_three_component,
    build_two_component,
    masked_operator,
    verify_partition,
)
from PySubstructuring.diffusion_operator import (
    DiffusionOperator,
    OperatorExpression,
    apply,
    assemble_diffusion,
    energy_norm,
    solve_spd,
    spectral_bound_check,
)
from PySubstructuring.grid import Grid, GridFunction, build_grid, inner_product, sample
from PySubstructuring.harness import (
    ExperimentConfig,
    convergence_study,
    exact_solution,
    run_experiment,
)
from PySubstructuring.hyperbolic import (
    HyperbolicState,
    init_second_level,
    step_regularized_hyperbolic,
    step_threelevel_weighted,
)
from PySubstructuring.parabolic import (
    ParabolicState,
    SchemeConfig,
    step,
    step_componentwise,
    step_componentwise_symmetrized,
    step_factorized,
    step_regularized,
    step_weighted,
)
from PySubstructuring.stability import (
    DenseOperator,
    EnergyFunctional,
    certify,
    dense_matrix,
    evaluate_energy,
    symmetrized_operators,
    transition_operator,
)
