parabolic_schemes = [
    "weighted",
    "factorized",
    "factorized_commuted",
    "componentwise",
    "componentwise_symmetrized",
    "regularized",
]

hyperbolic_schemes = ["weighted", "regularized"]

# schemes whose threshold is sigma >= 1/2; regularized uses p/2
half_threshold_schemes = [
    "weighted",
    "factorized",
    "factorized_commuted",
    "componentwise",
    "componentwise_symmetrized",
]

rhs_sampling_rules = ["weighted", "start", "mid", "end"]

default_rhs_sampling = {
    "weighted": "weighted",
    "factorized": "weighted",
    "factorized_commuted": "weighted",
    "componentwise": "end",
    "componentwise_symmetrized": "end",
    "regularized": "end",
}

splittings = ["two", "three", "three-overlap"]

problems = ["parabolic", "hyperbolic"]

study_modes = ["time", "space", "both", "subdomains"]

energy_kinds = [
    "d_parabolic",
    "b2_a",
    "s_hyperbolic_weighted",
    "s_hyperbolic_regularized",
    "a_norm",
]

series_columns = ["n", "t", "error_l2", "error_A", "energy", "bound"]

study_columns = ["level", "error_at_T", "observed_order", "status"]

DENSE_NODE_CAP = 4096
