"""Weighted rectangular means of double sequences.

Transforms, growth classification of weight systems, finite-window
oscillation conditions, and a consistency harness for the associated
limit theorems.
"""

from .errors import (
    HorizonError,
    MonotonicityError,
    NonFiniteValueError,
    PrefixOverflowError,
    ResourceLimitError,
    ScalarKindError,
    TauberkitError,
    WeightDomainError,
)
from .sequences import (
    DoubleSequence,
    Grid,
    ScalarKind,
    WeightSequence,
    additive_convergent,
    alternating,
    array_sequence,
    complex_convergent,
    constant,
    corpus_sequence,
    corpus_weight,
    delta01,
    delta10,
    eval_grid,
    geometric,
    harmonic,
    ones,
    paper_unbounded,
    power,
    separable_convergent,
    sequence_names,
    weight_names,
    wobble,
)
from .transform import (
    MeanField,
    RegularityReport,
    export_grid_csv,
    general_mean,
    regularity_diagnostic,
    sigma_single,
    weighted_mean_field,
)
from .variation import (
    VariationClass,
    VariationKind,
    classification_report,
    classify,
    classify_adaptive,
    estimate_rv_index,
    lemma23_check,
    ratio_profile,
)
from .oscillation import (
    DecisionProfile,
    LimitEstimate,
    OscillationFunctionals,
    WindowDirection,
    WindowParams,
    backward_functionals,
    backward_window_lower_index,
    build_bound_profile,
    build_window_profile,
    decomposition_margin,
    empirical_limit,
    evaluate_functionals,
    export_profiles_csv,
    export_samples_csv,
    hardy_stat,
    landau_stat,
    profile_samples,
    sd_field_components,
    sd_functional_P,
    sd_functional_Q,
    sd_functional_both,
    sd_functional_strong_P,
    sd_functional_strong_Q,
    sd_both_backward,
    sd_P_backward,
    sd_Q_backward,
    sd_strong_P_backward,
    sd_strong_Q_backward,
    so_functional_P,
    so_functional_Q,
    so_functional_both,
    so_functional_strong_P,
    so_functional_strong_Q,
    so_both_backward,
    so_P_backward,
    so_Q_backward,
    so_strong_P_backward,
    so_strong_Q_backward,
    window_functional_names,
    window_upper_index,
)
from .harness import (
    HarnessConfig,
    LemmaDecomposition,
    ProofInequality,
    TauberianReport,
    Theorem,
    Verdict,
    choose_mu,
    choose_mu_backward,
    lemma_backward,
    lemma_forward,
    lemma_residual_suite,
    proof_inequality_backward,
    proof_inequality_forward,
    report_json,
    verify_theorem,
)

__version__ = "0.1.0"
