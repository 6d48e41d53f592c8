mod chain;
mod dirichlet;
mod suite;
mod verify;

pub use chain::{solve_hitting, FiniteChain, HittingSolution, KilledChain};
pub use dirichlet::{
    canonical_inward_path, canonical_outward_path, cut_conductance, dirichlet_bounds, dirichlet_energy, inward_terms,
    outward_terms, DirichletTerms,
};
pub use suite::{
    failures_named, instance, monte_carlo_consistency, run_dirichlet_suite, run_suite, DirichletSuiteConfig, Instance,
    McComparison, SuiteConfig,
};
pub use verify::{
    decomposition_terms, mixing_deviation, variance_terms, verify_mixing_lemma, verify_moment_identities,
    verify_second_moment_decomposition, verify_variance_bound, verify_variance_bound_at, Check, CheckKind,
    DecompositionTerms, Report, VarianceTerms, EQUALITY_TOL,
};
