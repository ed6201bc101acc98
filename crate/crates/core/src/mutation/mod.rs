//! Type-aware argument mutation.
//!
//! [`rules`] holds the individual type and value mutation strategies,
//! [`similarity`] the API-similarity weighting used when transferring values
//! between APIs, and [`engine`] the per-entry mutation loop that strings them
//! together.

pub mod engine;
pub mod rules;
pub mod similarity;

pub use engine::{mutate, Application, ExecPlan, Mutant, Mutator};
pub use rules::{type_mutate, value_rule_db, value_rule_rand};
pub use similarity::{levenshtein, similarity, softmax_probs};

use crate::store::StoreError;

#[derive(Debug, Clone, PartialEq)]
pub struct MutationConfig {
    /// Probability that a selected slot first has its type mutated.
    pub p_type_mutation: f64,
    /// Probability of the random value path over the database path.
    pub p_rand_over_db: f64,
    pub max_rank: usize,
    pub max_dim: usize,
    pub max_int: i64,
    pub max_str_len: usize,
    pub per_api_mutants: usize,
}

impl Default for MutationConfig {
    fn default() -> Self {
        Self {
            p_type_mutation: 0.5,
            p_rand_over_db: 0.5,
            max_rank: 6,
            max_dim: 64,
            max_int: 65536,
            max_str_len: 16,
            per_api_mutants: 1000,
        }
    }
}

impl MutationConfig {
    pub fn validate(&self) -> Result<(), MutationError> {
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        if !prob_ok(self.p_type_mutation) || !prob_ok(self.p_rand_over_db) {
            return Err(MutationError::Config(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        if self.max_rank == 0
            || self.max_dim == 0
            || self.max_int <= 0
            || self.max_str_len == 0
            || self.per_api_mutants == 0
        {
            return Err(MutationError::Config("bounds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MutationError {
    #[error("opaque values cannot be mutated")]
    NotMutable,
    #[error("entry for `{0}` has no mutable argument")]
    NothingToMutate(String),
    #[error("softmax over an empty similarity list")]
    EmptyInput,
    #[error("invalid mutation config: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}
