//! The per-entry mutation loop.
//!
//! A mutant starts from an entry sampled from the API value space. Between 1
//! and `argNum` argument slots are drawn (with replacement); each drawn slot
//! optionally gets its type mutated, then receives a new value from either
//! the random rules or the database-transfer rules.

use super::rules::{type_mutate, value_rule_db, value_rule_rand};
use super::{MutationConfig, MutationError};
use crate::model::{infer_fuzz_type, BackendId, FuzzType, InvocationEntry, RuleId, Source, TestCase};
use crate::rng::RngStream;
use crate::store::ValueStore;

/// Redraws allowed when the drawn slot holds an opaque value.
const OPAQUE_RETRIES: usize = 8;

/// One slot rewrite.
#[derive(Debug, Clone, PartialEq)]
pub struct Application {
    pub index: usize,
    pub name: String,
    pub type_rule: Option<RuleId>,
    pub value_rule: RuleId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mutant {
    pub entry: InvocationEntry,
    /// The `numMutation` drawn for this mutant.
    pub num_mutation: usize,
    pub applications: Vec<Application>,
}

impl Mutant {
    pub fn lineage(&self) -> Vec<RuleId> {
        self.applications
            .iter()
            .flat_map(|a| a.type_rule.into_iter().chain(std::iter::once(a.value_rule)))
            .collect()
    }
}

/// Where and how a test case will be executed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecPlan {
    pub backends: Vec<BackendId>,
    pub timing_reps: u32,
}

pub struct Mutator<'a> {
    store: &'a ValueStore,
    cfg: &'a MutationConfig,
}

impl<'a> Mutator<'a> {
    pub fn new(store: &'a ValueStore, cfg: &'a MutationConfig) -> Self {
        Self { store, cfg }
    }

    /// Samples a seed entry of `api` and mutates it.
    pub fn mutate(&self, api: &str, rng: &mut RngStream) -> Result<Mutant, MutationError> {
        let seed = self.store.sample_entry(api, rng)?;
        self.mutate_entry(seed, rng)
    }

    pub fn mutate_entry(
        &self,
        seed: &InvocationEntry,
        rng: &mut RngStream,
    ) -> Result<Mutant, MutationError> {
        let arg_num = seed.args.len();
        let mutable = |e: &InvocationEntry, i: usize| infer_fuzz_type(&e.args[i].value) != FuzzType::Opaque;
        if !(0..arg_num).any(|i| mutable(seed, i)) {
            return Err(MutationError::NothingToMutate(seed.api.clone()));
        }

        let mut entry = seed.clone();
        entry.source = Source::Mutant;
        let num_mutation = rng.range_usize(1, arg_num);
        let mut applications = Vec::with_capacity(num_mutation);

        for _ in 0..num_mutation {
            let mut index = rng.below(arg_num);
            let mut retries = 0;
            while !mutable(&entry, index) && retries < OPAQUE_RETRIES {
                index = rng.below(arg_num);
                retries += 1;
            }
            if !mutable(&entry, index) {
                continue;
            }

            let name = entry.args[index].name.clone();
            let old = entry.args[index].value.clone();
            let mut arg_type = infer_fuzz_type(&old);

            let mut type_rule = None;
            if rng.coin(self.cfg.p_type_mutation) {
                match type_mutate(&arg_type, rng, self.cfg) {
                    Ok((t, rule)) => {
                        arg_type = t;
                        type_rule = Some(rule);
                    }
                    Err(MutationError::NotMutable) => {}
                    Err(e) => return Err(e),
                }
            }

            let (value, value_rule) = if rng.coin(self.cfg.p_rand_over_db) {
                value_rule_rand(&arg_type, Some(&old), rng, self.cfg)?
            } else {
                match value_rule_db(&entry.api, &arg_type, &name, self.store, rng) {
                    Some(hit) => hit,
                    None => value_rule_rand(&arg_type, Some(&old), rng, self.cfg)?,
                }
            };

            entry.args[index].value = value;
            applications.push(Application {
                index,
                name,
                type_rule,
                value_rule,
            });
        }

        Ok(Mutant {
            entry,
            num_mutation,
            applications,
        })
    }
}

/// Builds one test case for `api`. The case records `rng`'s seed so it can
/// be regenerated.
pub fn mutate(
    api: &str,
    store: &ValueStore,
    cfg: &MutationConfig,
    rng: &mut RngStream,
    plan: &ExecPlan,
) -> Result<TestCase, MutationError> {
    let seed = rng.seed();
    let mutant = Mutator::new(store, cfg).mutate(api, rng)?;
    Ok(TestCase {
        lineage: mutant.lineage(),
        entry: mutant.entry,
        seed,
        backends: plan.backends.clone(),
        timing_reps: plan.timing_reps,
    })
}
