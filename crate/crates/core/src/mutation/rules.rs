//! Individual mutation strategies.
//!
//! Type rules rewrite a [`FuzzType`]; value rules produce a [`Value`] of a
//! given type, either from fresh randomness or by transferring a value that
//! a similar API was observed with.

use super::similarity::{similarity, softmax_probs};
use super::{MutationConfig, MutationError};
use crate::model::{canonical_signature, Dtype, FuzzType, RuleId, TensorSpec, Value};
use crate::rng::RngStream;
use crate::store::ValueStore;

const PRIMITIVES: [FuzzType; 4] = [FuzzType::Int, FuzzType::Bool, FuzzType::Float, FuzzType::Str];

/// Applies one type-mutation rule chosen uniformly among those applicable
/// to `t`.
///
/// Tuples and lists mutate every mutable element; they are `NotMutable` when
/// no element is.
pub fn type_mutate(
    t: &FuzzType,
    rng: &mut RngStream,
    cfg: &MutationConfig,
) -> Result<(FuzzType, RuleId), MutationError> {
    match t {
        FuzzType::Opaque => Err(MutationError::NotMutable),
        FuzzType::Tensor { rank, dtype } => {
            if rng.coin(0.5) {
                let choices: Vec<usize> = (0..=cfg.max_rank).filter(|n| n != rank).collect();
                let rank = *rng.choose(&choices).expect("max_rank >= 1 leaves a choice");
                Ok((FuzzType::Tensor { rank, dtype: *dtype }, RuleId::TensorDim))
            } else {
                let choices: Vec<Dtype> =
                    Dtype::ALL.into_iter().filter(|d| d != dtype).collect();
                let dtype = *rng.choose(&choices).expect("more than one dtype");
                Ok((FuzzType::Tensor { rank: *rank, dtype }, RuleId::TensorDtype))
            }
        }
        FuzzType::Int | FuzzType::Float | FuzzType::Bool | FuzzType::Str => {
            let choices: Vec<&FuzzType> = PRIMITIVES.iter().filter(|p| *p != t).collect();
            let next = (*rng.choose(&choices).expect("three alternatives")).clone();
            Ok((next, RuleId::PrimType))
        }
        FuzzType::Tuple(elems) => {
            mutate_elems(elems, rng, cfg).map(|e| (FuzzType::Tuple(e), RuleId::TupleType))
        }
        FuzzType::List(elems) => {
            mutate_elems(elems, rng, cfg).map(|e| (FuzzType::List(e), RuleId::ListType))
        }
    }
}

fn mutate_elems(
    elems: &[FuzzType],
    rng: &mut RngStream,
    cfg: &MutationConfig,
) -> Result<Vec<FuzzType>, MutationError> {
    let mut changed = false;
    let mut out = Vec::with_capacity(elems.len());
    for e in elems {
        match type_mutate(e, rng, cfg) {
            Ok((t, _)) => {
                changed = true;
                out.push(t);
            }
            Err(MutationError::NotMutable) => out.push(e.clone()),
            Err(other) => return Err(other),
        }
    }
    if changed {
        Ok(out)
    } else {
        Err(MutationError::NotMutable)
    }
}

/// Produces a random value of type `t`.
///
/// `old` is the slot's previous value; a tensor keeps its shape (Random
/// Tensor Value) only when the old value is a tensor of the same rank,
/// otherwise a fresh shape is drawn (Random Tensor Shape).
pub fn value_rule_rand(
    t: &FuzzType,
    old: Option<&Value>,
    rng: &mut RngStream,
    cfg: &MutationConfig,
) -> Result<(Value, RuleId), MutationError> {
    match t {
        FuzzType::Opaque => Err(MutationError::NotMutable),
        FuzzType::Tensor { rank, dtype } => {
            let same_rank = old
                .and_then(Value::as_tensor)
                .filter(|spec| spec.rank() == *rank);
            match same_rank {
                Some(spec) if rng.coin(0.5) => {
                    let seed = fresh_seed(rng, Some(spec.seed));
                    Ok((
                        Value::Tensor(TensorSpec::new(spec.shape.clone(), *dtype, seed)),
                        RuleId::RandTensorValue,
                    ))
                }
                _ => {
                    let shape = (0..*rank).map(|_| rng.range_usize(1, cfg.max_dim)).collect();
                    let seed = fresh_seed(rng, old.and_then(Value::as_tensor).map(|s| s.seed));
                    Ok((
                        Value::Tensor(TensorSpec::new(shape, *dtype, seed)),
                        RuleId::RandTensorShape,
                    ))
                }
            }
        }
        FuzzType::Int => Ok((Value::int(rng.range_i64(-cfg.max_int, cfg.max_int)), RuleId::RandPrim)),
        FuzzType::Float => Ok((Value::float(rng.standard_normal() * 10.0), RuleId::RandPrim)),
        FuzzType::Bool => Ok((Value::bool(rng.coin(0.5)), RuleId::RandPrim)),
        FuzzType::Str => {
            let len = rng.range_usize(0, cfg.max_str_len);
            let s: String = (0..len).map(|_| (b'a' + rng.below(26) as u8) as char).collect();
            Ok((Value::str(s), RuleId::RandPrim))
        }
        FuzzType::Tuple(elems) => {
            let items = rand_items(elems, old, rng, cfg)?;
            Ok((Value::tuple(items), RuleId::RandTuple))
        }
        FuzzType::List(elems) => {
            let items = rand_items(elems, old, rng, cfg)?;
            Ok((Value::list(items), RuleId::RandList))
        }
    }
}

fn rand_items(
    elems: &[FuzzType],
    old: Option<&Value>,
    rng: &mut RngStream,
    cfg: &MutationConfig,
) -> Result<Vec<Value>, MutationError> {
    let old_items: &[Value] = match old {
        Some(Value::Tuple { items }) | Some(Value::List { items }) => items,
        _ => &[],
    };
    elems
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let prev = old_items.get(i);
            if *t == FuzzType::Opaque {
                // Opaque elements are carried through untouched.
                return Ok(prev.cloned().unwrap_or_else(|| Value::raw("None")));
            }
            value_rule_rand(t, prev, rng, cfg).map(|(v, _)| v)
        })
        .collect()
}

fn fresh_seed(rng: &mut RngStream, avoid: Option<u64>) -> u64 {
    loop {
        let s = rng.next_u64();
        if Some(s) != avoid {
            return s;
        }
    }
}

/// Transfers a value recorded for `arg_name` of type `t` from a similar API.
///
/// Candidate APIs are weighted by the softmax of their signature similarity
/// to `api`; a value is then drawn uniformly from the chosen API. Returns
/// `None` when no other API holds a matching value.
pub fn value_rule_db(
    api: &str,
    t: &FuzzType,
    arg_name: &str,
    store: &ValueStore,
    rng: &mut RngStream,
) -> Option<(Value, RuleId)> {
    let candidates = store.query_arg_candidates(t, arg_name, api);
    if candidates.is_empty() {
        return None;
    }
    let target = store
        .signature(api)
        .map(str::to_owned)
        .unwrap_or_else(|| canonical_signature(api, []));
    let sims: Vec<f64> = candidates
        .iter()
        .map(|(other, _)| similarity(store.signature(other).unwrap_or(other), &target))
        .collect();
    let probs = softmax_probs(&sims).ok()?;
    let (_, values) = candidates[rng.weighted_index(&probs)?];
    let picked = rng.choose(values)?.clone();
    Some(match (t, picked) {
        (FuzzType::Tensor { .. }, Value::Tensor(spec)) => {
            if rng.coin(0.5) {
                let seed = rng.next_u64();
                (
                    Value::Tensor(TensorSpec::new(spec.shape, spec.dtype, seed)),
                    RuleId::DbTensorShape,
                )
            } else {
                (Value::Tensor(spec), RuleId::DbTensorValue)
            }
        }
        (FuzzType::Tuple(_), v) => (v, RuleId::DbTuple),
        (FuzzType::List(_), v) => (v, RuleId::DbList),
        (_, v) => (v, RuleId::DbPrim),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{infer_fuzz_type, Arg, InvocationEntry, Source};

    fn cfg() -> MutationConfig {
        MutationConfig::default()
    }

    #[test]
    fn opaque_is_not_mutable() {
        let mut rng = RngStream::new(1);
        assert!(matches!(
            type_mutate(&FuzzType::Opaque, &mut rng, &cfg()),
            Err(MutationError::NotMutable)
        ));
        assert!(matches!(
            value_rule_rand(&FuzzType::Opaque, None, &mut rng, &cfg()),
            Err(MutationError::NotMutable)
        ));
        assert!(matches!(
            type_mutate(&FuzzType::Tuple(vec![]), &mut rng, &cfg()),
            Err(MutationError::NotMutable)
        ));
    }

    #[test]
    fn random_tensor_value_redraws_seed_only() {
        let old = Value::tensor(vec![2, 3], Dtype::Float32, 1);
        let t = infer_fuzz_type(&old);
        let mut rng = RngStream::new(5);
        let mut seen_value_rule = false;
        for _ in 0..64 {
            let (v, rule) = value_rule_rand(&t, Some(&old), &mut rng, &cfg()).unwrap();
            let spec = v.as_tensor().unwrap();
            assert_eq!(spec.dtype, Dtype::Float32);
            assert_ne!(spec.seed, 1);
            if rule == RuleId::RandTensorValue {
                seen_value_rule = true;
                assert_eq!(spec.shape, vec![2, 3]);
            }
        }
        assert!(seen_value_rule);
    }

    #[test]
    fn random_shape_after_rank_change() {
        let old = Value::tensor(vec![2, 3], Dtype::Float32, 1);
        let t = FuzzType::Tensor {
            rank: 3,
            dtype: Dtype::Float32,
        };
        let mut rng = RngStream::new(6);
        let (v, rule) = value_rule_rand(&t, Some(&old), &mut rng, &cfg()).unwrap();
        assert_eq!(rule, RuleId::RandTensorShape);
        let spec = v.as_tensor().unwrap();
        assert_eq!(spec.rank(), 3);
        assert!(spec.shape.iter().all(|&d| (1..=64).contains(&d)));
    }

    #[test]
    fn bool_primitive_has_two_outcomes() {
        let mut rng = RngStream::new(2);
        let mut seen = [false; 2];
        for _ in 0..100 {
            match value_rule_rand(&FuzzType::Bool, None, &mut rng, &cfg()).unwrap().0 {
                Value::Bool { v } => seen[usize::from(v)] = true,
                other => panic!("unexpected {other:?}"),
            }
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn tuple_rand_keeps_opaque_elements() {
        let old = Value::tuple(vec![Value::raw("<obj>"), Value::int(3)]);
        let t = infer_fuzz_type(&old);
        let mut rng = RngStream::new(3);
        let (v, rule) = value_rule_rand(&t, Some(&old), &mut rng, &cfg()).unwrap();
        assert_eq!(rule, RuleId::RandTuple);
        match v {
            Value::Tuple { items } => {
                assert_eq!(items[0], Value::raw("<obj>"));
                assert!(matches!(items[1], Value::Int { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn db_rule_single_candidate() {
        let mut store = ValueStore::new();
        store.insert(InvocationEntry::new(
            "ns.conv2d",
            Source::Doc,
            vec![Arg::new("padding_mode", Value::str("reflect"))],
        ));
        store.insert(InvocationEntry::new(
            "ns.conv3d",
            Source::Doc,
            vec![Arg::new("padding_mode", Value::str("zeros"))],
        ));
        let mut rng = RngStream::new(11);
        for _ in 0..20 {
            let (v, rule) =
                value_rule_db("ns.conv3d", &FuzzType::Str, "padding_mode", &store, &mut rng).unwrap();
            assert_eq!(v, Value::str("reflect"));
            assert_eq!(rule, RuleId::DbPrim);
        }
        assert!(value_rule_db("ns.conv3d", &FuzzType::Int, "padding_mode", &store, &mut rng).is_none());
        assert!(value_rule_db("x", &FuzzType::Str, "m", &ValueStore::new(), &mut rng).is_none());
    }

    #[test]
    fn db_tensor_rules_adopt_recorded_shape() {
        let mut store = ValueStore::new();
        store.insert(InvocationEntry::new(
            "a",
            Source::Doc,
            vec![Arg::new("x", Value::tensor(vec![4, 7], Dtype::Float32, 99))],
        ));
        let t = FuzzType::Tensor {
            rank: 2,
            dtype: Dtype::Float32,
        };
        let mut rng = RngStream::new(4);
        let mut rules = std::collections::HashSet::new();
        for _ in 0..40 {
            let (v, rule) = value_rule_db("b", &t, "x", &store, &mut rng).unwrap();
            let spec = v.as_tensor().unwrap();
            assert_eq!(spec.shape, vec![4, 7]);
            if rule == RuleId::DbTensorValue {
                assert_eq!(spec.seed, 99);
            }
            rules.insert(rule);
        }
        assert_eq!(rules.len(), 2);
    }
}
