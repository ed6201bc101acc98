use std::collections::HashMap;

use proptest::prelude::*;

use tracefuzz::harness::{OutputDigest, Outcome, Status};
use tracefuzz::model::{
    entry_fingerprint, infer_fuzz_type, Arg, BackendId, Dtype, FuzzType, InvocationEntry, Source, Value,
};
use tracefuzz::mutation::{similarity, softmax_probs, MutationConfig, Mutator};
use tracefuzz::oracle::{differential_verdict, OracleConfig, Verdict};
use tracefuzz::reference::BUNDLED_CORPUS;
use tracefuzz::rng::RngStream;
use tracefuzz::store::{parse_trace_str, ValueStore};

fn dtype() -> impl Strategy<Value = Dtype> {
    prop::sample::select(Dtype::ALL.to_vec())
}

fn value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        (prop::collection::vec(1usize..9, 0..4), dtype(), any::<u64>())
            .prop_map(|(s, d, seed)| Value::tensor(s, d, seed)),
        any::<i64>().prop_map(Value::int),
        prop_oneof![any::<f64>(), Just(f64::NAN), Just(f64::INFINITY), Just(-0.0)].prop_map(Value::float),
        any::<bool>().prop_map(Value::bool),
        "[a-z_\"\\\\ é]{0,8}".prop_map(Value::str),
        "[ -~]{0,12}".prop_map(Value::raw),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::tuple),
            prop::collection::vec(inner, 0..4).prop_map(Value::list),
        ]
    })
}

fn entry() -> impl Strategy<Value = InvocationEntry> {
    (
        prop::sample::select(vec!["ns.a", "ns.b", "ns.conv2d", "ns.conv3d"]),
        prop::collection::vec(value(), 1..5),
    )
        .prop_map(|(api, vals)| {
            let args = vals
                .into_iter()
                .enumerate()
                .map(|(i, v)| Arg::new(["x", "y", "size", "mode", "dim"][i % 5], v))
                .collect();
            InvocationEntry::new(api, Source::Test, args)
        })
}

/// Same value with tensor seeds cleared; NaN floats made comparable.
fn content(v: &Value) -> String {
    match v {
        Value::Tensor(t) => format!("T{:?}{}", t.shape, t.dtype),
        Value::Float { v } => format!("F{:?}", v.to_bits()),
        Value::Tuple { items } => format!("({})", items.iter().map(content).collect::<Vec<_>>().join(",")),
        Value::List { items } => format!("[{}]", items.iter().map(content).collect::<Vec<_>>().join(",")),
        other => serde_json::to_string(other).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn wire_round_trip(v in value()) {
        let back: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        prop_assert_eq!(infer_fuzz_type(&back), infer_fuzz_type(&v));
        prop_assert_eq!(content(&back), content(&v));
    }

    #[test]
    fn entry_round_trip_keeps_fingerprint(e in entry()) {
        let back: InvocationEntry = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        prop_assert_eq!(entry_fingerprint(&back), entry_fingerprint(&e));
    }

    #[test]
    fn inference_is_deterministic_and_rank_matches(v in value()) {
        prop_assert_eq!(infer_fuzz_type(&v), infer_fuzz_type(&v.clone()));
        if let (Value::Tensor(t), FuzzType::Tensor { rank, .. }) = (&v, infer_fuzz_type(&v)) {
            prop_assert_eq!(t.shape.len(), rank);
        }
    }

    #[test]
    fn fingerprint_ignores_tensor_seeds(e in entry(), salt in any::<u64>()) {
        fn reseed(v: &mut Value, salt: u64) {
            match v {
                Value::Tensor(t) => t.seed ^= salt,
                Value::Tuple { items } | Value::List { items } => items.iter_mut().for_each(|i| reseed(i, salt)),
                _ => {}
            }
        }
        let mut other = e.clone();
        other.args.iter_mut().for_each(|a| reseed(&mut a.value, salt));
        prop_assert_eq!(entry_fingerprint(&other), entry_fingerprint(&e));
    }

    #[test]
    fn similarity_is_symmetric_bounded_reflexive(a in "[a-z0-9_.(),]{0,24}", b in "[a-z0-9_.(),]{0,24}") {
        let s = similarity(&a, &b);
        prop_assert_eq!(s, similarity(&b, &a));
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(similarity(&a, &a), 1.0);
    }

    #[test]
    fn softmax_is_a_monotone_distribution(sims in prop::collection::vec(0.0f64..=1.0, 1..16)) {
        let p = softmax_probs(&sims).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|&x| x > 0.0));
        for i in 0..sims.len() {
            for j in 0..sims.len() {
                if sims[i] > sims[j] {
                    prop_assert!(p[i] > p[j]);
                }
            }
        }
    }

    #[test]
    fn differential_is_reflexive_and_monotone(
        sum in -1e6f64..1e6, delta in -10f64..10.0,
        rtol in 0.0f64..1e-2, atol in 0.0f64..1e-2, grow in 1.0f64..100.0,
    ) {
        let digest = |s: f64| OutputDigest { shape: vec![4], dtype: Dtype::Float32, all_finite: true, sum: s, abs_sum: s.abs(), sample: vec![s / 4.0; 4] };
        let out = |name: &str, s: f64| Outcome { backend: BackendId::new(name, "m"), status: Status::Ok, output: Some(digest(s)), elapsed_ms: vec![1.0] };
        let tight = OracleConfig { rtol, atol, ..OracleConfig::default() };
        let loose = OracleConfig { rtol: rtol * grow, atol: atol * grow, ..OracleConfig::default() };
        prop_assert_eq!(differential_verdict(&[out("a", sum), out("b", sum)], &tight).unwrap(), Verdict::Pass);
        let pair = [out("a", sum + delta), out("b", sum)];
        if differential_verdict(&pair, &tight).unwrap() == Verdict::Pass {
            prop_assert_eq!(differential_verdict(&pair, &loose).unwrap(), Verdict::Pass);
        }
    }

    #[test]
    fn store_persistence_and_index_consistency(entries in prop::collection::vec(entry(), 0..24)) {
        let mut store = ValueStore::new();
        for e in &entries {
            store.insert(e.clone());
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tfs");
        store.save(&path).unwrap();
        let loaded = ValueStore::load(&path).unwrap();
        prop_assert_eq!(loaded.stats(), store.stats());

        let again = store.ingest(entries.iter().cloned().map(Ok));
        prop_assert_eq!(again.entries_added, 0);

        for e in &entries {
            for a in &e.args {
                let t = infer_fuzz_type(&a.value);
                let rows = store.query_arg_candidates(&t, &a.name, "");
                let flat = |rows: &[(&str, &[Value])]| -> Vec<String> {
                    rows.iter().flat_map(|(api, vs)| vs.iter().map(move |v| format!("{api}:{}", content(v)))).collect()
                };
                prop_assert_eq!(flat(&rows), flat(&loaded.query_arg_candidates(&t, &a.name, "")));
                for (api, values) in rows {
                    for v in values {
                        prop_assert_eq!(infer_fuzz_type(v), t.clone());
                        prop_assert!(store
                            .entries(api)
                            .iter()
                            .any(|s| s.arg(&a.name).map(content) == Some(content(v))));
                    }
                }
            }
        }
    }

    #[test]
    fn untyped_slot_rewrites_keep_their_type(seed in any::<u64>(), pick in 0usize..21) {
        let mut store = ValueStore::new();
        store.ingest(parse_trace_str(BUNDLED_CORPUS));
        let all: Vec<&InvocationEntry> = store.all_entries().collect();
        let seed_entry = all[pick % all.len()].clone();
        let cfg = MutationConfig::default();
        let m = Mutator::new(&store, &cfg).mutate_entry(&seed_entry, &mut RngStream::new(seed)).unwrap();
        prop_assert!((1..=seed_entry.args.len()).contains(&m.num_mutation));
        let mut typed: HashMap<usize, bool> = HashMap::new();
        for a in &m.applications {
            *typed.entry(a.index).or_default() |= a.type_rule.is_some();
        }
        for (i, any_type_rule) in typed {
            if !any_type_rule {
                prop_assert_eq!(infer_fuzz_type(&m.entry.args[i].value), infer_fuzz_type(&seed_entry.args[i].value));
            }
        }
    }
}

#[test]
fn precision_order_is_a_strict_partial_order() {
    for a in Dtype::ALL {
        assert!(!a.less_precise_than(a));
        for b in Dtype::ALL {
            assert!(!(a.less_precise_than(b) && b.less_precise_than(a)));
            for c in Dtype::ALL {
                if a.less_precise_than(b) && b.less_precise_than(c) {
                    assert!(a.less_precise_than(c));
                }
            }
        }
    }
    assert!(!Dtype::Float16.less_precise_than(Dtype::Bfloat16));
    assert!(!Dtype::Bfloat16.less_precise_than(Dtype::Float16));
}

/// 10k randomized entries: fingerprints collide exactly when the
/// seed-free content is equal.
#[test]
fn no_unintended_fingerprint_collisions() {
    let mut rng = RngStream::new(2024);
    let mut by_fp = HashMap::new();
    for _ in 0..10_000 {
        let mut args = vec![Arg::new("x", Value::tensor(vec![rng.range_usize(1, 4)], Dtype::Float32, rng.next_u64()))];
        for name in ["window", "stride", "dim"] {
            args.push(Arg::new(name, Value::int(rng.range_i64(-50, 50))));
        }
        let e = InvocationEntry::new("rt.pool1d", Source::Test, args);
        let key: Vec<String> = e.args.iter().map(|a| content(&a.value)).collect();
        let prev = by_fp.insert(entry_fingerprint(&e), key.clone());
        if let Some(prev) = prev {
            assert_eq!(prev, key, "distinct entries share a fingerprint");
        }
    }
    assert!(by_fp.len() > 9_000);
}

fn within_3_sigma(hits: usize, n: usize, p: f64) -> bool {
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    (hits as f64 - n as f64 * p).abs() <= 3.0 * sigma
}

#[test]
fn sample_entry_is_uniform() {
    let mut store = ValueStore::new();
    for v in [1, 2] {
        store.insert(InvocationEntry::new("f", Source::Doc, vec![Arg::new("a", Value::int(v))]));
    }
    let mut rng = RngStream::new(77);
    let n = 10_000;
    let first = (0..n)
        .filter(|_| store.sample_entry("f", &mut rng).unwrap().args[0].value == Value::int(1))
        .count();
    assert!(within_3_sigma(first, n, 0.5), "{first}/{n}");
}

#[test]
fn weighted_draws_follow_softmax() {
    let probs = softmax_probs(&[0.8, 0.6]).unwrap();
    let mut rng = RngStream::new(5);
    let n = 10_000;
    let first = (0..n).filter(|_| rng.weighted_index(&probs) == Some(0)).count();
    assert!(within_3_sigma(first, n, probs[0]), "{first}/{n}");
}
