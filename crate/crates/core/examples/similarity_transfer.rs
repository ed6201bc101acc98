//! Borrowing a value recorded for a same-named argument of a similar API.
//!
//! A store knows `padding_mode = "reflect"` only from a conv2d-like API.
//! Mutating the conv3d-like API through the database path picks it up,
//! weighted by signature similarity.
//!
//! ```text
//! cargo run --example similarity_transfer
//! ```

use tracefuzz::model::{canonical_signature, Arg, FuzzType, InvocationEntry, Source, Value};
use tracefuzz::mutation::{similarity, softmax_probs, value_rule_db};
use tracefuzz::rng::RngStream;
use tracefuzz::store::ValueStore;

fn conv(api: &str, mode: &str, kernel: i64) -> InvocationEntry {
    InvocationEntry::new(
        api,
        Source::Doc,
        vec![
            Arg::new("in_channels", Value::int(16)),
            Arg::new("out_channels", Value::int(33)),
            Arg::new("kernel_size", Value::int(kernel)),
            Arg::new("padding_mode", Value::str(mode)),
        ],
    )
}

fn main() {
    let mut store = ValueStore::new();
    store.insert(conv("nn.conv2d", "reflect", 3));
    store.insert(conv("nn.conv3d", "zeros", 3));
    store.insert(InvocationEntry::new(
        "io.open",
        Source::Test,
        vec![Arg::new("padding_mode", Value::str("circular"))],
    ));

    let target = store.signature("nn.conv3d").unwrap().to_string();
    let mut sims = Vec::new();
    for (api, values) in store.query_arg_candidates(&FuzzType::Str, "padding_mode", "nn.conv3d") {
        let s = similarity(&target, store.signature(api).unwrap());
        println!("{api:<10} sim={s:.4} values={values:?}");
        sims.push(s);
    }
    let probs = softmax_probs(&sims).unwrap();
    println!("pick probabilities: {probs:.4?}\n");

    let mut rng = RngStream::new(1);
    let mut reflect = 0;
    let draws = 2000;
    for _ in 0..draws {
        let (v, _) = value_rule_db("nn.conv3d", &FuzzType::Str, "padding_mode", &store, &mut rng).unwrap();
        reflect += usize::from(v == Value::str("reflect"));
    }
    println!("`reflect` transferred in {reflect}/{draws} database draws");

    println!(
        "\nsimilarity(\"conv2d\", \"conv3d\") = {:.4}",
        similarity("conv2d", "conv3d")
    );
    println!("softmax([0.8, 0.6]) = {:.4?}", softmax_probs(&[0.8, 0.6]).unwrap());
    println!("{}", canonical_signature("ns.conv2d", ["in_channels", "out_channels", "kernel_size"]));
}
