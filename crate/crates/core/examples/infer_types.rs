//! Infers fuzz types for a few argument values and shows their wire form.
//!
//! ```text
//! cargo run --example infer_types
//! ```

use tracefuzz::model::{infer_fuzz_type, Dtype, Value};

fn main() {
    let values = [
        ("kernel_size", Value::tuple(vec![Value::int(2), Value::int(1)])),
        ("input", Value::tensor(vec![20, 16, 50, 100], Dtype::Float32, 7)),
        ("in_channels", Value::int(16)),
        ("momentum", Value::float(0.1)),
        ("padding_mode", Value::str("reflect")),
        ("sizes", Value::list(vec![Value::int(3), Value::float(0.5), Value::bool(true)])),
        ("empty", Value::tuple(vec![])),
        ("callback", Value::raw("<function f at 0x7f>")),
    ];
    for (name, v) in &values {
        let wire = serde_json::to_string(v).expect("values serialize");
        println!("{name:>13}: {:<28} {wire}", infer_fuzz_type(v).to_string());
    }

    let parsed: Value = serde_json::from_str(r#"{"t":"tensor","shape":[2,3],"dtype":"bfloat16","seed":9}"#)
        .expect("valid wire value");
    println!("\nparsed back: {}", infer_fuzz_type(&parsed));
}
