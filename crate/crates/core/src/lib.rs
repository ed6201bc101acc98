//! Trace-driven, type-aware mutation fuzzing for numeric library APIs.
//!
//! Recorded API invocations are ingested into a [`store::ValueStore`].
//! The [`mutation`] engine derives new argument lists from them by changing
//! argument types, drawing fresh values, or borrowing values recorded for
//! same-named arguments of similar APIs. The [`harness`] runs each mutant
//! on several backends in isolated executor processes, and the [`oracle`]
//! module classifies the outcomes. [`campaign`] ties these together.
//!
//! [`reference`] is a small multi-backend library with seeded defects,
//! served over the executor protocol, for exercising the whole pipeline.
//!
//! ```
//! use tracefuzz::model::{infer_fuzz_type, Dtype, FuzzType, Value};
//!
//! let v = Value::tensor(vec![20, 16, 50, 100], Dtype::Float32, 7);
//! assert_eq!(infer_fuzz_type(&v), FuzzType::Tensor { rank: 4, dtype: Dtype::Float32 });
//! assert_eq!(infer_fuzz_type(&v).to_string(), "Tensor<4,float32>");
//! ```

pub mod campaign;
pub mod harness;
pub mod model;
pub mod mutation;
pub mod oracle;
pub mod reference;
pub mod rng;
pub mod store;
pub mod wire;
