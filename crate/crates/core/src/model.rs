//! Domain types shared across the fuzzer: dtypes, fine-grained runtime types,
//! argument values, recorded invocations and executable test cases.
//!
//! Everything here is immutable data plus pure functions. The serde
//! representation of [`Value`] and [`InvocationEntry`] is the wire form used
//! by trace files, the store file and the executor protocol.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Tensor element type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Float64,
    Float32,
    Float16,
    Bfloat16,
    Int64,
    Int32,
    Int8,
    Bool,
    Complex64,
}

impl Dtype {
    pub const ALL: [Dtype; 9] = [
        Dtype::Float64,
        Dtype::Float32,
        Dtype::Float16,
        Dtype::Bfloat16,
        Dtype::Int64,
        Dtype::Int32,
        Dtype::Int8,
        Dtype::Bool,
        Dtype::Complex64,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dtype::Float64 => "float64",
            Dtype::Float32 => "float32",
            Dtype::Float16 => "float16",
            Dtype::Bfloat16 => "bfloat16",
            Dtype::Int64 => "int64",
            Dtype::Int32 => "int32",
            Dtype::Int8 => "int8",
            Dtype::Bool => "bool",
            Dtype::Complex64 => "complex64",
        }
    }

    pub fn is_float(self) -> bool {
        self.precision_rank().is_some()
    }

    /// Rank within the real floating-point family. `float16` and `bfloat16`
    /// share a rank and are therefore mutually incomparable.
    pub fn precision_rank(self) -> Option<u8> {
        match self {
            Dtype::Float64 => Some(3),
            Dtype::Float32 => Some(2),
            Dtype::Float16 | Dtype::Bfloat16 => Some(1),
            _ => None,
        }
    }

    /// Strict "carries less precision than" relation.
    pub fn less_precise_than(self, other: Dtype) -> bool {
        match (self.precision_rank(), other.precision_rank()) {
            (Some(a), Some(b)) => a < b,
            _ => false,
        }
    }

    /// The next float dtype up the precision order, if any.
    pub fn promoted(self) -> Option<Dtype> {
        match self {
            Dtype::Float16 | Dtype::Bfloat16 => Some(Dtype::Float32),
            Dtype::Float32 => Some(Dtype::Float64),
            _ => None,
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown dtype `{0}`")]
pub struct UnknownDtype(pub String);

impl FromStr for Dtype {
    type Err = UnknownDtype;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dtype::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| UnknownDtype(s.to_owned()))
    }
}

/// Fine-grained runtime type of an argument value.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FuzzType {
    Tensor { rank: usize, dtype: Dtype },
    Int,
    Float,
    Bool,
    Str,
    Tuple(Vec<FuzzType>),
    List(Vec<FuzzType>),
    Opaque,
}

impl FuzzType {
    pub fn is_primitive(&self) -> bool {
        matches!(
            self,
            FuzzType::Int | FuzzType::Float | FuzzType::Bool | FuzzType::Str
        )
    }
}

impl fmt::Display for FuzzType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(f: &mut fmt::Formatter<'_>, items: &[FuzzType]) -> fmt::Result {
            for (i, t) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{t}")?;
            }
            Ok(())
        }
        match self {
            FuzzType::Tensor { rank, dtype } => write!(f, "Tensor<{rank},{dtype}>"),
            FuzzType::Int => f.write_str("int"),
            FuzzType::Float => f.write_str("float"),
            FuzzType::Bool => f.write_str("bool"),
            FuzzType::Str => f.write_str("str"),
            FuzzType::Tuple(items) => {
                f.write_str("(")?;
                join(f, items)?;
                f.write_str(")")
            }
            FuzzType::List(items) => {
                f.write_str("[")?;
                join(f, items)?;
                f.write_str("]")
            }
            FuzzType::Opaque => f.write_str("opaque"),
        }
    }
}

/// A tensor argument carried by description. Elements are materialized from
/// `seed` by the executor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TensorSpec {
    pub shape: Vec<usize>,
    pub dtype: Dtype,
    pub seed: u64,
}

impl TensorSpec {
    pub fn new(shape: Vec<usize>, dtype: Dtype, seed: u64) -> Self {
        Self { shape, dtype, seed }
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Element count, saturating on overflow.
    pub fn numel(&self) -> usize {
        self.shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .unwrap_or(usize::MAX)
    }
}

/// Serializable argument value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "lowercase")]
pub enum Value {
    Tensor(TensorSpec),
    Int {
        v: i64,
    },
    Float {
        #[serde(with = "crate::wire::f64_lossless")]
        v: f64,
    },
    Bool {
        v: bool,
    },
    Str {
        v: String,
    },
    Tuple {
        items: Vec<Value>,
    },
    List {
        items: Vec<Value>,
    },
    Raw {
        repr: String,
    },
}

impl Value {
    pub fn tensor(shape: Vec<usize>, dtype: Dtype, seed: u64) -> Self {
        Value::Tensor(TensorSpec::new(shape, dtype, seed))
    }

    pub fn int(v: i64) -> Self {
        Value::Int { v }
    }

    pub fn float(v: f64) -> Self {
        Value::Float { v }
    }

    pub fn bool(v: bool) -> Self {
        Value::Bool { v }
    }

    pub fn str(v: impl Into<String>) -> Self {
        Value::Str { v: v.into() }
    }

    pub fn tuple(items: Vec<Value>) -> Self {
        Value::Tuple { items }
    }

    pub fn list(items: Vec<Value>) -> Self {
        Value::List { items }
    }

    pub fn raw(repr: impl Into<String>) -> Self {
        Value::Raw { repr: repr.into() }
    }

    pub fn as_tensor(&self) -> Option<&TensorSpec> {
        match self {
            Value::Tensor(t) => Some(t),
            _ => None,
        }
    }

    /// Structural checks the serde layer cannot express.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            Value::Tensor(t) => {
                if t.shape.contains(&0) {
                    return Err(format!("tensor shape {:?} has a zero dimension", t.shape));
                }
                Ok(())
            }
            Value::Tuple { items } | Value::List { items } => {
                items.iter().try_for_each(Value::validate)
            }
            _ => Ok(()),
        }
    }
}

/// Infers the fine-grained runtime type of a value. Total and deterministic.
pub fn infer_fuzz_type(v: &Value) -> FuzzType {
    match v {
        Value::Tensor(t) => FuzzType::Tensor {
            rank: t.rank(),
            dtype: t.dtype,
        },
        Value::Int { .. } => FuzzType::Int,
        Value::Float { .. } => FuzzType::Float,
        Value::Bool { .. } => FuzzType::Bool,
        Value::Str { .. } => FuzzType::Str,
        Value::Tuple { items } => FuzzType::Tuple(items.iter().map(infer_fuzz_type).collect()),
        Value::List { items } => FuzzType::List(items.iter().map(infer_fuzz_type).collect()),
        Value::Raw { .. } => FuzzType::Opaque,
    }
}

/// Where an entry came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Doc,
    Test,
    Model,
    Mutant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arg {
    pub name: String,
    pub value: Value,
}

impl Arg {
    pub fn new(name: impl Into<String>, value: Value) -> Self {
        Self {
            name: name.into(),
            value,
        }
    }
}

/// One recorded (or mutated) argument list for one API.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvocationEntry {
    pub api: String,
    pub source: Source,
    pub args: Vec<Arg>,
}

impl InvocationEntry {
    pub fn new(api: impl Into<String>, source: Source, args: Vec<Arg>) -> Self {
        Self {
            api: api.into(),
            source,
            args,
        }
    }

    pub fn arg(&self, name: &str) -> Option<&Value> {
        self.args.iter().find(|a| a.name == name).map(|a| &a.value)
    }

    pub fn arg_names(&self) -> Vec<&str> {
        self.args.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn signature(&self) -> String {
        canonical_signature(&self.api, self.args.iter().map(|a| a.name.as_str()))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.api.is_empty() {
            return Err("empty api name".into());
        }
        for (i, a) in self.args.iter().enumerate() {
            if self.args[..i].iter().any(|b| b.name == a.name) {
                return Err(format!("duplicate argument name `{}`", a.name));
            }
            a.value
                .validate()
                .map_err(|e| format!("argument `{}`: {e}", a.name))?;
        }
        Ok(())
    }
}

/// `api(n1,n2,...)`, the string over which API similarity is measured.
pub fn canonical_signature<'a>(api: &str, arg_names: impl IntoIterator<Item = &'a str>) -> String {
    let names: Vec<&str> = arg_names.into_iter().collect();
    format!("{api}({})", names.join(","))
}

/// 128-bit dedup fingerprint of an entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub u128);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

/// Fingerprint over the api name, argument names and order, primitive values
/// and tensor shapes/dtypes. Tensor seeds and the entry source are excluded,
/// so entries equal modulo tensor contents collide.
pub fn entry_fingerprint(e: &InvocationEntry) -> Fingerprint {
    let mut h = blake3::Hasher::new();
    write_str(&mut h, &e.api);
    h.update(&(e.args.len() as u64).to_le_bytes());
    for a in &e.args {
        write_str(&mut h, &a.name);
        hash_value_shape(&mut h, &a.value);
    }
    fingerprint_of(h)
}

/// Fingerprint of a single value with tensor seeds excluded.
pub fn value_fingerprint(v: &Value) -> Fingerprint {
    let mut h = blake3::Hasher::new();
    hash_value_shape(&mut h, v);
    fingerprint_of(h)
}

fn fingerprint_of(h: blake3::Hasher) -> Fingerprint {
    let mut out = [0u8; 16];
    out.copy_from_slice(&h.finalize().as_bytes()[..16]);
    Fingerprint(u128::from_le_bytes(out))
}

fn write_str(h: &mut blake3::Hasher, s: &str) {
    h.update(&(s.len() as u64).to_le_bytes());
    h.update(s.as_bytes());
}

fn hash_value_shape(h: &mut blake3::Hasher, v: &Value) {
    match v {
        Value::Tensor(t) => {
            h.update(b"T");
            write_str(h, t.dtype.name());
            h.update(&(t.shape.len() as u64).to_le_bytes());
            for d in &t.shape {
                h.update(&(*d as u64).to_le_bytes());
            }
        }
        Value::Int { v } => {
            h.update(b"i");
            h.update(&v.to_le_bytes());
        }
        Value::Float { v } => {
            h.update(b"f");
            h.update(&v.to_bits().to_le_bytes());
        }
        Value::Bool { v } => {
            h.update(if *v { b"b1" } else { b"b0" });
        }
        Value::Str { v } => {
            h.update(b"s");
            write_str(h, v);
        }
        Value::Tuple { items } | Value::List { items } => {
            h.update(if matches!(v, Value::Tuple { .. }) { b"(" } else { b"[" });
            h.update(&(items.len() as u64).to_le_bytes());
            for item in items {
                hash_value_shape(h, item);
            }
        }
        Value::Raw { repr } => {
            h.update(b"r");
            write_str(h, repr);
        }
    }
}

/// Stable identifiers of the mutation rules, used in lineage and reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    TensorDim,
    TensorDtype,
    PrimType,
    TupleType,
    ListType,
    RandTensorShape,
    RandTensorValue,
    RandPrim,
    RandTuple,
    RandList,
    DbTensorShape,
    DbTensorValue,
    DbPrim,
    DbTuple,
    DbList,
}

impl RuleId {
    pub const ALL: [RuleId; 15] = [
        RuleId::TensorDim,
        RuleId::TensorDtype,
        RuleId::PrimType,
        RuleId::TupleType,
        RuleId::ListType,
        RuleId::RandTensorShape,
        RuleId::RandTensorValue,
        RuleId::RandPrim,
        RuleId::RandTuple,
        RuleId::RandList,
        RuleId::DbTensorShape,
        RuleId::DbTensorValue,
        RuleId::DbPrim,
        RuleId::DbTuple,
        RuleId::DbList,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::TensorDim => "tensor_dim",
            RuleId::TensorDtype => "tensor_dtype",
            RuleId::PrimType => "prim_type",
            RuleId::TupleType => "tuple_type",
            RuleId::ListType => "list_type",
            RuleId::RandTensorShape => "rand_tensor_shape",
            RuleId::RandTensorValue => "rand_tensor_value",
            RuleId::RandPrim => "rand_prim",
            RuleId::RandTuple => "rand_tuple",
            RuleId::RandList => "rand_list",
            RuleId::DbTensorShape => "db_tensor_shape",
            RuleId::DbTensorValue => "db_tensor_value",
            RuleId::DbPrim => "db_prim",
            RuleId::DbTuple => "db_tuple",
            RuleId::DbList => "db_list",
        }
    }

    pub fn is_type_rule(self) -> bool {
        matches!(
            self,
            RuleId::TensorDim
                | RuleId::TensorDtype
                | RuleId::PrimType
                | RuleId::TupleType
                | RuleId::ListType
        )
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named execution mode of the target on some machine.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BackendId {
    pub name: String,
    pub machine: String,
}

impl BackendId {
    pub fn new(name: impl Into<String>, machine: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            machine: machine.into(),
        }
    }
}

impl fmt::Display for BackendId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.machine)
    }
}

/// An entry ready for execution, with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub entry: InvocationEntry,
    /// Seed of the RNG stream that produced this case.
    pub seed: u64,
    pub lineage: Vec<RuleId>,
    pub backends: Vec<BackendId>,
    pub timing_reps: u32,
}
