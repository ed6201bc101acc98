use crate::harness::OutputDigest;
use crate::model::{Dtype, TensorSpec};
use crate::rng::RngStream;

use super::ApiError;

/// Largest tensor the reference target agrees to materialize.
pub const MAX_ELEMENTS: usize = 1 << 18;

/// Dense row-major tensor. Elements are kept as f64 already rounded to
/// `dtype`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub dtype: Dtype,
    pub data: Vec<f64>,
}

/// Rounds `x` to the nearest value representable in `dtype`. Integer
/// dtypes truncate toward zero and wrap; `bool` maps nonzero to 1.
pub fn round_to(dtype: Dtype, x: f64) -> f64 {
    match dtype {
        Dtype::Float64 | Dtype::Complex64 => x,
        Dtype::Float32 => x as f32 as f64,
        Dtype::Float16 => half::f16::from_f64(x).to_f64(),
        Dtype::Bfloat16 => half::bf16::from_f64(x).to_f64(),
        Dtype::Int64 => x as i64 as f64,
        Dtype::Int32 => x as i64 as i32 as f64,
        Dtype::Int8 => x as i64 as i8 as f64,
        Dtype::Bool => f64::from(u8::from(x != 0.0)),
    }
}

pub(crate) fn check_size(shape: &[usize]) -> Result<usize, ApiError> {
    let n = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&n| n <= MAX_ELEMENTS)
        .ok_or_else(|| {
            ApiError::value(format!(
                "tensor of shape {shape:?} exceeds {MAX_ELEMENTS} elements"
            ))
        })?;
    Ok(n)
}

impl Tensor {
    pub fn new(shape: Vec<usize>, dtype: Dtype, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let data = data.into_iter().map(|x| round_to(dtype, x)).collect();
        Self { shape, dtype, data }
    }

    pub fn filled(shape: Vec<usize>, dtype: Dtype, value: f64) -> Self {
        let n = shape.iter().product();
        Self::new(shape, dtype, vec![value; n])
    }

    /// Seeded elements: floats uniform in `[-1, 1)`, integers uniform in
    /// `[-8, 8]`, bools fair.
    pub fn materialize(spec: &TensorSpec) -> Result<Self, ApiError> {
        if spec.dtype == Dtype::Complex64 {
            return Err(ApiError::type_error("complex64 tensors are not supported"));
        }
        let n = check_size(&spec.shape)?;
        let mut rng = RngStream::new(spec.seed);
        let data = (0..n)
            .map(|_| match spec.dtype {
                d if d.is_float() => rng.unit() * 2.0 - 1.0,
                Dtype::Bool => f64::from(u8::from(rng.coin(0.5))),
                _ => rng.range_i64(-8, 8) as f64,
            })
            .collect();
        Ok(Self::new(spec.shape.clone(), spec.dtype, data))
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn digest(&self) -> OutputDigest {
        OutputDigest::of(&self.shape, self.dtype, &self.data)
    }
}
