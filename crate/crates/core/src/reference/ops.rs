//! The reference APIs. Each takes named arguments, materializes its tensors
//! and returns one tensor or an exception.

use std::thread;
use std::time::Duration;

use super::tensor::{check_size, round_to, Tensor};
use super::{ApiError, Backend, DefectId, DefectSet, Failure};
use crate::model::{Arg, Dtype, TensorSpec, Value};

pub const APIS: [&str; 7] = [
    "rt.add",
    "rt.scale",
    "rt.matmul",
    "rt.reduce_sum",
    "rt.pool1d",
    "rt.pad1d",
    "rt.cast",
];

pub(crate) const CAST_SLEEP: Duration = Duration::from_millis(50);

/// Order in which reductions accumulate. Healthy backends differ only here.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SumOrder {
    Forward,
    Reverse,
}

impl SumOrder {
    fn sum(self, terms: impl DoubleEndedIterator<Item = f64>) -> f64 {
        match self {
            SumOrder::Forward => terms.fold(0.0, |acc, x| acc + x),
            SumOrder::Reverse => terms.rev().fold(0.0, |acc, x| acc + x),
        }
    }
}

struct Args<'a> {
    api: &'a str,
    args: &'a [Arg],
}

impl<'a> Args<'a> {
    fn new(api: &'a str, args: &'a [Arg], allowed: &[&str]) -> Result<Self, ApiError> {
        if let Some(extra) = args.iter().find(|a| !allowed.contains(&a.name.as_str())) {
            return Err(ApiError::type_error(format!(
                "{api}() got an unexpected keyword argument '{}'",
                extra.name
            )));
        }
        Ok(Self { api, args })
    }

    fn get(&self, name: &str) -> Option<&'a Value> {
        self.args.iter().find(|a| a.name == name).map(|a| &a.value)
    }

    fn required(&self, name: &str) -> Result<&'a Value, ApiError> {
        self.get(name).ok_or_else(|| {
            ApiError::type_error(format!(
                "{}() missing required argument '{name}'",
                self.api
            ))
        })
    }

    fn wrong_type(&self, name: &str, want: &str) -> ApiError {
        ApiError::type_error(format!("{}(): argument '{name}' must be {want}", self.api))
    }

    fn tensor(&self, name: &str) -> Result<&'a TensorSpec, ApiError> {
        self.required(name)?
            .as_tensor()
            .ok_or_else(|| self.wrong_type(name, "a tensor"))
    }

    fn int(&self, name: &str) -> Result<i64, ApiError> {
        match self.required(name)? {
            Value::Int { v } => Ok(*v),
            _ => Err(self.wrong_type(name, "an int")),
        }
    }

    fn opt_int(&self, name: &str) -> Result<Option<i64>, ApiError> {
        match self.get(name) {
            None => Ok(None),
            Some(_) => self.int(name).map(Some),
        }
    }

    fn number(&self, name: &str) -> Result<f64, ApiError> {
        match self.required(name)? {
            Value::Float { v } => Ok(*v),
            Value::Int { v } => Ok(*v as f64),
            _ => Err(self.wrong_type(name, "a number")),
        }
    }

    fn string(&self, name: &str) -> Result<&'a str, ApiError> {
        match self.required(name)? {
            Value::Str { v } => Ok(v),
            _ => Err(self.wrong_type(name, "a string")),
        }
    }

    fn int_pair(&self, name: &str) -> Result<(i64, i64), ApiError> {
        match self.required(name)? {
            Value::Tuple { items } | Value::List { items } => match items.as_slice() {
                [Value::Int { v: a }, Value::Int { v: b }] => Ok((*a, *b)),
                _ => Err(self.wrong_type(name, "a pair of ints")),
            },
            _ => Err(self.wrong_type(name, "a pair of ints")),
        }
    }
}

fn numeric(api: &str, t: &TensorSpec) -> Result<(), ApiError> {
    if t.dtype == Dtype::Bool {
        return Err(ApiError::type_error(format!("{api}() does not support bool tensors")));
    }
    Ok(())
}

fn same_dtype(api: &str, a: &TensorSpec, b: &TensorSpec) -> Result<(), ApiError> {
    if a.dtype != b.dtype {
        return Err(ApiError::type_error(format!(
            "{api}(): dtype mismatch {} vs {}",
            a.dtype, b.dtype
        )));
    }
    Ok(())
}

/// Dispatches one call.
pub fn call(api: &str, args: &[Arg], backend: Backend, defects: &DefectSet) -> Result<Tensor, Failure> {
    let buggy = |d: DefectId| backend == Backend::Buggy && defects.contains(d);
    let order = backend.sum_order();
    match api {
        "rt.add" => {
            let a = Args::new(api, args, &["a", "b"])?;
            let (x, y) = (a.tensor("a")?, a.tensor("b")?);
            numeric(api, x)?;
            same_dtype(api, x, y)?;
            let (x, y) = (Tensor::materialize(x)?, Tensor::materialize(y)?);
            Ok(add(&x, &y)?)
        }
        "rt.scale" => {
            let a = Args::new(api, args, &["x", "factor"])?;
            let x = a.tensor("x")?;
            let factor = a.number("factor")?;
            numeric(api, x)?;
            Ok(scale(&Tensor::materialize(x)?, factor))
        }
        "rt.matmul" => {
            let a = Args::new(api, args, &["a", "b"])?;
            let (x, y) = (a.tensor("a")?, a.tensor("b")?);
            numeric(api, x)?;
            same_dtype(api, x, y)?;
            let (x, y) = (Tensor::materialize(x)?, Tensor::materialize(y)?);
            Ok(matmul(&x, &y, order)?)
        }
        "rt.reduce_sum" => {
            let a = Args::new(api, args, &["x", "axis"])?;
            let x = a.tensor("x")?;
            let axis = a.opt_int("axis")?;
            if buggy(DefectId::D5) && x.dtype == Dtype::Float16 {
                return Err(ApiError::new(
                    "NotFoundError",
                    "no reduce_sum kernel registered for float16",
                )
                .into());
            }
            numeric(api, x)?;
            Ok(reduce_sum(&Tensor::materialize(x)?, axis, order)?)
        }
        "rt.pool1d" => {
            let a = Args::new(api, args, &["x", "window", "stride"])?;
            let x = a.tensor("x")?;
            let window = a.int("window")?;
            let stride = a.int("stride")?;
            if buggy(DefectId::D3) && window <= 0 {
                let x = Tensor::materialize(x)?;
                return Ok(Tensor::filled(x.shape.clone(), x.dtype, 0.0));
            }
            let mut out = pool1d(&Tensor::materialize(x)?, window, stride)?;
            if buggy(DefectId::D1) && stride > 1 {
                out = Tensor::new(
                    out.shape.clone(),
                    out.dtype,
                    out.data.iter().map(|v| v + 1.0).collect(),
                );
            }
            Ok(out)
        }
        "rt.pad1d" => {
            let a = Args::new(api, args, &["x", "amount", "mode"])?;
            let x = a.tensor("x")?;
            let amount = a.int_pair("amount")?;
            let mode = a.string("mode")?;
            if buggy(DefectId::D6) && (amount.0 < 0 || amount.1 < 0) {
                return Err(Failure::Abort);
            }
            if buggy(DefectId::D2) && mode == "reflect" {
                return Err(ApiError::new("InternalError", "reflect padding kernel failed").into());
            }
            Ok(pad1d(&Tensor::materialize(x)?, amount, mode)?)
        }
        "rt.cast" => {
            let a = Args::new(api, args, &["x", "dtype"])?;
            let x = a.tensor("x")?;
            let name = a.string("dtype")?;
            let target: Dtype = name
                .parse()
                .map_err(|e: crate::model::UnknownDtype| ApiError::value(e.to_string()))?;
            if target == Dtype::Complex64 {
                return Err(ApiError::type_error("cast to complex64 is not supported").into());
            }
            if buggy(DefectId::D4) && target == Dtype::Float16 {
                thread::sleep(CAST_SLEEP);
            }
            Ok(cast(&Tensor::materialize(x)?, target))
        }
        other => Err(ApiError::new("AttributeError", format!("no api named '{other}'")).into()),
    }
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor, ApiError> {
    if a.shape != b.shape {
        return Err(ApiError::value(format!(
            "add: shapes {:?} and {:?} differ",
            a.shape, b.shape
        )));
    }
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    Ok(Tensor::new(a.shape.clone(), a.dtype, data))
}

pub fn scale(x: &Tensor, factor: f64) -> Tensor {
    Tensor::new(
        x.shape.clone(),
        x.dtype,
        x.data.iter().map(|v| v * factor).collect(),
    )
}

pub fn matmul(a: &Tensor, b: &Tensor, order: SumOrder) -> Result<Tensor, ApiError> {
    let (&[m, k], &[k2, n]) = (a.shape.as_slice(), b.shape.as_slice()) else {
        return Err(ApiError::value(format!(
            "matmul expects 2-D operands, got {:?} and {:?}",
            a.shape, b.shape
        )));
    };
    if k != k2 {
        return Err(ApiError::value(format!(
            "matmul: inner dimensions {k} and {k2} differ"
        )));
    }
    check_size(&[m, n])?;
    let mut data = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            data.push(order.sum((0..k).map(|p| a.data[i * k + p] * b.data[p * n + j])));
        }
    }
    Ok(Tensor::new(vec![m, n], a.dtype, data))
}

pub fn reduce_sum(x: &Tensor, axis: Option<i64>, order: SumOrder) -> Result<Tensor, ApiError> {
    let Some(axis) = axis else {
        return Ok(Tensor::new(vec![], x.dtype, vec![order.sum(x.data.iter().copied())]));
    };
    let rank = x.rank() as i64;
    if rank == 0 || axis < -rank || axis >= rank {
        return Err(ApiError::value(format!(
            "reduce_sum: axis {axis} out of range for rank {rank}"
        )));
    }
    let axis = axis.rem_euclid(rank) as usize;
    let outer: usize = x.shape[..axis].iter().product();
    let len = x.shape[axis];
    let inner: usize = x.shape[axis + 1..].iter().product();
    let mut data = Vec::with_capacity(outer * inner);
    for o in 0..outer {
        for i in 0..inner {
            data.push(order.sum((0..len).map(|r| x.data[(o * len + r) * inner + i])));
        }
    }
    let mut shape = x.shape.clone();
    shape.remove(axis);
    Ok(Tensor::new(shape, x.dtype, data))
}

/// Max pooling along the last axis.
pub fn pool1d(x: &Tensor, window: i64, stride: i64) -> Result<Tensor, ApiError> {
    if x.rank() == 0 {
        return Err(ApiError::value("pool1d expects at least one dimension"));
    }
    if window < 1 || stride < 1 {
        return Err(ApiError::value(format!(
            "pool1d: window ({window}) and stride ({stride}) must be positive"
        )));
    }
    let len = *x.shape.last().expect("rank >= 1");
    let (window, stride) = (window as usize, stride as usize);
    if window > len {
        return Err(ApiError::value(format!(
            "pool1d: window {window} exceeds length {len}"
        )));
    }
    let out_len = (len - window) / stride + 1;
    let rows = x.numel() / len;
    let mut data = Vec::with_capacity(rows * out_len);
    for r in 0..rows {
        let row = &x.data[r * len..(r + 1) * len];
        for o in 0..out_len {
            let start = o * stride;
            data.push(
                row[start..start + window]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max),
            );
        }
    }
    let mut shape = x.shape.clone();
    *shape.last_mut().expect("rank >= 1") = out_len;
    Ok(Tensor::new(shape, x.dtype, data))
}

/// Pads the last axis with zeros or by reflection.
pub fn pad1d(x: &Tensor, amount: (i64, i64), mode: &str) -> Result<Tensor, ApiError> {
    if x.rank() == 0 {
        return Err(ApiError::value("pad1d expects at least one dimension"));
    }
    let (left, right) = amount;
    if left < 0 || right < 0 {
        return Err(ApiError::value(format!(
            "pad1d: padding amounts must be non-negative, got ({left}, {right})"
        )));
    }
    let len = *x.shape.last().expect("rank >= 1");
    let (left, right) = (left as usize, right as usize);
    match mode {
        "zeros" => {}
        "reflect" => {
            if left >= len || right >= len {
                return Err(ApiError::value(format!(
                    "pad1d: reflect padding ({left}, {right}) must be smaller than length {len}"
                )));
            }
        }
        other => {
            return Err(ApiError::value(format!(
                "pad1d: mode must be 'zeros' or 'reflect', got '{other}'"
            )))
        }
    }
    let out_len = left
        .checked_add(len)
        .and_then(|n| n.checked_add(right))
        .ok_or_else(|| ApiError::value("pad1d: padded length overflows"))?;
    let mut shape = x.shape.clone();
    *shape.last_mut().expect("rank >= 1") = out_len;
    check_size(&shape)?;
    let rows = x.numel() / len;
    let mut data = Vec::with_capacity(rows * out_len);
    for r in 0..rows {
        let row = &x.data[r * len..(r + 1) * len];
        for j in 0..out_len {
            let i = j as i64 - left as i64;
            let v = if (0..len as i64).contains(&i) {
                row[i as usize]
            } else if mode == "zeros" {
                0.0
            } else if i < 0 {
                row[(-i) as usize]
            } else {
                row[2 * (len - 1) - i as usize]
            };
            data.push(v);
        }
    }
    Ok(Tensor::new(shape, x.dtype, data))
}

pub fn cast(x: &Tensor, dtype: Dtype) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        dtype,
        data: x.data.iter().map(|&v| round_to(dtype, v)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), Dtype::Float64, data.to_vec())
    }

    #[test]
    fn reduce_sum_of_ones_over_all_axes() {
        let ones = Tensor::filled(vec![2, 3], Dtype::Float32, 1.0);
        let all = reduce_sum(&ones, None, SumOrder::Forward).unwrap();
        assert_eq!(all.shape, Vec::<usize>::new());
        assert_eq!(all.data, vec![6.0]);
        let rows = reduce_sum(&ones, Some(1), SumOrder::Forward).unwrap();
        let total = reduce_sum(&rows, Some(0), SumOrder::Reverse).unwrap();
        assert_eq!(total.data, vec![6.0]);
        assert!(reduce_sum(&ones, Some(2), SumOrder::Forward).is_err());
        assert_eq!(reduce_sum(&ones, Some(-2), SumOrder::Forward).unwrap().shape, vec![3]);
    }

    #[test]
    fn matmul_identity() {
        let id = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let a = t(&[2, 2], &[0.5, -3.0, 7.25, 2.0]);
        assert_eq!(matmul(&id, &a, SumOrder::Forward).unwrap(), a);
        assert_eq!(matmul(&a, &id, SumOrder::Reverse).unwrap(), a);
        assert!(matmul(&a, &t(&[3, 1], &[1.0, 2.0, 3.0]), SumOrder::Forward).is_err());
    }

    #[test]
    fn pool_and_pad_semantics() {
        let x = t(&[6], &[1.0, 5.0, 2.0, 4.0, 3.0, 0.0]);
        assert_eq!(pool1d(&x, 2, 2).unwrap().data, vec![5.0, 4.0, 3.0]);
        assert_eq!(pool1d(&x, 3, 1).unwrap().data, vec![5.0, 5.0, 4.0, 4.0]);
        assert!(pool1d(&x, 0, 1).is_err());
        assert!(pool1d(&x, 7, 1).is_err());

        let y = t(&[3], &[1.0, 2.0, 3.0]);
        assert_eq!(pad1d(&y, (1, 2), "zeros").unwrap().data, vec![0.0, 1.0, 2.0, 3.0, 0.0, 0.0]);
        assert_eq!(pad1d(&y, (2, 1), "reflect").unwrap().data, vec![3.0, 2.0, 1.0, 2.0, 3.0, 2.0]);
        assert!(pad1d(&y, (3, 0), "reflect").is_err());
        assert!(pad1d(&y, (0, 0), "circular").is_err());
    }

    #[test]
    fn cast_rounds_to_target() {
        let x = t(&[2], &[1.0 + 1e-9, -2.7]);
        let c = cast(&x, Dtype::Int32);
        assert_eq!(c.data, vec![1.0, -2.0]);
        assert_eq!(c.dtype, Dtype::Int32);
    }
}
