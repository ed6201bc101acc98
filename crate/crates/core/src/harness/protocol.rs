//! Executor wire protocol: one JSON object per line over the executor's
//! stdin (requests) and stdout (responses).

use serde::{Deserialize, Serialize};

use crate::model::{Arg, BackendId, Dtype};

/// Compact summary of an API result used for cross-backend comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub shape: Vec<usize>,
    pub dtype: Dtype,
    pub all_finite: bool,
    #[serde(with = "crate::wire::f64_lossless")]
    pub sum: f64,
    #[serde(with = "crate::wire::f64_lossless")]
    pub abs_sum: f64,
    /// Up to 16 elements at evenly strided row-major flat indices.
    #[serde(with = "crate::wire::vec_f64_lossless")]
    pub sample: Vec<f64>,
}

pub const DIGEST_SAMPLE_LEN: usize = 16;

impl OutputDigest {
    /// Digest of a row-major element buffer.
    pub fn of(shape: &[usize], dtype: Dtype, data: &[f64]) -> Self {
        let n = data.len();
        let k = n.min(DIGEST_SAMPLE_LEN);
        let sample = (0..k).map(|i| data[i * n / k]).collect();
        Self {
            shape: shape.to_vec(),
            dtype,
            all_finite: data.iter().all(|x| x.is_finite()),
            sum: data.iter().sum(),
            abs_sum: data.iter().map(|x| x.abs()).sum(),
            sample,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionInfo {
    pub class: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub api: String,
    pub backend: String,
    pub args: Vec<Arg>,
    pub timing_reps: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseStatus {
    Ok,
    Exception,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub status: ResponseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exception: Option<ExceptionInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputDigest>,
    #[serde(default, with = "crate::wire::vec_f64_lossless")]
    pub elapsed_ms: Vec<f64>,
}

impl Response {
    pub fn ok(id: u64, output: OutputDigest, elapsed_ms: Vec<f64>) -> Self {
        Self {
            id,
            status: ResponseStatus::Ok,
            exception: None,
            output: Some(output),
            elapsed_ms,
        }
    }

    pub fn exception(id: u64, class: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            id,
            status: ResponseStatus::Exception,
            exception: Some(ExceptionInfo {
                class: class.into(),
                message: message.into(),
            }),
            output: None,
            elapsed_ms: Vec::new(),
        }
    }

    /// Checks the field-presence rules of the protocol.
    pub fn validate(&self) -> Result<(), String> {
        match self.status {
            ResponseStatus::Ok => {
                if self.output.is_none() {
                    return Err("ok response without output".into());
                }
                if self.elapsed_ms.is_empty() {
                    return Err("ok response without timings".into());
                }
                if self.exception.is_some() {
                    return Err("ok response with exception".into());
                }
            }
            ResponseStatus::Exception => {
                if self.exception.is_none() {
                    return Err("exception response without exception".into());
                }
                if self.output.is_some() {
                    return Err("exception response with output".into());
                }
            }
        }
        Ok(())
    }
}

/// Per-backend execution status. Crash and timeout are synthesized by the
/// harness; executors only ever report `ok` or `exception`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Status {
    Ok,
    Exception { class: String, message: String },
    /// Exit code, or `128 + signal` for signal deaths.
    Crash { code: i32 },
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub backend: BackendId,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputDigest>,
    #[serde(default, with = "crate::wire::vec_f64_lossless")]
    pub elapsed_ms: Vec<f64>,
}

impl Outcome {
    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    pub fn crash(backend: BackendId, code: i32) -> Self {
        Self {
            backend,
            status: Status::Crash { code },
            output: None,
            elapsed_ms: Vec::new(),
        }
    }

    pub fn timeout(backend: BackendId) -> Self {
        Self {
            backend,
            status: Status::Timeout,
            output: None,
            elapsed_ms: Vec::new(),
        }
    }

    pub(crate) fn from_response(backend: BackendId, resp: Response) -> Self {
        match resp.status {
            ResponseStatus::Ok => Self {
                backend,
                status: Status::Ok,
                output: resp.output,
                elapsed_ms: resp.elapsed_ms,
            },
            ResponseStatus::Exception => {
                let info = resp.exception.unwrap_or(ExceptionInfo {
                    class: "UnknownException".into(),
                    message: String::new(),
                });
                Self {
                    backend,
                    status: Status::Exception {
                        class: info.class,
                        message: info.message,
                    },
                    output: None,
                    elapsed_ms: Vec::new(),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_sample_is_strided() {
        let data: Vec<f64> = (0..32).map(f64::from).collect();
        let d = OutputDigest::of(&[4, 8], Dtype::Float32, &data);
        assert_eq!(d.sample.len(), 16);
        assert_eq!(d.sample[1], 2.0);
        assert_eq!(d.sum, (0..32).sum::<i32>() as f64);
        let small = OutputDigest::of(&[3], Dtype::Float64, &[1.0, -2.0, 3.0]);
        assert_eq!(small.sample, vec![1.0, -2.0, 3.0]);
        assert_eq!(small.abs_sum, 6.0);
        let scalar = OutputDigest::of(&[], Dtype::Float64, &[6.0]);
        assert_eq!(scalar.sample, vec![6.0]);
    }

    #[test]
    fn response_wire_shape() {
        let r = Response::exception(3, "ValueError", "bad window");
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"id":3,"status":"exception","exception":{"class":"ValueError","message":"bad window"},"elapsed_ms":[]}"#
        );
        let ok = Response::ok(4, OutputDigest::of(&[1], Dtype::Float32, &[f64::NAN]), vec![0.5]);
        let line = serde_json::to_string(&ok).unwrap();
        let back: Response = serde_json::from_str(&line).unwrap();
        back.validate().unwrap();
        assert!(!back.output.unwrap().all_finite);
    }

    #[test]
    fn validate_catches_missing_fields() {
        let mut r = Response::ok(1, OutputDigest::of(&[1], Dtype::Float32, &[1.0]), vec![]);
        assert!(r.validate().is_err());
        r.elapsed_ms = vec![1.0];
        r.validate().unwrap();
        r.output = None;
        assert!(r.validate().is_err());
    }
}
