use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A value observed at a monitored access.
///
/// Integers are stored already reduced to the declared width of the access,
/// so `u64` and `i64` values share one exact representation. Addresses are
/// abstract: an allocation id (per run, assigned in creation order) plus a
/// cell offset. Allocation 0 is the null pointer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuntimeValue {
    Int(i128),
    Addr { alloc: u64, offset: i64 },
}

impl RuntimeValue {
    pub fn as_int(&self) -> Option<i128> {
        match self {
            RuntimeValue::Int(v) => Some(*v),
            RuntimeValue::Addr { .. } => None,
        }
    }

    pub fn is_addr(&self) -> bool {
        matches!(self, RuntimeValue::Addr { .. })
    }
}

impl fmt::Display for RuntimeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuntimeValue::Int(v) => write!(f, "{v}"),
            RuntimeValue::Addr { alloc, offset } => write!(f, "ptr:{alloc}:{offset}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed runtime value `{0}`")]
pub struct ValueParseError(pub String);

impl FromStr for RuntimeValue {
    type Err = ValueParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ValueParseError(s.to_string());
        if let Some(rest) = s.strip_prefix("ptr:") {
            let (a, o) = rest.split_once(':').ok_or_else(bad)?;
            return Ok(RuntimeValue::Addr { alloc: a.parse().map_err(|_| bad())?, offset: o.parse().map_err(|_| bad())? });
        }
        let v: i128 = s.parse().map_err(|_| bad())?;
        if v < i64::MIN as i128 || v > u64::MAX as i128 {
            return Err(bad());
        }
        Ok(RuntimeValue::Int(v))
    }
}
