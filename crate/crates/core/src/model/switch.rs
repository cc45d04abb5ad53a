use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{evenly_slice, Source};
use crate::error::{GraftError, Result};

/// External-source selector: `0` none, `1` News, `2` Reddit, `3` Policy,
/// `123` all three.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum SourceSwitch {
    NoExt,
    News,
    Reddit,
    Policy,
    All,
}

impl SourceSwitch {
    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(Self::NoExt),
            1 => Ok(Self::News),
            2 => Ok(Self::Reddit),
            3 => Ok(Self::Policy),
            123 => Ok(Self::All),
            other => Err(GraftError::Config(format!(
                "unknown source switch {other}; expected 0, 1, 2, 3 or 123"
            ))),
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Self::NoExt => 0,
            Self::News => 1,
            Self::Reddit => 2,
            Self::Policy => 3,
            Self::All => 123,
        }
    }

    /// Active sources in source order.
    pub fn sources(self) -> &'static [Source] {
        match self {
            Self::NoExt => &[],
            Self::News => &[Source::News],
            Self::Reddit => &[Source::Reddit],
            Self::Policy => &[Source::Policy],
            Self::All => &Source::ALL,
        }
    }

    pub fn is_active(self, s: Source) -> bool {
        self.sources().contains(&s)
    }

    /// Splits a unified embedding into one branch per active source. A single
    /// source keeps the whole vector; several sources get equal slices of
    /// width `floor(len / n)`.
    pub fn branches(self, unified: &[f64]) -> Result<Vec<(Source, Vec<f64>)>> {
        let srcs = self.sources();
        match srcs.len() {
            0 => Ok(Vec::new()),
            1 => Ok(vec![(srcs[0], unified.to_vec())]),
            n => Ok(srcs.iter().copied().zip(evenly_slice(unified, n)?).collect()),
        }
    }
}

impl Default for SourceSwitch {
    fn default() -> Self {
        Self::All
    }
}

impl TryFrom<u32> for SourceSwitch {
    type Error = GraftError;

    fn try_from(code: u32) -> Result<Self> {
        Self::from_code(code)
    }
}

impl From<SourceSwitch> for u32 {
    fn from(s: SourceSwitch) -> u32 {
        s.code()
    }
}

impl FromStr for SourceSwitch {
    type Err = GraftError;

    fn from_str(s: &str) -> Result<Self> {
        let code: u32 = s
            .trim()
            .parse()
            .map_err(|_| GraftError::Config(format!("source switch must be numeric, got {s:?}")))?;
        Self::from_code(code)
    }
}

impl fmt::Display for SourceSwitch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}
