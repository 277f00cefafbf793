use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer partition `κ = (m₁ ≥ … ≥ m_d ≥ 0)` living in `E_d`.
///
/// Stored without trailing zeros; `ambient_d` records `d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    parts: Vec<usize>,
    ambient_d: usize,
}

impl Partition {
    pub fn new(parts: &[usize], ambient_d: usize) -> Result<Self> {
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Invalid(format!(
                "partition parts must be non-increasing: {parts:?}"
            )));
        }
        let trimmed: Vec<usize> = parts.iter().copied().take_while(|&m| m > 0).collect();
        if parts[trimmed.len()..].iter().any(|&m| m > 0) {
            unreachable!("non-increasing parts cannot have a positive part after a zero");
        }
        if trimmed.len() > ambient_d {
            return Err(Error::PartitionOutOfRange {
                parts: trimmed,
                d: ambient_d,
            });
        }
        Ok(Self {
            parts: trimmed,
            ambient_d,
        })
    }

    pub fn empty(ambient_d: usize) -> Self {
        Self {
            parts: Vec::new(),
            ambient_d,
        }
    }

    /// Positive parts only.
    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn ambient_d(&self) -> usize {
        self.ambient_d
    }

    /// Parts padded with zeros to length `d`.
    pub fn padded(&self) -> Vec<usize> {
        let mut v = self.parts.clone();
        v.resize(self.ambient_d, 0);
        v
    }

    /// `|κ|`.
    pub fn weight(&self) -> usize {
        self.parts.iter().sum()
    }

    /// `ℓ(κ)`.
    pub fn length(&self) -> usize {
        self.parts.len()
    }

    /// Membership in `E′_d`, i.e. `m_d > 0`.
    pub fn is_full_length(&self) -> bool {
        self.parts.len() == self.ambient_d
    }

    /// Same parts viewed in another ambient dimension.
    pub fn with_ambient(&self, d: usize) -> Result<Self> {
        Self::new(&self.parts, d)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, m) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, ")")
    }
}

/// All partitions of `weight` with at most `max_len` parts, as plain part
/// vectors in lexicographically descending order.
pub fn partitions_of(weight: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fill(weight, weight, max_len, &mut cur, &mut out);
    out
}

fn fill(
    rest: usize,
    max_part: usize,
    slots: usize,
    cur: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if rest == 0 {
        out.push(cur.clone());
        return;
    }
    if slots == 0 {
        return;
    }
    for first in (1..=rest.min(max_part)).rev() {
        // remaining slots must be able to absorb what is left
        if first * slots < rest {
            break;
        }
        cur.push(first);
        fill(rest - first, first, slots - 1, cur, out);
        cur.pop();
    }
}

/// Every `κ ∈ E_d` with `|κ| ≤ weight_max`, weight-major then
/// lexicographically descending.
pub fn partitions_up_to(weight_max: usize, d: usize) -> impl Iterator<Item = Partition> {
    (0..=weight_max).flat_map(move |w| {
        partitions_of(w, d).into_iter().map(move |parts| Partition {
            parts,
            ambient_d: d,
        })
    })
}
