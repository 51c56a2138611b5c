//! Bipartitions of chain positions into subsystems A and B.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Side::A => 'A',
            Side::B => 'B',
        }
    }
}

/// Per-position subsystem labels of a length-`n` chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsystemMask {
    labels: Vec<Side>,
}

impl SubsystemMask {
    pub fn new(labels: Vec<Side>) -> Self {
        SubsystemMask { labels }
    }

    pub fn uniform(n: usize, side: Side) -> Self {
        SubsystemMask {
            labels: vec![side; n],
        }
    }

    /// Run-length layout: `(side, length)` segments in chain order.
    pub fn from_segments(segments: &[(Side, usize)]) -> Self {
        let labels = segments
            .iter()
            .flat_map(|&(s, len)| std::iter::repeat(s).take(len))
            .collect();
        SubsystemMask { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn side(&self, i: usize) -> Side {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Side] {
        &self.labels
    }

    /// At least one position on each side.
    pub fn is_nontrivial(&self) -> bool {
        self.labels.contains(&Side::A) && self.labels.contains(&Side::B)
    }

    pub fn complement(&self) -> SubsystemMask {
        SubsystemMask {
            labels: self.labels.iter().map(|s| s.other()).collect(),
        }
    }

    pub fn positions(&self, side: Side) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == side).collect()
    }

    pub fn count(&self, side: Side) -> usize {
        self.labels.iter().filter(|&&s| s == side).count()
    }

    pub fn segments(&self) -> Vec<(Side, usize)> {
        let mut out: Vec<(Side, usize)> = Vec::new();
        for &s in &self.labels {
            match out.last_mut() {
                Some((side, len)) if *side == s => *len += 1,
                _ => out.push((s, 1)),
            }
        }
        out
    }

    pub fn segment_lengths(&self) -> Vec<usize> {
        self.segments().into_iter().map(|(_, l)| l).collect()
    }
}

impl fmt::Display for SubsystemMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.labels.iter().map(|s| s.letter()).collect();
        f.write_str(&s)
    }
}

impl FromStr for SubsystemMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                'A' | 'a' => Ok(Side::A),
                'B' | 'b' => Ok(Side::B),
                _ => Err(Error::invalid(format!("mask characters must be A or B, got {c:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(SubsystemMask::new)
    }
}

impl Serialize for SubsystemMask {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SubsystemMask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Single cut after `x` sites: A on the first `x` positions, B on the rest.
pub fn contiguous_mask(n: usize, x: usize) -> Result<SubsystemMask> {
    if x == 0 || x >= n {
        return Err(Error::invalid(format!("cut position must satisfy 1 <= x < n, got x={x}, n={n}")));
    }
    Ok(SubsystemMask::from_segments(&[(Side::A, x), (Side::B, n - x)]))
}

/// Segment lengths, in chain order, of the diagonal cut of the `L x L`
/// spiral with offset `a`.
///
/// The chain starts at the outer end of one spiral arm, winds in to the
/// lattice center and out along the second arm. Each ring `r` of an arm
/// holds `4r` edges on one side of the diagonal, so the chain reads rings
/// `L/2, ..., 1` then `1, ..., L/2`, i.e. sizes `2L, ..., 8, 4, 4, 8, ..., 2L`
/// with alternating sides. An offset `a > 0` shortens every segment to
/// `4r - a` and the `aL` leftover positions join the final segment.
pub fn cut_segment_lengths(l: usize, a: usize) -> Result<Vec<usize>> {
    if l < 2 || l % 2 != 0 {
        return Err(Error::invalid(format!("L must be even and >= 2, got {l}")));
    }
    if a > 3 {
        return Err(Error::invalid(format!("cut offset a must be in 0..=3, got {a}")));
    }
    let half = l / 2;
    let mut lengths: Vec<usize> = (1..=half).rev().chain(1..=half).map(|r| 4 * r - a).collect();
    *lengths.last_mut().expect("L >= 2") += a * l;
    Ok(lengths)
}

/// Alternating-segment mask of the diagonal cut, first segment in A.
pub fn mask_from_cut(l: usize, a: usize) -> Result<SubsystemMask> {
    let lengths = cut_segment_lengths(l, a)?;
    let segments: Vec<(Side, usize)> = lengths
        .into_iter()
        .enumerate()
        .map(|(i, len)| (if i % 2 == 0 { Side::A } else { Side::B }, len))
        .collect();
    Ok(SubsystemMask::from_segments(&segments))
}

/// `A B A B ...` starting with A.
pub fn alternating_mask(n: usize) -> SubsystemMask {
    SubsystemMask::new(
        (0..n)
            .map(|i| if i % 2 == 0 { Side::A } else { Side::B })
            .collect(),
    )
}
