use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::Zero;

use super::{HamiltonianOperator, LocalBasis, Term};
use crate::config::Caps;
use crate::error::{Error, Result};
use crate::numeric::Deformation;
use crate::paths::{enumerate, Colors, MotzkinPath};
use crate::qdp::WeightTable;

/// Sparse state on the `d^n` chain space, keyed by basis-string index.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundVector {
    n: usize,
    colors: Colors,
    states: Vec<u64>,
    amps: Vec<f64>,
}

impl GroundVector {
    /// Entries may arrive in any order; duplicates are rejected.
    pub fn from_entries(n: usize, colors: Colors, mut entries: Vec<(u64, f64)>) -> Result<Self> {
        entries.sort_unstable_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("duplicate basis string in state"));
        }
        let d = LocalBasis::new(colors).dim() as u64;
        let dim = d.checked_pow(n as u32);
        if let (Some(dim), Some(last)) = (dim, entries.last()) {
            if last.0 >= dim {
                return Err(Error::invalid("basis index out of range"));
            }
        }
        let (states, amps) = entries.into_iter().unzip();
        Ok(GroundVector { n, colors, states, amps })
    }

    /// Single basis string given by its local labels.
    pub fn basis_state(n: usize, colors: Colors, digits: &[usize]) -> Result<Self> {
        if digits.len() != n {
            return Err(Error::invalid("digit count does not match chain length"));
        }
        let d = LocalBasis::new(colors).dim() as u64;
        let s = digits.iter().fold(0u64, |acc, &g| acc * d + g as u64);
        Self::from_entries(n, colors, vec![(s, 1.0)])
    }

    /// Keep entries of a dense full-space vector above `threshold` in
    /// magnitude.
    pub fn from_dense(n: usize, colors: Colors, v: &[f64], threshold: f64) -> Result<Self> {
        let entries = v
            .iter()
            .enumerate()
            .filter(|(_, a)| a.abs() > threshold)
            .map(|(i, &a)| (i as u64, a))
            .collect();
        Self::from_entries(n, colors, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn colors(&self) -> Colors {
        self.colors
    }

    pub fn basis(&self) -> LocalBasis {
        LocalBasis::new(self.colors)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amps
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.states.iter().copied().zip(self.amps.iter().copied())
    }

    pub fn amplitude(&self, s: u64) -> f64 {
        self.states.binary_search(&s).map_or(0.0, |i| self.amps[i])
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn overlap(&self, other: &GroundVector) -> f64 {
        self.iter().map(|(s, a)| a * other.amplitude(s)).sum()
    }

    /// Local labels of basis string `s`, site 1 first.
    pub fn digits(&self, s: u64) -> Vec<usize> {
        let d = self.basis().dim() as u64;
        let mut out = vec![0; self.n];
        let mut s = s;
        for g in out.iter_mut().rev() {
            *g = (s % d) as usize;
            s /= d;
        }
        out
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        for (s, a) in self.iter() {
            v[s as usize] = a;
        }
        v
    }
}

pub(crate) fn encode_path(path: &MotzkinPath, basis: LocalBasis) -> u64 {
    let d = basis.dim() as u64;
    path.steps().iter().fold(0u64, |acc, &st| acc * d + basis.index_of(st) as u64)
}

/// `sum_m q^{A(m)} |m>` over all valid colored paths, normalized.
pub fn combinatorial_ground_vector(n: usize, q: &Deformation, colors: Colors, caps: &Caps) -> Result<GroundVector> {
    let table = WeightTable::log_domain(n, q, colors)?;
    let half_ln_z = 0.5 * table.ln_z();
    let ln_q = q.ln();
    let basis = LocalBasis::new(colors);
    let entries = enumerate(n, colors, caps)?
        .map(|m| {
            let amp = (m.area() as f64 * ln_q - half_ln_z).exp();
            (encode_path(&m, basis), amp)
        })
        .collect();
    GroundVector::from_entries(n, colors, entries)
}

fn exact_amplitudes(n: usize, q: &Deformation, colors: Colors, caps: &Caps) -> Result<HashMap<u64, BigRational>> {
    let basis = LocalBasis::new(colors);
    Ok(enumerate(n, colors, caps)?
        .map(|m| (encode_path(&m, basis), q.pow_exact(m.area() as i64)))
        .collect())
}

/// Terms of `h` that fail to annihilate the exact (rational) ground state.
/// An empty result certifies frustration-freeness.
pub fn frustration_free_violations(h: &HamiltonianOperator, caps: &Caps) -> Result<Vec<Term>> {
    let psi = exact_amplitudes(h.n(), h.q(), h.colors(), caps)?;
    let basis = h.basis();
    let d = basis.dim();
    let mut bad = Vec::new();
    for term in h.terms() {
        for vector in term.exact_vectors(basis, h.q()) {
            // <v| on the term's sites, identity elsewhere: one sum per context
            let mut sums: HashMap<u64, BigRational> = HashMap::new();
            for (&s, amp) in &psi {
                let (local, ctx) = if term.is_two_site() {
                    let (a, b) = (h.digit(s, term.site), h.digit(s, term.site + 1));
                    let local = a * d + b;
                    let p = h.encode_site(term.site, a) + h.encode_site(term.site + 1, b);
                    (local, s - p)
                } else {
                    let a = h.digit(s, term.site);
                    (a, s - h.encode_site(term.site, a))
                };
                if let Some((_, coeff)) = vector.iter().find(|(i, _)| *i == local) {
                    *sums.entry(ctx).or_insert_with(BigRational::zero) += coeff * amp;
                }
            }
            if sums.values().any(|v| !v.is_zero()) {
                bad.push(*term);
                break;
            }
        }
    }
    Ok(bad)
}

impl HamiltonianOperator {
    pub(crate) fn encode_site(&self, site: usize, digit: usize) -> u64 {
        digit as u64 * self.powers[site]
    }
}
