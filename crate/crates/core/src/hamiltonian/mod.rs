//! The Motzkin chain Hamiltonian: projector terms on every bond, color
//! mismatch penalties and boundary penalties.
//!
//! Basis strings are encoded site-major in base `d = 2c + 1` with site 1 as
//! the most significant digit. Local labels are ordered
//! `{up_r, up_b, 0, down_r, down_b}` for two colors and `{up, 0, down}` for
//! one.

mod blocks;
mod ground;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Caps;
use crate::eigen::LinearOperator;
use crate::error::{check_cap, Error, Result};
use crate::numeric::Deformation;
use crate::paths::{Color, Colors, Step, StepKind};

pub use blocks::{ed_report, spectral_gap, Block, BlockDecomposition, EdReport, GapResult, Spectrum};
pub use ground::{combinatorial_ground_vector, frustration_free_violations, GroundVector};

/// One-site label set of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalBasis {
    colors: Colors,
}

impl LocalBasis {
    pub fn new(colors: Colors) -> Self {
        LocalBasis { colors }
    }

    pub fn colors(self) -> Colors {
        self.colors
    }

    pub fn dim(self) -> usize {
        2 * self.colors.count() as usize + 1
    }

    pub fn zero(self) -> usize {
        self.colors.count() as usize
    }

    pub fn up(self, color: Option<Color>) -> usize {
        color.map_or(0, Color::index)
    }

    pub fn down(self, color: Option<Color>) -> usize {
        self.zero() + 1 + color.map_or(0, Color::index)
    }

    pub fn index_of(self, step: Step) -> usize {
        match step.kind {
            StepKind::Up => self.up(step.color),
            StepKind::Flat => self.zero(),
            StepKind::Down => self.down(step.color),
        }
    }

    pub fn step_of(self, index: usize) -> Step {
        let c = self.zero();
        let color = |i: usize| self.colors.is_colored().then(|| Color::from_index(i));
        if index < c {
            Step {
                kind: StepKind::Up,
                color: color(index),
            }
        } else if index == c {
            Step::FLAT
        } else {
            Step {
                kind: StepKind::Down,
                color: color(index - c - 1),
            }
        }
    }

    pub fn label(self, index: usize) -> String {
        let s = self.step_of(index);
        let arrow = match s.kind {
            StepKind::Up => "↑",
            StepKind::Down => "↓",
            StepKind::Flat => "0",
        };
        match s.color {
            Some(Color::Red) => format!("{arrow}r"),
            Some(Color::Blue) => format!("{arrow}b"),
            None => arrow.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TermKind {
    /// `P^c_j`: sum of the three rank-1 projectors of color `c`.
    Projector { color: Option<Color> },
    /// `C^{c1,c2}_j` for `c1 != c2`.
    Penalty { left: Color, right: Color },
    /// Down spin of the given color on the first site.
    BoundaryLeft { color: Option<Color> },
    /// Up spin of the given color on the last site.
    BoundaryRight { color: Option<Color> },
}

/// A local term acting at `site` (0-based; two-site terms act on `site` and
/// `site + 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Term {
    pub kind: TermKind,
    pub site: usize,
}

/// The three unnormalized vectors `L = up 0 - q 0 up`, `R = 0 down - q down 0`,
/// `F = up down - q 00` of one color, as `(pair index, coefficient)` lists.
fn projector_vectors<T: Clone>(basis: LocalBasis, color: Option<Color>, one: T, minus_q: T) -> [[(usize, T); 2]; 3] {
    let d = basis.dim();
    let (u, z, dn) = (basis.up(color), basis.zero(), basis.down(color));
    let pair = |a: usize, b: usize| a * d + b;
    [
        [(pair(u, z), one.clone()), (pair(z, u), minus_q.clone())],
        [(pair(z, dn), one.clone()), (pair(dn, z), minus_q.clone())],
        [(pair(u, dn), one), (pair(z, z), minus_q)],
    ]
}

impl Term {
    /// Rank-1 components as exact unnormalized vectors on the local space
    /// (`d` entries for one-site terms, `d^2` for two-site terms).
    pub fn exact_vectors(&self, basis: LocalBasis, q: &Deformation) -> Vec<Vec<(usize, BigRational)>> {
        let d = basis.dim();
        match self.kind {
            TermKind::Projector { color } => {
                projector_vectors(basis, color, BigRational::one(), -q.exact().clone())
                    .into_iter()
                    .map(|v| v.to_vec())
                    .collect()
            }
            TermKind::Penalty { left, right } => {
                vec![vec![(basis.up(Some(left)) * d + basis.down(Some(right)), BigRational::one())]]
            }
            TermKind::BoundaryLeft { color } => vec![vec![(basis.down(color), BigRational::one())]],
            TermKind::BoundaryRight { color } => vec![vec![(basis.up(color), BigRational::one())]],
        }
    }

    pub fn is_two_site(&self) -> bool {
        matches!(self.kind, TermKind::Projector { .. } | TermKind::Penalty { .. })
    }
}

/// `L`, `R`, `F` projectors of one color and their sum, as `d^2 x d^2`
/// matrices on the two-site space.
#[derive(Debug, Clone)]
pub struct LocalProjectors {
    pub color: Option<Color>,
    pub l: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub sum: DMatrix<f64>,
}

pub fn local_projector_matrices(q: f64, colors: Colors) -> Vec<LocalProjectors> {
    let basis = LocalBasis::new(colors);
    let d2 = basis.dim().pow(2);
    let norm = 1.0 / (1.0 + q * q);
    colors
        .palette()
        .iter()
        .map(|&color| {
            let [l, r, f] = projector_vectors(basis, color, 1.0, -q).map(|v| {
                let mut m = DMatrix::zeros(d2, d2);
                for &(i, a) in &v {
                    for &(j, b) in &v {
                        m[(i, j)] = a * b * norm;
                    }
                }
                m
            });
            let sum = &l + &r + &f;
            LocalProjectors { color, l, r, f, sum }
        })
        .collect()
}

/// Diagonal projectors onto mismatched adjacent `up_c1 down_c2` pairs.
pub fn crossing_penalty_matrices(colors: Colors) -> Vec<(Color, Color, DMatrix<f64>)> {
    if !colors.is_colored() {
        return Vec::new();
    }
    let basis = LocalBasis::new(colors);
    let d = basis.dim();
    [(Color::Red, Color::Blue), (Color::Blue, Color::Red)]
        .into_iter()
        .map(|(a, b)| {
            let mut m = DMatrix::zeros(d * d, d * d);
            let i = basis.up(Some(a)) * d + basis.down(Some(b));
            m[(i, i)] = 1.0;
            (a, b, m)
        })
        .collect()
}

/// Single-site penalties: `(first-site diagonal, last-site diagonal)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTerms {
    pub first: Vec<f64>,
    pub last: Vec<f64>,
}

pub fn boundary_terms(colors: Colors) -> BoundaryTerms {
    let basis = LocalBasis::new(colors);
    let mut first = vec![0.0; basis.dim()];
    let mut last = vec![0.0; basis.dim()];
    for &c in colors.palette() {
        first[basis.down(c)] = 1.0;
        last[basis.up(c)] = 1.0;
    }
    BoundaryTerms { first, last }
}

/// The full chain Hamiltonian, applied matrix-free on the `d^n` space.
#[derive(Debug, Clone)]
pub struct HamiltonianOperator {
    n: usize,
    q: Deformation,
    colors: Colors,
    basis: LocalBasis,
    /// Nonzeros of the bond matrix, by row pair index.
    bond_rows: Vec<Vec<(usize, f64)>>,
    boundary: BoundaryTerms,
    terms: Vec<Term>,
    powers: Vec<u64>,
}

impl HamiltonianOperator {
    /// Assemble `H` for `n` sites. Takes no geometry: the operator depends
    /// on `(n, q, c)` alone.
    pub fn assemble(n: usize, q: &Deformation, colors: Colors, caps: &Caps) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("the chain needs at least two sites"));
        }
        let basis = LocalBasis::new(colors);
        let d = basis.dim();
        let dim = (d as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
        check_cap("ed_dimension", caps.ed_dimension, dim)?;

        let mut bond = DMatrix::<f64>::zeros(d * d, d * d);
        for p in local_projector_matrices(q.value(), colors) {
            bond += p.sum;
        }
        for (_, _, m) in crossing_penalty_matrices(colors) {
            bond += m;
        }
        let bond_rows = (0..d * d)
            .map(|i| {
                (0..d * d)
                    .filter(|&j| bond[(i, j)].abs() > 1e-300)
                    .map(|j| (j, bond[(i, j)]))
                    .collect()
            })
            .collect();

        let mut terms = Vec::new();
        for site in 0..n - 1 {
            for &color in colors.palette() {
                terms.push(Term {
                    kind: TermKind::Projector { color },
                    site,
                });
            }
            if colors.is_colored() {
                for (left, right) in [(Color::Red, Color::Blue), (Color::Blue, Color::Red)] {
                    terms.push(Term {
                        kind: TermKind::Penalty { left, right },
                        site,
                    });
                }
            }
        }
        for &color in colors.palette() {
            terms.push(Term {
                kind: TermKind::BoundaryLeft { color },
                site: 0,
            });
            terms.push(Term {
                kind: TermKind::BoundaryRight { color },
                site: n - 1,
            });
        }
        let powers = (0..n).map(|j| (d as u64).pow((n - 1 - j) as u32)).collect();
        Ok(HamiltonianOperator {
            n,
            q: q.clone(),
            colors,
            basis,
            bond_rows,
            boundary: boundary_terms(colors),
            terms,
            powers,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> &Deformation {
        &self.q
    }

    pub fn colors(&self) -> Colors {
        self.colors
    }

    pub fn basis(&self) -> LocalBasis {
        self.basis
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn dimension(&self) -> u64 {
        self.powers[0] * self.basis.dim() as u64
    }

    /// Local label of `site` in basis string `s`.
    #[inline]
    pub fn digit(&self, s: u64, site: usize) -> usize {
        ((s / self.powers[site]) % self.basis.dim() as u64) as usize
    }

    pub fn encode(&self, digits: &[usize]) -> u64 {
        digits.iter().zip(&self.powers).map(|(&g, &p)| g as u64 * p).sum()
    }

    pub fn decode(&self, s: u64) -> Vec<usize> {
        (0..self.n).map(|j| self.digit(s, j)).collect()
    }

    /// Human-readable basis string, e.g. `↑r 0 ↓r`.
    pub fn label(&self, s: u64) -> String {
        self.decode(s)
            .into_iter()
            .map(|g| self.basis.label(g))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Diagonal element and off-diagonal nonzeros `(column, value)` of row `s`.
    pub fn row(&self, s: u64) -> (f64, Vec<(u64, f64)>) {
        let d = self.basis.dim();
        let mut diag = self.boundary.first[self.digit(s, 0)] + self.boundary.last[self.digit(s, self.n - 1)];
        let mut off = Vec::new();
        let mut a = self.digit(s, 0);
        for j in 0..self.n - 1 {
            let b = self.digit(s, j + 1);
            let pair = a * d + b;
            for &(p2, v) in &self.bond_rows[pair] {
                if p2 == pair {
                    diag += v;
                } else {
                    let (a2, b2) = (p2 / d, p2 % d);
                    let t = s as i64 + (a2 as i64 - a as i64) * self.powers[j] as i64
                        + (b2 as i64 - b as i64) * self.powers[j + 1] as i64;
                    off.push((t as u64, v));
                }
            }
            a = b;
        }
        (diag, off)
    }

    /// `<x|H|x>` for a full-space vector.
    pub fn expectation(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        y.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Diagonal energy of a single basis string under the boundary terms only.
    pub fn boundary_energy(&self, s: u64) -> f64 {
        self.boundary.first[self.digit(s, 0)] + self.boundary.last[self.digit(s, self.n - 1)]
    }
}

impl LinearOperator for HamiltonianOperator {
    fn dim(&self) -> usize {
        self.dimension() as usize
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(s, ys)| {
            let (diag, off) = self.row(s as u64);
            let mut acc = diag * x[s];
            for (t, v) in off {
                acc += v * x[t as usize];
            }
            *ys = acc;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{dense_spectrum, densify};

    fn q(v: &str) -> Deformation {
        v.parse().unwrap()
    }

    #[test]
    fn local_dimensions() {
        assert_eq!(LocalBasis::new(Colors::Two).dim(), 5);
        assert_eq!(LocalBasis::new(Colors::One).dim(), 3);
        let b = LocalBasis::new(Colors::Two);
        let labels: Vec<String> = (0..5).map(|i| b.label(i)).collect();
        assert_eq!(labels, ["↑r", "↑b", "0", "↓r", "↓b"]);
        for i in 0..5 {
            assert_eq!(b.index_of(b.step_of(i)), i);
        }
    }

    #[test]
    fn projector_examples() {
        let p = &local_projector_matrices(1.0, Colors::One)[0];
        let b = LocalBasis::new(Colors::One);
        let up0 = b.up(None) * 3 + b.zero();
        assert!((p.sum[(up0, up0)] - 0.5).abs() < 1e-15);
        for qv in [0.3, 1.0, 2.5] {
            for p in local_projector_matrices(qv, Colors::Two) {
                assert!((p.sum.trace() - 3.0).abs() < 1e-12);
                assert!((&p.sum * &p.sum - &p.sum).abs().max() < 1e-12);
                let b = LocalBasis::new(Colors::Two);
                let mut v = nalgebra::DVector::zeros(25);
                v[b.up(p.color) * 5 + b.zero()] = qv;
                v[b.zero() * 5 + b.up(p.color)] = 1.0;
                assert!((&p.sum * v).norm() < 1e-14);
                for (x, y) in [(&p.l, &p.r), (&p.l, &p.f), (&p.r, &p.f)] {
                    assert!((x * y).abs().max() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn penalty_examples() {
        let b = LocalBasis::new(Colors::Two);
        let pens = crossing_penalty_matrices(Colors::Two);
        assert_eq!(pens.len(), 2);
        let (c1, c2, m) = &pens[0];
        assert_eq!((*c1, *c2), (Color::Red, Color::Blue));
        let rb = b.up(Some(Color::Red)) * 5 + b.down(Some(Color::Blue));
        let rr = b.up(Some(Color::Red)) * 5 + b.down(Some(Color::Red));
        assert_eq!(m[(rb, rb)], 1.0);
        assert_eq!(m[(rr, rr)], 0.0);
        assert!(crossing_penalty_matrices(Colors::One).is_empty());
    }

    #[test]
    fn boundary_examples() {
        let h = HamiltonianOperator::assemble(2, &q("1"), Colors::Two, &Caps::default()).unwrap();
        let b = h.basis();
        let down_first = h.encode(&[b.down(Some(Color::Red)), b.zero()]);
        assert!(h.boundary_energy(down_first) >= 1.0);
        assert_eq!(h.boundary_energy(h.encode(&[b.zero(), b.zero()])), 0.0);
        let ud = h.encode(&[b.up(Some(Color::Blue)), b.down(Some(Color::Blue))]);
        assert_eq!(h.boundary_energy(ud), 0.0);
    }

    #[test]
    fn term_counts() {
        for (n, c) in [(2, Colors::One), (5, Colors::One), (4, Colors::Two), (7, Colors::Two)] {
            let h = HamiltonianOperator::assemble(n, &q("2"), c, &Caps::default()).unwrap();
            let cc = c.count() as usize;
            assert_eq!(h.terms().len(), (n - 1) * (cc + cc * (cc - 1)) + 2 * cc);
        }
    }

    #[test]
    fn small_dense_spectra() {
        for (c, dim) in [(Colors::One, 9), (Colors::Two, 25)] {
            let h = HamiltonianOperator::assemble(2, &q("1"), c, &Caps::default()).unwrap();
            assert_eq!(h.dim(), dim);
            let m = densify(&h);
            assert_eq!(m, m.transpose());
            let (vals, _) = dense_spectrum(&m);
            assert!(vals[0].abs() < 1e-12);
            assert!(vals[1] > 1e-3, "{vals:?}");
        }
    }

    #[test]
    fn locality_of_nonzeros() {
        let h = HamiltonianOperator::assemble(4, &q("3/2"), Colors::One, &Caps::default()).unwrap();
        for s in 0..h.dimension() {
            let (_, off) = h.row(s);
            for (t, _) in off {
                let (a, b) = (h.decode(s), h.decode(t));
                let diff: Vec<usize> = (0..4).filter(|&j| a[j] != b[j]).collect();
                assert!(!diff.is_empty() && diff.len() <= 2);
                assert!(diff.last().unwrap() - diff[0] <= 1);
            }
        }
    }

    #[test]
    fn dimension_cap() {
        let caps = Caps {
            ed_dimension: 1000,
            ..Caps::default()
        };
        let err = HamiltonianOperator::assemble(5, &q("1"), Colors::Two, &caps).unwrap_err();
        assert!(err.to_string().contains("ed_dimension"));
    }
}
