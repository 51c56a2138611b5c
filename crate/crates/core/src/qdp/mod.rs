//! q- and color-weighted transfer tables over (position, height).
//!
//! The ground state assigns a colored path the Born weight `q^{2A(m)}`, so a
//! path skeleton carries `c^{#Up} q^{2A}`. With the trapezoid area each step
//! contributes a weight depending only on the height it leaves:
//! flat `q^{2h}`, up `c q^{2h+1}`, down `q^{2h-1}`.

mod crossing;
mod heights;
mod sampler;

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::config::Caps;
use crate::error::{check_cap, Error, Result};
use crate::numeric::{ln_ratio, log_sum, Deformation};
use crate::output::{fmt_f64, CsvTable};
use crate::paths::{Colors, MotzkinPath, StepKind};

pub use crossing::{
    crossing_arcs, crossing_expectation, crossing_expectation_exact, crossing_expectation_with, CrossingEstimate,
    ExactExpectation,
};
pub use heights::{endpoint_height_law, ln_walk_counts, HeightLaw};
pub use sampler::{sample, sample_rng, PathSample, Sampler, SeedRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericMode {
    /// Natural-log values accumulated with log-sum-exp; never overflows.
    #[default]
    LogDomain,
    /// Exact rationals; requires a length within the `exact_table` cap.
    ExactRational,
}

impl fmt::Display for NumericMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NumericMode::LogDomain => "log_domain",
            NumericMode::ExactRational => "exact_rational",
        })
    }
}

impl FromStr for NumericMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "log" | "log_domain" => Ok(NumericMode::LogDomain),
            "exact" | "exact_rational" => Ok(NumericMode::ExactRational),
            _ => Err(Error::invalid(format!("unknown numeric mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Store {
    Log { pre: Vec<f64>, suf: Vec<f64> },
    Exact { pre: Vec<BigRational>, suf: Vec<BigRational> },
}

/// Prefix and suffix partition functions of the path measure.
///
/// `prefix(j, h)` sums the weights of all `j`-step prefixes ending at height
/// `h`; `suffix(r, h)` sums the weights of all `r`-step completions from
/// height `h` down to 0. Entries are exact wherever the state `(j, h)` can
/// still reach the end of the chain.
#[derive(Debug, Clone)]
pub struct WeightTable {
    n: usize,
    q: Deformation,
    colors: Colors,
    mode: NumericMode,
    h_max: usize,
    width: usize,
    store: Store,
}

/// Per-position summary of the exact height marginal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeightStat {
    pub x: usize,
    pub mean: f64,
    pub mode: usize,
}

impl WeightTable {
    pub fn build(n: usize, q: &Deformation, colors: Colors, mode: NumericMode, caps: &Caps) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("chain length must be at least 1"));
        }
        let h_max = n.div_ceil(2);
        let width = h_max + 1;
        let store = match mode {
            NumericMode::LogDomain => build_log(n, q, colors, h_max),
            NumericMode::ExactRational => {
                check_cap("exact_table", caps.exact_table as u64, n as u64)?;
                build_exact(n, q, colors, h_max)
            }
        };
        Ok(WeightTable {
            n,
            q: q.clone(),
            colors,
            mode,
            h_max,
            width,
            store,
        })
    }

    /// Log-domain table with default caps.
    pub fn log_domain(n: usize, q: &Deformation, colors: Colors) -> Result<Self> {
        Self::build(n, q, colors, NumericMode::LogDomain, &Caps::default())
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

    pub fn mode(&self) -> NumericMode {
        self.mode
    }

    pub fn h_max(&self) -> usize {
        self.h_max
    }

    fn idx(&self, j: usize, h: usize) -> usize {
        j * self.width + h
    }

    pub fn ln_prefix(&self, j: usize, h: usize) -> f64 {
        if h > self.h_max || j > self.n {
            return f64::NEG_INFINITY;
        }
        let i = self.idx(j, h);
        match &self.store {
            Store::Log { pre, .. } => pre[i],
            Store::Exact { pre, .. } => ln_ratio(&pre[i]),
        }
    }

    pub fn ln_suffix(&self, r: usize, h: usize) -> f64 {
        if h > self.h_max || r > self.n {
            return f64::NEG_INFINITY;
        }
        let i = self.idx(r, h);
        match &self.store {
            Store::Log { suf, .. } => suf[i],
            Store::Exact { suf, .. } => ln_ratio(&suf[i]),
        }
    }

    pub fn prefix_exact(&self, j: usize, h: usize) -> Option<BigRational> {
        match &self.store {
            Store::Exact { pre, .. } if h <= self.h_max && j <= self.n => Some(pre[self.idx(j, h)].clone()),
            Store::Exact { .. } => Some(BigRational::zero()),
            Store::Log { .. } => None,
        }
    }

    pub fn suffix_exact(&self, r: usize, h: usize) -> Option<BigRational> {
        match &self.store {
            Store::Exact { suf, .. } if h <= self.h_max && r <= self.n => Some(suf[self.idx(r, h)].clone()),
            Store::Exact { .. } => Some(BigRational::zero()),
            Store::Log { .. } => None,
        }
    }

    /// `ln Z`, with `Z = sum_m c^{#Up} q^{2A(m)}`.
    pub fn ln_z(&self) -> f64 {
        self.ln_prefix(self.n, 0)
    }

    pub fn z_exact(&self) -> Option<BigRational> {
        self.prefix_exact(self.n, 0)
    }

    pub fn ln_step_weight(&self, kind: StepKind, h: usize) -> f64 {
        ln_step_weight(self.q.ln(), self.colors, kind, h)
    }

    /// `ln(c^{#Up} q^{2A})` of the path skeleton.
    pub fn ln_skeleton_weight(&self, path: &MotzkinPath) -> f64 {
        path.up_count() as f64 * f64::from(self.colors.count()).ln() + path.doubled_area() as f64 * self.q.ln()
    }

    fn check_path(&self, path: &MotzkinPath) -> Result<()> {
        if path.len() != self.n {
            return Err(Error::invalid(format!(
                "path length {} does not match table length {}",
                path.len(),
                self.n
            )));
        }
        if path.colors().is_colored() && !self.colors.is_colored() {
            return Err(Error::invalid("colored path given to a colorless table"));
        }
        Ok(())
    }

    /// Born probability of `path`: a colorless label is treated as a skeleton
    /// (all colorings summed), a colored label as one basis state.
    pub fn ground_state_probability(&self, path: &MotzkinPath) -> Result<f64> {
        self.check_path(path)?;
        let mut ln_w = self.ln_skeleton_weight(path);
        if path.colors().is_colored() {
            ln_w -= path.up_count() as f64 * f64::from(self.colors.count()).ln();
        }
        Ok((ln_w - self.ln_z()).exp())
    }

    pub fn ground_state_probability_exact(&self, path: &MotzkinPath) -> Result<BigRational> {
        self.check_path(path)?;
        let z = self
            .z_exact()
            .ok_or_else(|| Error::invalid("exact probabilities need an ExactRational table"))?;
        let mut w = self.q.pow_exact(path.doubled_area() as i64);
        if !path.colors().is_colored() {
            w *= num_traits::pow(BigRational::from_integer(self.colors.count().into()), path.up_count());
        }
        Ok(w / z)
    }

    /// `P(h_x = h)` for `h = 0..=h_max`.
    pub fn height_marginal(&self, x: usize) -> Vec<f64> {
        assert!(x <= self.n, "position {x} beyond chain length {}", self.n);
        let ln_z = self.ln_z();
        (0..=self.h_max)
            .map(|h| {
                let l = self.ln_prefix(x, h) + self.ln_suffix(self.n - x, h) - ln_z;
                if l.is_finite() {
                    l.exp()
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn height_marginal_exact(&self, x: usize) -> Option<Vec<BigRational>> {
        let z = self.z_exact()?;
        Some(
            (0..=self.h_max)
                .map(|h| self.prefix_exact(x, h).unwrap() * self.suffix_exact(self.n - x, h).unwrap() / &z)
                .collect(),
        )
    }

    pub fn height_stat(&self, x: usize) -> HeightStat {
        let p = self.height_marginal(x);
        let mean = p.iter().enumerate().map(|(h, v)| h as f64 * v).sum();
        HeightStat {
            x,
            mean,
            mode: argmax(&p),
        }
    }

    pub fn height_stats(&self) -> Vec<HeightStat> {
        (0..=self.n).map(|x| self.height_stat(x)).collect()
    }

    pub fn expected_heights(&self) -> Vec<f64> {
        self.height_stats().into_iter().map(|s| s.mean).collect()
    }

    /// Rows `(x, h, probability)` for every height with nonzero mass.
    pub fn marginals_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["x", "h", "probability"]);
        for x in 0..=self.n {
            let p = self.height_marginal(x);
            for (h, v) in p.into_iter().enumerate().filter(|(_, v)| *v > 0.0) {
                t.push(vec![x.to_string(), h.to_string(), fmt_f64(v)]);
            }
        }
        t
    }

    pub fn expectations_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["x", "mean_h", "mode_h"]);
        for s in self.height_stats() {
            t.push(vec![s.x.to_string(), fmt_f64(s.mean), s.mode.to_string()]);
        }
        t
    }
}

/// Index of the largest entry; ties go to the smallest index.
pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn ln_step_weight(ln_q: f64, colors: Colors, kind: StepKind, h: usize) -> f64 {
    let h = h as f64;
    match kind {
        StepKind::Flat => 2.0 * h * ln_q,
        StepKind::Up => f64::from(colors.count()).ln() + (2.0 * h + 1.0) * ln_q,
        StepKind::Down => (2.0 * h - 1.0) * ln_q,
    }
}

fn build_log(n: usize, q: &Deformation, colors: Colors, h_max: usize) -> Store {
    let width = h_max + 1;
    let ln_q = q.ln();
    let w = |k, h| ln_step_weight(ln_q, colors, k, h);
    let mut pre = vec![f64::NEG_INFINITY; (n + 1) * width];
    let mut suf = vec![f64::NEG_INFINITY; (n + 1) * width];
    pre[0] = 0.0;
    suf[0] = 0.0;
    let mut terms = Vec::with_capacity(3);
    for j in 1..=n {
        let (prev, cur) = pre.split_at_mut(j * width);
        let prev = &prev[(j - 1) * width..];
        for h in 0..=j.min(h_max) {
            terms.clear();
            terms.push(prev[h] + w(StepKind::Flat, h));
            if h >= 1 {
                terms.push(prev[h - 1] + w(StepKind::Up, h - 1));
            }
            if h < h_max {
                terms.push(prev[h + 1] + w(StepKind::Down, h + 1));
            }
            cur[h] = log_sum(terms.iter().copied());
        }
        let (prev, cur) = suf.split_at_mut(j * width);
        let prev = &prev[(j - 1) * width..];
        for h in 0..=j.min(h_max) {
            terms.clear();
            terms.push(prev[h] + w(StepKind::Flat, h));
            if h < h_max {
                terms.push(prev[h + 1] + w(StepKind::Up, h));
            }
            if h >= 1 {
                terms.push(prev[h - 1] + w(StepKind::Down, h));
            }
            cur[h] = log_sum(terms.iter().copied());
        }
    }
    Store::Log { pre, suf }
}

fn build_exact(n: usize, q: &Deformation, colors: Colors, h_max: usize) -> Store {
    let width = h_max + 1;
    let c = BigRational::from_integer(colors.count().into());
    // q^k for k = -1 ..= 2 h_max + 1, stored at k + 1
    let pw: Vec<BigRational> = (-1..=(2 * h_max as i64 + 1)).map(|k| q.pow_exact(k)).collect();
    let qp = |k: i64| &pw[(k + 1) as usize];
    let w_flat = |h: usize| qp(2 * h as i64).clone();
    let w_up = |h: usize| &c * qp(2 * h as i64 + 1);
    let w_down = |h: usize| qp(2 * h as i64 - 1).clone();
    let mut pre = vec![BigRational::zero(); (n + 1) * width];
    let mut suf = vec![BigRational::zero(); (n + 1) * width];
    pre[0] = BigRational::one();
    suf[0] = BigRational::one();
    for j in 1..=n {
        for h in 0..=j.min(h_max) {
            let p = |hh: usize| &pre[(j - 1) * width + hh];
            let mut v = p(h) * w_flat(h);
            if h >= 1 {
                v += p(h - 1) * w_up(h - 1);
            }
            if h < h_max {
                v += p(h + 1) * w_down(h + 1);
            }
            pre[j * width + h] = v;

            let s = |hh: usize| &suf[(j - 1) * width + hh];
            let mut v = s(h) * w_flat(h);
            if h < h_max {
                v += s(h + 1) * w_up(h);
            }
            if h >= 1 {
                v += s(h - 1) * w_down(h);
            }
            suf[j * width + h] = v;
        }
    }
    Store::Exact { pre, suf }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::enumerate;

    fn q(s: &str) -> Deformation {
        s.parse().unwrap()
    }

    fn exact(n: usize, qv: &str, c: Colors) -> WeightTable {
        WeightTable::build(n, &q(qv), c, NumericMode::ExactRational, &Caps::default()).unwrap()
    }

    fn rat(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn partition_function_examples() {
        assert_eq!(exact(2, "1", Colors::One).z_exact().unwrap(), rat(2, 1));
        // 1 + 2 q^2 at q = 3/2
        assert_eq!(exact(2, "3/2", Colors::Two).z_exact().unwrap(), rat(1, 1) + rat(2, 1) * rat(9, 4));
        assert_eq!(exact(4, "1", Colors::One).z_exact().unwrap(), rat(9, 1));
        let t = WeightTable::log_domain(4, &q("1"), Colors::One).unwrap();
        assert!((t.ln_z() - 9f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn partition_function_matches_enumeration() {
        let caps = Caps::default();
        for c in [Colors::One, Colors::Two] {
            for qs in ["1/3", "1", "5/2"] {
                for n in 1..=9 {
                    let t = exact(n, qs, c);
                    let qd = q(qs);
                    let mut z = BigRational::zero();
                    for m in enumerate(n, Colors::One, &caps).unwrap() {
                        let cw = num_traits::pow(BigRational::from_integer(c.count().into()), m.up_count());
                        z += cw * qd.pow_exact(m.doubled_area() as i64);
                    }
                    assert_eq!(t.z_exact().unwrap(), z, "n={n} q={qs} c={c}");
                    assert_eq!(t.suffix_exact(n, 0).unwrap(), z);
                }
            }
        }
    }

    #[test]
    fn probability_examples() {
        let t = exact(2, "1", Colors::One);
        let ud: MotzkinPath = "UD".parse().unwrap();
        assert_eq!(t.ground_state_probability_exact(&ud).unwrap(), rat(1, 2));
        let t = exact(2, "2/3", Colors::Two);
        // skeleton UD: 2 q^2 / (1 + 2 q^2) = (8/9) / (17/9)
        assert_eq!(t.ground_state_probability_exact(&ud).unwrap(), rat(8, 17));
        let colored: MotzkinPath = "UrDr".parse().unwrap();
        assert_eq!(t.ground_state_probability_exact(&colored).unwrap(), rat(4, 17));
        let flat: MotzkinPath = "FF".parse().unwrap();
        assert_eq!(t.ground_state_probability_exact(&flat).unwrap(), rat(9, 17));
        assert!((t.ground_state_probability(&flat).unwrap() - 9.0 / 17.0).abs() < 1e-15);
        let colorless = exact(2, "1", Colors::One);
        assert!(colorless.ground_state_probability(&colored).is_err());
    }

    #[test]
    fn expected_height_examples() {
        let t = exact(2, "1", Colors::One);
        let h = t.expected_heights();
        assert!((h[1] - 0.5).abs() < 1e-15);
        assert_eq!(t.height_marginal_exact(1).unwrap()[1], rat(1, 2));
        for (n, qs, c) in [(7, "2", Colors::Two), (12, "1/2", Colors::One)] {
            let t = WeightTable::log_domain(n, &q(qs), c).unwrap();
            let h = t.expected_heights();
            assert_eq!(h[0], 0.0);
            assert!(h[n].abs() < 1e-12);
        }
    }

    #[test]
    fn marginals_normalized() {
        for c in [Colors::One, Colors::Two] {
            let t = WeightTable::log_domain(301, &q("3/2"), c).unwrap();
            for x in [0, 1, 150, 151, 300, 301] {
                let s: f64 = t.height_marginal(x).iter().sum();
                assert!((s - 1.0).abs() < 1e-10, "x={x} sum={s}");
            }
            let t = exact(13, "3/2", c);
            for x in 0..=13 {
                let s: BigRational = t.height_marginal_exact(x).unwrap().into_iter().sum();
                assert!(s.is_one());
            }
        }
    }

    #[test]
    fn backends_agree() {
        for c in [Colors::One, Colors::Two] {
            for qs in ["1/3", "1/2", "1", "3/2", "2"] {
                for n in [1, 2, 7, 20, 40] {
                    let e = exact(n, qs, c);
                    let l = WeightTable::log_domain(n, &q(qs), c).unwrap();
                    let lz = l.ln_z();
                    assert!(((e.ln_z() - lz) / lz.abs().max(1.0)).abs() < 1e-12);
                    for x in 0..=n {
                        for h in 0..=l.h_max() {
                            let a = e.ln_prefix(x, h) + e.ln_suffix(n - x, h) - e.ln_z();
                            let b = l.ln_prefix(x, h) + l.ln_suffix(n - x, h) - lz;
                            if a.is_finite() || b.is_finite() {
                                assert!((a.exp() - b.exp()).abs() <= 1e-9 * a.exp(), "n={n} q={qs} x={x} h={h}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn exact_cap_refuses() {
        let err = WeightTable::build(49, &q("1"), Colors::One, NumericMode::ExactRational, &Caps::default())
            .unwrap_err();
        assert!(err.to_string().contains("exact_table"));
        assert!(WeightTable::build(5000, &q("3"), Colors::Two, NumericMode::LogDomain, &Caps::default()).is_ok());
    }

    #[test]
    fn strong_deformation_concentrates() {
        let caps = Caps::default();
        for (n, qs) in (2..=12).step_by(2).flat_map(|n| [(n, "3"), (n, "4")]) {
            let t = exact(n, qs, Colors::Two);
            let peak = MotzkinPath::from_kinds(
                &[vec![StepKind::Up; n / 2], vec![StepKind::Down; n / 2]].concat(),
            )
            .unwrap();
            let p = t.ground_state_probability_exact(&peak).unwrap();
            assert!(p >= rat(9, 10), "n={n}");
            let best = enumerate(n, Colors::One, &caps)
                .unwrap()
                .max_by_key(|m| m.doubled_area())
                .unwrap();
            assert_eq!(best, peak);
        }
    }
}
