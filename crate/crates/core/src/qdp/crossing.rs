use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use super::{Sampler, WeightTable};
use crate::config::Caps;
use crate::error::{Error, Result};
use crate::mask::SubsystemMask;
use crate::numeric::{ratio_to_f64, Deformation};
use crate::paths::{enumerate, Colors, MotzkinPath};

/// Number of arcs whose endpoints lie in different subsystems.
pub fn crossing_arcs(path: &MotzkinPath, mask: &SubsystemMask) -> Result<usize> {
    check_len(path.len(), mask)?;
    Ok(path
        .arc_matching()
        .pairs()
        .iter()
        .filter(|&&(i, j)| mask.side(i) != mask.side(j))
        .count())
}

fn check_len(n: usize, mask: &SubsystemMask) -> Result<()> {
    if mask.len() != n {
        return Err(Error::invalid(format!(
            "mask length {} does not match chain length {n}",
            mask.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingEstimate {
    pub mean: f64,
    /// Standard error of the mean; for i.i.d. samples this equals the
    /// jackknife estimate.
    pub stderr: f64,
    pub samples: u64,
}

impl CrossingEstimate {
    fn from_sums(samples: u64, sum: u64, sum_sq: u128) -> Self {
        let n = samples as f64;
        let mean = sum as f64 / n;
        let stderr = if samples > 1 {
            // exact integer centering avoids cancellation for large k
            let centered = sum_sq as f64 - (sum as f64) * mean;
            (centered.max(0.0) / (n - 1.0) / n).sqrt()
        } else {
            f64::NAN
        };
        CrossingEstimate { mean, stderr, samples }
    }
}

/// Monte Carlo `E[k]` over exact ground-state samples. Deterministic in
/// `seed`: sample `i` uses stream `i`, and integer reductions make the
/// parallel sum order-independent.
pub fn crossing_expectation_with(sampler: &Sampler, mask: &SubsystemMask, n_samples: u64, seed: u64) -> Result<CrossingEstimate> {
    check_len(sampler.n(), mask)?;
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let (sum, sum_sq) = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let k = sampler.sample_crossings(seed, i, mask) as u64;
            (k, u128::from(k * k))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(CrossingEstimate::from_sums(n_samples, sum, sum_sq))
}

pub fn crossing_expectation(
    n: usize,
    q: &Deformation,
    colors: Colors,
    mask: &SubsystemMask,
    n_samples: u64,
    seed: u64,
) -> Result<CrossingEstimate> {
    check_len(n, mask)?;
    let table = WeightTable::log_domain(n, q, colors)?;
    crossing_expectation_with(&Sampler::new(&table), mask, n_samples, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactExpectation {
    pub exact: BigRational,
    pub value: f64,
}

/// `sum_m p(m) k(m)` by full enumeration of skeletons, exact in `q`.
pub fn crossing_expectation_exact(
    n: usize,
    q: &Deformation,
    colors: Colors,
    mask: &SubsystemMask,
    caps: &Caps,
) -> Result<ExactExpectation> {
    check_len(n, mask)?;
    if colors.is_colored() {
        // enforce the colored cap even though only skeletons are visited
        crate::error::check_cap("enumerate_colored", caps.enumerate_colored as u64, n as u64)?;
    }
    // weights depend only on (#Up, 2A): bucket integer counts first
    let mut buckets: BTreeMap<(usize, u64), (u64, u64)> = BTreeMap::new();
    for m in enumerate(n, Colors::One, caps)? {
        let k = crossing_arcs(&m, mask)? as u64;
        let b = buckets.entry((m.up_count(), m.doubled_area())).or_default();
        b.0 += 1;
        b.1 += k;
    }
    let c = BigRational::from_integer(colors.count().into());
    let (mut z, mut num) = (BigRational::zero(), BigRational::zero());
    for ((ups, area2), (count, ksum)) in buckets {
        let w = num_traits::pow(c.clone(), ups) * q.pow_exact(area2 as i64);
        z += &w * BigRational::from_integer(count.into());
        num += w * BigRational::from_integer(ksum.into());
    }
    let exact = num / z;
    Ok(ExactExpectation {
        value: ratio_to_f64(&exact),
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{contiguous_mask, Side};

    fn p(s: &str) -> MotzkinPath {
        s.parse().unwrap()
    }

    fn m(s: &str) -> SubsystemMask {
        s.parse().unwrap()
    }

    #[test]
    fn crossing_examples() {
        assert_eq!(crossing_arcs(&p("UUDD"), &m("AABB")).unwrap(), 2);
        assert_eq!(crossing_arcs(&p("UDUD"), &m("AABB")).unwrap(), 0);
        assert_eq!(crossing_arcs(&p("UUDD"), &m("ABBA")).unwrap(), 0);
        assert!(crossing_arcs(&p("UD"), &m("ABB")).is_err());
    }

    #[test]
    fn exact_expectation_examples() {
        let caps = Caps::default();
        let one = Deformation::one();
        let v = crossing_expectation_exact(2, &one, Colors::One, &m("AB"), &caps).unwrap();
        assert_eq!(v.exact, BigRational::new(1.into(), 2.into()));
        // AABB crossers: FUDF, FUFD, UFDF, UFFD (k=1) and UUDD (k=2)
        let c1 = crossing_expectation_exact(4, &one, Colors::One, &m("AABB"), &caps).unwrap();
        assert_eq!(c1.exact, BigRational::new(6.into(), 9.into()));
        let c2 = crossing_expectation_exact(4, &one, Colors::Two, &m("AABB"), &caps).unwrap();
        assert_eq!(c2.exact, BigRational::new(16.into(), 21.into()));
        let all_a = SubsystemMask::uniform(6, Side::A);
        assert!(crossing_expectation_exact(6, &one, Colors::Two, &all_a, &caps).unwrap().exact.is_zero());
        let tiny = Deformation::from_ratio(1, 1000).unwrap();
        let v = crossing_expectation_exact(8, &tiny, Colors::Two, &contiguous_mask(8, 4).unwrap(), &caps).unwrap();
        assert!(v.value < 1e-5);
    }

    /// Direct sum over all colored paths, no bucketing.
    #[test]
    fn exact_expectation_matches_colored_enumeration() {
        let caps = Caps::default();
        let q = Deformation::from_ratio(3, 2).unwrap();
        let mask = m("ABBAABA");
        let (mut z, mut num) = (BigRational::zero(), BigRational::zero());
        for path in enumerate(7, Colors::Two, &caps).unwrap() {
            let w = q.pow_exact(path.doubled_area() as i64);
            num += &w * BigRational::from_integer(crossing_arcs(&path, &mask).unwrap().into());
            z += w;
        }
        let v = crossing_expectation_exact(7, &q, Colors::Two, &mask, &caps).unwrap();
        assert_eq!(v.exact, num / z);
    }

    #[test]
    fn monte_carlo_examples() {
        let one = Deformation::one();
        let all_a = SubsystemMask::uniform(10, Side::A);
        let e = crossing_expectation(10, &one, Colors::Two, &all_a, 1000, 5).unwrap();
        assert_eq!(e.mean, 0.0);
        let e = crossing_expectation(2, &one, Colors::One, &m("AB"), 100_000, 5).unwrap();
        assert!((e.mean - 0.5).abs() < 4.0 * e.stderr, "{e:?}");
        let again = crossing_expectation(2, &one, Colors::One, &m("AB"), 100_000, 5).unwrap();
        assert_eq!(e, again);
    }
}
