use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::WeightTable;
use crate::mask::SubsystemMask;
use crate::paths::{Color, Colors, MotzkinPath, Step, StepKind};

/// Where a sample came from: enough to regenerate it on any thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    pub index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSample {
    pub path: MotzkinPath,
    pub seed: SeedRecord,
}

/// Generator for sample `index` under `master`: a ChaCha keystream keyed by
/// the master seed, with the sample index selecting the stream. Samples are
/// independent of how indices are scheduled.
pub fn sample_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Exact forward sampler for the path measure of a [`WeightTable`].
///
/// At remaining length `r` and height `h` the next step is drawn with
/// probability `w(step) Z_suf[r-1][h'] / Z_suf[r][h]`; the two cumulative
/// thresholds per state are precomputed.
#[derive(Debug, Clone)]
pub struct Sampler {
    n: usize,
    colors: Colors,
    width: usize,
    thresholds: Vec<[f64; 2]>,
}

impl Sampler {
    pub fn new(table: &WeightTable) -> Self {
        let n = table.n();
        let width = table.h_max() + 2;
        let mut thresholds = vec![[0.0, 0.0]; (n + 1) * width];
        for r in 1..=n {
            for h in 0..=r.min(table.h_max()) {
                let total = table.ln_suffix(r, h);
                if !total.is_finite() {
                    continue;
                }
                let p = |kind: StepKind, h2: usize| {
                    let l = table.ln_step_weight(kind, h) + table.ln_suffix(r - 1, h2) - total;
                    if l.is_finite() {
                        l.exp()
                    } else {
                        0.0
                    }
                };
                let flat = if h < r { p(StepKind::Flat, h) } else { 0.0 };
                let up = if h + 1 < r { p(StepKind::Up, h + 1) } else { 0.0 };
                let t0 = flat;
                // a down step is impossible at h = 0: make the last bucket empty
                let t1 = if h == 0 { 1.0 } else { flat + up };
                thresholds[r * width + h] = [t0, t1];
            }
        }
        Sampler {
            n,
            colors: table.colors(),
            width,
            thresholds,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn step<R: Rng>(&self, rng: &mut R, r: usize, h: usize) -> StepKind {
        let [t0, t1] = self.thresholds[r * self.width + h];
        let u: f64 = rng.random();
        if u < t0 {
            StepKind::Flat
        } else if u < t1 {
            StepKind::Up
        } else {
            StepKind::Down
        }
    }

    pub fn sample_with<R: Rng>(&self, rng: &mut R) -> MotzkinPath {
        let mut steps = Vec::with_capacity(self.n);
        let mut open: Vec<Color> = Vec::new();
        let mut h = 0usize;
        for j in 0..self.n {
            let kind = self.step(rng, self.n - j, h);
            let step = match kind {
                StepKind::Flat => Step::FLAT,
                StepKind::Up => {
                    h += 1;
                    if self.colors.is_colored() {
                        let c = if rng.random::<bool>() { Color::Blue } else { Color::Red };
                        open.push(c);
                        Step::up(c)
                    } else {
                        Step::UP
                    }
                }
                StepKind::Down => {
                    h -= 1;
                    match open.pop() {
                        Some(c) => Step::down(c),
                        None => Step::DOWN,
                    }
                }
            };
            steps.push(step);
        }
        MotzkinPath::from_trusted(steps, self.colors)
    }

    pub fn sample(&self, master: u64, index: u64) -> PathSample {
        let path = self.sample_with(&mut sample_rng(master, index));
        PathSample {
            path,
            seed: SeedRecord { master, index },
        }
    }

    /// Crossing-arc count of one skeleton sample, without materializing the
    /// path. Colors do not affect `k`, so they are not drawn.
    pub fn sample_crossings(&self, master: u64, index: u64, mask: &SubsystemMask) -> usize {
        debug_assert_eq!(mask.len(), self.n);
        let mut rng = sample_rng(master, index);
        let mut open: Vec<usize> = Vec::new();
        let mut h = 0usize;
        let mut k = 0;
        for j in 0..self.n {
            match self.step(&mut rng, self.n - j, h) {
                StepKind::Flat => {}
                StepKind::Up => {
                    h += 1;
                    open.push(j);
                }
                StepKind::Down => {
                    h -= 1;
                    let i = open.pop().expect("sampler never goes below zero");
                    if mask.side(i) != mask.side(j) {
                        k += 1;
                    }
                }
            }
        }
        k
    }
}

/// One-off sample; build a [`Sampler`] to draw many.
pub fn sample(table: &WeightTable, master: u64, index: u64) -> PathSample {
    Sampler::new(table).sample(master, index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Deformation;
    use std::collections::HashMap;

    fn table(n: usize, q: &str, c: Colors) -> WeightTable {
        WeightTable::log_domain(n, &q.parse::<Deformation>().unwrap(), c).unwrap()
    }

    #[test]
    fn reproducible_from_seed_record() {
        let s = Sampler::new(&table(30, "1", Colors::Two));
        let a = s.sample(42, 17);
        let b = s.sample(42, 17);
        assert_eq!(a, b);
        assert_eq!(a.seed, SeedRecord { master: 42, index: 17 });
        assert_ne!(s.sample(42, 18).path, a.path);
    }

    #[test]
    fn two_site_frequency() {
        let s = Sampler::new(&table(2, "1", Colors::One));
        let n = 100_000;
        let ups = (0..n).filter(|&i| s.sample(9, i).path.up_count() == 1).count();
        let f = ups as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.005, "{f}");
    }

    fn modal(q: &str) -> String {
        let s = Sampler::new(&table(8, q, Colors::One));
        let mut freq: HashMap<String, usize> = HashMap::new();
        for i in 0..20_000 {
            *freq.entry(s.sample(1, i).path.to_string()).or_default() += 1;
        }
        freq.into_iter().max_by_key(|(_, v)| *v).unwrap().0
    }

    #[test]
    fn modal_samples() {
        assert_eq!(modal("3"), "UUUUDDDD");
        assert_eq!(modal("1/3"), "FFFFFFFF");
    }

    #[test]
    fn colored_samples_are_valid_and_arcs_track_heights() {
        let s = Sampler::new(&table(40, "3/2", Colors::Two));
        for i in 0..200 {
            let p = s.sample(3, i).path;
            assert!(crate::paths::validate(p.steps(), Colors::Two));
            let arcs = p.arc_matching();
            for (x, h) in p.heights().into_iter().enumerate() {
                assert_eq!(arcs.spanning(x), h as usize);
            }
        }
    }
}
