use serde::Serialize;

use super::argmax;
use crate::numeric::{log_add, log_sum};
use crate::paths::Colors;

/// `ln count_from_height(x, h0, h1, colors)` for every `h1 = 0..=h0+x`, in
/// floating point so that `x` in the thousands stays cheap.
pub fn ln_walk_counts(x: usize, h0: usize, colors: Colors) -> Vec<f64> {
    let top = h0 + x;
    let ln_c = f64::from(colors.count()).ln();
    match colors {
        Colors::One => {
            let mut cur = vec![f64::NEG_INFINITY; top + 2];
            cur[h0] = 0.0;
            for _ in 0..x {
                let mut next = vec![f64::NEG_INFINITY; top + 2];
                for h in 0..=top {
                    let mut v = cur[h];
                    if h > 0 {
                        v = log_add(v, cur[h - 1]);
                    }
                    v = log_add(v, cur[h + 1]);
                    next[h] = v;
                }
                cur = next;
            }
            cur.truncate(top + 1);
            cur
        }
        Colors::Two => {
            // state (height, running minimum clipped at h0)
            let w = h0 + 1;
            let idx = |h: usize, m: usize| h * w + m;
            let mut cur = vec![f64::NEG_INFINITY; (top + 2) * w];
            cur[idx(h0, h0)] = 0.0;
            for _ in 0..x {
                let mut next = vec![f64::NEG_INFINITY; cur.len()];
                for h in 0..=top {
                    for m in 0..=h0.min(h) {
                        let v = cur[idx(h, m)];
                        if v == f64::NEG_INFINITY {
                            continue;
                        }
                        let e = &mut next[idx(h, m)];
                        *e = log_add(*e, v);
                        let e = &mut next[idx(h + 1, m)];
                        *e = log_add(*e, v + ln_c);
                        if h > 0 {
                            let (m2, wd) = if h - 1 < m { (h - 1, ln_c) } else { (m, 0.0) };
                            let e = &mut next[idx(h - 1, m2)];
                            *e = log_add(*e, v + wd);
                        }
                    }
                }
                cur = next;
            }
            (0..=top)
                .map(|h| log_sum((0..=h0.min(h)).map(|m| cur[idx(h, m)])))
                .collect()
        }
    }
}

/// Distribution of the end height `h1` after `x` steps from `h0` at `q = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeightLaw {
    pub x: usize,
    pub h0: usize,
    /// `P(h1)` indexed by `h1`.
    pub probabilities: Vec<f64>,
    pub mode: usize,
    pub mean: f64,
}

/// End-height law of an `x`-step window started at `h0`, weighted by the
/// number of `x`-step completions back to height zero.
///
/// `P(h1) ∝ N(h0 -> h1, x) N(h1 -> 0, x)`. For two colors the completion's
/// downs that close arcs opened inside the window carry no extra color
/// freedom, which removes a factor `c^{h1}`; with `h0 = 0` the law is the
/// midpoint height marginal of a length-`2x` chain.
pub fn endpoint_height_law(x: usize, h0: usize, colors: Colors) -> HeightLaw {
    let ln_c = f64::from(colors.count()).ln();
    let head = ln_walk_counts(x, h0, colors);
    let tail = ln_walk_counts(x, 0, colors);
    let ln_w: Vec<f64> = head
        .iter()
        .enumerate()
        .map(|(h1, &a)| a + tail.get(h1).copied().unwrap_or(f64::NEG_INFINITY) - h1 as f64 * ln_c)
        .collect();
    let ln_z = log_sum(ln_w.iter().copied());
    let probabilities: Vec<f64> = ln_w
        .iter()
        .map(|&l| if l.is_finite() { (l - ln_z).exp() } else { 0.0 })
        .collect();
    let mean = probabilities.iter().enumerate().map(|(h, p)| h as f64 * p).sum();
    HeightLaw {
        x,
        h0,
        mode: argmax(&probabilities),
        mean,
        probabilities,
    }
}
