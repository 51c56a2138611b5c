//! Desk-scale experiments: EE-proxy exponents, gap decay, height laws and
//! exact small-lattice entropies, driven by a TOML experiment file.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Caps;
use crate::eigen::SolverConfig;
use crate::entanglement::{entropy, ground_state_report, RenyiEntropy};
use crate::error::{Error, Result};
use crate::hamiltonian::{spectral_gap, LocalBasis};
use crate::mask::mask_from_cut;
use crate::numeric::Deformation;
use crate::output::{fmt_f64, write_json, CsvTable, Metadata};
use crate::paths::Colors;
use crate::qdp::{crossing_expectation_with, endpoint_height_law, Sampler, WeightTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    EeScaling,
    GapScan,
    HeightProfile,
    ExactEeSmall,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::EeScaling => "ee_scaling",
            ExperimentKind::GapScan => "gap_scan",
            ExperimentKind::HeightProfile => "height_profile",
            ExperimentKind::ExactEeSmall => "exact_ee_small",
        }
    }
}

/// Exponent band for one deformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentBand {
    pub q: Deformation,
    pub min: f64,
    /// Absent means unbounded.
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub exponent_bands: Vec<ExponentBand>,
    /// Largest `(max - min) / max` of an O(1) gap row.
    pub gap_variation: f64,
    pub height_band: [f64; 2],
    pub h1_band: [f64; 2],
}

impl Default for Tolerances {
    fn default() -> Self {
        let band = |q: &str, min, max| ExponentBand {
            q: q.parse().expect("literal"),
            min,
            max,
        };
        Tolerances {
            exponent_bands: vec![
                band("3/2", 1.8, None),
                band("1", 1.3, Some(1.7)),
                band("2/3", 0.6, Some(1.3)),
            ],
            gap_variation: 0.5,
            height_band: [0.85, 1.15],
            h1_band: [0.8, 1.2],
        }
    }
}

/// One experiment file. Grids not used by `kind` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub q: Vec<Deformation>,
    /// Lattice sizes, for `ee_scaling`.
    pub l: Vec<usize>,
    /// Chain lengths, for `gap_scan` and `height_profile`.
    pub n: Vec<usize>,
    pub colors: Vec<Colors>,
    pub samples: u64,
    pub seed: Option<u64>,
    /// Positions reported by `height_profile`; empty means the midpoint.
    pub x: Vec<usize>,
    /// `(h0, x)` pairs for the started-at-height law.
    pub h1_law: Vec<(usize, usize)>,
    pub alphas: Vec<f64>,
    pub solver: SolverConfig,
    pub tolerances: Tolerances,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            kind: ExperimentKind::EeScaling,
            q: ["3/2", "1", "2/3"].iter().map(|s| s.parse().expect("literal")).collect(),
            l: vec![8, 12, 16, 20, 24],
            n: vec![4, 6, 8, 10, 12],
            colors: vec![Colors::Two],
            samples: 100_000,
            seed: None,
            x: Vec::new(),
            h1_law: Vec::new(),
            alphas: vec![0.5, 2.0],
            solver: SolverConfig::default(),
            tolerances: Tolerances::default(),
            output: None,
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("experiment file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self, caps: &Caps) -> Result<()> {
        if self.colors.is_empty() {
            return Err(Error::invalid("colors grid is empty"));
        }
        match self.kind {
            ExperimentKind::EeScaling => {
                if self.seed.is_none() {
                    return Err(Error::invalid("ee_scaling needs a seed"));
                }
                if self.samples == 0 {
                    return Err(Error::invalid("samples must be positive"));
                }
                for &l in &self.l {
                    mask_from_cut(l, 0)?;
                }
            }
            ExperimentKind::GapScan => {
                for &c in &self.colors {
                    for &n in &self.n {
                        let dim = (LocalBasis::new(c).dim() as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
                        crate::error::check_cap("ed_dimension", caps.ed_dimension, dim)?;
                    }
                }
            }
            ExperimentKind::HeightProfile => {
                for &n in &self.n {
                    if let Some(&x) = self.x.iter().find(|&&x| x > n) {
                        return Err(Error::invalid(format!("position {x} outside chain of length {n}")));
                    }
                }
            }
            ExperimentKind::ExactEeSmall => {}
        }
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::invalid("experiment needs a seed"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub exponent: f64,
    pub stderr: f64,
    pub prefactor: f64,
    /// Euclidean norm of the log-space residuals.
    pub residual_norm: f64,
    pub points: Vec<(f64, f64)>,
}

/// Least squares of `ln y` against `ln x`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::invalid(format!("a fit needs at least 4 points, got {}", points.len())));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::invalid("power-law fit needs positive coordinates"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("power-law fit needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ssr: f64 = logs.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    Ok(FitResult {
        exponent: slope,
        stderr: (ssr / (m - 2.0) / sxx).sqrt(),
        prefactor: icpt.exp(),
        residual_norm: ssr.sqrt(),
        points: points.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EeRow {
    pub l: usize,
    pub q: Deformation,
    pub colors: Colors,
    pub n: usize,
    pub samples: u64,
    pub mean_k: f64,
    pub stderr_k: f64,
    /// `ln 2 * E[k]` and its error.
    pub ee_proxy: f64,
    pub ee_proxy_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseFit {
    pub q: Deformation,
    pub colors: Colors,
    pub fit: FitResult,
    pub band: Option<ExponentBand>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EeScaling {
    pub rows: Vec<EeRow>,
    pub fits: Vec<PhaseFit>,
    /// Exponents strictly decrease with decreasing `q`, per color count.
    pub ordering: Option<bool>,
}

pub fn run_ee_scaling(spec: &ExperimentSpec) -> Result<EeScaling> {
    let seed = spec.require_seed()?;
    let jobs: Vec<(Colors, Deformation, usize)> = spec
        .colors
        .iter()
        .flat_map(|&c| spec.q.iter().flat_map(move |q| spec.l.iter().map(move |&l| (c, q.clone(), l))))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|(c, q, l)| {
            let mask = mask_from_cut(*l, 0)?;
            let n = mask.len();
            let table = WeightTable::log_domain(n, q, *c)?;
            let est = crossing_expectation_with(&Sampler::new(&table), &mask, spec.samples, seed)?;
            Ok(EeRow {
                l: *l,
                q: q.clone(),
                colors: *c,
                n,
                samples: spec.samples,
                mean_k: est.mean,
                stderr_k: est.stderr,
                ee_proxy: std::f64::consts::LN_2 * est.mean,
                ee_proxy_stderr: std::f64::consts::LN_2 * est.stderr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut fits = Vec::new();
    for &c in &spec.colors {
        for q in &spec.q {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.colors == c && &r.q == q)
                .map(|r| (r.l as f64, r.ee_proxy))
                .collect();
            let fit = fit_power_law(&points)?;
            let band = spec.tolerances.exponent_bands.iter().find(|b| &b.q == q);
            fits.push(PhaseFit {
                q: q.clone(),
                colors: c,
                band: band.cloned(),
                pass: band.map(|b| fit.exponent >= b.min && b.max.map_or(true, |m| fit.exponent <= m)),
                fit,
            });
        }
    }
    let ordering = if spec.q.len() >= 2 {
        Some(spec.colors.iter().all(|&c| {
            let mut by_q: Vec<(f64, f64)> = fits
                .iter()
                .filter(|f| f.colors == c)
                .map(|f| (f.q.value(), f.fit.exponent))
                .collect();
            by_q.sort_by(|a, b| a.0.total_cmp(&b.0));
            by_q.windows(2).all(|w| w[1].1 > w[0].1)
        }))
    } else {
        None
    };
    Ok(EeScaling { rows, fits, ordering })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub n: usize,
    pub q: Deformation,
    pub colors: Colors,
    pub gap: Option<f64>,
    pub lambda0: Option<f64>,
    pub lambda1: Option<f64>,
    pub ground_multiplicity: Option<usize>,
    pub max_residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayClass {
    /// Variation across the grid below the configured tolerance.
    Constant,
    /// Gaps fall while successive ratios approach one.
    Polynomial,
    /// Successive ratios themselves shrink.
    FasterThanPolynomial,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapClassification {
    pub q: Deformation,
    pub colors: Colors,
    pub class: DecayClass,
    pub strictly_decreasing: bool,
    /// `gap(n_{i+1}) / gap(n_i)`.
    pub ratios: Vec<f64>,
    /// `ln(gap_i / gap_{i+1}) / ln(n_{i+1} / n_i)`.
    pub local_exponents: Vec<f64>,
    /// `(max - min) / max` over the grid.
    pub variation: f64,
    pub fit: Option<FitResult>,
    /// `max / min` of `gap * n^p` with the fitted `p`.
    pub scaled_spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapScan {
    pub rows: Vec<GapRow>,
    pub classes: Vec<GapClassification>,
}

pub fn classify_gaps(ns: &[usize], gaps: &[f64], variation_tol: f64) -> (DecayClass, GapClassification) {
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[1] / w[0]).collect();
    let local_exponents = gaps
        .windows(2)
        .zip(ns.windows(2))
        .map(|(g, n)| (g[0] / g[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
        .collect();
    let max = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let variation = (max - min) / max;
    let strictly_decreasing = ratios.iter().all(|&r| r < 1.0);
    let points: Vec<(f64, f64)> = ns.iter().zip(gaps).map(|(&n, &g)| (n as f64, g)).collect();
    let fit = fit_power_law(&points).ok();
    let scaled_spread = fit.as_ref().map(|f| {
        let s: Vec<f64> = points.iter().map(|&(n, g)| g * n.powf(-f.exponent)).collect();
        s.iter().copied().fold(f64::NEG_INFINITY, f64::max) / s.iter().copied().fold(f64::INFINITY, f64::min)
    });
    let class = if gaps.len() < 3 {
        DecayClass::Inconclusive
    } else if variation < variation_tol {
        DecayClass::Constant
    } else if !strictly_decreasing {
        DecayClass::Inconclusive
    } else if ratios.windows(2).all(|w| w[1] < w[0]) {
        DecayClass::FasterThanPolynomial
    } else if ratios.windows(2).all(|w| w[1] >= w[0]) {
        DecayClass::Polynomial
    } else {
        DecayClass::Inconclusive
    };
    let c = GapClassification {
        q: Deformation::one(),
        colors: Colors::One,
        class,
        strictly_decreasing,
        ratios,
        local_exponents,
        variation,
        fit,
        scaled_spread,
    };
    (class, c)
}

pub fn run_gap_scan(spec: &ExperimentSpec, caps: &Caps) -> Result<GapScan> {
    spec.validate(caps)?;
    let jobs: Vec<(Colors, Deformation, usize)> = spec
        .colors
        .iter()
        .flat_map(|&c| spec.q.iter().flat_map(move |q| spec.n.iter().map(move |&n| (c, q.clone(), n))))
        .collect();
    // each solve is internally parallel; run the grid in order
    let rows: Vec<GapRow> = jobs
        .iter()
        .map(|(c, q, n)| match spectral_gap(*n, q, *c, caps, &spec.solver) {
            Ok(g) => GapRow {
                n: *n,
                q: q.clone(),
                colors: *c,
                gap: Some(g.gap),
                lambda0: Some(g.lambda0),
                lambda1: Some(g.lambda1),
                ground_multiplicity: Some(g.ground_multiplicity),
                max_residual: Some(g.residuals.iter().copied().fold(0.0, f64::max)),
                error: None,
            },
            Err(e) => GapRow {
                n: *n,
                q: q.clone(),
                colors: *c,
                gap: None,
                lambda0: None,
                lambda1: None,
                ground_multiplicity: None,
                max_residual: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let mut classes = Vec::new();
    for &c in &spec.colors {
        for q in &spec.q {
            let (ns, gaps): (Vec<usize>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.colors == c && &r.q == q)
                .filter_map(|r| r.gap.map(|g| (r.n, g)))
                .unzip();
            let (_, mut cl) = classify_gaps(&ns, &gaps, spec.tolerances.gap_variation);
            cl.q = q.clone();
            cl.colors = c;
            classes.push(cl);
        }
    }
    Ok(GapScan { rows, classes })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeightRow {
    pub n: usize,
    pub x: usize,
    pub colors: Colors,
    pub mean_h: f64,
    pub mode_h: usize,
    pub sqrt_x_over_3: f64,
    /// `mode / sqrt(x/3)`; undefined at `x = 0`.
    pub ratio: Option<f64>,
    pub in_band: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H1Row {
    pub h0: usize,
    pub x: usize,
    pub colors: Colors,
    pub mode_h1: usize,
    pub mean_h1: f64,
    /// `sqrt((x - h0^2) / 3)`, undefined when `x < h0^2`.
    pub predicted: Option<f64>,
    pub ratio: Option<f64>,
    pub in_band: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeightProfile {
    pub q: Deformation,
    pub rows: Vec<HeightRow>,
    pub h1_rows: Vec<H1Row>,
}

fn band_check(ratio: Option<f64>, band: [f64; 2]) -> Option<bool> {
    ratio.map(|r| r >= band[0] && r <= band[1])
}

/// Exact marginals at `q = spec.q[0]` (default the undeformed point).
pub fn run_height_profile(spec: &ExperimentSpec, caps: &Caps) -> Result<HeightProfile> {
    spec.validate(caps)?;
    let q = spec.q.first().cloned().unwrap_or_else(Deformation::one);
    let mut rows = Vec::new();
    for &c in &spec.colors {
        for &n in &spec.n {
            let table = WeightTable::log_domain(n, &q, c)?;
            let xs = if spec.x.is_empty() { vec![n / 2] } else { spec.x.clone() };
            for x in xs {
                let st = table.height_stat(x);
                let pred = (x as f64 / 3.0).sqrt();
                let ratio = (x > 0).then(|| st.mode as f64 / pred);
                rows.push(HeightRow {
                    n,
                    x,
                    colors: c,
                    mean_h: st.mean,
                    mode_h: st.mode,
                    sqrt_x_over_3: pred,
                    ratio,
                    in_band: band_check(ratio, spec.tolerances.height_band),
                });
            }
        }
    }
    let mut h1_rows = Vec::new();
    for &c in &spec.colors {
        for &(h0, x) in &spec.h1_law {
            let law = endpoint_height_law(x, h0, c);
            let excess = x as f64 - (h0 * h0) as f64;
            let predicted = (excess > 0.0).then(|| (excess / 3.0).sqrt());
            let ratio = predicted.map(|p| law.mode as f64 / p);
            h1_rows.push(H1Row {
                h0,
                x,
                colors: c,
                mode_h1: law.mode,
                mean_h1: law.mean,
                predicted,
                ratio,
                in_band: band_check(ratio, spec.tolerances.h1_band),
            });
        }
    }
    Ok(HeightProfile { q, rows, h1_rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallEeRow {
    pub l: usize,
    pub q: Deformation,
    pub colors: Colors,
    pub von_neumann: f64,
    pub complement_von_neumann: f64,
    pub renyi: Vec<RenyiEntropy>,
    pub schmidt_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallEe {
    pub rows: Vec<SmallEeRow>,
    /// Colorless entropy is largest at `q = 1` on the grid.
    pub max_at_one: Option<bool>,
    /// Colored entropy exceeds colorless at `q = 1`.
    pub colored_exceeds: Option<bool>,
    pub complement_symmetric: bool,
}

/// Exact Schmidt entropies of the `L = 2` diagonal cut (`n = 8`).
pub fn run_exact_ee_small(spec: &ExperimentSpec, caps: &Caps) -> Result<SmallEe> {
    let mask = mask_from_cut(2, 0)?;
    let n = mask.len();
    let mut rows = Vec::new();
    for &c in &spec.colors {
        for q in &spec.q {
            let (r, s) = ground_state_report(n, q, c, &mask, &spec.alphas, caps)?;
            let (rc, _) = ground_state_report(n, q, c, &mask.complement(), &[], caps)?;
            debug_assert!((entropy(&s.values, 1.0)? - r.von_neumann).abs() < 1e-12);
            rows.push(SmallEeRow {
                l: 2,
                q: q.clone(),
                colors: c,
                von_neumann: r.von_neumann,
                complement_von_neumann: rc.von_neumann,
                renyi: r.renyi,
                schmidt_rank: r.schmidt_rank,
            });
        }
    }
    let at = |c: Colors| rows.iter().find(|r| r.colors == c && r.q.is_one()).map(|r| r.von_neumann);
    let max_at_one = at(Colors::One).map(|s1| {
        rows.iter()
            .filter(|r| r.colors == Colors::One)
            .all(|r| s1 >= r.von_neumann - 1e-12)
    });
    let colored_exceeds = match (at(Colors::One), at(Colors::Two)) {
        (Some(a), Some(b)) => Some(b > a),
        _ => None,
    };
    let complement_symmetric = rows
        .iter()
        .all(|r| (r.von_neumann - r.complement_von_neumann).abs() < 1e-10);
    Ok(SmallEe {
        rows,
        max_at_one,
        colored_exceeds,
        complement_symmetric,
    })
}

/// Result of any experiment kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExperimentResult {
    EeScaling(EeScaling),
    GapScan(GapScan),
    HeightProfile(HeightProfile),
    ExactEeSmall(SmallEe),
}

pub fn run_experiment(spec: &ExperimentSpec, caps: &Caps) -> Result<ExperimentResult> {
    spec.validate(caps)?;
    Ok(match spec.kind {
        ExperimentKind::EeScaling => ExperimentResult::EeScaling(run_ee_scaling(spec)?),
        ExperimentKind::GapScan => ExperimentResult::GapScan(run_gap_scan(spec, caps)?),
        ExperimentKind::HeightProfile => ExperimentResult::HeightProfile(run_height_profile(spec, caps)?),
        ExperimentKind::ExactEeSmall => ExperimentResult::ExactEeSmall(run_exact_ee_small(spec, caps)?),
    })
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

fn opt_f(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_f64)
}

impl ExperimentResult {
    /// The grid as a fixed-header table.
    pub fn table(&self) -> CsvTable {
        match self {
            ExperimentResult::EeScaling(r) => {
                let mut t = CsvTable::new(&["L", "q", "c", "n", "samples", "mean_k", "stderr_k", "ln2_Ek", "ln2_Ek_stderr"]);
                for row in &r.rows {
                    t.push(vec![
                        row.l.to_string(),
                        row.q.to_string(),
                        row.colors.count().to_string(),
                        row.n.to_string(),
                        row.samples.to_string(),
                        fmt_f64(row.mean_k),
                        fmt_f64(row.stderr_k),
                        fmt_f64(row.ee_proxy),
                        fmt_f64(row.ee_proxy_stderr),
                    ]);
                }
                t
            }
            ExperimentResult::GapScan(r) => {
                let mut t = CsvTable::new(&["n", "q", "c", "gap", "lambda0", "lambda1", "ground_multiplicity", "max_residual", "error"]);
                for row in &r.rows {
                    t.push(vec![
                        row.n.to_string(),
                        row.q.to_string(),
                        row.colors.count().to_string(),
                        opt_f(row.gap),
                        opt_f(row.lambda0),
                        opt_f(row.lambda1),
                        opt(&row.ground_multiplicity),
                        opt_f(row.max_residual),
                        opt(&row.error),
                    ]);
                }
                t
            }
            ExperimentResult::HeightProfile(r) => {
                let mut t = CsvTable::new(&["n", "x", "c", "mean_h", "mode_h", "sqrt_x_over_3", "ratio", "in_band"]);
                for row in &r.rows {
                    t.push(vec![
                        row.n.to_string(),
                        row.x.to_string(),
                        row.colors.count().to_string(),
                        fmt_f64(row.mean_h),
                        row.mode_h.to_string(),
                        fmt_f64(row.sqrt_x_over_3),
                        opt_f(row.ratio),
                        opt(&row.in_band),
                    ]);
                }
                t
            }
            ExperimentResult::ExactEeSmall(r) => {
                let mut t = CsvTable::new(&["L", "q", "c", "S_vN", "S_complement", "schmidt_rank", "renyi"]);
                for row in &r.rows {
                    let renyi: Vec<String> = row
                        .renyi
                        .iter()
                        .map(|e| format!("{}:{}", e.alpha, fmt_f64(e.entropy)))
                        .collect();
                    t.push(vec![
                        row.l.to_string(),
                        row.q.to_string(),
                        row.colors.count().to_string(),
                        fmt_f64(row.von_neumann),
                        fmt_f64(row.complement_von_neumann),
                        row.schmidt_rank.to_string(),
                        renyi.join(";"),
                    ]);
                }
                t
            }
        }
    }

    /// Fits, classifications and band flags, without the grid rows.
    pub fn summary(&self) -> Value {
        match self {
            ExperimentResult::EeScaling(r) => json!({ "fits": r.fits, "ordering": r.ordering }),
            ExperimentResult::GapScan(r) => json!({ "classes": r.classes }),
            ExperimentResult::HeightProfile(r) => json!({
                "q": r.q,
                "midpoints": r.rows,
                "h1_law": r.h1_rows,
            }),
            ExperimentResult::ExactEeSmall(r) => json!({
                "max_at_one": r.max_at_one,
                "colored_exceeds": r.colored_exceeds,
                "complement_symmetric": r.complement_symmetric,
            }),
        }
    }
}

/// Write `<kind>.csv` and `<kind>.json` under `dir`; returns both paths.
pub fn write_outputs(result: &ExperimentResult, kind: ExperimentKind, dir: &Path, meta: &Metadata) -> Result<(PathBuf, PathBuf)> {
    let csv = dir.join(format!("{}.csv", kind.name()));
    let js = dir.join(format!("{}.json", kind.name()));
    result.table().write_file(&csv, meta)?;
    write_json(&js, &result.summary(), meta)?;
    Ok((csv, js))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_power_laws() {
        let sq: Vec<(f64, f64)> = [2.0, 4.0, 8.0, 16.0].iter().map(|&l| (l, l * l)).collect();
        let f = fit_power_law(&sq).unwrap();
        assert_abs_diff_eq!(f.exponent, 2.0, epsilon = 1e-12);
        assert!(f.stderr < 1e-12);
        let p: Vec<(f64, f64)> = [3.0, 5.0, 7.0, 11.0, 13.0].iter().map(|&l: &f64| (l, 7.0 * l.powf(1.5))).collect();
        let f = fit_power_law(&p).unwrap();
        assert_abs_diff_eq!(f.exponent, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f.prefactor, 7.0, epsilon = 1e-10);
    }

    #[test]
    fn noisy_linear_fit() {
        let eps = [0.05, -0.05, 0.03, -0.02, 0.04, -0.05];
        let p: Vec<(f64, f64)> = (0..6).map(|i| {
            let l = 4.0 * (i + 1) as f64;
            (l, l * (1.0 + eps[i]))
        }).collect();
        let f = fit_power_law(&p).unwrap();
        assert!((0.9..=1.1).contains(&f.exponent), "{}", f.exponent);
    }

    #[test]
    fn fit_rejections() {
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 0.0), (3.0, 3.0), (4.0, 4.0)]).is_err());
    }

    #[test]
    fn classification_of_synthetic_decays() {
        let ns = [4, 6, 8, 10, 12];
        let poly: Vec<f64> = ns.iter().map(|&n| (n as f64).powi(-3)).collect();
        assert_eq!(classify_gaps(&ns, &poly, 0.5).0, DecayClass::Polynomial);
        let fast: Vec<f64> = ns.iter().map(|&n| (-((n * n) as f64) / 4.0).exp()).collect();
        assert_eq!(classify_gaps(&ns, &fast, 0.5).0, DecayClass::FasterThanPolynomial);
        let flat = [0.3, 0.29, 0.28, 0.28, 0.27];
        assert_eq!(classify_gaps(&ns, &flat, 0.5).0, DecayClass::Constant);
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            kind = "gap_scan"
            q = ["1", "3/2"]
            n = [4, 6, 8, 10]
            colors = [1]
        "#;
        let spec = ExperimentSpec::from_toml(text).unwrap();
        assert_eq!(spec.kind, ExperimentKind::GapScan);
        assert_eq!(spec.q[1], "3/2".parse().unwrap());
        let back = ExperimentSpec::from_toml(&toml::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(ExperimentSpec::from_toml("kind = \"nope\"").is_err());
    }

    #[test]
    fn seed_is_mandatory_for_sampling() {
        let spec = ExperimentSpec::default();
        assert!(spec.validate(&Caps::default()).is_err());
    }

    #[test]
    fn small_gap_scan() {
        let spec = ExperimentSpec {
            kind: ExperimentKind::GapScan,
            q: vec!["1".parse().unwrap()],
            n: vec![4, 5, 6, 7],
            colors: vec![Colors::One],
            ..Default::default()
        };
        let r = run_gap_scan(&spec, &Caps::default()).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(r.classes[0].strictly_decreasing);
    }

    #[test]
    fn height_profile_pins_boundary() {
        let spec = ExperimentSpec {
            kind: ExperimentKind::HeightProfile,
            q: vec![Deformation::one()],
            n: vec![40],
            x: vec![0, 20],
            colors: vec![Colors::One],
            h1_law: vec![(2, 30)],
            ..Default::default()
        };
        let r = run_height_profile(&spec, &Caps::default()).unwrap();
        assert_eq!(r.rows[0].mode_h, 0);
        assert_eq!(r.rows[0].ratio, None);
        assert_eq!(r.h1_rows.len(), 1);
    }

    #[test]
    fn exact_small_entropies() {
        let spec = ExperimentSpec {
            kind: ExperimentKind::ExactEeSmall,
            q: ["1/2", "1", "2"].iter().map(|s| s.parse().unwrap()).collect(),
            colors: vec![Colors::One, Colors::Two],
            ..Default::default()
        };
        let r = run_exact_ee_small(&spec, &Caps::default()).unwrap();
        assert_eq!(r.max_at_one, Some(true));
        assert_eq!(r.colored_exceeds, Some(true));
        assert!(r.complement_symmetric);
    }

    #[test]
    fn ee_scaling_is_reproducible() {
        let spec = ExperimentSpec {
            q: vec!["1".parse().unwrap()],
            l: vec![2, 4, 6, 8],
            samples: 2000,
            seed: Some(11),
            ..Default::default()
        };
        let a = run_ee_scaling(&spec).unwrap();
        let b = run_ee_scaling(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 4);
        assert_eq!(a.fits.len(), 1);
    }
}
