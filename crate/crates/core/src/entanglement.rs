//! Schmidt spectra and entropies of chain states across arbitrary
//! bipartitions.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Caps;
use crate::eigen::dense_spectrum;
use crate::error::{check_cap, Error, Result};
use crate::hamiltonian::{combinatorial_ground_vector, GroundVector, LocalBasis};
use crate::mask::{Side, SubsystemMask};
use crate::numeric::Deformation;
use crate::output::{fmt_f64, CsvTable};
use crate::paths::{Colors, MotzkinPath, Step};
use crate::qdp::crossing_arcs;

pub use crate::mask::{alternating_mask, contiguous_mask, mask_from_cut};

/// Schmidt values below this are treated as zero.
pub const RANK_TOL: f64 = 1e-14;
/// Values closer than this count as one degenerate level.
pub const LEVEL_TOL: f64 = 1e-9;
const NORM_TOL: f64 = 1e-9;

/// Skeleton-level boundary class: a connected component of the graph that
/// links colorless A- and B-restrictions co-occurring in the state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InterfaceClass {
    pub id: usize,
    /// Range of crossing-arc counts over the class support; `None` when some
    /// supported string is not a valid path.
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub a_configs: usize,
    pub b_configs: usize,
}

impl InterfaceClass {
    /// Crossing count, when it is the same for every supported string.
    pub fn k(&self) -> Option<usize> {
        match (self.k_min, self.k_max) {
            (Some(a), Some(b)) if a == b => Some(a),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchmidtSpectrum {
    pub colors: Colors,
    /// Descending, summing to one.
    pub values: Vec<f64>,
    /// Interface class of each value.
    pub class: Vec<usize>,
    pub classes: Vec<InterfaceClass>,
    /// Distinct colored restrictions on each side.
    pub a_restrictions: usize,
    pub b_restrictions: usize,
}

impl SchmidtSpectrum {
    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn von_neumann(&self) -> f64 {
        entropy(&self.values, 1.0).expect("spectrum is normalized")
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Interns keys to dense indices in first-seen order.
#[derive(Default)]
struct Interner(HashMap<u64, usize>);

impl Interner {
    fn id(&mut self, key: u64) -> usize {
        let next = self.0.len();
        *self.0.entry(key).or_insert(next)
    }
}

struct Entry {
    a: usize,
    b: usize,
    skel_a: usize,
    amp: f64,
    k: Option<usize>,
}

fn check_state(state: &GroundVector, mask: &SubsystemMask, caps: &Caps) -> Result<()> {
    if mask.len() != state.n() {
        return Err(Error::invalid(format!(
            "mask length {} does not match chain length {}",
            mask.len(),
            state.n()
        )));
    }
    let (cap, limit) = if state.colors().is_colored() {
        ("enumerate_colored", caps.enumerate_colored)
    } else {
        ("enumerate_colorless", caps.enumerate_colorless)
    };
    check_cap(cap, limit as u64, state.n() as u64)?;
    let norm2 = state.norm().powi(2);
    if (norm2 - 1.0).abs() > NORM_TOL {
        return Err(Error::invalid(format!("state is not normalized (norm^2 = {norm2})")));
    }
    Ok(())
}

/// Schmidt decomposition by grouping basis strings into (A, B) restrictions.
/// The coefficient matrix is block diagonal over connected components of the
/// restriction graph; each block gets its own SVD.
pub fn schmidt_spectrum(state: &GroundVector, mask: &SubsystemMask, caps: &Caps) -> Result<SchmidtSpectrum> {
    check_state(state, mask, caps)?;
    let basis = state.basis();
    let skel = LocalBasis::new(Colors::One);
    let d = basis.dim() as u64;
    let mut a_ids = Interner::default();
    let mut b_ids = Interner::default();
    let mut sa_ids = Interner::default();
    let mut sb_ids = Interner::default();
    let mut entries = Vec::with_capacity(state.len());
    let mut skel_edges = Vec::with_capacity(state.len());
    for (s, amp) in state.iter() {
        let digits = state.digits(s);
        let (mut a, mut b, mut sa, mut sb) = (0u64, 0u64, 0u64, 0u64);
        for (i, &g) in digits.iter().enumerate() {
            let sg = skel.index_of(basis.step_of(g).skeleton()) as u64;
            match mask.side(i) {
                Side::A => {
                    a = a * d + g as u64;
                    sa = sa * 3 + sg;
                }
                Side::B => {
                    b = b * d + g as u64;
                    sb = sb * 3 + sg;
                }
            }
        }
        let steps: Vec<Step> = digits.iter().map(|&g| basis.step_of(g)).collect();
        let k = MotzkinPath::new(steps, state.colors()).ok().map(|p| crossing_arcs(&p, mask)).transpose()?;
        let (skel_a, skel_b) = (sa_ids.id(sa), sb_ids.id(sb));
        skel_edges.push((skel_a, skel_b));
        entries.push(Entry {
            a: a_ids.id(a),
            b: b_ids.id(b),
            skel_a,
            amp,
            k,
        });
    }
    let (na, nb) = (a_ids.0.len(), b_ids.0.len());

    // skeleton classes, numbered by first appearance in basis order
    let nsa = sa_ids.0.len();
    let mut uf = UnionFind((0..nsa + sb_ids.0.len()).collect());
    for &(x, y) in &skel_edges {
        uf.union(x, nsa + y);
    }
    let mut class_of_root: HashMap<usize, usize> = HashMap::new();
    let mut class_of_skel_a = vec![0; nsa];
    for (x, slot) in class_of_skel_a.iter_mut().enumerate() {
        let next = class_of_root.len();
        *slot = *class_of_root.entry(uf.find(x)).or_insert(next);
    }
    let mut first_seen = vec![usize::MAX; class_of_root.len()];
    let mut renumber = Vec::new();
    for e in &entries {
        let c = class_of_skel_a[e.skel_a];
        if first_seen[c] == usize::MAX {
            first_seen[c] = renumber.len();
            renumber.push(c);
        }
    }
    let mut classes: Vec<InterfaceClass> = (0..renumber.len())
        .map(|id| InterfaceClass {
            id,
            k_min: None,
            k_max: None,
            a_configs: 0,
            b_configs: 0,
        })
        .collect();
    let mut invalid = vec![false; classes.len()];
    let mut seen_sa = vec![false; nsa];
    let mut seen_sb = vec![false; sb_ids.0.len()];
    for (e, &(_, sb)) in entries.iter().zip(&skel_edges) {
        let c = first_seen[class_of_skel_a[e.skel_a]];
        let cl = &mut classes[c];
        match e.k {
            Some(k) => {
                cl.k_min = Some(cl.k_min.map_or(k, |m| m.min(k)));
                cl.k_max = Some(cl.k_max.map_or(k, |m| m.max(k)));
            }
            None => invalid[c] = true,
        }
        if !std::mem::replace(&mut seen_sa[e.skel_a], true) {
            cl.a_configs += 1;
        }
        if !std::mem::replace(&mut seen_sb[sb], true) {
            cl.b_configs += 1;
        }
    }
    for (cl, bad) in classes.iter_mut().zip(invalid) {
        if bad {
            cl.k_min = None;
            cl.k_max = None;
        }
    }

    // colored blocks
    let mut uf = UnionFind((0..na + nb).collect());
    for e in &entries {
        uf.union(e.a, na + e.b);
    }
    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        blocks.entry(uf.find(e.a)).or_default().push(i);
    }
    let blocks: Vec<Vec<usize>> = blocks.into_values().collect();
    let mut tagged: Vec<(f64, usize)> = blocks
        .par_iter()
        .flat_map_iter(|members| {
            let mut rows = Interner::default();
            let mut cols = Interner::default();
            let idx: Vec<(usize, usize)> = members
                .iter()
                .map(|&m| (rows.id(entries[m].a as u64), cols.id(entries[m].b as u64)))
                .collect();
            let mut mat = DMatrix::<f64>::zeros(rows.0.len(), cols.0.len());
            for (&m, &(r, c)) in members.iter().zip(&idx) {
                mat[(r, c)] += entries[m].amp;
            }
            let class = first_seen[class_of_skel_a[entries[members[0]].skel_a]];
            let sv = if mat.nrows() == 1 || mat.ncols() == 1 {
                vec![mat.norm()]
            } else {
                mat.svd(false, false).singular_values.iter().copied().collect()
            };
            sv.into_iter().map(move |s| (s * s, class))
        })
        .filter(|&(p, _)| p > RANK_TOL)
        .collect();
    tagged.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    Ok(SchmidtSpectrum {
        colors: state.colors(),
        values: tagged.iter().map(|t| t.0).collect(),
        class: tagged.iter().map(|t| t.1).collect(),
        classes,
        a_restrictions: na,
        b_restrictions: nb,
    })
}

/// Rényi entropy in nats; `alpha = 1` is von Neumann, `alpha = inf` the
/// min-entropy.
pub fn entropy(values: &[f64], alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::invalid(format!("Rényi index must be nonnegative, got {alpha}")));
    }
    let total: f64 = values.iter().sum();
    if (total - 1.0).abs() > NORM_TOL || values.iter().any(|&p| p < 0.0) {
        return Err(Error::invalid(format!("spectrum is not normalized (sum = {total})")));
    }
    let support = values.iter().copied().filter(|&p| p > RANK_TOL);
    let s = if alpha == 0.0 {
        (support.count() as f64).ln()
    } else if alpha == 1.0 {
        -support.map(|p| p * p.ln()).sum::<f64>()
    } else if alpha.is_infinite() {
        -support.fold(0.0, f64::max).ln()
    } else {
        support.map(|p| p.powf(alpha)).sum::<f64>().ln() / (1.0 - alpha)
    };
    Ok(s.max(0.0))
}

/// Eigenvalues of the dense reduced density matrix of the smaller side,
/// descending. Independent of the grouping code above.
pub fn rdm_oracle(state: &GroundVector, mask: &SubsystemMask, caps: &Caps) -> Result<Vec<f64>> {
    if mask.len() != state.n() {
        return Err(Error::invalid("mask length does not match chain length"));
    }
    let d = state.basis().dim() as u64;
    let dim = d.checked_pow(state.n() as u32).unwrap_or(u64::MAX);
    check_cap("rdm_dimension", caps.rdm_dimension, dim)?;
    let keep = if mask.count(Side::A) <= mask.count(Side::B) { Side::A } else { Side::B };
    let kept = mask.positions(keep);
    let traced = mask.positions(keep.other());
    let dk = d.pow(kept.len() as u32) as usize;
    let dt = d.pow(traced.len() as u32) as usize;
    let psi = state.to_dense(dim as usize);
    let mut m = DMatrix::<f64>::zeros(dk, dt);
    let n = state.n();
    for (s, &amp) in psi.iter().enumerate() {
        if amp == 0.0 {
            continue;
        }
        let digit = |site: usize| (s as u64 / d.pow((n - 1 - site) as u32)) % d;
        let r = kept.iter().fold(0u64, |acc, &i| acc * d + digit(i)) as usize;
        let c = traced.iter().fold(0u64, |acc, &i| acc * d + digit(i)) as usize;
        m[(r, c)] = amp;
    }
    let rho = &m * m.transpose();
    let (mut values, _) = dense_spectrum(&rho);
    values.reverse();
    Ok(values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyLevel {
    pub class: usize,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub value: f64,
    pub multiplicity: usize,
    /// Expected divisor of `multiplicity`: `c^k_min`.
    pub factor: usize,
}

impl DegeneracyLevel {
    pub fn holds(&self) -> bool {
        self.multiplicity % self.factor == 0
    }
}

/// Equal-value levels within each interface class.
pub fn degeneracy_structure(spectrum: &SchmidtSpectrum) -> Vec<DegeneracyLevel> {
    let mut by_class: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (&v, &c) in spectrum.values.iter().zip(&spectrum.class) {
        by_class.entry(c).or_default().push(v);
    }
    let base = spectrum.colors.count() as usize;
    let mut out = Vec::new();
    for (c, values) in by_class {
        let cl = &spectrum.classes[c];
        let factor = base.pow(cl.k_min.unwrap_or(0) as u32);
        // values arrive descending
        let mut i = 0;
        while i < values.len() {
            let mut j = i + 1;
            while j < values.len() && values[i] - values[j] <= LEVEL_TOL {
                j += 1;
            }
            out.push(DegeneracyLevel {
                class: c,
                k_min: cl.k_min,
                k_max: cl.k_max,
                value: values[i],
                multiplicity: j - i,
                factor,
            });
            i = j;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenyiEntropy {
    pub alpha: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntanglementReport {
    pub n: usize,
    pub colors: Colors,
    pub mask: SubsystemMask,
    #[serde(rename = "S_vN")]
    pub von_neumann: f64,
    pub renyi: Vec<RenyiEntropy>,
    pub schmidt_rank: usize,
    /// Mean crossing-arc count under the state's Born distribution.
    pub mean_crossings: f64,
    /// `ln c * E[k]`; zero for the colorless chain.
    pub color_sector: f64,
    /// `S - ln c * E[k]`.
    pub residual: f64,
}

pub fn entanglement_report(
    state: &GroundVector,
    mask: &SubsystemMask,
    alphas: &[f64],
    caps: &Caps,
) -> Result<(EntanglementReport, SchmidtSpectrum)> {
    let spectrum = schmidt_spectrum(state, mask, caps)?;
    let von_neumann = spectrum.von_neumann();
    let renyi = alphas
        .iter()
        .map(|&alpha| Ok(RenyiEntropy { alpha, entropy: entropy(&spectrum.values, alpha)? }))
        .collect::<Result<_>>()?;
    let basis = state.basis();
    let mut mean_crossings = 0.0;
    for (s, amp) in state.iter() {
        let steps = state.digits(s).into_iter().map(|g| basis.step_of(g)).collect();
        if let Ok(path) = MotzkinPath::new(steps, state.colors()) {
            mean_crossings += amp * amp * crossing_arcs(&path, mask)? as f64;
        }
    }
    let color_sector = (state.colors().count() as f64).ln() * mean_crossings;
    let report = EntanglementReport {
        n: state.n(),
        colors: state.colors(),
        mask: mask.clone(),
        von_neumann,
        renyi,
        schmidt_rank: spectrum.rank(),
        mean_crossings,
        color_sector,
        residual: von_neumann - color_sector,
    };
    Ok((report, spectrum))
}

/// Report for the exact ground state of the `(n, q, c)` chain.
pub fn ground_state_report(
    n: usize,
    q: &Deformation,
    colors: Colors,
    mask: &SubsystemMask,
    alphas: &[f64],
    caps: &Caps,
) -> Result<(EntanglementReport, SchmidtSpectrum)> {
    let gs = combinatorial_ground_vector(n, q, colors, caps)?;
    entanglement_report(&gs, mask, alphas, caps)
}

/// Columns `rank,value,class,k`; `k` is blank for mixed classes.
pub fn spectrum_csv(spectrum: &SchmidtSpectrum) -> CsvTable {
    let mut table = CsvTable::new(&["rank", "value", "class", "k"]);
    for (i, (&v, &c)) in spectrum.values.iter().zip(&spectrum.class).enumerate() {
        let k = spectrum.classes[c].k().map_or_else(String::new, |k| k.to_string());
        table.push(vec![(i + 1).to_string(), fmt_f64(v), c.to_string(), k]);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn q(v: &str) -> Deformation {
        v.parse().unwrap()
    }

    fn mask(s: &str) -> SubsystemMask {
        s.parse().unwrap()
    }

    fn gs(n: usize, qs: &str, c: Colors) -> GroundVector {
        combinatorial_ground_vector(n, &q(qs), c, &Caps::default()).unwrap()
    }

    #[test]
    fn two_site_colored_is_flat() {
        let s = schmidt_spectrum(&gs(2, "1", Colors::Two), &mask("AB"), &Caps::default()).unwrap();
        assert_eq!(s.rank(), 3);
        for &v in &s.values {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(s.von_neumann(), 3f64.ln(), epsilon = 1e-13);
    }

    #[test]
    fn two_site_colorless_spectrum() {
        for qs in ["1/2", "2", "3/2"] {
            let qv = q(qs).value();
            let s = schmidt_spectrum(&gs(2, qs, Colors::One), &mask("AB"), &Caps::default()).unwrap();
            let z = 1.0 + qv * qv;
            let mut expect = vec![1.0 / z, qv * qv / z];
            expect.sort_by(|a, b| b.total_cmp(a));
            for (a, b) in s.values.iter().zip(&expect) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn product_state_has_zero_entropy() {
        let psi = GroundVector::basis_state(4, Colors::Two, &[2, 2, 2, 2]).unwrap();
        let s = schmidt_spectrum(&psi, &mask("ABAB"), &Caps::default()).unwrap();
        assert_eq!(s.values, vec![1.0]);
        assert_eq!(s.von_neumann(), 0.0);
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&[0.5, 0.5], 1.0).unwrap(), 2f64.ln(), epsilon = 1e-15);
        let third = [1.0 / 3.0; 3];
        assert_abs_diff_eq!(entropy(&third, 2.0).unwrap(), 3f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(entropy(&third, 0.0).unwrap(), 3f64.ln(), epsilon = 1e-15);
        for alpha in [0.0, 0.5, 1.0, 2.0, f64::INFINITY] {
            assert_eq!(entropy(&[1.0], alpha).unwrap(), 0.0);
        }
        assert!(entropy(&[0.5, 0.4], 1.0).is_err());
        assert!(entropy(&[1.0], -1.0).is_err());
    }

    #[test]
    fn matches_dense_oracle() {
        let caps = Caps::default();
        for (n, c, masks) in [
            (4, Colors::One, vec!["AABB", "ABAB", "ABBA"]),
            (6, Colors::Two, vec!["AAABBB", "ABABAB", "ABBAAB"]),
        ] {
            for qs in ["1/2", "1", "2"] {
                let psi = gs(n, qs, c);
                for m in &masks {
                    let s = schmidt_spectrum(&psi, &mask(m), &caps).unwrap();
                    let o = rdm_oracle(&psi, &mask(m), &caps).unwrap();
                    for (i, &v) in o.iter().enumerate() {
                        let got = s.values.get(i).copied().unwrap_or(0.0);
                        assert!((got - v).abs() < 1e-9, "n={n} q={qs} {m}: {got} vs {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn complement_symmetry() {
        let psi = gs(6, "3/2", Colors::Two);
        let m = mask("ABBAAB");
        let a = schmidt_spectrum(&psi, &m, &Caps::default()).unwrap().von_neumann();
        let b = schmidt_spectrum(&psi, &m.complement(), &Caps::default()).unwrap().von_neumann();
        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
    }

    #[test]
    fn center_cut_classes() {
        let s = schmidt_spectrum(&gs(4, "1", Colors::Two), &mask("AABB"), &Caps::default()).unwrap();
        let ks: Vec<Option<usize>> = s.classes.iter().map(InterfaceClass::k).collect();
        assert_eq!(ks, vec![Some(2), Some(1), Some(0)]);
        let levels = degeneracy_structure(&s);
        assert!(levels.iter().all(DegeneracyLevel::holds));
        let k2 = levels.iter().find(|l| l.k_min == Some(2)).unwrap();
        assert_eq!(k2.multiplicity, 4);
    }

    #[test]
    fn colorless_factors_are_one() {
        let s = schmidt_spectrum(&gs(6, "1", Colors::One), &mask("AAABBB"), &Caps::default()).unwrap();
        assert!(degeneracy_structure(&s).iter().all(|l| l.factor == 1));
    }

    #[test]
    fn rejects_unnormalized_and_oversized() {
        let psi = GroundVector::from_entries(2, Colors::One, vec![(4, 2.0)]).unwrap();
        assert!(schmidt_spectrum(&psi, &mask("AB"), &Caps::default()).is_err());
        let caps = Caps {
            rdm_dimension: 10,
            ..Default::default()
        };
        assert!(matches!(
            rdm_oracle(&gs(4, "1", Colors::One), &mask("AABB"), &caps),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn report_fields() {
        let (r, s) = ground_state_report(4, &q("1"), Colors::Two, &mask("AABB"), &[0.0, 2.0, f64::INFINITY], &Caps::default()).unwrap();
        assert_eq!(r.schmidt_rank, s.rank());
        assert!(r.renyi.windows(2).all(|w| w[0].entropy >= w[1].entropy - 1e-12));
        assert_abs_diff_eq!(r.residual, r.von_neumann - 2f64.ln() * r.mean_crossings, epsilon = 1e-14);
        assert_eq!(spectrum_csv(&s).rows.len(), s.rank());
    }
}
