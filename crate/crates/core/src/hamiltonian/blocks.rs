use std::collections::VecDeque;

use log::debug;
use rayon::prelude::*;
use serde::Serialize;

use super::{GroundVector, HamiltonianOperator};
use crate::config::Caps;
use crate::eigen::{dense_lowest, lowest_eigenpairs, EigenPairs, LinearOperator, SolverConfig};
use crate::error::{Error, Result};
use crate::numeric::Deformation;
use crate::paths::Colors;

/// Eigenvalues closer than this are one degenerate cluster.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// An invariant subspace spanned by basis strings, stored as CSR.
#[derive(Debug, Clone)]
pub struct Block {
    states: Vec<u64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Block {
    fn build(h: &HamiltonianOperator, mut states: Vec<u64>) -> Block {
        states.sort_unstable();
        let rows: Vec<Vec<(u32, f64)>> = states
            .par_iter()
            .map(|&s| {
                let (diag, off) = h.row(s);
                let mut row: Vec<(u32, f64)> = Vec::with_capacity(off.len() + 1);
                row.push((states.binary_search(&s).unwrap() as u32, diag));
                for (t, v) in off {
                    let j = states.binary_search(&t).expect("block closed under H") as u32;
                    match row.iter_mut().find(|e| e.0 == j) {
                        Some(e) => e.1 += v,
                        None => row.push((j, v)),
                    }
                }
                row.sort_unstable_by_key(|e| e.0);
                row
            })
            .collect();
        let mut row_ptr = Vec::with_capacity(states.len() + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Block {
            states,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn embed(&self, h: &HamiltonianOperator, v: &[f64]) -> GroundVector {
        let entries = self.states.iter().copied().zip(v.iter().copied()).collect();
        GroundVector::from_entries(h.n(), h.colors(), entries).expect("block states are distinct")
    }

    /// Per-color net spin `#up_c - #down_c`, constant on the block.
    pub fn sector(&self, h: &HamiltonianOperator) -> Vec<i64> {
        let basis = h.basis();
        let mut net = vec![0i64; h.colors().count() as usize];
        for site in 0..h.n() {
            let st = basis.step_of(h.digit(self.states[0], site));
            let c = st.color.map_or(0, |c| c.index());
            net[c] += st.kind.delta();
        }
        net
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim()).all(|i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).all(|e| {
                let j = self.cols[e] as usize;
                let back = (self.row_ptr[j]..self.row_ptr[j + 1]).find(|&f| self.cols[f] as usize == i);
                back.is_some_and(|f| self.vals[f] == self.vals[e])
            })
        })
    }
}

impl LinearOperator for Block {
    fn dim(&self) -> usize {
        self.states.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let row = |i: usize| -> f64 {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(|e| self.vals[e] * x[self.cols[e] as usize])
                .sum()
        };
        if self.dim() > 4096 {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        } else {
            y.iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        }
    }
}

/// Exact block-diagonal form of `H`: connected components of the graph whose
/// edges are the off-diagonal nonzeros. Every block lies inside one
/// conserved color-resolved spin sector.
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    blocks: Vec<Block>,
}

impl BlockDecomposition {
    pub fn new(h: &HamiltonianOperator) -> Self {
        let dim = h.dimension() as usize;
        let mut seen = vec![false; dim];
        let mut components: Vec<Vec<u64>> = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..dim {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start as u64);
            let mut members = Vec::new();
            while let Some(s) = queue.pop_front() {
                members.push(s);
                for (t, _) in h.row(s).1 {
                    if !seen[t as usize] {
                        seen[t as usize] = true;
                        queue.push_back(t);
                    }
                }
            }
            components.push(members);
        }
        let blocks = components.into_iter().map(|c| Block::build(h, c)).collect();
        BlockDecomposition { blocks }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Lowest eigenpairs of the full operator, each vector supported on one block.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub vectors: Vec<GroundVector>,
    /// Block index per pair.
    pub blocks: Vec<usize>,
    pub matvecs: usize,
}

fn block_pairs(block: &Block, k: usize, cfg: &SolverConfig) -> Result<EigenPairs> {
    if block.dim() <= cfg.dense_limit.max(k) {
        Ok(dense_lowest(block, k))
    } else {
        lowest_eigenpairs(block, k, cfg)
    }
}

impl BlockDecomposition {
    /// The `k` smallest eigenpairs. Each block first yields its minimum;
    /// blocks whose every computed value lands among the `k` smallest are
    /// asked for one more until the selection is stable.
    pub fn lowest(&self, h: &HamiltonianOperator, k: usize, cfg: &SolverConfig) -> Result<Spectrum> {
        let total: usize = self.blocks.iter().map(Block::dim).sum();
        if k == 0 || k > total {
            return Err(Error::invalid(format!("requested {k} eigenpairs of a dimension-{total} operator")));
        }
        let mut per_block: Vec<EigenPairs> = self
            .blocks
            .iter()
            .map(|b| block_pairs(b, 1, cfg))
            .collect::<Result<_>>()?;
        loop {
            let chosen = select(&per_block, k);
            let mut grow = Vec::new();
            for (b, pairs) in per_block.iter().enumerate() {
                let used = chosen.iter().filter(|&&(bb, _)| bb == b).count();
                if used == pairs.values.len() && used < self.blocks[b].dim() {
                    grow.push(b);
                }
            }
            if grow.is_empty() {
                break;
            }
            for b in grow {
                let want = per_block[b].values.len() + 1;
                per_block[b] = block_pairs(&self.blocks[b], want, cfg)?;
            }
        }
        let chosen = select(&per_block, k);
        for &(b, _) in &chosen {
            debug!("block {b}: dim {} sector {:?}", self.blocks[b].dim(), self.blocks[b].sector(h));
        }
        // blocks holding the lowest states: redo densely when affordable,
        // which resolves tiny in-block gaps a Krylov tolerance cannot
        let mut refined: Vec<usize> = chosen
            .iter()
            .map(|&(b, _)| b)
            .filter(|&b| self.blocks[b].dim() > cfg.dense_limit && self.blocks[b].dim() <= cfg.refine_limit)
            .collect();
        refined.dedup();
        for b in refined {
            let want = per_block[b].values.len();
            per_block[b] = dense_lowest(&self.blocks[b], want);
        }
        let chosen = select(&per_block, k);
        let matvecs = per_block.iter().map(|p| p.matvecs).sum();
        Ok(Spectrum {
            values: chosen.iter().map(|&(b, i)| per_block[b].values[i]).collect(),
            residuals: chosen.iter().map(|&(b, i)| per_block[b].residuals[i]).collect(),
            vectors: chosen
                .iter()
                .map(|&(b, i)| self.blocks[b].embed(h, &per_block[b].vectors[i]))
                .collect(),
            blocks: chosen.iter().map(|&(b, _)| b).collect(),
            matvecs,
        })
    }
}

/// `(block, index)` of the `k` smallest computed values, ascending; ties
/// broken by block order for determinism.
fn select(per_block: &[EigenPairs], k: usize) -> Vec<(usize, usize)> {
    let mut all: Vec<(f64, usize, usize)> = per_block
        .iter()
        .enumerate()
        .flat_map(|(b, p)| p.values.iter().enumerate().map(move |(i, &v)| (v, b, i)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    all.into_iter().take(k).map(|(_, b, i)| (b, i)).collect()
}

impl HamiltonianOperator {
    /// The `k >= 2` smallest eigenpairs of the full operator.
    pub fn lowest_eigenpairs(&self, k: usize, cfg: &SolverConfig) -> Result<Spectrum> {
        if k < 2 {
            return Err(Error::invalid("request at least two eigenpairs"));
        }
        BlockDecomposition::new(self).lowest(self, k, cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapResult {
    pub lambda0: f64,
    /// First eigenvalue above the ground cluster.
    pub lambda1: f64,
    pub gap: f64,
    /// Size of the ground-state cluster.
    pub ground_multiplicity: usize,
    pub residuals: Vec<f64>,
}

fn gap_from(decomp: &BlockDecomposition, h: &HamiltonianOperator, cfg: &SolverConfig) -> Result<(GapResult, Spectrum)> {
    let total: usize = decomp.blocks().iter().map(Block::dim).sum();
    let mut k = 2.min(total);
    loop {
        let spec = decomp.lowest(h, k, cfg)?;
        let l0 = spec.values[0];
        let above = spec.values.iter().position(|&v| v - l0 > DEGENERACY_TOL);
        match above {
            Some(i) => {
                let gap = GapResult {
                    lambda0: l0,
                    lambda1: spec.values[i],
                    gap: spec.values[i] - l0,
                    ground_multiplicity: i,
                    residuals: spec.residuals.clone(),
                };
                return Ok((gap, spec));
            }
            None if k < total => k += 1,
            None => return Err(Error::Numeric("spectrum is fully degenerate".into())),
        }
    }
}

/// `lambda_1 - lambda_0` with degenerate ground clusters collapsed.
pub fn spectral_gap(n: usize, q: &Deformation, colors: Colors, caps: &Caps, cfg: &SolverConfig) -> Result<GapResult> {
    let h = HamiltonianOperator::assemble(n, q, colors, caps)?;
    let decomp = BlockDecomposition::new(&h);
    Ok(gap_from(&decomp, &h, cfg)?.0)
}

/// Summary of one exact-diagonalization run.
#[derive(Debug, Clone, Serialize)]
pub struct EdReport {
    pub n: usize,
    pub q: Deformation,
    pub colors: Colors,
    pub dimension: u64,
    pub blocks: usize,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `|<v_0|combinatorial GS>|`; absent beyond the enumeration cap.
    pub gs_overlap: Option<f64>,
    pub gap: f64,
    pub ground_multiplicity: usize,
    pub matvecs: usize,
}

pub fn ed_report(n: usize, q: &Deformation, colors: Colors, k: usize, caps: &Caps, cfg: &SolverConfig) -> Result<EdReport> {
    if k < 2 {
        return Err(Error::invalid("request at least two eigenpairs"));
    }
    let h = HamiltonianOperator::assemble(n, q, colors, caps)?;
    let decomp = BlockDecomposition::new(&h);
    let (gap, gap_spec) = gap_from(&decomp, &h, cfg)?;
    let spec = if k <= gap_spec.values.len() {
        gap_spec
    } else {
        decomp.lowest(&h, k, cfg)?
    };
    let gs_overlap = match super::combinatorial_ground_vector(n, q, colors, caps) {
        Ok(gs) => Some(spec.vectors[0].overlap(&gs).abs()),
        Err(Error::CapExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(EdReport {
        n,
        q: q.clone(),
        colors,
        dimension: h.dimension(),
        blocks: decomp.len(),
        eigenvalues: spec.values[..k.min(spec.values.len())].to_vec(),
        residuals: spec.residuals[..k.min(spec.residuals.len())].to_vec(),
        gs_overlap,
        gap: gap.gap,
        ground_multiplicity: gap.ground_multiplicity,
        matvecs: spec.matvecs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{dense_spectrum, densify};

    fn q(v: &str) -> Deformation {
        v.parse().unwrap()
    }

    #[test]
    fn blocks_partition_the_space() {
        for c in [Colors::One, Colors::Two] {
            let h = HamiltonianOperator::assemble(4, &q("3/2"), c, &Caps::default()).unwrap();
            let d = BlockDecomposition::new(&h);
            let total: usize = d.blocks().iter().map(Block::dim).sum();
            assert_eq!(total as u64, h.dimension());
            assert!(d.blocks().iter().all(Block::is_symmetric));
        }
    }

    #[test]
    fn block_spectrum_matches_dense_full_spectrum() {
        let cfg = SolverConfig {
            dense_limit: 20,
            refine_limit: 0,
            ..Default::default()
        };
        for (n, c) in [(5, Colors::One), (6, Colors::One), (4, Colors::Two)] {
            for qs in ["1/2", "1", "2"] {
                let h = HamiltonianOperator::assemble(n, &q(qs), c, &Caps::default()).unwrap();
                let (full, _) = dense_spectrum(&densify(&h));
                let spec = h.lowest_eigenpairs(6, &cfg).unwrap();
                for (a, b) in spec.values.iter().zip(&full) {
                    assert!((a - b).abs() < 1e-9, "n={n} q={qs}: {:?} vs {:?}", spec.values, &full[..6]);
                }
            }
        }
    }

    #[test]
    fn two_site_gap_fixture() {
        let cfg = SolverConfig::default();
        let g = spectral_gap(2, &q("1"), Colors::One, &Caps::default(), &cfg).unwrap();
        let (full, _) = dense_spectrum(&densify(
            &HamiltonianOperator::assemble(2, &q("1"), Colors::One, &Caps::default()).unwrap(),
        ));
        assert!((g.gap - (full[1] - full[0])).abs() < 1e-12);
        assert_eq!(g.ground_multiplicity, 1);
    }

    #[test]
    fn report_overlap() {
        let r = ed_report(6, &q("1/2"), Colors::Two, 3, &Caps::default(), &SolverConfig::default()).unwrap();
        assert!(r.eigenvalues[0].abs() < 1e-9);
        assert!(r.gs_overlap.unwrap() > 1.0 - 1e-9);
        assert!(r.gap > 1e-3);
    }
}
