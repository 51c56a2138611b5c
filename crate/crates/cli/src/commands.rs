use std::path::{Path, PathBuf};
use std::process::ExitCode;

use log::info;
use serde::Serialize;
use serde_json::json;
use spaghetto_core::acceptance::{self, AcceptanceConfig, QUICK};
use spaghetto_core::entanglement::{ground_state_report, spectrum_csv};
use spaghetto_core::geometry::{build_spiral, diagonal_cut_mask, export_csv, export_svg};
use spaghetto_core::hamiltonian::ed_report;
use spaghetto_core::mask::{contiguous_mask, mask_from_cut};
use spaghetto_core::output::{fmt_f64, write_file, write_json, CsvTable, Metadata};
use spaghetto_core::paths::{count, count_from_height, enumerate};
use spaghetto_core::qdp::{crossing_arcs, crossing_expectation_with, Sampler};
use spaghetto_core::scaling::{run_experiment, write_outputs, ExperimentSpec};
use spaghetto_core::{Colors, Error, MotzkinPath, Result, SubsystemMask, WeightTable};

use crate::{
    Command, CountArgs, EdArgs, EeArgs, EnumerateArgs, GeometryArgs, GeometryFormat, GlobalConfig, GroundstateArgs,
    SampleArgs, ScalingArgs, SelftestArgs,
};

pub(crate) fn dispatch(command: &Command, cfg: &GlobalConfig) -> Result<ExitCode> {
    match command {
        Command::Count(a) => count_cmd(a, cfg),
        Command::Enumerate(a) => enumerate_cmd(a, cfg),
        Command::Groundstate(a) => groundstate_cmd(a, cfg),
        Command::Ed(a) => ed_cmd(a, cfg),
        Command::Ee(a) => ee_cmd(a, cfg),
        Command::Sample(a) => sample_cmd(a, cfg),
        Command::Scaling(a) => scaling_cmd(a, cfg),
        Command::Geometry(a) => geometry_cmd(a, cfg),
        Command::Selftest(a) => return selftest_cmd(a, cfg),
    }?;
    Ok(ExitCode::SUCCESS)
}

fn stem_path(cfg: &GlobalConfig, stem: &str, suffix: &str) -> Result<PathBuf> {
    cfg.output_path(Path::new(&format!("{stem}{suffix}")))
}

/// Artifact header; the global seed is recorded even where nothing is random.
fn metadata(command: &str, params: &impl Serialize, cfg: &GlobalConfig) -> Result<Metadata> {
    Ok(Metadata::new(command, params)?.with_seed(cfg.seed))
}

fn wrote(path: &Path) {
    println!("wrote {}", path.display());
}

/// Chain length `L(L+2)` of the spiral on an `L x L` lattice.
fn spiral_length(l: usize) -> Result<usize> {
    if l == 0 || l % 2 != 0 {
        return Err(Error::invalid(format!("L must be even and positive, got {l}")));
    }
    Ok(l * (l + 2))
}

fn parse_mask(text: &str, n: usize) -> Result<SubsystemMask> {
    let mask: SubsystemMask = text.parse()?;
    if mask.len() != n {
        return Err(Error::invalid(format!("mask has {} sites, chain has {n}", mask.len())));
    }
    Ok(mask)
}

fn count_cmd(a: &CountArgs, cfg: &GlobalConfig) -> Result<()> {
    let colors = Colors::from(a.colors);
    let value = match (a.from_height, a.to_height) {
        (Some(h0), Some(h1)) => count_from_height(a.n, h0, h1, colors),
        _ => count(a.n, colors),
    };
    println!("{value}");
    if let Some(out) = &a.output {
        let path = cfg.output_path(out)?;
        let meta = metadata("count", a, cfg)?;
        write_json(&path, &json!({ "count": value.to_string() }), &meta)?;
        wrote(&path);
    }
    Ok(())
}

fn enumerate_cmd(a: &EnumerateArgs, cfg: &GlobalConfig) -> Result<()> {
    let colors = Colors::from(a.colors);
    let table = match &a.q {
        Some(q) => Some(WeightTable::build(a.n, q, colors, cfg.numeric_mode, &cfg.caps)?),
        None => None,
    };
    let mut header = vec!["index", "path", "up", "area"];
    if table.is_some() {
        header.push("probability");
    }
    let mut csv = CsvTable::new(&header);
    let limit = a.limit.unwrap_or(usize::MAX);
    let mut total = 0usize;
    for (i, path) in enumerate(a.n, colors, &cfg.caps)?.enumerate() {
        let mut row = vec![(i + 1).to_string(), path.to_string(), path.up_count().to_string(), fmt_area(&path)];
        if let Some(t) = &table {
            row.push(fmt_f64(t.ground_state_probability(&path)?));
        }
        if i < limit {
            println!("{}", row[1..].join("\t"));
        }
        csv.push(row);
        total += 1;
    }
    println!("{total} paths");
    if let Some(out) = &a.output {
        let path = cfg.output_path(out)?;
        csv.write_file(&path, &metadata("enumerate", a, cfg)?)?;
        wrote(&path);
    }
    Ok(())
}

fn fmt_area(path: &MotzkinPath) -> String {
    let twice = path.doubled_area();
    if twice % 2 == 0 {
        (twice / 2).to_string()
    } else {
        format!("{}.5", twice / 2)
    }
}

fn groundstate_cmd(a: &GroundstateArgs, cfg: &GlobalConfig) -> Result<()> {
    let colors = Colors::from(a.colors);
    let table = WeightTable::build(a.n, &a.q, colors, cfg.numeric_mode, &cfg.caps)?;
    let probability = match &a.path {
        Some(text) => {
            let path = MotzkinPath::parse(text, colors)?;
            if path.len() != a.n {
                return Err(Error::invalid(format!("path has {} steps, expected {}", path.len(), a.n)));
            }
            Some(table.ground_state_probability(&path)?)
        }
        None => None,
    };
    let params = json!({ "args": a, "numeric_mode": cfg.numeric_mode });
    let meta = metadata("groundstate", &params, cfg)?;
    let body = json!({
        "n": a.n,
        "q": a.q,
        "colors": colors,
        "ln_z": table.ln_z(),
        "z_exact": table.z_exact().map(|z| z.to_string()),
        "path_probability": probability,
        "heights": table.height_stats(),
    });
    let js = stem_path(cfg, &a.name, ".json")?;
    write_json(&js, &body, &meta)?;
    let marg = stem_path(cfg, &a.name, "_marginals.csv")?;
    table.marginals_csv().write_file(&marg, &meta)?;
    println!("ln Z = {}", fmt_f64(table.ln_z()));
    if let Some(p) = probability {
        println!("P(path) = {}", fmt_f64(p));
    }
    let mid = table.height_stat(a.n / 2);
    println!("midpoint height: mean {} mode {}", fmt_f64(mid.mean), mid.mode);
    wrote(&js);
    wrote(&marg);
    Ok(())
}

fn ed_cmd(a: &EdArgs, cfg: &GlobalConfig) -> Result<()> {
    let mut solver = cfg.solver;
    solver.seed = cfg.seed;
    if let Some(tol) = a.tol {
        solver.tol = tol;
    }
    let colors = Colors::from(a.colors);
    let report = ed_report(a.n, &a.q, colors, a.k, &cfg.caps, &solver)?;
    let params = json!({ "args": a, "solver": solver });
    let meta = metadata("ed", &params, cfg)?;
    let path = cfg.output_path(&a.output)?;
    write_json(&path, &report, &meta)?;
    println!("dimension {} in {} blocks", report.dimension, report.blocks);
    for (i, (v, r)) in report.eigenvalues.iter().zip(&report.residuals).enumerate() {
        println!("lambda_{i} = {:.6e}  (residual {r:.1e})", v);
    }
    println!("gap = {:.6e}", report.gap);
    if let Some(o) = report.gs_overlap {
        println!("|<ED|combinatorial>| = {o:.12}");
    }
    wrote(&path);
    Ok(())
}

fn ee_cmd(a: &EeArgs, cfg: &GlobalConfig) -> Result<()> {
    let colors = Colors::from(a.colors);
    let (n, default_mask) = match (a.n, a.l) {
        (_, Some(l)) => (spiral_length(l)?, mask_from_cut(l, a.a)?),
        (Some(n), None) => (n, contiguous_mask(n, a.cut.unwrap_or(n / 2))?),
        (None, None) => return Err(Error::invalid("give --n or --L")),
    };
    let mask = match &a.mask {
        Some(text) => parse_mask(text, n)?,
        None => default_mask,
    };
    info!("ee: n = {n}, mask {mask}");
    let (report, spectrum) = ground_state_report(n, &a.q, colors, &mask, &a.alpha, &cfg.caps)?;
    let meta = metadata("ee", a, cfg)?;
    let js = stem_path(cfg, &a.name, ".json")?;
    write_json(&js, &report, &meta)?;
    let csv = stem_path(cfg, &a.name, "_spectrum.csv")?;
    spectrum_csv(&spectrum).write_file(&csv, &meta)?;
    println!("S_vN = {}", fmt_f64(report.von_neumann));
    for r in &report.renyi {
        println!("S_{} = {}", r.alpha, fmt_f64(r.entropy));
    }
    println!("Schmidt rank {}, E[k] = {}", report.schmidt_rank, fmt_f64(report.mean_crossings));
    wrote(&js);
    wrote(&csv);
    Ok(())
}

#[derive(Serialize)]
struct SampleParams<'a> {
    args: &'a SampleArgs,
    mask: String,
}

fn sample_cmd(a: &SampleArgs, cfg: &GlobalConfig) -> Result<()> {
    let colors = Colors::from(a.colors);
    let (n, default_mask) = match (a.n, a.l) {
        (_, Some(l)) => (spiral_length(l)?, mask_from_cut(l, 0)?),
        (Some(n), None) => (n, contiguous_mask(n, n / 2)?),
        (None, None) => return Err(Error::invalid("give --n or --L")),
    };
    let mask = match &a.mask {
        Some(text) => parse_mask(text, n)?,
        None => default_mask,
    };
    let table = WeightTable::log_domain(n, &a.q, colors)?;
    let sampler = Sampler::new(&table);
    let seed = cfg.seed;
    let params = SampleParams { args: a, mask: mask.to_string() };
    let meta = metadata("sample", &params, cfg)?;
    let estimate = crossing_expectation_with(&sampler, &mask, a.samples, seed)?;
    if !a.crossings_only {
        let mut csv = CsvTable::new(&["index", "path", "crossings"]);
        for i in 0..a.samples {
            let s = sampler.sample(seed, i);
            let k = crossing_arcs(&s.path, &mask)?;
            csv.push(vec![i.to_string(), s.path.to_string(), k.to_string()]);
        }
        let path = stem_path(cfg, &a.name, ".csv")?;
        csv.write_file(&path, &meta)?;
        wrote(&path);
    }
    let ln_c = f64::from(colors.count()).ln();
    let body = json!({
        "n": n,
        "mask": mask,
        "crossings": estimate,
        "color_sector": ln_c * estimate.mean,
        "color_sector_stderr": ln_c * estimate.stderr,
    });
    let js = stem_path(cfg, &a.name, ".json")?;
    write_json(&js, &body, &meta)?;
    println!("E[k] = {} +- {} over {} samples", fmt_f64(estimate.mean), fmt_f64(estimate.stderr), estimate.samples);
    wrote(&js);
    Ok(())
}

fn scaling_cmd(a: &ScalingArgs, cfg: &GlobalConfig) -> Result<()> {
    let mut spec = ExperimentSpec::load(&a.experiment)?;
    if spec.seed.is_none() {
        spec.seed = Some(cfg.seed);
    }
    let dir = cfg.output_path(spec.output.as_deref().unwrap_or(Path::new(".")))?;
    let result = run_experiment(&spec, &cfg.caps)?;
    let meta = Metadata::new("scaling", &spec)?.with_seed(spec.seed.unwrap_or(cfg.seed));
    let (csv, js) = write_outputs(&result, spec.kind, &dir, &meta)?;
    println!("{}", serde_json::to_string_pretty(&result.summary())?);
    wrote(&csv);
    wrote(&js);
    Ok(())
}

fn geometry_cmd(a: &GeometryArgs, cfg: &GlobalConfig) -> Result<()> {
    let emb = build_spiral(a.l)?;
    let mask = a.a.map(|off| diagonal_cut_mask(&emb, off)).transpose()?;
    let meta = metadata("geometry", a, cfg)?;
    let ext = match a.format {
        GeometryFormat::Svg => "svg",
        GeometryFormat::Csv => "csv",
    };
    let out = a.output.clone().unwrap_or_else(|| PathBuf::from(format!("geometry_L{}.{ext}", a.l)));
    let path = cfg.output_path(&out)?;
    match a.format {
        GeometryFormat::Svg => write_file(&path, export_svg(&emb, mask.as_ref(), Some(&meta))?.as_bytes())?,
        GeometryFormat::Csv => export_csv(&emb, mask.as_ref())?.write_file(&path, &meta)?,
    }
    println!("L = {}: {} edges", a.l, emb.len());
    if let Some(m) = &mask {
        println!("segments {:?}", m.segment_lengths());
    }
    wrote(&path);
    Ok(())
}

fn selftest_cmd(a: &SelftestArgs, cfg: &GlobalConfig) -> Result<ExitCode> {
    let ids: Vec<u8> = if a.full {
        (1..=10).collect()
    } else if a.criteria.is_empty() {
        QUICK.to_vec()
    } else {
        a.criteria.clone()
    };
    let acfg = AcceptanceConfig { caps: cfg.caps, ..AcceptanceConfig::default() };
    let mut ok = true;
    for id in ids {
        let report = acceptance::run(&[id], &acfg)?.remove(0);
        println!("{report}");
        for c in report.failures() {
            println!("    {}: {}", c.name, c.detail);
        }
        ok &= report.pass();
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
