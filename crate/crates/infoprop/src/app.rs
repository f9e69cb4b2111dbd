//! Pipeline orchestration behind the CLI: runs the requested stages, writes
//! the output files and a manifest with content checksums.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::degree::Pmf;
use crate::meanfield::{self, MeanFieldCurve, MeanFieldError, MeanFieldOptions};
use crate::simulate::{self, EnsembleSpec, SimError};
use crate::stats::{self, CurveComparison, EnsembleStats, StatsAccumulator, StatsError};
use crate::theory::{self, TheoryCurve, TheoryError};

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no run reached the completion threshold ({rejected} of {runs} rejected)")]
    NoAcceptedRuns { rejected: usize, runs: usize },
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Degree(#[from] crate::degree::DegreeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl AppError {
    /// Process exit code: 2 config, 3 zero accepted runs, 4 I/O, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::NoAcceptedRuns { .. } => 3,
            AppError::Io { .. } => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Simulate,
    Theory,
    Meanfield,
    Compare,
    All,
}

impl Subcommand {
    fn name(self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::Theory => "theory",
            Subcommand::Meanfield => "meanfield",
            Subcommand::Compare => "compare",
            Subcommand::All => "all",
        }
    }

    fn wants_sim(self) -> bool {
        matches!(
            self,
            Subcommand::Simulate | Subcommand::Compare | Subcommand::All
        )
    }

    fn wants_theory(self) -> bool {
        matches!(
            self,
            Subcommand::Theory | Subcommand::Compare | Subcommand::All
        )
    }

    fn wants_meanfield(self) -> bool {
        matches!(
            self,
            Subcommand::Meanfield | Subcommand::Compare | Subcommand::All
        )
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub accepted: usize,
    pub rejected: usize,
    pub outputs: Vec<PathBuf>,
    pub comparison: Option<CurveComparison>,
    pub theory_halted_at: Option<f64>,
}

/// Collects output files and their checksums before anything touches disk,
/// so the manifest always lists every file written.
struct OutputSet {
    dir: PathBuf,
    files: BTreeMap<String, Vec<u8>>,
}

impl OutputSet {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.insert(name.to_string(), bytes);
    }

    fn flush(mut self, manifest_body: ManifestBody) -> Result<Vec<PathBuf>, AppError> {
        let manifest = Manifest {
            tool: "infoprop",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: manifest_body.subcommand,
            seed: manifest_body.seed,
            config: manifest_body.config,
            outputs: self
                .files
                .iter()
                .map(|(name, bytes)| FileEntry {
                    file: name.clone(),
                    sha256: hex_digest(bytes),
                })
                .collect(),
        };
        let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        json.push(b'\n');
        self.files.insert("manifest.json".into(), json);

        fs::create_dir_all(&self.dir).map_err(|source| AppError::Io {
            path: self.dir.clone(),
            source,
        })?;
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|source| AppError::Io {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            fs::write(&path, bytes).map_err(|source| AppError::Io {
                path: path.clone(),
                source,
            })?;
            written.push(path);
        }
        Ok(written)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    subcommand: &'a str,
    seed: u64,
    config: &'a RunConfig,
    outputs: Vec<FileEntry>,
}

#[derive(Serialize)]
struct FileEntry {
    file: String,
    sha256: String,
}

struct ManifestBody<'a> {
    subcommand: &'a str,
    seed: u64,
    config: &'a RunConfig,
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Runs one subcommand against a validated config. `base` anchors relative
/// paths from the config file.
pub fn run(sub: Subcommand, cfg: &RunConfig, base: &Path) -> Result<RunSummary, AppError> {
    let law = cfg.degree_law(base)?;
    let dist = law.distribution(cfg.n, cfg.network.k_max)?;
    let p_tot = dist.pmf().clone();
    let mut outputs = OutputSet::new(&cfg.outputs);
    let parallelism = cfg.effective_parallelism();

    let spec = EnsembleSpec {
        law: law.clone(),
        n: cfg.n,
        k_max_override: cfg.network.k_max,
        mu: cfg.mu,
        completion_threshold: cfg.threshold,
        trace: cfg.trace_k_ext,
    };

    let mut accepted = 0;
    let mut rejected = 0;
    let mut sim_stats: Option<EnsembleStats> = None;
    if sub.wants_sim() {
        let mut acc = StatsAccumulator::new(cfg.n, cfg.i0, cfg.mu, &cfg.milestones)?;
        let mut dumps: Vec<(String, Vec<u8>)> = Vec::new();
        let dump_runs = cfg.dump_runs;
        rejected = simulate::run_ensemble_each(&spec, cfg.runs, cfg.seed, parallelism, |rec| {
            if dump_runs {
                let mut buf = Vec::new();
                rec.write_dump(&mut buf).expect("vec write");
                dumps.push((format!("runs/run_{:05}.txt", rec.run_index), buf));
            }
            acc.add_record(&rec).expect("records share n");
        })?;
        accepted = acc.accepted();
        if accepted == 0 {
            return Err(AppError::NoAcceptedRuns {
                rejected,
                runs: cfg.runs,
            });
        }
        for (name, bytes) in dumps {
            outputs.add(&name, bytes);
        }
        let stats = acc.finalize()?;
        let mut buf = Vec::new();
        write_sim_curve(&stats, &mut buf)?;
        outputs.add("sim_curve.csv", buf);
        let mut buf = Vec::new();
        write_sim_degrees(&stats, &mut buf)?;
        outputs.add("sim_degrees.csv", buf);
        sim_stats = Some(stats);
    }

    if cfg.export_network {
        let net = simulate::network_for_run(&spec, cfg.seed, 0)?;
        let mut buf = Vec::new();
        net.write_edge_list(cfg.seed, &mut buf).expect("vec write");
        outputs.add("network.edges", buf);
    }

    let mut theory_curve: Option<TheoryCurve> = None;
    if sub.wants_theory() {
        let curve = theory::solve(&p_tot, cfg.n, cfg.i0, cfg.mu, cfg.steps_per_section)?;
        let mut buf = Vec::new();
        write_theory_curve(&curve, &mut buf)?;
        outputs.add("theory_curve.csv", buf);
        for &fraction in &cfg.milestones {
            let i = (fraction * cfg.n as f64).max(1.0);
            let sample = curve.nearest_sample(i);
            let mut buf = Vec::new();
            write_theory_snapshot(sample, &mut buf)?;
            outputs.add(&format!("theory_pmf_{}.csv", pct_label(fraction)), buf);
        }
        theory_curve = Some(curve);
    }

    let mut mf_curve: Option<MeanFieldCurve> = None;
    if sub.wants_meanfield() {
        let opts = MeanFieldOptions {
            dt: cfg.meanfield_dt,
            degree_weighted_seed: cfg.degree_weighted_seed,
            ..Default::default()
        };
        let curve = meanfield::integrate(&p_tot, cfg.n, cfg.i0, cfg.mu, &opts)?;
        let mut buf = Vec::new();
        write_meanfield_curve(&curve, &mut buf)?;
        outputs.add("meanfield_curve.csv", buf);
        mf_curve = Some(curve);
    }

    let mut comparison = None;
    if matches!(sub, Subcommand::Compare | Subcommand::All) {
        let sim = sim_stats.as_ref().expect("sim stage ran");
        let theory = theory_curve.as_ref().expect("theory stage ran");
        let mf = mf_curve.as_ref().expect("meanfield stage ran");

        let mut buf = Vec::new();
        stats::write_propagation_csv(sim, theory, mf, &mut buf)?;
        outputs.add("propagation.csv", buf);

        let model_pmf_at = |fraction: f64| -> Pmf {
            if (fraction - 1.0).abs() < 1e-12 {
                p_tot.clone()
            } else {
                theory
                    .nearest_sample((fraction * cfg.n as f64).max(1.0))
                    .p_inf
                    .clone()
            }
        };
        let mut buf = Vec::new();
        stats::write_degrees_csv(
            sim,
            &model_pmf_at(0.01),
            &model_pmf_at(0.5),
            &model_pmf_at(1.0),
            &mut buf,
        )?;
        outputs.add("degrees.csv", buf);

        let cmp = stats::compare_curves(sim, theory, mf)?;
        let mut buf = Vec::new();
        write_summary(cfg, sim, theory, &cmp, rejected, &mut buf)?;
        outputs.add("summary.txt", buf);
        comparison = Some(cmp);
    }

    let theory_halted_at = theory_curve.as_ref().and_then(|c| c.halted_at);
    let written = outputs.flush(ManifestBody {
        subcommand: sub.name(),
        seed: cfg.seed,
        config: cfg,
    })?;
    Ok(RunSummary {
        accepted,
        rejected,
        outputs: written,
        comparison,
        theory_halted_at,
    })
}

fn pct_label(fraction: f64) -> String {
    let pct = fraction * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}pct", pct.round() as u64)
    } else {
        format!("{}pct", pct)
    }
}

fn write_sim_curve(stats: &EnsembleStats, w: &mut Vec<u8>) -> Result<(), StatsError> {
    writeln!(w, "i,fraction,t_sim,runs")?;
    for i in 1..=stats.n {
        match stats.time_at(i) {
            Some(t) => writeln!(
                w,
                "{},{:.6},{:.6},{}",
                i,
                i as f64 / stats.n as f64,
                t,
                stats.runs_at_i[i - 1]
            )?,
            None => break,
        }
    }
    Ok(())
}

fn write_sim_degrees(stats: &EnsembleStats, w: &mut Vec<u8>) -> Result<(), StatsError> {
    write!(w, "k")?;
    for (fraction, _) in &stats.informed_degree_pmf_at {
        write!(w, ",pmf_sim_{}", pct_label(*fraction))?;
    }
    writeln!(w, ",median_time")?;
    let mut k_hi = stats.median_time_per_degree.len().saturating_sub(1);
    for (_, pmf) in &stats.informed_degree_pmf_at {
        k_hi = k_hi.max(pmf.k_max());
    }
    for k in 0..=k_hi {
        write!(w, "{}", k)?;
        for (_, pmf) in &stats.informed_degree_pmf_at {
            write!(w, ",{:.8}", pmf.get(k))?;
        }
        let median = stats
            .median_time_per_degree
            .get(k)
            .copied()
            .unwrap_or(f64::NAN);
        writeln!(w, ",{:.6}", median)?;
    }
    Ok(())
}

fn write_theory_curve(curve: &TheoryCurve, w: &mut Vec<u8>) -> Result<(), StatsError> {
    writeln!(w, "i,fraction,e_t,e_k_ext")?;
    for s in &curve.samples {
        writeln!(
            w,
            "{:.4},{:.6},{:.6},{:.6}",
            s.i,
            s.i / curve.n as f64,
            s.e_t,
            s.e_k_ext
        )?;
    }
    Ok(())
}

fn write_theory_snapshot(
    sample: &crate::theory::TheorySample,
    w: &mut Vec<u8>,
) -> Result<(), StatsError> {
    writeln!(w, "k,p_ninf,p_inf")?;
    let lo = sample.p_ninf.k_min().min(sample.p_inf.k_min());
    let hi = sample.p_ninf.k_max().max(sample.p_inf.k_max());
    for k in lo..=hi {
        writeln!(
            w,
            "{},{:.8},{:.8}",
            k,
            sample.p_ninf.get(k),
            sample.p_inf.get(k)
        )?;
    }
    Ok(())
}

fn write_meanfield_curve(curve: &MeanFieldCurve, w: &mut Vec<u8>) -> Result<(), StatsError> {
    writeln!(w, "t,fraction")?;
    for (t, f) in curve.times.iter().zip(&curve.fractions) {
        writeln!(w, "{:.6},{:.8}", t, f)?;
    }
    Ok(())
}

fn write_summary(
    cfg: &RunConfig,
    sim: &EnsembleStats,
    theory: &TheoryCurve,
    cmp: &CurveComparison,
    rejected: usize,
    w: &mut Vec<u8>,
) -> Result<(), StatsError> {
    writeln!(w, "network: {} ({:?})", cfg.network.kind, cfg.network)?;
    writeln!(
        w,
        "n={} runs={} accepted={} rejected={} acceptance_rate={:.4}",
        cfg.n,
        cfg.runs,
        sim.accepted_runs,
        rejected,
        sim.accepted_runs as f64 / cfg.runs as f64
    )?;
    match theory.halted_at {
        Some(i) => writeln!(w, "theory: halted at i={i:.2} (E[K_ext] reached zero)")?,
        None => writeln!(w, "theory: completed through i={:.0}", theory.max_i())?,
    }
    writeln!(
        w,
        "theory diagnostics: max_norm_drift={:.3e} clamped_mass={:.3e}",
        theory.max_norm_drift, theory.clamped_mass
    )?;
    if sim.milestones_clipped {
        writeln!(
            w,
            "note: milestone fractions above the completion threshold were clipped to each run's informed count"
        )?;
    }
    for c in &cmp.checkpoints {
        writeln!(
            w,
            "checkpoint {:.0}%: t_sim={:.4} t_theory={:.4} t_meanfield={:.4} dev_theory={:+.2}% dev_meanfield={:+.2}%",
            c.fraction * 100.0,
            c.t_sim,
            c.t_theory,
            c.t_meanfield,
            c.theory_dev_rel * 100.0,
            c.meanfield_dev_rel * 100.0
        )?;
    }
    writeln!(
        w,
        "mean_field_below_sim: {}",
        cmp.checkpoints
            .iter()
            .map(|c| (c.meanfield_dev_abs < 0.0).to_string())
            .collect::<Vec<_>>()
            .join(" ")
    )?;
    writeln!(w, "theory_closer_at_half: {}", cmp.theory_closer_at_half)?;
    Ok(())
}
