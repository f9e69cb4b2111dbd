//! Ensemble aggregation and model-versus-simulation comparison.
//!
//! All per-run quantities are shifted so that the reception of the `i0`-th
//! node defines t = 0, matching the solver's time origin. Aggregation is
//! associative: partial accumulators merge exactly, which keeps parallel
//! reduction and streaming equivalent.

use std::io::Write;

use thiserror::Error;

use crate::degree::Pmf;
use crate::meanfield::MeanFieldCurve;
use crate::simulate::PropagationRecord;
use crate::theory::TheoryCurve;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("cannot aggregate an empty record list")]
    EmptyRecords,
    #[error("records stem from networks of different sizes ({0} vs {1})")]
    MixedSizes(usize, usize),
    #[error("milestone fractions must lie in (0, 1], got {0}")]
    BadMilestone(f64),
    #[error("curves do not overlap at fraction {0}")]
    NonOverlapping(f64),
    #[error("comparison inputs disagree on {what}: {a} vs {b}")]
    MismatchedInputs {
        what: &'static str,
        a: String,
        b: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Aggregated ensemble curves and distributions.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub n: usize,
    pub i0: usize,
    pub mu: f64,
    pub accepted_runs: usize,
    /// Runs dropped because they informed fewer than `i0` nodes.
    pub excluded_runs: usize,
    /// `mean_t_of_i[i-1]` is the mean shifted reception time of the `i`-th
    /// informed node; `NaN` where no run reached `i`.
    pub mean_t_of_i: Vec<f64>,
    pub runs_at_i: Vec<u32>,
    /// Milestone fraction paired with the mean degree pmf of the first
    /// `ceil(fraction * n)` informed nodes.
    pub informed_degree_pmf_at: Vec<(f64, Pmf)>,
    /// Mean (over runs) of the per-run median reception time of degree-k
    /// nodes; `NaN` where no run had at least two such nodes.
    pub median_time_per_degree: Vec<f64>,
    pub median_runs_per_degree: Vec<u32>,
    /// Mean external-connection trace by reception index, when traced.
    pub mean_k_ext_of_i: Option<Vec<f64>>,
    /// Mean realized total-degree pmf across runs.
    pub total_degree_pmf: Pmf,
    /// True when a milestone exceeded some run's informed count and was
    /// clipped to it.
    pub milestones_clipped: bool,
}

impl EnsembleStats {
    /// Mean shifted time at which `i` nodes are informed.
    pub fn time_at(&self, i: usize) -> Option<f64> {
        let t = *self.mean_t_of_i.get(i.checked_sub(1)?)?;
        t.is_finite().then_some(t)
    }

    pub fn time_at_fraction(&self, fraction: f64) -> Option<f64> {
        self.time_at((fraction * self.n as f64).round() as usize)
    }

    pub fn milestone_pmf(&self, fraction: f64) -> Option<&Pmf> {
        self.informed_degree_pmf_at
            .iter()
            .find(|(f, _)| (f - fraction).abs() < 1e-12)
            .map(|(_, p)| p)
    }
}

/// Streaming accumulator with an associative `merge`.
#[derive(Debug, Clone)]
pub struct StatsAccumulator {
    n: usize,
    i0: usize,
    mu: f64,
    milestones: Vec<f64>,
    accepted: usize,
    excluded: usize,
    sum_t: Vec<f64>,
    cnt_t: Vec<u32>,
    milestone_sums: Vec<Vec<f64>>,
    milestone_cnt: u32,
    med_sum: Vec<f64>,
    med_cnt: Vec<u32>,
    kext_sum: Vec<f64>,
    kext_cnt: Vec<u32>,
    hist_sum: Vec<f64>,
    clipped: bool,
}

impl StatsAccumulator {
    pub fn new(n: usize, i0: usize, mu: f64, milestones: &[f64]) -> Result<Self, StatsError> {
        for &m in milestones {
            if !(m > 0.0 && m <= 1.0) {
                return Err(StatsError::BadMilestone(m));
            }
        }
        Ok(Self {
            n,
            i0,
            mu,
            milestones: milestones.to_vec(),
            accepted: 0,
            excluded: 0,
            sum_t: vec![0.0; n],
            cnt_t: vec![0; n],
            milestone_sums: vec![Vec::new(); milestones.len()],
            milestone_cnt: 0,
            med_sum: Vec::new(),
            med_cnt: Vec::new(),
            kext_sum: Vec::new(),
            kext_cnt: Vec::new(),
            hist_sum: Vec::new(),
            clipped: false,
        })
    }

    pub fn add_record(&mut self, rec: &PropagationRecord) -> Result<(), StatsError> {
        if rec.node_count() != self.n {
            return Err(StatsError::MixedSizes(self.n, rec.node_count()));
        }
        if rec.informed_count < self.i0 {
            self.excluded += 1;
            return Ok(());
        }
        self.accepted += 1;
        let shift = rec.time_of(self.i0);

        for (j, &node) in rec.infection_order.iter().enumerate() {
            self.sum_t[j] += rec.reception_time[node as usize] - shift;
            self.cnt_t[j] += 1;
        }

        // milestone degree pmfs over the earliest informed prefix
        self.milestone_cnt += 1;
        for (m, &fraction) in self.milestones.iter().enumerate() {
            let want = (fraction * self.n as f64).ceil() as usize;
            let take = want.min(rec.informed_count).max(1);
            if take < want {
                self.clipped = true;
            }
            let mut counts: Vec<f64> = Vec::new();
            for &node in &rec.infection_order[..take] {
                let d = rec.degrees[node as usize] as usize;
                if counts.len() <= d {
                    counts.resize(d + 1, 0.0);
                }
                counts[d] += 1.0;
            }
            let sums = &mut self.milestone_sums[m];
            if sums.len() < counts.len() {
                sums.resize(counts.len(), 0.0);
            }
            for (d, c) in counts.iter().enumerate() {
                sums[d] += c / take as f64;
            }
        }

        // per-degree median reception times (>= 2 nodes of that degree)
        let max_deg = rec.degrees.iter().copied().max().unwrap_or(0) as usize;
        let mut times_by_degree: Vec<Vec<f64>> = vec![Vec::new(); max_deg + 1];
        for (node, &d) in rec.degrees.iter().enumerate() {
            times_by_degree[d as usize].push(rec.reception_time[node]);
        }
        if self.med_sum.len() <= max_deg {
            self.med_sum.resize(max_deg + 1, 0.0);
            self.med_cnt.resize(max_deg + 1, 0);
        }
        for (d, times) in times_by_degree.iter_mut().enumerate() {
            let m = times.len();
            if m < 2 {
                continue;
            }
            let idx = m.div_ceil(2) - 1;
            let (_, median, _) = times.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
            if median.is_finite() {
                self.med_sum[d] += *median - shift;
                self.med_cnt[d] += 1;
            }
        }

        // realized total-degree pmf
        if self.hist_sum.len() <= max_deg {
            self.hist_sum.resize(max_deg + 1, 0.0);
        }
        for &d in &rec.degrees {
            self.hist_sum[d as usize] += 1.0 / self.n as f64;
        }

        if let Some(tr) = &rec.trace {
            if self.kext_sum.len() < tr.k_ext.len() {
                self.kext_sum.resize(tr.k_ext.len(), 0.0);
                self.kext_cnt.resize(tr.k_ext.len(), 0);
            }
            for (j, &k) in tr.k_ext.iter().enumerate() {
                self.kext_sum[j] += k as f64;
                self.kext_cnt[j] += 1;
            }
        }
        Ok(())
    }

    /// Exact associative merge of two partial aggregations.
    pub fn merge(&mut self, other: &StatsAccumulator) {
        fn add_into(dst: &mut Vec<f64>, src: &[f64]) {
            if dst.len() < src.len() {
                dst.resize(src.len(), 0.0);
            }
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        fn add_into_u32(dst: &mut Vec<u32>, src: &[u32]) {
            if dst.len() < src.len() {
                dst.resize(src.len(), 0);
            }
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        self.accepted += other.accepted;
        self.excluded += other.excluded;
        add_into(&mut self.sum_t, &other.sum_t);
        add_into_u32(&mut self.cnt_t, &other.cnt_t);
        self.milestone_cnt += other.milestone_cnt;
        for (mine, theirs) in self.milestone_sums.iter_mut().zip(&other.milestone_sums) {
            add_into(mine, theirs);
        }
        add_into(&mut self.med_sum, &other.med_sum);
        add_into_u32(&mut self.med_cnt, &other.med_cnt);
        add_into(&mut self.kext_sum, &other.kext_sum);
        add_into_u32(&mut self.kext_cnt, &other.kext_cnt);
        add_into(&mut self.hist_sum, &other.hist_sum);
        self.clipped |= other.clipped;
    }

    pub fn accepted(&self) -> usize {
        self.accepted
    }

    pub fn finalize(self) -> Result<EnsembleStats, StatsError> {
        if self.accepted == 0 {
            return Err(StatsError::EmptyRecords);
        }
        let mean_t_of_i: Vec<f64> = self
            .sum_t
            .iter()
            .zip(&self.cnt_t)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
            .collect();
        let informed_degree_pmf_at = self
            .milestones
            .iter()
            .zip(self.milestone_sums)
            .map(|(&f, sums)| {
                let pmf = Pmf::new(0, sums).expect("milestone sums have mass");
                (f, pmf)
            })
            .collect();
        let median_time_per_degree: Vec<f64> = self
            .med_sum
            .iter()
            .zip(&self.med_cnt)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
            .collect();
        let mean_k_ext_of_i = if self.kext_cnt.iter().any(|&c| c > 0) {
            Some(
                self.kext_sum
                    .iter()
                    .zip(&self.kext_cnt)
                    .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
                    .collect(),
            )
        } else {
            None
        };
        Ok(EnsembleStats {
            n: self.n,
            i0: self.i0,
            mu: self.mu,
            accepted_runs: self.accepted,
            excluded_runs: self.excluded,
            mean_t_of_i,
            runs_at_i: self.cnt_t,
            informed_degree_pmf_at,
            median_time_per_degree,
            median_runs_per_degree: self.med_cnt,
            mean_k_ext_of_i,
            total_degree_pmf: Pmf::new(0, self.hist_sum).expect("histogram has mass"),
            milestones_clipped: self.clipped,
        })
    }
}

/// Aggregates a record list (see [`StatsAccumulator`] for streaming).
pub fn aggregate(
    records: &[PropagationRecord],
    n: usize,
    i0: usize,
    mu: f64,
    milestones: &[f64],
) -> Result<EnsembleStats, StatsError> {
    if records.is_empty() {
        return Err(StatsError::EmptyRecords);
    }
    let mut acc = StatsAccumulator::new(n, i0, mu, milestones)?;
    for rec in records {
        acc.add_record(rec)?;
    }
    acc.finalize()
}

/// Time deviations of the two models against the simulation at one fraction.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub fraction: f64,
    pub i: usize,
    pub t_sim: f64,
    pub t_theory: f64,
    pub t_meanfield: f64,
    pub theory_dev_abs: f64,
    pub theory_dev_rel: f64,
    pub meanfield_dev_abs: f64,
    pub meanfield_dev_rel: f64,
}

#[derive(Debug, Clone)]
pub struct CurveComparison {
    pub checkpoints: Vec<Checkpoint>,
    /// |theory - sim| < |mean-field - sim| at the 50% checkpoint.
    pub theory_closer_at_half: bool,
}

/// Compares simulation, solver and mean-field times at 25/50/75% informed.
pub fn compare_curves(
    sim: &EnsembleStats,
    theory: &TheoryCurve,
    mf: &MeanFieldCurve,
) -> Result<CurveComparison, StatsError> {
    check_match("n", sim.n, theory.n)?;
    check_match("n", sim.n, mf.n)?;
    check_match("i0", sim.i0, theory.i0)?;
    check_match("i0", sim.i0, mf.i0)?;
    check_match("mu", sim.mu, theory.mu)?;
    check_match("mu", sim.mu, mf.mu)?;

    let mut checkpoints = Vec::new();
    for fraction in [0.25, 0.5, 0.75] {
        let i = (fraction * sim.n as f64).round() as usize;
        let t_sim = sim.time_at(i).ok_or(StatsError::NonOverlapping(fraction))?;
        let t_theory = theory
            .time_at(i as f64)
            .ok_or(StatsError::NonOverlapping(fraction))?;
        let t_meanfield = mf
            .time_at_fraction(fraction)
            .ok_or(StatsError::NonOverlapping(fraction))?;
        checkpoints.push(Checkpoint {
            fraction,
            i,
            t_sim,
            t_theory,
            t_meanfield,
            theory_dev_abs: t_theory - t_sim,
            theory_dev_rel: (t_theory - t_sim) / t_sim,
            meanfield_dev_abs: t_meanfield - t_sim,
            meanfield_dev_rel: (t_meanfield - t_sim) / t_sim,
        });
    }
    let half = &checkpoints[1];
    let theory_closer_at_half = half.theory_dev_abs.abs() < half.meanfield_dev_abs.abs();
    Ok(CurveComparison {
        checkpoints,
        theory_closer_at_half,
    })
}

fn check_match<T: PartialEq + std::fmt::Display>(
    what: &'static str,
    a: T,
    b: T,
) -> Result<(), StatsError> {
    if a == b {
        Ok(())
    } else {
        Err(StatsError::MismatchedInputs {
            what,
            a: a.to_string(),
            b: b.to_string(),
        })
    }
}

/// Writes `propagation.csv`: one row per informed count with the three
/// model times on the shared origin.
pub fn write_propagation_csv<W: Write>(
    sim: &EnsembleStats,
    theory: &TheoryCurve,
    mf: &MeanFieldCurve,
    w: &mut W,
) -> Result<(), StatsError> {
    writeln!(w, "i,fraction,t_sim,t_theory,t_meanfield")?;
    let n = sim.n;
    for i in sim.i0..=n {
        let (Some(t_sim), Some(t_theory)) = (sim.time_at(i), theory.time_at(i as f64)) else {
            break;
        };
        let fraction = i as f64 / n as f64;
        let Some(t_mf) = mf.time_at_fraction(fraction) else {
            break;
        };
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6},{:.6}",
            i, fraction, t_sim, t_theory, t_mf
        )?;
    }
    Ok(())
}

/// Writes `degrees.csv`: per-degree milestone pmfs (simulation and model)
/// plus the per-degree median reception time.
#[allow(clippy::too_many_arguments)]
pub fn write_degrees_csv<W: Write>(
    sim: &EnsembleStats,
    model_1pct: &Pmf,
    model_50pct: &Pmf,
    model_100pct: &Pmf,
    w: &mut W,
) -> Result<(), StatsError> {
    writeln!(
        w,
        "k,pmf_sim_1pct,pmf_model_1pct,pmf_sim_50pct,pmf_model_50pct,pmf_sim_100pct,pmf_model_100pct,median_time"
    )?;
    let sim_1 = sim.milestone_pmf(0.01);
    let sim_50 = sim.milestone_pmf(0.5);
    let sim_100 = sim.milestone_pmf(1.0);
    let mut k_hi = model_100pct
        .k_max()
        .max(sim.median_time_per_degree.len().saturating_sub(1));
    for pmf in [sim_1, sim_50, sim_100].into_iter().flatten() {
        k_hi = k_hi.max(pmf.k_max());
    }
    for k in 0..=k_hi {
        let get = |p: Option<&Pmf>| p.map_or(0.0, |p| p.get(k));
        let median = sim
            .median_time_per_degree
            .get(k)
            .copied()
            .unwrap_or(f64::NAN);
        writeln!(
            w,
            "{},{:.8},{:.8},{:.8},{:.8},{:.8},{:.8},{:.6}",
            k,
            get(sim_1),
            model_1pct.get(k),
            get(sim_50),
            model_50pct.get(k),
            get(sim_100),
            model_100pct.get(k),
            median
        )?;
    }
    Ok(())
}
