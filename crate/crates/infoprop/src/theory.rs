//! Expectation-level propagation model.
//!
//! Tracks three coupled quantities as functions of the informed count `i`:
//! the degree pmf of the uninformed nodes, the expected number of external
//! (informed-to-uninformed) connections, and the expected elapsed time.
//! The uninformed pmf loses mass size-biasedly (high degrees first); each
//! reception turns the receiver's informed-side edges internal; and the
//! waiting time per reception is the minimum of `K_ext` exponentials, so
//! `dE[t]/di = 1/(mu E[K_ext])`.
//!
//! Everything is integrated with explicit first-order steps on a
//! log-decade grid, mirroring the accuracy needs of the early phase.

use thiserror::Error;

use crate::degree::Pmf;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("degenerate input: uninformed degree pmf has zero mean")]
    ZeroMeanPmf,
    #[error("degenerate input: both external and uninformed half-link counts are zero")]
    NoHalfLinks,
    #[error("expected receiver degree must be at least 1, got {0}")]
    ReceiverDegreeBelowOne(f64),
    #[error("informed count i={i} outside the valid domain (1 <= i < n-1 with n={n})")]
    DomainError { i: f64, n: usize },
    #[error("external connections exhausted (E[K_ext] <= 0): propagation interrupted")]
    PropagationInterrupted,
    #[error(
        "integration step at i={at_i} produced an invalid pmf ({detail}); \
         increase steps_per_section (currently {steps_per_section})"
    )]
    StepSize {
        at_i: f64,
        steps_per_section: usize,
        detail: String,
    },
    #[error("solver grid requires i0 >= 1 and n > i0 + 1, got i0={i0}, n={n}")]
    BadGrid { i0: usize, n: usize },
}

/// Size-biased (receiver) distribution: `P_recv(k) = k P(k) / E[k]`.
pub fn receiver_distribution(p_ninf: &Pmf) -> Result<Pmf, TheoryError> {
    let mean = p_ninf.mean();
    if mean <= 0.0 {
        return Err(TheoryError::ZeroMeanPmf);
    }
    let weights: Vec<f64> = p_ninf.iter().map(|(k, p)| k as f64 * p).collect();
    Ok(Pmf::new(p_ninf.k_min(), weights).expect("size-biased weights are non-negative"))
}

/// Expected number of receiver edges that lead back to informed nodes:
/// `1 + (E[k_recv] - 1) * E[K_ext] / (E[K_ext] + E[K_tot_ni])`.
///
/// The leading 1 is the arrival edge itself, so the result never drops
/// below one.
pub fn expected_krecv_inf(e_krecv: f64, e_k_ext: f64, e_k_tot_ni: f64) -> Result<f64, TheoryError> {
    if e_krecv < 1.0 {
        return Err(TheoryError::ReceiverDegreeBelowOne(e_krecv));
    }
    if e_k_ext <= 0.0 && e_k_tot_ni <= 0.0 {
        return Err(TheoryError::NoHalfLinks);
    }
    Ok(1.0 + (e_krecv - 1.0) * e_k_ext / (e_k_ext + e_k_tot_ni))
}

/// Per-degree derivative of the uninformed pmf:
/// `dP(k)/di = P(k)/(n-i) * (1 - k/E[k])`. The entries sum to zero.
pub fn dninf_di(p_ninf: &Pmf, i: f64, n: usize) -> Result<Vec<f64>, TheoryError> {
    if i >= n as f64 - 1.0 || i < 1.0 {
        return Err(TheoryError::DomainError { i, n });
    }
    let mean = p_ninf.mean();
    if mean <= 0.0 {
        return Err(TheoryError::ZeroMeanPmf);
    }
    Ok(p_ninf
        .iter()
        .map(|(k, p)| p / (n as f64 - i) * (1.0 - k as f64 / mean))
        .collect())
}

/// Drift of the expected external connections:
/// `E[k_recv] - 2 E[k_recv_inf]`, with `E[K_tot_ni] = (n-i) E[k_ninf]`.
pub fn dkext_di(p_ninf: &Pmf, e_k_ext: f64, i: f64, n: usize) -> Result<f64, TheoryError> {
    let recv = receiver_distribution(p_ninf)?;
    let e_krecv = recv.mean();
    let e_k_tot_ni = (n as f64 - i) * p_ninf.mean();
    let e_rinf = expected_krecv_inf(e_krecv, e_k_ext, e_k_tot_ni)?;
    Ok(e_krecv - 2.0 * e_rinf)
}

/// Expected time per reception: `1/(mu E[K_ext])`.
pub fn dt_di(e_k_ext: f64, mu: f64) -> Result<f64, TheoryError> {
    if e_k_ext <= 0.0 {
        return Err(TheoryError::PropagationInterrupted);
    }
    Ok(1.0 / (mu * e_k_ext))
}

/// The informed-node pmf obtained by removing the uninformed mixture
/// component: `P_inf = (n P_tot - (n-i) P_ninf) / i`.
#[derive(Debug, Clone)]
pub struct InformedPmf {
    pub pmf: Pmf,
    /// Negative round-off mass that was clamped to zero before renormalizing.
    pub clamped_mass: f64,
}

pub fn informed_distribution(
    p_ninf: &Pmf,
    p_tot: &Pmf,
    i: f64,
    n: usize,
) -> Result<InformedPmf, TheoryError> {
    if i < 1.0 {
        return Err(TheoryError::DomainError { i, n });
    }
    let k_min = p_tot.k_min().min(p_ninf.k_min());
    let k_max = p_tot.k_max().max(p_ninf.k_max());
    let mut clamped = 0.0;
    let weights: Vec<f64> = (k_min..=k_max)
        .map(|k| {
            let w = (n as f64 * p_tot.get(k) - (n as f64 - i) * p_ninf.get(k)) / i;
            if w < 0.0 {
                clamped += -w;
                0.0
            } else {
                w
            }
        })
        .collect();
    let pmf = Pmf::new(k_min, weights).map_err(|_| TheoryError::ZeroMeanPmf)?;
    Ok(InformedPmf {
        pmf,
        clamped_mass: clamped,
    })
}

/// Integration grid: log-decade sections `[i0, 10 i0], [10 i0, 100 i0], ...`
/// with `steps_per_section` equidistant steps each; the final partial
/// section keeps the same spacing and the grid always ends at `n - 1`.
#[derive(Debug, Clone)]
pub struct SolverGrid {
    pub i0: usize,
    pub n: usize,
    pub steps_per_section: usize,
    grid: Vec<f64>,
}

impl SolverGrid {
    pub fn new(i0: usize, n: usize, steps_per_section: usize) -> Result<Self, TheoryError> {
        if i0 < 1 || n <= i0 + 1 || steps_per_section == 0 {
            return Err(TheoryError::BadGrid { i0, n });
        }
        let end = (n - 1) as f64;
        let mut grid = vec![i0 as f64];
        let mut section_start = i0 as f64;
        'outer: loop {
            let section_end = section_start * 10.0;
            let h = (section_end - section_start) / steps_per_section as f64;
            for j in 1..=steps_per_section {
                let x = section_start + j as f64 * h;
                if x >= end {
                    grid.push(end);
                    break 'outer;
                }
                grid.push(x);
            }
            section_start = section_end;
        }
        Ok(Self {
            i0,
            n,
            steps_per_section,
            grid,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.grid
    }
}

/// One sampled state of the solved system.
#[derive(Debug, Clone)]
pub struct TheorySample {
    pub i: f64,
    pub e_t: f64,
    pub e_k_ext: f64,
    pub p_ninf: Pmf,
    pub p_inf: Pmf,
}

/// The solved expectation curves plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct TheoryCurve {
    pub n: usize,
    pub i0: usize,
    pub mu: f64,
    pub samples: Vec<TheorySample>,
    /// Where the solve stopped because `E[K_ext]` hit zero, if it did.
    pub halted_at: Option<f64>,
    /// Largest |sum - 1| observed before renormalization.
    pub max_norm_drift: f64,
    /// Total negative mass clamped across the solve.
    pub clamped_mass: f64,
    pub molloy_reed_warning: bool,
}

impl TheoryCurve {
    pub fn max_i(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.i)
    }

    /// Linear interpolation of `E[t]` at an informed count.
    pub fn time_at(&self, i: f64) -> Option<f64> {
        interp(&self.samples, i, |s| s.e_t)
    }

    pub fn k_ext_at(&self, i: f64) -> Option<f64> {
        interp(&self.samples, i, |s| s.e_k_ext)
    }

    /// The sample whose `i` is nearest to the request.
    pub fn nearest_sample(&self, i: f64) -> &TheorySample {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (idx, s) in self.samples.iter().enumerate() {
            let d = (s.i - i).abs();
            if d < dist {
                dist = d;
                best = idx;
            }
        }
        &self.samples[best]
    }
}

fn interp(samples: &[TheorySample], i: f64, f: impl Fn(&TheorySample) -> f64) -> Option<f64> {
    if samples.is_empty() || i < samples[0].i || i > samples[samples.len() - 1].i {
        return None;
    }
    let pos = samples.partition_point(|s| s.i < i);
    if pos == 0 {
        return Some(f(&samples[0]));
    }
    let (a, b) = (&samples[pos - 1], &samples[pos]);
    if (b.i - a.i).abs() < f64::EPSILON {
        return Some(f(b));
    }
    let w = (i - a.i) / (b.i - a.i);
    Some(f(a) * (1.0 - w) + f(b) * w)
}

/// Fraction of a grid interval the stepper may cover in one explicit step,
/// relative to the remaining uninformed population. Keeps the 1/(n-i)
/// singularity near i = n-1 resolved without changing the sample grid.
const MAX_STEP_FRACTION: f64 = 0.25;

/// Largest admissible multiplier drop per step for the stiffest pmf entry:
/// a step of size h scales entry k by 1 + h (1 - k/E)/(n-i), so capping
/// h <= 0.9 (n-i) / (k_hi/E - 1) keeps every entry positive.
const STIFF_FRACTION: f64 = 0.9;

struct StepperState {
    p: Vec<f64>, // uninformed pmf over [k_min ..]
    k_min: usize,
    e_k_ext: f64,
    e_t: f64,
}

impl StepperState {
    fn mean(&self) -> f64 {
        self.p
            .iter()
            .enumerate()
            .map(|(j, &p)| (self.k_min + j) as f64 * p)
            .sum()
    }

    fn second(&self) -> f64 {
        self.p
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let k = (self.k_min + j) as f64;
                k * k * p
            })
            .sum()
    }

    /// Highest degree that still carries mass (clamping zeroes the tail, so
    /// this shrinks over the solve).
    fn k_hi(&self) -> usize {
        self.k_min + self.p.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// Solves the coupled system from `i = 1` (uninformed pmf equal to the total
/// pmf, `E[K_ext]` equal to the mean degree of the uniformly chosen source)
/// and samples it on the standard log-decade grid. `E[t]` is shifted so that
/// `e_t = 0` at `i = i0`. Stops early if `E[K_ext]` reaches zero.
pub fn solve(
    p_tot: &Pmf,
    n: usize,
    i0: usize,
    mu: f64,
    steps_per_section: usize,
) -> Result<TheoryCurve, TheoryError> {
    let grid = SolverGrid::new(i0, n, steps_per_section)?;
    // warmup from i = 1 to i0 with the same step count
    let mut points = Vec::new();
    if i0 > 1 {
        let h = (i0 as f64 - 1.0) / steps_per_section as f64;
        for j in 0..steps_per_section {
            points.push(1.0 + j as f64 * h);
        }
    }
    points.extend_from_slice(grid.points());
    solve_on_grid(p_tot, n, mu, &points, i0 as f64, steps_per_section)
}

/// Solves on an explicit increasing grid of `i` values (first entry is the
/// initial condition at which the pmf equals `p_tot`). `e_t` is zeroed at
/// `zero_time_at` by linear interpolation.
pub fn solve_on_grid(
    p_tot: &Pmf,
    n: usize,
    mu: f64,
    points: &[f64],
    zero_time_at: f64,
    steps_per_section: usize,
) -> Result<TheoryCurve, TheoryError> {
    let molloy_reed_warning = p_tot.second_moment() - 2.0 * p_tot.mean() <= 0.0;
    let mut state = StepperState {
        p: p_tot.probs().to_vec(),
        k_min: p_tot.k_min(),
        e_k_ext: p_tot.mean(),
        e_t: 0.0,
    };
    let mut curve = TheoryCurve {
        n,
        i0: zero_time_at as usize,
        mu,
        samples: Vec::with_capacity(points.len()),
        halted_at: None,
        max_norm_drift: 0.0,
        clamped_mass: 0.0,
        molloy_reed_warning,
    };
    let push_sample = |curve: &mut TheoryCurve, state: &StepperState, i: f64| {
        let p_ninf = Pmf::new(state.k_min, state.p.clone()).expect("pmf stays valid");
        let p_inf = informed_distribution(&p_ninf, p_tot, i.max(1.0), n)
            .expect("mixture of valid pmfs")
            .pmf;
        curve.samples.push(TheorySample {
            i,
            e_t: state.e_t,
            e_k_ext: state.e_k_ext,
            p_ninf,
            p_inf,
        });
    };

    push_sample(&mut curve, &state, points[0]);
    'outer: for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut x = a;
        while x < b {
            let remaining = n as f64 - x;
            let mut h_cap = MAX_STEP_FRACTION * remaining;
            let stiffness = state.k_hi() as f64 / state.mean() - 1.0;
            if stiffness > 0.0 {
                h_cap = h_cap.min(STIFF_FRACTION * remaining / stiffness);
            }
            let h = (b - x).min(h_cap);
            if let Err(stop) = euler_step(&mut state, x, h, n, mu, steps_per_section, &mut curve) {
                match stop {
                    TheoryError::PropagationInterrupted => {
                        curve.halted_at = Some(x);
                        break 'outer;
                    }
                    other => return Err(other),
                }
            }
            x += h;
        }
        push_sample(&mut curve, &state, b);
    }

    // shift times so that e_t(zero_time_at) = 0
    if let Some(t0) = interp(&curve.samples, zero_time_at, |s| s.e_t) {
        for s in &mut curve.samples {
            s.e_t -= t0;
        }
    }
    Ok(curve)
}

fn euler_step(
    state: &mut StepperState,
    x: f64,
    h: f64,
    n: usize,
    mu: f64,
    steps_per_section: usize,
    curve: &mut TheoryCurve,
) -> Result<(), TheoryError> {
    if state.e_k_ext <= 0.0 {
        return Err(TheoryError::PropagationInterrupted);
    }
    let mean = state.mean();
    if mean <= 0.0 {
        return Err(TheoryError::StepSize {
            at_i: x,
            steps_per_section,
            detail: "uninformed mean degree collapsed to zero".into(),
        });
    }
    let remaining = n as f64 - x;
    let e_recv = state.second() / mean;
    let e_k_tot_ni = remaining * mean;
    let e_rinf = expected_krecv_inf(e_recv, state.e_k_ext, e_k_tot_ni)?;

    state.e_t += h * dt_di(state.e_k_ext, mu)?;
    state.e_k_ext += h * (e_recv - 2.0 * e_rinf);

    // the derivative sums to zero analytically, so the raw sum measures
    // pure floating-point conservation error
    let mut raw_sum = 0.0;
    for (j, p) in state.p.iter_mut().enumerate() {
        let k = (state.k_min + j) as f64;
        *p += h * *p / remaining * (1.0 - k / mean);
        raw_sum += *p;
    }
    let drift = (raw_sum - 1.0).abs();
    if drift > 1e-6 {
        return Err(TheoryError::StepSize {
            at_i: x,
            steps_per_section,
            detail: format!("normalization drifted by {drift}"),
        });
    }
    curve.max_norm_drift = curve.max_norm_drift.max(drift);

    let mut clamped = 0.0;
    let mut sum = 0.0;
    for (j, p) in state.p.iter_mut().enumerate() {
        if *p < 0.0 {
            if *p < -1e-6 {
                return Err(TheoryError::StepSize {
                    at_i: x,
                    steps_per_section,
                    detail: format!("pmf entry for degree {} fell to {}", state.k_min + j, *p),
                });
            }
            clamped += -*p;
            *p = 0.0;
        }
        sum += *p;
    }
    curve.clamped_mass += clamped;
    for p in state.p.iter_mut() {
        *p /= sum;
    }
    Ok(())
}
