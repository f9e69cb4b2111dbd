//! Degree-based SI mean-field baseline.
//!
//! Tracks `rho_k(t)`, the probability that a degree-k node is infected,
//! under the closure `d rho_k/dt = mu k (1 - rho_k) theta` with
//! `theta = sum_k' rho_k' k' P(k') / sum_k' k' P(k')`. Serves as the
//! accuracy baseline for the expectation-level solver.

use thiserror::Error;

use crate::degree::Pmf;

#[derive(Debug, Error)]
pub enum MeanFieldError {
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("propagation rate mu must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("i0 must be at least 1 and smaller than n")]
    BadSeed,
    #[error(
        "step at t={t} overshot rho by {overshoot} (beyond the 1e-3 clamp \
         tolerance); reduce dt"
    )]
    StepSize { t: f64, overshoot: f64 },
}

/// Integration state: per-degree infection probabilities at time `t`.
#[derive(Debug, Clone)]
pub struct MeanFieldState {
    pub rho: Vec<f64>,
    pub t: f64,
}

impl MeanFieldState {
    pub fn informed_fraction(&self, p_tot: &Pmf) -> f64 {
        p_tot
            .probs()
            .iter()
            .zip(&self.rho)
            .map(|(p, r)| p * r)
            .sum()
    }
}

/// Right-hand side of the mean-field system for every degree class.
pub fn drho_dt(state: &MeanFieldState, p_tot: &Pmf, mu: f64) -> Vec<f64> {
    let mean = p_tot.mean();
    let theta: f64 = p_tot
        .iter()
        .zip(&state.rho)
        .map(|((k, p), r)| r * k as f64 * p)
        .sum::<f64>()
        / mean;
    p_tot
        .iter()
        .zip(&state.rho)
        .map(|((k, _), r)| mu * k as f64 * (1.0 - r) * theta)
        .collect()
}

#[derive(Debug, Clone)]
pub struct MeanFieldOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Seed `rho_k(0) = i0 k / (n E[k])` instead of the uniform `i0 / n`.
    pub degree_weighted_seed: bool,
    /// Keep a rho snapshot every this many steps.
    pub snapshot_every: usize,
}

impl Default for MeanFieldOptions {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            t_end: 100.0,
            degree_weighted_seed: false,
            snapshot_every: 2000,
        }
    }
}

/// Integrated mean-field trajectory. Time zero corresponds to the informed
/// fraction `i0 / n`.
#[derive(Debug, Clone)]
pub struct MeanFieldCurve {
    pub n: usize,
    pub i0: usize,
    pub mu: f64,
    pub times: Vec<f64>,
    pub fractions: Vec<f64>,
    pub rho_snapshots: Vec<(f64, Vec<f64>)>,
    pub final_rho: Vec<f64>,
    pub k_min: usize,
    /// Largest single-step clamp applied to keep rho inside [0, 1].
    pub max_clamp: f64,
}

impl MeanFieldCurve {
    /// First time the informed fraction reaches `fraction` (linear
    /// interpolation between steps); the curve is monotone in t.
    pub fn time_at_fraction(&self, fraction: f64) -> Option<f64> {
        if fraction < self.fractions[0] || fraction > *self.fractions.last()? {
            return None;
        }
        let pos = self.fractions.partition_point(|&f| f < fraction);
        if pos == 0 {
            return Some(self.times[0]);
        }
        let (f0, f1) = (self.fractions[pos - 1], self.fractions[pos]);
        let (t0, t1) = (self.times[pos - 1], self.times[pos]);
        if (f1 - f0).abs() < f64::EPSILON {
            return Some(t1);
        }
        Some(t0 + (t1 - t0) * (fraction - f0) / (f1 - f0))
    }

    pub fn fraction_at_time(&self, t: f64) -> Option<f64> {
        if t < self.times[0] || t > *self.times.last()? {
            return None;
        }
        let pos = self.times.partition_point(|&x| x < t);
        if pos == 0 {
            return Some(self.fractions[0]);
        }
        let (t0, t1) = (self.times[pos - 1], self.times[pos]);
        let (f0, f1) = (self.fractions[pos - 1], self.fractions[pos]);
        Some(f0 + (f1 - f0) * (t - t0) / (t1 - t0))
    }
}

/// Fixed-step explicit integration from `rho_k(0) = i0/n` until `t_end` or
/// until the informed fraction reaches `1 - 1e-6`.
pub fn integrate(
    p_tot: &Pmf,
    n: usize,
    i0: usize,
    mu: f64,
    opts: &MeanFieldOptions,
) -> Result<MeanFieldCurve, MeanFieldError> {
    if opts.dt.is_nan() || opts.dt <= 0.0 {
        return Err(MeanFieldError::BadTimeStep(opts.dt));
    }
    if mu.is_nan() || mu <= 0.0 {
        return Err(MeanFieldError::NonPositiveRate(mu));
    }
    if i0 < 1 || i0 >= n {
        return Err(MeanFieldError::BadSeed);
    }
    let seed = i0 as f64 / n as f64;
    let rho0: Vec<f64> = if opts.degree_weighted_seed {
        let mean = p_tot.mean();
        p_tot
            .iter()
            .map(|(k, _)| (seed * k as f64 / mean).min(1.0))
            .collect()
    } else {
        vec![seed; p_tot.probs().len()]
    };
    let mut state = MeanFieldState { rho: rho0, t: 0.0 };
    let mut curve = MeanFieldCurve {
        n,
        i0,
        mu,
        times: vec![0.0],
        fractions: vec![state.informed_fraction(p_tot)],
        rho_snapshots: vec![(0.0, state.rho.clone())],
        final_rho: Vec::new(),
        k_min: p_tot.k_min(),
        max_clamp: 0.0,
    };

    let mut step = 0usize;
    while state.t < opts.t_end {
        let rhs = drho_dt(&state, p_tot, mu);
        let mut overshoot: f64 = 0.0;
        for (r, d) in state.rho.iter_mut().zip(&rhs) {
            *r += opts.dt * d;
            if *r > 1.0 {
                overshoot = overshoot.max(*r - 1.0);
                *r = 1.0;
            }
            if *r < 0.0 {
                overshoot = overshoot.max(-*r);
                *r = 0.0;
            }
        }
        if overshoot > 1e-3 {
            return Err(MeanFieldError::StepSize {
                t: state.t,
                overshoot,
            });
        }
        curve.max_clamp = curve.max_clamp.max(overshoot);
        state.t += opts.dt;
        step += 1;
        let fraction = state.informed_fraction(p_tot);
        curve.times.push(state.t);
        curve.fractions.push(fraction);
        if step.is_multiple_of(opts.snapshot_every) {
            curve.rho_snapshots.push((state.t, state.rho.clone()));
        }
        if fraction >= 1.0 - 1e-6 {
            break;
        }
    }
    curve.final_rho = state.rho;
    Ok(curve)
}
