//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured values before asserting.
//!
//! The two reference networks (power law with exponent 2.75 and minimum
//! degree 2; Poisson with mean 4.58 and minimum degree 1; n = 10000,
//! mu = 1, threshold 99%, time origin at the fifth reception) are shared
//! across criteria through lazy fixtures.

use std::time::Instant;

use once_cell::sync::Lazy;

use infoprop::degree::{DegreeLaw, Pmf};
use infoprop::meanfield::{self, MeanFieldCurve, MeanFieldOptions};
use infoprop::network::Network;
use infoprop::simulate::{self, EnsembleSpec};
use infoprop::stats::{self, EnsembleStats, StatsAccumulator};
use infoprop::theory::{self, TheoryCurve};

const N: usize = 10_000;
const I0: usize = 5;
const MU: f64 = 1.0;
const THRESHOLD: f64 = 0.99;
const STEPS: usize = 1000;
const MILESTONES: [f64; 3] = [0.01, 0.5, 1.0];

fn parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn check(failures: &mut Vec<String>, ok: bool, label: &str, detail: String) {
    println!("[{}] {label}: {detail}", if ok { "PASS" } else { "FAIL" });
    if !ok {
        failures.push(format!("{label}: {detail}"));
    }
}

fn finish(criterion: &str, failures: Vec<String>) {
    assert!(
        failures.is_empty(),
        "{criterion} failed:\n{}",
        failures.join("\n")
    );
}

struct RefData {
    name: &'static str,
    k_min: usize,
    stats: EnsembleStats,
    theory: TheoryCurve,
    meanfield: MeanFieldCurve,
    p_tot: Pmf,
}

fn build_reference(name: &'static str, law: DegreeLaw, runs: usize, seed: u64) -> RefData {
    let k_min = law.k_min();
    let p_tot = law.distribution(N, None).unwrap().pmf().clone();
    let spec = EnsembleSpec {
        law,
        n: N,
        k_max_override: None,
        mu: MU,
        completion_threshold: THRESHOLD,
        trace: false,
    };
    let mut acc = StatsAccumulator::new(N, I0, MU, &MILESTONES).unwrap();
    simulate::run_ensemble_each(&spec, runs, seed, parallelism(), |rec| {
        acc.add_record(&rec).unwrap();
    })
    .unwrap();
    let stats = acc.finalize().unwrap();
    let theory = theory::solve(&p_tot, N, I0, MU, STEPS).unwrap();
    let meanfield = meanfield::integrate(&p_tot, N, I0, MU, &MeanFieldOptions::default()).unwrap();
    RefData {
        name,
        k_min,
        stats,
        theory,
        meanfield,
        p_tot,
    }
}

static REF_ER: Lazy<RefData> = Lazy::new(|| {
    build_reference(
        "poisson(4.58)",
        DegreeLaw::poisson(4.58, 1).unwrap(),
        1040,
        20_240_717,
    )
});

static REF_SF: Lazy<RefData> = Lazy::new(|| {
    build_reference(
        "power_law(2.75)",
        DegreeLaw::power_law(2.75, 2).unwrap(),
        1040,
        20_240_718,
    )
});

/// Per-configuration summary for the solver accuracy sweep.
struct SweepPoint {
    name: &'static str,
    accepted: usize,
    t_sim_50: f64,
    t_sim_80: f64,
    t_th_50: f64,
    t_th_80: f64,
}

fn sweep_point(name: &'static str, law: DegreeLaw, runs: usize, seed: u64) -> SweepPoint {
    let p_tot = law.distribution(N, None).unwrap().pmf().clone();
    let spec = EnsembleSpec {
        law,
        n: N,
        k_max_override: None,
        mu: MU,
        completion_threshold: THRESHOLD,
        trace: false,
    };
    let mut acc = StatsAccumulator::new(N, I0, MU, &[0.5]).unwrap();
    simulate::run_ensemble_each(&spec, runs, seed, parallelism(), |rec| {
        acc.add_record(&rec).unwrap();
    })
    .unwrap();
    let stats = acc.finalize().unwrap();
    let theory = theory::solve(&p_tot, N, I0, MU, STEPS).unwrap();
    SweepPoint {
        name,
        accepted: stats.accepted_runs,
        t_sim_50: stats.time_at(N / 2).unwrap(),
        t_sim_80: stats.time_at(N * 8 / 10).unwrap(),
        t_th_50: theory.time_at(N as f64 / 2.0).unwrap(),
        t_th_80: theory.time_at(N as f64 * 0.8).unwrap(),
    }
}

static SWEEP_EXTRA: Lazy<Vec<SweepPoint>> = Lazy::new(|| {
    vec![
        sweep_point(
            "poisson(3.0)",
            DegreeLaw::poisson(3.0, 1).unwrap(),
            2600,
            101,
        ),
        sweep_point(
            "poisson(4.0)",
            DegreeLaw::poisson(4.0, 1).unwrap(),
            1060,
            102,
        ),
        sweep_point(
            "poisson(5.0)",
            DegreeLaw::poisson(5.0, 1).unwrap(),
            1050,
            103,
        ),
        sweep_point(
            "power_law(2.5)",
            DegreeLaw::power_law(2.5, 2).unwrap(),
            1050,
            104,
        ),
        sweep_point(
            "power_law(3.0)",
            DegreeLaw::power_law(3.0, 2).unwrap(),
            1050,
            105,
        ),
    ]
});

fn star(leaves: usize) -> Network {
    let edges: Vec<(u32, u32)> = (1..=leaves as u32).map(|v| (0, v)).collect();
    Network::from_edge_list(leaves + 1, &edges).unwrap()
}

#[test]
fn criterion_01_minimum_of_exponentials_on_stars() {
    use rand::SeedableRng;
    let start = Instant::now();
    let mut failures = Vec::new();
    let runs = 100_000;
    for k in [1usize, 5, 50] {
        let net = star(k);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4000 + k as u64);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..runs {
            let rec = simulate::simulate_from(&net, 0, MU, &mut rng, false).unwrap();
            let t = rec.time_of(2);
            sum += t;
            sumsq += t * t;
        }
        let mean = sum / runs as f64;
        let se = ((sumsq / runs as f64 - mean * mean) / runs as f64).sqrt();
        let expect = 1.0 / k as f64;
        check(
            &mut failures,
            (mean - expect).abs() < 3.0 * se,
            "criterion 1",
            format!(
                "star K={k}: mean first reception {mean:.6} vs 1/K={expect:.6} (3se={:.6})",
                3.0 * se
            ),
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(
        &mut failures,
        elapsed < 10.0,
        "criterion 1",
        format!("runtime {elapsed:.2}s < 10s"),
    );
    finish("criterion 1", failures);
}

#[test]
fn criterion_02_external_connection_bookkeeping() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let law = DegreeLaw::poisson(4.58, 1).unwrap();
    let spec = EnsembleSpec {
        law,
        n: N,
        k_max_override: None,
        mu: MU,
        completion_threshold: 1e-9, // keep every run: the identity is per event
        trace: true,
    };
    let seed = 777;
    let mut receptions = 0usize;
    let mut identity_violations = 0usize;
    let mut floor_violations = 0usize;
    let mut spot_checks = 0usize;
    let mut spot_failures = 0usize;
    let runs = 110;
    simulate::run_ensemble_each(&spec, runs, seed, parallelism(), |rec| {
        let tr = rec.trace.as_ref().expect("tracing on");
        receptions += rec.informed_count;
        if tr.k_recv_inf[0] != 0 || tr.k_ext[0] != tr.k_recv[0] as i64 {
            identity_violations += 1;
        }
        for j in 1..rec.informed_count {
            let delta = tr.k_ext[j] - tr.k_ext[j - 1];
            if delta != tr.k_recv[j] as i64 - 2 * tr.k_recv_inf[j] as i64 {
                identity_violations += 1;
            }
            if tr.k_recv_inf[j] < 1 {
                floor_violations += 1;
            }
        }
        // independent re-count of K_ext from the raw network at sampled steps
        if rec.run_index < 3 {
            let net = simulate::network_for_run(&spec, seed, rec.run_index).unwrap();
            let mut informed = vec![false; N];
            let mut next_check = 1usize;
            for (j, &node) in rec.infection_order.iter().enumerate() {
                informed[node as usize] = true;
                if j + 1 == next_check || j + 1 == rec.informed_count {
                    let mut external = 0i64;
                    for u in 0..N {
                        for &v in net.neighbors(u) {
                            if (v as usize) > u && (informed[u] != informed[v as usize]) {
                                external += 1;
                            }
                        }
                    }
                    spot_checks += 1;
                    if external != tr.k_ext[j] {
                        spot_failures += 1;
                    }
                    next_check *= 8;
                }
            }
        }
    })
    .unwrap();

    check(
        &mut failures,
        receptions >= 1_000_000,
        "criterion 2",
        format!("{receptions} receptions across {runs} runs (need >= 1e6)"),
    );
    check(
        &mut failures,
        identity_violations == 0,
        "criterion 2",
        format!("delta K_ext = k_recv - 2 k_recv_inf exact ({identity_violations} violations)"),
    );
    check(
        &mut failures,
        floor_violations == 0,
        "criterion 2",
        format!("k_recv_inf >= 1 on non-source receptions ({floor_violations} violations)"),
    );
    check(
        &mut failures,
        spot_failures == 0 && spot_checks > 10,
        "criterion 2",
        format!("independent K_ext recount agreed at {spot_checks} checkpoints ({spot_failures} failures)"),
    );
    let elapsed = start.elapsed().as_secs_f64();
    check(
        &mut failures,
        elapsed < 30.0,
        "criterion 2",
        format!("runtime {elapsed:.2}s < 30s"),
    );
    finish("criterion 2", failures);
}

#[test]
fn criterion_03_mixture_identity_per_run() {
    let mut failures = Vec::new();
    let n = 1000;
    let law = DegreeLaw::poisson(4.58, 1).unwrap();
    let p_tot_model = law.distribution(n, None).unwrap().pmf().clone();
    let spec = EnsembleSpec {
        law,
        n,
        k_max_override: None,
        mu: MU,
        completion_threshold: 1e-9,
        trace: false,
    };
    let out = simulate::run_ensemble(&spec, 25, 4242, parallelism()).unwrap();
    let mut count_mismatches = 0usize;
    let mut float_mismatches = 0usize;
    let mut checks = 0usize;
    for rec in &out.accepted {
        let k_hi = *rec.degrees.iter().max().unwrap() as usize;
        let mut count_tot = vec![0i64; k_hi + 1];
        for &d in &rec.degrees {
            count_tot[d as usize] += 1;
        }
        // informed counts grow incrementally; uninformed counts recomputed
        // from scratch so the identity is checked across two routes
        let mut count_inf = vec![0i64; k_hi + 1];
        for (j, &node) in rec.infection_order.iter().enumerate() {
            count_inf[rec.degrees[node as usize] as usize] += 1;
            let i = j + 1;
            let mut count_ninf = vec![0i64; k_hi + 1];
            let t_now = rec.reception_time[node as usize];
            for (v, &d) in rec.degrees.iter().enumerate() {
                let informed = rec.reception_time[v] < t_now
                    || rec.infection_order[..=j].contains(&(v as u32));
                if !informed {
                    count_ninf[d as usize] += 1;
                }
            }
            // exact integer identity i*hist_inf + (n-i)*hist_ninf = n*hist_tot
            for k in 0..=k_hi {
                if count_inf[k] + count_ninf[k] != count_tot[k] {
                    count_mismatches += 1;
                }
            }
            checks += 1;
            // float mixture route at a few checkpoints
            if i % 211 == 0 && i < n {
                let pmf_ninf = Pmf::new(
                    0,
                    count_ninf
                        .iter()
                        .map(|&c| c as f64 / (n - i) as f64)
                        .collect(),
                )
                .unwrap();
                let pmf_tot =
                    Pmf::new(0, count_tot.iter().map(|&c| c as f64 / n as f64).collect()).unwrap();
                let inf = theory::informed_distribution(&pmf_ninf, &pmf_tot, i as f64, n).unwrap();
                let pmf_inf_direct =
                    Pmf::new(0, count_inf.iter().map(|&c| c as f64 / i as f64).collect()).unwrap();
                if inf.pmf.tv_distance(&pmf_inf_direct) > 1e-9 {
                    float_mismatches += 1;
                }
            }
        }
    }
    check(
        &mut failures,
        count_mismatches == 0 && checks > 10_000,
        "criterion 3",
        format!(
            "integer mixture identity exact at {checks} states ({count_mismatches} mismatches)"
        ),
    );
    check(
        &mut failures,
        float_mismatches == 0,
        "criterion 3",
        format!("informed_distribution matches direct counts ({float_mismatches} mismatches)"),
    );
    // the model's own identity: p_ninf = p_tot at i=n gives p_inf = p_tot
    let ident = theory::informed_distribution(&p_tot_model, &p_tot_model, n as f64, n).unwrap();
    check(
        &mut failures,
        ident.pmf.tv_distance(&p_tot_model) < 1e-14,
        "criterion 3",
        "mixture closes exactly at i = n".into(),
    );
    finish("criterion 3", failures);
}

#[test]
fn criterion_04_solver_conservation_on_references() {
    let mut failures = Vec::new();
    for data in [&*REF_SF, &*REF_ER] {
        let curve = &data.theory;
        check(
            &mut failures,
            curve.halted_at.is_none() && curve.max_i() >= (N - 1) as f64,
            "criterion 4",
            format!(
                "{}: solve completed through i={:.0}",
                data.name,
                curve.max_i()
            ),
        );
        check(
            &mut failures,
            curve.max_norm_drift < 1e-9,
            "criterion 4",
            format!(
                "{}: max normalization drift {:.3e} < 1e-9",
                data.name, curve.max_norm_drift
            ),
        );
        let worst_sum = curve
            .samples
            .iter()
            .map(|s| (s.p_ninf.total() - 1.0).abs())
            .fold(0.0f64, f64::max);
        check(
            &mut failures,
            worst_sum < 1e-9,
            "criterion 4",
            format!(
                "{}: max |sum(p_ninf) - 1| = {worst_sum:.3e} < 1e-9",
                data.name
            ),
        );
        let mut prev = f64::INFINITY;
        let mut monotone = true;
        for s in &curve.samples {
            let m = s.p_ninf.mean();
            if m > prev + 1e-9 {
                monotone = false;
            }
            prev = m;
        }
        check(
            &mut failures,
            monotone,
            "criterion 4",
            format!("{}: E[k_ninf] non-increasing along the solve", data.name),
        );
    }
    finish("criterion 4", failures);
}

#[test]
fn criterion_05_solver_accuracy_sweep() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let refs: Vec<SweepPoint> = vec![SweepPoint {
        name: "power_law(2.75)",
        accepted: REF_SF.stats.accepted_runs,
        t_sim_50: REF_SF.stats.time_at(N / 2).unwrap(),
        t_sim_80: REF_SF.stats.time_at(N * 8 / 10).unwrap(),
        t_th_50: REF_SF.theory.time_at(N as f64 / 2.0).unwrap(),
        t_th_80: REF_SF.theory.time_at(N as f64 * 0.8).unwrap(),
    }];
    for point in SWEEP_EXTRA.iter().chain(refs.iter()) {
        check(
            &mut failures,
            point.accepted >= 1000,
            "criterion 5",
            format!(
                "{}: {} accepted runs (need >= 1000)",
                point.name, point.accepted
            ),
        );
        let rel50 = (point.t_th_50 - point.t_sim_50) / point.t_sim_50;
        let rel80 = (point.t_th_80 - point.t_sim_80) / point.t_sim_80;
        check(
            &mut failures,
            rel50.abs() <= 0.05,
            "criterion 5",
            format!(
                "{}: t(50%) sim {:.4} vs theory {:.4} ({:+.2}%, tol 5%)",
                point.name,
                point.t_sim_50,
                point.t_th_50,
                rel50 * 100.0
            ),
        );
        check(
            &mut failures,
            rel80.abs() <= 0.10,
            "criterion 5",
            format!(
                "{}: t(80%) sim {:.4} vs theory {:.4} ({:+.2}%, tol 10%)",
                point.name,
                point.t_sim_80,
                point.t_th_80,
                rel80 * 100.0
            ),
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(
        &mut failures,
        elapsed < 600.0,
        "criterion 5",
        format!("runtime {elapsed:.1}s < 600s"),
    );
    finish("criterion 5", failures);
}

#[test]
fn criterion_06_meanfield_comparison() {
    let mut failures = Vec::new();
    for data in [&*REF_SF, &*REF_ER] {
        let cmp = stats::compare_curves(&data.stats, &data.theory, &data.meanfield).unwrap();
        for c in &cmp.checkpoints {
            check(
                &mut failures,
                c.t_meanfield < c.t_sim,
                "criterion 6",
                format!(
                    "{}: mean-field t({:.0}%) = {:.4} strictly below sim {:.4}",
                    data.name,
                    c.fraction * 100.0,
                    c.t_meanfield,
                    c.t_sim
                ),
            );
        }
        check(
            &mut failures,
            cmp.theory_closer_at_half,
            "criterion 6",
            format!(
                "{}: |theory-sim| {:.4} < |mf-sim| {:.4} at 50%",
                data.name,
                cmp.checkpoints[1].theory_dev_abs.abs(),
                cmp.checkpoints[1].meanfield_dev_abs.abs()
            ),
        );
    }
    finish("criterion 6", failures);
}

#[test]
fn criterion_07_network_finish_order() {
    let mut failures = Vec::new();
    let t_sf_50 = REF_SF.stats.time_at(N / 2).unwrap();
    let t_er_50 = REF_ER.stats.time_at(N / 2).unwrap();
    let t_sf_99 = REF_SF.stats.time_at(N * 99 / 100).unwrap();
    let t_er_99 = REF_ER.stats.time_at(N * 99 / 100).unwrap();
    check(
        &mut failures,
        t_sf_50 <= 1.1 * t_er_50,
        "criterion 7",
        format!("t(50%): scale-free {t_sf_50:.4} earlier than or comparable to ER {t_er_50:.4}"),
    );
    check(
        &mut failures,
        t_sf_99 > t_er_99,
        "criterion 7",
        format!("t(99%): scale-free {t_sf_99:.4} strictly later than ER {t_er_99:.4}"),
    );
    finish("criterion 7", failures);
}

#[test]
fn criterion_08_informed_degree_distributions() {
    let mut failures = Vec::new();
    for data in [&*REF_SF, &*REF_ER] {
        for fraction in [0.01, 0.5] {
            let sim_pmf = data.stats.milestone_pmf(fraction).unwrap();
            let model = &data.theory.nearest_sample(fraction * N as f64).p_inf;
            let tv = sim_pmf.tv_distance(model);
            check(
                &mut failures,
                tv < 0.05,
                "criterion 8",
                format!(
                    "{}: TV(sim, model) at {:.0}% = {tv:.4} < 0.05",
                    data.name,
                    fraction * 100.0
                ),
            );
        }
    }
    // full-coverage milestone: threshold-1.0 ensemble on a smaller network
    let n = 300;
    let spec = EnsembleSpec {
        law: DegreeLaw::poisson(4.58, 1).unwrap(),
        n,
        k_max_override: None,
        mu: MU,
        completion_threshold: 1.0,
        trace: false,
    };
    let out = simulate::run_ensemble(&spec, 80, 90_210, parallelism()).unwrap();
    check(
        &mut failures,
        out.accepted.len() >= 5,
        "criterion 8",
        format!(
            "threshold-1.0 ensemble: {} fully informed runs",
            out.accepted.len()
        ),
    );
    let mut worst = 0.0f64;
    for rec in &out.accepted {
        let stats = stats::aggregate(std::slice::from_ref(rec), n, I0, MU, &[1.0]).unwrap();
        let milestone = stats.milestone_pmf(1.0).unwrap().clone();
        let mut counts = vec![0.0; *rec.degrees.iter().max().unwrap() as usize + 1];
        for &d in &rec.degrees {
            counts[d as usize] += 1.0;
        }
        let hist = Pmf::new(0, counts).unwrap();
        worst = worst.max(milestone.tv_distance(&hist));
    }
    check(
        &mut failures,
        worst < 1e-12,
        "criterion 8",
        format!("sim pmf at 100% equals the network degree pmf exactly (max TV {worst:.2e})"),
    );
    let p_tot = &REF_ER.p_tot;
    let ident = theory::informed_distribution(p_tot, p_tot, N as f64, N).unwrap();
    check(
        &mut failures,
        ident.pmf.tv_distance(p_tot) < 1e-14,
        "criterion 8",
        "model pmf at 100% equals the total degree pmf exactly".into(),
    );
    finish("criterion 8", failures);
}

#[test]
fn criterion_09_median_reception_times() {
    let mut failures = Vec::new();
    for data in [&*REF_SF, &*REF_ER] {
        let med = &data.stats.median_time_per_degree;
        let hi = 15.min(med.len() - 1);
        let ts: Vec<f64> = (data.k_min..=hi).map(|k| med[k]).collect();
        let defined = ts.iter().all(|t| t.is_finite());
        check(
            &mut failures,
            defined,
            "criterion 9",
            format!(
                "{}: median times defined for k in [{}, {hi}] (coverage {:?})",
                data.name,
                data.k_min,
                &data.stats.median_runs_per_degree[data.k_min..=hi]
            ),
        );
        let diffs: Vec<f64> = ts.windows(2).map(|w| w[0] - w[1]).collect();
        let positive = diffs.iter().all(|&d| d > 0.0);
        let shrinking = diffs.windows(2).all(|w| w[1] < w[0]);
        let fmt: Vec<String> = diffs.iter().map(|d| format!("{d:.4}")).collect();
        check(
            &mut failures,
            positive,
            "criterion 9",
            format!("{}: t(k)-t(k+1) positive: [{}]", data.name, fmt.join(", ")),
        );
        check(
            &mut failures,
            shrinking,
            "criterion 9",
            format!("{}: t(k)-t(k+1) shrinking in k", data.name),
        );
    }
    finish("criterion 9", failures);
}

#[test]
fn criterion_10_deterministic_cli_outputs() {
    use infoprop::app::{self, Subcommand};
    use infoprop::config::RunConfig;
    let mut failures = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str, parallelism: usize| -> Vec<(String, Vec<u8>)> {
        let out = dir.path().join(tag);
        let text = format!(
            "n = 2000\nruns = 150\nseed = 99\nparallelism = {parallelism}\noutputs = '{}'\n[network]\nkind = \"poisson\"\ngamma = 4.58\n",
            out.display()
        );
        let cfg = RunConfig::from_toml(&text).unwrap();
        app::run(Subcommand::All, &cfg, dir.path()).unwrap();
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .filter(|(name, _)| name.ends_with(".csv") || name.ends_with(".txt"))
            .collect();
        files.sort();
        files
    };
    let a = run("serial_1", 1);
    let b = run("serial_2", 1);
    let c = run("parallel", 4);
    check(
        &mut failures,
        a == b,
        "criterion 10",
        format!("repeated invocations byte-identical ({} files)", a.len()),
    );
    check(
        &mut failures,
        a == c,
        "criterion 10",
        "parallelism 1 and 4 byte-identical".into(),
    );
    check(
        &mut failures,
        a.iter().any(|(n, _)| n == "propagation.csv") && a.iter().any(|(n, _)| n == "degrees.csv"),
        "criterion 10",
        "joined propagation.csv and degrees.csv present".into(),
    );
    finish("criterion 10", failures);
}

#[test]
fn criterion_11_discrete_recursion_oracle() {
    let mut failures = Vec::new();
    let n = 200;
    let law = DegreeLaw::poisson(4.58, 1).unwrap();
    let p_tot = law.distribution(n, None).unwrap().pmf().clone();

    // oracle: the exact mixture recursion
    // P(k | i+1) = ((n-i) P(k | i) - P_recv(k | i)) / (n - i - 1)
    let mut recursion: Vec<Vec<f64>> = vec![p_tot.probs().to_vec()];
    let mut cur = p_tot.probs().to_vec();
    let k_min = p_tot.k_min();
    for i in 1..n - 1 {
        let mean: f64 = cur
            .iter()
            .enumerate()
            .map(|(j, &p)| (k_min + j) as f64 * p)
            .sum();
        let next: Vec<f64> = cur
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let k = (k_min + j) as f64;
                ((n - i) as f64 * p - k * p / mean) / (n - i - 1) as f64
            })
            .collect();
        recursion.push(next.clone());
        cur = next;
    }

    // continuous solver sampled at every integer i
    let grid: Vec<f64> = (1..n).map(|i| i as f64).collect();
    let solved = theory::solve_on_grid(&p_tot, n, MU, &grid, 1.0, STEPS);
    match solved {
        Ok(curve) => {
            let mut max_diff = 0.0f64;
            let mut max_at = 0usize;
            let mut first_exceed = None;
            for (idx, s) in curve.samples.iter().enumerate() {
                let rec = &recursion[idx];
                let mut d = 0.0f64;
                for (j, &r) in rec.iter().enumerate() {
                    d = d.max((s.p_ninf.get(k_min + j) - r).abs());
                }
                if d > max_diff {
                    max_diff = d;
                    max_at = idx + 1;
                }
                if first_exceed.is_none() && d > 1e-3 {
                    first_exceed = Some(idx + 1);
                }
            }
            let covered = curve.samples.len() == n - 1;
            check(
                &mut failures,
                covered,
                "criterion 11",
                format!(
                    "solver covered all i in [1, {}] ({} samples)",
                    n - 1,
                    curve.samples.len()
                ),
            );
            check(
                &mut failures,
                max_diff <= 1e-3,
                "criterion 11",
                format!(
                    "max per-entry |solver - recursion| = {max_diff:.3e} at i={max_at} (first > 1e-3 at i={first_exceed:?})"
                ),
            );
        }
        Err(err) => {
            check(
                &mut failures,
                false,
                "criterion 11",
                format!("unit-step solve failed: {err}"),
            );
        }
    }
    finish("criterion 11", failures);
}

/// Documented direction of the late-stage approximation error: the solver
/// overestimates the external connections, so its times fall below the
/// simulation beyond 80% informed.
#[test]
fn late_stage_error_direction() {
    let mut failures = Vec::new();
    for data in [&*REF_SF, &*REF_ER] {
        for fraction in [0.85, 0.90, 0.95] {
            let i = (fraction * N as f64) as usize;
            let t_sim = data.stats.time_at(i).unwrap();
            let t_th = data.theory.time_at(i as f64).unwrap();
            check(
                &mut failures,
                t_th <= t_sim,
                "late-stage direction",
                format!(
                    "{}: theory t({:.0}%) = {t_th:.4} <= sim {t_sim:.4}",
                    data.name,
                    fraction * 100.0
                ),
            );
        }
    }
    finish("late-stage direction", failures);
}
