//! Experiment orchestration: CSV emission, companion gnuplot scripts, and the
//! built-in validation suites.
//!
//! Outputs are deterministic for a given config and seed: all parallel work
//! is split into fixed-size chunks with derived random streams and merged in
//! chunk order, so the emitted CSV bytes do not depend on the thread count.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use rayon::prelude::*;

use crate::channel::ChannelSampler;
use crate::config::{Experiment, ExperimentConfig, SweepAxis};
use crate::markov::{self, SolveOptions};
use crate::montecarlo;
use crate::params::{dbm_to_linear, RsiMode, SystemParams};
use crate::rates;
use crate::special::scaled_exp_integral;
use crate::streams;
use thiserror::Error;

/// Overall result of an experiment run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Pass,
    ValidationFailed,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Chain(#[from] markov::ChainError),
    #[error(transparent)]
    Solve(#[from] markov::SolveError),
}

/// One named validation check with its residual.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        Check { name, pass, detail }
    }

    fn print(&self) {
        println!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail);
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome, ExperimentError> {
    fs::create_dir_all(&cfg.out_dir)?;
    match cfg.experiment {
        Experiment::Fig1Rates => run_fig1(cfg),
        Experiment::Fig2Throughput => run_fig2(cfg),
        Experiment::ValidateClosedForms => run_validate_closed_forms(cfg),
        Experiment::ValidateChain => run_validate_chain(cfg),
    }
}

fn outcome_from_checks(checks: &[Check], cfg: &ExperimentConfig, report_name: &str) -> Result<RunOutcome, ExperimentError> {
    let mut w = BufWriter::new(File::create(cfg.out_dir.join(report_name))?);
    writeln!(w, "check,pass,detail")?;
    for c in checks {
        c.print();
        writeln!(w, "{},{},{}", c.name, c.pass, c.detail.replace(',', ";"))?;
    }
    w.flush()?;
    if checks.iter().all(|c| c.pass) {
        Ok(RunOutcome::Pass)
    } else {
        Ok(RunOutcome::ValidationFailed)
    }
}

// ---------------------------------------------------------------------------
// Rate comparison sweep
// ---------------------------------------------------------------------------

struct RateMeans {
    slow: f64,
    fast: f64,
    numeric: f64,
    conventional: f64,
}

fn params_at_sweep_value(base: &SystemParams, axis: SweepAxis, value: f64) -> SystemParams {
    let mut p = base.clone();
    match axis {
        SweepAxis::VarBb => p.var_bb = value,
        SweepAxis::PRDbm => p.p_r = dbm_to_linear(value),
        SweepAxis::LMaxPackets => p.l_max_bits = value as u64 * p.b_bits,
    }
    p
}

/// Paired-sample averages of the four full-duplex rate evaluations at full
/// Bob power.
fn average_rates_at_point(
    p: &SystemParams,
    n_samples: usize,
    numeric_symbols: usize,
    seed: u64,
    stream_base: u64,
) -> RateMeans {
    const CHUNKS: usize = 64;
    let base = n_samples / CHUNKS;
    let extra = n_samples % CHUNKS;
    let numeric_params = SystemParams {
        m_block: 1,
        n_symbols: numeric_symbols,
        ..p.clone()
    };

    let partials: Vec<[f64; 4]> = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let count = base + usize::from(c < extra);
            let mut sampler = ChannelSampler::new(p, seed, stream_base + c as u64);
            let mut sums = [0.0f64; 4];
            for _ in 0..count {
                let s = sampler.sample_slot();
                let g_bb = sampler.sample_rsi_gain();
                sums[0] += rates::rate_rt_fd_slow(&s, p, p.p_b_max);
                sums[1] += rates::rate_rt_fd_fast(&s, p, p.p_b_max);
                sums[2] += rates::rate_rt_fd_numeric(
                    &s,
                    &numeric_params,
                    p.p_b_max,
                    sampler.rng_mut(),
                );
                sums[3] += rates::rate_rt_fd_conventional(&s, p, p.p_b_max, g_bb);
            }
            sums
        })
        .collect();

    let mut total = [0.0f64; 4];
    for part in &partials {
        for (t, v) in total.iter_mut().zip(part.iter()) {
            *t += v;
        }
    }
    let n = n_samples as f64;
    RateMeans {
        slow: total[0] / n,
        fast: total[1] / n,
        numeric: total[2] / n,
        conventional: total[3] / n,
    }
}

fn run_fig1(cfg: &ExperimentConfig) -> Result<RunOutcome, ExperimentError> {
    let csv_path = cfg.out_dir.join("fig1_rates.csv");
    let mut w = BufWriter::new(File::create(&csv_path)?);
    writeln!(
        w,
        "sweep_value,rate_slow_closed,rate_fast_closed,rate_fast_numeric_mc,rate_conventional"
    )?;

    let mut checks = Vec::new();
    let mut max_gap = 0.0f64;
    let mut dominated = true;
    let mut slow_above_fast = true;
    for (i, &v) in cfg.sweep.values.iter().enumerate() {
        let p = params_at_sweep_value(&cfg.params, cfg.sweep.axis, v);
        let m = average_rates_at_point(
            &p,
            cfg.n_samples,
            cfg.fig1_numeric_symbols,
            cfg.seed,
            streams::SWEEP_BASE + (i as u64) * 1024,
        );
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6},{:.6}",
            v, m.slow, m.fast, m.numeric, m.conventional
        )?;
        w.flush()?;
        max_gap = max_gap.max((m.fast - m.numeric).abs());
        dominated &= m.fast >= m.conventional;
        slow_above_fast &= m.slow >= m.fast;
    }
    checks.push(Check::new(
        "fast_closed_matches_numeric_mean",
        max_gap <= 1e-2,
        format!("max |closed - numeric| = {max_gap:.3e} (tol 1e-2)"),
    ));
    checks.push(Check::new(
        "fast_dominates_conventional",
        dominated,
        "mean fast-RSI rate ≥ mean conventional rate at every sweep point".into(),
    ));
    checks.push(Check::new(
        "slow_dominates_fast",
        slow_above_fast,
        "mean slow-RSI rate ≥ mean fast-RSI rate at every sweep point".into(),
    ));

    write_gnuplot(
        &cfg.out_dir.join("fig1_rates.gp"),
        &format!(
            "# companion plot script for fig1_rates.csv\n\
             set datafile separator ','\n\
             set key top right autotitle columnhead\n\
             set xlabel 'sweep value ({axis})'\n\
             set ylabel 'average e2e rate (bits/s/Hz)'\n\
             set grid\n\
             plot 'fig1_rates.csv' using 1:2 with linespoints, \\\n\
             \x20    '' using 1:3 with linespoints, \\\n\
             \x20    '' using 1:4 with points pt 6, \\\n\
             \x20    '' using 1:5 with linespoints\n",
            axis = cfg.sweep.axis.name()
        ),
    )?;

    outcome_from_checks(&checks, cfg, "fig1_rates_checks.csv")
}

// ---------------------------------------------------------------------------
// Throughput vs buffer size
// ---------------------------------------------------------------------------

/// Largest bin width ≤ `requested` that divides the buffer size evenly.
fn fitting_bin_width(l_max_bits: u64, requested: u64) -> u64 {
    (1..=requested.min(l_max_bits))
        .rev()
        .find(|&d| l_max_bits.is_multiple_of(d))
        .unwrap_or(1)
}

fn run_fig2(cfg: &ExperimentConfig) -> Result<RunOutcome, ExperimentError> {
    let csv_path = cfg.out_dir.join("fig2_throughput.csv");
    let mut w = BufWriter::new(File::create(&csv_path)?);
    writeln!(w, "r_d,l_max_packets,mu_analytic,mu_montecarlo,ci,pr_q_ge_b")?;

    // One flat grid over (r_d, l_max) so trajectory streams stay unique.
    let mut grid = Vec::new();
    for &r_d in &cfg.r_d_values {
        let b_bits = (r_d * cfg.params.wt).round().max(1.0) as u64;
        for &packets in &cfg.sweep.values {
            grid.push(SystemParams {
                b_bits,
                l_max_bits: packets as u64 * b_bits,
                ..cfg.params.clone()
            });
        }
    }

    let batch = montecarlo::run_batch(
        &grid,
        cfg.rsi_mode,
        cfg.trials,
        cfg.n_slots,
        cfg.warmup_slots,
        cfg.seed,
    );

    for (idx, (point, mc)) in grid.iter().zip(batch.iter()).enumerate() {
        let stats = markov::SlotStatistics::estimate(
            point,
            cfg.rsi_mode,
            cfg.n_samples,
            cfg.seed,
            streams::ANALYTIC_BASE + (idx as u64) * 64,
        );
        let bin = fitting_bin_width(point.l_max_bits, cfg.bin_width_bits);
        let model = markov::build_chain(&stats.increments, point, bin)?;
        let pi = markov::steady_state(&model, &SolveOptions::default())?;
        let mut report = markov::secure_throughput_analytic(&model, &pi, &stats.event_probs);
        report.mu_sec_montecarlo = Some(mc.mu_mean);
        report.mc_ci_halfwidth = Some(mc.ci_halfwidth);

        let r_d = point.r_d();
        let packets = point.l_max_bits / point.b_bits;
        writeln!(
            w,
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            r_d, packets, report.mu_sec_analytic, mc.mu_mean, mc.ci_halfwidth, report.pr_q_ge_b
        )?;
        w.flush()?;
    }

    write_gnuplot(
        &cfg.out_dir.join("fig2_throughput.gp"),
        "# companion plot script for fig2_throughput.csv\n\
         set datafile separator ','\n\
         set key bottom right autotitle columnhead\n\
         set xlabel 'L_max (packets)'\n\
         set ylabel 'secure throughput (packets/slot)'\n\
         set grid\n\
         plot 'fig2_throughput.csv' using 2:3 with linespoints, \\\n\
         \x20    '' using 2:4:5 with yerrorlines\n",
    )?;

    Ok(RunOutcome::Pass)
}

// ---------------------------------------------------------------------------
// Validation suites
// ---------------------------------------------------------------------------

fn run_validate_closed_forms(cfg: &ExperimentConfig) -> Result<RunOutcome, ExperimentError> {
    let p = &cfg.params;
    let mut checks = Vec::new();

    // Fast-RSI closed form vs the symbol-wise numeric evaluator, averaged
    // over many interference draws per channel sample.
    {
        let numeric_params = SystemParams {
            m_block: 1,
            n_symbols: 10_000,
            ..p.clone()
        };
        let reps = 20;
        let gaps: Vec<f64> = (0..100u64)
            .into_par_iter()
            .map(|i| {
                let mut sampler =
                    ChannelSampler::new(p, cfg.seed, streams::VALIDATE_BASE + i);
                let s = sampler.sample_slot();
                let closed = rates::rate_rt_fd_fast(&s, p, p.p_b_max);
                let mean_numeric = (0..reps)
                    .map(|_| {
                        rates::rate_rt_fd_numeric(&s, &numeric_params, p.p_b_max, sampler.rng_mut())
                    })
                    .sum::<f64>()
                    / reps as f64;
                (closed - mean_numeric).abs()
            })
            .collect();
        let max_gap = gaps.iter().cloned().fold(0.0, f64::max);
        checks.push(Check::new(
            "fast_closed_form_vs_numeric",
            max_gap <= 1e-2,
            format!("max |closed - mean numeric| = {max_gap:.3e} over 100 samples (tol 1e-2)"),
        ));
    }

    // Slow-RSI limit: single-block numeric vs the interference-free closed
    // form, within the vanishing 1/n correction.
    {
        let n = 10_000usize;
        let slow_params = SystemParams {
            m_block: n,
            n_symbols: n,
            ..p.clone()
        };
        let bound = (1.0 + slow_params.var_bb / slow_params.kappa * n as f64 * p.p_b_max)
            .log2()
            / n as f64
            + 1e-3;
        let mut sampler = ChannelSampler::new(p, cfg.seed, streams::VALIDATE_BASE + 200);
        let mut max_gap = 0.0f64;
        let mut invariant = true;
        for _ in 0..100 {
            let s = sampler.sample_slot();
            let closed = rates::rate_rt_fd_slow(&s, p, p.p_b_max);
            let numeric =
                rates::rate_rt_fd_numeric(&s, &slow_params, p.p_b_max, sampler.rng_mut());
            max_gap = max_gap.max((numeric - closed).abs());
            for var in [0.0, 0.1, 0.5, 2.0] {
                let pv = SystemParams { var_bb: var, ..p.clone() };
                invariant &= rates::rate_rt_fd_slow(&s, &pv, p.p_b_max) == closed;
            }
        }
        checks.push(Check::new(
            "slow_limit_numeric_bound",
            max_gap <= bound,
            format!("max |numeric - closed| = {max_gap:.3e} (bound {bound:.3e})"),
        ));
        checks.push(Check::new(
            "slow_rate_sigma_invariant",
            invariant,
            "slow-RSI rate exactly independent of var_bb".into(),
        ));
    }

    // Mean dominance over paired samples.
    {
        let m = average_rates_at_point(
            p,
            cfg.n_samples.max(100_000),
            cfg.fig1_numeric_symbols,
            cfg.seed,
            streams::VALIDATE_BASE + 400,
        );
        checks.push(Check::new(
            "rate_dominance",
            m.slow >= m.fast && m.fast >= m.conventional,
            format!(
                "means: slow {:.4} ≥ fast {:.4} ≥ conventional {:.4}",
                m.slow, m.fast, m.conventional
            ),
        ));
    }

    // Power selection against a dense grid on boundary samples.
    {
        let boundary_params = SystemParams { var_bb: 2.0, ..p.clone() };
        let mut sampler = ChannelSampler::new(&boundary_params, cfg.seed, streams::VALIDATE_BASE + 500);
        let mut max_rate_gap = 0.0f64;
        let mut max_power_gap = 0.0f64;
        let mut found = 0;
        while found < 50 {
            let s = sampler.sample_slot();
            let r_d = boundary_params.r_d();
            let at_zero = rates::rate_rt_fd_fast(&s, &boundary_params, 0.0);
            let at_max = rates::rate_rt_fd_fast(&s, &boundary_params, boundary_params.p_b_max);
            if !(at_zero >= r_d && at_max < r_d) {
                continue;
            }
            found += 1;
            let sel = rates::select_bob_power(&s, &boundary_params, RsiMode::Fast, sampler.rng_mut());
            max_rate_gap = max_rate_gap.max((sel.rate - r_d).abs());
            // Dense scan: largest of 10⁴ grid powers still meeting the target.
            let mut grid_best = 0.0;
            for i in (0..=10_000).rev() {
                let pb = i as f64 / 10_000.0 * boundary_params.p_b_max;
                if rates::rate_rt_fd_fast(&s, &boundary_params, pb) >= r_d {
                    grid_best = pb;
                    break;
                }
            }
            max_power_gap =
                max_power_gap.max((sel.p_b - grid_best).abs() / boundary_params.p_b_max);
        }
        checks.push(Check::new(
            "power_selection_vs_dense_grid",
            max_rate_gap <= 1e-5 && max_power_gap <= 2e-4,
            format!(
                "boundary rate gap {max_rate_gap:.2e} (tol 1e-5), power gap {max_power_gap:.2e} of p_max"
            ),
        ));
    }

    // Scaled exponential integral bracketing.
    {
        let mut ok = true;
        let mut x = 1e-6;
        while x <= 1e6 {
            let s = scaled_exp_integral(x).unwrap();
            ok &= s > 1.0 / (x + 1.0) && s < 1.0 / x;
            x *= 2.0;
        }
        checks.push(Check::new(
            "scaled_exp_integral_bracket",
            ok,
            "1/(x+1) < e^x·E1(x) < 1/x on a log grid over [1e-6, 1e6]".into(),
        ));
    }

    outcome_from_checks(&checks, cfg, "validate_closed_forms_report.csv")
}

fn run_validate_chain(cfg: &ExperimentConfig) -> Result<RunOutcome, ExperimentError> {
    let p = &cfg.params;
    let mut checks = Vec::new();

    let stats = markov::SlotStatistics::estimate(
        p,
        cfg.rsi_mode,
        cfg.n_samples,
        cfg.seed,
        streams::ANALYTIC_BASE,
    );
    let bin = fitting_bin_width(p.l_max_bits, cfg.bin_width_bits);
    let model = markov::build_chain(&stats.increments, p, bin)?;
    let pi = markov::steady_state(&model, &SolveOptions::default())?;

    let residual = markov::stationary_residual(&model, &pi);
    checks.push(Check::new(
        "steady_state_residual",
        residual <= 1e-10,
        format!("‖πT - π‖₁ = {residual:.3e} (tol 1e-10)"),
    ));

    // Empirical occupancy against the stationary distribution.
    let sim = montecarlo::run_trajectory_on_stream(
        p,
        cfg.rsi_mode,
        cfg.n_slots.min(500_000),
        cfg.warmup_slots,
        cfg.seed,
        streams::TRAJECTORY_BASE,
    );
    let tv = markov::total_variation(&pi, &sim.occupancy_binned(bin, model.state_count));
    checks.push(Check::new(
        "occupancy_total_variation",
        tv <= 0.05,
        format!("TV(π, empirical) = {tv:.4} (tol 0.05)"),
    ));

    // Bin-width consistency.
    {
        let fine_bin = fitting_bin_width(p.l_max_bits, (bin / 2).max(1));
        let fine_model = markov::build_chain(&stats.increments, p, fine_bin)?;
        let fine_pi = markov::steady_state(&fine_model, &SolveOptions::default())?;
        let coarse = markov::secure_throughput_analytic(&model, &pi, &stats.event_probs);
        let fine = markov::secure_throughput_analytic(&fine_model, &fine_pi, &stats.event_probs);
        let mu_rel = (coarse.mu_sec_analytic - fine.mu_sec_analytic).abs()
            / fine.mu_sec_analytic.max(1e-12);
        let pr_rel = (coarse.pr_q_ge_b - fine.pr_q_ge_b).abs() / fine.pr_q_ge_b.max(1e-12);
        checks.push(Check::new(
            "bin_width_consistency",
            mu_rel <= 0.01 && pr_rel <= 0.01,
            format!(
                "bin {bin} vs {fine_bin}: mu rel gap {:.3e}, Pr(Q>=b) rel gap {:.3e}",
                mu_rel, pr_rel
            ),
        ));
    }

    // Analytic vs simulated secure throughput.
    let mut report = markov::secure_throughput_analytic(&model, &pi, &stats.event_probs);
    report.mu_sec_montecarlo = Some(sim.mu_empirical);
    report.mc_ci_halfwidth = Some(sim.ci_halfwidth);
    {
        let se = sim.ci_halfwidth / 1.96;
        let tol = (2.0 * se).max(0.02);
        let gap = (report.mu_sec_analytic - sim.mu_empirical).abs();
        checks.push(Check::new(
            "analytic_vs_simulated_throughput",
            gap <= tol,
            format!(
                "analytic {:.4} vs simulated {:.4}, gap {gap:.4} (tol {tol:.4})",
                report.mu_sec_analytic, sim.mu_empirical
            ),
        ));
    }

    // Artifacts: stationary distribution and the throughput report.
    {
        let mut w = BufWriter::new(File::create(cfg.out_dir.join("validate_chain_stationary.csv"))?);
        model.write_stationary_csv(&pi, &mut w)?;
        let mut j = BufWriter::new(File::create(cfg.out_dir.join("validate_chain_report.json"))?);
        report.write_json(&mut j)?;
    }

    outcome_from_checks(&checks, cfg, "validate_chain_report.csv")
}

fn write_gnuplot(path: &PathBuf, content: &str) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(content.as_bytes())?;
    w.flush()
}

/// Export a short decision trace next to the other artifacts; handy when
/// debugging policy changes.
pub fn write_debug_trace(cfg: &ExperimentConfig, n_slots: u64) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("decision_trace.csv");
    let mut w = BufWriter::new(File::create(&path)?);
    montecarlo::write_trace(&cfg.params, cfg.rsi_mode, n_slots, cfg.seed, &mut w)?;
    w.flush()?;
    Ok(path)
}
