//! Ground-truth slot-by-slot trajectory simulation.
//!
//! Evolves the key buffer under the per-slot policy over long runs, measuring
//! empirical secure throughput, queue occupancy, and mode frequencies. The
//! queue starts empty; a warm-up prefix is simulated but excluded from the
//! statistics so they reflect stationarity. Everything is deterministic given
//! (seed, stream), and batch sweeps assign each (grid point, trial) its own
//! stream, so results do not depend on the number of worker threads.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::channel::ChannelSampler;
use crate::params::{RsiMode, SystemParams};
use crate::rates;
use crate::scheme::{self, KeyQueueState, Mode};
use crate::streams;

/// Warm-up slots excluded from measurement by the convenience entry points.
pub const DEFAULT_WARMUP_SLOTS: u64 = 10_000;

/// Batches used for the within-trajectory confidence interval.
const CI_BATCHES: u64 = 100;

/// Measurements from one trajectory.
#[derive(Debug, Clone)]
pub struct SimResult {
    /// Measured slots (warm-up excluded).
    pub slots: u64,
    pub secure_packets: u64,
    /// Secure packets per slot.
    pub mu_empirical: f64,
    /// Occupancy counts indexed by exact queue bits at slot start.
    pub occupancy: Vec<u64>,
    /// Slot counts per transmission mode, indexed by [`Mode::index`].
    pub mode_counts: [u64; 6],
    /// 95% half-width from batch means.
    pub ci_halfwidth: f64,
}

impl SimResult {
    pub fn mode_frequency(&self, mode: Mode) -> f64 {
        self.mode_counts[mode.index()] as f64 / self.slots as f64
    }

    /// Occupancy histogram normalized to frequencies.
    pub fn occupancy_frequencies(&self) -> Vec<f64> {
        self.occupancy
            .iter()
            .map(|&n| n as f64 / self.slots as f64)
            .collect()
    }

    /// Occupancy folded onto a quantized state grid of the given bin width,
    /// using the same nearest-state mapping as the Markov model.
    pub fn occupancy_binned(&self, bin_width_bits: u64, state_count: usize) -> Vec<f64> {
        let mut binned = vec![0.0; state_count];
        for (bits, &n) in self.occupancy.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let s = ((bits as f64 / bin_width_bits as f64).round() as usize)
                .min(state_count - 1);
            binned[s] += n as f64;
        }
        let total: f64 = binned.iter().sum();
        binned.iter_mut().for_each(|x| *x /= total);
        binned
    }
}

/// Simulate one trajectory: `warmup_slots` unrecorded slots, then `n_slots`
/// measured ones.
pub fn run_trajectory_on_stream(
    p: &SystemParams,
    rsi_mode: RsiMode,
    n_slots: u64,
    warmup_slots: u64,
    seed: u64,
    stream: u64,
) -> SimResult {
    let mut sampler = ChannelSampler::new(p, seed, stream);
    let mut q = KeyQueueState::empty();

    for _ in 0..warmup_slots {
        let s = sampler.sample_slot();
        let tuple = rates::compute_rate_tuple(&s, p, rsi_mode, sampler.rng_mut());
        let d = scheme::decide_slot(q, &tuple, p);
        q = scheme::apply_decision(q, &d, p);
    }

    let mut occupancy = vec![0u64; p.l_max_bits as usize + 1];
    let mut mode_counts = [0u64; 6];
    let mut secure_packets = 0u64;

    let batch_count = CI_BATCHES.min(n_slots.max(1));
    let batch_size = n_slots / batch_count;
    let mut batch_mus: Vec<f64> = Vec::with_capacity(batch_count as usize);
    let mut batch_secure = 0u64;
    let mut batch_fill = 0u64;

    for _ in 0..n_slots {
        occupancy[q.q_bits as usize] += 1;
        let s = sampler.sample_slot();
        let tuple = rates::compute_rate_tuple(&s, p, rsi_mode, sampler.rng_mut());
        let d = scheme::decide_slot(q, &tuple, p);
        q = scheme::apply_decision(q, &d, p);
        mode_counts[d.mode.index()] += 1;
        if d.secure_packet {
            secure_packets += 1;
            batch_secure += 1;
        }
        batch_fill += 1;
        if batch_fill == batch_size && (batch_mus.len() as u64) < batch_count {
            batch_mus.push(batch_secure as f64 / batch_size as f64);
            batch_secure = 0;
            batch_fill = 0;
        }
    }

    let mu = secure_packets as f64 / n_slots as f64;
    let ci = if batch_mus.len() >= 2 {
        let m = batch_mus.iter().sum::<f64>() / batch_mus.len() as f64;
        let var = batch_mus.iter().map(|x| (x - m).powi(2)).sum::<f64>()
            / (batch_mus.len() - 1) as f64;
        1.96 * (var / batch_mus.len() as f64).sqrt()
    } else {
        f64::NAN
    };

    SimResult {
        slots: n_slots,
        secure_packets,
        mu_empirical: mu,
        occupancy,
        mode_counts,
        ci_halfwidth: ci,
    }
}

/// Convenience entry point with the default warm-up and trajectory stream.
pub fn run_trajectory(
    p: &SystemParams,
    rsi_mode: RsiMode,
    n_slots: u64,
    seed: u64,
) -> SimResult {
    run_trajectory_on_stream(
        p,
        rsi_mode,
        n_slots,
        DEFAULT_WARMUP_SLOTS,
        seed,
        streams::TRAJECTORY_BASE,
    )
}

/// Aggregated trials for a single grid point.
#[derive(Debug, Clone)]
pub struct BatchPoint {
    pub mu_mean: f64,
    /// 95% half-width of the mean across trials (falls back to the single
    /// trial's batch-means interval when trials = 1).
    pub ci_halfwidth: f64,
    pub trials: Vec<SimResult>,
}

/// Independent trajectories for every (grid point, trial) pair, parallelized
/// over both axes with derived streams.
pub fn run_batch(
    grid: &[SystemParams],
    rsi_mode: RsiMode,
    trials: u64,
    n_slots: u64,
    warmup_slots: u64,
    master_seed: u64,
) -> Vec<BatchPoint> {
    let jobs: Vec<(usize, u64)> = (0..grid.len())
        .flat_map(|pi| (0..trials).map(move |t| (pi, t)))
        .collect();
    let results: Vec<SimResult> = jobs
        .par_iter()
        .map(|&(pi, t)| {
            let stream = streams::TRAJECTORY_BASE + (pi as u64) * 1024 + t;
            run_trajectory_on_stream(&grid[pi], rsi_mode, n_slots, warmup_slots, master_seed, stream)
        })
        .collect();

    results
        .chunks(trials as usize)
        .map(|trial_results| {
            let mus: Vec<f64> = trial_results.iter().map(|r| r.mu_empirical).collect();
            let mean = mus.iter().sum::<f64>() / mus.len() as f64;
            let ci = if mus.len() >= 2 {
                let var = mus.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
                    / (mus.len() - 1) as f64;
                1.96 * (var / mus.len() as f64).sqrt()
            } else {
                trial_results[0].ci_halfwidth
            };
            BatchPoint {
                mu_mean: mean,
                ci_halfwidth: ci,
                trials: trial_results.to_vec(),
            }
        })
        .collect()
}

/// Export a decision trace as CSV for debugging: one row per slot with the
/// queue evolution. Starts from an empty queue with no warm-up.
pub fn write_trace<W: Write>(
    p: &SystemParams,
    rsi_mode: RsiMode,
    n_slots: u64,
    seed: u64,
    w: &mut W,
) -> io::Result<()> {
    writeln!(w, "slot,mode,q_before,delta,q_after,secure_packet")?;
    let mut sampler = ChannelSampler::new(p, seed, streams::TRAJECTORY_BASE);
    let mut q = KeyQueueState::empty();
    for slot in 0..n_slots {
        let s = sampler.sample_slot();
        let tuple = rates::compute_rate_tuple(&s, p, rsi_mode, sampler.rng_mut());
        let d = scheme::decide_slot(q, &tuple, p);
        let q_after = scheme::apply_decision(q, &d, p);
        writeln!(
            w,
            "{},{},{},{},{},{}",
            slot,
            d.mode.label(),
            q.q_bits,
            d.key_delta_bits,
            q_after.q_bits,
            d.secure_packet
        )?;
        q = q_after;
    }
    Ok(())
}
