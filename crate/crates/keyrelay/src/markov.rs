//! Finite Markov chain for the secret-key buffer.
//!
//! The buffer level only influences the per-slot policy through its regime —
//! below one packet, at least one packet but not full, or full — so the
//! per-slot bit increment is identically distributed within a regime. The
//! chain is built from three regime-conditioned increment distributions
//! estimated by Monte Carlo (the rate vector has no closed form), quantized
//! to a configurable bin width, with boundary clamping reproducing the
//! bit-discard semantics. The stationary distribution comes from power
//! iteration, and the analytic secure throughput combines Pr{Q ≥ b} with the
//! per-slot delivery-event probabilities:
//!
//!   μ_sec = Pr{secure direct}
//!           + Pr{Q ≥ b}·(Pr{keyed relay} + Pr{keyed direct}).

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::channel::ChannelSampler;
use crate::params::{RsiMode, SystemParams};
use crate::rates;
use crate::scheme::{self, KeyQueueState};

/// Buffer regime; fully determines which actions the policy may take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    BelowB,
    Mid,
    Full,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::BelowB, Regime::Mid, Regime::Full];

    pub fn classify(q_bits: u64, p: &SystemParams) -> Regime {
        if q_bits < p.b_bits {
            Regime::BelowB
        } else if q_bits >= p.l_max_bits {
            Regime::Full
        } else {
            Regime::Mid
        }
    }

    pub fn index(self) -> usize {
        match self {
            Regime::BelowB => 0,
            Regime::Mid => 1,
            Regime::Full => 2,
        }
    }

    /// Queue level used when sampling this regime's increment distribution.
    fn representative_q(self, p: &SystemParams) -> u64 {
        match self {
            Regime::BelowB => 0,
            Regime::Mid => p.b_bits,
            Regime::Full => p.l_max_bits,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::BelowB => "below_b",
            Regime::Mid => "mid",
            Regime::Full => "full",
        }
    }
}

/// Distribution of the signed per-slot bit increment within one regime.
#[derive(Debug, Clone)]
pub struct IncrementDistribution {
    pub regime: Regime,
    /// Signed bit increment → probability; sums to 1.
    pub pmf: BTreeMap<i64, f64>,
}

/// Monte Carlo estimates of the per-slot delivery events entering the
/// analytic throughput.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateEventProbs {
    /// Pr{R_sec ≥ R_d}: delivery without touching the buffer.
    pub p_secure_direct: f64,
    /// Pr{R_sec < R_d, best relaying rate ≥ R_d}.
    pub p_keyed_relay: f64,
    /// Pr{R_sec < R_d, relaying closed, R_dt ≥ R_d}.
    pub p_keyed_direct: f64,
}

/// Increment distributions and event probabilities estimated from one shared
/// stream of channel realizations.
#[derive(Debug, Clone)]
pub struct SlotStatistics {
    pub increments: [IncrementDistribution; 3],
    pub event_probs: RateEventProbs,
    pub n_samples: usize,
}

impl SlotStatistics {
    /// Estimate by sampling `n_samples` slots; each realization is evaluated
    /// under a representative queue level of every regime, so the three
    /// distributions are paired. Work is split over fixed-size chunks with
    /// derived streams, making the result independent of thread count.
    pub fn estimate(
        p: &SystemParams,
        rsi_mode: RsiMode,
        n_samples: usize,
        master_seed: u64,
        stream_base: u64,
    ) -> Self {
        use rayon::prelude::*;

        const CHUNKS: usize = 64;
        let base = n_samples / CHUNKS;
        let extra = n_samples % CHUNKS;

        struct ChunkStats {
            hists: [BTreeMap<i64, u64>; 3],
            events: [u64; 3],
        }

        let chunks: Vec<ChunkStats> = (0..CHUNKS)
            .into_par_iter()
            .map(|c| {
                let count = base + usize::from(c < extra);
                let mut sampler = ChannelSampler::new(p, master_seed, stream_base + c as u64);
                let mut hists: [BTreeMap<i64, u64>; 3] = Default::default();
                let mut events = [0u64; 3];
                let r_d = p.r_d();
                for _ in 0..count {
                    let s = sampler.sample_slot();
                    let tuple = rates::compute_rate_tuple(&s, p, rsi_mode, sampler.rng_mut());
                    for regime in Regime::ALL {
                        let q = regime.representative_q(p);
                        let d = scheme::decide_slot(KeyQueueState::new(q), &tuple, p);
                        // Effective increment after the capacity clamp at the
                        // regime's lowest state. Clamping here is lossless for
                        // every other state of the regime: any delta trimmed
                        // this way saturates the buffer from all of them too.
                        let eff = (q as i64 + d.key_delta_bits).clamp(0, p.l_max_bits as i64)
                            - q as i64;
                        *hists[regime.index()].entry(eff).or_insert(0) += 1;
                    }
                    if tuple.r_sec_ab >= r_d {
                        events[0] += 1;
                    } else if tuple.r_rt_fd.max(tuple.r_rt_hd) >= r_d {
                        events[1] += 1;
                    } else if tuple.r_dt >= r_d {
                        events[2] += 1;
                    }
                }
                ChunkStats { hists, events }
            })
            .collect();

        let mut merged: [BTreeMap<i64, u64>; 3] = Default::default();
        let mut events = [0u64; 3];
        for c in &chunks {
            for r in 0..3 {
                for (&delta, &n) in &c.hists[r] {
                    *merged[r].entry(delta).or_insert(0) += n;
                }
                events[r] += c.events[r];
            }
        }

        let total = n_samples as f64;
        let increments = Regime::ALL.map(|regime| IncrementDistribution {
            regime,
            pmf: merged[regime.index()]
                .iter()
                .map(|(&delta, &n)| (delta, n as f64 / total))
                .collect(),
        });
        SlotStatistics {
            increments,
            event_probs: RateEventProbs {
                p_secure_direct: events[0] as f64 / total,
                p_keyed_relay: events[1] as f64 / total,
                p_keyed_direct: events[2] as f64 / total,
            },
            n_samples,
        }
    }
}

/// Regime-conditioned increment distributions only.
pub fn estimate_increments(
    p: &SystemParams,
    rsi_mode: RsiMode,
    n_samples: usize,
    master_seed: u64,
    stream_base: u64,
) -> [IncrementDistribution; 3] {
    SlotStatistics::estimate(p, rsi_mode, n_samples, master_seed, stream_base).increments
}

/// Delivery-event probabilities only.
pub fn estimate_rate_event_probs(
    p: &SystemParams,
    rsi_mode: RsiMode,
    n_samples: usize,
    master_seed: u64,
    stream_base: u64,
) -> RateEventProbs {
    SlotStatistics::estimate(p, rsi_mode, n_samples, master_seed, stream_base).event_probs
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("bin width {bin_width} must be positive and divide l_max_bits {l_max_bits}")]
    BadBinWidth { bin_width: u64, l_max_bits: u64 },
    #[error("increment distribution for regime `{0}` is empty")]
    EmptyPmf(&'static str),
    #[error("increment distribution for regime `{regime}` has mass {mass}, expected 1")]
    BadPmfMass { regime: &'static str, mass: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("chain is reducible; {} state(s) not strongly connected to state 0 (first few: {:?})",
            unreachable.len(), &unreachable[..unreachable.len().min(8)])]
    Reducible { unreachable: Vec<usize> },
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("steady state depends on the initial distribution (total variation {tv:.3e})")]
    StartDependent { tv: f64 },
}

/// Row-stochastic transition structure over quantized buffer levels
/// 0, Δ, 2Δ, …, L_max.
#[derive(Debug, Clone)]
pub struct MarkovModel {
    pub bin_width_bits: u64,
    pub state_count: usize,
    pub b_bits: u64,
    pub l_max_bits: u64,
    rows: Vec<Vec<(usize, f64)>>,
}

impl MarkovModel {
    /// Direct constructor from explicit sparse rows; rows must be stochastic.
    /// Mainly useful for tests and synthetic chains.
    pub fn from_rows(
        rows: Vec<Vec<(usize, f64)>>,
        bin_width_bits: u64,
        b_bits: u64,
    ) -> MarkovModel {
        let state_count = rows.len();
        for (i, row) in rows.iter().enumerate() {
            let mass: f64 = row.iter().map(|&(_, p)| p).sum();
            assert!(
                (mass - 1.0).abs() <= 1e-9,
                "row {i} has mass {mass}, expected 1"
            );
        }
        MarkovModel {
            bin_width_bits,
            state_count,
            b_bits,
            l_max_bits: (state_count as u64 - 1) * bin_width_bits,
            rows,
        }
    }

    pub fn state_bits(&self, state: usize) -> u64 {
        state as u64 * self.bin_width_bits
    }

    pub fn row(&self, state: usize) -> &[(usize, f64)] {
        &self.rows[state]
    }

    /// Map a raw bit level onto its nearest quantized state.
    pub fn state_of_bits(&self, q_bits: u64) -> usize {
        let s = (q_bits as f64 / self.bin_width_bits as f64).round() as usize;
        s.min(self.state_count - 1)
    }

    /// Pr{Q ≥ b} under a distribution over states.
    pub fn pr_q_ge_b(&self, pi: &[f64]) -> f64 {
        (0..self.state_count)
            .filter(|&i| self.state_bits(i) >= self.b_bits)
            .map(|i| pi[i])
            .sum()
    }

    /// Export `(state_bits, probability)` rows.
    pub fn write_stationary_csv<W: Write>(&self, pi: &[f64], w: &mut W) -> io::Result<()> {
        writeln!(w, "state_bits,probability")?;
        for (i, prob) in pi.iter().enumerate() {
            writeln!(w, "{},{:.12e}", self.state_bits(i), prob)?;
        }
        Ok(())
    }
}

/// Assemble the chain: each row uses its regime's increment distribution,
/// destinations are clamped into [0, L_max] (mass past a boundary accumulates
/// at the boundary state, matching bit discard) and rounded to the nearest
/// quantized state.
pub fn build_chain(
    incs: &[IncrementDistribution; 3],
    p: &SystemParams,
    bin_width_bits: u64,
) -> Result<MarkovModel, ChainError> {
    if bin_width_bits == 0 || !p.l_max_bits.is_multiple_of(bin_width_bits) {
        return Err(ChainError::BadBinWidth {
            bin_width: bin_width_bits,
            l_max_bits: p.l_max_bits,
        });
    }
    for inc in incs {
        if inc.pmf.is_empty() {
            return Err(ChainError::EmptyPmf(inc.regime.label()));
        }
        let mass: f64 = inc.pmf.values().sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(ChainError::BadPmfMass {
                regime: inc.regime.label(),
                mass,
            });
        }
    }

    let state_count = (p.l_max_bits / bin_width_bits) as usize + 1;
    let l_max = p.l_max_bits as i64;
    let mut rows = Vec::with_capacity(state_count);
    for state in 0..state_count {
        let bits = state as u64 * bin_width_bits;
        let regime = Regime::classify(bits, p);
        let pmf = &incs[regime.index()].pmf;
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        for (&delta, &prob) in pmf {
            let dest_bits = (bits as i64 + delta).clamp(0, l_max);
            let dest = ((dest_bits as f64 / bin_width_bits as f64).round() as usize)
                .min(state_count - 1);
            *row.entry(dest).or_insert(0.0) += prob;
        }
        rows.push(row.into_iter().collect());
    }
    Ok(MarkovModel {
        bin_width_bits,
        state_count,
        b_bits: p.b_bits,
        l_max_bits: p.l_max_bits,
        rows,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// L1 residual at which iteration stops.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 1_000_000,
        }
    }
}

/// Stationary distribution by power iteration.
///
/// Requires the chain to be strongly connected from/to state 0; the result is
/// verified to be independent of the starting distribution by solving from
/// both a uniform and a point-mass start (agreement ≤ 1e-8 total variation).
pub fn steady_state(model: &MarkovModel, opts: &SolveOptions) -> Result<Vec<f64>, SolveError> {
    check_strongly_connected(model)?;

    let n = model.state_count;
    let uniform = vec![1.0 / n as f64; n];
    let mut point = vec![0.0; n];
    point[0] = 1.0;

    let from_uniform = power_iterate(model, uniform, opts)?;
    let from_point = power_iterate(model, point, opts)?;
    let tv = total_variation(&from_uniform, &from_point);
    if tv > 1e-8 {
        return Err(SolveError::StartDependent { tv });
    }
    Ok(from_uniform)
}

fn check_strongly_connected(model: &MarkovModel) -> Result<(), SolveError> {
    let n = model.state_count;
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &(j, p) in model.row(i) {
            if p > 0.0 {
                reverse[j].push(i);
            }
        }
    }
    let forward = bfs(n, 0, |i| {
        model.row(i).iter().filter(|&&(_, p)| p > 0.0).map(|&(j, _)| j)
    });
    let backward = bfs(n, 0, |i| reverse[i].iter().copied());
    let unreachable: Vec<usize> = (0..n).filter(|&i| !forward[i] || !backward[i]).collect();
    if unreachable.is_empty() {
        Ok(())
    } else {
        Err(SolveError::Reducible { unreachable })
    }
}

fn bfs<I, F>(n: usize, start: usize, neighbors: F) -> Vec<bool>
where
    I: Iterator<Item = usize>,
    F: Fn(usize) -> I,
{
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        for j in neighbors(i) {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

fn power_iterate(
    model: &MarkovModel,
    mut pi: Vec<f64>,
    opts: &SolveOptions,
) -> Result<Vec<f64>, SolveError> {
    let n = model.state_count;
    let mut next = vec![0.0f64; n];
    let mut residual = f64::INFINITY;
    let mut last_check = f64::NAN;
    let mut stagnant = 0u32;
    for iter in 0..opts.max_iters {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, &mass) in pi.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for &(j, p) in model.row(i).iter() {
                next[j] += mass * p;
            }
        }
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= sum);
        residual = pi.iter().zip(next.iter()).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if residual <= opts.tol {
            return Ok(pi);
        }
        // A bit-identical residual across checkpoints means the iteration is
        // cycling (periodic chain), not slowly mixing.
        if iter % 512 == 511 {
            if residual == last_check {
                stagnant += 1;
                if stagnant >= 3 {
                    return Err(SolveError::NonConvergence {
                        residual,
                        iterations: iter + 1,
                    });
                }
            } else {
                stagnant = 0;
            }
            last_check = residual;
        }
    }
    Err(SolveError::NonConvergence {
        residual,
        iterations: opts.max_iters,
    })
}

/// ‖π·T - π‖₁ for an arbitrary distribution; the convergence certificate.
pub fn stationary_residual(model: &MarkovModel, pi: &[f64]) -> f64 {
    let mut next = vec![0.0f64; model.state_count];
    for (i, &mass) in pi.iter().enumerate() {
        for &(j, p) in model.row(i).iter() {
            next[j] += mass * p;
        }
    }
    pi.iter().zip(next.iter()).map(|(a, b)| (a - b).abs()).sum()
}

/// Total variation distance ½‖a - b‖₁.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Analytic secure throughput and its components.
#[derive(Debug, Clone, Serialize)]
pub struct ThroughputReport {
    pub mu_sec_analytic: f64,
    /// Filled in by callers that also ran the trajectory simulator.
    pub mu_sec_montecarlo: Option<f64>,
    pub mc_ci_halfwidth: Option<f64>,
    pub pr_q_ge_b: f64,
    pub p_secure_direct: f64,
    pub p_keyed_relay: f64,
    pub p_keyed_direct: f64,
}

impl ThroughputReport {
    pub fn write_json<W: Write>(&self, w: &mut W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut *w, self).map_err(io::Error::other)?;
        writeln!(w)
    }
}

/// μ_sec = P₁ + Pr{Q ≥ b}·(P₂ + P₃) over the stationary distribution.
pub fn secure_throughput_analytic(
    model: &MarkovModel,
    pi: &[f64],
    probs: &RateEventProbs,
) -> ThroughputReport {
    let pr_q_ge_b = model.pr_q_ge_b(pi);
    let mu = probs.p_secure_direct + pr_q_ge_b * (probs.p_keyed_relay + probs.p_keyed_direct);
    ThroughputReport {
        mu_sec_analytic: mu,
        mu_sec_montecarlo: None,
        mc_ci_halfwidth: None,
        pr_q_ge_b,
        p_secure_direct: probs.p_secure_direct,
        p_keyed_relay: probs.p_keyed_relay,
        p_keyed_direct: probs.p_keyed_direct,
    }
}
