//! Per-slot achievable and secrecy rates, all in bits/s/Hz.
//!
//! Link rates are Shannon rates log2(1 + SNR·gain) with SNR coefficients
//! γ_ij = P_i/κ. Secrecy rates subtract the stronger of the relay's
//! eavesdropping observations and clamp at zero. Relaying rates are
//! decode-and-forward two-phase rates: half a slot for Alice→relay, half for
//! relay→Bob with maximum-ratio combining of the direct phase-1 signal.
//!
//! When Bob runs full duplex during phase 2 (receiving data while returning a
//! key to Alice), his own transmission leaks back through a random residual
//! self-interference (RSI) channel of variance σ²_BB. Because Bob knows his
//! transmitted key codeword, the penalty is not the conventional
//! "interference as noise" term: conditioning on the known symbols leaves a
//! correction expressed through determinants of block-diagonal covariance
//! matrices, which reduces to per-block log terms
//!
//!   X_q = Σ_blocks log2(1 + γ_q σ²_BB Σ_{t∈block} |x_B(t)|²),  q ∈ {1, 2}
//!
//! with γ₁ = (1 + γ_AB g_AB) / (κ (1 + γ_AB g_AB + γ_RB g_RB)) and γ₂ = 1/κ.
//! The full-duplex end-to-end rate is then
//!
//!   R = ½ log2(1 + γ_AB g_AB + γ_RB g_RB) + (X₁ - X₂)/(2n).
//!
//! Three evaluations of that correction are provided: a Monte Carlo evaluator
//! for any block size ([`rate_rt_fd_numeric`]), the closed form for
//! symbol-wise RSI using the exponential integral ([`rate_rt_fd_fast`]), and
//! the codeword-constant limit where the correction vanishes entirely
//! ([`rate_rt_fd_slow`]). The conventional interference-as-noise rate
//! ([`rate_rt_fd_conventional`]) is kept as a benchmark.

use rand::Rng;

use crate::channel::{self, ChannelSample};
use crate::params::{RsiMode, SystemParams};
use crate::special::scaled_exp_integral;

const LN_2: f64 = std::f64::consts::LN_2;

/// Bisection interval tolerance for the power search, relative to p_b_max.
const POWER_REL_TOL: f64 = 1e-6;

/// Rate-level tolerance at the feasibility boundary.
const RATE_TOL: f64 = 1e-5;

/// Relative slack allowed before the monotonicity guard trips.
const MONOTONE_TOL: f64 = 1e-9;

/// log2(1 + x) without cancellation for small x.
#[inline]
fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

/// Everything the per-slot policy needs, including Bob's selected
/// full-duplex transmit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTuple {
    /// Direct Alice→Bob link rate over a full slot.
    pub r_dt: f64,
    /// Alice→relay link rate.
    pub r_ar: f64,
    /// Alice→Bob secrecy rate against the relay, full slot.
    pub r_sec_ab: f64,
    /// Bob→Alice secrecy rate at Bob's full power, used when a whole slot is
    /// spent exchanging a key.
    pub r_sec_ba_full: f64,
    /// Bob→Alice secrecy rate at the selected full-duplex power, used for the
    /// key bits Bob returns during the relaying phase.
    pub r_sec_ba_fd: f64,
    /// Half-duplex relaying end-to-end rate.
    pub r_rt_hd: f64,
    /// Full-duplex relaying end-to-end rate at the selected power.
    pub r_rt_fd: f64,
    /// Bob's selected transmit power for the full-duplex phase (0 when no
    /// feasible power exists).
    pub p_b_selected: f64,
}

/// Direct-link rate log2(1 + γ_AB g_AB).
pub fn rate_dt(s: &ChannelSample, p: &SystemParams) -> f64 {
    log2_1p(p.gamma_ab() * s.g_ab)
}

/// Alice→relay rate log2(1 + γ_AR g_AR).
pub fn rate_ar(s: &ChannelSample, p: &SystemParams) -> f64 {
    log2_1p(p.gamma_ar() * s.g_ar)
}

/// Alice→Bob secrecy rate [R_dt - R_ar]⁺ over a full slot.
pub fn secrecy_dt(s: &ChannelSample, p: &SystemParams) -> f64 {
    (rate_dt(s, p) - rate_ar(s, p)).max(0.0)
}

/// Bob→Alice secrecy rate at transmit power `p_b`, using reciprocity
/// (g_BA = g_AB and g_BR = g_RB): [log2(1 + p_b g_AB/κ) - log2(1 + p_b g_RB/κ)]⁺.
pub fn secrecy_ba(s: &ChannelSample, p: &SystemParams, p_b: f64) -> f64 {
    debug_assert!((0.0..=p.p_b_max).contains(&p_b));
    let to_alice = log2_1p(p_b / p.kappa * s.g_ab);
    let to_relay = log2_1p(p_b / p.kappa * s.g_rb);
    (to_alice - to_relay).max(0.0)
}

/// Combined-observation rate of both relaying phases,
/// log2(1 + γ_AB g_AB + γ_RB g_RB).
#[inline]
fn mrc_combined_log(s: &ChannelSample, p: &SystemParams) -> f64 {
    log2_1p(p.gamma_ab() * s.g_ab + p.gamma_rb() * s.g_rb)
}

/// Half-duplex relaying rate 0.5·min{R_AR, log2(1 + γ_RB g_RB + γ_AB g_AB)}.
pub fn rate_rt_hd(s: &ChannelSample, p: &SystemParams) -> f64 {
    0.5 * rate_ar(s, p).min(mrc_combined_log(s, p))
}

/// Interference weight ratio r = (1 + γ_AB g_AB)/(1 + γ_AB g_AB + γ_RB g_RB),
/// so that γ₁ = r/κ and γ₂ = 1/κ. Equals exactly 1.0 when the relay path
/// carries nothing, which makes the two correction terms cancel bitwise.
#[inline]
fn interference_weight_ratio(s: &ChannelSample, p: &SystemParams) -> f64 {
    let a = p.gamma_ab() * s.g_ab;
    let c = p.gamma_rb() * s.g_rb;
    (1.0 + a) / (1.0 + a + c)
}

#[inline]
fn finish_rt_fd(raw: f64, s: &ChannelSample, p: &SystemParams) -> f64 {
    let capped = if p.enforce_df_cap {
        raw.min(0.5 * rate_ar(s, p))
    } else {
        raw
    };
    capped.max(0.0)
}

/// Full-duplex end-to-end rate, fast (symbol-wise) RSI closed form.
///
/// The per-symbol powers are exponential with mean p_b, so each expectation
/// E{log2(1 + γ_q σ²_BB |x|²)} evaluates to e^u·E1(u)/ln 2 with
/// u = 1/(γ_q σ²_BB p_b), giving
///
///   R = ½ log2(1 + γ_AB g_AB + γ_RB g_RB)
///       + [e^{u₁}E1(u₁) - e^{u₂}E1(u₂)] / (2 ln 2).
///
/// Capped by half the Alice→relay rate and clamped at zero.
pub fn rate_rt_fd_fast(s: &ChannelSample, p: &SystemParams, p_b: f64) -> f64 {
    let base = 0.5 * mrc_combined_log(s, p);
    let corr = fast_rsi_correction(s, p, p_b);
    finish_rt_fd(base + corr, s, p)
}

#[inline]
fn fast_rsi_correction(s: &ChannelSample, p: &SystemParams, p_b: f64) -> f64 {
    if p_b <= 0.0 || p.var_bb <= 0.0 {
        // No transmission or perfect cancellation: the correction vanishes.
        return 0.0;
    }
    let r = interference_weight_ratio(s, p);
    let u2 = p.kappa / (p.var_bb * p_b);
    let u1 = u2 / r;
    let s1 = scaled_exp_integral(u1).expect("u1 > 0 by construction");
    let s2 = scaled_exp_integral(u2).expect("u2 > 0 by construction");
    (s1 - s2) / (2.0 * LN_2)
}

/// Full-duplex end-to-end rate in the slow-RSI limit, where the correction
/// terms vanish and the rate is interference free:
/// ½ log2(1 + γ_AB g_AB + γ_RB g_RB), capped by half the Alice→relay rate.
/// Independent of both p_b and σ²_BB.
pub fn rate_rt_fd_slow(s: &ChannelSample, p: &SystemParams, _p_b: f64) -> f64 {
    finish_rt_fd(0.5 * mrc_combined_log(s, p), s, p)
}

/// Full-duplex end-to-end rate evaluated numerically for the configured RSI
/// block size: draws `n_symbols` per-symbol powers and applies the
/// block-determinant reduction directly.
pub fn rate_rt_fd_numeric<R: Rng + ?Sized>(
    s: &ChannelSample,
    p: &SystemParams,
    p_b: f64,
    rng: &mut R,
) -> f64 {
    let powers = channel::sample_symbol_powers(p_b, p.n_symbols, rng);
    rate_rt_fd_numeric_given_powers(s, p, &powers)
}

/// Same as [`rate_rt_fd_numeric`] but on caller-supplied symbol powers, so a
/// power search can rescale one frozen draw vector.
pub fn rate_rt_fd_numeric_given_powers(
    s: &ChannelSample,
    p: &SystemParams,
    powers: &[f64],
) -> f64 {
    let base = 0.5 * mrc_combined_log(s, p);
    let corr = numeric_rsi_correction_from_block_sums(
        s,
        p,
        powers.chunks(p.m_block).map(|c| c.iter().sum::<f64>()),
        powers.len(),
    );
    finish_rt_fd(base + corr, s, p)
}

#[inline]
fn numeric_rsi_correction_from_block_sums<I: Iterator<Item = f64>>(
    s: &ChannelSample,
    p: &SystemParams,
    block_sums: I,
    n: usize,
) -> f64 {
    if p.var_bb <= 0.0 {
        return 0.0;
    }
    let g2 = 1.0 / p.kappa;
    let g1 = interference_weight_ratio(s, p) * g2;
    let mut x1 = 0.0;
    let mut x2 = 0.0;
    for sum in block_sums {
        x1 += log2_1p(g1 * p.var_bb * sum);
        x2 += log2_1p(g2 * p.var_bb * sum);
    }
    (x1 - x2) / (2.0 * n as f64)
}

/// Conventional full-duplex benchmark that treats the self-interference as
/// noise with a known realized gain `g_bb`:
/// 0.5·min{R_AR, log2(1 + γ_RB g_RB/(1 + g_BB γ_BB) + γ_AB g_AB)}.
pub fn rate_rt_fd_conventional(
    s: &ChannelSample,
    p: &SystemParams,
    p_b: f64,
    g_bb: f64,
) -> f64 {
    debug_assert!(g_bb >= 0.0);
    let gamma_bb = p_b / p.kappa;
    let relay_term = p.gamma_rb() * s.g_rb / (1.0 + g_bb * gamma_bb);
    0.5 * rate_ar(s, p).min(log2_1p(relay_term + p.gamma_ab() * s.g_ab))
}

/// Outcome of Bob's transmit-power selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSelection {
    pub p_b: f64,
    /// Full-duplex rate at `p_b`; when `p_b` is 0 because no power meets the
    /// target, this is the rate at zero power and the caller falls back to
    /// half duplex.
    pub rate: f64,
}

/// Pick the largest p_b ∈ [0, p_b_max] with full-duplex rate ≥ R_d.
///
/// The rate is non-increasing in p_b (γ₁ < γ₂ whenever the relay path is
/// active), so a bisection between the last feasible and first infeasible
/// point converges; a 32-interval grid scan checks that monotonicity on every
/// sample first and falls back to exhaustive grid refinement if it ever
/// fails. Returns (0, rate at 0) when even silence misses the target — the
/// half-duplex fallback — and p_b_max when full power already meets it.
pub fn select_bob_power<R: Rng + ?Sized>(
    s: &ChannelSample,
    p: &SystemParams,
    rsi_mode: RsiMode,
    rng: &mut R,
) -> PowerSelection {
    let r_d = p.r_d();
    match rsi_mode {
        RsiMode::Slow => {
            // Rate does not depend on p_b at all.
            let rate = rate_rt_fd_slow(s, p, p.p_b_max);
            if rate >= r_d {
                PowerSelection { p_b: p.p_b_max, rate }
            } else {
                PowerSelection { p_b: 0.0, rate }
            }
        }
        RsiMode::Fast => select_monotone(|pb| rate_rt_fd_fast(s, p, pb), p, r_d),
        RsiMode::Numeric => {
            // Freeze one unit-exponential draw vector; scaling it by p_b
            // keeps the objective a smooth non-increasing function of p_b.
            let units = channel::sample_unit_exponentials(p.n_symbols, rng);
            let unit_block_sums: Vec<f64> = units
                .chunks(p.m_block)
                .map(|c| c.iter().sum::<f64>())
                .collect();
            let n = units.len();
            let f = |pb: f64| {
                let base = 0.5 * mrc_combined_log(s, p);
                let corr = numeric_rsi_correction_from_block_sums(
                    s,
                    p,
                    unit_block_sums.iter().map(|&u| pb * u),
                    n,
                );
                finish_rt_fd(base + corr, s, p)
            };
            select_monotone(f, p, r_d)
        }
    }
}

fn select_monotone<F: Fn(f64) -> f64>(f: F, p: &SystemParams, r_d: f64) -> PowerSelection {
    let p_max = p.p_b_max;
    let rate_zero = f(0.0);
    if rate_zero < r_d {
        return PowerSelection { p_b: 0.0, rate: rate_zero };
    }
    let rate_max = f(p_max);
    if rate_max >= r_d {
        return PowerSelection { p_b: p_max, rate: rate_max };
    }

    // Feasibility boundary lies strictly inside (0, p_max). Scan a 32-interval
    // grid: it both verifies monotonicity and brackets the crossing.
    const GRID: usize = 32;
    let mut values = [0.0f64; GRID + 1];
    values[0] = rate_zero;
    values[GRID] = rate_max;
    for (i, v) in values.iter_mut().enumerate().take(GRID).skip(1) {
        *v = f(i as f64 / GRID as f64 * p_max);
    }
    let tol = MONOTONE_TOL * rate_zero.abs().max(1.0);
    let monotone = values.windows(2).all(|w| w[1] <= w[0] + tol);
    if !monotone {
        return grid_refine(&f, p_max, r_d, rate_zero);
    }

    // Largest grid point still feasible brackets the boundary.
    let idx = (0..GRID).rev().find(|&i| values[i] >= r_d).unwrap_or(0);
    let mut lo = idx as f64 / GRID as f64 * p_max;
    let mut hi = (idx + 1) as f64 / GRID as f64 * p_max;
    let mut rate_lo = values[idx];
    for _ in 0..120 {
        if hi - lo <= POWER_REL_TOL * p_max && rate_lo - r_d <= RATE_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let rate_mid = f(mid);
        if rate_mid >= r_d {
            lo = mid;
            rate_lo = rate_mid;
        } else {
            hi = mid;
        }
    }
    PowerSelection { p_b: lo, rate: rate_lo }
}

/// Exhaustive two-level grid search used only if the monotonicity check
/// fails: 10⁴ coarse points, then 100 fine points inside the winning
/// interval. Correct for arbitrary rate shapes, just slower.
fn grid_refine<F: Fn(f64) -> f64>(f: &F, p_max: f64, r_d: f64, rate_zero: f64) -> PowerSelection {
    const COARSE: usize = 10_000;
    const FINE: usize = 100;
    let mut best = PowerSelection { p_b: 0.0, rate: rate_zero };
    for i in (0..=COARSE).rev() {
        let pb = i as f64 / COARSE as f64 * p_max;
        let rate = f(pb);
        if rate >= r_d {
            best = PowerSelection { p_b: pb, rate };
            let hi = ((i + 1) as f64 / COARSE as f64 * p_max).min(p_max);
            for j in (0..=FINE).rev() {
                let pb_fine = pb + (hi - pb) * j as f64 / FINE as f64;
                let rate_fine = f(pb_fine);
                if rate_fine >= r_d {
                    return PowerSelection { p_b: pb_fine, rate: rate_fine };
                }
            }
            return best;
        }
    }
    best
}

/// Compute the full per-slot rate tuple, including Bob's power selection.
pub fn compute_rate_tuple<R: Rng + ?Sized>(
    s: &ChannelSample,
    p: &SystemParams,
    rsi_mode: RsiMode,
    rng: &mut R,
) -> RateTuple {
    let r_dt = rate_dt(s, p);
    let r_ar = rate_ar(s, p);
    let r_sec_ab = (r_dt - r_ar).max(0.0);
    let r_rt_hd = 0.5 * r_ar.min(mrc_combined_log(s, p));
    let sel = select_bob_power(s, p, rsi_mode, rng);
    let r_sec_ba_full = secrecy_ba(s, p, p.p_b_max);
    let r_sec_ba_fd = if sel.p_b == p.p_b_max {
        r_sec_ba_full
    } else {
        secrecy_ba(s, p, sel.p_b)
    };
    RateTuple {
        r_dt,
        r_ar,
        r_sec_ab,
        r_sec_ba_full,
        r_sec_ba_fd,
        r_rt_hd,
        r_rt_fd: sel.rate,
        p_b_selected: sel.p_b,
    }
}
