//! Oracle checks for the full-duplex rate evaluations: the closed forms
//! against quadrature and Monte Carlo references, and the power selection
//! against dense grid search.

mod common;

use keyrelay::channel::ChannelSampler;
use keyrelay::params::{RsiMode, SystemParams};
use keyrelay::rates::{
    rate_rt_fd_conventional, rate_rt_fd_fast, rate_rt_fd_numeric, rate_rt_fd_slow,
    select_bob_power,
};
use keyrelay::special::scaled_exp_integral;

const LN_2: f64 = std::f64::consts::LN_2;

fn params() -> SystemParams {
    SystemParams::default()
}

#[test]
fn closed_form_identity_matches_quadrature() {
    // The fast-RSI correction rests on E{ln(1 + βZ)} = e^u E1(u) with
    // u = 1/(βθ) for Z exponential with mean θ. Check the identity itself
    // against direct quadrature over a spread of scales, including the
    // system's operating point β = γ σ²_BB, θ = P_B.
    for (beta, theta) in [
        (0.2, 100.0),
        (1.0, 1.0),
        (0.001, 100.0),
        (7.0, 0.25),
        (0.2 * 0.06, 100.0),
    ] {
        let u = 1.0 / (beta * theta);
        let identity = scaled_exp_integral(u).unwrap();
        let oracle = common::mean_log1p_exponential(beta, theta);
        assert!(
            (identity - oracle).abs() / oracle.abs() < 1e-10,
            "identity {identity} vs quadrature {oracle} at beta={beta}, theta={theta}"
        );
    }
}

#[test]
fn fast_closed_form_matches_numeric_average() {
    // Per-sample the closed form must equal the expectation of the numeric
    // block evaluator with unit blocks; average enough draws that the Monte
    // Carlo error sits far below the 1e-2 tolerance.
    let p = params();
    let numeric_params = SystemParams {
        m_block: 1,
        n_symbols: 10_000,
        ..params()
    };
    let mut sampler = ChannelSampler::new(&p, 42, 0);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let s = sampler.sample_slot();
        let closed = rate_rt_fd_fast(&s, &p, p.p_b_max);
        let reps = 20;
        let mean: f64 = (0..reps)
            .map(|_| rate_rt_fd_numeric(&s, &numeric_params, p.p_b_max, sampler.rng_mut()))
            .sum::<f64>()
            / reps as f64;
        worst = worst.max((closed - mean).abs());
    }
    assert!(worst <= 1e-2, "worst |closed - numeric mean| = {worst}");
}

#[test]
fn numeric_single_block_approaches_slow_limit() {
    // One RSI block spanning the whole codeword: the 1/n correction term is
    // all that separates the numeric value from the slow-RSI closed form.
    let n = 100_000;
    let p = SystemParams {
        m_block: n,
        n_symbols: n,
        ..params()
    };
    let mut sampler = ChannelSampler::new(&p, 7, 0);
    for _ in 0..20 {
        let s = sampler.sample_slot();
        let numeric = rate_rt_fd_numeric(&s, &p, p.p_b_max, sampler.rng_mut());
        let closed = rate_rt_fd_slow(&s, &p, p.p_b_max);
        assert!(
            (numeric - closed).abs() <= 2e-3,
            "numeric {numeric} vs slow closed {closed}"
        );
    }
}

#[test]
fn numeric_average_converges_at_root_n_rate() {
    // For unit blocks, (X₁ - X₂)/(2n) is a sample mean; its distance to the
    // closed-form expectation must fall within three empirical standard
    // errors.
    let p = SystemParams {
        enforce_df_cap: false,
        ..params()
    };
    let s = keyrelay::channel::ChannelSample {
        g_ab: 0.9,
        g_ar: 1e9,
        g_rb: 1.4,
    };
    let closed = rate_rt_fd_fast(&s, &p, p.p_b_max);
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for n in [1_000usize, 10_000, 100_000] {
        let pn = SystemParams {
            m_block: 1,
            n_symbols: n,
            ..p.clone()
        };
        // Empirical std of the per-symbol contribution, from the same model.
        let powers = keyrelay::channel::sample_symbol_powers(p.p_b_max, n, &mut rng);
        let g2 = 1.0 / p.kappa;
        let a = p.gamma_ab() * s.g_ab;
        let c = p.gamma_rb() * s.g_rb;
        let r = (1.0 + a) / (1.0 + a + c);
        let per_symbol: Vec<f64> = powers
            .iter()
            .map(|&x| {
                0.5 * (((1.0 + r * g2 * p.var_bb * x).ln() - (1.0 + g2 * p.var_bb * x).ln())
                    / LN_2)
            })
            .collect();
        let mean = per_symbol.iter().sum::<f64>() / n as f64;
        let var = per_symbol.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let numeric = rate_rt_fd_numeric(&s, &pn, p.p_b_max, &mut rng);
        assert!(
            (numeric - closed).abs() <= 3.0 * se + 1e-9,
            "n={n}: |numeric-closed|={} vs 3se={}",
            (numeric - closed).abs(),
            3.0 * se
        );
    }
}

#[test]
fn conventional_benchmark_sits_below_fast_on_average() {
    // Paired comparison over the fading distribution, at the default
    // operating point.
    let p = params();
    let mut sampler = ChannelSampler::new(&p, 12, 0);
    let n = 20_000;
    let mut sum_fast = 0.0;
    let mut sum_conv = 0.0;
    for _ in 0..n {
        let s = sampler.sample_slot();
        let g_bb = sampler.sample_rsi_gain();
        sum_fast += rate_rt_fd_fast(&s, &p, p.p_b_max);
        sum_conv += rate_rt_fd_conventional(&s, &p, p.p_b_max, g_bb);
    }
    assert!(
        sum_fast >= sum_conv,
        "mean fast {} must dominate mean conventional {}",
        sum_fast / n as f64,
        sum_conv / n as f64
    );
}

#[test]
fn slow_rate_dominates_fast_pointwise() {
    let p = params();
    let mut sampler = ChannelSampler::new(&p, 13, 0);
    for _ in 0..10_000 {
        let s = sampler.sample_slot();
        let slow = rate_rt_fd_slow(&s, &p, p.p_b_max);
        let fast = rate_rt_fd_fast(&s, &p, p.p_b_max);
        assert!(fast <= slow + 1e-12, "fast {fast} above slow {slow}");
    }
}

#[test]
fn power_selection_agrees_with_dense_grid() {
    use rand::SeedableRng;
    // Strong interference pushes the feasibility boundary inside (0, p_max).
    let p = SystemParams {
        var_bb: 2.0,
        ..params()
    };
    let r_d = p.r_d();
    let mut sampler = ChannelSampler::new(&p, 31, 0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(32);
    let mut boundary_cases = 0;
    while boundary_cases < 25 {
        let s = sampler.sample_slot();
        if !(rate_rt_fd_fast(&s, &p, 0.0) >= r_d && rate_rt_fd_fast(&s, &p, p.p_b_max) < r_d) {
            continue;
        }
        boundary_cases += 1;
        let sel = select_bob_power(&s, &p, RsiMode::Fast, &mut rng);
        assert!(
            (sel.rate - r_d).abs() <= 1e-5,
            "selected rate {} should pin the target {}",
            sel.rate,
            r_d
        );
        // Dense scan over 10⁴ power points: the largest feasible grid power
        // can exceed the bisection answer by at most one grid step.
        let mut grid_best = 0.0;
        for i in (0..=10_000u32).rev() {
            let pb = i as f64 / 10_000.0 * p.p_b_max;
            if rate_rt_fd_fast(&s, &p, pb) >= r_d {
                grid_best = pb;
                break;
            }
        }
        assert!(
            (sel.p_b - grid_best).abs() <= p.p_b_max / 10_000.0 + 1e-9,
            "bisection {} vs grid {}",
            sel.p_b,
            grid_best
        );
    }
}

#[test]
fn numeric_mode_power_selection_meets_target() {
    use rand::SeedableRng;
    let p = SystemParams {
        var_bb: 2.0,
        n_symbols: 2000,
        ..params()
    };
    let r_d = p.r_d();
    let mut sampler = ChannelSampler::new(&p, 53, 0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(54);
    let mut seen_positive = false;
    for _ in 0..200 {
        let s = sampler.sample_slot();
        let sel = select_bob_power(&s, &p, RsiMode::Numeric, &mut rng);
        if sel.p_b > 0.0 {
            assert!(sel.rate >= r_d - 1e-9, "rate {} below target", sel.rate);
            seen_positive = true;
        }
    }
    assert!(seen_positive);
}
