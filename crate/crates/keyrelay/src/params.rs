//! Physical and protocol constants.
//!
//! Everything is stored in linear units: powers in milliwatts (converted from
//! dBm once at configuration load), channel variances dimensionless, slot
//! size as the symbol count W·T. All rate math downstream works on these
//! linear quantities only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// dBm → linear milliwatts.
pub fn dbm_to_linear(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Residual self-interference fading model for Bob's full-duplex phase.
///
/// `Fast` means the RSI channel redraws every symbol (block size 1) and uses
/// the exponential-integral closed form. `Slow` freezes it for a whole
/// codeword, where knowing the transmitted key removes the interference
/// entirely. `Numeric` evaluates the block-determinant expression by Monte
/// Carlo for the configured block size and is intended for audit runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RsiMode {
    Fast,
    Slow,
    Numeric,
}

/// System-wide constants shared by every module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Alice's transmit power (linear mW).
    pub p_a: f64,
    /// Bob's maximum transmit power (linear mW); the per-slot power selection
    /// picks a value in [0, p_b_max].
    pub p_b_max: f64,
    /// Relay transmit power (linear mW).
    pub p_r: f64,
    /// Noise power, identical at every node (linear mW).
    pub kappa: f64,
    /// Alice–Bob channel variance.
    pub var_ab: f64,
    /// Alice–relay channel variance.
    pub var_ar: f64,
    /// Relay–Bob channel variance.
    pub var_rb: f64,
    /// Residual self-interference channel variance at Bob (0 = perfect
    /// cancellation).
    pub var_bb: f64,
    /// Symbols per slot, W·T.
    pub wt: f64,
    /// Data packet size in bits; one packet is delivered per successful slot.
    pub b_bits: u64,
    /// Secret-key buffer capacity in bits.
    pub l_max_bits: u64,
    /// RSI block-fading size: 1 is fast RSI, n_symbols is slow RSI.
    pub m_block: usize,
    /// Codeword length used by the numeric block-determinant evaluator.
    pub n_symbols: usize,
    /// Cap the full-duplex end-to-end rate by half the Alice–relay rate, as
    /// decode-and-forward requires. Disable for the literal uncapped
    /// combined-rate expression.
    pub enforce_df_cap: bool,
}

impl Default for SystemParams {
    /// Baseline parameter set: P_A = 10 dBm, P_B = P_R = 20 dBm, κ = 0 dBm,
    /// unit link variances, σ²_BB = 0.2, WT = 1000, b = 2000 bits, buffer of
    /// 7 packets.
    fn default() -> Self {
        Self {
            p_a: dbm_to_linear(10.0),
            p_b_max: dbm_to_linear(20.0),
            p_r: dbm_to_linear(20.0),
            kappa: dbm_to_linear(0.0),
            var_ab: 1.0,
            var_ar: 1.0,
            var_rb: 1.0,
            var_bb: 0.2,
            wt: 1000.0,
            b_bits: 2000,
            l_max_bits: 14_000,
            m_block: 1,
            n_symbols: 10_000,
            enforce_df_cap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("field `{0}` must be strictly positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error("field `{0}` must be finite and non-negative, got {1}")]
    Negative(&'static str, f64),
    #[error("l_max_bits ({l_max_bits}) must be at least b_bits ({b_bits}), the size of one key packet")]
    BufferTooSmall { l_max_bits: u64, b_bits: u64 },
    #[error("m_block ({m_block}) must lie in 1..=n_symbols ({n_symbols})")]
    BadBlockSize { m_block: usize, n_symbols: usize },
}

impl SystemParams {
    /// Target spectral efficiency R_d = b/(W·T) in bits/s/Hz, recomputed from
    /// the packet size so the two can never drift apart.
    pub fn r_d(&self) -> f64 {
        self.b_bits as f64 / self.wt
    }

    /// Alice→Bob SNR coefficient P_A/κ.
    pub fn gamma_ab(&self) -> f64 {
        self.p_a / self.kappa
    }

    /// Alice→relay SNR coefficient P_A/κ.
    pub fn gamma_ar(&self) -> f64 {
        self.p_a / self.kappa
    }

    /// Relay→Bob SNR coefficient P_R/κ.
    pub fn gamma_rb(&self) -> f64 {
        self.p_r / self.kappa
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        let positive = [
            ("p_a", self.p_a),
            ("p_b_max", self.p_b_max),
            ("p_r", self.p_r),
            ("kappa", self.kappa),
            ("var_ab", self.var_ab),
            ("var_ar", self.var_ar),
            ("var_rb", self.var_rb),
            ("wt", self.wt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ParamsError::NonPositive(name, v));
            }
        }
        if !(self.var_bb >= 0.0 && self.var_bb.is_finite()) {
            return Err(ParamsError::Negative("var_bb", self.var_bb));
        }
        if self.b_bits == 0 {
            return Err(ParamsError::NonPositive("b_bits", 0.0));
        }
        if self.l_max_bits < self.b_bits {
            return Err(ParamsError::BufferTooSmall {
                l_max_bits: self.l_max_bits,
                b_bits: self.b_bits,
            });
        }
        if self.m_block == 0 || self.m_block > self.n_symbols {
            return Err(ParamsError::BadBlockSize {
                m_block: self.m_block,
                n_symbols: self.n_symbols,
            });
        }
        Ok(())
    }
}
