//! JSON experiment configuration.
//!
//! Human-facing units (powers in dBm, buffer size in packets) live only here;
//! conversion to the linear-scale [`SystemParams`] happens once at load. An
//! empty file or empty JSON object yields the full default parameter set.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::params::{dbm_to_linear, RsiMode, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fig1Rates,
    Fig2Throughput,
    ValidateClosedForms,
    ValidateChain,
}

impl Experiment {
    pub const NAMES: [&'static str; 4] = [
        "fig1_rates",
        "fig2_throughput",
        "validate_closed_forms",
        "validate_chain",
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig1Rates => "fig1_rates",
            Experiment::Fig2Throughput => "fig2_throughput",
            Experiment::ValidateClosedForms => "validate_closed_forms",
            Experiment::ValidateChain => "validate_chain",
        }
    }

    pub fn parse(name: &str) -> Result<Experiment, ConfigError> {
        match name {
            "fig1_rates" => Ok(Experiment::Fig1Rates),
            "fig2_throughput" => Ok(Experiment::Fig2Throughput),
            "validate_closed_forms" => Ok(Experiment::ValidateClosedForms),
            "validate_chain" => Ok(Experiment::ValidateChain),
            other => Err(ConfigError::UnknownExperiment {
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    LMaxPackets,
    VarBb,
    PRDbm,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::LMaxPackets => "l_max_packets",
            SweepAxis::VarBb => "var_bb",
            SweepAxis::PRDbm => "p_r_dbm",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawSweep {
    axis: SweepAxis,
    values: Vec<f64>,
}

/// On-disk shape; every field optional so partial configs inherit defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    p_a_dbm: Option<f64>,
    p_b_dbm: Option<f64>,
    p_r_dbm: Option<f64>,
    kappa_dbm: Option<f64>,
    var_ab: Option<f64>,
    var_ar: Option<f64>,
    var_rb: Option<f64>,
    var_bb: Option<f64>,
    wt: Option<f64>,
    b_bits: Option<u64>,
    l_max_packets: Option<u64>,
    l_max_bits: Option<u64>,
    rsi_mode: Option<RsiMode>,
    m_block: Option<usize>,
    n_symbols: Option<usize>,
    enforce_df_cap: Option<bool>,
    experiment: Option<Experiment>,
    sweep: Option<RawSweep>,
    r_d_values: Option<Vec<f64>>,
    trials: Option<u64>,
    n_slots: Option<u64>,
    warmup_slots: Option<u64>,
    n_samples: Option<usize>,
    fig1_numeric_symbols: Option<usize>,
    bin_width_bits: Option<u64>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
}

/// Fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    pub rsi_mode: RsiMode,
    pub experiment: Experiment,
    pub sweep: Sweep,
    /// Target spectral efficiencies for the throughput experiment; the packet
    /// size is re-derived per value as b = R_d·WT.
    pub r_d_values: Vec<f64>,
    pub trials: u64,
    pub n_slots: u64,
    pub warmup_slots: u64,
    /// Samples for rate averaging and increment estimation.
    pub n_samples: usize,
    /// Symbols per numeric rate evaluation in the rate-comparison sweep.
    pub fig1_numeric_symbols: usize,
    pub bin_width_bits: u64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error(
        "buffer too small: l_max is {l_max_bits} bits but the scheme needs at least two \
         packets ({min_bits} bits) — below b bits it can never one-time-pad a packet"
    )]
    BufferTooSmall { l_max_bits: u64, min_bits: u64 },
    #[error("unknown experiment `{name}`; valid names: {}", Experiment::NAMES.join(", "))]
    UnknownExperiment { name: String },
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        RawConfig::default()
            .resolve()
            .expect("default config must be valid")
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = if text.trim().is_empty() {
            RawConfig::default()
        } else {
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?
        };
        raw.resolve()
    }
}

/// Read and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    load_config_with_overrides(Some(path), Overrides::default())
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

/// Load a config (or the defaults when `path` is `None`) and apply overrides
/// before validation, so experiment-dependent defaults resolve correctly.
pub fn load_config_with_overrides(
    path: Option<&Path>,
    overrides: Overrides,
) -> Result<ExperimentConfig, ConfigError> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|source| ConfigError::Io {
            path: p.to_path_buf(),
            source,
        })?,
        None => String::new(),
    };
    let mut raw: RawConfig = if text.trim().is_empty() {
        RawConfig::default()
    } else {
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?
    };
    if let Some(e) = overrides.experiment {
        raw.experiment = Some(e);
    }
    if let Some(s) = overrides.seed {
        raw.seed = Some(s);
    }
    if let Some(o) = overrides.out_dir {
        raw.out_dir = Some(o);
    }
    raw.resolve()
}

impl RawConfig {
    fn resolve(self) -> Result<ExperimentConfig, ConfigError> {
        let b_bits = self.b_bits.unwrap_or(2000);
        if b_bits == 0 {
            return Err(ConfigError::InvalidField {
                field: "b_bits",
                reason: "must be positive".into(),
            });
        }
        let l_max_bits = match (self.l_max_packets, self.l_max_bits) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::InvalidField {
                    field: "l_max_packets",
                    reason: "give either l_max_packets or l_max_bits, not both".into(),
                })
            }
            (Some(pkts), None) => pkts * b_bits,
            (None, Some(bits)) => bits,
            (None, None) => 7 * b_bits,
        };
        if l_max_bits < 2 * b_bits {
            return Err(ConfigError::BufferTooSmall {
                l_max_bits,
                min_bits: 2 * b_bits,
            });
        }

        let params = SystemParams {
            p_a: dbm_to_linear(self.p_a_dbm.unwrap_or(10.0)),
            p_b_max: dbm_to_linear(self.p_b_dbm.unwrap_or(20.0)),
            p_r: dbm_to_linear(self.p_r_dbm.unwrap_or(20.0)),
            kappa: dbm_to_linear(self.kappa_dbm.unwrap_or(0.0)),
            var_ab: self.var_ab.unwrap_or(1.0),
            var_ar: self.var_ar.unwrap_or(1.0),
            var_rb: self.var_rb.unwrap_or(1.0),
            var_bb: self.var_bb.unwrap_or(0.2),
            wt: self.wt.unwrap_or(1000.0),
            b_bits,
            l_max_bits,
            m_block: self.m_block.unwrap_or(1),
            n_symbols: self.n_symbols.unwrap_or(10_000),
            enforce_df_cap: self.enforce_df_cap.unwrap_or(true),
        };
        params.validate().map_err(|e| ConfigError::InvalidField {
            field: "params",
            reason: e.to_string(),
        })?;

        let experiment = self.experiment.unwrap_or(Experiment::Fig2Throughput);

        let sweep = match self.sweep {
            Some(raw) => {
                validate_sweep_values(&raw.values)?;
                match (experiment, raw.axis) {
                    (Experiment::Fig2Throughput, SweepAxis::LMaxPackets) => {}
                    (Experiment::Fig1Rates, SweepAxis::VarBb | SweepAxis::PRDbm) => {}
                    (Experiment::ValidateClosedForms | Experiment::ValidateChain, _) => {}
                    (exp, axis) => {
                        return Err(ConfigError::InvalidField {
                            field: "sweep.axis",
                            reason: format!(
                                "axis `{}` is not valid for experiment `{}`",
                                axis.name(),
                                exp.name()
                            ),
                        })
                    }
                }
                if raw.axis == SweepAxis::LMaxPackets {
                    for &v in &raw.values {
                        if v.fract() != 0.0 || v < 2.0 {
                            return Err(ConfigError::InvalidField {
                                field: "sweep.values",
                                reason: format!(
                                    "l_max_packets sweep needs whole packet counts ≥ 2, got {v}"
                                ),
                            });
                        }
                    }
                }
                Sweep {
                    axis: raw.axis,
                    values: raw.values,
                }
            }
            None => default_sweep(experiment),
        };

        let r_d_values = match self.r_d_values {
            Some(values) => {
                for &v in &values {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(ConfigError::InvalidField {
                            field: "r_d_values",
                            reason: format!("values must be positive and finite, got {v}"),
                        });
                    }
                }
                values
            }
            None => vec![params.r_d()],
        };

        let trials = self.trials.unwrap_or(8);
        let n_slots = self.n_slots.unwrap_or(1_000_000);
        let n_samples = self.n_samples.unwrap_or(100_000);
        if trials == 0 || n_slots == 0 || n_samples == 0 {
            return Err(ConfigError::InvalidField {
                field: "trials/n_slots/n_samples",
                reason: "must be positive".into(),
            });
        }
        if trials > 1024 {
            return Err(ConfigError::InvalidField {
                field: "trials",
                reason: "at most 1024 trials per grid point (random-stream layout)".into(),
            });
        }

        Ok(ExperimentConfig {
            params,
            rsi_mode: self.rsi_mode.unwrap_or(RsiMode::Fast),
            experiment,
            sweep,
            r_d_values,
            trials,
            n_slots,
            warmup_slots: self.warmup_slots.unwrap_or(10_000),
            n_samples,
            fig1_numeric_symbols: self.fig1_numeric_symbols.unwrap_or(500),
            bin_width_bits: self.bin_width_bits.unwrap_or(50),
            seed: self.seed.unwrap_or(1),
            out_dir: self.out_dir.unwrap_or_else(|| PathBuf::from("results")),
        })
    }
}

fn validate_sweep_values(values: &[f64]) -> Result<(), ConfigError> {
    if values.is_empty() {
        return Err(ConfigError::InvalidField {
            field: "sweep.values",
            reason: "must not be empty".into(),
        });
    }
    for &v in values {
        if !v.is_finite() {
            return Err(ConfigError::InvalidField {
                field: "sweep.values",
                reason: format!("values must be finite, got {v}"),
            });
        }
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConfigError::InvalidField {
            field: "sweep.values",
            reason: "values must be strictly increasing".into(),
        });
    }
    Ok(())
}

fn default_sweep(experiment: Experiment) -> Sweep {
    match experiment {
        Experiment::Fig1Rates => Sweep {
            axis: SweepAxis::VarBb,
            values: vec![0.01, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0],
        },
        _ => Sweep {
            axis: SweepAxis::LMaxPackets,
            values: (2..=10).map(|v| v as f64).collect(),
        },
    }
}
