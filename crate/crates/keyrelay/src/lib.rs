//! Simulation and analysis engine for a secret-key-aided secure transmission
//! scheme over an untrusted decode-and-forward relay network.
//!
//! A source (Alice) delivers fixed-size data packets to a full-duplex
//! destination (Bob), optionally through a relay (Charlie) that is trusted to
//! forward but not to read. Packets ride either the instantaneous secrecy rate
//! of the direct link or a one-time pad drawn from a finite buffer of
//! previously exchanged secret-key bits. The crate computes every per-slot
//! link and secrecy rate (including full-duplex rates under block-fading
//! residual self-interference), executes the slot-by-slot transmission policy,
//! models the key buffer as a finite Markov chain, and cross-checks the
//! analytic secure throughput against Monte Carlo trajectory simulation.
//!
//! Module map:
//!
//! - [`special`]: exponential integral needed by the fast-RSI closed form.
//! - [`params`]: physical and protocol constants, all in linear units.
//! - [`channel`]: seed-reproducible Rayleigh-fading channel sampling.
//! - [`rates`]: per-slot achievable/secrecy rates and Bob's power selection.
//! - [`scheme`]: the ordered per-slot decision policy and buffer bookkeeping.
//! - [`markov`]: buffer chain construction, steady state, analytic throughput.
//! - [`montecarlo`]: ground-truth trajectory simulation and batch sweeps.
//! - [`config`] / [`experiments`]: JSON-driven experiment orchestration.

pub mod channel;
pub mod config;
pub mod experiments;
pub mod markov;
pub mod montecarlo;
pub mod params;
pub mod rates;
pub mod scheme;
pub mod special;

/// Stream-id bases partitioning the ChaCha stream space so that trajectory
/// simulation, analytic estimation, and sweep workers never collide even when
/// they share one master seed.
pub mod streams {
    pub const TRAJECTORY_BASE: u64 = 0;
    pub const ANALYTIC_BASE: u64 = 1 << 48;
    pub const SWEEP_BASE: u64 = 2 << 48;
    pub const VALIDATE_BASE: u64 = 3 << 48;
}
