//! Slot-by-slot transmission policy and key-buffer bookkeeping.
//!
//! Alice and Bob maintain mirrored secret-key buffers, so the simulator
//! tracks a single queue of whole bits in [0, L_max]. Each slot the policy
//! checks, in order:
//!
//! 1. Direct secure transmission: if the Alice→Bob secrecy rate covers the
//!    target rate, the packet rides the secrecy rate and any surplus secrecy
//!    rate is banked as fresh key bits.
//! 2. Buffer below one packet: a whole slot is spent sharing a key at the
//!    better of the two secrecy rates (Alice→Bob or Bob→Alice at full
//!    power); if both are zero, everyone stays silent.
//! 3. Buffer holds at least one packet but is not full: deliver a one-time-
//!    padded packet over the best open route — full-duplex relaying (Bob
//!    returns key bits in phase 2), then half-duplex relaying, then the
//!    direct link — else fall back to key exchange as in 2.
//! 4. Buffer full: same route order, but with nothing worth storing the
//!    fallback is silence.
//!
//! Bits are counted with the floor of (fraction of slot)·W·T·rate; whatever
//! exceeds the buffer capacity is discarded on both sides.

use serde::{Deserialize, Serialize};

use crate::params::SystemParams;
use crate::rates::RateTuple;

/// Transmission mode chosen for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Data over the direct link at the secrecy rate; surplus becomes key.
    DtSecure,
    /// Whole slot spent sharing key bits in the better secrecy direction.
    KeyExchange,
    /// One-time-padded data through the relay, Bob full duplex returning key.
    DataKeyedRtFd,
    /// One-time-padded data through the relay, Bob receiving only.
    DataKeyedRtHd,
    /// One-time-padded data over the direct link.
    DataKeyedDt,
    /// Secrecy outage or full buffer with every route closed.
    Silent,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::DtSecure,
        Mode::KeyExchange,
        Mode::DataKeyedRtFd,
        Mode::DataKeyedRtHd,
        Mode::DataKeyedDt,
        Mode::Silent,
    ];

    pub fn index(self) -> usize {
        match self {
            Mode::DtSecure => 0,
            Mode::KeyExchange => 1,
            Mode::DataKeyedRtFd => 2,
            Mode::DataKeyedRtHd => 3,
            Mode::DataKeyedDt => 4,
            Mode::Silent => 5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::DtSecure => "DT_SECURE",
            Mode::KeyExchange => "KEY_EXCHANGE",
            Mode::DataKeyedRtFd => "DATA_KEYED_RT_FD",
            Mode::DataKeyedRtHd => "DATA_KEYED_RT_HD",
            Mode::DataKeyedDt => "DATA_KEYED_DT",
            Mode::Silent => "SILENT",
        }
    }

    /// True for the four modes that deliver a data packet securely.
    pub fn delivers_packet(self) -> bool {
        matches!(
            self,
            Mode::DtSecure | Mode::DataKeyedRtFd | Mode::DataKeyedRtHd | Mode::DataKeyedDt
        )
    }
}

/// Key bits currently stored (mirrored at Alice and Bob).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyQueueState {
    pub q_bits: u64,
}

impl KeyQueueState {
    pub fn empty() -> Self {
        Self { q_bits: 0 }
    }

    pub fn new(q_bits: u64) -> Self {
        Self { q_bits }
    }
}

/// Outcome of one slot: mode, net buffer change before clamping, and whether
/// a packet was securely delivered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotDecision {
    pub mode: Mode,
    pub key_delta_bits: i64,
    pub secure_packet: bool,
}

/// Whole bits carried by `fraction` of a slot at `rate` bits/s/Hz:
/// ⌊fraction · WT · rate⌋.
pub fn bits_of_rate(rate: f64, fraction: f64, wt: f64) -> u64 {
    debug_assert!(rate >= 0.0 && (0.0..=1.0).contains(&fraction));
    (fraction * wt * rate).floor().max(0.0) as u64
}

/// Apply the ordered policy to one slot's rates and the current queue.
pub fn decide_slot(q: KeyQueueState, rates: &RateTuple, p: &SystemParams) -> SlotDecision {
    let r_d = p.r_d();
    let b = p.b_bits;

    // 1. The direct link is secure on its own.
    if rates.r_sec_ab >= r_d {
        return SlotDecision {
            mode: Mode::DtSecure,
            key_delta_bits: bits_of_rate(rates.r_sec_ab - r_d, 1.0, p.wt) as i64,
            secure_packet: true,
        };
    }

    // 2. Not enough key for a packet: build up the buffer.
    if q.q_bits < b {
        return key_exchange_or_silent(rates, p);
    }

    // 3./4. A packet's worth of key is available.
    if rates.r_rt_fd >= r_d {
        let regained = bits_of_rate(rates.r_sec_ba_fd, 0.5, p.wt) as i64;
        return SlotDecision {
            mode: Mode::DataKeyedRtFd,
            key_delta_bits: regained - b as i64,
            secure_packet: true,
        };
    }
    if rates.r_rt_hd >= r_d {
        return SlotDecision {
            mode: Mode::DataKeyedRtHd,
            key_delta_bits: -(b as i64),
            secure_packet: true,
        };
    }
    if rates.r_dt >= r_d {
        return SlotDecision {
            mode: Mode::DataKeyedDt,
            key_delta_bits: -(b as i64),
            secure_packet: true,
        };
    }

    if q.q_bits >= p.l_max_bits {
        // Full buffer and every route closed: nothing to store, stay silent.
        return SlotDecision {
            mode: Mode::Silent,
            key_delta_bits: 0,
            secure_packet: false,
        };
    }
    key_exchange_or_silent(rates, p)
}

fn key_exchange_or_silent(rates: &RateTuple, p: &SystemParams) -> SlotDecision {
    let key_rate = rates.r_sec_ab.max(rates.r_sec_ba_full);
    if key_rate == 0.0 {
        // Secrecy outage in both directions.
        return SlotDecision {
            mode: Mode::Silent,
            key_delta_bits: 0,
            secure_packet: false,
        };
    }
    SlotDecision {
        mode: Mode::KeyExchange,
        key_delta_bits: bits_of_rate(key_rate, 1.0, p.wt) as i64,
        secure_packet: false,
    }
}

/// Advance the queue: clamp into [0, L_max], discarding bits that exceed the
/// buffer. Underflow cannot happen for decisions produced by [`decide_slot`]
/// (consumption is guarded by q ≥ b) and is treated as a logic bug.
pub fn apply_decision(q: KeyQueueState, d: &SlotDecision, p: &SystemParams) -> KeyQueueState {
    let next = q.q_bits as i64 + d.key_delta_bits;
    assert!(
        next >= 0,
        "key buffer underflow: q={} delta={} mode={}",
        q.q_bits,
        d.key_delta_bits,
        d.mode.label()
    );
    KeyQueueState {
        q_bits: (next as u64).min(p.l_max_bits),
    }
}
