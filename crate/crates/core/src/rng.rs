//! Counter-addressed uniform draws.
//!
//! Every uniform used by a chain is addressed by `(sweep, axis, slot)`: the
//! ChaCha8 stream id is the axis and the word position is derived from the
//! sweep and slot. Two samplers that consume slot 0 for their per-coordinate
//! draw therefore see identical uniforms regardless of how many other draws
//! (such as a Metropolis acceptance in slot 1) they make.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Slots reserved per `(sweep, axis)`.
pub const SLOTS: u64 = 2;

/// Slot of the per-coordinate draw (inverse-CDF input).
pub const SLOT_DRAW: u32 = 0;
/// Slot of the Metropolis acceptance draw.
pub const SLOT_ACCEPT: u32 = 1;

#[derive(Debug, Clone)]
pub struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self, sweep: u64, axis: usize, slot: u32) -> f64 {
        debug_assert!(u64::from(slot) < SLOTS);
        self.rng.set_stream(axis as u64);
        // one u64 spans two 32-bit words
        let word = (u128::from(sweep) * u128::from(SLOTS) + u128::from(slot)) * 2;
        self.rng.set_word_pos(word);
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
