//! Seeded failure injection.
//!
//! The generator is a 64-bit linear congruential generator
//!
//! ```text
//! state' = state * 6364136223846793005 + 1442695040888963407   (mod 2^64)
//! u      = (state' >> 11) / 2^53                                (in [0, 1))
//! ```
//!
//! and a draw fails iff `u < p`. Each (task, tool) pair gets its own stream
//! whose initial state is
//! `splitmix64(tool_seed ^ splitmix64(run_seed ^ fnv1a64(task_id)))`,
//! so draws are independent per call and reproducible per task.

use serde::{Deserialize, Serialize};

pub const LCG_MULTIPLIER: u64 = 6364136223846793005;
pub const LCG_INCREMENT: u64 = 1442695040888963407;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub fn new(seed: u64) -> Self {
        Lcg64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(LCG_MULTIPLIER).wrapping_add(LCG_INCREMENT);
        self.state
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a64(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn task_stream_seed(run_seed: u64, tool_seed: u64, task_id: &str) -> u64 {
    splitmix64(tool_seed ^ splitmix64(run_seed ^ fnv1a64(task_id)))
}

/// Bernoulli failure draws for one tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureInjector {
    pub failure_probability: f64,
    pub rng_seed: u64,
    rng: Lcg64,
    draw_log: Vec<bool>,
}

impl FailureInjector {
    pub fn new(failure_probability: f64, rng_seed: u64) -> Self {
        FailureInjector {
            failure_probability,
            rng_seed,
            rng: Lcg64::new(rng_seed),
            draw_log: Vec::new(),
        }
    }

    /// Whether the next invocation fails.
    pub fn draw(&mut self) -> bool {
        let failed = self.rng.next_f64() < self.failure_probability;
        self.draw_log.push(failed);
        failed
    }

    pub fn draw_log(&self) -> &[bool] {
        &self.draw_log
    }
}
