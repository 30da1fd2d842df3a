//! Deterministic RNG shared by model stepping, player policies, and look-ahead.
//!
//! xorshift64* with a fixed seeding rule so traces are stable across
//! platforms. The full state is a single `u64`, which makes snapshots cheap.

/// Seeded xorshift64* generator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SimRng {
    state: u64,
}

impl SimRng {
    /// Zero seeds are remapped to a fixed non-zero constant (xorshift lockup).
    pub fn new(seed: u64) -> Self {
        // splitmix the seed so nearby seeds diverge immediately
        let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        Self {
            state: if z == 0 { 0x9E37_79B9_7F4A_7C15 } else { z },
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform index in `0..n`. `n` must be non-zero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// True with probability `num / den`.
    pub fn chance(&mut self, num: u32, den: u32) -> bool {
        debug_assert!(den > 0 && num <= den);
        self.next_u64() % u64::from(den) < u64::from(num)
    }

    pub fn state(&self) -> u64 {
        self.state
    }
}
