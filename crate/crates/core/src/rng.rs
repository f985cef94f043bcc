//! Philox4x32-10 counter-based generator.
//!
//! Salmon, Moraes, Dror and Shaw, "Parallel random numbers: as easy as
//! 1, 2, 3" (SC 2011). The 64-bit seed is the key `(seed_lo, seed_hi)`. The
//! 128-bit counter is `(block_lo, block_hi, stream_lo, stream_hi)`, so every
//! `(seed, stream)` pair owns an independent sequence of 2^64 blocks. Each
//! block yields four 32-bit words, consumed as two `u64`s
//! `(w1 << 32 | w0)` then `(w3 << 32 | w2)`. Uniform doubles take the top
//! 53 bits of a `u64`.

pub const GENERATOR_NAME: &str = "philox4x32-10";

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// One Philox4x32 block with ten rounds.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

#[derive(Debug, Clone)]
pub struct Philox4x32 {
    key: [u32; 2],
    stream: u64,
    block: u64,
    buffer: [u64; 2],
    used: usize,
}

impl Philox4x32 {
    pub fn new(seed: u64, stream: u64) -> Self {
        Philox4x32 {
            key: [seed as u32, (seed >> 32) as u32],
            stream,
            block: 0,
            buffer: [0; 2],
            used: 2,
        }
    }

    /// Independent substream `stream` under the same seed.
    pub fn substream(&self, stream: u64) -> Self {
        Philox4x32 {
            key: self.key,
            ..Philox4x32::new(0, stream)
        }
    }

    fn refill(&mut self) {
        let ctr = [
            self.block as u32,
            (self.block >> 32) as u32,
            self.stream as u32,
            (self.stream >> 32) as u32,
        ];
        let w = philox4x32_10(ctr, self.key);
        self.buffer = [
            (u64::from(w[1]) << 32) | u64::from(w[0]),
            (u64::from(w[3]) << 32) | u64::from(w[2]),
        ];
        self.block = self.block.wrapping_add(1);
        self.used = 0;
    }

    pub fn next_u64(&mut self) -> u64 {
        if self.used == 2 {
            self.refill();
        }
        let x = self.buffer[self.used];
        self.used += 1;
        x
    }

    /// Uniform on `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponential variate with the given rate, by inversion.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -(1.0 - self.next_f64()).ln() / rate
    }
}
