//! Host-side xoshiro128+ generator.
//!
//! This is the reference stream used both to synthesize benchmark input data
//! and to predict the Monte-Carlo kernel's random draws. The integer-core
//! implementation inside the Monte-Carlo kernel must track this generator
//! word for word, so the update order below is load-bearing: the result is
//! taken from the *pre-update* state (`s0 + s3`), then the state advances.

/// xoshiro128+ with 128 bits of state. All-zero state is a fixed point of
/// the update and is rejected at construction.
#[derive(Clone, Debug)]
pub struct Xoshiro128Plus {
    s: [u32; 4],
}

impl Xoshiro128Plus {
    pub fn new(state: [u32; 4]) -> Result<Self, String> {
        if state == [0; 4] {
            return Err("xoshiro128+ state must not be all zero".into());
        }
        Ok(Xoshiro128Plus { s: state })
    }

    /// Derive a distinct, never-all-zero state for one stream (core) from a
    /// 64-bit seed. Uses splitmix64 so nearby seeds land far apart.
    pub fn from_seed(seed: u64, stream: u32) -> Self {
        let mut z = seed ^ (u64::from(stream).wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut next = || {
            z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut x = z;
            x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            x ^ (x >> 31)
        };
        let a = next();
        let b = next();
        let mut s = [a as u32, (a >> 32) as u32, b as u32, (b >> 32) as u32];
        if s == [0; 4] {
            s[0] = 1;
        }
        Xoshiro128Plus { s }
    }

    pub fn state(&self) -> [u32; 4] {
        self.s
    }

    pub fn next_u32(&mut self) -> u32 {
        let result = self.s[0].wrapping_add(self.s[3]);
        let t = self.s[1] << 9;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(11);
        result
    }

    /// Uniform double in [-1, 1): `w * 2^-31 - 1`. Every step is exact in
    /// f64, so device and host agree bit for bit.
    pub fn next_double(&mut self) -> f64 {
        self.next_u32() as f64 * (1.0 / 2147483648.0) - 1.0
    }
}
