//! Counter-based randomness.
//!
//! Every random quantity in the crate is a pure function of a 128-bit base
//! seed, a replicate stream id and a structured site key. A key is hashed with
//! a SplitMix64-style finalizer chain and then drives a cheap SplitMix64
//! stream. Nothing is shared between sites, so queries can happen in any
//! order, on any thread, any number of times.

use rand::RngCore;

/// 128-bit base seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Seed(pub u128);

impl Seed {
    pub fn from_u64(x: u64) -> Self {
        Seed(x as u128)
    }

    /// Parses `0x`-prefixed or bare hex, up to 32 digits.
    pub fn parse_hex(s: &str) -> Option<Self> {
        let t = s.trim();
        let t = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t);
        if t.is_empty() || t.len() > 32 {
            return None;
        }
        u128::from_str_radix(t, 16).ok().map(Seed)
    }

    pub fn to_hex(self) -> String {
        format!("{:032x}", self.0)
    }

    fn lo(self) -> u64 {
        self.0 as u64
    }

    fn hi(self) -> u64 {
        (self.0 >> 64) as u64
    }
}

/// Namespaces for site keys. The numeric values are part of the
/// reproducibility contract and must never be renumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    ConnectivityWeight = 1,
    EdgeAccept = 2,
    RowSkip = 3,
    EdgeWeight = 4,
    VertexWeight = 5,
    EdgeCoupling = 6,
    Tree = 7,
    Coupling = 8,
    Repair = 9,
    LimitCoupling = 10,
    MarkCoupling = 11,
    Rde = 12,
    Replicate = 13,
    Experiment = 14,
    Aux = 15,
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn absorb(h: u64, word: u64) -> u64 {
    mix64(h ^ mix64(word.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Hash of a structured key. `flag` separates primary (false) from
/// replacement (true) draws of the same site.
pub fn site_key(seed: Seed, stream: u64, domain: Domain, a: u64, b: u64, flag: bool) -> u64 {
    let mut h = 0x6a09_e667_f3bc_c908;
    h = absorb(h, seed.lo());
    h = absorb(h, seed.hi());
    h = absorb(h, stream);
    h = absorb(h, domain as u64);
    h = absorb(h, a);
    h = absorb(h, b);
    absorb(h, flag as u64)
}

/// Derives a child key from an existing key and a further word. Used for
/// tree node addresses and nested replicate seeds.
pub fn derive(key: u64, word: u64) -> u64 {
    absorb(key ^ 0xa076_1d64_78bd_642f, word)
}

/// SplitMix64 stream seeded from a site key.
#[derive(Debug, Clone)]
pub struct SiteRng {
    state: u64,
}

impl SiteRng {
    pub fn new(key: u64) -> Self {
        SiteRng { state: key }
    }

    pub fn for_site(seed: Seed, stream: u64, domain: Domain, a: u64, b: u64, flag: bool) -> Self {
        Self::new(site_key(seed, stream, domain, a, b, flag))
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on (lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}

impl RngCore for SiteRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}
