//! Counter-based random streams.
//!
//! Every stream is addressed by `(master_seed, replicate, role)`. The key of
//! the underlying ChaCha8 block function is derived from the master seed and
//! the role; the replicate index selects the ChaCha stream. Streams can be
//! constructed in any order on any thread and never overlap.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// What a stream is used for inside one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Environment,
    Offspring,
    Gaussian,
    Auxiliary,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::Environment => 0x656e_7669_726f_6e6d,
            StreamRole::Offspring => 0x6f66_6673_7072_6e67,
            StreamRole::Gaussian => 0x6761_7573_7369_616e,
            StreamRole::Auxiliary => 0x6175_7869_6c69_6172,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct RandomStream {
    inner: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(master_seed: u64, replicate: u64, role: StreamRole) -> Self {
        let mut state = master_seed ^ role.tag();
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(replicate);
        Self { inner }
    }

    /// Uniform on [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }
}

impl RngCore for RandomStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// The pair of streams a single replicate trajectory consumes.
#[derive(Debug, Clone)]
pub struct ReplicateStreams {
    pub environment: RandomStream,
    pub offspring: RandomStream,
}

impl ReplicateStreams {
    pub fn new(master_seed: u64, replicate: u64) -> Self {
        Self {
            environment: RandomStream::new(master_seed, replicate, StreamRole::Environment),
            offspring: RandomStream::new(master_seed, replicate, StreamRole::Offspring),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_address_same_sequence() {
        let mut a = RandomStream::new(7, 3, StreamRole::Offspring);
        let mut b = RandomStream::new(7, 3, StreamRole::Offspring);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ_by_replicate_and_role() {
        let first = |s: &mut RandomStream| (0..4).map(|_| s.next_u64()).collect::<Vec<_>>();
        let base = first(&mut RandomStream::new(7, 3, StreamRole::Offspring));
        assert_ne!(
            base,
            first(&mut RandomStream::new(7, 4, StreamRole::Offspring))
        );
        assert_ne!(
            base,
            first(&mut RandomStream::new(7, 3, StreamRole::Environment))
        );
        assert_ne!(
            base,
            first(&mut RandomStream::new(8, 3, StreamRole::Offspring))
        );
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut s = RandomStream::new(1, 0, StreamRole::Auxiliary);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
