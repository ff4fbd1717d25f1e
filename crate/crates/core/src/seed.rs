//! Named random substreams derived from one master seed.
//!
//! Every random draw in the crate comes from a stream keyed by
//! `(master, purpose, indices)`, so results do not depend on how work is
//! split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Outer path used by a training iteration.
    Path,
    /// Inner next-state draws used while training.
    Inner,
    /// Random Fourier parameters.
    Basis,
    /// Block subsets of the coordinate method.
    Blocks,
    /// Outer paths shared by the lower and upper bound estimators.
    Evaluation,
    /// Inner draws of the greedy policy.
    Policy,
    /// Inner draws of the dual penalty.
    Dual,
    /// Trace mini-batches.
    Trace,
    /// Regression paths.
    Regression,
    /// Random fixture generation.
    Fixture,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Path => 0x5041_5448,
            Purpose::Inner => 0x494e_4e52,
            Purpose::Basis => 0x4241_5349,
            Purpose::Blocks => 0x424c_4f4b,
            Purpose::Evaluation => 0x4556_414c,
            Purpose::Policy => 0x504f_4c59,
            Purpose::Dual => 0x4455_414c,
            Purpose::Trace => 0x5452_4345,
            Purpose::Regression => 0x5245_4752,
            Purpose::Fixture => 0x4649_5854,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit key of the substream `(master, purpose, index)`.
pub fn derive(master: u64, purpose: Purpose, index: &[u64]) -> u64 {
    let mut h = splitmix(master ^ splitmix(purpose.tag()));
    for (pos, &i) in index.iter().enumerate() {
        h = splitmix(h ^ splitmix(i.wrapping_add((pos as u64 + 1) << 56)));
    }
    h
}

pub fn stream(master: u64, purpose: Purpose, index: &[u64]) -> Stream {
    Stream::seed_from_u64(derive(master, purpose, index))
}

/// Substreams `(master, purpose, prefix ++ [t])` indexed by stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamFamily {
    pub master: u64,
    pub purpose: Purpose,
    pub prefix: Vec<u64>,
}

impl StreamFamily {
    pub fn new(master: u64, purpose: Purpose, prefix: &[u64]) -> Self {
        Self { master, purpose, prefix: prefix.to_vec() }
    }

    pub fn at(&self, t: usize) -> Stream {
        let mut idx = self.prefix.clone();
        idx.push(t as u64);
        stream(self.master, self.purpose, &idx)
    }
}
