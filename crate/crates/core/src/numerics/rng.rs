//! Splittable, counter-based random streams.
//!
//! A [`RandomStream`] is an immutable `(master_seed, stream_id)` descriptor. Every
//! generator built from it is a ChaCha8 keystream keyed by the master seed and
//! positioned on the stream id, so the output depends only on the descriptor and the
//! number of values already consumed from that generator. Replicate `i` of any loop
//! uses stream id `i`, which makes results independent of how work is split across
//! threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GfiError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Same master seed, different stream.
    pub fn with_stream(&self, stream_id: u64) -> Self {
        Self::new(self.master_seed, stream_id)
    }

    /// A new family of streams keyed by this descriptor and `label`.
    ///
    /// Streams of the derived family are independent of every stream of the parent
    /// family; use it to give each replicate its own set of per-draw stream ids.
    pub fn derive(&self, label: u64) -> Self {
        let key =
            splitmix64(self.master_seed ^ splitmix64(self.stream_id.wrapping_add(0x5bd1_e995)));
        Self::new(splitmix64(key ^ splitmix64(label)), 0)
    }
}

/// `n` i.i.d. draws from N(0, sigma^2), taken from the start of `stream`.
pub fn gaussian(stream: &RandomStream, n: usize, sigma: f64) -> Result<Vec<f64>> {
    let mut rng = stream.rng();
    gaussian_from(&mut rng, n, sigma)
}

/// Continue drawing N(0, sigma^2) values from an existing generator.
pub fn gaussian_from<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(GfiError::InvalidInput(format!(
            "gaussian scale must be positive and finite, got {sigma}"
        )));
    }
    Ok((0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        })
        .collect())
}

/// Standard normal draw.
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
