use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Number of 64-bit draws reserved for each counter value.
pub const DRAWS_PER_COUNTER: u64 = 1 << 16;

// ChaCha word positions are 32-bit words.
const WORDS_PER_COUNTER: u128 = 2 * DRAWS_PER_COUNTER as u128;

/// Counter-based random stream: the variates it produces are a pure
/// function of `(seed, stream_id, counter)`.
///
/// A `RandomStream` is a plain value. Drawing happens through the
/// [`StreamRng`] returned by [`RandomStream::rng`], which never feeds back
/// into the stream itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_id: u64,
    pub counter: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0, counter: 0 }
    }

    pub fn with_stream_id(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }

    pub fn at_counter(self, counter: u64) -> Self {
        Self { counter, ..self }
    }

    /// Independent child stream for a tagged sub-task (an owner scenario,
    /// a sweep pair, ...). Counter restarts at zero.
    pub fn derive(self, tag: u64) -> Self {
        let id = splitmix64(splitmix64(self.stream_id) ^ tag.wrapping_add(0x9e37_79b9_7f4a_7c15));
        Self { seed: self.seed, stream_id: id, counter: 0 }
    }

    /// Generator positioned at this stream's counter.
    pub fn rng(&self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(self.stream_id);
        inner.set_word_pos(self.counter as u128 * WORDS_PER_COUNTER);
        StreamRng { inner }
    }
}

/// Sequential generator over one counter lane of a [`RandomStream`].
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    /// Uniform variate on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        let bits = self.inner.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
