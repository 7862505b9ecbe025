use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Root of a family of reproducible random streams.
///
/// Every stream is a ChaCha8 generator keyed by the root seed and selected
/// by a 64-bit stream id, so stream `k` is identical across runs and
/// platforms and independent of how many other streams were drawn.
/// Nested families (e.g. one per command, then one per sequence) use
/// [`SeedStream::child`], which derives a new root seed with SplitMix64.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    pub fn child(&self, label: u64) -> SeedStream {
        SeedStream::new(splitmix64(self.seed ^ splitmix64(label.wrapping_add(0x9E37_79B9_7F4A_7C15))))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let root = SeedStream::new(42);
        let a: Vec<u64> = root.substream(3).random_iter().take(8).collect();
        let b: Vec<u64> = root.substream(3).random_iter().take(8).collect();
        let c: Vec<u64> = root.substream(4).random_iter().take(8).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(root.child(1), root.child(2));
        assert_eq!(root.child(1), SeedStream::new(42).child(1));
    }

    #[test]
    fn frozen_first_value() {
        // pins the generator choice; changing it breaks recorded runs
        let v: u64 = SeedStream::new(0).substream(0).random();
        let w: u64 = ChaCha8Rng::seed_from_u64(0).random();
        assert_eq!(v, w);
    }
}
