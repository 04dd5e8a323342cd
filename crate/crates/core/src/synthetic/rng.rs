//! Counter-based SplitMix64 stream.
//!
//! Draw `n` (1-based) of a stream with key `k` is
//! `mix(k + n * 0x9E3779B97F4A7C15)` (wrapping), where `mix` is the
//! SplitMix64 finalizer. With `k` equal to a seed this reproduces the
//! reference SplitMix64 sequence for that seed. Substream `i` of a stream
//! with key `k` has key `mix(k ^ mix(i + 0xD1B54A32D192ED03))`, so any
//! substream can be derived without touching the parent's counter.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const SUBSTREAM_SALT: u64 = 0xD1B5_4A32_D192_ED03;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { key: seed, counter: 0 }
    }

    pub fn substream(&self, index: u64) -> CounterRng {
        CounterRng::new(mix(self.key ^ mix(index.wrapping_add(SUBSTREAM_SALT))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift; bias below 2^-32
    /// for the small `n` used here).
    pub fn below(&mut self, n: u64) -> u64 {
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Standard normal deviate by the Box-Muller transform. Consumes two
    /// draws and returns the cosine branch.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_splitmix64_vectors() {
        let mut rng = CounterRng::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);

        let mut rng = CounterRng::new(42);
        assert_eq!(rng.next_u64(), 0xBDD7_3226_2FEB_6E95);
        assert_eq!(rng.next_u64(), 0x28EF_E333_B266_F103);
        assert_eq!(rng.next_u64(), 0x4752_6757_130F_9F52);
    }

    #[test]
    fn substreams_are_independent_of_parent_position() {
        let mut parent = CounterRng::new(7);
        let before = parent.substream(3);
        parent.next_u64();
        assert_eq!(parent.substream(3), before);
        assert_ne!(parent.substream(3), parent.substream(4));
    }

    #[test]
    fn uniform_and_normal_moments() {
        let mut rng = CounterRng::new(2024);
        let n = 200_000;
        let us: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        assert!(us.iter().all(|u| (0.0..1.0).contains(u)));
        let mean = us.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005);

        let zs: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let m = zs.iter().sum::<f64>() / n as f64;
        let v = zs.iter().map(|z| (z - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(m.abs() < 0.01, "mean {m}");
        assert!((v - 1.0).abs() < 0.015, "var {v}");
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = CounterRng::new(1);
        let mut seen = [0u32; 6];
        for _ in 0..6000 {
            seen[rng.below(6) as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800), "{seen:?}");
    }
}
