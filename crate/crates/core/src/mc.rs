//! Deterministic Monte Carlo plumbing.
//!
//! Work is split into a fixed number of streams; stream `i` draws from a
//! ChaCha generator seeded by a splitmix of `(master_seed, i)` and
//! reduction always happens in stream order. Estimates are therefore
//! bit-identical for a fixed seed no matter how many workers run the
//! streams, and the sequential fallback (`--no-default-features`)
//! produces exactly the same numbers as the rayon path.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Monte Carlo value with its standard error of the mean, computed from
/// per-stream batch means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl McEstimate {
    /// Exact (zero-variance) value dressed as an estimate.
    pub fn exact(value: f64, seed: u64) -> Self {
        McEstimate { value, std_error: 0.0, n_samples: 0, seed }
    }

    /// Difference of two independent estimates.
    pub fn sub_independent(&self, other: &McEstimate) -> McEstimate {
        McEstimate {
            value: self.value - other.value,
            std_error: (self.std_error * self.std_error + other.std_error * other.std_error)
                .sqrt(),
            n_samples: self.n_samples.max(other.n_samples),
            seed: self.seed,
        }
    }

    pub fn scale(&self, s: f64) -> McEstimate {
        McEstimate {
            value: s * self.value,
            std_error: s.abs() * self.std_error,
            n_samples: self.n_samples,
            seed: self.seed,
        }
    }

    /// |value| exceeds `k` standard errors.
    pub fn significant(&self, k: f64) -> bool {
        self.value.abs() > k * self.std_error
    }
}

/// splitmix64 finalizer; decorrelates per-stream seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed of stream `stream` under `master`.
pub fn derive_stream_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream.wrapping_add(0x243F6A8885A308D3)))
}

/// Fresh generator for one stream.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_stream_seed(master, stream))
}

/// Number of streams used to split `n` samples.
pub fn stream_count(n: u64) -> u64 {
    n.min(128).max(1)
}

fn map_streams_impl<T, F>(n_streams: u64, f: F, force_seq: bool) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !force_seq {
            return (0..n_streams).into_par_iter().map(f).collect();
        }
    }
    let _ = force_seq;
    (0..n_streams).map(f).collect()
}

/// Map a closure over stream indices, in parallel when the `parallel`
/// feature is enabled. Results come back in stream order.
pub fn map_streams<T, F>(n_streams: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    map_streams_impl(n_streams, f, false)
}

/// Sequential twin of [`map_streams`]; kept unconditionally for the
/// benchmark suite and for pinning down scheduling bugs.
pub fn map_streams_seq<T, F>(n_streams: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    map_streams_impl(n_streams, f, true)
}

/// Per-stream accumulator: sample count and one sum per component.
struct StreamSums {
    n: u64,
    sums: Vec<f64>,
}

fn estimate_many_impl<F>(
    seed: u64,
    n_samples: u64,
    k: usize,
    eval: F,
    force_seq: bool,
) -> Vec<McEstimate>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync + Send,
{
    assert!(n_samples > 0 && k > 0);
    let s = stream_count(n_samples);
    let base = n_samples / s;
    let extra = n_samples % s;
    let batches = map_streams_impl(
        s,
        |i| {
            let mut rng = stream_rng(seed, i);
            let n_i = base + if i < extra { 1 } else { 0 };
            let mut sums = vec![0.0; k];
            let mut scratch = vec![0.0; k];
            for _ in 0..n_i {
                scratch.iter_mut().for_each(|x| *x = 0.0);
                eval(&mut rng, &mut scratch);
                for j in 0..k {
                    sums[j] += scratch[j];
                }
            }
            StreamSums { n: n_i, sums }
        },
        force_seq,
    );

    // stream-ordered reduction
    let mut grand = vec![0.0; k];
    for b in &batches {
        for j in 0..k {
            grand[j] += b.sums[j];
        }
    }
    let n = n_samples as f64;
    let means: Vec<f64> = grand.iter().map(|g| g / n).collect();

    let s_eff = batches.iter().filter(|b| b.n > 0).count() as f64;
    (0..k)
        .map(|j| {
            let mut var = 0.0;
            for b in &batches {
                if b.n == 0 {
                    continue;
                }
                let m_i = b.sums[j] / b.n as f64;
                var += b.n as f64 * (m_i - means[j]) * (m_i - means[j]);
            }
            let std_error = if s_eff > 1.5 { (var / ((s_eff - 1.0) * n)).sqrt() } else { f64::NAN };
            McEstimate { value: means[j], std_error, n_samples, seed }
        })
        .collect()
}

/// Estimate `k` component means from `n_samples` evaluations; each call
/// to `eval` fills the scratch slice with one sample of every component
/// (shared randomness across components).
pub fn estimate_many<F>(seed: u64, n_samples: u64, k: usize, eval: F) -> Vec<McEstimate>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync + Send,
{
    estimate_many_impl(seed, n_samples, k, eval, false)
}

/// Sequential twin of [`estimate_many`].
pub fn estimate_many_seq<F>(seed: u64, n_samples: u64, k: usize, eval: F) -> Vec<McEstimate>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync + Send,
{
    estimate_many_impl(seed, n_samples, k, eval, true)
}

/// Scalar convenience wrapper around [`estimate_many`].
pub fn estimate<F>(seed: u64, n_samples: u64, eval: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync + Send,
{
    estimate_many(seed, n_samples, 1, |rng, out| out[0] = eval(rng))[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let eval = |rng: &mut ChaCha8Rng, out: &mut [f64]| {
            let x: f64 = rng.gen();
            out[0] = x * x;
            out[1] = x;
        };
        let a = estimate_many(42, 10_001, 2, eval);
        let b = estimate_many_seq(42, 10_001, 2, eval);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.value.to_bits(), y.value.to_bits());
            assert_eq!(x.std_error.to_bits(), y.std_error.to_bits());
        }
    }

    #[test]
    fn reruns_are_bit_identical() {
        let eval = |rng: &mut ChaCha8Rng| -> f64 { rng.gen::<f64>().sin() };
        let a = estimate(7, 5000, eval);
        let b = estimate(7, 5000, eval);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_ne!(a.value.to_bits(), estimate(8, 5000, eval).value.to_bits());
    }

    #[test]
    fn uniform_mean_and_error_are_calibrated() {
        let est = estimate(3, 200_000, |rng| rng.gen::<f64>());
        assert!((est.value - 0.5).abs() < 4.0 * est.std_error);
        // sd of U(0,1) is 1/sqrt(12); se should be close to sd/sqrt(n)
        let expected = (1.0f64 / 12.0).sqrt() / (est.n_samples as f64).sqrt();
        assert!((est.std_error - expected).abs() / expected < 0.2);
    }

    #[test]
    fn constant_integrand_has_zero_error() {
        let est = estimate(11, 1000, |_| 2.5);
        assert_eq!(est.value, 2.5);
        assert_eq!(est.std_error, 0.0);
    }
}
