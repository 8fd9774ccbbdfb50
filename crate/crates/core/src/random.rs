//! Seeded randomness: Haar unitaries, random channels and stream splitting.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::channel::KrausChannel;
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// Stream identifiers, so that independent consumers of one seed never overlap.
pub mod streams {
    pub const CHANNEL: u64 = 1;
    pub const OPTIMIZE: u64 = 2;
    pub const SAMPLE: u64 = 3;
    pub const STATE: u64 = 4;
    pub const PARAMS: u64 = 5;
}

/// Deterministic generator for `(seed, stream_id)`.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Sub-stream `index` of a named stream.
pub fn substream(seed: u64, stream_id: u64, index: u64) -> ChaCha20Rng {
    stream(seed, (stream_id << 40) ^ index)
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random `n × n` unitary (QR of a Ginibre matrix with phase fix).
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    loop {
        let g = ComplexMatrix::from_fn(n, n, |_, _| complex_gaussian(rng));
        let qr = g.qr();
        let r = qr.r();
        if (0..n).any(|i| r[(i, i)].norm() < 1e-300) {
            continue;
        }
        let phases = DVector::from_fn(n, |i, _| r[(i, i)] / r[(i, i)].norm());
        return qr.q() * ComplexMatrix::from_diagonal(&phases);
    }
}

/// Random channel: Stinespring dilation `K_i[r, c] = U[r·m + i, c·m]` of a
/// Haar unitary on the system and an `m`-level environment.
pub fn random_channel<R: Rng + ?Sized>(
    d: usize,
    env_dim: usize,
    rng: &mut R,
) -> Result<KrausChannel> {
    if d < 2 {
        return Err(Error::DimensionTooSmall { dim: d, min: 2 });
    }
    if env_dim == 0 {
        return Err(Error::DimensionTooSmall {
            dim: env_dim,
            min: 1,
        });
    }
    let u = haar_unitary(d * env_dim, rng);
    let ops = (0..env_dim)
        .map(|i| ComplexMatrix::from_fn(d, d, |r, c| u[(r * env_dim + i, c * env_dim)]))
        .collect();
    KrausChannel::new(ops)
}

/// Haar-random pure state vector.
pub fn haar_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<Complex64> {
    let v = DVector::from_fn(d, |_, _| complex_gaussian(rng));
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_residual;

    #[test]
    fn haar_is_unitary_and_seeded() {
        let a = haar_unitary(5, &mut stream(9, 1));
        let b = haar_unitary(5, &mut stream(9, 1));
        let c = haar_unitary(5, &mut stream(9, 2));
        assert!(unitarity_residual(&a) < 1e-12);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn haar_first_moment_vanishes() {
        // E[U] = 0 and E[|U_00|²] = 1/n for Haar measure.
        let mut rng = stream(3, 0);
        let n = 3;
        let trials = 4000;
        let mut mean = Complex64::new(0.0, 0.0);
        let mut second = 0.0;
        for _ in 0..trials {
            let u = haar_unitary(n, &mut rng);
            mean += u[(0, 0)];
            second += u[(0, 0)].norm_sqr();
        }
        assert!((mean / trials as f64).norm() < 0.05);
        assert!((second / trials as f64 - 1.0 / n as f64).abs() < 0.02);
    }

    #[test]
    fn random_channel_is_cptp() {
        for d in 2..5 {
            let ch = random_channel(d, d * d, &mut stream(11, d as u64)).unwrap();
            assert_eq!(ch.num_ops(), d * d);
            assert!(ch.completeness_residual() <= 1e-10);
        }
        assert!(random_channel(1, 1, &mut stream(0, 0)).is_err());
    }

    #[test]
    fn substreams_differ() {
        let a: u64 = substream(1, streams::OPTIMIZE, 0).random();
        let b: u64 = substream(1, streams::OPTIMIZE, 1).random();
        let c: u64 = substream(1, streams::SAMPLE, 0).random();
        assert!(a != b && a != c && b != c);
    }
}
