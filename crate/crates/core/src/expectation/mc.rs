use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::strat::IncrementLaw;

/// Unit-step `(ΔW, J)` pairs from stream `stream` of `seed`.
pub fn unit_pairs(seed: u64, stream: u64, count: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..count)
        .map(|_| {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            IncrementLaw::unit_pair(z1, z2)
        })
        .collect()
}

/// Recentres the sample and maps its covariance onto the exact unit-step law.
pub fn moment_match(pairs: &mut [(f64, f64)]) {
    let n = pairs.len() as f64;
    let (mw, mj) = pairs.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let (mw, mj) = (mw / n, mj / n);
    let (mut sww, mut swj, mut sjj) = (0.0, 0.0, 0.0);
    for p in pairs.iter_mut() {
        p.0 -= mw;
        p.1 -= mj;
        sww += p.0 * p.0;
        swj += p.0 * p.1;
        sjj += p.1 * p.1;
    }
    let (sww, swj, sjj) = (sww / n, swj / n, sjj / n);
    // sample Cholesky factor
    let l11 = sww.sqrt();
    let l21 = swj / l11;
    let l22 = (sjj - l21 * l21).sqrt();
    // target Cholesky factor of [[1, 1/2], [1/2, 1/3]]
    let t11 = 1.0;
    let t21 = 0.5;
    let t22 = (1.0f64 / 12.0).sqrt();
    for p in pairs.iter_mut() {
        let u1 = p.0 / l11;
        let u2 = (p.1 - l21 * u1) / l22;
        *p = (t11 * u1, t21 * u1 + t22 * u2);
    }
}

/// Mean and standard error of a sample.
pub fn mean_and_error(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut sq) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        s += v;
        sq += v * v;
    }
    let m = s / n;
    let var = ((sq / n - m * m) * n / (n - 1.0)).max(0.0);
    (m, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matched_sample_has_exact_moments() {
        let mut p = unit_pairs(3, 7, 5000);
        moment_match(&mut p);
        let n = p.len() as f64;
        let m: (f64, f64) = p.iter().fold((0.0, 0.0), |a, q| (a.0 + q.0, a.1 + q.1));
        assert!(m.0.abs() / n < 1e-15 && m.1.abs() / n < 1e-15);
        let sww = p.iter().map(|q| q.0 * q.0).sum::<f64>() / n;
        let swj = p.iter().map(|q| q.0 * q.1).sum::<f64>() / n;
        let sjj = p.iter().map(|q| q.1 * q.1).sum::<f64>() / n;
        assert!((sww - 1.0).abs() < 1e-13);
        assert!((swj - 0.5).abs() < 1e-13);
        assert!((sjj - 1.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        assert_eq!(unit_pairs(1, 0, 10), unit_pairs(1, 0, 10));
        assert_ne!(unit_pairs(1, 0, 10), unit_pairs(1, 1, 10));
    }
}
