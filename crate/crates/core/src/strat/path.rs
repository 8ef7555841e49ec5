use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::index::{words_up_to_weight, MultiIndex};
use crate::error::{BsdeError, Result};

/// Continuous piecewise-linear path in `ℝ^d` started at zero, plus the time
/// channel `ω⁰(s) = s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPath {
    dim: usize,
    breakpoints: Vec<f64>,
    /// `increments[k][j]`: change of channel `j + 1` over segment `k`.
    increments: Vec<Vec<f64>>,
}

impl PiecewiseLinearPath {
    pub fn new(start: f64, durations: &[f64], increments: Vec<Vec<f64>>) -> Result<Self> {
        if durations.len() != increments.len() || durations.is_empty() {
            return Err(BsdeError::InvalidArgument("one increment vector per segment required".into()));
        }
        let dim = increments[0].len();
        if dim == 0 || increments.iter().any(|v| v.len() != dim) {
            return Err(BsdeError::InvalidArgument("inconsistent path dimension".into()));
        }
        if durations.iter().any(|&h| !(h > 0.0)) {
            return Err(BsdeError::InvalidArgument("segment durations must be positive".into()));
        }
        let mut breakpoints = Vec::with_capacity(durations.len() + 1);
        breakpoints.push(start);
        let mut t = start;
        for &h in durations {
            t += h;
            breakpoints.push(t);
        }
        Ok(Self { dim, breakpoints, increments })
    }

    /// Single segment over `[start, start + duration]` ending at `endpoint`.
    pub fn linear(start: f64, duration: f64, endpoint: Vec<f64>) -> Result<Self> {
        Self::new(start, &[duration], vec![endpoint])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> usize {
        self.increments.len()
    }

    /// Value of channel `j` (0 is time) at `t`.
    pub fn value(&self, j: usize, t: f64) -> f64 {
        if j == 0 {
            return t;
        }
        let mut acc = 0.0;
        for (k, inc) in self.increments.iter().enumerate() {
            let (a, b) = (self.breakpoints[k], self.breakpoints[k + 1]);
            if t >= b {
                acc += inc[j - 1];
            } else {
                if t > a {
                    acc += inc[j - 1] * (t - a) / (b - a);
                }
                break;
            }
        }
        acc
    }

    /// Endpoint of the spatial channels.
    pub fn endpoint(&self) -> Vec<f64> {
        (1..=self.dim).map(|j| self.increments.iter().map(|v| v[j - 1]).sum()).collect()
    }
}

/// `J_α` of the path over `[s, t]`, evaluated exactly.
///
/// On each segment the partial integrals `J_{α_1..α_l}` are polynomials in the
/// local time; they are carried as coefficient vectors and integrated against
/// the constant slope of the next letter.
pub fn pathwise_integral(alpha: &MultiIndex, path: &PiecewiseLinearPath, s: f64, t: f64) -> Result<f64> {
    if let Some(l) = alpha.max_letter() {
        if l as usize > path.dim() {
            return Err(BsdeError::InvalidArgument(format!("letter {l} exceeds path dimension {}", path.dim())));
        }
    }
    let tol = 1e-12 * (1.0 + path.end().abs());
    if s > t || s < path.start() - tol || t > path.end() + tol {
        return Err(BsdeError::InvalidArgument(format!(
            "interval [{s}, {t}] outside path support [{}, {}]",
            path.start(),
            path.end()
        )));
    }
    let letters = alpha.letters();
    let k = letters.len();
    // vals[l] = J_{α_1..α_l} accumulated up to the current time.
    let mut vals = vec![0.0; k + 1];
    vals[0] = 1.0;
    let mut poly: Vec<Vec<f64>> = (0..=k).map(|l| vec![0.0; l + 1]).collect();
    for seg in 0..path.segments() {
        let (a, b) = (path.breakpoints[seg], path.breakpoints[seg + 1]);
        let lo = a.max(s);
        let hi = b.min(t);
        if hi <= lo {
            continue;
        }
        let h = hi - lo;
        let dur = b - a;
        let slope = |letter: u8| -> f64 {
            if letter == 0 {
                1.0
            } else {
                path.increments[seg][letter as usize - 1] / dur
            }
        };
        poly[0][0] = 1.0;
        for l in 1..=k {
            let c = slope(letters[l - 1]);
            let (prev, cur) = poly.split_at_mut(l);
            let prev = &prev[l - 1];
            let cur = &mut cur[0];
            cur[0] = vals[l];
            for p in 0..l {
                cur[p + 1] = c * prev[p] / (p + 1) as f64;
            }
        }
        for l in 1..=k {
            let p = &poly[l];
            let mut acc = 0.0;
            for &coef in p.iter().rev() {
                acc = acc * h + coef;
            }
            vals[l] = acc;
        }
    }
    Ok(vals[k])
}

/// All words up to a weight, with precomputed prefix links for signature updates.
#[derive(Debug, Clone)]
pub struct WordBasis {
    dim: usize,
    words: Vec<MultiIndex>,
    /// For word `w` and suffix length `k`, index of the prefix of length `|w| - k`.
    prefixes: Vec<Vec<usize>>,
}

impl WordBasis {
    pub fn new(max_weight: usize, dim: usize) -> Result<Self> {
        let words = words_up_to_weight(max_weight, dim)?;
        let index: std::collections::HashMap<MultiIndex, usize> =
            words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        let prefixes = words
            .iter()
            .map(|w| {
                (0..=w.length())
                    .map(|k| index[&MultiIndex::new(w.letters()[..w.length() - k].to_vec())])
                    .collect()
            })
            .collect();
        Ok(Self { dim, words, prefixes })
    }

    pub fn words(&self) -> &[MultiIndex] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.words.iter().position(|w| w == alpha)
    }

    pub fn identity(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.words.len()];
        s[0] = 1.0;
        s
    }

    /// Extends a truncated signature by one linear segment of duration `h` with
    /// spatial increments `inc` (Chen's identity).
    pub fn append_segment(&self, sig: &mut [f64], h: f64, inc: &[f64]) {
        debug_assert_eq!(inc.len(), self.dim);
        // Longest words first so prefixes are still the old values.
        for wi in (1..self.words.len()).rev() {
            let letters = self.words[wi].letters();
            let mut factor = 1.0;
            let mut acc = 0.0;
            for k in 1..=letters.len() {
                let l = letters[letters.len() - k];
                factor *= if l == 0 { h } else { inc[l as usize - 1] } / k as f64;
                acc += sig[self.prefixes[wi][k]] * factor;
            }
            sig[wi] += acc;
        }
    }

    pub fn signature(&self, path: &PiecewiseLinearPath) -> Vec<f64> {
        let mut sig = self.identity();
        for seg in 0..path.segments() {
            let h = path.breakpoints[seg + 1] - path.breakpoints[seg];
            self.append_segment(&mut sig, h, &path.increments[seg]);
        }
        sig
    }
}

/// Sample mean and standard error per basis word.
#[derive(Debug, Clone)]
pub struct MomentEstimate {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// Monte Carlo moments of iterated integrals of Brownian motion on `[0, t]`.
///
/// Each path is the linear interpolation of `fine_steps` Gaussian increments;
/// the interpolation bias is first order in the step, so the estimator
/// combines `2 S(fine) - S(fine / 2)` on the same draws.
pub fn monte_carlo_moments(
    basis: &WordBasis,
    t: f64,
    paths: usize,
    fine_steps: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    if fine_steps < 2 || !fine_steps.is_multiple_of(2) || paths < 2 || !(t > 0.0) {
        return Err(BsdeError::InvalidArgument("need t > 0, paths >= 2 and an even step count".into()));
    }
    let d = basis.dim;
    let h = t / fine_steps as f64;
    let sqrt_h = h.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nw = basis.len();
    let mut sum = vec![0.0; nw];
    let mut sum_sq = vec![0.0; nw];
    let mut fine = vec![0.0; nw];
    let mut coarse = vec![0.0; nw];
    let mut pair = vec![0.0; d];
    let mut inc = vec![0.0; d];
    for _ in 0..paths {
        fine.copy_from_slice(&basis.identity());
        coarse.copy_from_slice(&fine);
        for step in 0..fine_steps {
            for x in inc.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x = sqrt_h * z;
            }
            basis.append_segment(&mut fine, h, &inc);
            if step % 2 == 0 {
                pair.copy_from_slice(&inc);
            } else {
                for (p, x) in pair.iter_mut().zip(&inc) {
                    *p += x;
                }
                basis.append_segment(&mut coarse, 2.0 * h, &pair);
            }
        }
        for w in 0..nw {
            let v = 2.0 * fine[w] - coarse[w];
            sum[w] += v;
            sum_sq[w] += v * v;
        }
    }
    let n = paths as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_error = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| ((sq / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt())
        .collect();
    Ok(MomentEstimate { mean, std_error })
}
