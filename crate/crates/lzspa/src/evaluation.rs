//! Distribution-level evaluation: exhaustive KL divergence between a known
//! source and a trained model, 1-D Wasserstein distance between histograms,
//! and the training-set-size convergence experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::spa::Spa;
use crate::transform::Lz78Spa;
use crate::types::{Alphabet, Pmf, Sequence, Symbol};

/// A known source law: iid or first-order Markov.
#[derive(Debug, Clone)]
pub enum SourceSpec {
    Iid { pmf: Pmf },
    Markov1 { transition: Vec<Pmf>, initial: Pmf },
}

impl SourceSpec {
    pub fn iid(pmf: Pmf) -> Self {
        SourceSpec::Iid { pmf }
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        Ok(SourceSpec::Iid {
            pmf: Pmf::new(vec![1.0 - p, p])?,
        })
    }

    pub fn alphabet(&self) -> Result<Alphabet> {
        let size = match self {
            SourceSpec::Iid { pmf } => pmf.len(),
            SourceSpec::Markov1 { initial, .. } => initial.len(),
        };
        Alphabet::new(size as u32)
    }

    pub fn validate(&self) -> Result<()> {
        if let SourceSpec::Markov1 {
            transition,
            initial,
        } = self
        {
            if transition.len() != initial.len() {
                return Err(Error::DimensionMismatch(
                    "transition rows vs alphabet".into(),
                ));
            }
            for row in transition {
                if row.len() != initial.len() {
                    return Err(Error::DimensionMismatch("ragged transition".into()));
                }
            }
        }
        Ok(())
    }

    /// Probability of a whole sequence under the source.
    pub fn sequence_prob(&self, tokens: &[Symbol]) -> f64 {
        match self {
            SourceSpec::Iid { pmf } => tokens.iter().map(|&t| pmf.prob(t)).product(),
            SourceSpec::Markov1 {
                transition,
                initial,
            } => {
                let mut p = 1.0;
                let mut prev: Option<Symbol> = None;
                for &t in tokens {
                    p *= match prev {
                        None => initial.prob(t),
                        Some(q) => transition[q as usize].prob(t),
                    };
                    prev = Some(t);
                }
                p
            }
        }
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Sequence> {
        let alphabet = self.alphabet()?;
        let mut tokens = Vec::with_capacity(n);
        match self {
            SourceSpec::Iid { pmf } => {
                for _ in 0..n {
                    tokens.push(pmf.sample(rng.random::<f64>()));
                }
            }
            SourceSpec::Markov1 {
                transition,
                initial,
            } => {
                let mut prev: Option<Symbol> = None;
                for _ in 0..n {
                    let pmf = match prev {
                        None => initial,
                        Some(q) => &transition[q as usize],
                    };
                    let t = pmf.sample(rng.random::<f64>());
                    tokens.push(t);
                    prev = Some(t);
                }
            }
        }
        Sequence::new(alphabet, tokens)
    }
}

/// Number of sequences enumerable before exhaustive KL is refused.
pub const MAX_ENUMERATION_STATES: f64 = (1u64 << 20) as f64;

/// Exhaustive `D(P_{X^n} || Q_{X^n})` in bits: enumerates every length-n
/// sequence with positive source probability and scores it under the model
/// by frozen traversal from the initial state. Requires `A^n <= 2^20`.
pub fn exact_kl_bits<S: Spa>(source: &SourceSpec, model: &S, n: usize) -> Result<f64> {
    source.validate()?;
    let alphabet = source.alphabet()?;
    alphabet.check_matches(model.alphabet())?;
    let states = (alphabet.size() as f64).powi(n as i32);
    if states > MAX_ENUMERATION_STATES {
        return Err(Error::StateSpaceTooLarge(states));
    }
    let a = alphabet.size();
    let mut tokens = vec![0 as Symbol; n];
    let mut kl_bits = 0.0;
    loop {
        let p = source.sequence_prob(&tokens);
        if p > 0.0 {
            let mut state = model.initial_state();
            let mut q_log2 = 0.0;
            for &t in &tokens {
                let q = model.next_dist(&state).prob(t);
                if q <= 0.0 {
                    q_log2 = f64::NEG_INFINITY;
                    break;
                }
                q_log2 += q.log2();
                model.advance(&mut state, t)?;
            }
            kl_bits += p * (p.log2() - q_log2);
        }
        // Odometer over A^n.
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(kl_bits.max(0.0));
            }
            i -= 1;
            tokens[i] += 1;
            if tokens[i] < a {
                break;
            }
            tokens[i] = 0;
        }
    }
}

/// 1-D Wasserstein distance between two histograms on the same ordered
/// alphabet with unit ground metric: the L1 distance between their CDFs.
/// Histograms are normalized to probability vectors first.
pub fn wasserstein_1d(hist_a: &[f64], hist_b: &[f64]) -> Result<f64> {
    if hist_a.len() != hist_b.len() {
        return Err(Error::HistogramLengthMismatch {
            a: hist_a.len(),
            b: hist_b.len(),
        });
    }
    let sum_a: f64 = hist_a.iter().sum();
    let sum_b: f64 = hist_b.iter().sum();
    if !(sum_a > 0.0) || !(sum_b > 0.0) {
        return Err(Error::InvalidPmf("empty histogram".into()));
    }
    let mut cdf_a = 0.0;
    let mut cdf_b = 0.0;
    let mut dist = 0.0;
    // The last CDF step contributes zero (both reach 1), so skip it.
    for i in 0..hist_a.len() - 1 {
        cdf_a += hist_a[i] / sum_a;
        cdf_b += hist_b[i] / sum_b;
        dist += (cdf_a - cdf_b).abs();
    }
    Ok(dist)
}

/// One grid point of the convergence experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub gamma: f64,
    pub m: usize,
    pub seed: u64,
    pub kl_bits: f64,
}

/// Trains a fresh model per (gamma, m, seed) on `m` iid draws of length
/// `n` from the source and reports the exhaustive KL of the frozen model.
/// An `m = 0` entry measures the untrained model.
pub fn convergence_experiment(
    source: &SourceSpec,
    gammas: &[f64],
    m_grid: &[usize],
    n: usize,
    seeds: &[u64],
) -> Result<Vec<ConvergenceRow>> {
    let alphabet = source.alphabet()?;
    let mut rows = Vec::with_capacity(gammas.len() * m_grid.len() * seeds.len());
    for &gamma in gammas {
        for &m in m_grid {
            for &seed in seeds {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let mut model = Lz78Spa::new_dirichlet(alphabet, gamma)?;
                for _ in 0..m {
                    let sample = source.sample(n, &mut rng)?;
                    model.train(&[sample], 1)?;
                }
                model.freeze();
                let kl_bits = exact_kl_bits(source, &model, n)?;
                rows.push(ConvergenceRow {
                    gamma,
                    m,
                    seed,
                    kl_bits,
                });
            }
        }
    }
    Ok(rows)
}

/// Median of a slice (midpoint convention for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
