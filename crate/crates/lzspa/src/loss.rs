//! Log loss and the empirical Markov-entropy oracles `mu_0`, `mu_k`.
//!
//! All logarithms are base 2, so losses are in bits.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::spa::Spa;
use crate::types::Sequence;

/// Cumulative and per-symbol log loss of a SPA on a sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLossReport {
    pub total_bits: f64,
    pub per_symbol_bits: f64,
    pub len: usize,
}

impl LogLossReport {
    pub fn from_total(total_bits: f64, len: usize) -> Self {
        LogLossReport {
            total_bits,
            per_symbol_bits: total_bits / len as f64,
            len,
        }
    }
}

/// Log loss of `spa` on `seq`, evaluated from the initial state. The model
/// is never mutated; a zero-probability step yields `+inf`, not an error.
pub fn log_loss<S: Spa>(spa: &S, seq: &Sequence) -> Result<LogLossReport> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    spa.alphabet().check_matches(seq.alphabet())?;
    let mut state = spa.initial_state();
    let mut total = 0.0f64;
    for &sym in seq.tokens() {
        let p = spa.next_dist(&state).prob(sym);
        total += if p > 0.0 { -p.log2() } else { f64::INFINITY };
        spa.advance(&mut state, sym)?;
    }
    Ok(LogLossReport::from_total(total, seq.len()))
}

/// Entropy in bits of a histogram of non-negative counts.
pub fn histogram_entropy(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum()
}

/// `mu_0`: the zero-order empirical entropy of the sequence, attained by the
/// iid SPA matching the empirical histogram.
pub fn empirical_entropy_mu0(seq: &Sequence) -> Result<f64> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(histogram_entropy(&seq.histogram()))
}

/// `mu_k`: the best per-symbol log loss attainable by any k-order Markov
/// assignment on this one sequence. Timesteps `t > k` are partitioned by
/// their length-k context and each bucket contributes its zero-order
/// entropy; the first k symbols contribute zero loss. Normalization is by
/// `n`, so `mu_k(seq, 0) == mu_0(seq)`.
///
/// This brute-force enumeration is the universality oracle the LZ78
/// transform is tested against.
pub fn markov_entropy_mu_k(seq: &Sequence, k: usize) -> Result<f64> {
    let n = seq.len();
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    if k >= n {
        return Err(Error::OrderTooLarge { k, n });
    }
    if k == 0 {
        return empirical_entropy_mu0(seq);
    }
    let tokens = seq.tokens();
    let a = seq.alphabet().len();
    let mut buckets: HashMap<&[u32], Vec<u64>> = HashMap::new();
    for t in k..n {
        let ctx = &tokens[t - k..t];
        buckets
            .entry(ctx)
            .or_insert_with(|| vec![0u64; a])
            [tokens[t] as usize] += 1;
    }
    let mut total_bits = 0.0;
    for counts in buckets.values() {
        let m: u64 = counts.iter().sum();
        total_bits += m as f64 * histogram_entropy(counts);
    }
    Ok(total_bits / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spa::{DirichletSpa, UniformSpa};
    use crate::types::Alphabet;

    fn bin() -> Alphabet {
        Alphabet::new(2).unwrap()
    }

    fn seq(digits: &str) -> Sequence {
        Sequence::from_digits(bin(), digits).unwrap()
    }

    #[test]
    fn uniform_spa_loses_one_bit_per_binary_symbol() {
        let spa = UniformSpa::new(bin());
        let r = log_loss(&spa, &seq("01101011")).unwrap();
        assert!((r.per_symbol_bits - 1.0).abs() < 1e-12);
        assert!((r.total_bits - 8.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_half_on_two_zeros() {
        // step 1: q(0) = 0.5; step 2: q(0) = 1.5/2 = 0.75
        let spa = DirichletSpa::new(bin(), 0.5).unwrap();
        let r = log_loss(&spa, &seq("00")).unwrap();
        let expected = 1.0 + (1.0f64 / 0.75).log2();
        assert!((r.total_bits - expected).abs() < 1e-12);
        assert!((expected - 1.415).abs() < 1e-3);
    }

    #[test]
    fn perfect_predictor_has_zero_loss() {
        // A frozen point-mass SPA on a constant sequence.
        struct Constant;
        impl Spa for Constant {
            type State = ();
            fn alphabet(&self) -> Alphabet {
                Alphabet::new(2).unwrap()
            }
            fn initial_state(&self) {}
            fn next_dist(&self, _: &()) -> crate::types::Pmf {
                crate::types::Pmf::new(vec![1.0, 0.0]).unwrap()
            }
            fn advance(&self, _: &mut (), _: u32) -> crate::error::Result<()> {
                Ok(())
            }
        }
        let r = log_loss(&Constant, &seq("0000")).unwrap();
        assert_eq!(r.total_bits, 0.0);

        // The same SPA on a symbol it assigns zero mass reports +inf.
        let r = log_loss(&Constant, &seq("0010")).unwrap();
        assert!(r.total_bits.is_infinite());
    }

    #[test]
    fn mu0_examples() {
        assert_eq!(empirical_entropy_mu0(&seq("0000")).unwrap(), 0.0);
        assert!((empirical_entropy_mu0(&seq("0011")).unwrap() - 1.0).abs() < 1e-12);
        // 5 zeros, 3 ones -> H(5/8)
        let h = empirical_entropy_mu0(&seq("00011001")).unwrap();
        let expected = {
            let p: f64 = 5.0 / 8.0;
            -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
        };
        assert!((h - expected).abs() < 1e-12);
        assert!((h - 0.9544).abs() < 1e-4);
    }

    #[test]
    fn mu_k_matches_mu0_at_k_zero() {
        let s = seq("00011001");
        assert_eq!(
            markov_entropy_mu_k(&s, 0).unwrap(),
            empirical_entropy_mu0(&s).unwrap()
        );
    }

    #[test]
    fn alternating_sequence_is_deterministic_given_one_symbol() {
        let s = seq("0101010101");
        assert_eq!(markov_entropy_mu_k(&s, 1).unwrap(), 0.0);
    }

    #[test]
    fn mu1_of_worked_sequence() {
        // Contexts of "00011001": after 0 -> (0,0,1,0,1); after 1 -> (1,0).
        // mu_1 = (5*H(3/5) + 2*1) / 8.
        let s = seq("00011001");
        let h35 = {
            let p: f64 = 3.0 / 5.0;
            -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
        };
        let expected = (5.0 * h35 + 2.0) / 8.0;
        let got = markov_entropy_mu_k(&s, 1).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.8568).abs() < 1e-4);
    }

    #[test]
    fn mu_k_rejects_large_k() {
        let s = seq("0011");
        assert!(markov_entropy_mu_k(&s, 4).is_err());
        assert!(markov_entropy_mu_k(&s, 3).is_ok());
    }

    #[test]
    fn static_empirical_spa_attains_n_mu0() {
        // An iid SPA fixed at the final empirical histogram achieves
        // exactly n * mu_0.
        struct Fixed(crate::types::Pmf);
        impl Spa for Fixed {
            type State = ();
            fn alphabet(&self) -> Alphabet {
                Alphabet::new(2).unwrap()
            }
            fn initial_state(&self) {}
            fn next_dist(&self, _: &()) -> crate::types::Pmf {
                self.0.clone()
            }
            fn advance(&self, _: &mut (), _: u32) -> crate::error::Result<()> {
                Ok(())
            }
        }
        let s = seq("00011001");
        let hist = s.histogram();
        let n: u64 = hist.iter().sum();
        let pmf = crate::types::Pmf::new(
            hist.iter().map(|&c| c as f64 / n as f64).collect(),
        )
        .unwrap();
        let r = log_loss(&Fixed(pmf), &s).unwrap();
        let mu0 = empirical_entropy_mu0(&s).unwrap();
        assert!((r.total_bits - 8.0 * mu0).abs() < 1e-9);
    }
}
