//! Alphabets, token sequences, and probability vectors.

use crate::error::{Error, Result};

/// Index of a symbol within an alphabet. Symbols are dense integers
/// `0..A-1`; mapping from text or bytes happens at the I/O boundary.
pub type Symbol = u32;

/// A finite alphabet of size `A >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Alphabet(u32);

impl Alphabet {
    pub fn new(size: u32) -> Result<Self> {
        if size < 2 {
            return Err(Error::AlphabetTooSmall(size));
        }
        Ok(Alphabet(size))
    }

    /// Byte alphabet, `A = 256`.
    pub fn bytes() -> Self {
        Alphabet(256)
    }

    pub fn size(&self) -> u32 {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0 as usize
    }

    pub fn is_empty(&self) -> bool {
        false // size is at least 2 by construction
    }

    pub fn contains(&self, symbol: Symbol) -> bool {
        symbol < self.0
    }

    pub fn check(&self, symbol: Symbol) -> Result<()> {
        if self.contains(symbol) {
            Ok(())
        } else {
            Err(Error::SymbolOutOfRange {
                symbol,
                alphabet_size: self.0,
            })
        }
    }

    pub fn check_matches(&self, other: Alphabet) -> Result<()> {
        if *self == other {
            Ok(())
        } else {
            Err(Error::AlphabetMismatch {
                expected: self.0,
                got: other.0,
            })
        }
    }

    /// `log2 A`, the per-symbol cost of the uniform assignment.
    pub fn log2_size(&self) -> f64 {
        (self.0 as f64).log2()
    }
}

/// An ordered sequence of symbols over a fixed alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    alphabet: Alphabet,
    tokens: Vec<Symbol>,
}

impl Sequence {
    pub fn new(alphabet: Alphabet, tokens: Vec<Symbol>) -> Result<Self> {
        for &t in &tokens {
            alphabet.check(t)?;
        }
        Ok(Sequence { alphabet, tokens })
    }

    pub fn empty(alphabet: Alphabet) -> Self {
        Sequence {
            alphabet,
            tokens: Vec::new(),
        }
    }

    /// Wraps raw bytes as a sequence over the byte alphabet.
    pub fn from_bytes(data: &[u8]) -> Self {
        Sequence {
            alphabet: Alphabet::bytes(),
            tokens: data.iter().map(|&b| b as Symbol).collect(),
        }
    }

    /// Convenience for tests: parses a string of ASCII digits over `{0..A-1}`.
    pub fn from_digits(alphabet: Alphabet, digits: &str) -> Result<Self> {
        let tokens = digits
            .chars()
            .map(|c| c.to_digit(10).map(|d| d as Symbol))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Malformed("non-digit character".into()))?;
        Sequence::new(alphabet, tokens)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Symbol] {
        &self.tokens
    }

    pub fn push(&mut self, symbol: Symbol) -> Result<()> {
        self.alphabet.check(symbol)?;
        self.tokens.push(symbol);
        Ok(())
    }

    /// The segment `x_k^l` with 1-based inclusive endpoints.
    pub fn segment(&self, k: usize, l: usize) -> &[Symbol] {
        &self.tokens[k - 1..l]
    }

    /// The prefix `x^n`.
    pub fn prefix(&self, n: usize) -> &[Symbol] {
        &self.tokens[..n]
    }

    /// Concatenation `x ⌢ y`.
    pub fn concat(&self, other: &Sequence) -> Result<Sequence> {
        self.alphabet.check_matches(other.alphabet)?;
        let mut tokens = self.tokens.clone();
        tokens.extend_from_slice(&other.tokens);
        Ok(Sequence {
            alphabet: self.alphabet,
            tokens,
        })
    }

    /// Histogram of symbol occurrences, indexed by symbol.
    pub fn histogram(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.alphabet.len()];
        for &t in &self.tokens {
            counts[t as usize] += 1;
        }
        counts
    }
}

/// A probability mass function over an alphabet: non-negative entries
/// summing to one within `PMF_SUM_TOLERANCE`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf(Vec<f64>);

pub const PMF_SUM_TOLERANCE: f64 = 1e-9;

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidPmf(format!(
                "need at least 2 entries, got {}",
                probs.len()
            )));
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !(p >= 0.0) {
                return Err(Error::InvalidPmf(format!("negative or NaN entry {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PMF_SUM_TOLERANCE {
            return Err(Error::InvalidPmf(format!("entries sum to {sum}")));
        }
        Ok(Pmf(probs))
    }

    /// Normalizes a vector of non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::InvalidPmf(format!("weights sum to {sum}")));
        }
        Pmf::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let p = 1.0 / alphabet.size() as f64;
        Pmf(vec![p; alphabet.len()])
    }

    /// Point mass on one symbol.
    pub fn delta(alphabet: Alphabet, symbol: Symbol) -> Result<Self> {
        alphabet.check(symbol)?;
        let mut v = vec![0.0; alphabet.len()];
        v[symbol as usize] = 1.0;
        Ok(Pmf(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least 2 entries by construction
    }

    pub fn prob(&self, symbol: Symbol) -> f64 {
        self.0[symbol as usize]
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.0
    }

    /// Smallest-index maximizer.
    pub fn argmax(&self) -> Symbol {
        let mut best = 0usize;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best as Symbol
    }

    /// Samples an index by inverse-CDF on a uniform draw in `[0, 1)`.
    pub fn sample(&self, u: f64) -> Symbol {
        let mut acc = 0.0;
        for (i, &p) in self.0.iter().enumerate() {
            acc += p;
            if u < acc {
                return i as Symbol;
            }
        }
        (self.0.len() - 1) as Symbol
    }

    pub fn l1_distance(&self, other: &Pmf) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}
