//! Sequential probability assignments: the model contract plus the two
//! built-in instances (Dirichlet mixture and uniform).
//!
//! A SPA is split into an immutable model (parameters such as gamma) and a
//! cheap, cloneable [`Spa::State`] carrying everything that evolves along a
//! sequence. Snapshot/restore of an evaluation is therefore just a state
//! clone, and evaluating a sequence never mutates the model itself.

use crate::error::{Error, Result};
use crate::types::{Alphabet, Pmf, Symbol};

/// The sequential-model contract: given the state reached after a prefix,
/// produce a distribution for the next symbol, then advance.
pub trait Spa {
    /// Traversal state; cloning it is the snapshot mechanism.
    type State: Clone;

    fn alphabet(&self) -> Alphabet;

    /// State before any symbol has been seen.
    fn initial_state(&self) -> Self::State;

    /// Distribution of the next symbol given the current state.
    fn next_dist(&self, state: &Self::State) -> Pmf;

    /// Writes the next-symbol probabilities into `out` (length A).
    /// Implementations override this to avoid the allocation in hot loops;
    /// the default just copies from [`Spa::next_dist`].
    fn next_dist_into(&self, state: &Self::State, out: &mut [f64]) {
        out.copy_from_slice(self.next_dist(state).probs());
    }

    /// Advance the state by one observed symbol, treating model parameters
    /// as fixed. This is the read-only evaluation path.
    fn advance(&self, state: &mut Self::State, symbol: Symbol) -> Result<()>;

    /// Observe a symbol for real. Adaptive models override this to also
    /// update their parameters; the default just advances the state.
    fn observe(&mut self, state: &mut Self::State, symbol: Symbol) -> Result<()> {
        self.advance(state, symbol)
    }
}

/// Running symbol counts; the entire state of a Dirichlet SPA.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CountState {
    counts: Vec<u64>,
    total: u64,
}

impl CountState {
    pub fn new(alphabet: Alphabet) -> Self {
        CountState {
            counts: vec![0; alphabet.len()],
            total: 0,
        }
    }

    pub fn count(&self, symbol: Symbol) -> u64 {
        self.counts[symbol as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn record(&mut self, symbol: Symbol) {
        self.counts[symbol as usize] += 1;
        self.total += 1;
    }

    /// Batch increment; equivalent to `n` single observations of `symbol`.
    pub fn record_n(&mut self, symbol: Symbol, n: u64) {
        self.counts[symbol as usize] += n;
        self.total += n;
    }
}

/// The Dirichlet(gamma) mixture SPA: an additive perturbation of the
/// empirical distribution,
///
/// ```text
/// q(a | x^{t-1}) = (N(a | x^{t-1}) + gamma) / (t - 1 + A * gamma)
/// ```
///
/// Gamma must be strictly positive, or the assignment can incur infinite
/// log loss on a symbol never seen before.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletSpa {
    alphabet: Alphabet,
    gamma: f64,
}

impl DirichletSpa {
    pub fn new(alphabet: Alphabet, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidGamma(gamma));
        }
        Ok(DirichletSpa { alphabet, gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The mixture distribution for explicit counts. Shared with the
    /// per-node evaluation inside the LZ78 transform.
    pub fn dist_for_counts(&self, total: u64, count_of: impl Fn(Symbol) -> u64) -> Pmf {
        let a = self.alphabet.size() as f64;
        let denom = total as f64 + a * self.gamma;
        let probs = (0..self.alphabet.size())
            .map(|s| (count_of(s) as f64 + self.gamma) / denom)
            .collect();
        // Denominator is >= A*gamma > 0, so this is always a valid PMF.
        Pmf::new(probs).expect("dirichlet mixture is always on the simplex")
    }
}

impl Spa for DirichletSpa {
    type State = CountState;

    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn initial_state(&self) -> CountState {
        CountState::new(self.alphabet)
    }

    fn next_dist(&self, state: &CountState) -> Pmf {
        self.dist_for_counts(state.total(), |s| state.count(s))
    }

    fn advance(&self, state: &mut CountState, symbol: Symbol) -> Result<()> {
        self.alphabet.check(symbol)?;
        state.record(symbol);
        Ok(())
    }
}

/// The uniform SPA: assigns `1/A` to every symbol and ignores history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformSpa {
    alphabet: Alphabet,
}

impl UniformSpa {
    pub fn new(alphabet: Alphabet) -> Self {
        UniformSpa { alphabet }
    }
}

impl Spa for UniformSpa {
    type State = ();

    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn initial_state(&self) {}

    fn next_dist(&self, _state: &()) -> Pmf {
        Pmf::uniform(self.alphabet)
    }

    fn advance(&self, _state: &mut (), symbol: Symbol) -> Result<()> {
        self.alphabet.check(symbol)
    }
}
