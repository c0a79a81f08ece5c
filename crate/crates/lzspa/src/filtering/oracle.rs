//! Exact Bayes filtering for a known first-order Markov source through a
//! known channel: the dynamic-programming oracle the universal filters are
//! measured against, plus the synthetic experiment that produces the data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{bayes_response, Channel, LossMatrix, Regime};
use crate::error::{Error, Result};
use crate::spa::Spa;
use crate::types::{Alphabet, Pmf, Symbol};

/// A first-order Markov source: `transition[i][j] = P(X_{t+1}=j | X_t=i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSource {
    pub transition: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

impl MarkovSource {
    pub fn new(transition: Vec<Vec<f64>>, initial: Vec<f64>) -> Result<Self> {
        let n = initial.len();
        if n < 2 || transition.len() != n {
            return Err(Error::NotMarkovSource);
        }
        for row in transition.iter().chain(std::iter::once(&initial)) {
            if row.len() != n {
                return Err(Error::NotMarkovSource);
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::NotMarkovSource);
            }
        }
        Ok(MarkovSource {
            transition,
            initial,
        })
    }

    /// Symmetric binary chain on {-1,+1} (encoded 0/1) with flip
    /// probability `p` and uniform start.
    pub fn symmetric_binary(p: f64) -> Self {
        MarkovSource {
            transition: vec![vec![1.0 - p, p], vec![p, 1.0 - p]],
            initial: vec![0.5, 0.5],
        }
    }

    pub fn num_states(&self) -> usize {
        self.initial.len()
    }

    /// One prediction step: belief over X_t to belief over X_{t+1}.
    fn predict(&self, belief: &[f64]) -> Vec<f64> {
        let n = self.num_states();
        let mut out = vec![0.0; n];
        for (i, &b) in belief.iter().enumerate() {
            for j in 0..n {
                out[j] += b * self.transition[i][j];
            }
        }
        out
    }
}

/// The exact sequential law of the observation process: an HMM filter over
/// the hidden chain, exposed through the SPA contract. Plugging this into
/// the mismatched estimators makes them coincide with the Bayes oracle.
#[derive(Debug, Clone)]
pub struct TrueLawSpa {
    source: MarkovSource,
    channel: Channel,
    alphabet: Alphabet,
}

impl TrueLawSpa {
    pub fn new(source: MarkovSource, channel: Channel) -> Result<Self> {
        if source.num_states() != channel.num_inputs() {
            return Err(Error::DimensionMismatch(
                "source states vs channel inputs".into(),
            ));
        }
        let alphabet = Alphabet::new(channel.num_outputs() as u32)?;
        Ok(TrueLawSpa {
            source,
            channel,
            alphabet,
        })
    }

    /// Posterior over X_t from the predictive belief and the observation.
    fn condition(&self, belief: &[f64], z: Symbol) -> Result<Vec<f64>> {
        let n = belief.len();
        let mut post: Vec<f64> = (0..n)
            .map(|x| self.channel.prob(x, z as usize) * belief[x])
            .collect();
        let sum: f64 = post.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::ZeroProbabilityObservation);
        }
        for p in post.iter_mut() {
            *p /= sum;
        }
        Ok(post)
    }

    /// In-place filter update: condition on z, then one chain step.
    /// Allocation-free for up to 16 hidden states.
    fn advance_belief(&self, belief: &mut [f64], z: Symbol) -> Result<()> {
        let n = belief.len();
        let mut sum = 0.0;
        for (x, b) in belief.iter_mut().enumerate() {
            *b *= self.channel.prob(x, z as usize);
            sum += *b;
        }
        if !(sum > 0.0) {
            return Err(Error::ZeroProbabilityObservation);
        }
        let mut next: smallvec::SmallVec<[f64; 16]> = smallvec::smallvec![0.0; n];
        for (x, &b) in belief.iter().enumerate() {
            let b = b / sum;
            for (j, slot) in next.iter_mut().enumerate() {
                *slot += b * self.source.transition[x][j];
            }
        }
        belief.copy_from_slice(&next);
        Ok(())
    }
}

impl Spa for TrueLawSpa {
    /// The predictive belief `P(X_t | z^{t-1})`.
    type State = Vec<f64>;

    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn initial_state(&self) -> Vec<f64> {
        self.source.initial.clone()
    }

    fn next_dist(&self, belief: &Vec<f64>) -> Pmf {
        let probs: Vec<f64> = (0..self.channel.num_outputs())
            .map(|z| {
                belief
                    .iter()
                    .enumerate()
                    .map(|(x, &b)| b * self.channel.prob(x, z))
                    .sum()
            })
            .collect();
        Pmf::from_weights(probs).expect("belief and channel rows are laws")
    }

    fn next_dist_into(&self, belief: &Vec<f64>, out: &mut [f64]) {
        for (z, slot) in out.iter_mut().enumerate() {
            *slot = belief
                .iter()
                .enumerate()
                .map(|(x, &b)| b * self.channel.prob(x, z))
                .sum();
        }
    }

    fn advance(&self, belief: &mut Vec<f64>, symbol: Symbol) -> Result<()> {
        self.alphabet.check(symbol)?;
        self.advance_belief(belief, symbol)
    }
}

/// Oracle decisions plus the exact posteriors they were taken from.
#[derive(Debug, Clone)]
pub struct OracleOutput {
    pub decisions: Vec<usize>,
    pub posteriors: Vec<Vec<f64>>,
}

/// The Bayes-optimal filter for a known Markov source and channel, by
/// exact dynamic programming over the hidden state:
///
/// - causal: forward filtering, posterior of X_t given z^t;
/// - delay d: forward to t-d, then d prediction steps through the chain;
/// - lookahead l: forward posterior smoothed by a backward pass over the
///   next l observations (truncated near the end of the stream).
pub fn dp_optimal_filter(
    source: &MarkovSource,
    channel: &Channel,
    loss: &LossMatrix,
    z_seq: &[Symbol],
    regime: Regime,
) -> Result<OracleOutput> {
    if source.num_states() != channel.num_inputs() {
        return Err(Error::DimensionMismatch(
            "source states vs channel inputs".into(),
        ));
    }
    let spa = TrueLawSpa::new(source.clone(), channel.clone())?;
    let n = z_seq.len();
    let num_x = source.num_states();

    // Forward pass: filtered[t] = P(X_t | z^t), predictive[t] = P(X_t | z^{t-1}).
    let mut predictive = Vec::with_capacity(n);
    let mut filtered = Vec::with_capacity(n);
    let mut belief = source.initial.clone();
    for &z in z_seq {
        predictive.push(belief.clone());
        let post = spa.condition(&belief, z)?;
        filtered.push(post.clone());
        belief = source.predict(&post);
    }

    let mut decisions = Vec::with_capacity(n);
    let mut posteriors = Vec::with_capacity(n);
    match regime {
        Regime::Causal => {
            for post in &filtered {
                decisions.push(bayes_response(post, loss));
                posteriors.push(post.clone());
            }
        }
        Regime::Delay { d } => {
            if d < 1 {
                return Err(Error::WindowTooLarge);
            }
            for t in 1..=n {
                // P(X_t | z^{t-d}): start from the filtered state at t-d
                // (or the prior when t <= d) and predict forward.
                let (mut post, steps) = if t > d {
                    (filtered[t - d - 1].clone(), d)
                } else {
                    (source.initial.clone(), t - 1)
                };
                for _ in 0..steps {
                    post = source.predict(&post);
                }
                decisions.push(bayes_response(&post, loss));
                posteriors.push(post);
            }
        }
        Regime::Lookahead { l } => {
            for t in 0..n {
                let avail = l.min(n - 1 - t);
                // beta[x] = P(z_{t+1..t+avail} | X_t = x), backward recursion.
                let mut beta = vec![1.0; num_x];
                for j in (1..=avail).rev() {
                    let z = z_seq[t + j] as usize;
                    let mut next = vec![0.0; num_x];
                    for x in 0..num_x {
                        let mut acc = 0.0;
                        for (x2, &b) in beta.iter().enumerate() {
                            acc += source.transition[x][x2] * channel.prob(x2, z) * b;
                        }
                        next[x] = acc;
                    }
                    beta = next;
                }
                let mut post: Vec<f64> = (0..num_x).map(|x| filtered[t][x] * beta[x]).collect();
                let sum: f64 = post.iter().sum();
                if !(sum > 0.0) {
                    return Err(Error::ZeroProbabilityObservation);
                }
                for p in post.iter_mut() {
                    *p /= sum;
                }
                decisions.push(bayes_response(&post, loss));
                posteriors.push(post);
            }
        }
    }
    Ok(OracleOutput {
        decisions,
        posteriors,
    })
}

/// The symmetric-binary-Markov experiment: X in {-1,+1} with flip
/// probability `p`, additive iid noise N in {-1,+1}, Z = X + N encoded as
/// {0,1,2} for {-2,0,+2}. Returns state indices for X (0 for -1, 1 for +1)
/// and the observed Z sequence.
pub fn simulate_markov_channel(p: f64, n: usize, seed: u64) -> (Vec<Symbol>, Vec<Symbol>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut cur: Symbol = rng.random_range(0..2);
    for _ in 0..n {
        x.push(cur);
        let noise_up = rng.random::<bool>();
        let obs = match (cur, noise_up) {
            (0, false) => 0, // -1 + -1 = -2
            (0, true) => 1,  // -1 + 1 = 0
            (1, false) => 1, // 1 + -1 = 0
            (1, true) => 2,  // 1 + 1 = 2
            _ => unreachable!(),
        };
        z.push(obs);
        if rng.random::<f64>() < p {
            cur ^= 1;
        }
    }
    (x, z)
}

/// Channel of the experiment: rows X = -1, +1; columns Z = -2, 0, +2.
pub fn markov_experiment_channel() -> Channel {
    Channel::new(&[vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5]])
        .expect("experiment channel is well formed")
}

/// Squared loss on the +-1 embedding, with estimates in {-1, 0, +1} so the
/// filter can abstain at an uninformative posterior.
pub fn markov_experiment_loss() -> LossMatrix {
    LossMatrix::squared(&[-1.0, 1.0], &[-1.0, 0.0, 1.0]).expect("squared loss is valid")
}
