//! Universal discrete filtering through a known memoryless channel.
//!
//! The clean symbol X passes through a DMC with matrix `pi[x][z] =
//! P(Z=z | X=x)`. Knowing only the law of the observed process Z (or a SPA
//! estimate of it) and the channel, the posterior over X given the
//! observation follows from the channel inversion map `F`, and decisions
//! are Bayes responses against a loss matrix. Causal, delayed, and
//! look-ahead information patterns reuse the same two ingredients.

pub mod oracle;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spa::Spa;
use crate::types::{Pmf, Symbol};

/// Numerical tolerance for the channel inversion identity.
const INVERSION_TOLERANCE: f64 = 1e-9;

/// A discrete memoryless channel with rows `pi[x][z] = P(Z=z | X=x)` and a
/// precomputed left inverse of `pi^T`, mapping laws of Z back to laws of X.
/// Requires full row rank (so `|A_X| <= |A_Z|`).
#[derive(Debug, Clone)]
pub struct Channel {
    pi: DMatrix<f64>,
    /// Left pseudo-inverse of `pi^T`: an |A_X| x |A_Z| matrix with
    /// `pinv_t * pi^T = I`.
    pinv_t: DMatrix<f64>,
    num_x: usize,
    num_z: usize,
}

impl Channel {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let num_x = rows.len();
        if num_x == 0 {
            return Err(Error::DimensionMismatch("channel has no rows".into()));
        }
        let num_z = rows[0].len();
        if num_z < num_x {
            return Err(Error::ChannelNotInvertible(format!(
                "need |A_Z| >= |A_X|, got {num_z} < {num_x}"
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != num_z {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has length {}, expected {num_z}",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for &p in row {
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(Error::ChannelRowNotPmf(i));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::ChannelRowNotPmf(i));
            }
        }
        let pi = DMatrix::from_fn(num_x, num_z, |x, z| rows[x][z]);
        // pinv(pi^T) = (pi pi^T)^{-1} pi, defined when pi has full row rank.
        let gram = &pi * pi.transpose();
        let gram_inv = gram.try_inverse().ok_or_else(|| {
            Error::ChannelNotInvertible("pi pi^T is singular (rank-deficient channel)".into())
        })?;
        let pinv_t = gram_inv * &pi;
        // Identity check: pinv_t * pi^T must be I within tolerance.
        let ident = &pinv_t * pi.transpose();
        for x in 0..num_x {
            for y in 0..num_x {
                let expect = if x == y { 1.0 } else { 0.0 };
                if (ident[(x, y)] - expect).abs() > INVERSION_TOLERANCE {
                    return Err(Error::ChannelNotInvertible(format!(
                        "inversion residual {:.3e} at ({x},{y})",
                        (ident[(x, y)] - expect).abs()
                    )));
                }
            }
        }
        Ok(Channel {
            pi,
            pinv_t,
            num_x,
            num_z,
        })
    }

    pub fn num_inputs(&self) -> usize {
        self.num_x
    }

    pub fn num_outputs(&self) -> usize {
        self.num_z
    }

    pub fn prob(&self, x: usize, z: usize) -> f64 {
        self.pi[(x, z)]
    }

    /// Largest-magnitude entry of the inverse map; the `C1` constant is
    /// this times |A_X|.
    pub fn inverse_max_abs(&self) -> f64 {
        self.pinv_t.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Applies the inverse map to a law on Z, floors negative residuals at
    /// zero, and renormalizes. Returns the clamped vector (a law on X) and
    /// the total clamped magnitude.
    pub fn invert_to_input_law(&self, p_z: &[f64]) -> Result<(Vec<f64>, f64)> {
        if p_z.len() != self.num_z {
            return Err(Error::DimensionMismatch(format!(
                "law on Z has length {}, expected {}",
                p_z.len(),
                self.num_z
            )));
        }
        let mut p_x = vec![0.0; self.num_x];
        for x in 0..self.num_x {
            let mut acc = 0.0;
            for z in 0..self.num_z {
                acc += self.pinv_t[(x, z)] * p_z[z];
            }
            p_x[x] = acc;
        }
        let mut clamped = 0.0;
        for v in p_x.iter_mut() {
            if *v < 0.0 {
                clamped += -*v;
                *v = 0.0;
            }
        }
        let sum: f64 = p_x.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::ZeroProbabilityObservation);
        }
        for v in p_x.iter_mut() {
            *v /= sum;
        }
        Ok((p_x, clamped))
    }

    /// The posterior map `F`: from the (estimated) marginal law of Z and an
    /// observed symbol z, the conditional law of X.
    ///
    /// Computes `pi[., z] .* (pinv(pi^T) p_Z)`, clamped to the simplex and
    /// normalized. Errors when the observed symbol has zero mass. A law
    /// whose clamped inversion makes the observation impossible (the
    /// estimate was badly wrong about z) falls back to the likelihood
    /// column alone, i.e. the posterior under a uniform input prior.
    pub fn posterior_given_observation(
        &self,
        p_z: &Pmf,
        z: Symbol,
    ) -> Result<(Vec<f64>, f64)> {
        if p_z.prob(z) <= 0.0 {
            return Err(Error::ZeroProbabilityObservation);
        }
        let (p_x, clamped) = self.invert_to_input_law(p_z.probs())?;
        let mut v: Vec<f64> = (0..self.num_x)
            .map(|x| self.pi[(x, z as usize)] * p_x[x])
            .collect();
        let mut sum: f64 = v.iter().sum();
        if !(sum > 0.0) {
            v = (0..self.num_x).map(|x| self.pi[(x, z as usize)]).collect();
            sum = v.iter().sum();
            if !(sum > 0.0) {
                return Err(Error::ZeroProbabilityObservation);
            }
        }
        for p in v.iter_mut() {
            *p /= sum;
        }
        Ok((v, clamped))
    }
}

/// A non-negative loss matrix `lambda[x][xhat]`; the estimate alphabet may
/// differ from the source alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    lambda: Vec<Vec<f64>>,
    max: f64,
}

impl LossMatrix {
    pub fn new(lambda: Vec<Vec<f64>>) -> Result<Self> {
        if lambda.is_empty() || lambda[0].is_empty() {
            return Err(Error::DimensionMismatch("empty loss matrix".into()));
        }
        let width = lambda[0].len();
        let mut max = 0.0f64;
        for row in &lambda {
            if row.len() != width {
                return Err(Error::DimensionMismatch("ragged loss matrix".into()));
            }
            for &v in row {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::NegativeLoss);
                }
                max = max.max(v);
            }
        }
        Ok(LossMatrix { lambda, max })
    }

    /// 0/1 loss on a square alphabet.
    pub fn hamming(n: usize) -> Self {
        let lambda = (0..n)
            .map(|x| (0..n).map(|y| if x == y { 0.0 } else { 1.0 }).collect())
            .collect();
        LossMatrix::new(lambda).expect("hamming loss is valid")
    }

    /// Squared loss between embeddings of the source and estimate alphabets.
    pub fn squared(source_values: &[f64], estimate_values: &[f64]) -> Result<Self> {
        let lambda = source_values
            .iter()
            .map(|&x| estimate_values.iter().map(|&e| (x - e) * (x - e)).collect())
            .collect();
        LossMatrix::new(lambda)
    }

    pub fn num_sources(&self) -> usize {
        self.lambda.len()
    }

    pub fn num_estimates(&self) -> usize {
        self.lambda[0].len()
    }

    pub fn loss(&self, x: usize, xhat: usize) -> f64 {
        self.lambda[x][xhat]
    }

    pub fn max_loss(&self) -> f64 {
        self.max
    }

    /// Expected loss of estimate `xhat` under a law on X.
    pub fn expected_loss(&self, p_x: &[f64], xhat: usize) -> f64 {
        p_x.iter()
            .enumerate()
            .map(|(x, &p)| p * self.lambda[x][xhat])
            .sum()
    }
}

/// The Bayes response: the estimate minimizing expected loss under `p_x`.
/// Ties break toward the lowest index.
pub fn bayes_response(p_x: &[f64], loss: &LossMatrix) -> usize {
    let mut best = 0usize;
    let mut best_val = f64::INFINITY;
    for xhat in 0..loss.num_estimates() {
        let v = loss.expected_loss(p_x, xhat);
        if v < best_val {
            best_val = v;
            best = xhat;
        }
    }
    best
}

/// Filter regimes: strictly causal, delayed by `d`, or with `l` symbols of
/// look-ahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Causal,
    Delay { d: usize },
    Lookahead { l: usize },
}

/// Output of a filtering pass.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    /// Estimate indices into the loss matrix's estimate alphabet.
    pub decisions: Vec<usize>,
    /// Total clamp magnitude from channel-inversion floors; near zero on
    /// well-conditioned channels.
    pub clamp_total: f64,
}

fn check_filter_dims<S: Spa>(spa: &S, channel: &Channel, loss: &LossMatrix) -> Result<()> {
    if spa.alphabet().len() != channel.num_outputs() {
        return Err(Error::DimensionMismatch(format!(
            "SPA alphabet {} vs channel outputs {}",
            spa.alphabet().len(),
            channel.num_outputs()
        )));
    }
    if loss.num_sources() != channel.num_inputs() {
        return Err(Error::DimensionMismatch(format!(
            "loss rows {} vs channel inputs {}",
            loss.num_sources(),
            channel.num_inputs()
        )));
    }
    Ok(())
}

/// Causal estimation: at each t, form the SPA's one-step law of Z_t, map it
/// through `F` with the observed Z_t, and answer with the Bayes response.
/// The SPA observes Z_t only after predicting it.
pub fn causal_filter<S: Spa>(
    spa: &mut S,
    channel: &Channel,
    loss: &LossMatrix,
    z_seq: &[Symbol],
) -> Result<FilterOutput> {
    check_filter_dims(spa, channel, loss)?;
    let mut state = spa.initial_state();
    let mut decisions = Vec::with_capacity(z_seq.len());
    let mut clamp_total = 0.0;
    for &z in z_seq {
        let dist = spa.next_dist(&state);
        let (post, clamped) = channel.posterior_given_observation(&dist, z)?;
        clamp_total += clamped;
        decisions.push(bayes_response(&post, loss));
        spa.observe(&mut state, z)?;
    }
    Ok(FilterOutput {
        decisions,
        clamp_total,
    })
}

fn sample_from(probs: &[f64], u: f64) -> Symbol {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as Symbol;
        }
    }
    (probs.len() - 1) as Symbol
}

/// Estimates the law of Z_t given observations up to t-d by exact
/// enumeration of the d-1 unseen symbols.
fn marginal_by_enumeration<S: Spa>(spa: &S, state: &S::State, rollout: usize) -> Result<Vec<f64>> {
    let a = spa.alphabet().len();
    let mut dist = vec![0.0; a];
    let mut frontier: Vec<(S::State, f64)> = vec![(state.clone(), 1.0)];
    for _ in 0..rollout {
        let mut next = Vec::with_capacity(frontier.len() * a);
        for (st, w) in &frontier {
            spa.next_dist_into(st, &mut dist);
            for sym in 0..a as Symbol {
                let p = dist[sym as usize];
                if p <= 0.0 {
                    continue;
                }
                let mut st2 = st.clone();
                spa.advance(&mut st2, sym)?;
                next.push((st2, w * p));
            }
        }
        frontier = next;
    }
    let mut acc = vec![0.0; a];
    for (st, w) in &frontier {
        spa.next_dist_into(st, &mut dist);
        for sym in 0..a {
            acc[sym] += w * dist[sym];
        }
    }
    Ok(acc)
}

/// Same marginal, approximated with `m` Monte-Carlo rollouts.
fn marginal_by_sampling<S: Spa>(
    spa: &S,
    state: &S::State,
    rollout: usize,
    m: usize,
    rng: &mut impl rand::Rng,
) -> Result<Vec<f64>> {
    let a = spa.alphabet().len();
    let mut acc = vec![0.0; a];
    let mut dist = vec![0.0; a];
    let mut st = state.clone();
    for _ in 0..m {
        st.clone_from(state);
        for _ in 0..rollout {
            spa.next_dist_into(&st, &mut dist);
            let sym = sample_from(&dist, rng.random::<f64>());
            spa.advance(&mut st, sym)?;
        }
        spa.next_dist_into(&st, &mut dist);
        for sym in 0..a {
            acc[sym] += dist[sym];
        }
    }
    for v in acc.iter_mut() {
        *v /= m as f64;
    }
    Ok(acc)
}

/// Exact marginalization is used when the enumeration frontier
/// `|A_Z|^(d-1)` stays within this budget; otherwise Monte Carlo.
pub const ENUMERATION_BUDGET: u64 = 4096;

/// How the delayed filter marginalizes over the unseen window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marginalization {
    /// Enumerate when within [`ENUMERATION_BUDGET`], otherwise sample.
    Auto,
    Exact,
    MonteCarlo,
}

/// Delayed estimation: at time t only Z^{t-d} is available. The law of Z_t
/// given that prefix is marginalized over the d-1 hidden symbols (exactly,
/// or by Monte Carlo with `m` samples), mapped through the inverse channel,
/// and answered with the Bayes response.
pub fn delayed_filter<S: Spa>(
    spa: &mut S,
    channel: &Channel,
    loss: &LossMatrix,
    z_seq: &[Symbol],
    d: usize,
    m: usize,
    seed: u64,
    marginalization: Marginalization,
) -> Result<FilterOutput> {
    use rand::SeedableRng;
    check_filter_dims(spa, channel, loss)?;
    if d < 1 {
        return Err(Error::WindowTooLarge);
    }
    if m < 1 {
        return Err(Error::InvalidSampleBudget);
    }
    let a = spa.alphabet().len() as u64;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut state = spa.initial_state();
    let mut decisions = Vec::with_capacity(z_seq.len());
    let mut clamp_total = 0.0;
    for t in 1..=z_seq.len() {
        // The SPA has observed z_1..z_{t-d}; everything later is hidden.
        let rollout = (t - 1).min(d - 1);
        let exact = match marginalization {
            Marginalization::Exact => true,
            Marginalization::MonteCarlo => false,
            Marginalization::Auto => a.pow(rollout as u32) <= ENUMERATION_BUDGET,
        };
        let q_z = if exact {
            marginal_by_enumeration(spa, &state, rollout)?
        } else {
            marginal_by_sampling(spa, &state, rollout, m, &mut rng)?
        };
        let (p_x, clamped) = channel.invert_to_input_law(&q_z)?;
        clamp_total += clamped;
        decisions.push(bayes_response(&p_x, loss));
        if t >= d {
            spa.observe(&mut state, z_seq[t - d])?;
        }
    }
    // Catch up the SPA on the tail it never observed, so the model state
    // reflects the full stream after filtering.
    for &z in &z_seq[z_seq.len().saturating_sub(d - 1)..] {
        spa.observe(&mut state, z)?;
    }
    Ok(FilterOutput {
        decisions,
        clamp_total,
    })
}

/// Look-ahead estimation: at time t the window Z^{t-1}, Z_t, Z_{t+1}^{t+l}
/// is available. The conditional law of Z_t given past and future is built
/// by weighting each candidate symbol with the SPA's likelihood of the
/// observed future after it, then mapped through `F` with the observed Z_t.
/// Near the end of the stream the window shrinks to whatever future exists,
/// so the final l steps degrade gracefully toward the causal filter.
///
/// Costs O(|A_Z| * l) SPA queries per step.
pub fn lookahead_filter<S: Spa>(
    spa: &mut S,
    channel: &Channel,
    loss: &LossMatrix,
    z_seq: &[Symbol],
    l: usize,
) -> Result<FilterOutput> {
    check_filter_dims(spa, channel, loss)?;
    let a = spa.alphabet().len();
    let mut state = spa.initial_state();
    let mut decisions = Vec::with_capacity(z_seq.len());
    let mut clamp_total = 0.0;
    let mut dist = vec![0.0; a];
    let mut st = state.clone();
    for (t, &z) in z_seq.iter().enumerate() {
        let avail = l.min(z_seq.len() - 1 - t);
        let prior = spa.next_dist(&state);
        let q_la = if avail == 0 {
            prior
        } else {
            let mut weights = vec![0.0; a];
            for cand in 0..a as Symbol {
                let mut w = prior.prob(cand);
                if w <= 0.0 {
                    continue;
                }
                st.clone_from(&state);
                spa.advance(&mut st, cand)?;
                for j in 1..=avail {
                    let future = z_seq[t + j];
                    spa.next_dist_into(&st, &mut dist);
                    w *= dist[future as usize];
                    if w <= 0.0 {
                        break;
                    }
                    spa.advance(&mut st, future)?;
                }
                weights[cand as usize] = w;
            }
            Pmf::from_weights(weights).map_err(|_| Error::ZeroProbabilityObservation)?
        };
        let (post, clamped) = channel.posterior_given_observation(&q_la, z)?;
        clamp_total += clamped;
        decisions.push(bayes_response(&post, loss));
        spa.observe(&mut state, z)?;
    }
    Ok(FilterOutput {
        decisions,
        clamp_total,
    })
}

/// The distribution-agnostic excess-loss bound: `sqrt(2 C1 Lmax) *
/// sqrt(kl_per_symbol * factor)` with factor 1, d, or 1+l depending on the
/// regime. The divergence argument is per-symbol and in bits; the bound
/// converts to nats internally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessLossBound {
    pub c1: f64,
    pub lambda_max: f64,
    pub kl_per_symbol_bits: f64,
    pub regime_factor: f64,
    pub bound: f64,
}

pub fn excess_loss_bound(
    kl_per_symbol_bits: f64,
    channel: &Channel,
    loss: &LossMatrix,
    regime: Regime,
) -> ExcessLossBound {
    let c1 = channel.inverse_max_abs() * channel.num_inputs() as f64;
    let factor = match regime {
        Regime::Causal => 1.0,
        Regime::Delay { d } => d as f64,
        Regime::Lookahead { l } => 1.0 + l as f64,
    };
    let kl_nats = kl_per_symbol_bits.max(0.0) * std::f64::consts::LN_2;
    let bound = (2.0 * c1 * loss.max_loss()).sqrt() * (kl_nats * factor).sqrt();
    ExcessLossBound {
        c1,
        lambda_max: loss.max_loss(),
        kl_per_symbol_bits,
        regime_factor: factor,
        bound,
    }
}

/// Mean realized loss of a decision sequence against the true inputs.
pub fn mean_loss(x_seq: &[Symbol], decisions: &[usize], loss: &LossMatrix) -> f64 {
    assert_eq!(x_seq.len(), decisions.len());
    if x_seq.is_empty() {
        return 0.0;
    }
    let total: f64 = x_seq
        .iter()
        .zip(decisions)
        .map(|(&x, &xhat)| loss.loss(x as usize, xhat))
        .sum();
    total / x_seq.len() as f64
}
