//! Causal sequence generation from a frozen tree, with temperature, top-k,
//! seeding, and backshift parsing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::spa::Spa;
use crate::transform::{InnerSpa, Lz78Spa};
use crate::tree::ParseCursor;
use crate::types::{Pmf, Sequence};

/// Generation controls. `temperature == 0` means deterministic argmax;
/// `top_k == A` disables truncation. `min_context` is the suffix length for
/// backshift re-traversal.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub len: usize,
    pub temperature: f64,
    pub top_k: u32,
    pub min_context: usize,
    pub seed_data: Option<Sequence>,
    pub rng_seed: u64,
}

impl GenConfig {
    pub fn new(len: usize) -> Self {
        GenConfig {
            len,
            temperature: 1.0,
            top_k: u32::MAX,
            min_context: 64,
            seed_data: None,
            rng_seed: 0,
        }
    }
}

/// A generated sequence plus counters for the traversal heuristics.
#[derive(Debug, Clone)]
pub struct GenOutput {
    pub sequence: Sequence,
    /// How many emissions were preceded by a backshift re-traversal.
    pub backshift_events: usize,
    /// How many tree walks fell off an unseen branch and reset to the root.
    pub root_resets: usize,
}

/// Reweights a distribution by temperature, then keeps only the k most
/// probable symbols. Temperature 0 collapses to the argmax; boundary ties
/// in the top-k selection keep the lowest symbol index.
pub fn apply_temperature_top_k(pmf: &Pmf, temperature: f64, top_k: u32) -> Result<Pmf> {
    if temperature < 0.0 || !temperature.is_finite() {
        return Err(Error::Malformed(format!("bad temperature {temperature}")));
    }
    if top_k == 0 {
        return Err(Error::Malformed("top_k must be at least 1".into()));
    }
    let a = pmf.len();
    let mut weights: Vec<f64> = if temperature == 0.0 {
        let mut w = vec![0.0; a];
        w[pmf.argmax() as usize] = 1.0;
        w
    } else {
        let powed: Vec<f64> = pmf
            .probs()
            .iter()
            .map(|&p| p.powf(1.0 / temperature))
            .collect();
        if powed.iter().sum::<f64>() > 0.0 {
            powed
        } else {
            // Tiny temperatures can underflow every weight; that limit is
            // the argmax anyway.
            let mut w = vec![0.0; a];
            w[pmf.argmax() as usize] = 1.0;
            w
        }
    };
    let k = (top_k as usize).min(a);
    if k < a {
        // Rank symbols by weight, descending, lowest index first on ties.
        let mut order: Vec<usize> = (0..a).collect();
        order.sort_by(|&i, &j| {
            weights[j]
                .partial_cmp(&weights[i])
                .unwrap()
                .then(i.cmp(&j))
        });
        for &i in &order[k..] {
            weights[i] = 0.0;
        }
    }
    Pmf::from_weights(weights)
}

/// Generates symbols from a frozen model.
///
/// After an optional seed traversal, each emission: (1) if the current
/// node never saw a training symbol, backshift — return to the root and
/// re-traverse with the last `min(min_context, generated)` generated
/// symbols, at most once per emission; (2) sample from the node's
/// temperature/top-k-shaped distribution; (3) walk the sampled edge,
/// falling back to the root when the branch does not exist.
pub fn generate<F: InnerSpa>(model: &Lz78Spa<F>, config: &GenConfig) -> Result<GenOutput> {
    if !model.is_frozen() {
        return Err(Error::ModelNotFrozen);
    }
    let alphabet = model.alphabet();
    let mut rng = ChaCha12Rng::seed_from_u64(config.rng_seed);
    let mut cursor = model.initial_state();
    let mut root_resets = 0usize;
    if let Some(seed) = &config.seed_data {
        alphabet.check_matches(seed.alphabet())?;
        for &sym in seed.tokens() {
            if model.tree().traverse_step(&mut cursor, sym)?.reset_to_root {
                root_resets += 1;
            }
        }
    }

    let mut out = Sequence::empty(alphabet);
    let mut backshift_events = 0usize;
    for _ in 0..config.len {
        if model.tree().node_total(cursor.node) == 0 && cursor.node != crate::tree::ROOT {
            // Backshift: re-traverse from the root with a suffix of the
            // generated output before emitting.
            backshift_events += 1;
            cursor = ParseCursor::root();
            let hist = out.tokens();
            let k = config.min_context.min(hist.len());
            for &sym in &hist[hist.len() - k..] {
                model.tree().traverse_step(&mut cursor, sym)?;
            }
        }
        let shaped =
            apply_temperature_top_k(&model.next_dist(&cursor), config.temperature, config.top_k)?;
        let sym = shaped.sample(rng.random::<f64>());
        out.push(sym)?;
        if model.tree().traverse_step(&mut cursor, sym)?.reset_to_root {
            root_resets += 1;
        }
    }
    Ok(GenOutput {
        sequence: out,
        backshift_events,
        root_resets,
    })
}
