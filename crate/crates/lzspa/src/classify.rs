//! Min-log-loss classification: one frozen LZ78-transformed SPA per class,
//! scored in parallel, plus the gamma grid sweep.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::transform::Lz78Spa;
use crate::types::{Alphabet, Sequence};

/// The default gamma grid for sweeps.
pub const DEFAULT_GAMMA_GRID: [f64; 7] = [0.1, 0.33, 0.5, 0.75, 1.0, 3.0, 5.0];

/// One frozen model per class label. Labels keep their order of first
/// appearance in the training set; the classifier breaks loss ties toward
/// the lowest label index.
#[derive(Debug, Clone)]
pub struct Classifier {
    labels: Vec<String>,
    models: Vec<Lz78Spa>,
    gamma: f64,
    epochs: u32,
}

impl Classifier {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn models(&self) -> &[Lz78Spa] {
        &self.models
    }

    pub fn model_for(&self, label: &str) -> Option<&Lz78Spa> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| &self.models[i])
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn epochs(&self) -> u32 {
        self.epochs
    }
}

fn group_by_label<'a>(
    train: &'a [(Sequence, String)],
) -> Result<(Vec<String>, Vec<Vec<&'a Sequence>>, Alphabet)> {
    if train.is_empty() {
        return Err(Error::SingleClass);
    }
    let alphabet = train[0].0.alphabet();
    let mut labels: Vec<String> = Vec::new();
    let mut groups: Vec<Vec<&Sequence>> = Vec::new();
    for (seq, label) in train {
        alphabet.check_matches(seq.alphabet())?;
        match labels.iter().position(|l| l == label) {
            Some(i) => groups[i].push(seq),
            None => {
                labels.push(label.clone());
                groups.push(vec![seq]);
            }
        }
    }
    if labels.len() < 2 {
        return Err(Error::SingleClass);
    }
    Ok((labels, groups, alphabet))
}

/// Trains one model per class on that class's subset, then freezes them.
pub fn fit(train: &[(Sequence, String)], gamma: f64, epochs: u32) -> Result<Classifier> {
    let (labels, groups, alphabet) = group_by_label(train)?;
    for (label, group) in labels.iter().zip(&groups) {
        if group.is_empty() {
            return Err(Error::EmptyClass(label.clone()));
        }
    }
    let models = labels
        .par_iter()
        .zip(groups.par_iter())
        .map(|(_, group)| {
            let mut model = Lz78Spa::new_dirichlet(alphabet, gamma)?;
            let owned: Vec<Sequence> = group.iter().map(|s| (*s).clone()).collect();
            model.train(&owned, epochs)?;
            model.freeze();
            Ok(model)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Classifier {
        labels,
        models,
        gamma,
        epochs,
    })
}

/// Scores a sequence under every class model without mutating anything and
/// returns the argmin label with the per-class per-symbol losses. The
/// per-class evaluations fan out across threads; the reduction is by class
/// index, so results are independent of scheduling.
pub fn classify<'a>(classifier: &'a Classifier, seq: &Sequence) -> Result<(&'a str, Vec<f64>)> {
    let losses: Vec<f64> = classifier
        .models
        .par_iter()
        .map(|m| m.evaluate_log_loss(seq).map(|r| r.per_symbol_bits))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0usize;
    for (i, &l) in losses.iter().enumerate() {
        if l < losses[best] {
            best = i;
        }
    }
    Ok((&classifier.labels[best], losses))
}

/// Sweep configuration: gamma grid, validation fraction, training epochs,
/// and the shuffle seed for the deterministic split.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub gamma_grid: Vec<f64>,
    pub validation_fraction: f64,
    pub epochs: u32,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            gamma_grid: DEFAULT_GAMMA_GRID.to_vec(),
            validation_fraction: 0.2,
            epochs: 1,
            seed: 0,
        }
    }
}

/// Mean validation log loss per gamma grid point.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub best_gamma: f64,
    /// `(gamma, mean validation per-symbol log loss)` per grid point, in
    /// grid order.
    pub table: Vec<(f64, f64)>,
    /// Validation accuracy per grid point (reported, not optimized).
    pub accuracy: Vec<f64>,
}

/// For each gamma in the grid: split each class by a seeded shuffle, fit on
/// the training split, evaluate mean per-symbol log loss of the true-class
/// model on the validation split, and pick the minimizing gamma (first
/// minimum on ties).
pub fn sweep(train: &[(Sequence, String)], config: &SweepConfig) -> Result<SweepReport> {
    if config.gamma_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let (labels, groups, _) = group_by_label(train)?;

    // Deterministic validation split, stratified by class.
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut fit_set: Vec<(Sequence, String)> = Vec::new();
    let mut val_set: Vec<(Sequence, String)> = Vec::new();
    for (label, group) in labels.iter().zip(&groups) {
        let mut idx: Vec<usize> = (0..group.len()).collect();
        idx.shuffle(&mut rng);
        let n_val = ((group.len() as f64 * config.validation_fraction).ceil() as usize)
            .min(group.len().saturating_sub(1))
            .max(1);
        if group.len() < 2 {
            return Err(Error::EmptyValidationSplit(label.clone()));
        }
        for (pos, &i) in idx.iter().enumerate() {
            let item = (group[i].clone(), label.clone());
            if pos < n_val {
                val_set.push(item);
            } else {
                fit_set.push(item);
            }
        }
    }

    let mut table = Vec::with_capacity(config.gamma_grid.len());
    let mut accuracy = Vec::with_capacity(config.gamma_grid.len());
    for &gamma in &config.gamma_grid {
        let classifier = fit(&fit_set, gamma, config.epochs)?;
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (seq, label) in &val_set {
            let model = classifier
                .model_for(label)
                .ok_or_else(|| Error::EmptyClass(label.clone()))?;
            loss_sum += model.evaluate_log_loss(seq)?.per_symbol_bits;
            let (predicted, _) = classify(&classifier, seq)?;
            if predicted == label {
                correct += 1;
            }
        }
        table.push((gamma, loss_sum / val_set.len() as f64));
        accuracy.push(correct as f64 / val_set.len() as f64);
    }
    let best_gamma = table
        .iter()
        .fold((f64::NAN, f64::INFINITY), |acc, &(g, l)| {
            if l < acc.1 {
                (g, l)
            } else {
                acc
            }
        })
        .0;
    Ok(SweepReport {
        best_gamma,
        table,
        accuracy,
    })
}
