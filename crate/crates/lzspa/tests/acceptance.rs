//! End-to-end acceptance suite. Each test prints one `criterion NN: PASS/FAIL`
//! line (run with `--nocapture` to see them on success) and asserts its
//! stated tolerance. The tests serialize on a global lock so the
//! timing-sensitive checks are not perturbed by parallel neighbors.
//!
//! One check is expected red: `c08a` measures the online LZ78-Dirichlet
//! causal filter against the exact Bayes filter at n = 1e5 and asserts a
//! 0.02 MSE gap. The measured gap is about 0.08 and is insensitive to
//! gamma, traversal variants, and pretraining; see the test body.

use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use lzspa::classify::{self, SweepConfig, DEFAULT_GAMMA_GRID};
use lzspa::codec::{self, CodecMode};
use lzspa::evaluation::{self, median, SourceSpec};
use lzspa::filtering::oracle::{
    dp_optimal_filter, markov_experiment_channel, markov_experiment_loss,
    simulate_markov_channel, MarkovSource, TrueLawSpa,
};
use lzspa::filtering::{
    causal_filter, delayed_filter, excess_loss_bound, lookahead_filter, mean_loss,
    Marginalization, Regime,
};
use lzspa::generation::{apply_temperature_top_k, generate, GenConfig};
use lzspa::loss::{empirical_entropy_mu0, markov_entropy_mu_k};
use lzspa::spa::{DirichletSpa, Spa};
use lzspa::transform::Lz78Spa;
use lzspa::tree::{Lz78Tree, ParseCursor, ROOT};
use lzspa::types::{Alphabet, Pmf, Sequence, Symbol};

static GATE: Mutex<()> = Mutex::new(());

fn gate() -> MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {name}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {name}: {detail}");
}

fn bin() -> Alphabet {
    Alphabet::new(2).unwrap()
}

fn bernoulli_seq(p: f64, n: usize, seed: u64) -> Sequence {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let tokens: Vec<Symbol> = (0..n)
        .map(|_| if rng.random::<f64>() < p { 1 } else { 0 })
        .collect();
    Sequence::new(bin(), tokens).unwrap()
}

fn markov_seq(flip: f64, n: usize, seed: u64) -> Sequence {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut tokens: Vec<Symbol> = Vec::with_capacity(n);
    let mut cur: Symbol = rng.random_range(0..2);
    for _ in 0..n {
        tokens.push(cur);
        if rng.random::<f64>() < flip {
            cur ^= 1;
        }
    }
    Sequence::new(bin(), tokens).unwrap()
}

fn binary_entropy(p: f64) -> f64 {
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

#[test]
fn c01_worked_example_golden() {
    let _g = gate();
    let seq = Sequence::from_digits(bin(), "00011001").unwrap();

    // Time the raw parse (best of 100 runs).
    let mut best = f64::INFINITY;
    for _ in 0..100 {
        let mut tree = Lz78Tree::new(bin());
        let mut cursor = ParseCursor::root();
        let start = Instant::now();
        tree.parse_block(&mut cursor, seq.tokens()).unwrap();
        best = best.min(start.elapsed().as_secs_f64());
    }

    let mut tree = Lz78Tree::new(bin());
    let mut cursor = ParseCursor::root();
    let mut per_node: Vec<Vec<Symbol>> = vec![Vec::new(); 16];
    for &s in seq.tokens() {
        per_node[cursor.node as usize].push(s);
        tree.parse_step(&mut cursor, s, true).unwrap();
    }

    let phrases = tree.phrases();
    let expect: Vec<Vec<Symbol>> =
        vec![vec![0], vec![0, 0], vec![1], vec![1, 0], vec![0, 1]];
    let node_zero = tree.child(ROOT, 0).unwrap();
    let pass = phrases == expect
        && per_node[ROOT as usize] == vec![0, 0, 1, 1, 0]
        && per_node[node_zero as usize] == vec![0, 1]
        && best < 1e-3;
    report(
        "01 (worked-example golden)",
        pass,
        &format!(
            "phrases {:?}, Y(root) {:?}, Y(0) {:?}, parse {:.1} us",
            phrases,
            per_node[ROOT as usize],
            per_node[node_zero as usize],
            best * 1e6
        ),
    );
}

#[test]
fn c02_dirichlet_mixture_formula() {
    let _g = gate();
    // (alphabet, gamma, counts, expected dist), hand-derived from the
    // additive-perturbation formula (N(a) + g) / (t - 1 + A g).
    let cases: Vec<(u32, f64, Vec<u64>, Vec<f64>)> = vec![
        (2, 0.5, vec![0, 0], vec![0.5, 0.5]),
        (2, 0.5, vec![1, 0], vec![0.75, 0.25]),
        (2, 1.0, vec![1, 0], vec![2.0 / 3.0, 1.0 / 3.0]),
        (
            3,
            0.1,
            vec![2, 0, 1],
            vec![2.1 / 3.3, 0.1 / 3.3, 1.1 / 3.3],
        ),
        (
            4,
            3.0,
            vec![5, 0, 2, 1],
            vec![8.0 / 20.0, 3.0 / 20.0, 5.0 / 20.0, 4.0 / 20.0],
        ),
        (90, 5e-5, vec![0; 90], vec![1.0 / 90.0; 90]),
    ];
    let mut worst: f64 = 0.0;
    for (a, gamma, counts, expect) in &cases {
        let spa = DirichletSpa::new(Alphabet::new(*a).unwrap(), *gamma).unwrap();
        let mut st = spa.initial_state();
        for (sym, &c) in counts.iter().enumerate() {
            st.record_n(sym as Symbol, c);
        }
        let d = spa.next_dist(&st);
        for (got, want) in d.probs().iter().zip(expect) {
            worst = worst.max((got - want).abs());
        }
    }
    report(
        "02 (Dirichlet mixture formula)",
        worst < 1e-12,
        &format!("{} hand-derived points, worst abs error {worst:.2e}", cases.len()),
    );
}

#[test]
fn c03_universality_at_desk_scale() {
    let _g = gate();
    let start = Instant::now();
    let n = 1_000_000usize;

    // Part 1: iid Bernoulli(0.2) against its entropy.
    let iid = bernoulli_seq(0.2, n, 101);
    let mut model = Lz78Spa::new_dirichlet(bin(), 0.5).unwrap();
    let iid_loss = model.train(std::slice::from_ref(&iid), 1).unwrap() / n as f64;
    let h = binary_entropy(0.2);
    let iid_gap = iid_loss - h;

    // Part 2: order-1 Markov (flip 0.2) against the mu_1 oracle.
    let mk = markov_seq(0.2, n, 202);
    let mu1 = markov_entropy_mu_k(&mk, 1).unwrap();
    let mut model = Lz78Spa::new_dirichlet(bin(), 0.5).unwrap();
    let mk_loss = model.train(std::slice::from_ref(&mk), 1).unwrap() / n as f64;
    let mk_gap = mk_loss - mu1;

    // Trend: per-symbol loss is non-increasing across decades (small noise
    // allowance), and the per-node entropy total sits below mu_0.
    let mut decade_losses = Vec::new();
    for &len in &[10_000usize, 100_000, 1_000_000] {
        let prefix = Sequence::new(bin(), mk.tokens()[..len].to_vec()).unwrap();
        let mut m = Lz78Spa::new_dirichlet(bin(), 0.5).unwrap();
        decade_losses.push(m.train(&[prefix], 1).unwrap() / len as f64);
    }
    let trend_ok =
        decade_losses[1] <= decade_losses[0] + 0.01 && decade_losses[2] <= decade_losses[1] + 0.01;

    let mut tree = Lz78Tree::new(bin());
    let mut cursor = ParseCursor::root();
    tree.parse_block(&mut cursor, mk.tokens()).unwrap();
    let node_entropy = tree.subsequence_entropy();
    let mu0 = empirical_entropy_mu0(&mk).unwrap();

    let elapsed = start.elapsed().as_secs_f64();
    let pass = iid_gap.abs() < 0.05
        && mk_gap.abs() < 0.05
        && trend_ok
        && node_entropy <= mu0 + 0.02
        && elapsed < 60.0;
    report(
        "03 (universality at desk scale)",
        pass,
        &format!(
            "iid gap {iid_gap:.4} vs h(0.2)={h:.4}, markov gap {mk_gap:.4} vs mu1={mu1:.4}, \
             decade losses {decade_losses:?}, node-entropy {node_entropy:.4} <= mu0 {mu0:.4}, \
             {elapsed:.1} s"
        ),
    );
}

#[test]
fn c04_log_loss_decomposition() {
    let _g = gate();
    let a4 = Alphabet::new(4).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(404);
    let tokens: Vec<Symbol> = (0..2000)
        .map(|_| {
            // A skewed, weakly Markov source so the tree is non-trivial.
            if rng.random::<f64>() < 0.6 {
                rng.random_range(0..2)
            } else {
                rng.random_range(0..4)
            }
        })
        .collect();
    let seq = Sequence::new(a4, tokens).unwrap();
    let gamma = 0.5;

    let mut model = Lz78Spa::new_dirichlet(a4, gamma).unwrap();
    let total = model.train(std::slice::from_ref(&seq), 1).unwrap();

    // Independent route: replay the parse, collect each node's ordered
    // subsequence, and run a fresh Dirichlet SPA over each.
    let mut tree = Lz78Tree::new(a4);
    let mut cursor = ParseCursor::root();
    let mut subsequences: Vec<Vec<Symbol>> = vec![Vec::new()];
    for &s in seq.tokens() {
        subsequences[cursor.node as usize].push(s);
        if tree.parse_step(&mut cursor, s, true).unwrap().created_leaf {
            subsequences.push(Vec::new());
        }
    }
    let inner = DirichletSpa::new(a4, gamma).unwrap();
    let mut per_node_total = 0.0;
    for ys in &subsequences {
        if ys.is_empty() {
            continue;
        }
        let mut st = inner.initial_state();
        for &y in ys {
            per_node_total += -inner.next_dist(&st).prob(y).log2();
            inner.advance(&mut st, y).unwrap();
        }
    }
    let diff = (total - per_node_total).abs();
    report(
        "04 (per-node log-loss decomposition)",
        diff < 1e-9,
        &format!("total {total:.6} bits vs node sum {per_node_total:.6}, |diff| {diff:.2e}"),
    );
}

#[test]
fn c05_codec_losslessness_and_rate() {
    let _g = gate();
    let mut worst_rate_slack = f64::NEG_INFINITY;
    let mut all_exact = true;
    for &a in &[2u32, 90, 256] {
        let alphabet = Alphabet::new(a).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(a as u64);
        for trial in 0..1000 {
            let n = 512;
            let tokens: Vec<Symbol> = (0..n).map(|_| rng.random_range(0..a)).collect();
            let seq = Sequence::new(alphabet, tokens).unwrap();

            let spa = DirichletSpa::new(alphabet, 0.5).unwrap();
            let loss = lzspa::log_loss(&spa, &seq).unwrap();
            let mut enc = spa;
            let stream = codec::encode(&mut enc, &seq, CodecMode::Adaptive, None).unwrap();

            let mut dec = DirichletSpa::new(alphabet, 0.5).unwrap();
            let round = codec::decode(&mut dec, &stream, None).unwrap();
            if round != seq {
                all_exact = false;
            }
            let bits = stream.payload_bits() as f64;
            let slack = (bits - loss.total_bits).abs() - (64.0 + 0.01 * loss.total_bits);
            worst_rate_slack = worst_rate_slack.max(slack);
            let _ = trial;
        }
    }
    report(
        "05 (codec losslessness and rate)",
        all_exact && worst_rate_slack <= 0.0,
        &format!(
            "3000 round-trips exact: {all_exact}, worst rate-bound slack {worst_rate_slack:.1} bits"
        ),
    );
}

#[test]
fn c06_kl_convergence_in_training_set_size() {
    let _g = gate();
    let start = Instant::now();
    let source = SourceSpec::bernoulli(0.3).unwrap();
    let seeds: Vec<u64> = (1..=5).collect();
    let m_grid = [100usize, 1000, 10_000];
    let rows =
        evaluation::convergence_experiment(&source, &[0.05], &m_grid, 4, &seeds).unwrap();
    let mut medians = Vec::new();
    for &m in &m_grid {
        let kls: Vec<f64> = rows
            .iter()
            .filter(|r| r.m == m)
            .map(|r| r.kl_bits)
            .collect();
        medians.push(median(&kls));
    }
    let non_increasing = medians.windows(2).all(|w| w[1] <= w[0]);
    let final_ok = medians[2] < 0.05;
    let non_negative = rows.iter().all(|r| r.kl_bits >= 0.0);
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "06 (exhaustive KL convergence)",
        non_increasing && final_ok && non_negative && elapsed < 120.0,
        &format!("medians over m {m_grid:?} = {medians:.4?}, {elapsed:.1} s"),
    );
}

#[test]
fn c07_filter_oracle_equivalence() {
    let _g = gate();
    let source = MarkovSource::symmetric_binary(0.1);
    let channel = markov_experiment_channel();
    let loss = markov_experiment_loss();
    let (_, z) = simulate_markov_channel(0.1, 1000, 7);

    let mut ok = true;
    let mut detail = String::new();

    let oracle = dp_optimal_filter(&source, &channel, &loss, &z, Regime::Causal).unwrap();
    let mut spa = TrueLawSpa::new(source.clone(), channel.clone()).unwrap();
    let causal = causal_filter(&mut spa, &channel, &loss, &z).unwrap();
    let causal_eq = causal.decisions == oracle.decisions;
    ok &= causal_eq;
    detail.push_str(&format!("causal exact: {causal_eq}"));

    for l in [1usize, 2] {
        let oracle =
            dp_optimal_filter(&source, &channel, &loss, &z, Regime::Lookahead { l }).unwrap();
        let mut spa = TrueLawSpa::new(source.clone(), channel.clone()).unwrap();
        let la = lookahead_filter(&mut spa, &channel, &loss, &z, l).unwrap();
        let eq = la.decisions == oracle.decisions;
        ok &= eq;
        detail.push_str(&format!(", lookahead-{l} exact: {eq}"));
    }

    // Delay through the exact-enumeration marginalization path.
    let d = 2;
    let oracle = dp_optimal_filter(&source, &channel, &loss, &z, Regime::Delay { d }).unwrap();
    let mut spa = TrueLawSpa::new(source, channel.clone()).unwrap();
    let delayed = delayed_filter(
        &mut spa,
        &channel,
        &loss,
        &z,
        d,
        1,
        0,
        Marginalization::Exact,
    )
    .unwrap();
    let eq = delayed.decisions == oracle.decisions;
    ok &= eq;
    detail.push_str(&format!(", delay-{d} (enumeration) exact: {eq}"));

    report("07 (mismatched-estimator oracle equivalence)", ok, &detail);
}

/// Shared Markov-experiment runs for criteria 8 and 9.
struct ExperimentRuns {
    oracle_causal_mse: f64,
    oracle_delay_mse: f64,
    oracle_lookahead_mse: f64,
    lz_causal_mse: f64,
    lz_delay_enum_mse: f64,
    truelaw_delay_exact_mse: f64,
    truelaw_delay_mc: Vec<(usize, f64)>,
    kl_bits_per_symbol: f64,
}

static RUNS: OnceLock<ExperimentRuns> = OnceLock::new();

fn experiment_runs() -> &'static ExperimentRuns {
    RUNS.get_or_init(|| {
        let p = 0.1;
        let n = 100_000;
        let seed = 42;
        let gamma = 0.5;
        let d = 2;
        let l = 2;
        let (x, z) = simulate_markov_channel(p, n, seed);
        let source = MarkovSource::symmetric_binary(p);
        let channel = markov_experiment_channel();
        let loss = markov_experiment_loss();
        let a3 = Alphabet::new(3).unwrap();

        let oracle_causal =
            dp_optimal_filter(&source, &channel, &loss, &z, Regime::Causal).unwrap();
        let oracle_delay =
            dp_optimal_filter(&source, &channel, &loss, &z, Regime::Delay { d }).unwrap();
        let oracle_la =
            dp_optimal_filter(&source, &channel, &loss, &z, Regime::Lookahead { l }).unwrap();

        let mut lz = Lz78Spa::new_dirichlet(a3, gamma).unwrap();
        let lz_causal = causal_filter(&mut lz, &channel, &loss, &z).unwrap();

        // The Monte-Carlo-budget sweep runs against the exact observation
        // law so it isolates the sampling error; the model-estimation error
        // is measured separately by the causal run above.
        let mut truelaw_delay_mc = Vec::new();
        for m in [100usize, 1000, 10_000] {
            let mut spa = TrueLawSpa::new(source.clone(), channel.clone()).unwrap();
            let out = delayed_filter(
                &mut spa,
                &channel,
                &loss,
                &z,
                d,
                m,
                0,
                Marginalization::MonteCarlo,
            )
            .unwrap();
            truelaw_delay_mc.push((m, mean_loss(&x, &out.decisions, &loss)));
        }
        let mut spa = TrueLawSpa::new(source.clone(), channel.clone()).unwrap();
        let truelaw_exact = delayed_filter(
            &mut spa,
            &channel,
            &loss,
            &z,
            d,
            1,
            0,
            Marginalization::Exact,
        )
        .unwrap();

        let mut model = Lz78Spa::new_dirichlet(a3, gamma).unwrap();
        let enum_out = delayed_filter(
            &mut model,
            &channel,
            &loss,
            &z,
            d,
            1,
            seed,
            Marginalization::Exact,
        )
        .unwrap();

        // Single-sample divergence estimate: the SPA's sequential log loss
        // on z minus the true law's.
        let z_seq = Sequence::new(a3, z.clone()).unwrap();
        let mut fresh = Lz78Spa::new_dirichlet(a3, gamma).unwrap();
        let lz_bits = fresh.train(std::slice::from_ref(&z_seq), 1).unwrap();
        let true_spa = TrueLawSpa::new(source, channel).unwrap();
        let true_bits = lzspa::log_loss(&true_spa, &z_seq).unwrap().total_bits;
        let kl_bits_per_symbol = ((lz_bits - true_bits) / n as f64).max(0.0);

        ExperimentRuns {
            oracle_causal_mse: mean_loss(&x, &oracle_causal.decisions, &loss),
            oracle_delay_mse: mean_loss(&x, &oracle_delay.decisions, &loss),
            oracle_lookahead_mse: mean_loss(&x, &oracle_la.decisions, &loss),
            lz_causal_mse: mean_loss(&x, &lz_causal.decisions, &loss),
            lz_delay_enum_mse: mean_loss(&x, &enum_out.decisions, &loss),
            truelaw_delay_exact_mse: mean_loss(&x, &truelaw_exact.decisions, &loss),
            truelaw_delay_mc,
            kl_bits_per_symbol,
        }
    })
}

#[test]
fn c08a_causal_filter_tracks_oracle() {
    let _g = gate();
    let runs = experiment_runs();
    let gap = runs.lz_causal_mse - runs.oracle_causal_mse;
    // Known red: the plain LZ78-Dirichlet predictor's posterior estimates
    // at this length leave an MSE gap near 0.08, not 0.02. The gap barely
    // moves across gamma in [1e-3, 1], suffix-retraversal variants, and
    // pretraining budgets up to 5e6 symbols (gap 0.05); the 0.02 target
    // appears unreachable for this model family at n = 1e5.
    report(
        "08a (LZ causal filter within 0.02 of oracle)",
        gap.abs() <= 0.02,
        &format!(
            "oracle MSE {:.4}, LZ MSE {:.4}, gap {gap:.4}, tolerance 0.02",
            runs.oracle_causal_mse, runs.lz_causal_mse
        ),
    );
}

#[test]
fn c08b_delayed_filter_monte_carlo_budget() {
    let _g = gate();
    let runs = experiment_runs();
    let mse_100 = runs.truelaw_delay_mc[0].1;
    let mse_1k = runs.truelaw_delay_mc[1].1;
    let mse_10k = runs.truelaw_delay_mc[2].1;
    let exact = runs.truelaw_delay_exact_mse;
    let strict_decrease = mse_100 > mse_10k;
    let toward_exact = (mse_10k - exact).abs() <= (mse_100 - exact).abs();
    let middle_consistent = mse_1k <= mse_100 + 2e-3 && mse_10k <= mse_1k + 2e-3;
    report(
        "08b (delayed-filter MSE decreases in Monte-Carlo budget)",
        strict_decrease && toward_exact && middle_consistent,
        &format!(
            "MSE M=100 {mse_100:.5}, M=1000 {mse_1k:.5}, M=10000 {mse_10k:.5}, \
             enumeration-exact {exact:.5}"
        ),
    );
}

#[test]
fn c08c_oracle_regime_ordering() {
    let _g = gate();
    let runs = experiment_runs();
    let eps = 0.005;
    let ordered = runs.oracle_lookahead_mse <= runs.oracle_causal_mse + eps
        && runs.oracle_causal_mse <= runs.oracle_delay_mse + eps;
    report(
        "08c (oracle MSE ordering lookahead <= causal <= delayed)",
        ordered,
        &format!(
            "lookahead {:.4} <= causal {:.4} <= delayed {:.4} (eps {eps})",
            runs.oracle_lookahead_mse, runs.oracle_causal_mse, runs.oracle_delay_mse
        ),
    );
}

#[test]
fn c09_excess_loss_within_bound() {
    let _g = gate();
    let runs = experiment_runs();
    let channel = markov_experiment_channel();
    let loss = markov_experiment_loss();

    let causal_bound =
        excess_loss_bound(runs.kl_bits_per_symbol, &channel, &loss, Regime::Causal).bound;
    let delay_bound = excess_loss_bound(
        runs.kl_bits_per_symbol,
        &channel,
        &loss,
        Regime::Delay { d: 2 },
    )
    .bound;

    let causal_excess = runs.lz_causal_mse - runs.oracle_causal_mse;
    let mut ok = causal_excess <= causal_bound;
    let mut detail = format!(
        "kl est {:.4} bits/sym; causal excess {causal_excess:.4} <= bound {causal_bound:.4}",
        runs.kl_bits_per_symbol
    );
    let delay_excess_enum = runs.lz_delay_enum_mse - runs.oracle_delay_mse;
    ok &= delay_excess_enum <= delay_bound;
    detail.push_str(&format!(
        "; delay(enum) excess {delay_excess_enum:.4} <= bound {delay_bound:.4}"
    ));
    report("09 (excess loss within the distribution-agnostic bound)", ok, &detail);
}

#[test]
fn c10_classification_accuracy_and_sweep() {
    let _g = gate();
    let start = Instant::now();
    let mut accuracies = Vec::new();
    for seed in [1u64, 2, 3] {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut train = Vec::new();
        for _ in 0..200 {
            train.push((markov_seq(0.1, 512, rng.random()), "smooth".to_string()));
            train.push((markov_seq(0.4, 512, rng.random()), "jumpy".to_string()));
        }
        let classifier = classify::fit(&train, 0.5, 1).unwrap();
        let hashes: Vec<_> = classifier.models().iter().map(|m| m.model_hash()).collect();
        let mut correct = 0usize;
        let trials = 200usize;
        for _ in 0..trials {
            let (seq, want) = if rng.random::<bool>() {
                (markov_seq(0.1, 512, rng.random()), "smooth")
            } else {
                (markov_seq(0.4, 512, rng.random()), "jumpy")
            };
            if classify::classify(&classifier, &seq).unwrap().0 == want {
                correct += 1;
            }
        }
        let after: Vec<_> = classifier.models().iter().map(|m| m.model_hash()).collect();
        assert_eq!(hashes, after, "classification must not mutate models");
        accuracies.push(correct as f64 / trials as f64);
    }
    let acc_ok = accuracies.iter().all(|&a| a >= 0.95);

    // Gamma sweep over the full default grid on a smaller instance.
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let mut train = Vec::new();
    for _ in 0..60 {
        train.push((markov_seq(0.1, 256, rng.random()), "smooth".to_string()));
        train.push((markov_seq(0.4, 256, rng.random()), "jumpy".to_string()));
    }
    let config = SweepConfig::default();
    let sweep = classify::sweep(&train, &config).unwrap();
    let best_row = sweep
        .table
        .iter()
        .find(|(g, _)| *g == sweep.best_gamma)
        .unwrap();
    let argmin_ok = sweep.table.iter().all(|&(_, l)| best_row.1 <= l);
    let grid_ok = config.gamma_grid == DEFAULT_GAMMA_GRID;
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "10 (classification accuracy and gamma sweep)",
        acc_ok && argmin_ok && grid_ok && elapsed < 60.0,
        &format!(
            "accuracies {accuracies:?}, sweep best gamma {} (val loss {:.4}), {elapsed:.1} s",
            sweep.best_gamma, best_row.1
        ),
    );
}

#[test]
fn c11_generation_contracts() {
    let _g = gate();
    // Model trained on iid Bernoulli(0.3).
    let q = 0.3;
    let train = bernoulli_seq(q, 500_000, 1111);
    let mut model = Lz78Spa::new_dirichlet(bin(), 0.5).unwrap();
    model.train(&[train], 1).unwrap();
    model.freeze();

    // T=0 determinism and equivalence with K=1.
    let mut t0 = GenConfig::new(256);
    t0.temperature = 0.0;
    t0.rng_seed = 5;
    let out_a = generate(&model, &t0).unwrap();
    let out_b = generate(&model, &t0).unwrap();
    let mut k1 = GenConfig::new(256);
    k1.temperature = 1.0;
    k1.top_k = 1;
    k1.rng_seed = 77;
    let out_k1 = generate(&model, &k1).unwrap();
    let deterministic = out_a.sequence == out_b.sequence && out_a.sequence == out_k1.sequence;

    // Seeded reproducibility at stochastic settings.
    let mut cfg = GenConfig::new(4096);
    cfg.temperature = 0.9;
    cfg.top_k = 2;
    cfg.rng_seed = 31337;
    let r1 = generate(&model, &cfg).unwrap();
    let r2 = generate(&model, &cfg).unwrap();
    let reproducible = r1.sequence == r2.sequence;

    // Histogram consistency at T=1, K=A over 1e5 symbols.
    let mut full = GenConfig::new(100_000);
    full.temperature = 1.0;
    full.top_k = 2;
    full.rng_seed = 9;
    let before = model.model_hash();
    let out = generate(&model, &full).unwrap();
    let unchanged = model.model_hash() == before;
    let hist = out.sequence.histogram();
    let ones = hist[1] as f64 / out.sequence.len() as f64;
    let hist_ok = (ones - q).abs() < 0.02;

    // Backshift path on a sparse model that keeps walking onto fresh leaves.
    let mut sparse = Lz78Spa::new_dirichlet(bin(), 0.5).unwrap();
    sparse
        .train(&[Sequence::from_digits(bin(), "00011001").unwrap()], 1)
        .unwrap();
    sparse.freeze();
    let mut sparse_cfg = GenConfig::new(256);
    sparse_cfg.rng_seed = 2;
    sparse_cfg.min_context = 16;
    let sparse_out = generate(&sparse, &sparse_cfg).unwrap();
    let backshift_ok = sparse_out.backshift_events > 0;

    report(
        "11 (generation contracts)",
        deterministic && reproducible && unchanged && hist_ok && backshift_ok,
        &format!(
            "argmax det {deterministic}, seeded repro {reproducible}, model unchanged {unchanged}, \
             ones freq {ones:.3} vs {q}, backshift events {}",
            sparse_out.backshift_events
        ),
    );
}

#[test]
fn c12_scaling() {
    let _g = gate();
    // A low-entropy corpus keeps the 1e7-symbol tree small enough to stay
    // cache-resident, so timing reflects the per-symbol work.
    let sizes = [100_000usize, 1_000_000, 10_000_000];
    let throughput = lzspa::bench::bench_train_throughput(&sizes, 0.02, 7, 7).unwrap();
    let t = &throughput.rows;
    let decade_ratio = t[2].seconds / t[1].seconds;
    let ratio_ok = (8.0..=13.0).contains(&decade_ratio);

    // Node growth tracks n / log2 n: the normalized ratio stays in a
    // constant band across two decades.
    let growth_ratios: Vec<f64> = t.iter().map(|r| r.nodes_per_n_over_log2n).collect();
    let growth_ok = growth_ratios
        .windows(2)
        .all(|w| w[1] / w[0] > 0.7 && w[1] / w[0] < 1.4);

    // Memory proxy: serialized bytes per node stable within 2x across sizes.
    let bytes_per_node: Vec<f64> = t
        .iter()
        .map(|r| r.model_bytes as f64 / r.node_count as f64)
        .collect();
    let memory_ok = bytes_per_node
        .windows(2)
        .all(|w| w[1] / w[0] < 2.0 && w[0] / w[1] < 2.0);

    // Generation: 256-symbol samples well under the 0.1 s ceiling, and
    // per-symbol cost flat across a ~100x node-count range.
    let latency =
        lzspa::bench::bench_generation_latency(&[100_000, 10_000_000], 0.2, &[1, 2], 20, 7)
            .unwrap();
    let per_sample_max = latency
        .rows
        .iter()
        .map(|r| r.seconds_per_sample)
        .fold(0.0f64, f64::max);
    let latency_ok = per_sample_max <= 0.1;
    let small = latency.rows.iter().find(|r| r.train_symbols == 100_000).unwrap();
    let big = latency
        .rows
        .iter()
        .find(|r| r.train_symbols == 10_000_000)
        .unwrap();
    let flat_ok = big.seconds_per_symbol / small.seconds_per_symbol <= 3.0;
    // Truncation overhead (K=1 vs K=A) is reported but not asserted; at
    // these latencies the comparison is below timer noise.
    let k1 = latency.rows.iter().find(|r| r.top_k == 1).unwrap();
    let ka = latency.rows.iter().find(|r| r.top_k == 2).unwrap();
    let topk_ratio = k1.seconds_per_sample / ka.seconds_per_sample;

    // Serialization fidelity at scale: the 1e6-symbol model round-trips.
    let corpus = lzspa::bench::synthetic_corpus(1_000_000, 0.2, 7);
    let mut model = Lz78Spa::new_dirichlet(corpus.alphabet(), 0.5).unwrap();
    model.train(&[corpus], 1).unwrap();
    let back = Lz78Spa::from_bytes(&model.to_bytes()).unwrap();
    let roundtrip_ok = back.tree().node_count() == model.tree().node_count();

    report(
        "12 (scaling)",
        ratio_ok && growth_ok && memory_ok && latency_ok && flat_ok && roundtrip_ok,
        &format!(
            "decade time ratio {decade_ratio:.1} in [8,13], node/(n/log2 n) {growth_ratios:.3?}, \
             bytes/node {bytes_per_node:.1?}, max {:.4} s/sample, per-symbol flatness x{:.2}, \
             k1/kA latency x{topk_ratio:.2} (reported), 1e6 round-trip {roundtrip_ok}",
            per_sample_max,
            big.seconds_per_symbol / small.seconds_per_symbol
        ),
    );
}

#[test]
fn spa_core_invariant_dirichlet_near_mu0_at_scale() {
    let _g = gate();
    // The inner SPA alone: per-symbol loss within 0.02 bits of mu_0 by 1e5.
    let seq = bernoulli_seq(0.35, 100_000, 5150);
    let spa = DirichletSpa::new(bin(), 0.5).unwrap();
    let loss = lzspa::log_loss(&spa, &seq).unwrap().per_symbol_bits;
    let mu0 = empirical_entropy_mu0(&seq).unwrap();
    assert!(
        (loss - mu0).abs() < 0.02,
        "dirichlet loss {loss:.4} vs mu0 {mu0:.4}"
    );
}

#[test]
fn temperature_shaping_keeps_ranking_stable() {
    let _g = gate();
    // Composition order check: ranking is temperature-invariant, so top-k
    // support is the same whichever side of the truncation it lands on.
    let pmf = Pmf::new(vec![0.45, 0.3, 0.15, 0.1]).unwrap();
    for &t in &[0.5, 1.0, 2.0] {
        let shaped = apply_temperature_top_k(&pmf, t, 2).unwrap();
        assert!(shaped.prob(0) > 0.0 && shaped.prob(1) > 0.0);
        assert_eq!(shaped.prob(2), 0.0);
        assert_eq!(shaped.prob(3), 0.0);
    }
}
