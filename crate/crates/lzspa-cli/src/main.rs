use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use lzspa::classify;
use lzspa::codec::{self, CodecMode};
use lzspa::evaluation::{self, SourceSpec};
use lzspa::filtering::oracle::{dp_optimal_filter, MarkovSource, TrueLawSpa};
use lzspa::filtering::{
    causal_filter, delayed_filter, excess_loss_bound, lookahead_filter, mean_loss,
    Marginalization, Regime,
};
use lzspa::generation::{generate, GenConfig};
use lzspa::spa::Spa;
use lzspa::transform::Lz78Spa;
use lzspa::types::{Alphabet, Sequence};
use lzspa_cli::{
    parse_manifest, parse_source_json, read_token_file, resolve_loss, write_token_file,
    BundleManifest, CliError, TokenFormat,
};

#[derive(Parser)]
#[command(
    name = "lzspa",
    version,
    about = "LZ78-transformed sequential probability assignments: train, compress, classify, filter, generate, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on one or more token files and save it.
    Train {
        /// Token files, parsed in the given order.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Token format: raw (bytes, A=256) or ints (header line + one
        /// integer per line).
        #[arg(long, default_value = "raw")]
        format: String,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 1)]
        epochs: u32,
        /// Freeze the model after training.
        #[arg(long)]
        freeze: bool,
        #[arg(long)]
        output: PathBuf,
    },
    /// Compress a token file. With --model, uses that frozen model
    /// (static mode); otherwise both sides build the same adaptive model.
    Compress {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "raw")]
        format: String,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Gamma for the adaptive mode.
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
    },
    /// Decompress an encoded stream back into a token file.
    Decompress {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "raw")]
        format: String,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
    },
    /// Train one model per class from a label manifest and write a bundle.
    Fit {
        /// Manifest of lines `label<TAB>token-file`.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value = "raw")]
        format: String,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 1)]
        epochs: u32,
        /// Sweep the default gamma grid first and fit with the winner.
        #[arg(long)]
        gamma_sweep: bool,
        #[arg(long, default_value_t = 0.2)]
        validation_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Classify a token file against a fitted bundle.
    Classify {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "raw")]
        format: String,
    },
    /// Run the gamma sweep and report validation losses per grid point.
    Sweep {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value = "raw")]
        format: String,
        /// Comma-separated gamma grid.
        #[arg(long, default_value = "0.1,0.33,0.5,0.75,1,3,5")]
        gamma_grid: String,
        #[arg(long, default_value_t = 0.2)]
        validation_fraction: f64,
        #[arg(long, default_value_t = 1)]
        epochs: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Filter a noisy token stream through a known channel.
    Filter {
        /// Observed (noisy) token file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "ints")]
        format: String,
        /// causal, delay:D, or lookahead:L.
        #[arg(long, default_value = "causal")]
        regime: String,
        /// Monte-Carlo budget for delayed marginalization.
        #[arg(long, default_value_t = 1000)]
        mc: usize,
        /// Channel matrix JSON ({"pi": [[...]]}).
        #[arg(long)]
        channel: PathBuf,
        /// hamming, squared, or a JSON matrix file.
        #[arg(long, default_value = "hamming")]
        loss: String,
        /// Where to write the estimate indices (ints format).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Where to write metrics JSON (stdout always gets a summary).
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// Known source law JSON; enables oracle comparison metrics.
        #[arg(long)]
        source: Option<PathBuf>,
        /// Clean input token file; enables realized-loss metrics.
        #[arg(long)]
        clean: Option<PathBuf>,
    },
    /// Generate symbols from a frozen model.
    Generate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long, default_value_t = u32::MAX)]
        top_k: u32,
        #[arg(long, default_value_t = 64)]
        min_context: usize,
        /// Optional seed sequence traversed before generation.
        #[arg(long)]
        seed_file: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "raw")]
        format: String,
    },
    /// Distribution-level evaluation.
    Eval {
        #[command(subcommand)]
        what: EvalCommand,
    },
    /// Print model metadata.
    Inspect {
        model: PathBuf,
    },
    /// Scaling measurements, emitted as JSON.
    Bench {
        #[command(subcommand)]
        what: BenchCommand,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Exhaustive KL divergence between a known source and a model.
    Kl {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// 1-D Wasserstein distance between the symbol histograms of two
    /// token files.
    Wd {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value = "raw")]
        format: String,
    },
    /// KL convergence in the number of training sequences.
    Convergence {
        #[arg(long)]
        source: PathBuf,
        /// Comma-separated gamma values.
        #[arg(long, default_value = "0.05")]
        gammas: String,
        /// Comma-separated training-set sizes.
        #[arg(long, default_value = "100,1000,10000")]
        m_grid: String,
        #[arg(long, default_value_t = 4)]
        n: usize,
        /// Comma-separated seeds.
        #[arg(long, default_value = "1,2,3,4,5")]
        seeds: String,
        /// Optional CSV output path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Training throughput across corpus sizes.
    Train {
        #[arg(long, default_value = "100000,1000000,10000000")]
        sizes: String,
        #[arg(long, default_value_t = 0.02)]
        flip: f64,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Per-sample generation latency across model sizes.
    Generation {
        #[arg(long, default_value = "100000,10000000")]
        sizes: String,
        #[arg(long, default_value_t = 0.2)]
        flip: f64,
        #[arg(long, default_value = "1,2")]
        top_ks: String,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn parse_csv<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<T>()
                .map_err(|e| CliError::Parse(format!("bad {what} entry {part:?}: {e}")))
        })
        .collect()
}

fn parse_regime(s: &str) -> Result<Regime, CliError> {
    if s == "causal" {
        return Ok(Regime::Causal);
    }
    if let Some(d) = s.strip_prefix("delay:") {
        let d: usize = d
            .parse()
            .map_err(|e| CliError::Parse(format!("bad delay {d:?}: {e}")))?;
        return Ok(Regime::Delay { d });
    }
    if let Some(l) = s.strip_prefix("lookahead:") {
        let l: usize = l
            .parse()
            .map_err(|e| CliError::Parse(format!("bad lookahead {l:?}: {e}")))?;
        return Ok(Regime::Lookahead { l });
    }
    Err(CliError::Parse(format!(
        "unknown regime {s:?} (expected causal|delay:D|lookahead:L)"
    )))
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn write_file(path: &Path, data: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, data).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn load_model(path: &Path) -> Result<Lz78Spa, CliError> {
    Ok(Lz78Spa::from_bytes(&read_file(path)?)?)
}

fn load_source(path: &Path) -> Result<SourceSpec, CliError> {
    parse_source_json(&read_file(path)?)
}

fn markov_source_from_spec(source: &SourceSpec) -> Result<MarkovSource, CliError> {
    match source {
        SourceSpec::Markov1 {
            transition,
            initial,
        } => Ok(MarkovSource::new(
            transition.iter().map(|p| p.probs().to_vec()).collect(),
            initial.probs().to_vec(),
        )?),
        SourceSpec::Iid { pmf } => {
            // An iid law is the Markov chain whose every row is the marginal.
            let rows = vec![pmf.probs().to_vec(); pmf.len()];
            Ok(MarkovSource::new(rows, pmf.probs().to_vec())?)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train {
            input,
            format,
            gamma,
            epochs,
            freeze,
            output,
        } => {
            let format = TokenFormat::from_flag(&format)?;
            let sequences: Vec<Sequence> = input
                .iter()
                .map(|p| read_token_file(p, format))
                .collect::<Result<_, _>>()?;
            let alphabet = sequences[0].alphabet();
            let mut model = Lz78Spa::new_dirichlet(alphabet, gamma)?;
            let bits = model.train(&sequences, epochs)?;
            if freeze {
                model.freeze();
            }
            write_file(&output, &model.to_bytes())?;
            let report = model.complexity_report();
            println!(
                "{}",
                json!({
                    "output": output.display().to_string(),
                    "alphabet_size": alphabet.size(),
                    "gamma": gamma,
                    "epochs": epochs,
                    "frozen": freeze,
                    "nodes": report.node_count,
                    "symbols_trained": report.total_symbols,
                    "train_bits": bits,
                    "train_bits_per_symbol": bits / report.total_symbols.max(1) as f64,
                })
            );
        }
        Command::Compress {
            input,
            format,
            output,
            model,
            gamma,
        } => {
            let format = TokenFormat::from_flag(&format)?;
            let seq = read_token_file(&input, format)?;
            let stream = match &model {
                Some(path) => {
                    let loaded = load_model(path)?;
                    let hash = loaded.model_hash();
                    let mut working = loaded;
                    codec::encode(&mut working, &seq, CodecMode::Static, Some(hash))?
                }
                None => {
                    let mut working = Lz78Spa::new_dirichlet(seq.alphabet(), gamma)?;
                    codec::encode(&mut working, &seq, CodecMode::Adaptive, None)?
                }
            };
            let bytes = stream.to_bytes();
            write_file(&output, &bytes)?;
            println!(
                "{}",
                json!({
                    "output": output.display().to_string(),
                    "mode": if model.is_some() { "static" } else { "adaptive" },
                    "input_symbols": stream.len,
                    "payload_bits": stream.payload_bits(),
                    "bits_per_symbol": stream.payload_bits() as f64 / stream.len.max(1) as f64,
                    "container_bytes": bytes.len(),
                })
            );
        }
        Command::Decompress {
            input,
            format,
            output,
            model,
            gamma,
        } => {
            let format = TokenFormat::from_flag(&format)?;
            let stream = codec::EncodedStream::from_bytes(&read_file(&input)?)?;
            let seq = match &model {
                Some(path) => {
                    let loaded = load_model(path)?;
                    let hash = loaded.model_hash();
                    let mut working = loaded;
                    codec::decode(&mut working, &stream, Some(hash))?
                }
                None => {
                    if stream.model_hash.is_some() {
                        return Err(CliError::Parse(
                            "stream was encoded in static mode; pass --model".into(),
                        ));
                    }
                    let mut working = Lz78Spa::new_dirichlet(stream.alphabet, gamma)?;
                    codec::decode(&mut working, &stream, None)?
                }
            };
            write_token_file(&output, &seq, format)?;
            println!(
                "{}",
                json!({
                    "output": output.display().to_string(),
                    "symbols": seq.len(),
                })
            );
        }
        Command::Fit {
            labels,
            format,
            gamma,
            epochs,
            gamma_sweep,
            validation_fraction,
            seed,
            output_dir,
        } => {
            let format = TokenFormat::from_flag(&format)?;
            let manifest = parse_manifest(
                std::str::from_utf8(&read_file(&labels)?)
                    .map_err(|e| CliError::Parse(format!("manifest is not UTF-8: {e}")))?,
            )?;
            let train: Vec<(Sequence, String)> = manifest
                .iter()
                .map(|entry| {
                    read_token_file(Path::new(&entry.path), format)
                        .map(|seq| (seq, entry.label.clone()))
                })
                .collect::<Result<_, _>>()?;
            let chosen_gamma = if gamma_sweep {
                let config = classify::SweepConfig {
                    validation_fraction,
                    epochs,
                    seed,
                    ..Default::default()
                };
                let report = classify::sweep(&train, &config)?;
                report.best_gamma
            } else {
                gamma
            };
            let classifier = classify::fit(&train, chosen_gamma, epochs)?;
            std::fs::create_dir_all(&output_dir).map_err(|e| CliError::Io {
                path: output_dir.display().to_string(),
                source: e,
            })?;
            for (label, model) in classifier.labels().iter().zip(classifier.models()) {
                write_file(
                    &output_dir.join(format!("{label}.lzspa")),
                    &model.to_bytes(),
                )?;
            }
            let meta = BundleManifest {
                labels: classifier.labels().to_vec(),
                gamma: chosen_gamma,
                epochs,
                alphabet_size: train[0].0.alphabet().size(),
            };
            write_file(
                &output_dir.join("manifest.json"),
                serde_json::to_string_pretty(&meta)
                    .map_err(|e| CliError::Parse(e.to_string()))?
                    .as_bytes(),
            )?;
            println!(
                "{}",
                json!({
                    "output_dir": output_dir.display().to_string(),
                    "labels": classifier.labels(),
                    "gamma": chosen_gamma,
                    "swept": gamma_sweep,
                    "epochs": epochs,
                    "seed": seed,
                })
            );
        }
        Command::Classify {
            bundle,
            input,
            format,
        } => {
            let format = TokenFormat::from_flag(&format)?;
            let meta: BundleManifest = serde_json::from_slice(&read_file(
                &bundle.join("manifest.json"),
            )?)
            .map_err(|e| CliError::Parse(format!("bundle manifest: {e}")))?;
            let mut train_pairs = Vec::new();
            for label in &meta.labels {
                let model = load_model(&bundle.join(format!("{label}.lzspa")))?;
                train_pairs.push((label.clone(), model));
            }
            let seq = read_token_file(&input, format)?;
            // Score sequentially here; the library path is exercised by fit.
            let mut losses = Vec::new();
            for (_, model) in &train_pairs {
                losses.push(model.evaluate_log_loss(&seq)?.per_symbol_bits);
            }
            let mut best = 0usize;
            for (i, &l) in losses.iter().enumerate() {
                if l < losses[best] {
                    best = i;
                }
            }
            let table: serde_json::Map<String, serde_json::Value> = train_pairs
                .iter()
                .zip(&losses)
                .map(|((label, _), &l)| (label.clone(), json!(l)))
                .collect();
            println!(
                "{}",
                json!({
                    "label": train_pairs[best].0,
                    "per_symbol_bits": table,
                })
            );
        }
        Command::Sweep {
            labels,
            format,
            gamma_grid,
            validation_fraction,
            epochs,
            seed,
        } => {
            let format = TokenFormat::from_flag(&format)?;
            let manifest = parse_manifest(
                std::str::from_utf8(&read_file(&labels)?)
                    .map_err(|e| CliError::Parse(format!("manifest is not UTF-8: {e}")))?,
            )?;
            let train: Vec<(Sequence, String)> = manifest
                .iter()
                .map(|entry| {
                    read_token_file(Path::new(&entry.path), format)
                        .map(|seq| (seq, entry.label.clone()))
                })
                .collect::<Result<_, _>>()?;
            let config = classify::SweepConfig {
                gamma_grid: parse_csv(&gamma_grid, "gamma")?,
                validation_fraction,
                epochs,
                seed,
            };
            let report = classify::sweep(&train, &config)?;
            println!(
                "{}",
                json!({
                    "best_gamma": report.best_gamma,
                    "seed": seed,
                    "table": report
                        .table
                        .iter()
                        .zip(&report.accuracy)
                        .map(|(&(gamma, loss), &acc)| json!({
                            "gamma": gamma,
                            "mean_validation_bits_per_symbol": loss,
                            "validation_accuracy": acc,
                        }))
                        .collect::<Vec<_>>(),
                })
            );
        }
        Command::Filter {
            input,
            format,
            regime,
            mc,
            channel,
            loss,
            output,
            metrics,
            seed,
            gamma,
            source,
            clean,
        } => {
            let format = TokenFormat::from_flag(&format)?;
            let z_seq = read_token_file(&input, format)?;
            let channel = lzspa_cli::parse_channel_json(&read_file(&channel)?)?;
            let loss = resolve_loss(&loss, channel.num_inputs())?;
            let regime = parse_regime(&regime)?;
            if z_seq.alphabet().len() != channel.num_outputs() {
                return Err(CliError::Core(lzspa::Error::AlphabetMismatch {
                    expected: channel.num_outputs() as u32,
                    got: z_seq.alphabet().size(),
                }));
            }
            let mut spa = Lz78Spa::new_dirichlet(z_seq.alphabet(), gamma)?;
            let z = z_seq.tokens();
            let out = match regime {
                Regime::Causal => causal_filter(&mut spa, &channel, &loss, z)?,
                Regime::Delay { d } => delayed_filter(
                    &mut spa,
                    &channel,
                    &loss,
                    z,
                    d,
                    mc,
                    seed,
                    Marginalization::Auto,
                )?,
                Regime::Lookahead { l } => lookahead_filter(&mut spa, &channel, &loss, z, l)?,
            };

            let mut metrics_json = json!({
                "regime": format_regime(regime),
                "mc_samples": mc,
                "seed": seed,
                "gamma": gamma,
                "symbols": z.len(),
                "clamp_total": out.clamp_total,
            });
            if let Some(clean_path) = &clean {
                let x_seq = read_token_file(clean_path, format)?;
                if x_seq.len() != z.len() {
                    return Err(CliError::Parse(
                        "clean and noisy sequences differ in length".into(),
                    ));
                }
                let realized = mean_loss(x_seq.tokens(), &out.decisions, &loss);
                metrics_json["mean_loss"] = json!(realized);
                if let Some(source_path) = &source {
                    let spec = load_source(source_path)?;
                    let markov = markov_source_from_spec(&spec)?;
                    let oracle = dp_optimal_filter(&markov, &channel, &loss, z, regime)?;
                    let oracle_loss = mean_loss(x_seq.tokens(), &oracle.decisions, &loss);
                    let true_spa = TrueLawSpa::new(markov, channel.clone())?;
                    let true_bits = lzspa::log_loss(&true_spa, &z_seq)?.total_bits;
                    let mut fresh = Lz78Spa::new_dirichlet(z_seq.alphabet(), gamma)?;
                    let spa_bits = fresh.train(std::slice::from_ref(&z_seq), 1)?;
                    let kl_per_symbol =
                        ((spa_bits - true_bits) / z.len() as f64).max(0.0);
                    let bound = excess_loss_bound(kl_per_symbol, &channel, &loss, regime);
                    metrics_json["oracle_mean_loss"] = json!(oracle_loss);
                    metrics_json["excess_loss"] = json!(realized - oracle_loss);
                    metrics_json["kl_bits_per_symbol"] = json!(kl_per_symbol);
                    metrics_json["excess_loss_bound"] = json!(bound.bound);
                }
            }
            if let Some(out_path) = &output {
                // Estimate indices written in ints format over the estimate
                // alphabet.
                let est_alphabet = Alphabet::new(loss.num_estimates() as u32)?;
                let est = Sequence::new(
                    est_alphabet,
                    out.decisions.iter().map(|&d| d as u32).collect(),
                )?;
                write_token_file(out_path, &est, TokenFormat::Ints)?;
            }
            if let Some(metrics_path) = &metrics {
                write_file(
                    metrics_path,
                    serde_json::to_string_pretty(&metrics_json)
                        .map_err(|e| CliError::Parse(e.to_string()))?
                        .as_bytes(),
                )?;
            }
            println!("{metrics_json}");
        }
        Command::Generate {
            model,
            length,
            temperature,
            top_k,
            min_context,
            seed_file,
            rng_seed,
            output,
            format,
        } => {
            let format = TokenFormat::from_flag(&format)?;
            let model = load_model(&model)?;
            let mut cfg = GenConfig::new(length);
            cfg.temperature = temperature;
            cfg.top_k = top_k;
            cfg.min_context = min_context;
            cfg.rng_seed = rng_seed;
            if let Some(path) = &seed_file {
                cfg.seed_data = Some(read_token_file(path, format)?);
            }
            let out = generate(&model, &cfg)?;
            write_token_file(&output, &out.sequence, format)?;
            println!(
                "{}",
                json!({
                    "output": output.display().to_string(),
                    "length": out.sequence.len(),
                    "rng_seed": rng_seed,
                    "temperature": temperature,
                    "top_k": top_k,
                    "min_context": min_context,
                    "backshift_events": out.backshift_events,
                    "root_resets": out.root_resets,
                })
            );
        }
        Command::Eval { what } => match what {
            EvalCommand::Kl { source, model, n } => {
                let spec = load_source(&source)?;
                let model = load_model(&model)?;
                let kl = evaluation::exact_kl_bits(&spec, &model, n)?;
                println!("{}", json!({ "n": n, "kl_bits": kl }));
            }
            EvalCommand::Wd { a, b, format } => {
                let format = TokenFormat::from_flag(&format)?;
                let seq_a = read_token_file(&a, format)?;
                let seq_b = read_token_file(&b, format)?;
                let hist_a: Vec<f64> = seq_a.histogram().iter().map(|&c| c as f64).collect();
                let hist_b: Vec<f64> = seq_b.histogram().iter().map(|&c| c as f64).collect();
                let wd = evaluation::wasserstein_1d(&hist_a, &hist_b)?;
                println!("{}", json!({ "wasserstein": wd }));
            }
            EvalCommand::Convergence {
                source,
                gammas,
                m_grid,
                n,
                seeds,
                csv,
            } => {
                let spec = load_source(&source)?;
                let gammas: Vec<f64> = parse_csv(&gammas, "gamma")?;
                let m_grid: Vec<usize> = parse_csv(&m_grid, "m")?;
                let seeds: Vec<u64> = parse_csv(&seeds, "seed")?;
                let rows =
                    evaluation::convergence_experiment(&spec, &gammas, &m_grid, n, &seeds)?;
                if let Some(csv_path) = &csv {
                    let mut text = String::from("gamma,m,seed,kl_bits\n");
                    for r in &rows {
                        text.push_str(&format!(
                            "{},{},{},{}\n",
                            r.gamma, r.m, r.seed, r.kl_bits
                        ));
                    }
                    write_file(csv_path, text.as_bytes())?;
                }
                let medians: Vec<serde_json::Value> = m_grid
                    .iter()
                    .map(|&m| {
                        let kls: Vec<f64> = rows
                            .iter()
                            .filter(|r| r.m == m)
                            .map(|r| r.kl_bits)
                            .collect();
                        json!({ "m": m, "median_kl_bits": evaluation::median(&kls) })
                    })
                    .collect();
                println!(
                    "{}",
                    json!({
                        "n": n,
                        "seeds": seeds,
                        "medians": medians,
                        "rows": rows
                            .iter()
                            .map(|r| json!({
                                "gamma": r.gamma,
                                "m": r.m,
                                "seed": r.seed,
                                "kl_bits": r.kl_bits,
                            }))
                            .collect::<Vec<_>>(),
                    })
                );
            }
        },
        Command::Inspect { model } => {
            let model = load_model(&model)?;
            let report = model.complexity_report();
            let depth_histogram = model.tree().depth_histogram();
            println!(
                "{}",
                json!({
                    "alphabet_size": model.alphabet().size(),
                    "gamma": model.gamma(),
                    "epochs": model.epochs_trained(),
                    "frozen": model.is_frozen(),
                    "nodes": report.node_count,
                    "symbols_trained": report.total_symbols,
                    "max_node_visits": report.max_node_visits,
                    "nodes_per_n_over_log2n": report.nodes_per_n_over_log2n,
                    "depth_histogram": depth_histogram,
                    "training_bits_per_symbol": model.normalized_training_loss(),
                    "model_hash": hex::encode(model.model_hash()),
                })
            );
        }
        Command::Bench { what } => match what {
            BenchCommand::Train {
                sizes,
                flip,
                repeats,
                seed,
            } => {
                let sizes: Vec<usize> = parse_csv(&sizes, "size")?;
                let report = lzspa::bench::bench_train_throughput(&sizes, flip, repeats, seed)?;
                println!(
                    "{}",
                    json!({
                        "hardware": report.hardware,
                        "flip": flip,
                        "seed": seed,
                        "rows": report
                            .rows
                            .iter()
                            .map(|r| json!({
                                "n": r.n,
                                "seconds": r.seconds,
                                "symbols_per_sec": r.symbols_per_sec,
                                "nodes": r.node_count,
                                "nodes_per_n_over_log2n": r.nodes_per_n_over_log2n,
                                "model_bytes": r.model_bytes,
                            }))
                            .collect::<Vec<_>>(),
                    })
                );
            }
            BenchCommand::Generation {
                sizes,
                flip,
                top_ks,
                samples,
                seed,
            } => {
                let sizes: Vec<usize> = parse_csv(&sizes, "size")?;
                let top_ks: Vec<u32> = parse_csv(&top_ks, "top-k")?;
                let report = lzspa::bench::bench_generation_latency(
                    &sizes, flip, &top_ks, samples, seed,
                )?;
                println!(
                    "{}",
                    json!({
                        "hardware": report.hardware,
                        "sample_len": report.sample_len,
                        "seed": seed,
                        "rows": report
                            .rows
                            .iter()
                            .map(|r| json!({
                                "train_symbols": r.train_symbols,
                                "nodes": r.node_count,
                                "top_k": r.top_k,
                                "seconds_per_sample": r.seconds_per_sample,
                                "seconds_per_symbol": r.seconds_per_symbol,
                            }))
                            .collect::<Vec<_>>(),
                    })
                );
            }
        },
    }
    Ok(())
}

fn format_regime(regime: Regime) -> String {
    match regime {
        Regime::Causal => "causal".into(),
        Regime::Delay { d } => format!("delay:{d}"),
        Regime::Lookahead { l } => format!("lookahead:{l}"),
    }
}

/// Expands `--config file.json` into default flag values: any key in the
/// JSON object becomes `--key value` appended to the command line unless
/// the flag was given explicitly.
fn expand_config(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(pos) = args.iter().position(|a| a == "--config") else {
        return Ok(args);
    };
    let path = args
        .get(pos + 1)
        .ok_or_else(|| CliError::Parse("--config requires a file".into()))?
        .clone();
    let mut out: Vec<String> = args
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != pos && i != pos + 1)
        .map(|(_, a)| a.clone())
        .collect();
    let data = read_file(Path::new(&path))?;
    let map: serde_json::Map<String, serde_json::Value> = serde_json::from_slice(&data)
        .map_err(|e| CliError::Parse(format!("config json: {e}")))?;
    for (key, value) in map {
        let flag = format!("--{key}");
        if out.iter().any(|a| a == &flag || a.starts_with(&format!("{flag}="))) {
            continue;
        }
        out.push(flag);
        match value {
            serde_json::Value::String(s) => out.push(s),
            serde_json::Value::Bool(true) => {}
            serde_json::Value::Bool(false) => {
                out.pop();
            }
            other => out.push(other.to_string()),
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    // Thread count is the only environment knob.
    if let Ok(threads) = std::env::var("LZSPA_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let args: Vec<String> = std::env::args().collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = Cli::parse_from(args);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
