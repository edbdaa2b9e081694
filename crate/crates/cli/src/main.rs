//! Command-line surface for trace ingestion, annotation, backtracking
//! analyses, filter evaluation, sweeps, and synthetic corpus generation.

mod config;

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use burstlab_annotate::{annotate_corpus_blocking, write_audit_jsonl, AnnotatorConfig, PromptTemplate};
use burstlab_core::corpus::{corpus_summary, Corpus};
use burstlab_core::events::{qualifying_events, burst_partition, burst_stats};
use burstlab_core::filters::{loqo_evaluate, loqo_evaluate_multi, EvalConfig, EvalReport, FilterSpec};
use burstlab_core::report;
use burstlab_core::stats::lr_test;
use burstlab_core::synth::{synth_corpus, ClassProfile, SynthParams};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "burstlab", version, about = "Backtracking-burst analytics and early-exit filter replay for reasoning traces")]
struct Cli {
    /// Key=value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InOut {
    /// Input corpus JSONL.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,

    /// Output artifact path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a raw or pre-annotated JSONL corpus and write it back in
    /// canonical form (segments always present, correctness recomputed).
    Ingest {
        #[command(flatten)]
        io: InOut,
        /// Corpus name recorded in reports (defaults to the file stem).
        #[arg(long)]
        name: Option<String>,
    },

    /// Label segments through a chat-completions endpoint.
    Annotate {
        #[command(flatten)]
        io: InOut,
        /// Endpoint base URL up to the API root, e.g. http://host:8000/v1.
        #[arg(long)]
        endpoint: String,
        /// Model name sent with each request.
        #[arg(long)]
        model: String,
        /// Prompt template file with {segment} and {context} placeholders.
        #[arg(long)]
        template: Option<PathBuf>,
        /// Audit log JSONL path.
        #[arg(long)]
        audit: Option<PathBuf>,
        /// Annotation report JSON path (summary goes to stderr otherwise).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Environment variable holding the API credential.
        #[arg(long, default_value = "ANNOTATOR_API_KEY")]
        key_env: String,
        /// Preceding segments included as context.
        #[arg(long, default_value_t = 3)]
        context: usize,
        /// Maximum requests in flight.
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
        #[arg(long, default_value_t = 0.0)]
        temperature: f64,
        #[arg(long, default_value_t = 5)]
        max_attempts: u32,
        /// Base retry backoff in milliseconds (doubles per attempt).
        #[arg(long, default_value_t = 1000)]
        backoff_ms: u64,
        /// Re-annotate segments that already carry scores.
        #[arg(long)]
        force: bool,
    },

    /// Corpus summary (question/trace counts, accuracy, length statistics).
    Summary {
        /// Input corpus JSONL.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Summary JSON path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write severity-bucket CSV here.
        #[arg(long)]
        severity_csv: Option<PathBuf>,
        /// Severity bucket width in score units.
        #[arg(long, default_value_t = 10.0)]
        bucket_width: f64,
    },

    /// Per-trace burst statistics CSV.
    Bursts {
        #[command(flatten)]
        io: InOut,
        /// Thresholds (comma separated).
        #[arg(long = "taus", visible_alias = "tau", value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        #[arg(long)]
        gap: Option<u64>,
    },

    /// Event rate and median first qualifying depth per threshold and class.
    Timing {
        #[command(flatten)]
        io: InOut,
        #[arg(long = "taus", visible_alias = "tau", value_delimiter = ',')]
        taus: Option<Vec<f64>>,
    },

    /// Pooled 20-bin profiles (and optional burst-start and feature dumps).
    Profiles {
        #[command(flatten)]
        io: InOut,
        #[arg(long = "taus", visible_alias = "tau", value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        #[arg(long)]
        min_support_correct: Option<u64>,
        #[arg(long)]
        min_support_wrong: Option<u64>,
        /// Also write class-mean burst-start counts per bin here.
        #[arg(long)]
        burst_starts: Option<PathBuf>,
        /// Also write the per-trace feature dump here.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        gap: Option<u64>,
    },

    /// Completed-trace filter evaluation under leave-one-question replay.
    FilterEval {
        #[command(flatten)]
        io: InOut,
        #[arg(long, value_enum, default_value_t = MethodArg::HardCutoff)]
        method: MethodArg,
        /// Hard-cutoff limits; "none" evaluates the keep-everything row.
        #[arg(long, value_delimiter = ',')]
        limits: Option<Vec<String>>,
        /// Also write the full nested report JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        gap: Option<u64>,
        #[arg(long)]
        ridge: Option<f64>,
    },

    /// Online prefix policy versus matched hard cutoffs per checkpoint.
    PrefixEval {
        #[command(flatten)]
        io: InOut,
        #[arg(long = "depths", value_delimiter = ',')]
        depths: Option<Vec<u64>>,
        /// single: each depth evaluated independently; multi: drop at the
        /// first flagging checkpoint.
        #[arg(long, value_enum, default_value_t = PrefixMode::Single)]
        mode: PrefixMode,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        gap: Option<u64>,
        #[arg(long)]
        ridge: Option<f64>,
    },

    /// Likelihood-ratio tests: burden features versus burden plus burst
    /// features, pooled over the corpus.
    LrTest {
        #[command(flatten)]
        io: InOut,
        #[arg(long = "depths", value_delimiter = ',')]
        depths: Option<Vec<u64>>,
        #[arg(long = "taus", visible_alias = "tau", value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        #[arg(long)]
        gap: Option<u64>,
    },

    /// Class-mean burst statistics over a (tau, gap) grid.
    SweepGap {
        #[command(flatten)]
        io: InOut,
        #[arg(long = "gaps", visible_alias = "gap", value_delimiter = ',')]
        gaps: Option<Vec<u64>>,
        #[arg(long = "taus", visible_alias = "tau", value_delimiter = ',')]
        taus: Option<Vec<f64>>,
    },

    /// Deterministic synthetic corpus with class-separated burst structure.
    Synth {
        /// Output corpus JSONL.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 20)]
        questions: usize,
        #[arg(long, default_value_t = 20)]
        traces_per_question: usize,
        #[arg(long, default_value_t = 0.7)]
        correct_fraction: f64,
        #[arg(long, value_enum, default_value_t = SynthPreset::HeavyWrongTail)]
        preset: SynthPreset,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    HardCutoff,
    Hybrid,
    BurstOnly,
    RateOnly,
    CountOnly,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PrefixMode {
    Single,
    Multi,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SynthPreset {
    /// Wrong traces carry heavier, later burst structure.
    HeavyWrongTail,
    /// Both classes share one profile; differences vanish in expectation.
    Null,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                std::process::exit(0);
            }
            let _ = e.print();
            std::process::exit(1);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

/// 1 for validation problems, 2 for I/O problems.
fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
        if let Some(core_err) = cause.downcast_ref::<burstlab_core::Error>() {
            return match core_err {
                burstlab_core::Error::Io(_) => 2,
                _ => 1,
            };
        }
        if let Some(annotate_err) = cause.downcast_ref::<burstlab_annotate::AnnotateError>() {
            return match annotate_err {
                burstlab_annotate::AnnotateError::Http(_)
                | burstlab_annotate::AnnotateError::Io(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    Corpus::read_jsonl_path(path)
        .with_context(|| format!("failed to ingest corpus {}", path.display()))
}

fn out_writer(path: &Path) -> Result<BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("cannot create output file {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn run(cli: Cli) -> Result<()> {
    let run_config = load_config(&cli.config)?;
    match cli.command {
        Command::Ingest { io, name } => {
            let mut corpus = read_corpus(&io.input)?;
            if let Some(name) = name {
                corpus.name = name;
            }
            corpus.write_jsonl(out_writer(&io.out)?)?;
            eprintln!(
                "ingested {} traces over {} questions into {}",
                corpus.traces.len(),
                corpus.questions.len(),
                io.out.display()
            );
            Ok(())
        }

        Command::Annotate {
            io,
            endpoint,
            model,
            template,
            audit,
            report: report_path,
            key_env,
            context,
            concurrency,
            temperature,
            max_attempts,
            backoff_ms,
            force,
        } => {
            let corpus = read_corpus(&io.input)?;
            let mut annotator = AnnotatorConfig::new(endpoint, model);
            annotator.api_key_env = key_env;
            annotator.context_segments = context;
            annotator.concurrency = concurrency;
            annotator.temperature = temperature;
            annotator.max_attempts = max_attempts;
            annotator.backoff_base = Duration::from_millis(backoff_ms);
            annotator.force = force;
            if let Some(path) = template {
                annotator.template = PromptTemplate::from_file(&path)?;
            }
            let (annotated, annotation_report, audit_records) =
                annotate_corpus_blocking(&corpus, &annotator)?;
            annotated.write_jsonl(out_writer(&io.out)?)?;
            if let Some(path) = audit {
                write_audit_jsonl(out_writer(&path)?, &audit_records)?;
            }
            let summary = serde_json::to_string_pretty(&annotation_report)?;
            match report_path {
                Some(path) => out_writer(&path)?.write_all(summary.as_bytes())?,
                None => eprintln!(
                    "annotated: {} scored, {} skipped, {} transport failures, {} parse failures",
                    annotation_report.scored,
                    annotation_report.skipped,
                    annotation_report.transport_failures,
                    annotation_report.parse_failures
                ),
            }
            if annotation_report.transport_failures + annotation_report.parse_failures > 0 {
                eprintln!(
                    "warning: {} segments left unscored",
                    annotation_report.transport_failures + annotation_report.parse_failures
                );
            }
            Ok(())
        }

        Command::Summary {
            input,
            out,
            severity_csv,
            bucket_width,
        } => {
            let corpus = read_corpus(&input)?;
            let summary = corpus_summary(&corpus)?;
            let json = report::summary_to_json(&summary)?;
            match out {
                Some(path) => {
                    let mut w = out_writer(&path)?;
                    w.write_all(json.as_bytes())?;
                    w.write_all(b"\n")?;
                }
                None => println!("{json}"),
            }
            if let Some(path) = severity_csv {
                report::write_severity_csv(out_writer(&path)?, &corpus, bucket_width)?;
            }
            Ok(())
        }

        Command::Bursts { io, taus, gap } => {
            let corpus = read_corpus(&io.input)?;
            let taus = taus.unwrap_or(run_config.taus);
            report::write_burst_stats_csv(out_writer(&io.out)?, &corpus, &taus, gap.unwrap_or(run_config.gap))?;
            Ok(())
        }

        Command::Timing { io, taus } => {
            let corpus = read_corpus(&io.input)?;
            let taus = taus.unwrap_or(run_config.taus);
            report::write_timing_csv(out_writer(&io.out)?, &corpus, &taus)?;
            Ok(())
        }

        Command::Profiles {
            io,
            taus,
            min_support_correct,
            min_support_wrong,
            burst_starts,
            features,
            gap,
        } => {
            let corpus = read_corpus(&io.input)?;
            let taus = taus.unwrap_or(run_config.taus);
            let gap = gap.unwrap_or(run_config.gap);
            report::write_pooled_profiles_csv(
                out_writer(&io.out)?,
                &corpus,
                &taus,
                min_support_correct.unwrap_or(run_config.min_support_correct),
                min_support_wrong.unwrap_or(run_config.min_support_wrong),
            )?;
            if let Some(path) = burst_starts {
                report::write_burst_start_csv(out_writer(&path)?, &corpus, &taus, gap)?;
            }
            if let Some(path) = features {
                report::write_feature_dump_csv(out_writer(&path)?, &corpus, gap)?;
            }
            Ok(())
        }

        Command::FilterEval {
            io,
            method,
            limits,
            json,
            gap,
            ridge,
        } => {
            let corpus = read_corpus(&io.input)?;
            let eval_config = EvalConfig {
                gap: gap.unwrap_or(run_config.gap),
                ridge: ridge.unwrap_or(run_config.ridge),
                checkpoints: run_config.checkpoints.clone(),
            };
            let specs: Vec<FilterSpec> = match method {
                MethodArg::HardCutoff => {
                    let raw = limits.unwrap_or_else(|| {
                        ["none", "16000", "12000", "10000", "8000", "5000", "2000"]
                            .iter()
                            .map(|s| s.to_string())
                            .collect()
                    });
                    raw.iter()
                        .map(|value| {
                            Ok(FilterSpec::HardCutoff {
                                limit: match value.as_str() {
                                    "none" => None,
                                    other => Some(other.parse::<u64>().with_context(|| {
                                        format!("bad hard-cutoff limit {other:?}")
                                    })?),
                                },
                            })
                        })
                        .collect::<Result<_>>()?
                }
                MethodArg::Hybrid => vec![FilterSpec::CompletedHybrid],
                MethodArg::BurstOnly => vec![FilterSpec::BurstOnly],
                MethodArg::RateOnly => vec![FilterSpec::RateOnly],
                MethodArg::CountOnly => vec![FilterSpec::CountOnly],
            };
            let mut reports = Vec::new();
            for spec in &specs {
                reports.push(loqo_evaluate(&corpus, spec, &eval_config)?.report);
            }
            report::write_eval_reports_csv(out_writer(&io.out)?, &reports)?;
            if let Some(path) = json {
                out_writer(&path)?.write_all(report::eval_reports_to_json(&reports)?.as_bytes())?;
            }
            Ok(())
        }

        Command::PrefixEval {
            io,
            depths,
            mode,
            json,
            gap,
            ridge,
        } => {
            let corpus = read_corpus(&io.input)?;
            let depths = depths.unwrap_or(run_config.checkpoints.clone());
            if depths.is_empty() || depths.iter().any(|&d| d == 0) {
                bail!("prefix depths must be positive");
            }
            let eval_config = EvalConfig {
                gap: gap.unwrap_or(run_config.gap),
                ridge: ridge.unwrap_or(run_config.ridge),
                checkpoints: depths.clone(),
            };
            match mode {
                PrefixMode::Single => {
                    let mut rows = Vec::new();
                    let mut reports: Vec<EvalReport> = Vec::new();
                    for &depth in &depths {
                        let hard = loqo_evaluate(
                            &corpus,
                            &FilterSpec::HardCutoff { limit: Some(depth) },
                            &eval_config,
                        )?
                        .report;
                        let online = loqo_evaluate(
                            &corpus,
                            &FilterSpec::OnlinePrefix { depth },
                            &eval_config,
                        )?
                        .report;
                        rows.push(report::PrefixGridRow {
                            depth,
                            hard_acc: hard.retained_acc_pooled,
                            hard_drop: hard.drop_rate,
                            online_acc: online.retained_acc_pooled,
                            online_drop: online.drop_rate,
                            online_word_save: online.word_save,
                        });
                        reports.push(hard);
                        reports.push(online);
                    }
                    report::write_prefix_grid_csv(out_writer(&io.out)?, &rows)?;
                    if let Some(path) = json {
                        out_writer(&path)?
                            .write_all(report::eval_reports_to_json(&reports)?.as_bytes())?;
                    }
                }
                PrefixMode::Multi => {
                    let outcome = loqo_evaluate_multi(&corpus, &depths, &eval_config)?;
                    report::write_eval_reports_csv(out_writer(&io.out)?, &[outcome.report.clone()])?;
                    if let Some(path) = json {
                        out_writer(&path)?.write_all(
                            report::eval_reports_to_json(&[outcome.report])?.as_bytes(),
                        )?;
                    }
                }
            }
            Ok(())
        }

        Command::LrTest { io, depths, taus, gap } => {
            let corpus = read_corpus(&io.input)?;
            let depths = depths.unwrap_or(run_config.checkpoints.clone());
            let taus = taus.unwrap_or(run_config.taus);
            let gap = gap.unwrap_or(run_config.gap);
            let labels: Vec<bool> = corpus.traces.iter().map(|t| !t.correct).collect();
            let mut rows = Vec::new();
            for &depth in &depths {
                if depth == 0 {
                    bail!("lr-test depths must be positive");
                }
                for &tau in &taus {
                    // at a fixed prefix depth the count is an exact multiple
                    // of the rate, so the burden baseline is one feature
                    let mut reduced = Vec::with_capacity(corpus.traces.len());
                    let mut full = Vec::with_capacity(corpus.traces.len());
                    for trace in &corpus.traces {
                        let events = qualifying_events(trace, tau, Some(depth));
                        let rate = 1000.0 * events.len() as f64 / depth as f64;
                        let trace_depths: Vec<u64> = events.iter().map(|e| e.depth).collect();
                        let stats = burst_stats(&burst_partition(&trace_depths, gap)?);
                        reduced.push(vec![rate]);
                        full.push(vec![rate, stats.s2, stats.rho, stats.m_max as f64]);
                    }
                    rows.push((depth, tau, lr_test(&full, &reduced, &labels)?));
                }
            }
            report::write_lr_results_csv(out_writer(&io.out)?, &rows)?;
            Ok(())
        }

        Command::SweepGap { io, gaps, taus } => {
            let corpus = read_corpus(&io.input)?;
            let gaps = gaps.unwrap_or(run_config.gaps);
            let taus = taus.unwrap_or(run_config.taus);
            report::write_class_means_csv(out_writer(&io.out)?, &corpus, &taus, &gaps)?;
            Ok(())
        }

        Command::Synth {
            out,
            seed,
            questions,
            traces_per_question,
            correct_fraction,
            preset,
        } => {
            let seed = seed.unwrap_or(run_config.seed);
            let params = match preset {
                SynthPreset::HeavyWrongTail => SynthParams {
                    seed,
                    questions,
                    traces_per_question,
                    correct_fraction,
                    ..SynthParams::default()
                },
                SynthPreset::Null => SynthParams {
                    correct_fraction,
                    correct: ClassProfile::baseline_correct(),
                    wrong: ClassProfile::baseline_correct(),
                    ..SynthParams::null(seed, questions, traces_per_question)
                },
            };
            let corpus = synth_corpus(&params)?;
            corpus.write_jsonl(out_writer(&out)?)?;
            eprintln!(
                "wrote {} traces over {} questions to {}",
                corpus.traces.len(),
                corpus.questions.len(),
                out.display()
            );
            Ok(())
        }
    }
}
