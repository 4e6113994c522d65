//! Command-line front end. Exit codes: 0 success, 1 usage, 2 data error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::corpus::{load_corpus, save_corpus, Document};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::pipeline::{gradient_check, train_pipeline, DocPrediction, GradModel, ModelBundle, Predictor, TrainConfig};
use crate::schema::{load_schema, LabelSchema};
use crate::synth::{gen_synth, SynthConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "evjoint", version, about = "Joint event and entity extraction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Crf,
    Within,
    Pair,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train all stages and write a model bundle.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Label schema JSON; the bundled schema when omitted.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Training configuration JSON; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON training report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Decode a corpus; writes JSONL and a `<out>.status.tsv` sidecar.
    Predict {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against gold and write a JSON report.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Report path; standard output when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Write train/dev/test JSONL splits of the synthetic corpus.
    GenSynth {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Comma-separated train,dev,test document counts.
        #[arg(long, default_value = "200,40,30", value_parser = parse_sizes)]
        sizes: (usize, usize, usize),
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients of one objective.
    CheckGradients {
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Corpus to check on; a small synthetic corpus when omitted.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        docs: usize,
        #[arg(long, default_value_t = 10)]
        bits: u32,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 200)]
        coords: usize,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Print the AD³ iteration trace of one document as TSV.
    DecodeTrace {
        #[arg(long)]
        bundle: PathBuf,
        /// Id of the document to decode.
        #[arg(long)]
        doc: String,
        /// Corpus holding the document.
        #[arg(long)]
        corpus: PathBuf,
        /// Output path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_sizes(s: &str) -> std::result::Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b, c] = parts.as_slice() else { return Err(format!("expected three comma-separated counts, got `{s}`")) };
    let n = |x: &str| x.parse::<usize>().map_err(|e| format!("bad count `{x}`: {e}"));
    Ok((n(a)?, n(b)?, n(c)?))
}

fn schema_or_bundled(path: Option<&Path>) -> Result<LabelSchema> {
    match path {
        Some(p) => load_schema(p),
        None => Ok(LabelSchema::bundled()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Sidecar path written next to the predicted corpus.
pub fn status_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".status.tsv");
    PathBuf::from(s)
}

pub fn status_tsv(preds: &[DocPrediction]) -> String {
    let mut s = String::from("doc_id\tstatus\titerations\tprimal\tdual\n");
    for p in preds {
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", p.document.doc_id, p.status.as_str(), p.iterations, p.primal, p.dual);
    }
    s
}

pub fn trace_tsv(p: &DocPrediction) -> String {
    let mut s = String::from("iter\tdual\tbest_dual\tprimal_residual\tdual_residual\teta\n");
    for r in &p.trace {
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}\t{}", r.iter, r.dual, r.best_dual, r.primal_residual, r.dual_residual, r.eta);
    }
    s
}

/// Decodes every document; output order follows the input.
pub fn predict_corpus(predictor: &Predictor, docs: &[Document]) -> Result<Vec<DocPrediction>> {
    let out = predictor.predict_all(docs)?;
    for p in &out {
        // Decoder soundness: every emitted argument must be schema-valid.
        p.document.validate(&predictor.bundle.schema)?;
    }
    Ok(out)
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train { corpus, schema, config, out, report } => {
            let schema = schema_or_bundled(schema.as_deref())?;
            let cfg = match config {
                Some(p) => TrainConfig::from_json(&std::fs::read_to_string(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?)?,
                None => TrainConfig::default(),
            };
            let docs = load_corpus(&corpus, &schema)?;
            let (bundle, rep) = train_pipeline(&docs, &schema, &cfg)?;
            bundle.save(&out)?;
            if let Some(p) = report {
                write_text(&p, &serde_json::to_string_pretty(&rep).expect("report serializes"))?;
            }
            eprintln!("wrote {}", out.display());
        }
        Command::Predict { bundle, corpus, out } => {
            let predictor = Predictor::new(ModelBundle::load(&bundle)?)?;
            let docs = load_corpus(&corpus, &predictor.bundle.schema)?;
            let preds = predict_corpus(&predictor, &docs)?;
            let outs: Vec<Document> = preds.iter().map(|p| p.document.clone()).collect();
            save_corpus(&out, &outs)?;
            write_text(&status_path(&out), &status_tsv(&preds))?;
        }
        Command::Evaluate { gold, pred, report, schema } => {
            let schema = schema_or_bundled(schema.as_deref())?;
            let g = load_corpus(&gold, &schema)?;
            let p = load_corpus(&pred, &schema)?;
            let mut text = evaluate(&g, &p)?.to_json();
            text.push('\n');
            emit(report.as_deref(), &text)?;
        }
        Command::GenSynth { seed, sizes, out, schema } => {
            let schema = schema_or_bundled(schema.as_deref())?;
            let cfg = SynthConfig { seed, n_train: sizes.0, n_dev: sizes.1, n_test: sizes.2, ..SynthConfig::default() };
            let corpus = gen_synth(&cfg, &schema)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            for (name, docs) in [("train", &corpus.train), ("dev", &corpus.dev), ("test", &corpus.test)] {
                save_corpus(out.join(format!("{name}.jsonl")), docs)?;
            }
        }
        Command::CheckGradients { model, corpus, schema, docs, bits, eps, coords, tol, seed } => {
            let schema = schema_or_bundled(schema.as_deref())?;
            let data = match corpus {
                Some(p) => load_corpus(&p, &schema)?,
                None => {
                    let cfg = SynthConfig { seed, n_train: docs, n_dev: 0, n_test: 0, ..SynthConfig::default() };
                    gen_synth(&cfg, &schema)?.train
                }
            };
            let mut cfg = TrainConfig::default();
            cfg.features = cfg.features.with_bits(bits);
            let model = match model {
                ModelArg::Crf => GradModel::Crf,
                ModelArg::Within => GradModel::Within,
                ModelArg::Pair => GradModel::Pair,
            };
            let err = gradient_check(&data, &schema, &cfg, model, eps, coords, seed)?;
            let ok = err <= tol;
            println!("{}\tmax_rel_error={err:.3e}\t{}", serde_json::to_value(model).unwrap().as_str().unwrap(), if ok { "pass" } else { "fail" });
            if !ok {
                return Err(Error::Numerical(format!("gradient error {err:.3e} exceeds {tol:e}")));
            }
        }
        Command::DecodeTrace { bundle, doc, corpus, out } => {
            let predictor = Predictor::new(ModelBundle::load(&bundle)?)?;
            let docs = load_corpus(&corpus, &predictor.bundle.schema)?;
            let d = docs
                .iter()
                .find(|d| d.doc_id == doc)
                .ok_or_else(|| Error::Evaluation(format!("document `{doc}` not in {}", corpus.display())))?;
            emit(out.as_deref(), &trace_tsv(&predictor.predict(d)?))?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_DATA
            }
        }
    }
}
