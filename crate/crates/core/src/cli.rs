//! Command-line front end.
//!
//! [`run`] takes the full argument vector plus output and error streams and
//! returns the process exit code: 0 on success, 1 on a runtime failure and
//! 2 on a usage error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataio::{load_csv, synthetic_cellular_seeded, Dataset};
use crate::error::{Error, Result};
use crate::gf2::{format_bits, parse_bits, BitMatrix};
use crate::hamming::{all_words, HammingCode};
use crate::keyfile::{self, NeuralCiphertext};
use crate::mceliece::{keygen, worked_example_key, TOY_WARNING};
use crate::model::{self, PqcnnConfig, PqcnnModel, SweepRow};
use crate::nn::{Activation, OptimizerKind};
use crate::rng_from_seed;
use crate::unistat::uniformity_report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const PQCNN_WARNING: &str =
    "warning: experimental neural cipher with no security analysis; do not protect real data with it";

/// Sweep report column names, in order.
pub const SWEEP_HEADER: [&str; 4] = ["alpha", "mse", "theta_noise", "theta_ciphertext"];

const ALPHA_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "pqcnn",
    version,
    about = "Toy code-based cipher (Hamming + McEliece) and its neural-network generalization",
    arg_required_else_help = true
)]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, env = "PQCNN_SEED", default_value_t = 42)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Walk through the (7,4) Hamming and McEliece worked example and check every value.
    Demo,
    /// Encode, corrupt and decode every message of a Hamming code.
    HammingRoundtrip {
        /// Parity bits r; the code is (2^r - 1, 2^r - 1 - r).
        #[arg(long, default_value_t = 3)]
        parity_bits: usize,
    },
    /// Generate a McEliece key pair over a Hamming code.
    McelieceKeygen(McElieceKeygenArgs),
    /// Encrypt a bit string with a McEliece public key.
    McelieceEncrypt(McElieceEncryptArgs),
    /// Decrypt a McEliece ciphertext with the private key.
    McelieceDecrypt(McElieceDecryptArgs),
    /// Train a neural cipher and write its encrypt and decrypt keys.
    PqcnnTrain(TrainArgs),
    /// Encrypt one plaintext vector with a neural encrypt key.
    PqcnnEncrypt(PqcnnEncryptArgs),
    /// Decrypt one neural ciphertext with the decrypt key.
    PqcnnDecrypt(PqcnnDecryptArgs),
    /// Report reconstruction error and uniformity of a trained key pair on a dataset.
    PqcnnEval(PqcnnEvalArgs),
    /// Train one model per noise weight and report MSE and uniformity for each.
    Sweep(SweepArgs),
    /// Chi-squared uniformity test of a list of numbers.
    Uniformity(UniformityArgs),
}

#[derive(Debug, Args)]
struct McElieceKeygenArgs {
    /// Parity bits r of the underlying Hamming code.
    #[arg(long, default_value_t = 3)]
    parity_bits: usize,
    /// Public key output file.
    #[arg(long)]
    public: PathBuf,
    /// Private key output file.
    #[arg(long)]
    private: PathBuf,
    /// Replace existing files.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct McElieceEncryptArgs {
    /// Public key file.
    #[arg(long)]
    key: PathBuf,
    /// Message bits, e.g. 1000 or "1 0 0 0".
    #[arg(long)]
    message: String,
    /// Number of random bit errors (0 or 1).
    #[arg(long, default_value_t = 1)]
    errors: usize,
    /// Ciphertext output file.
    #[arg(long)]
    out: PathBuf,
    /// Replace an existing file.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct McElieceDecryptArgs {
    /// Private key file.
    #[arg(long)]
    key: PathBuf,
    /// Ciphertext file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Print every intermediate of the decryption.
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV file of signal strengths, or "synthetic".
    #[arg(long, default_value = "synthetic")]
    data: String,
    /// The CSV file has a header row.
    #[arg(long)]
    header: bool,
    /// Rows to generate when --data is synthetic.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Plaintext dimension.
    #[arg(long, default_value_t = 361)]
    c: usize,
    /// Ciphertext dimension.
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Histogram bins for the uniformity test.
    #[arg(long, default_value_t = 16)]
    m: usize,
    /// Training epochs.
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long = "lr", default_value_t = 1e-3)]
    learning_rate: f64,
    /// adam or gd.
    #[arg(long, default_value = "adam")]
    optimizer: String,
    /// Soft-histogram bandwidth used in the training loss.
    #[arg(long, default_value_t = 0.02)]
    bandwidth: f64,
    /// Weight of the uniformity term in the loss.
    #[arg(long, default_value_t = 1.0)]
    theta_weight: f64,
    /// Share of training rows held out for validation.
    #[arg(long, default_value_t = 0.1)]
    validation_fraction: f64,
    /// Six comma-separated activations for S,G,P,L,M,N
    /// (linear, sigmoid, tanh, leaky_relu).
    #[arg(long, default_value = "tanh,tanh,sigmoid,tanh,tanh,linear")]
    activations: String,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Noise weight.
    #[arg(long, default_value_t = 0.4)]
    alpha: f64,
    /// Encrypt key output file.
    #[arg(long)]
    encrypt_key: PathBuf,
    /// Decrypt key output file.
    #[arg(long)]
    decrypt_key: PathBuf,
    /// Optional per-epoch history CSV.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Replace existing files.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct PqcnnEncryptArgs {
    /// Encrypt key file.
    #[arg(long)]
    key: PathBuf,
    /// Plaintext vector file: c numbers separated by whitespace or commas.
    #[arg(long = "in")]
    input: PathBuf,
    /// Ciphertext output file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct PqcnnDecryptArgs {
    /// Decrypt key file.
    #[arg(long)]
    key: PathBuf,
    /// Ciphertext file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Write the plaintext here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct PqcnnEvalArgs {
    #[arg(long)]
    encrypt_key: PathBuf,
    #[arg(long)]
    decrypt_key: PathBuf,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Noise weights: start:end:step (end inclusive) or a comma list.
    #[arg(long, default_value = "0.1:1.0:0.1")]
    alphas: String,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Report CSV output file.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct UniformityArgs {
    /// File of numbers separated by whitespace or commas.
    #[arg(long = "in")]
    input: PathBuf,
    /// Histogram bins.
    #[arg(long, default_value_t = 16)]
    m: usize,
}

/// Parses `args` (program name first) and runs the selected command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let seed = cli.seed;
    match &cli.command {
        Command::Demo => demo(out, err),
        Command::HammingRoundtrip { parity_bits } => hamming_roundtrip(*parity_bits, out),
        Command::McelieceKeygen(a) => mceliece_keygen(a, seed, out, err),
        Command::McelieceEncrypt(a) => mceliece_encrypt(a, seed, out, err),
        Command::McelieceDecrypt(a) => mceliece_decrypt(a, out, err),
        Command::PqcnnTrain(a) => pqcnn_train(a, seed, out, err),
        Command::PqcnnEncrypt(a) => pqcnn_encrypt(a, seed, out, err),
        Command::PqcnnDecrypt(a) => pqcnn_decrypt(a, out, err),
        Command::PqcnnEval(a) => pqcnn_eval(a, seed, out),
        Command::Sweep(a) => sweep(a, seed, out, err),
        Command::Uniformity(a) => uniformity(a, out),
    }
}

fn bracket(bits: &[u8]) -> String {
    format_bits(bits)
}

/// Records each printed value against its expected golden value.
struct Transcript<'a> {
    out: &'a mut dyn Write,
    mismatches: Vec<String>,
}

impl Transcript<'_> {
    fn check(&mut self, label: &str, actual: &[u8], expected: &[u8]) -> Result<()> {
        writeln!(self.out, "{label:<28} {}", bracket(actual))?;
        if actual != expected {
            self.mismatches
                .push(format!("{label}: got {}, expected {}", bracket(actual), bracket(expected)));
        }
        Ok(())
    }
}

fn demo(out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    writeln!(err, "{TOY_WARNING}")?;
    let code = HammingCode::standard_7_4();
    let sk = worked_example_key();
    let pk = sk.public_key();
    let x = [1, 0, 0, 0];
    let mut t = Transcript {
        out,
        mismatches: Vec::new(),
    };

    writeln!(t.out, "Hamming (7,4), message x = {}", bracket(&x))?;
    let codeword = code.encode(&x)?;
    t.check("encode x·G", &codeword, &[1, 1, 1, 0, 0, 0, 0])?;
    t.check("decode c·R", &code.decode(&codeword)?, &x)?;
    let mut noisy = codeword.clone();
    noisy[6] ^= 1;
    t.check("noisy codeword (bit 7)", &noisy, &[1, 1, 1, 0, 0, 0, 1])?;
    let syndrome = code.syndrome(&noisy)?;
    t.check("syndrome y·H", &syndrome, &[1, 1, 1])?;
    let fix = code.correct(&noisy)?;
    match fix.error_position {
        Some(p) => writeln!(t.out, "{:<28} position {p}", "corrected error")?,
        None => writeln!(t.out, "{:<28} none", "corrected error")?,
    }
    if fix.error_position != Some(7) {
        t.mismatches.push(format!(
            "corrected position: got {:?}, expected 7",
            fix.error_position
        ));
    }
    t.check("corrected codeword", &fix.corrected, &codeword)?;

    writeln!(t.out)?;
    writeln!(t.out, "McEliece public key G' = S·G·P")?;
    writeln!(t.out, "{}", pk.g_prime())?;
    let expected_g = BitMatrix::from_rows(&[
        [0, 1, 1, 0, 1, 0, 1],
        [1, 0, 0, 0, 1, 0, 1],
        [1, 0, 1, 0, 1, 1, 0],
        [1, 0, 1, 1, 0, 0, 1],
    ])?;
    if pk.g_prime() != &expected_g {
        t.mismatches.push("public key G' differs from the worked example".into());
    }
    let ct = pk.encrypt_with_error(&x, None)?;
    t.check("ciphertext x·G'", &ct.bits, &[0, 1, 1, 0, 1, 0, 1])?;
    let trace = sk.decrypt_trace(&ct)?;
    t.check("y·P⁻¹", &trace.unpermuted, &[1, 0, 1, 0, 1, 0, 1])?;
    t.check("decoded x·S", &trace.scrambled, &[1, 1, 0, 1])?;
    t.check("recovered x·S·S⁻¹", &trace.message, &x)?;

    if t.mismatches.is_empty() {
        writeln!(t.out, "all values match the worked example")?;
        Ok(EXIT_OK)
    } else {
        for m in &t.mismatches {
            writeln!(err, "mismatch: {m}")?;
        }
        Ok(EXIT_FAILURE)
    }
}

fn hamming_roundtrip(parity_bits: usize, out: &mut dyn Write) -> Result<i32> {
    let code = HammingCode::construct(parity_bits)?;
    if code.k() > 16 {
        return Err(Error::InvalidArgument(format!(
            "exhaustive roundtrip over 2^{} messages is too large",
            code.k()
        )));
    }
    let (mut cases, mut failures) = (0usize, 0usize);
    for x in all_words(code.k()) {
        let clean = code.encode(&x)?;
        for flip in 0..=code.n() {
            let mut word = clean.clone();
            if flip > 0 {
                word[flip - 1] ^= 1;
            }
            let fixed = code.correct(&word)?;
            cases += 1;
            if code.decode(&fixed.corrected)? != x {
                failures += 1;
            }
        }
    }
    writeln!(
        out,
        "({}, {}) code: {cases} cases (no error + {} single flips per message), {failures} failures",
        code.n(),
        code.k(),
        code.n()
    )?;
    Ok(if failures == 0 { EXIT_OK } else { EXIT_FAILURE })
}

fn mceliece_keygen(a: &McElieceKeygenArgs, seed: u64, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    writeln!(err, "{TOY_WARNING}")?;
    refuse_overwrite(&[&a.public, &a.private], a.force)?;
    let code = HammingCode::construct(a.parity_bits)?;
    let (pk, sk) = keygen(code, &mut rng_from_seed(seed))?;
    keyfile::write_file(&a.public, &keyfile::write_mceliece_public(&pk), a.force)?;
    keyfile::write_file(&a.private, &keyfile::write_mceliece_private(&sk), a.force)?;
    writeln!(
        out,
        "wrote ({}, {}) key pair: {} (public), {} (private)",
        pk.n(),
        pk.k(),
        a.public.display(),
        a.private.display()
    )?;
    Ok(EXIT_OK)
}

fn mceliece_encrypt(a: &McElieceEncryptArgs, seed: u64, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    writeln!(err, "{TOY_WARNING}")?;
    refuse_overwrite(&[&a.out], a.force)?;
    let pk = keyfile::read_mceliece_public(&read_text(&a.key)?)?;
    let message = parse_bits(&a.message)?;
    let ct = pk.encrypt(&message, &mut rng_from_seed(seed), a.errors)?;
    keyfile::write_file(&a.out, &keyfile::write_mceliece_ciphertext(&ct), a.force)?;
    writeln!(out, "ciphertext {}", bracket(&ct.bits))?;
    Ok(EXIT_OK)
}

fn mceliece_decrypt(a: &McElieceDecryptArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    writeln!(err, "{TOY_WARNING}")?;
    let sk = keyfile::read_mceliece_private(&read_text(&a.key)?)?;
    let ct = keyfile::read_mceliece_ciphertext(&read_text(&a.input)?)?;
    let trace = sk.decrypt_trace(&ct)?;
    if a.trace {
        writeln!(out, "{:<20} {}", "y·P⁻¹", bracket(&trace.unpermuted))?;
        match trace.error_position {
            Some(p) => writeln!(out, "{:<20} position {p}", "corrected error")?,
            None => writeln!(out, "{:<20} none", "corrected error")?,
        }
        writeln!(out, "{:<20} {}", "corrected", bracket(&trace.corrected))?;
        writeln!(out, "{:<20} {}", "decoded x·S", bracket(&trace.scrambled))?;
    }
    writeln!(out, "message {}", bracket(&trace.message))?;
    Ok(EXIT_OK)
}

fn parse_activations(text: &str) -> Result<[Activation; 6]> {
    let acts: Vec<Activation> = text
        .split(',')
        .map(|a| a.trim().parse())
        .collect::<Result<_>>()?;
    acts.try_into().map_err(|v: Vec<Activation>| {
        Error::InvalidArgument(format!("expected 6 activations, got {}", v.len()))
    })
}

fn parse_optimizer(text: &str) -> Result<OptimizerKind> {
    match text {
        "adam" => Ok(OptimizerKind::adam()),
        "gd" | "sgd" => Ok(OptimizerKind::GradientDescent),
        other => Err(Error::InvalidArgument(format!(
            "unknown optimizer {other:?} (expected adam or gd)"
        ))),
    }
}

fn build_config(m: &ModelArgs, alpha: f64, seed: u64) -> Result<PqcnnConfig> {
    let config = PqcnnConfig {
        c: m.c,
        n: m.n,
        m: m.m,
        alpha,
        activations: parse_activations(&m.activations)?,
        epochs: m.epochs,
        batch_size: m.batch_size,
        learning_rate: m.learning_rate,
        optimizer: parse_optimizer(&m.optimizer)?,
        bandwidth: m.bandwidth,
        theta_weight: m.theta_weight,
        validation_fraction: m.validation_fraction,
        seed,
    };
    config.validate()?;
    Ok(config)
}

/// Loads the CSV at `--data`, or generates `--samples` synthetic rows of `c` features.
fn load_data(d: &DataArgs, c: usize, seed: u64) -> Result<Dataset> {
    let ds = if d.data == "synthetic" {
        synthetic_cellular_seeded(d.samples, c, seed)?
    } else {
        load_csv(Path::new(&d.data), d.header)?
    };
    if ds.c() != c {
        return Err(Error::DimensionMismatch {
            expected: format!("{c} features per row"),
            actual: format!("{} in {}", ds.c(), d.data),
        });
    }
    Ok(ds)
}

fn refuse_overwrite(paths: &[&Path], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(Error::WouldOverwrite(p.to_path_buf())),
        None => Ok(()),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Numbers separated by whitespace or commas.
fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for tok in line.split(|ch: char| ch.is_whitespace() || ch == ',').filter(|t| !t.is_empty()) {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("cannot parse {tok:?} as a number"),
            })?;
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument(format!("{} holds no numbers", path.display())));
    }
    Ok(values)
}

fn pqcnn_train(a: &TrainArgs, seed: u64, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    writeln!(err, "{PQCNN_WARNING}")?;
    let config = build_config(&a.model, a.alpha, seed)?;
    let mut outputs: Vec<&Path> = vec![&a.encrypt_key, &a.decrypt_key];
    if let Some(h) = &a.history {
        outputs.push(h);
    }
    refuse_overwrite(&outputs, a.force)?;
    let data = load_data(&a.data, config.c, seed)?;
    let outcome = model::train(&config, &data)?;

    keyfile::write_file(&a.encrypt_key, &keyfile::write_encrypt_key(&outcome.model.encrypt_key()), a.force)?;
    keyfile::write_file(&a.decrypt_key, &keyfile::write_decrypt_key(&outcome.model.decrypt_key()), a.force)?;
    if let Some(path) = &a.history {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::InvalidArgument(e.to_string());
        w.write_record([
            "epoch", "train_loss", "train_mse", "train_theta", "val_loss", "val_mse", "val_theta", "best_val_loss",
        ])
        .map_err(csv_err)?;
        for r in &outcome.history {
            w.write_record([
                r.epoch.to_string(),
                format!("{:.6e}", r.train_loss),
                format!("{:.6e}", r.train_mse),
                format!("{:.6e}", r.train_theta),
                format!("{:.6e}", r.val_loss),
                format!("{:.6e}", r.val_mse),
                format!("{:.6e}", r.val_theta),
                format!("{:.6e}", r.best_val_loss),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        keyfile::write_file(path, &String::from_utf8_lossy(&bytes), a.force)?;
    }
    let best = &outcome.history[outcome.best_epoch - 1];
    writeln!(
        out,
        "trained {} epochs on {} rows; best epoch {}: val_mse {:.4e}, val_theta {:.4e}",
        outcome.history.len(),
        data.len(),
        outcome.best_epoch,
        outcome.validation_mse,
        best.val_theta
    )?;
    writeln!(
        out,
        "wrote {} (encrypt) and {} (decrypt)",
        a.encrypt_key.display(),
        a.decrypt_key.display()
    )?;
    Ok(EXIT_OK)
}

fn pqcnn_encrypt(a: &PqcnnEncryptArgs, seed: u64, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    writeln!(err, "{PQCNN_WARNING}")?;
    refuse_overwrite(&[&a.out], a.force)?;
    let ek = keyfile::read_encrypt_key(&read_text(&a.key)?)?;
    let x = read_numbers(&a.input)?;
    let (values, _) = ek.encrypt(&x, &mut rng_from_seed(seed))?;
    let ct = NeuralCiphertext {
        alpha: ek.alpha,
        values,
    };
    keyfile::write_file(&a.out, &keyfile::write_neural_ciphertext(&ct), a.force)?;
    let report = uniformity_report(&ct.values, ek.m)?;
    writeln!(
        out,
        "wrote {} ({} values, theta {:.4e})",
        a.out.display(),
        ct.values.len(),
        report.theta
    )?;
    Ok(EXIT_OK)
}

fn pqcnn_decrypt(a: &PqcnnDecryptArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    writeln!(err, "{PQCNN_WARNING}")?;
    if let Some(path) = &a.out {
        refuse_overwrite(&[path], a.force)?;
    }
    let dk = keyfile::read_decrypt_key(&read_text(&a.key)?)?;
    let ct = keyfile::read_neural_ciphertext(&read_text(&a.input)?)?;
    let x = dk.decrypt(&ct.values)?;
    let line = x.iter().map(|&v| keyfile::format_real(v)).collect::<Vec<_>>().join(" ") + "\n";
    match &a.out {
        Some(path) => {
            keyfile::write_file(path, &line, a.force)?;
            writeln!(out, "wrote {} ({} values)", path.display(), x.len())?;
        }
        None => write!(out, "{line}")?,
    }
    Ok(EXIT_OK)
}

fn pqcnn_eval(a: &PqcnnEvalArgs, seed: u64, out: &mut dyn Write) -> Result<i32> {
    let ek = keyfile::read_encrypt_key(&read_text(&a.encrypt_key)?)?;
    let dk = keyfile::read_decrypt_key(&read_text(&a.decrypt_key)?)?;
    let model = PqcnnModel::from_keys(ek, dk)?;
    let data = load_data(&a.data, model.c(), seed)?;
    let row = model::evaluate(&model, &data, seed)?;
    write!(out, "{}", sweep_table(&[row]))?;
    Ok(EXIT_OK)
}

/// Parses `start:end:step` (end inclusive within 1e-9), a comma list, or a single value.
pub fn parse_alphas(text: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| Error::InvalidArgument(format!("alpha list {text:?}: {what}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("cannot parse {s:?}")));
    let alphas: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:end:step"));
        }
        let (start, end, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || end < start {
            return Err(bad("need step > 0 and end >= start"));
        }
        let count = ((end - start) / step + ALPHA_TOLERANCE).floor() as usize + 1;
        // Snap to a 1e-9 grid so 0.1 + 2·0.1 prints as 0.3.
        (0..count)
            .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
            .collect()
    } else {
        text.split(',').map(num).collect::<Result<_>>()?
    };
    if alphas.is_empty() {
        return Err(bad("empty"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a >= 0.0) || !a.is_finite()) {
        return Err(bad(&format!("negative or non-finite alpha {a}")));
    }
    Ok(alphas)
}

fn sweep_cells(row: &SweepRow) -> [String; 4] {
    [
        format!("{}", row.alpha),
        format!("{:.6e}", row.mse),
        format!("{:.6e}", row.theta_noise),
        format!("{:.6e}", row.theta_ciphertext),
    ]
}

/// The sweep report as CSV text.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidArgument(e.to_string());
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for row in rows {
        w.write_record(sweep_cells(row)).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

/// The sweep report as an aligned text table.
pub fn sweep_table(rows: &[SweepRow]) -> String {
    let cells: Vec<[String; 4]> = rows.iter().map(sweep_cells).collect();
    let widths: Vec<usize> = (0..4)
        .map(|j| cells.iter().map(|r| r[j].len()).chain([SWEEP_HEADER[j].len()]).max().unwrap_or(0))
        .collect();
    let mut text = String::new();
    let mut line = |fields: [&str; 4]| {
        let padded: Vec<String> = fields.iter().zip(&widths).map(|(f, w)| format!("{f:>w$}")).collect();
        text.push_str(padded.join("  ").trim_end());
        text.push('\n');
    };
    line(SWEEP_HEADER);
    for r in &cells {
        line([&r[0], &r[1], &r[2], &r[3]]);
    }
    text
}

fn sweep(a: &SweepArgs, seed: u64, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    writeln!(err, "{PQCNN_WARNING}")?;
    let alphas = parse_alphas(&a.alphas)?;
    let config = build_config(&a.model, alphas[0], seed)?;
    refuse_overwrite(&[&a.out], a.force)?;
    let data = load_data(&a.data, config.c, seed)?;
    let rows = model::alpha_sweep_with(&config, &data, &alphas, |i, row| {
        let _ = writeln!(
            err,
            "[{}/{}] alpha {}: mse {:.4e}, theta(y') {:.4e}",
            i + 1,
            alphas.len(),
            row.alpha,
            row.mse,
            row.theta_ciphertext
        );
    })?;
    keyfile::write_file(&a.out, &sweep_csv(&rows)?, a.force)?;
    write!(out, "{}", sweep_table(&rows))?;
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(EXIT_OK)
}

fn uniformity(a: &UniformityArgs, out: &mut dyn Write) -> Result<i32> {
    let values = read_numbers(&a.input)?;
    let r = uniformity_report(&values, a.m)?;
    writeln!(out, "values     {}", values.len())?;
    writeln!(out, "bins       {}", r.bin_count)?;
    writeln!(out, "chi_square {:.6e}", r.chi_square)?;
    writeln!(out, "dof        {}", r.dof)?;
    writeln!(out, "theta      {:.6e}", r.theta)?;
    writeln!(out, "verdict    {}", if r.uniform { "uniform" } else { "not uniform" })?;
    Ok(EXIT_OK)
}
