//! Text formats for keys and ciphertexts.
//!
//! Keys:
//!
//! ```text
//! PQCNN-KEY v1
//! kind <mceliece-public | mceliece-private | pqcnn-encrypt | pqcnn-decrypt>
//! ...kind-specific body...
//! ```
//!
//! McEliece public keys carry `dims k=<k> n=<n>` and `k` rows of `0`/`1`
//! characters. Private keys carry `dims k=<k> n=<n>` and then labelled
//! sections `S`, `G`, `H`, `R`, `P`, each a `<label> <rows> <cols>` line
//! followed by its rows. Neural keys carry
//! `config c=<c> n=<n> m=<m> alpha=<α> activations=<a1>,<a2>,<a3>` and three
//! `W <rows> <cols>` sections of space-separated decimals written with 17
//! significant digits.
//!
//! Ciphertexts start with `PQCNN-CT v1`. A neural ciphertext continues with
//! `n <n>`, `alpha <α>` and one line of `n` decimals; a McEliece ciphertext
//! continues with `bits <n>` and one line of `0`/`1` characters.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::gf2::{parse_bits, BitMatrix};
use crate::hamming::HammingCode;
use crate::mceliece::{Ciphertext, PrivateKey, PublicKey};
use crate::model::{DecryptKey, EncryptKey};
use crate::nn::{Activation, DenseLayer, Network};

pub const KEY_HEADER: &str = "PQCNN-KEY";
pub const CIPHERTEXT_HEADER: &str = "PQCNN-CT";
pub const FORMAT_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    McEliecePublic,
    McEliecePrivate,
    PqcnnEncrypt,
    PqcnnDecrypt,
}

impl KeyKind {
    pub fn tag(self) -> &'static str {
        match self {
            KeyKind::McEliecePublic => "mceliece-public",
            KeyKind::McEliecePrivate => "mceliece-private",
            KeyKind::PqcnnEncrypt => "pqcnn-encrypt",
            KeyKind::PqcnnDecrypt => "pqcnn-decrypt",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        [
            KeyKind::McEliecePublic,
            KeyKind::McEliecePrivate,
            KeyKind::PqcnnEncrypt,
            KeyKind::PqcnnDecrypt,
        ]
        .into_iter()
        .find(|k| k.tag() == tag)
    }
}

/// Formats a real with 17 significant digits, enough to round-trip any f64.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Line cursor with 1-based line numbers for error reporting.
struct Lines<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().collect(),
            pos: 0,
        }
    }

    fn line_no(&self) -> usize {
        self.pos
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        let line = self.lines.get(self.pos).ok_or_else(|| Error::Parse {
            line: self.pos + 1,
            message: format!("unexpected end of file: missing {what}"),
        })?;
        self.pos += 1;
        Ok(line.trim_end_matches('\r'))
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line_no(),
            message: message.into(),
        }
    }

    fn finish(&self) -> Result<()> {
        if let Some(extra) = self.lines[self.pos..].iter().position(|l| !l.trim().is_empty()) {
            return Err(Error::Parse {
                line: self.pos + extra + 1,
                message: "unexpected trailing content".into(),
            });
        }
        Ok(())
    }
}

fn check_header(lines: &mut Lines<'_>, expected: &str) -> Result<()> {
    let header = lines.next("header")?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(expected) {
        return Err(lines.error(format!("expected header {expected:?}, found {header:?}")));
    }
    let version = parts.next().unwrap_or("");
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            expected: FORMAT_VERSION.into(),
            found: version.into(),
        });
    }
    Ok(())
}

fn read_kind(lines: &mut Lines<'_>) -> Result<KeyKind> {
    let line = lines.next("kind line")?;
    let tag = line
        .strip_prefix("kind ")
        .ok_or_else(|| lines.error(format!("expected \"kind <tag>\", found {line:?}")))?
        .trim();
    KeyKind::from_tag(tag).ok_or_else(|| lines.error(format!("unknown key kind {tag:?}")))
}

/// Reads the key kind of a key file without parsing its body.
pub fn peek_kind(text: &str) -> Result<KeyKind> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, KEY_HEADER)?;
    read_kind(&mut lines)
}

fn expect_kind(lines: &mut Lines<'_>, expected: KeyKind) -> Result<()> {
    check_header(lines, KEY_HEADER)?;
    let found = read_kind(lines)?;
    if found != expected {
        return Err(Error::KindMismatch {
            expected: expected.tag().into(),
            found: found.tag().into(),
        });
    }
    Ok(())
}

/// Parses `key=value` tokens after a leading keyword.
fn key_values<'a>(lines: &Lines<'_>, line: &'a str, keyword: &str) -> Result<Vec<(&'a str, &'a str)>> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(keyword) {
        return Err(lines.error(format!("expected {keyword:?} line, found {line:?}")));
    }
    tokens
        .map(|t| {
            t.split_once('=')
                .ok_or_else(|| lines.error(format!("malformed field {t:?}")))
        })
        .collect()
}

fn field<'a>(lines: &Lines<'_>, fields: &[(&str, &'a str)], name: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| *k == name)
        .map(|(_, v)| *v)
        .ok_or_else(|| lines.error(format!("missing field {name:?}")))
}

fn parse_num<T: std::str::FromStr>(lines: &Lines<'_>, text: &str, what: &str) -> Result<T> {
    text.parse()
        .map_err(|_| lines.error(format!("invalid {what}: {text:?}")))
}

fn write_bit_rows(out: &mut String, m: &BitMatrix) {
    for i in 0..m.rows() {
        for &b in m.row(i) {
            out.push(if b == 1 { '1' } else { '0' });
        }
        out.push('\n');
    }
}

fn read_bit_rows(lines: &mut Lines<'_>, rows: usize, cols: usize, section: &str) -> Result<BitMatrix> {
    let mut bits = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let line = lines.next(&format!("row {} of section {section}", i + 1))?;
        let row = parse_bits(line).map_err(|e| lines.error(e.to_string()))?;
        if row.len() != cols {
            return Err(lines.error(format!(
                "section {section}: expected {cols} bits, found {}",
                row.len()
            )));
        }
        bits.extend(row);
    }
    BitMatrix::from_bits(rows, cols, bits)
}

fn read_section_header(lines: &mut Lines<'_>, label: &str) -> Result<(usize, usize)> {
    let line = lines.next(&format!("section {label}"))?;
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != label {
        return Err(lines.error(format!(
            "expected \"{label} <rows> <cols>\", found {line:?}"
        )));
    }
    Ok((
        parse_num(lines, parts[1], "row count")?,
        parse_num(lines, parts[2], "column count")?,
    ))
}

pub fn write_mceliece_public(pk: &PublicKey) -> String {
    let mut out = format!(
        "{KEY_HEADER} {FORMAT_VERSION}\nkind {}\ndims k={} n={}\n",
        KeyKind::McEliecePublic.tag(),
        pk.k(),
        pk.n()
    );
    write_bit_rows(&mut out, pk.g_prime());
    out
}

pub fn read_mceliece_public(text: &str) -> Result<PublicKey> {
    let mut lines = Lines::new(text);
    expect_kind(&mut lines, KeyKind::McEliecePublic)?;
    let dims_line = lines.next("dims line")?;
    let fields = key_values(&lines, dims_line, "dims")?;
    let k: usize = parse_num(&lines, field(&lines, &fields, "k")?, "k")?;
    let n: usize = parse_num(&lines, field(&lines, &fields, "n")?, "n")?;
    let g_prime = read_bit_rows(&mut lines, k, n, "public key")?;
    lines.finish()?;
    Ok(PublicKey::new(g_prime))
}

pub fn write_mceliece_private(sk: &PrivateKey) -> String {
    let code = sk.code();
    let mut out = format!(
        "{KEY_HEADER} {FORMAT_VERSION}\nkind {}\ndims k={} n={}\n",
        KeyKind::McEliecePrivate.tag(),
        code.k(),
        code.n()
    );
    for (label, m) in [
        ("S", sk.s()),
        ("G", code.generator()),
        ("H", code.parity_check()),
        ("R", code.decoder()),
        ("P", sk.p()),
    ] {
        let _ = writeln!(out, "{label} {} {}", m.rows(), m.cols());
        write_bit_rows(&mut out, m);
    }
    out
}

pub fn read_mceliece_private(text: &str) -> Result<PrivateKey> {
    let mut lines = Lines::new(text);
    expect_kind(&mut lines, KeyKind::McEliecePrivate)?;
    let dims_line = lines.next("dims line")?;
    let fields = key_values(&lines, dims_line, "dims")?;
    let k: usize = parse_num(&lines, field(&lines, &fields, "k")?, "k")?;
    let n: usize = parse_num(&lines, field(&lines, &fields, "n")?, "n")?;
    let mut sections = Vec::with_capacity(5);
    for (label, expected) in [
        ("S", (k, k)),
        ("G", (k, n)),
        ("H", (n, n.saturating_sub(k))),
        ("R", (n, k)),
        ("P", (n, n)),
    ] {
        let shape = read_section_header(&mut lines, label)?;
        if shape != expected {
            return Err(lines.error(format!(
                "section {label}: expected {}x{}, found {}x{}",
                expected.0, expected.1, shape.0, shape.1
            )));
        }
        sections.push(read_bit_rows(&mut lines, shape.0, shape.1, label)?);
    }
    lines.finish()?;
    let mut it = sections.into_iter();
    let (s, g, h, r, p) = (
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
    );
    let code = HammingCode::from_matrices(g, h, r)?;
    PrivateKey::from_factors(s, code, p)
}

fn write_neural_key(kind: KeyKind, network: &Network, c: usize, n: usize, m: usize, alpha: f64) -> String {
    let acts: Vec<&str> = network.layers().iter().map(|l| l.activation.name()).collect();
    let mut out = format!(
        "{KEY_HEADER} {FORMAT_VERSION}\nkind {}\nconfig c={c} n={n} m={m} alpha={} activations={}\n",
        kind.tag(),
        format_real(alpha),
        acts.join(",")
    );
    for layer in network.layers() {
        let (rows, cols) = layer.weights.dim();
        let _ = writeln!(out, "W {rows} {cols}");
        for row in layer.weights.rows() {
            let cells: Vec<String> = row.iter().map(|&v| format_real(v)).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
    }
    out
}

struct NeuralKeyBody {
    network: Network,
    c: usize,
    n: usize,
    m: usize,
    alpha: f64,
}

fn read_neural_key(text: &str, kind: KeyKind) -> Result<NeuralKeyBody> {
    let mut lines = Lines::new(text);
    expect_kind(&mut lines, kind)?;
    let config_line = lines.next("config line")?;
    let fields = key_values(&lines, config_line, "config")?;
    let c: usize = parse_num(&lines, field(&lines, &fields, "c")?, "c")?;
    let n: usize = parse_num(&lines, field(&lines, &fields, "n")?, "n")?;
    let m: usize = parse_num(&lines, field(&lines, &fields, "m")?, "m")?;
    let alpha: f64 = parse_num(&lines, field(&lines, &fields, "alpha")?, "alpha")?;
    let activations: Vec<Activation> = field(&lines, &fields, "activations")?
        .split(',')
        .map(|a| a.parse().map_err(|e: Error| lines.error(e.to_string())))
        .collect::<Result<_>>()?;
    if activations.len() != 3 {
        return Err(lines.error(format!("expected 3 activations, found {}", activations.len())));
    }

    let shapes = match kind {
        KeyKind::PqcnnEncrypt => [(c, c), (c, n), (n, n)],
        _ => [(n, n), (n, c), (c, c)],
    };
    let mut layers = Vec::with_capacity(3);
    for (i, (&expected, &act)) in shapes.iter().zip(&activations).enumerate() {
        let section = format!("W{}", i + 1);
        let shape = read_section_header(&mut lines, "W").map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{message} (weight section {section})"),
            },
            other => other,
        })?;
        if shape != expected {
            return Err(lines.error(format!(
                "weight section {section}: expected {}x{}, found {}x{}",
                expected.0, expected.1, shape.0, shape.1
            )));
        }
        let mut values = Vec::with_capacity(shape.0 * shape.1);
        for r in 0..shape.0 {
            let line = lines.next(&format!("row {} of weight section {section}", r + 1))?;
            let before = values.len();
            for tok in line.split_whitespace() {
                values.push(parse_num::<f64>(&lines, tok, "weight")?);
            }
            if values.len() - before != shape.1 {
                return Err(lines.error(format!(
                    "weight section {section}: expected {} values, found {}",
                    shape.1,
                    values.len() - before
                )));
            }
        }
        let weights = Array2::from_shape_vec(shape, values)
            .map_err(|e| lines.error(e.to_string()))?;
        layers.push(DenseLayer::new(weights, act));
    }
    lines.finish()?;
    Ok(NeuralKeyBody {
        network: Network::new(layers)?,
        c,
        n,
        m,
        alpha,
    })
}

pub fn write_encrypt_key(key: &EncryptKey) -> String {
    write_neural_key(KeyKind::PqcnnEncrypt, &key.network, key.c(), key.n(), key.m, key.alpha)
}

pub fn read_encrypt_key(text: &str) -> Result<EncryptKey> {
    let body = read_neural_key(text, KeyKind::PqcnnEncrypt)?;
    let key = EncryptKey::new(body.network, body.alpha, body.m)?;
    debug_assert_eq!((key.c(), key.n()), (body.c, body.n));
    Ok(key)
}

pub fn write_decrypt_key(key: &DecryptKey) -> String {
    write_neural_key(KeyKind::PqcnnDecrypt, &key.network, key.c(), key.n(), key.m, key.alpha)
}

pub fn read_decrypt_key(text: &str) -> Result<DecryptKey> {
    let body = read_neural_key(text, KeyKind::PqcnnDecrypt)?;
    let key = DecryptKey::new(body.network, body.alpha, body.m)?;
    debug_assert_eq!((key.c(), key.n()), (body.c, body.n));
    Ok(key)
}

/// A neural ciphertext `y'` and the noise weight it was produced with.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralCiphertext {
    pub alpha: f64,
    pub values: Vec<f64>,
}

pub fn write_neural_ciphertext(ct: &NeuralCiphertext) -> String {
    let cells: Vec<String> = ct.values.iter().map(|&v| format_real(v)).collect();
    format!(
        "{CIPHERTEXT_HEADER} {FORMAT_VERSION}\nn {}\nalpha {}\n{}\n",
        ct.values.len(),
        format_real(ct.alpha),
        cells.join(" ")
    )
}

fn keyword_value<'a>(lines: &mut Lines<'a>, keyword: &str) -> Result<&'a str> {
    let line = lines.next(&format!("{keyword} line"))?;
    line.strip_prefix(keyword)
        .and_then(|rest| rest.strip_prefix(' '))
        .map(str::trim)
        .ok_or_else(|| lines.error(format!("expected \"{keyword} <value>\", found {line:?}")))
}

pub fn read_neural_ciphertext(text: &str) -> Result<NeuralCiphertext> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, CIPHERTEXT_HEADER)?;
    let n_text = keyword_value(&mut lines, "n")?;
    let n: usize = parse_num(&lines, n_text, "n")?;
    let alpha_text = keyword_value(&mut lines, "alpha")?;
    let alpha: f64 = parse_num(&lines, alpha_text, "alpha")?;
    let line = lines.next("ciphertext values")?;
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|t| parse_num(&lines, t, "ciphertext value"))
        .collect::<Result<_>>()?;
    if values.len() != n {
        return Err(lines.error(format!("expected {n} values, found {}", values.len())));
    }
    lines.finish()?;
    Ok(NeuralCiphertext { alpha, values })
}

pub fn write_mceliece_ciphertext(ct: &Ciphertext) -> String {
    let bits: String = ct.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
    format!("{CIPHERTEXT_HEADER} {FORMAT_VERSION}\nbits {}\n{bits}\n", ct.bits.len())
}

pub fn read_mceliece_ciphertext(text: &str) -> Result<Ciphertext> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, CIPHERTEXT_HEADER)?;
    let n_text = keyword_value(&mut lines, "bits")?;
    let n: usize = parse_num(&lines, n_text, "bit count")?;
    let bits = read_bit_rows(&mut lines, 1, n, "ciphertext")?.into_bits();
    lines.finish()?;
    Ok(Ciphertext { bits })
}

/// Writes `contents` to `path`, refusing to replace an existing file unless `force`.
pub fn write_file(path: &Path, contents: &str, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::WouldOverwrite(path.to_path_buf()));
    }
    std::fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mceliece::{keygen, worked_example_key};
    use crate::model::{PqcnnConfig, PqcnnModel};
    use crate::rng_from_seed;

    fn small_model() -> PqcnnModel {
        let cfg = PqcnnConfig {
            c: 5,
            n: 8,
            m: 4,
            alpha: 0.35,
            ..PqcnnConfig::default()
        };
        PqcnnModel::build(&cfg, &mut rng_from_seed(3)).unwrap()
    }

    #[test]
    fn mceliece_keys_roundtrip() {
        let sk = worked_example_key();
        let text = write_mceliece_public(&sk.public_key());
        assert!(text.starts_with("PQCNN-KEY v1\nkind mceliece-public\ndims k=4 n=7\n0110101\n"));
        assert_eq!(read_mceliece_public(&text).unwrap(), sk.public_key());
        assert_eq!(write_mceliece_public(&read_mceliece_public(&text).unwrap()), text);

        let (_, sk) = keygen(HammingCode::construct(4).unwrap(), &mut rng_from_seed(5)).unwrap();
        let text = write_mceliece_private(&sk);
        assert_eq!(read_mceliece_private(&text).unwrap(), sk);
    }

    #[test]
    fn neural_keys_roundtrip_bitwise() {
        let model = small_model();
        let text = write_encrypt_key(&model.encrypt_key());
        let ek = read_encrypt_key(&text).unwrap();
        assert_eq!(ek, model.encrypt_key());
        assert_eq!(write_encrypt_key(&ek), text);
        assert!(text.contains("config c=5 n=8 m=4 alpha=3.4999999999999998e-1 activations=tanh,tanh,sigmoid"));

        let dk = read_decrypt_key(&write_decrypt_key(&model.decrypt_key())).unwrap();
        assert_eq!(dk, model.decrypt_key());
    }

    #[test]
    fn kind_and_version_errors() {
        let model = small_model();
        let enc = write_encrypt_key(&model.encrypt_key());
        assert!(matches!(read_decrypt_key(&enc), Err(Error::KindMismatch { .. })));
        assert_eq!(peek_kind(&enc).unwrap(), KeyKind::PqcnnEncrypt);

        let v2 = enc.replacen("PQCNN-KEY v1", "PQCNN-KEY v2", 1);
        assert!(matches!(read_encrypt_key(&v2), Err(Error::UnsupportedVersion { .. })));
        assert!(matches!(read_encrypt_key("garbage\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn truncated_file_names_missing_section() {
        let text = write_encrypt_key(&small_model().encrypt_key());
        let lines: Vec<&str> = text.lines().collect();
        // Header, kind, config, then W 5 5 + 5 rows, W 5 8 + 5 rows: cut before the third section.
        let cut = lines[..15].join("\n");
        match read_encrypt_key(&cut) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 16);
                assert!(message.contains("W3"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let cut = lines[..10].join("\n");
        match read_encrypt_key(&cut) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("W2"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
        let sk_text = write_mceliece_private(&worked_example_key());
        let cut: Vec<&str> = sk_text.lines().take(20).collect();
        match read_mceliece_private(&cut.join("\n")) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("section"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_values_report_line() {
        let text = write_encrypt_key(&small_model().encrypt_key());
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[5] = lines[5].replacen('e', "x", 1);
        match read_encrypt_key(&lines.join("\n")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ciphertexts_roundtrip() {
        let ct = NeuralCiphertext {
            alpha: 0.4,
            values: vec![0.1, 1.0 / 3.0, -2.5e-7, 1.2345678901234567],
        };
        let text = write_neural_ciphertext(&ct);
        assert!(text.starts_with("PQCNN-CT v1\nn 4\nalpha 4.0000000000000002e-1\n"));
        assert_eq!(read_neural_ciphertext(&text).unwrap(), ct);
        assert!(read_neural_ciphertext(&text.replace("n 4", "n 5")).is_err());

        let bits = Ciphertext {
            bits: vec![0, 1, 1, 0, 1, 0, 1],
        };
        let text = write_mceliece_ciphertext(&bits);
        assert_eq!(text, "PQCNN-CT v1\nbits 7\n0110101\n");
        assert_eq!(read_mceliece_ciphertext(&text).unwrap(), bits);
        assert!(read_mceliece_ciphertext(&text.replace("v1", "v9")).is_err());
    }

    #[test]
    fn write_file_refuses_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.txt");
        write_file(&path, "a", false).unwrap();
        assert!(matches!(write_file(&path, "b", false), Err(Error::WouldOverwrite(_))));
        write_file(&path, "b", true).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "b");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reals_roundtrip_exactly(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
                let back: f64 = format_real(v).parse().unwrap();
                prop_assert_eq!(back.to_bits(), v.to_bits());
            }

            #[test]
            fn neural_ciphertext_roundtrips(values in proptest::collection::vec(-1e3f64..1e3, 1..40), alpha in 0f64..2.0) {
                let ct = NeuralCiphertext { alpha, values };
                prop_assert_eq!(read_neural_ciphertext(&write_neural_ciphertext(&ct)).unwrap(), ct);
            }
        }
    }
}
