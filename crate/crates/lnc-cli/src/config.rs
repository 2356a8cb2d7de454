//! Experiment config files: one `[name]` section per experiment, `key =
//! value` lines, `#` comments, Eisenstein values in `a+bw` form and complex
//! values in `a+bi` form.
//!
//! Parse errors carry the 1-based line number so a typo in a long sweep file
//! points at itself.

use std::fmt;
use std::str::FromStr;

use lnc_core::eisenstein::EisensteinInt;
use lnc_core::mlnc::Fading;
use num_complex::Complex64;

/// Which lattice the experiment runs on.
#[derive(Clone, Debug, PartialEq)]
pub enum LatticeChoice {
    /// Uncoded 12-point instance (repetition codes).
    Rep12,
    /// Both layers rate-1/2 convolutional, `iota` message steps.
    Coded12 { iota: usize },
    /// Rate-1/2 ternary + rate-3/4 quaternary, `iota1` ternary steps (odd).
    Coded12Mixed { iota1: usize },
}

/// How the relay decodes each frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecoderMode {
    /// Layered integer forcing (folded Viterbi quantizer per layer).
    Lif,
    /// One detector pass per layer, no cross-layer priors.
    NonMsd,
    /// Multistage: layers in schedule order, priors fed forward.
    Msd,
    /// Iterative multistage with the given number of sweeps.
    Imsd(usize),
}

impl fmt::Display for DecoderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecoderMode::Lif => write!(f, "lif"),
            DecoderMode::NonMsd => write!(f, "non-msd"),
            DecoderMode::Msd => write!(f, "msd"),
            DecoderMode::Imsd(k) => write!(f, "imsd{k}"),
        }
    }
}

/// How the relay picks its integer coefficient vectors.
#[derive(Clone, Debug, PartialEq)]
pub enum CoeffChoice {
    /// All-ones combination (the classic sum).
    Unit,
    /// Exhaustive search maximizing the computation-rate expression.
    Rate,
    /// Exhaustive search maximizing estimated mutual information.
    Mi,
    /// Explicit per-layer vectors, one entry per source.
    Explicit(Vec<Vec<EisensteinInt>>),
}

/// One `[section]` of a config file.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub name: String,
    pub lattice: LatticeChoice,
    pub decoders: Vec<DecoderMode>,
    /// SNR grid in dB before the offset is applied.
    pub snr_db: Vec<f64>,
    pub snr_offset_db: f64,
    pub fading: Fading,
    pub sources: usize,
    pub coefficients: CoeffChoice,
    /// Sample budget for the information-based coefficient search.
    pub mi_samples: usize,
    pub dither: bool,
    pub min_frame_errors: u64,
    pub max_frames: u64,
    pub min_frames: u64,
    pub seed: u64,
    /// Stage order for the multistage schedules; `None` = natural order.
    pub schedule: Option<Vec<usize>>,
}

/// A parse failure with its 1-based source line.
#[derive(Clone, Debug)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

// --- value parsers -----------------------------------------------------

fn parse_complex(s: &str, line: usize) -> Result<Complex64, ConfigError> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return err(line, "empty complex value");
    }
    // Split off a trailing imaginary term ending in 'i'.
    if let Some(body) = compact.strip_suffix('i') {
        let mut split = None;
        let bytes = body.as_bytes();
        for (i, &c) in bytes.iter().enumerate().skip(1) {
            if (c == b'+' || c == b'-') && !matches!(bytes[i - 1], b'e' | b'E' | b'+' | b'-') {
                split = Some(i);
            }
        }
        let (re_str, im_str) = match split {
            Some(i) => (&body[..i], &body[i..]),
            None => ("0", body),
        };
        let re: f64 = re_str
            .parse()
            .map_err(|_| ConfigError {
                line,
                message: format!("bad real part in complex value {s:?}"),
            })?;
        let im: f64 = match im_str {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => other.parse().map_err(|_| ConfigError {
                line,
                message: format!("bad imaginary part in complex value {s:?}"),
            })?,
        };
        Ok(Complex64::new(re, im))
    } else {
        let re: f64 = compact.parse().map_err(|_| ConfigError {
            line,
            message: format!("bad complex value {s:?} (want a+bi)"),
        })?;
        Ok(Complex64::new(re, 0.0))
    }
}

/// Grid syntax: comma-separated entries, each a number or `start:step:stop`
/// (inclusive stop, positive step).
fn parse_grid(s: &str, line: usize) -> Result<Vec<f64>, ConfigError> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let pieces: Vec<&str> = part.split(':').collect();
        match pieces.len() {
            1 => out.push(parse_num(pieces[0], line, "grid value")?),
            3 => {
                let start = parse_num(pieces[0], line, "grid start")?;
                let step = parse_num(pieces[1], line, "grid step")?;
                let stop = parse_num(pieces[2], line, "grid stop")?;
                if step <= 0.0 {
                    return err(line, format!("grid step must be positive in {part:?}"));
                }
                let count = ((stop - start) / step + 1e-9).floor() as i64;
                if count < 0 {
                    return err(line, format!("empty grid range {part:?}"));
                }
                for k in 0..=count {
                    out.push(start + step * k as f64);
                }
            }
            _ => return err(line, format!("bad grid entry {part:?} (want x or a:step:b)")),
        }
    }
    // An empty grid is legal: the experiment then simulates nothing and
    // produces an empty (header-only) result.
    Ok(out)
}

/// [`parse`]'s grid syntax for a command-line argument instead of a config
/// line.
pub fn grid_arg(s: &str) -> Result<Vec<f64>, String> {
    parse_grid(s, 0).map_err(|e| e.message)
}

/// `a+bi` complex syntax for a command-line argument.
pub fn complex_arg(s: &str) -> Result<Complex64, String> {
    parse_complex(s, 0).map_err(|e| e.message)
}

/// Lattice presets for command-line arguments: `rep12`, `coded12[:iota]`,
/// `coded12-mixed[:iota]`.
pub fn lattice_arg(s: &str) -> Result<LatticeChoice, String> {
    let (kind, iota) = match s.split_once(':') {
        Some((k, v)) => {
            let iota: usize = v
                .parse()
                .map_err(|_| format!("bad message length {v:?} in lattice {s:?}"))?;
            (k, Some(iota))
        }
        None => (s, None),
    };
    match kind {
        "rep12" => {
            if iota.is_some() {
                return Err("rep12 takes no message length".into());
            }
            Ok(LatticeChoice::Rep12)
        }
        "coded12" => Ok(LatticeChoice::Coded12 {
            iota: iota.unwrap_or(200),
        }),
        "coded12-mixed" => {
            let iota1 = iota.unwrap_or(201);
            if iota1 % 2 == 0 {
                return Err("mixed-rate lattice needs an odd message length".into());
            }
            Ok(LatticeChoice::Coded12Mixed { iota1 })
        }
        other => Err(format!(
            "unknown lattice {other:?} (want rep12, coded12, coded12-mixed)"
        )),
    }
}

fn parse_num(s: &str, line: usize, what: &str) -> Result<f64, ConfigError> {
    s.trim().parse().map_err(|_| ConfigError {
        line,
        message: format!("bad {what} {s:?}"),
    })
}

fn parse_usize(s: &str, line: usize, what: &str) -> Result<usize, ConfigError> {
    s.trim().parse().map_err(|_| ConfigError {
        line,
        message: format!("bad {what} {s:?}"),
    })
}

fn parse_u64(s: &str, line: usize, what: &str) -> Result<u64, ConfigError> {
    s.trim().parse().map_err(|_| ConfigError {
        line,
        message: format!("bad {what} {s:?}"),
    })
}

fn parse_bool(s: &str, line: usize, what: &str) -> Result<bool, ConfigError> {
    match s.trim() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        other => err(line, format!("bad {what} {other:?} (want on/off)")),
    }
}

fn parse_decoder(s: &str, line: usize) -> Result<DecoderMode, ConfigError> {
    let s = s.trim();
    if let Some(k) = s.strip_prefix("imsd:") {
        let k = parse_usize(k, line, "iteration count")?;
        if k == 0 {
            return err(line, "imsd needs at least one iteration");
        }
        return Ok(DecoderMode::Imsd(k));
    }
    match s {
        "lif" => Ok(DecoderMode::Lif),
        "non-msd" => Ok(DecoderMode::NonMsd),
        "msd" => Ok(DecoderMode::Msd),
        other => err(
            line,
            format!("unknown decoder {other:?} (want lif, non-msd, msd, imsd:k)"),
        ),
    }
}

fn parse_eisenstein(s: &str, line: usize) -> Result<EisensteinInt, ConfigError> {
    EisensteinInt::from_str(s.trim()).map_err(|e| ConfigError {
        line,
        message: format!("{e}"),
    })
}

// --- section assembly ----------------------------------------------------

#[derive(Default)]
struct Draft {
    name: String,
    header_line: usize,
    lattice: Option<LatticeChoice>,
    iota: Option<(usize, usize)>, // (value, line)
    decoders: Option<Vec<DecoderMode>>,
    snr_db: Option<Vec<f64>>,
    snr_offset_db: f64,
    fading_kind: Option<(String, usize)>,
    h: Option<Vec<Complex64>>,
    sources: usize,
    coefficients: Option<CoeffChoice>,
    mi_samples: usize,
    dither: bool,
    min_frame_errors: u64,
    max_frames: u64,
    min_frames: u64,
    seed: u64,
    schedule: Option<Vec<usize>>,
}

impl Draft {
    fn new(name: String, header_line: usize) -> Self {
        Self {
            name,
            header_line,
            sources: 2,
            mi_samples: 20_000,
            dither: true,
            min_frame_errors: 100,
            max_frames: 1_000_000,
            min_frames: 1_000,
            seed: 1,
            snr_offset_db: 0.0,
            ..Self::default()
        }
    }

    fn finish(self) -> Result<ExperimentConfig, ConfigError> {
        let line = self.header_line;
        let lattice = match (self.lattice, self.iota) {
            (None, _) => return err(line, format!("section [{}] needs a lattice", self.name)),
            (Some(LatticeChoice::Rep12), Some((_, iline))) => {
                return err(iline, "rep12 takes no message length")
            }
            (Some(LatticeChoice::Rep12), None) => LatticeChoice::Rep12,
            (Some(LatticeChoice::Coded12 { .. }), v) => LatticeChoice::Coded12 {
                iota: v.map(|(x, _)| x).unwrap_or(200),
            },
            (Some(LatticeChoice::Coded12Mixed { .. }), v) => {
                let iota1 = v.map(|(x, _)| x).unwrap_or(201);
                if iota1 % 2 == 0 {
                    let at = v.map(|(_, l)| l).unwrap_or(line);
                    return err(at, "mixed-rate lattice needs an odd message length");
                }
                LatticeChoice::Coded12Mixed { iota1 }
            }
        };
        let decoders = match self.decoders {
            Some(d) if !d.is_empty() => d,
            _ => return err(line, format!("section [{}] needs decoders", self.name)),
        };
        let snr_db = match self.snr_db {
            Some(g) => g,
            None => return err(line, format!("section [{}] needs an snr-db grid", self.name)),
        };
        if self.sources == 0 {
            return err(line, "sources must be positive");
        }
        let fading = match self.fading_kind.as_ref().map(|(k, l)| (k.as_str(), *l)) {
            None | Some(("unit", _)) => {
                if self.h.is_some() {
                    return err(line, "h is only meaningful with fading = fixed");
                }
                Fading::Unit
            }
            Some(("rayleigh", _)) => {
                if self.h.is_some() {
                    return err(line, "h is only meaningful with fading = fixed");
                }
                Fading::Rayleigh
            }
            Some(("fixed", l)) => match self.h {
                Some(h) if h.len() == self.sources => Fading::Fixed(h),
                Some(h) => {
                    return err(
                        l,
                        format!("h has {} entries for {} sources", h.len(), self.sources),
                    )
                }
                None => return err(l, "fading = fixed needs an h vector"),
            },
            Some((other, l)) => {
                return err(l, format!("unknown fading {other:?} (want unit, rayleigh, fixed)"))
            }
        };
        if let CoeffChoice::Explicit(vs) = self.coefficients.as_ref().unwrap_or(&CoeffChoice::Unit)
        {
            if vs.iter().any(|v| v.len() != self.sources) {
                return err(line, "coefficient vectors must have one entry per source");
            }
        }
        if self.max_frames == 0 {
            return err(line, "max-frames must be positive");
        }
        Ok(ExperimentConfig {
            name: self.name,
            lattice,
            decoders,
            snr_db,
            snr_offset_db: self.snr_offset_db,
            fading,
            sources: self.sources,
            coefficients: self.coefficients.unwrap_or(CoeffChoice::Unit),
            mi_samples: self.mi_samples,
            dither: self.dither,
            min_frame_errors: self.min_frame_errors,
            max_frames: self.max_frames,
            min_frames: self.min_frames.min(self.max_frames),
            seed: self.seed,
            schedule: self.schedule,
        })
    }
}

/// Parses a whole config file into its experiment sections.
pub fn parse(text: &str) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let mut out = Vec::new();
    let mut draft: Option<Draft> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or(ConfigError {
                    line,
                    message: "unterminated section header".into(),
                })?
                .trim();
            if name.is_empty() {
                return err(line, "empty section name");
            }
            if let Some(d) = draft.take() {
                out.push(d.finish()?);
            }
            if out.iter().any(|e: &ExperimentConfig| e.name == name) {
                return err(line, format!("duplicate section [{name}]"));
            }
            draft = Some(Draft::new(name.to_string(), line));
            continue;
        }
        let (key, value) = match content.split_once('=') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => return err(line, format!("expected key = value, got {content:?}")),
        };
        let d = match draft.as_mut() {
            Some(d) => d,
            None => return err(line, "key outside any [section]"),
        };
        match key {
            "lattice" => {
                d.lattice = Some(match value {
                    "rep12" => LatticeChoice::Rep12,
                    "coded12" => LatticeChoice::Coded12 { iota: 0 },
                    "coded12-mixed" => LatticeChoice::Coded12Mixed { iota1: 0 },
                    other => {
                        return err(
                            line,
                            format!("unknown lattice {other:?} (want rep12, coded12, coded12-mixed)"),
                        )
                    }
                });
            }
            "iota" => d.iota = Some((parse_usize(value, line, "message length")?, line)),
            "decoders" => {
                let list: Result<Vec<_>, _> =
                    value.split(',').map(|s| parse_decoder(s, line)).collect();
                d.decoders = Some(list?);
            }
            "snr-db" => d.snr_db = Some(parse_grid(value, line)?),
            "snr-offset-db" => d.snr_offset_db = parse_num(value, line, "snr offset")?,
            "fading" => d.fading_kind = Some((value.to_string(), line)),
            "h" => {
                let list: Result<Vec<_>, _> =
                    value.split(',').map(|s| parse_complex(s, line)).collect();
                d.h = Some(list?);
            }
            "sources" => d.sources = parse_usize(value, line, "source count")?,
            "coefficients" => {
                d.coefficients = Some(match value {
                    "unit" => CoeffChoice::Unit,
                    "rate" => CoeffChoice::Rate,
                    "mi" => CoeffChoice::Mi,
                    expr => {
                        let vectors: Result<Vec<Vec<EisensteinInt>>, _> = expr
                            .split(';')
                            .map(|v| {
                                v.split_whitespace()
                                    .map(|e| parse_eisenstein(e, line))
                                    .collect()
                            })
                            .collect();
                        CoeffChoice::Explicit(vectors?)
                    }
                });
            }
            "mi-samples" => d.mi_samples = parse_usize(value, line, "sample count")?,
            "dither" => d.dither = parse_bool(value, line, "dither flag")?,
            "min-frame-errors" => {
                d.min_frame_errors = parse_u64(value, line, "frame error floor")?
            }
            "max-frames" => d.max_frames = parse_u64(value, line, "frame cap")?,
            "min-frames" => d.min_frames = parse_u64(value, line, "frame floor")?,
            "seed" => d.seed = parse_u64(value, line, "seed")?,
            "schedule" => {
                let list: Result<Vec<_>, _> = value
                    .split(',')
                    .map(|s| parse_usize(s, line, "schedule entry"))
                    .collect();
                d.schedule = Some(list?);
            }
            other => return err(line, format!("unknown key {other:?}")),
        }
    }
    if let Some(d) = draft.take() {
        out.push(d.finish()?);
    }
    if out.is_empty() {
        return err(1, "config has no [experiment] sections");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_section() {
        let text = "\
# demo
[fig]
lattice = coded12-mixed
iota = 7
decoders = non-msd, msd, imsd:5
snr-db = 0, 2:1:4
fading = fixed
h = -1.17+2.15i, 1.25-1.63i
coefficients = mi
dither = off
seed = 9
";
        let cfgs = parse(text).unwrap();
        assert_eq!(cfgs.len(), 1);
        let c = &cfgs[0];
        assert_eq!(c.name, "fig");
        assert_eq!(c.lattice, LatticeChoice::Coded12Mixed { iota1: 7 });
        assert_eq!(
            c.decoders,
            vec![DecoderMode::NonMsd, DecoderMode::Msd, DecoderMode::Imsd(5)]
        );
        assert_eq!(c.snr_db, vec![0.0, 2.0, 3.0, 4.0]);
        match &c.fading {
            Fading::Fixed(h) => {
                assert!((h[0] - Complex64::new(-1.17, 2.15)).norm() < 1e-12);
                assert!((h[1] - Complex64::new(1.25, -1.63)).norm() < 1e-12);
            }
            other => panic!("wrong fading {other:?}"),
        }
        assert_eq!(c.coefficients, CoeffChoice::Mi);
        assert!(!c.dither);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "[a]\nlattice = rep12\ndecoders = msd\nsnr-db = 5\nbogus = 1\n";
        let e = parse(text).unwrap_err();
        assert_eq!(e.line, 5);
        assert!(e.message.contains("bogus"));

        let e = parse("lattice = rep12\n").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.message.contains("outside"));

        let e = parse("[a]\nlattice = rep12\ndecoders = msd\nsnr-db = x\n").unwrap_err();
        assert_eq!(e.line, 4);
    }

    #[test]
    fn validation_spans_sections() {
        // Missing decoders reports the section header line.
        let e = parse("[a]\nlattice = rep12\nsnr-db = 5\n").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.message.contains("decoders"));

        // Fixed fading must match the source count.
        let text = "[a]\nlattice = rep12\ndecoders = msd\nsnr-db = 5\nfading = fixed\nh = 1+0i\n";
        let e = parse(text).unwrap_err();
        assert!(e.message.contains("entries"));

        // Even mixed-rate message lengths are rejected up front.
        let text = "[a]\nlattice = coded12-mixed\niota = 10\ndecoders = msd\nsnr-db = 5\n";
        let e = parse(text).unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn complex_literals_cover_the_edge_forms() {
        assert_eq!(parse_complex("3", 1).unwrap(), Complex64::new(3.0, 0.0));
        assert_eq!(parse_complex("-i", 1).unwrap(), Complex64::new(0.0, -1.0));
        assert_eq!(parse_complex("2i", 1).unwrap(), Complex64::new(0.0, 2.0));
        assert_eq!(
            parse_complex("1e-2+3.5i", 1).unwrap(),
            Complex64::new(0.01, 3.5)
        );
        assert!(parse_complex("1+2j", 1).is_err());
    }
}
