//! Plain-text file formats.
//!
//! Every file is one header line followed by one whitespace-separated record
//! per line. Reals are written with 9 significant digits. Blank lines are
//! ignored; line numbers in errors are 1-based physical lines.
//!
//! ```text
//! ADALAM-KP 1 <count> <dim> <width> <height>
//! x y sigma alpha d0 ... d{dim-1}
//!
//! ADALAM-MATCHES 1 <count> <has_gt: 0|1>
//! idx1 idx2 dist ratio [gt: 0|1]
//!
//! ADALAM-SEEDS 1 <count>
//! seed_match best_iteration|- inlier_count accepted: 0|1
//! ```
//!
//! Match indices are not checked against keypoint counts here; the filter
//! reports out-of-range indices when it runs.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::types::{wrap_finite, ImageSize, Keypoint, KeypointSet, PutativeMatch, SeedReport};

pub const KEYPOINT_MAGIC: &str = "ADALAM-KP";
pub const MATCH_MAGIC: &str = "ADALAM-MATCHES";
pub const SEED_MAGIC: &str = "ADALAM-SEEDS";
pub const FORMAT_VERSION: &str = "1";

/// Formats a real like C's `%.9g`.
pub fn fmt_g9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_owned();
    }
    if v.is_nan() {
        return "nan".to_owned();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_owned();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_owned()), exp.abs())
    }
}

fn trim_zeros(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so a failed write leaves no partial file behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents).map_err(io_err)?;
    tmp.flush().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Line-oriented tokenizer that tracks physical line numbers.
struct Lines<'a> {
    path: PathBuf,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last_line: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &Path, text: &'a str) -> Self {
        Self {
            path: path.to_owned(),
            inner: text.lines().enumerate(),
            last_line: 0,
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    /// Next non-blank line as (line number, tokens).
    fn next_record(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            self.last_line = i + 1;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if !toks.is_empty() {
                return Some((i + 1, toks));
            }
        }
        None
    }

    fn header(&mut self, magic: &str, fields: usize) -> Result<Vec<&'a str>> {
        let Some((line, toks)) = self.next_record() else {
            return Err(self.err(1, "missing header"));
        };
        if toks[0] != magic {
            return Err(self.err(line, format!("expected header starting with {magic}")));
        }
        if toks.get(1) != Some(&FORMAT_VERSION) {
            return Err(self.err(
                line,
                format!("unsupported version, expected {FORMAT_VERSION}"),
            ));
        }
        if toks.len() != fields {
            return Err(self.err(
                line,
                format!("header has {} fields, expected {fields}", toks.len()),
            ));
        }
        Ok(toks)
    }

    fn row(&mut self, expected_row: usize, count: usize) -> Result<(usize, Vec<&'a str>)> {
        self.next_record().ok_or_else(|| {
            self.err(
                self.last_line + 1,
                format!("expected {count} records, found {expected_row}"),
            )
        })
    }

    fn finish(&mut self, count: usize) -> Result<()> {
        match self.next_record() {
            Some((line, _)) => {
                Err(self.err(line, format!("more than the declared {count} records")))
            }
            None => Ok(()),
        }
    }

    fn parse<T: std::str::FromStr>(&self, line: usize, tok: &str, what: &str) -> Result<T> {
        tok.parse()
            .map_err(|_| self.err(line, format!("invalid {what}: {tok:?}")))
    }

    fn real(&self, line: usize, tok: &str, what: &str) -> Result<f64> {
        let v: f64 = self.parse(line, tok, what)?;
        if !v.is_finite() {
            return Err(self.err(line, format!("{what} must be finite, got {tok}")));
        }
        Ok(v)
    }

    fn flag(&self, line: usize, tok: &str, what: &str) -> Result<bool> {
        match tok {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(self.err(line, format!("{what} must be 0 or 1, got {tok:?}"))),
        }
    }
}

pub fn format_keypoints(size: ImageSize, keypoints: &KeypointSet) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{KEYPOINT_MAGIC} {FORMAT_VERSION} {} {} {} {}",
        keypoints.len(),
        keypoints.dim(),
        size.width(),
        size.height()
    );
    for kp in keypoints.iter() {
        let _ = write!(
            out,
            "{} {} {} {}",
            fmt_g9(kp.x),
            fmt_g9(kp.y),
            fmt_g9(kp.sigma),
            fmt_g9(wrap_finite(kp.alpha))
        );
        for &d in &kp.descriptor {
            out.push(' ');
            out.push_str(&fmt_g9(f64::from(d)));
        }
        out.push('\n');
    }
    out
}

pub fn write_keypoints(path: &Path, size: ImageSize, keypoints: &KeypointSet) -> Result<()> {
    write_atomic(path, format_keypoints(size, keypoints).as_bytes())
}

pub fn parse_keypoints(path: &Path, text: &str) -> Result<(ImageSize, KeypointSet)> {
    let mut lines = Lines::new(path, text);
    let h = lines.header(KEYPOINT_MAGIC, 6)?;
    let count: usize = lines.parse(1, h[2], "count")?;
    let dim: usize = lines.parse(1, h[3], "descriptor dimension")?;
    let width: u32 = lines.parse(1, h[4], "width")?;
    let height: u32 = lines.parse(1, h[5], "height")?;
    let size = ImageSize::new(width, height).map_err(|e| lines.err(1, e.to_string()))?;
    if dim == 0 && count > 0 {
        return Err(lines.err(1, "descriptor dimension must be >= 1"));
    }
    let mut kps = Vec::with_capacity(count);
    for r in 0..count {
        let (line, toks) = lines.row(r, count)?;
        if toks.len() != 4 + dim {
            return Err(lines.err(
                line,
                format!("expected {} fields, found {}", 4 + dim, toks.len()),
            ));
        }
        let x = lines.real(line, toks[0], "x")?;
        let y = lines.real(line, toks[1], "y")?;
        let sigma = lines.real(line, toks[2], "sigma")?;
        let alpha = lines.real(line, toks[3], "alpha")?;
        let descriptor = toks[4..]
            .iter()
            .map(|t| {
                let v: f32 = lines.parse(line, t, "descriptor entry")?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(lines.err(line, format!("descriptor entry must be finite, got {t}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let kp = Keypoint::new(x, y, sigma, alpha, descriptor)
            .map_err(|e| lines.err(line, e.to_string()))?;
        kps.push(kp);
    }
    lines.finish(count)?;
    let set = KeypointSet::new(kps).map_err(|e| lines.err(1, e.to_string()))?;
    Ok((size, set))
}

pub fn read_keypoints(path: &Path) -> Result<(ImageSize, KeypointSet)> {
    parse_keypoints(path, &read_file(path)?)
}

/// Formats matches; `gt` adds the label column when given.
pub fn format_matches(matches: &[PutativeMatch], gt: Option<&[bool]>) -> Result<String> {
    if let Some(gt) = gt {
        if gt.len() != matches.len() {
            return Err(crate::error::invalid(format!(
                "{} labels for {} matches",
                gt.len(),
                matches.len()
            )));
        }
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{MATCH_MAGIC} {FORMAT_VERSION} {} {}",
        matches.len(),
        u8::from(gt.is_some())
    );
    for (i, m) in matches.iter().enumerate() {
        let _ = write!(
            out,
            "{} {} {} {}",
            m.idx1,
            m.idx2,
            fmt_g9(m.dist),
            fmt_g9(m.ratio)
        );
        if let Some(gt) = gt {
            let _ = write!(out, " {}", u8::from(gt[i]));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_matches(path: &Path, matches: &[PutativeMatch], gt: Option<&[bool]>) -> Result<()> {
    write_atomic(path, format_matches(matches, gt)?.as_bytes())
}

/// Parsed match file; `gt` is present when the file carries labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchFile {
    pub matches: Vec<PutativeMatch>,
    pub gt: Option<Vec<bool>>,
}

pub fn parse_matches(path: &Path, text: &str) -> Result<MatchFile> {
    let mut lines = Lines::new(path, text);
    let h = lines.header(MATCH_MAGIC, 4)?;
    let count: usize = lines.parse(1, h[2], "count")?;
    let has_gt = lines.flag(1, h[3], "gt flag")?;
    let fields = if has_gt { 5 } else { 4 };
    let mut matches = Vec::with_capacity(count);
    let mut gt = has_gt.then(|| Vec::with_capacity(count));
    for r in 0..count {
        let (line, toks) = lines.row(r, count)?;
        if toks.len() != fields {
            return Err(lines.err(
                line,
                format!("expected {fields} fields, found {}", toks.len()),
            ));
        }
        let idx1 = lines.parse(line, toks[0], "idx1")?;
        let idx2 = lines.parse(line, toks[1], "idx2")?;
        let dist = lines.real(line, toks[2], "dist")?;
        let ratio = lines.real(line, toks[3], "ratio")?;
        let m = PutativeMatch::new(idx1, idx2, dist, ratio)
            .map_err(|e| lines.err(line, e.to_string()))?;
        matches.push(m);
        if let Some(gt) = gt.as_mut() {
            gt.push(lines.flag(line, toks[4], "gt label")?);
        }
    }
    lines.finish(count)?;
    Ok(MatchFile { matches, gt })
}

pub fn read_matches(path: &Path) -> Result<MatchFile> {
    parse_matches(path, &read_file(path)?)
}

pub fn format_seed_reports(reports: &[SeedReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{SEED_MAGIC} {FORMAT_VERSION} {}", reports.len());
    for r in reports {
        let best = r
            .best_iteration
            .map_or_else(|| "-".to_owned(), |b| b.to_string());
        let _ = writeln!(
            out,
            "{} {best} {} {}",
            r.seed_match,
            r.inlier_count,
            u8::from(r.accepted)
        );
    }
    out
}

pub fn write_seed_reports(path: &Path, reports: &[SeedReport]) -> Result<()> {
    write_atomic(path, format_seed_reports(reports).as_bytes())
}

pub fn parse_seed_reports(path: &Path, text: &str) -> Result<Vec<SeedReport>> {
    let mut lines = Lines::new(path, text);
    let h = lines.header(SEED_MAGIC, 3)?;
    let count: usize = lines.parse(1, h[2], "count")?;
    let mut out = Vec::with_capacity(count);
    for r in 0..count {
        let (line, toks) = lines.row(r, count)?;
        if toks.len() != 4 {
            return Err(lines.err(line, format!("expected 4 fields, found {}", toks.len())));
        }
        let best_iteration = match toks[1] {
            "-" => None,
            t => Some(lines.parse(line, t, "best iteration")?),
        };
        out.push(SeedReport {
            seed_match: lines.parse(line, toks[0], "seed match")?,
            best_iteration,
            inlier_count: lines.parse(line, toks[2], "inlier count")?,
            accepted: lines.flag(line, toks[3], "accepted flag")?,
        });
    }
    lines.finish(count)?;
    Ok(out)
}

/// Reads whitespace-separated pose errors in degrees; `inf` marks a
/// failure.
pub fn parse_errors(path: &Path, text: &str) -> Result<Vec<f64>> {
    let mut lines = Lines::new(path, text);
    let mut out = Vec::new();
    while let Some((line, toks)) = lines.next_record() {
        for t in toks {
            let v: f64 = lines.parse(line, t, "error value")?;
            if v.is_nan() || v < 0.0 {
                return Err(lines.err(line, format!("errors must be >= 0 or inf, got {t}")));
            }
            out.push(v);
        }
    }
    Ok(out)
}

pub fn read_errors(path: &Path) -> Result<Vec<f64>> {
    parse_errors(path, &read_file(path)?)
}
