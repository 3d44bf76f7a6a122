//! The `adalam` command-line tool: `synth`, `match`, `filter`, `eval` and
//! `bench`.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags or parameter
//! values), 2 for data errors (unreadable or malformed files, inconsistent
//! inputs). Diagnostics go to standard error; results go to files or
//! standard output. Output files are written atomically.

pub mod args;

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use adalam::eval::{exact_auc, hist_auc, map_at, match_prf, EvalReport};
use adalam::io::{
    read_errors, read_keypoints, read_matches, write_atomic, write_keypoints, write_matches,
    write_seed_reports,
};
use adalam::synth::generate_scene;
use adalam::{
    adalam_filter, mutual_nn_filter, nn_match, ratio_test_filter, AdalamParams, PutativeMatch,
};
use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{BenchArgs, Cli, Command, EvalArgs, FilterArgs, MatchArgs, Method, SynthArgs};

pub const KEYPOINTS1_FILE: &str = "keypoints1.txt";
pub const KEYPOINTS2_FILE: &str = "keypoints2.txt";
pub const MATCHES_FILE: &str = "matches.txt";

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl From<adalam::Error> for Failure {
    fn from(e: adalam::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

/// Runs the tool with `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let informational =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let text = e.render().to_string();
            if informational {
                let _ = write!(stdout, "{text}");
                return 0;
            }
            let _ = write!(stderr, "{text}");
            return 1;
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(&a, stderr),
        Command::Match(a) => match_cmd(&a, stderr),
        Command::Filter(a) => filter(&a, stderr),
        Command::Eval(a) => eval(&a, stdout),
        Command::Bench(a) => bench(&a, stdout, stderr),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
        Err(Failure::Data(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
    }
}

fn synth(a: &SynthArgs, stderr: &mut dyn Write) -> CmdResult {
    let cfg = a
        .scene
        .config(a.outliers, a.noise, a.seed)
        .map_err(Failure::Usage)?;
    let scene = generate_scene(&cfg)?;
    std::fs::create_dir_all(&a.out_dir)
        .map_err(|e| Failure::Data(format!("cannot create {}: {e}", a.out_dir.display())))?;
    write_keypoints(&a.out_dir.join(KEYPOINTS1_FILE), scene.size1, &scene.k1)?;
    write_keypoints(&a.out_dir.join(KEYPOINTS2_FILE), scene.size2, &scene.k2)?;
    write_matches(
        &a.out_dir.join(MATCHES_FILE),
        &scene.matches,
        Some(&scene.gt_inlier),
    )?;
    let _ = writeln!(
        stderr,
        "wrote {} matches ({} inliers) to {}",
        scene.matches.len(),
        scene.gt_count(),
        a.out_dir.display()
    );
    Ok(())
}

fn match_cmd(a: &MatchArgs, stderr: &mut dyn Write) -> CmdResult {
    if let Some(t) = a.ratio {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Failure::Usage(format!(
                "--ratio must lie in (0, 1], got {t}"
            )));
        }
    }
    let (_, k1) = read_keypoints(&a.kp1)?;
    let (_, k2) = read_keypoints(&a.kp2)?;
    let mut matches = nn_match(&k1, &k2)?;
    if let Some(t) = a.ratio {
        matches = ratio_test_filter(&matches, t)?;
    }
    if a.mutual {
        matches = mutual_nn_filter(&k1, &k2, &matches)?;
    }
    write_matches(&a.out, &matches, None)?;
    let _ = writeln!(stderr, "wrote {} matches", matches.len());
    Ok(())
}

fn with_threads<R: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> R + Send,
) -> Result<R, Failure> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Failure::Usage("--threads must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::Data(format!("cannot start thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn filter(a: &FilterArgs, stderr: &mut dyn Write) -> CmdResult {
    let params = a.params.params();
    params
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    if a.method != Method::Adalam && a.report.is_some() {
        return Err(Failure::Usage(
            "--report is only available with --method adalam".into(),
        ));
    }
    if a.method == Method::Ratio && !(a.ratio_threshold > 0.0 && a.ratio_threshold <= 1.0) {
        return Err(Failure::Usage(format!(
            "--ratio-threshold must lie in (0, 1], got {}",
            a.ratio_threshold
        )));
    }
    let (size1, k1) = read_keypoints(&a.kp1)?;
    let (size2, k2) = read_keypoints(&a.kp2)?;
    let file = read_matches(&a.matches)?;
    let matches = &file.matches;

    let (kept, reports) = with_threads(a.threads, || -> Result<_, adalam::Error> {
        Ok(match a.method {
            Method::Adalam => {
                let out = adalam_filter(&k1, &k2, size1, size2, matches, &params)?;
                (out.selected, Some(out.seed_reports))
            }
            Method::Ratio => {
                let keep: Vec<usize> = (0..matches.len())
                    .filter(|&i| matches[i].ratio <= a.ratio_threshold)
                    .collect();
                (keep, None)
            }
            Method::Mutual => {
                let mutual = mutual_nn_filter(&k1, &k2, matches)?;
                (positions_of(matches, &mutual), None)
            }
        })
    })??;

    let kept_matches: Vec<PutativeMatch> = kept.iter().map(|&i| matches[i]).collect();
    let kept_gt: Option<Vec<bool>> = file
        .gt
        .as_ref()
        .map(|g| kept.iter().map(|&i| g[i]).collect());
    write_matches(&a.out, &kept_matches, kept_gt.as_deref())?;
    if let (Some(path), Some(reports)) = (&a.report, &reports) {
        write_seed_reports(path, reports)?;
    }
    let _ = writeln!(stderr, "kept {} of {} matches", kept.len(), matches.len());
    Ok(())
}

/// Indices into `all` of the matches in `subset`, which must be an
/// order-preserving subsequence of `all`.
fn positions_of(all: &[PutativeMatch], subset: &[PutativeMatch]) -> Vec<usize> {
    let mut out = Vec::with_capacity(subset.len());
    let mut i = 0;
    for m in subset {
        while all[i] != *m {
            i += 1;
        }
        out.push(i);
        i += 1;
    }
    out
}

#[derive(Debug, Clone, Copy)]
enum Value {
    Count(usize),
    Real(f64),
}

impl Value {
    fn json(self) -> serde_json::Value {
        match self {
            Value::Count(n) => serde_json::json!(n),
            Value::Real(v) => serde_json::json!(v),
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Count(n) => write!(f, "{n}"),
            Value::Real(v) => write!(f, "{v}"),
        }
    }
}

fn report_lines(r: &EvalReport) -> Vec<(String, Value)> {
    vec![
        ("true_positives".into(), Value::Count(r.true_positives)),
        ("false_positives".into(), Value::Count(r.false_positives)),
        ("false_negatives".into(), Value::Count(r.false_negatives)),
        ("precision".into(), Value::Real(r.precision)),
        ("recall".into(), Value::Real(r.recall)),
        ("f1".into(), Value::Real(r.f1)),
    ]
}

fn eval(a: &EvalArgs, stdout: &mut dyn Write) -> CmdResult {
    let rows: Vec<(String, Value)> = match (&a.selected, &a.gt, &a.errors) {
        (Some(sel), Some(gt), None) => report_lines(&score_selection(sel, gt)?),
        (None, None, Some(errs)) => {
            if a.auc.is_empty() && a.hist_auc.is_empty() && a.map_at.is_empty() {
                return Err(Failure::Usage(
                    "--errors needs at least one of --auc, --hist-auc, --map".into(),
                ));
            }
            let errors = read_errors(errs)?;
            if errors.is_empty() {
                return Err(Failure::Data(format!(
                    "{}: no error values",
                    errs.display()
                )));
            }
            let usage = |e: adalam::Error| Failure::Usage(e.to_string());
            let mut rows = Vec::new();
            for &t in &a.auc {
                rows.push((
                    format!("auc@{t}"),
                    Value::Real(exact_auc(&errors, t).map_err(usage)?),
                ));
            }
            for &t in &a.hist_auc {
                let v = hist_auc(&errors, t, a.bin_width).map_err(usage)?;
                rows.push((format!("hist_auc@{t}"), Value::Real(v)));
            }
            for &t in &a.map_at {
                rows.push((
                    format!("map@{t}"),
                    Value::Real(map_at(&errors, t).map_err(usage)?),
                ));
            }
            rows
        }
        _ => {
            return Err(Failure::Usage(
                "eval needs either --selected with --gt, or --errors".into(),
            ))
        }
    };
    let text = if a.json {
        let obj: serde_json::Map<String, serde_json::Value> =
            rows.into_iter().map(|(k, v)| (k, v.json())).collect();
        format!("{}\n", serde_json::Value::Object(obj))
    } else {
        rows.iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k}={v}");
            s
        })
    };
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| Failure::Data(format!("cannot write output: {e}")))
}

/// Looks up each selected `(idx1, idx2)` pair in the labelled putative set.
fn score_selection(selected: &Path, gt: &Path) -> Result<EvalReport, Failure> {
    let all = read_matches(gt)?;
    let labels = all
        .gt
        .ok_or_else(|| Failure::Data(format!("{}: match file has no gt column", gt.display())))?;
    let index: HashMap<(usize, usize), usize> = all
        .matches
        .iter()
        .enumerate()
        .map(|(i, m)| ((m.idx1, m.idx2), i))
        .collect();
    let sel = read_matches(selected)?;
    let picked = sel
        .matches
        .iter()
        .map(|m| {
            index.get(&(m.idx1, m.idx2)).copied().ok_or_else(|| {
                Failure::Data(format!(
                    "{}: match {} -> {} is not in {}",
                    selected.display(),
                    m.idx1,
                    m.idx2,
                    gt.display()
                ))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match_prf(&picked, &labels)?)
}

#[derive(Clone, Copy)]
enum Variant {
    Filter(&'static str, fn(&BenchArgs) -> AdalamParams),
    RatioTest,
}

const VARIANTS: [Variant; 5] = [
    Variant::Filter("AdaLAM", |_| AdalamParams::default()),
    Variant::Filter("No-Side", |_| AdalamParams {
        use_side_info: false,
        ..AdalamParams::default()
    }),
    Variant::Filter("No-Refit", |_| AdalamParams {
        use_refit: false,
        ..AdalamParams::default()
    }),
    Variant::Filter("LAM", |a| AdalamParams {
        fixed_threshold: Some(a.lam_threshold),
        ..AdalamParams::default()
    }),
    Variant::RatioTest,
];

fn bench(a: &BenchArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    if a.scenes == 0 {
        return Err(Failure::Usage("--scenes must be >= 1".into()));
    }
    if !(a.lam_threshold.is_finite() && a.lam_threshold > 0.0) {
        return Err(Failure::Usage(format!(
            "--lam-threshold must be positive, got {}",
            a.lam_threshold
        )));
    }
    if !(a.ratio_threshold > 0.0 && a.ratio_threshold <= 1.0) {
        return Err(Failure::Usage(format!(
            "--ratio-threshold must lie in (0, 1], got {}",
            a.ratio_threshold
        )));
    }
    let mut table = String::new();
    let _ = write!(
        table,
        "{:<10} {:>8} {:>6} {:>9} {:>9} {:>9}",
        "method", "outliers", "noise", "precision", "recall", "f1"
    );
    if !a.no_timing {
        let _ = write!(table, " {:>9}", "ms");
    }
    table.push('\n');
    for &outliers in &a.outliers {
        for &noise in &a.noise_levels {
            let scenes = (0..a.scenes)
                .map(|i| {
                    let cfg = a
                        .scene
                        .config(outliers, noise, a.seed + i)
                        .map_err(Failure::Usage)?;
                    Ok(generate_scene(&cfg)?)
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            for variant in VARIANTS {
                let (name, params) = match variant {
                    Variant::Filter(name, p) => (name, Some(p(a))),
                    Variant::RatioTest => ("ratio", None),
                };
                let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
                let mut elapsed = 0.0;
                for s in &scenes {
                    let start = Instant::now();
                    let selected: Vec<usize> = match &params {
                        Some(params) => {
                            adalam_filter(&s.k1, &s.k2, s.size1, s.size2, &s.matches, params)?
                                .selected
                        }
                        None => (0..s.matches.len())
                            .filter(|&i| s.matches[i].ratio <= a.ratio_threshold)
                            .collect(),
                    };
                    elapsed += start.elapsed().as_secs_f64() * 1e3;
                    let rep = match_prf(&selected, &s.gt_inlier)?;
                    p += rep.precision;
                    r += rep.recall;
                    f += rep.f1;
                }
                let n = scenes.len() as f64;
                let _ = write!(
                    table,
                    "{name:<10} {outliers:>8} {noise:>6} {:>9.4} {:>9.4} {:>9.4}",
                    p / n,
                    r / n,
                    f / n
                );
                if !a.no_timing {
                    let _ = write!(table, " {:>9.2}", elapsed / n);
                }
                table.push('\n');
            }
        }
    }
    match &a.out {
        Some(path) => {
            write_atomic(path, table.as_bytes())?;
            let _ = writeln!(stderr, "wrote {}", path.display());
            Ok(())
        }
        None => stdout
            .write_all(table.as_bytes())
            .map_err(|e| Failure::Data(format!("cannot write output: {e}"))),
    }
}
