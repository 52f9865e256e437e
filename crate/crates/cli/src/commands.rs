use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cfreq_core::cf::{cf_expand, convergents, parse_rational};
use cfreq_core::constructions::{
    fz_point, local_dimension_profile, seed_point, FzParameters, GrowthSequence, ProfileRow,
};
use cfreq_core::markov::{FrequencyVector, CYLINDER_BUDGET};
use cfreq_core::numeric::{format_sig, ln_biguint, round_sig};
use cfreq_core::optimizer::{self, SolverOptions};
use cfreq_core::verify::{run_suite, Suite, SuiteReport};
use cfreq_core::{CylinderWord, Error};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{pick, Format, RunConfig, SampleMode};
use crate::{AnalyzeArgs, CliError, Common, DimensionArgs, SampleArgs, VerifyArgs};

/// Stream offset separating the seed word of a forced-digit run from its
/// forced digits.
const SEED_WORD_STREAM: u64 = 0x5eed_0000_0000;

pub struct Context<'a> {
    common: &'a Common,
    cfg: &'a RunConfig,
}

impl<'a> Context<'a> {
    pub fn new(common: &'a Common, cfg: &'a RunConfig) -> Self {
        Context { common, cfg }
    }

    fn seed(&self) -> u64 {
        pick(self.common.seed, self.cfg.seed).unwrap_or(0)
    }

    fn format(&self) -> Format {
        pick(self.common.format, self.cfg.format).unwrap_or_default()
    }

    fn timing(&self) -> bool {
        self.common.timing || self.cfg.timing.unwrap_or(false)
    }

    fn out(&self) -> Option<PathBuf> {
        pick(self.common.out.clone(), self.cfg.out.clone())
    }

    fn emit(&self, text: &str) -> Result<(), CliError> {
        match self.out() {
            Some(path) => write_file(&path, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn emit_json(&self, v: &Value) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
        s.push('\n');
        self.emit(&s)
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn load_freq(path: Option<PathBuf>) -> Result<FrequencyVector, CliError> {
    let path =
        path.ok_or_else(|| CliError::Usage("a frequency file is required (--freq)".into()))?;
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(FrequencyVector::from_json(&text)?)
}

fn sig(x: f64) -> f64 {
    round_sig(x, 12)
}

fn csv_field(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

pub fn analyze(ctx: &Context, a: AnalyzeArgs) -> Result<(), CliError> {
    let input = pick(a.input, ctx.cfg.input.clone())
        .ok_or_else(|| CliError::Usage("analyze needs a number or a digit list".into()))?;
    let depth = pick(a.depth, ctx.cfg.depth);
    let word: CylinderWord = if input.contains(',') {
        let w: CylinderWord = input.parse()?;
        match depth {
            Some(d) if d < w.len() => w.prefix(d),
            _ => w,
        }
    } else {
        let x = parse_rational(&input)?;
        let frac = &x - x.floor();
        if frac == num_rational::BigRational::from_integer(0.into()) {
            return Err(Error::Domain(format!(
                "{input} is an integer and has no partial quotients"
            ))
            .into());
        }
        cf_expand(&frac, depth.unwrap_or(usize::MAX))?
    };
    if word.is_empty() {
        return Err(Error::Domain("depth must be at least 1".into()).into());
    }
    let n = word.len();
    let ranks = pick(a.ranks, ctx.cfg.ranks.clone()).unwrap_or_else(|| (1..=n).collect());
    if let Some(&r) = ranks.iter().find(|&&r| r == 0 || r > n) {
        return Err(Error::Domain(format!("rank {r} outside 1..={n}")).into());
    }

    let mut counts = BTreeMap::new();
    for d in word.digits() {
        *counts.entry(d).or_insert(0u64) += 1;
    }
    let convs = convergents(&word)?;
    let mut rows = Vec::with_capacity(ranks.len());
    for &r in &ranks {
        let c = &convs[r - 1];
        let q_prev = if r == 1 {
            num_bigint::BigUint::from(1u32)
        } else {
            convs[r - 2].q.clone()
        };
        let ln_length = -(ln_biguint(&c.q) + ln_biguint(&(&c.q + q_prev)));
        rows.push((r, &word.digits()[r - 1], &c.p, &c.q, ln_length));
    }

    match ctx.format() {
        Format::Csv => {
            let mut s = String::from("digit,count,frequency\n");
            for (d, c) in &counts {
                let _ = writeln!(s, "{d},{c},{}", format_sig(*c as f64 / n as f64, 12));
            }
            s.push_str("\nn,digit,p,q,length,ln_length\n");
            for (r, d, p, q, ln_len) in &rows {
                let _ = writeln!(
                    s,
                    "{r},{d},{p},{q},{},{}",
                    format_sig(ln_len.exp(), 12),
                    format_sig(*ln_len, 12)
                );
            }
            ctx.emit(&s)
        }
        Format::Json => ctx.emit_json(&json!({
            "depth": n,
            "digits": word.digits().iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            "frequencies": counts.iter().map(|(d, c)| json!({
                "digit": d.to_string(),
                "count": c,
                "frequency": sig(*c as f64 / n as f64),
            })).collect::<Vec<_>>(),
            "convergents": rows.iter().map(|(r, d, p, q, ln_len)| json!({
                "n": r,
                "digit": d.to_string(),
                "p": p.to_string(),
                "q": q.to_string(),
                "length": sig(ln_len.exp()),
                "ln_length": sig(*ln_len),
            })).collect::<Vec<_>>(),
        })),
    }
}

pub fn dimension(ctx: &Context, a: DimensionArgs) -> Result<(), CliError> {
    let freq = load_freq(pick(a.freq, ctx.cfg.freq.clone()))?;
    let n_list = pick(a.n_list, ctx.cfg.n_list.clone()).unwrap_or_else(|| vec![5, 10, 20]);
    let k_list = pick(a.k_list, ctx.cfg.k_list.clone()).unwrap_or_else(|| vec![1, 2]);
    if n_list.is_empty() || k_list.is_empty() {
        return Err(CliError::Usage("N and k lists must be nonempty".into()));
    }
    // reject oversized grids before any work is done
    for &n in &n_list {
        for &k in &k_list {
            let needed = (n as f64).powi(k as i32);
            if needed > CYLINDER_BUDGET {
                return Err(Error::Resource {
                    what: "cylinder enumeration",
                    needed,
                    budget: CYLINDER_BUDGET,
                }
                .into());
            }
        }
    }
    let opts: SolverOptions = ctx.cfg.solver.clone().unwrap_or_default();
    let mut est = optimizer::dimension(&freq, &n_list, &k_list, &opts)?;
    if !ctx.timing() {
        est = est.without_timing();
    }
    match ctx.format() {
        Format::Csv => ctx.emit(&est.to_csv())?,
        Format::Json => {
            ctx.emit_json(&serde_json::to_value(est.rounded()).expect("estimate serializes"))?
        }
    }
    // the table is written even when some cells failed; the exit code
    // reports the first failure in cell order
    match est.cells.iter().find_map(|c| c.failure.clone()) {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

pub fn verify(ctx: &Context, a: VerifyArgs) -> Result<(), CliError> {
    let mut vc = ctx.cfg.verify.clone().unwrap_or_default();
    if let Some(t) = pick(a.trials, ctx.cfg.trials) {
        vc.trials = t;
    }
    if let Some(s) = pick(ctx.common.seed, ctx.cfg.seed) {
        vc.seed = s;
    }
    let selector = pick(a.suite, ctx.cfg.suite.clone()).unwrap_or_else(|| "all".into());
    let suites = Suite::parse_selector(&selector)?;
    let reports: Vec<SuiteReport> = suites
        .iter()
        .map(|&s| run_suite(s, &vc))
        .collect::<Result<_, _>>()?;
    match ctx.format() {
        Format::Csv => {
            let mut s = String::from("suite,alias,checks,failures,status\n");
            for r in &reports {
                let status = if r.passed() { "pass" } else { "fail" };
                let _ = writeln!(
                    s,
                    "{},{},{},{},{status}",
                    r.suite,
                    r.alias,
                    r.checks,
                    r.failures.len()
                );
            }
            if reports.iter().any(|r| !r.passed()) {
                s.push_str("\nsuite,counterexample\n");
                for r in &reports {
                    for f in &r.failures {
                        let _ = writeln!(s, "{},{}", r.suite, csv_field(f));
                    }
                }
            }
            ctx.emit(&s)?;
        }
        Format::Json => {
            ctx.emit_json(&serde_json::to_value(&reports).expect("reports serialize"))?
        }
    }
    let failures: usize = reports.iter().map(|r| r.failures.len()).sum();
    if failures > 0 {
        return Err(CliError::Verification(failures));
    }
    Ok(())
}

fn forced_base(a: &SampleArgs, cfg: &RunConfig) -> Result<f64, CliError> {
    if let Some(b) = pick(a.b, cfg.b) {
        return Ok(b);
    }
    pick(a.ln_b, cfg.ln_b)
        .map(f64::exp)
        .ok_or_else(|| CliError::Usage("forced-digit runs need --b or --ln-b".into()))
}

pub fn sample(ctx: &Context, a: SampleArgs) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let mode = pick(a.mode, cfg.mode)
        .ok_or_else(|| CliError::Usage("sample needs a mode: seed, fz or profile".into()))?;
    let growth = pick(a.growth, cfg.growth).unwrap_or(GrowthSequence::Linear);
    let freq_path = pick(a.freq.clone(), cfg.freq.clone());
    let depths: Option<Vec<u64>> = match a.depths.clone() {
        Some(parts) => Some(parts.into_iter().flatten().collect()),
        None => cfg.depths.clone(),
    };
    // a profile at depth m reads m+1 digits
    let n = pick(a.n, cfg.n).or_else(|| {
        depths
            .as_ref()
            .and_then(|d| d.iter().max())
            .map(|&m| m as usize + 1)
    });
    let n = n.ok_or_else(|| CliError::Usage("sample needs a word length (--n)".into()))?;
    let first = ctx.seed();
    let seeds: Vec<u64> = (0..pick(a.count, cfg.count).unwrap_or(1))
        .map(|i| first.wrapping_add(i))
        .collect();

    match mode {
        SampleMode::Seed => {
            let freq = load_freq(freq_path)?;
            let words: Vec<CylinderWord> = seeds
                .par_iter()
                .map(|&s| seed_point(&freq, &growth, n, s))
                .collect::<Result<_, _>>()?;
            let summary = frequency_summary(&words);
            match ctx.format() {
                Format::Csv => {
                    ctx.emit(&word_lines(&words))?;
                    let text = summary_csv(&seeds, &summary);
                    match pick(a.summary, cfg.summary.clone()) {
                        Some(path) => write_file(&path, &text)?,
                        None => eprint!("{text}"),
                    }
                    Ok(())
                }
                Format::Json => ctx.emit_json(&json!(seeds
                    .iter()
                    .zip(&words)
                    .zip(&summary)
                    .map(|((s, w), rows)| json!({
                        "seed": s,
                        "word": w.to_string(),
                        "frequencies": rows.iter().map(|(d, c, f)| json!({
                            "digit": d, "count": c, "frequency": sig(*f),
                        })).collect::<Vec<_>>(),
                    }))
                    .collect::<Vec<_>>())),
            }
        }
        SampleMode::Fz | SampleMode::Profile => {
            let b = forced_base(&a, cfg)?;
            let z_fixed: Option<CylinderWord> = match pick(a.z.clone(), cfg.z.clone()) {
                Some(text) => Some(text.parse()?),
                None => None,
            };
            let freq = match (&z_fixed, freq_path) {
                (None, Some(p)) => Some(load_freq(Some(p))?),
                _ => None,
            };
            let words: Vec<CylinderWord> = seeds
                .par_iter()
                .map(|&s| {
                    let z = match (&z_fixed, &freq) {
                        (Some(z), _) => z.clone(),
                        (None, Some(f)) => seed_point(f, &growth, n, s ^ SEED_WORD_STREAM)?,
                        (None, None) => CylinderWord::from_small(&vec![1; n])?,
                    };
                    fz_point(&FzParameters::new(z, b)?, n, s)
                })
                .collect::<Result<_, _>>()?;
            if mode == SampleMode::Fz {
                return match ctx.format() {
                    Format::Csv => ctx.emit(&word_lines(&words)),
                    Format::Json => ctx.emit_json(&json!(seeds
                        .iter()
                        .zip(&words)
                        .map(|(s, w)| json!({"seed": s, "word": w.to_string()}))
                        .collect::<Vec<_>>())),
                };
            }
            let depths = depths.unwrap_or_else(|| (1..n as u64).collect());
            let profiles: Vec<Vec<ProfileRow>> = words
                .par_iter()
                .map(|w| local_dimension_profile(w, b, &depths))
                .collect::<Result<_, _>>()?;
            match ctx.format() {
                Format::Csv => {
                    let mut s = String::from("seed,m,n,log_mass,log_length,ratio\n");
                    for (seed, rows) in seeds.iter().zip(&profiles) {
                        for r in rows {
                            let _ = writeln!(
                                s,
                                "{seed},{},{},{},{},{}",
                                r.m,
                                r.n,
                                format_sig(r.log_mass, 12),
                                format_sig(r.log_length, 12),
                                format_sig(r.ratio, 12)
                            );
                        }
                    }
                    ctx.emit(&s)
                }
                Format::Json => ctx.emit_json(&json!(seeds
                    .iter()
                    .zip(&profiles)
                    .map(|(seed, rows)| json!({
                        "seed": seed,
                        "rows": rows.iter().map(|r| json!({
                            "m": r.m,
                            "n": r.n,
                            "log_mass": sig(r.log_mass),
                            "log_length": sig(r.log_length),
                            "ratio": sig(r.ratio),
                            "corrected_ratio": sig(r.corrected_ratio),
                            "verified": r.verified,
                        })).collect::<Vec<_>>(),
                    }))
                    .collect::<Vec<_>>())),
            }
        }
    }
}

fn word_lines(words: &[CylinderWord]) -> String {
    let mut s = String::new();
    for w in words {
        let _ = writeln!(s, "{w}");
    }
    s
}

type SummaryRows = Vec<(u64, u64, f64)>;

fn frequency_summary(words: &[CylinderWord]) -> Vec<SummaryRows> {
    words
        .iter()
        .map(|w| {
            let digits = w.small_digits().expect("seed digits fit in u64");
            let mut counts = BTreeMap::new();
            for d in digits {
                *counts.entry(d).or_insert(0u64) += 1;
            }
            counts
                .into_iter()
                .map(|(d, c)| (d, c, c as f64 / w.len() as f64))
                .collect()
        })
        .collect()
}

fn summary_csv(seeds: &[u64], summary: &[SummaryRows]) -> String {
    let mut s = String::from("seed,digit,count,frequency\n");
    for (seed, rows) in seeds.iter().zip(summary) {
        for (d, c, f) in rows {
            let _ = writeln!(s, "{seed},{d},{c},{}", format_sig(*f, 12));
        }
    }
    s
}
