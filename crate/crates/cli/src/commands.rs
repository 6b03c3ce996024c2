use std::io::Write;
use std::path::Path;

use occupancy_core::coupling::{coupled_samples, coupling_diagnostics};
use occupancy_core::exact::{ExactPmf, KolmogorovSide};
use occupancy_core::model::{classify_domain, mean, mean_exact, moments, starr_estimator, variance_exact, DomainThresholds};
use occupancy_core::scan::{run_scan, ScanConfig};
use occupancy_core::verify::{
    check_condition1, check_condition2_3_5, check_condition4, check_corollary41, check_helper_inequalities, check_lemma32, efron_stein_variances,
    Grid, HelperRanges, Lemma32Ranges, McBudget,
};
use occupancy_core::{exact_pmf, kolmogorov_distance, size_biased_pmf, OccupancyParams, PmfMode, RationalBudget};
use serde_json::{json, Value};

use crate::args::{BudgetArgs, Format, ModeArg, PointArgs, SampleArgs, ScanArgs, Suite, ThresholdArgs, VerifyArgs, MIN_SAMPLES};
use crate::counts::parse_counts_file;
use crate::error::{CliError, CliResult};
use crate::output::{emit_json, emit_scan, emit_table, opt};

const COUPLE_SAMPLES: u64 = 100_000;
const VERIFY_SAMPLES: u64 = 20_000;
const SCAN_SAMPLES: u64 = 100_000;
/// Largest `n^2 m` for which `couple` builds the reference law.
const COUPLE_LAW_BUDGET: f64 = 1e9;

impl From<PointArgs> for OccupancyParams {
    fn from(p: PointArgs) -> Self {
        OccupancyParams::new(p.n, p.m, p.d)
    }
}

impl From<BudgetArgs> for RationalBudget {
    fn from(b: BudgetArgs) -> Self {
        RationalBudget { max_n: b.exact_max, max_m: b.exact_max }
    }
}

impl From<ThresholdArgs> for DomainThresholds {
    fn from(t: ThresholdArgs) -> Self {
        DomainThresholds { ratio_lo: t.ratio_lo, ratio_hi: t.ratio_hi, mu_threshold: t.mu_threshold }
    }
}

fn sample_count(s: SampleArgs, default: u64) -> CliResult<u64> {
    let n = s.samples.unwrap_or(default);
    if n < MIN_SAMPLES {
        return Err(CliError::Usage(format!("sample budget must be at least {MIN_SAMPLES}, got {n}")));
    }
    Ok(n)
}

fn pmf_mode(mode: ModeArg, p: &OccupancyParams, budget: RationalBudget) -> PmfMode {
    match mode {
        ModeArg::Exact => PmfMode::Exact,
        ModeArg::Float => PmfMode::Float,
        ModeArg::Auto if budget.admits(p) => PmfMode::Exact,
        ModeArg::Auto => PmfMode::Float,
    }
}

fn side_name(side: KolmogorovSide) -> &'static str {
    match side {
        KolmogorovSide::LeftLimit => "left-limit",
        KolmogorovSide::RightLimit => "right-limit",
    }
}

pub fn moments_cmd(point: PointArgs, exact: bool, atoms: bool, format: Format, out: &mut dyn Write) -> CliResult<()> {
    let p = OccupancyParams::from(point);
    let mut s = moments(&p)?;
    if atoms {
        s = s.with_atoms(&p);
    }
    let fractions = if exact { Some((mean_exact(&p)?.to_string(), variance_exact(&p)?.to_string())) } else { None };
    match format {
        Format::Csv => {
            let mut header = vec!["n", "m", "d", "mu", "sigma2", "r"];
            let mut row = vec![p.n.to_string(), p.m.to_string(), p.d.to_string(), s.mu.to_string(), s.sigma2.to_string(), s.r.to_string()];
            if let Some((mu, s2)) = &fractions {
                header.extend(["mu_exact", "sigma2_exact"]);
                row.extend([mu.clone(), s2.clone()]);
            }
            if let Some(w) = &s.w_atoms {
                header.push("w_atoms");
                row.push(w.iter().map(f64::to_string).collect::<Vec<_>>().join(";"));
            }
            emit_table(&header, &[row], out)
        }
        Format::Json => {
            let mut doc = json!({ "n": p.n, "m": p.m, "d": p.d, "mu": s.mu, "sigma2": s.sigma2, "r": s.r });
            if let Some((mu, s2)) = fractions {
                doc["mu_exact"] = json!(mu);
                doc["sigma2_exact"] = json!(s2);
            }
            if let Some(w) = s.w_atoms {
                doc["w_atoms"] = json!(w);
            }
            emit_json(&doc, out)
        }
    }
}

pub fn pmf_cmd(point: PointArgs, mode: ModeArg, budget: BudgetArgs, size_biased: bool, format: Format, out: &mut dyn Write) -> CliResult<()> {
    let p = OccupancyParams::from(point);
    let budget = RationalBudget::from(budget);
    let mut pmf = exact_pmf(&p, pmf_mode(mode, &p, budget), budget)?;
    if size_biased {
        pmf = ExactPmf { params: p, probs: size_biased_pmf(&pmf)? };
    }
    match format {
        Format::Csv => Ok(pmf.write_csv(out)?),
        Format::Json => {
            let mut doc = pmf.to_json();
            doc["size_biased"] = json!(size_biased);
            emit_json(&doc, out)
        }
    }
}

pub fn kolmogorov_cmd(point: PointArgs, mode: ModeArg, budget: BudgetArgs, format: Format, out: &mut dyn Write) -> CliResult<()> {
    let p = OccupancyParams::from(point);
    let budget = RationalBudget::from(budget);
    let mode = pmf_mode(mode, &p, budget);
    let rep = kolmogorov_distance(&exact_pmf(&p, mode, budget)?)?;
    match format {
        Format::Csv => emit_table(
            &["n", "m", "d", "mode", "d_k", "arg_atom", "side", "lower_bound", "mu", "sigma"],
            &[vec![
                p.n.to_string(),
                p.m.to_string(),
                p.d.to_string(),
                mode.to_string(),
                rep.d_k.to_string(),
                rep.arg_atom.to_string(),
                side_name(rep.side).to_string(),
                rep.lower_bound.to_string(),
                rep.mu.to_string(),
                rep.sigma.to_string(),
            ]],
            out,
        ),
        Format::Json => {
            let mut doc = serde_json::to_value(&rep)?;
            doc["n"] = json!(p.n);
            doc["m"] = json!(p.m);
            doc["d"] = json!(p.d);
            doc["mode"] = json!(mode);
            emit_json(&doc, out)
        }
    }
}

pub struct CoupleOptions<'a> {
    pub samples: SampleArgs,
    pub budget: BudgetArgs,
    pub dump: Option<&'a Path>,
    pub dump_count: u64,
    pub verbose: bool,
}

pub fn couple_cmd(point: PointArgs, opts: CoupleOptions<'_>, seed: u64, format: Format, out: &mut dyn Write) -> CliResult<()> {
    let p = OccupancyParams::from(point);
    let samples = sample_count(opts.samples, COUPLE_SAMPLES)?;
    let mu = mean(&p)?;
    let diag = coupling_diagnostics(&p, samples, seed)?;
    let budget = RationalBudget::from(opts.budget);
    let law = if budget.admits(&p) || (p.n as f64).powi(2) * p.m as f64 <= COUPLE_LAW_BUDGET {
        let pmf = exact_pmf(&p, pmf_mode(ModeArg::Auto, &p, budget), budget)?;
        let sb = size_biased_pmf(&pmf)?.to_f64_vec();
        Some((pmf.probs.to_f64_vec(), sb))
    } else {
        None
    };
    let tv = law.as_ref().map(|(y, ys)| (diag.tv_y(y), diag.tv_y_s(ys)));
    let identity = diag.size_bias_identity(mu);
    if let Some(path) = opts.dump {
        let draws = coupled_samples(&p, opts.dump_count.min(samples), seed)?;
        let mut text = String::new();
        for s in &draws {
            text.push_str(&s.to_json_line(opts.verbose));
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    }
    let k_moments: Vec<f64> = (1..=4).map(|q| diag.k_moment(q)).collect();
    match format {
        Format::Csv => {
            let mut rows = vec![
                vec!["samples".into(), samples.to_string(), String::new()],
                vec!["mu".into(), mu.to_string(), String::new()],
                vec!["tv_y".into(), opt(tv.map(|t| t.0)), String::new()],
                vec!["tv_y_s".into(), opt(tv.map(|t| t.1)), String::new()],
                vec!["k_violations".into(), diag.k_violations.to_string(), String::new()],
                vec!["k_equalities".into(), diag.k_equalities.to_string(), String::new()],
                vec!["v_violations".into(), diag.v_violations.to_string(), String::new()],
                vec!["l_mean".into(), diag.l_moment(1).to_string(), String::new()],
            ];
            for (q, v) in k_moments.iter().enumerate() {
                rows.push(vec![format!("k_moment_{}", q + 1), v.to_string(), String::new()]);
            }
            for c in &identity {
                rows.push(vec![format!("identity_gap:{}", c.function), (c.lhs - c.rhs).to_string(), c.std_error.to_string()]);
            }
            writeln!(out, "# occupancy-couple v1 n={} m={} d={} seed={seed}", p.n, p.m, p.d)?;
            emit_table(&["quantity", "value", "std_error"], &rows, out)
        }
        Format::Json => {
            let doc = json!({
                "n": p.n,
                "m": p.m,
                "d": p.d,
                "seed": seed,
                "samples": samples,
                "mu": mu,
                "tv_y": tv.map(|t| t.0),
                "tv_y_s": tv.map(|t| t.1),
                "k_violations": diag.k_violations,
                "k_equalities": diag.k_equalities,
                "v_violations": diag.v_violations,
                "l_mean": diag.l_moment(1),
                "k_moments": k_moments,
                "y_counts": diag.y,
                "y_s_counts": diag.y_s,
                "identity": identity.iter().map(|c| json!({
                    "function": c.function,
                    "lhs": c.lhs,
                    "rhs": c.rhs,
                    "std_error": c.std_error,
                    "z": c.z_score(),
                })).collect::<Vec<_>>(),
            });
            emit_json(&doc, out)
        }
    }
}

struct SuiteResult {
    name: &'static str,
    pass: bool,
    report: Value,
    rows: Vec<Vec<String>>,
}

fn row(suite: &str, check: impl Into<String>, statistic: &str, value: impl ToString, pass: bool) -> Vec<String> {
    vec![suite.to_string(), check.into(), statistic.to_string(), value.to_string(), pass.to_string()]
}

fn run_conditions(a: &VerifyArgs, seed: u64) -> CliResult<SuiteResult> {
    let grid = Grid::new(a.d, a.m_values.clone(), a.ratios.clone());
    if grid.points().is_empty() {
        return Err(CliError::Usage("condition grid has no points".into()));
    }
    let samples = sample_count(a.samples, VERIFY_SAMPLES)?;
    let c1 = check_condition1(&grid, &McBudget { samples, seed })?;
    let rest = check_condition2_3_5(&grid)?;
    let c4 = check_condition4(&grid)?;
    let mut rows = Vec::new();
    for r in std::iter::once(&c1).chain(&rest).chain([&c4.sigma_ratio, &c4.rate_ratio, &c4.mu_ratio]) {
        let name = format!("condition{}:{}", r.condition, r.quantity);
        rows.push(row("conditions", name.clone(), "sup", r.sup, r.pass));
        rows.push(row("conditions", name.clone(), "refined_sup", r.refined_sup, r.pass));
        rows.push(row("conditions", name, "drift", r.drift, r.pass));
    }
    rows.push(row("conditions", "condition4", "n1", c4.n1.map(|v| v.to_string()).unwrap_or_default(), c4.pass));
    let pass = c1.pass && rest.iter().all(|r| r.pass) && c4.pass;
    Ok(SuiteResult {
        name: "conditions",
        pass,
        report: json!({ "condition1": c1, "conditions2_3_5": rest, "condition4": c4 }),
        rows,
    })
}

fn run_efron_stein(a: &VerifyArgs, seed: u64) -> CliResult<SuiteResult> {
    let p = OccupancyParams::new(a.es_n, a.es_m, a.d);
    let samples = sample_count(a.samples, VERIFY_SAMPLES * 5)?;
    let reps = efron_stein_variances(&p, samples, seed, a.ceiling)?;
    let mut rows = Vec::new();
    for r in &reps {
        let ok = r.within_ceiling && r.precise;
        let name = serde_json::to_value(r.sum)?.as_str().unwrap_or_default().to_string();
        rows.push(row("efron-stein", name.clone(), "variance", r.estimate, ok));
        rows.push(row("efron-stein", name.clone(), "std_error", r.std_error, ok));
        rows.push(row("efron-stein", name, "ratio_to_bound", r.ratio, ok));
    }
    Ok(SuiteResult {
        name: "efron-stein",
        pass: reps.iter().all(|r| r.within_ceiling && r.precise),
        report: json!({ "n": p.n, "m": p.m, "d": p.d, "samples": samples, "sums": reps }),
        rows,
    })
}

fn run_helpers() -> CliResult<SuiteResult> {
    let rep = check_helper_inequalities(&HelperRanges::default());
    let rows = rep.checks.iter().map(|c| row("helpers", c.name.clone(), "violations", c.violations, c.violations == 0)).collect();
    Ok(SuiteResult { name: "helpers", pass: rep.pass, report: serde_json::to_value(&rep)?, rows })
}

fn run_lemma32() -> CliResult<SuiteResult> {
    let rep = check_lemma32(&Lemma32Ranges::default())?;
    let mut rows = Vec::new();
    for v in &rep.vanishing {
        rows.push(row("lemma32", format!("vanishing:d={},n={}", v.d, v.n), "last_sigma2", v.last_sigma2, v.pass));
    }
    for b in &rep.boundedness {
        rows.push(row("lemma32", format!("boundedness:d={}", b.d), "sigma2_over_mu", b.large.sigma2_over_mu, b.pass));
        rows.push(row("lemma32", format!("boundedness:d={}", b.d), "max_drift", b.max_drift, b.pass));
    }
    for f in &rep.phi_infimum {
        rows.push(row("lemma32", format!("phi_infimum:d={}", f.d), "min", f.min, f.pass));
        rows.push(row("lemma32", format!("phi_infimum:d={}", f.d), "argmin", f.argmin, f.pass));
    }
    for t in &rep.threshold_scan {
        rows.push(row("lemma32", format!("threshold:d={},r1={}", t.d, t.r1), "violations", t.violations, t.pass));
    }
    Ok(SuiteResult { name: "lemma32", pass: rep.pass, report: serde_json::to_value(&rep)?, rows })
}

fn run_corollary(a: &VerifyArgs) -> CliResult<SuiteResult> {
    let rep = check_corollary41(&a.a, &a.sequence_m, &a.sequence_d)?;
    let mut rows = Vec::new();
    for s in &rep.sequences {
        let name = format!("sequence:d={},a={}", s.d, s.a);
        if s.vacuous {
            rows.push(row("corollary", name, "vacuous", true, s.pass));
            continue;
        }
        if let Some(last) = s.points.iter().rev().find(|p| p.n.is_some()) {
            rows.push(row("corollary", name.clone(), "r_last", opt(last.r), s.pass));
            rows.push(row("corollary", name.clone(), "delta_over_loglog_last", opt(last.delta_over_loglog), s.pass));
        }
        rows.push(row("corollary", name, "increasing_tail", s.increasing_tail, s.pass));
    }
    Ok(SuiteResult { name: "corollary", pass: rep.pass, report: serde_json::to_value(&rep)?, rows })
}

/// Returns whether every requested suite passed.
pub fn verify_cmd(a: &VerifyArgs, seed: u64, format: Format, out: &mut dyn Write) -> CliResult<bool> {
    let want = |s: Suite| a.suite == s || a.suite == Suite::All;
    let mut results = Vec::new();
    if want(Suite::Conditions) {
        results.push(run_conditions(a, seed)?);
    }
    if want(Suite::EfronStein) {
        results.push(run_efron_stein(a, seed)?);
    }
    if want(Suite::Helpers) {
        results.push(run_helpers()?);
    }
    if want(Suite::Lemma32) {
        results.push(run_lemma32()?);
    }
    if want(Suite::Corollary) {
        results.push(run_corollary(a)?);
    }
    let pass = results.iter().all(|r| r.pass);
    match format {
        Format::Csv => {
            let mut rows: Vec<Vec<String>> = results.iter().flat_map(|r| r.rows.clone()).collect();
            for r in &results {
                rows.push(row(r.name, "suite", "pass", r.pass, r.pass));
            }
            writeln!(out, "# occupancy-verify v1 seed={seed}")?;
            emit_table(&["suite", "check", "statistic", "value", "pass"], &rows, out)?;
        }
        Format::Json => {
            let suites: serde_json::Map<String, Value> =
                results.into_iter().map(|r| (r.name.to_string(), json!({ "pass": r.pass, "report": r.report }))).collect();
            emit_json(&json!({ "seed": seed, "pass": pass, "suites": suites }), out)?;
        }
    }
    Ok(pass)
}

fn parse_triple(s: &str, what: &str) -> CliResult<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::Usage(format!("{what} must look like lo:hi:step, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    Ok((v[0], v[1], v[2]))
}

pub fn scan_grid(a: &ScanArgs) -> CliResult<Grid> {
    if let (Some(n), Some(m)) = (a.n, a.m) {
        if m == 0 {
            return Err(CliError::Usage("need m >= 1".into()));
        }
        return Ok(Grid::single(n, m, a.d));
    }
    let m_values = if let Some(v) = &a.m_values {
        v.clone()
    } else if let Some(r) = &a.m_range {
        let (lo, hi, step) = parse_triple(r, "--m-range")?;
        if !(lo >= 1.0 && hi >= lo && step >= 1.0) || lo.fract() != 0.0 || hi.fract() != 0.0 || step.fract() != 0.0 {
            return Err(CliError::Usage(format!("--m-range needs integers 1 <= lo <= hi and step >= 1, got {r:?}")));
        }
        (lo as u64..=hi as u64).step_by(step as usize).collect()
    } else {
        (20..=150).step_by(10).collect()
    };
    if m_values.contains(&0) {
        return Err(CliError::Usage("urn counts must be positive".into()));
    }
    let grid = if let Some(r) = &a.ratios {
        Grid::new(a.d, m_values, r.clone())
    } else {
        let (lo, hi, count) = match &a.band {
            Some(b) => parse_triple(b, "--band")?,
            None => (0.5, 2.0, 7.0),
        };
        if !(lo >= 0.0 && hi >= lo && count >= 1.0 && count.fract() == 0.0) {
            return Err(CliError::Usage("--band needs 0 <= lo <= hi and a whole count >= 1".into()));
        }
        Grid::band(a.d, m_values, lo, hi, count as usize)
    };
    if grid.ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(CliError::Usage("loads must be finite and nonnegative".into()));
    }
    Ok(grid)
}

pub fn scan_cmd(a: &ScanArgs, seed: u64, format: Format, out: &mut dyn Write) -> CliResult<()> {
    let grid = scan_grid(a)?;
    let mut cfg = ScanConfig::new(grid);
    cfg.rational = RationalBudget::from(a.budget);
    cfg.float_budget = a.float_budget;
    cfg.mc_samples = sample_count(a.samples, SCAN_SAMPLES)?;
    cfg.seed = seed;
    cfg.thresholds = DomainThresholds::from(a.thresholds);
    let rows = run_scan(&cfg);
    emit_scan(&rows, &cfg, format, out)
}

pub fn domain_cmd(point: PointArgs, thresholds: ThresholdArgs, format: Format, out: &mut dyn Write) -> CliResult<()> {
    let p = OccupancyParams::from(point);
    let rep = classify_domain(&p, DomainThresholds::from(thresholds))?;
    match format {
        Format::Csv => emit_table(
            &["n", "m", "d", "label", "ratio", "mu", "sigma2_over_mu", "delta", "ratio_lo", "ratio_hi", "mu_threshold"],
            &[vec![
                p.n.to_string(),
                p.m.to_string(),
                p.d.to_string(),
                rep.label.to_string(),
                rep.ratio.to_string(),
                rep.mu.to_string(),
                rep.sigma2_over_mu.to_string(),
                opt(rep.delta),
                rep.thresholds.ratio_lo.to_string(),
                rep.thresholds.ratio_hi.to_string(),
                rep.thresholds.mu_threshold.to_string(),
            ]],
            out,
        ),
        Format::Json => emit_json(
            &json!({
                "n": p.n,
                "m": p.m,
                "d": p.d,
                "label": rep.label.to_string(),
                "ratio": rep.ratio,
                "mu": rep.mu,
                "sigma2_over_mu": rep.sigma2_over_mu,
                "delta": rep.delta,
                "thresholds": rep.thresholds,
            }),
            out,
        ),
    }
}

pub fn starr_cmd(path: &Path, n0: u64, n: Option<u64>, format: Format, out: &mut dyn Write) -> CliResult<()> {
    let counts = parse_counts_file(path)?;
    let total = n.unwrap_or(counts.n);
    let est = starr_estimator(&counts.counts, total, n0)?;
    match format {
        Format::Csv => emit_table(&["n", "n0", "estimate"], &[vec![total.to_string(), n0.to_string(), est.to_string()]], out),
        Format::Json => emit_json(&json!({ "n": total, "n0": n0, "estimate": est }), out),
    }
}
