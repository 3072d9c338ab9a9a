use std::fmt;
use std::io::Write;

use anyhow::Result;
use multibias::oracle::{verify_worlds, WorldConfig};
use multibias::{
    evalue_curve, grid_table, multi_bound, multi_evalue, parameter_summary, BiasSet,
    EffectEstimate, Error, Measure, ParamValues,
};
use serde::Serialize;

use crate::dsl::{parse_bias_set, split_top_level, SpecError};
use crate::output::{csv, exact, json, json_line, num, opt_exact, opt_num, table, Align, Format};

/// Bad input from the user; exits with status 2.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Invalid(msg.into()).into())
}

/// Library errors that come from the inputs are reported as [`Invalid`].
fn lib(e: Error) -> anyhow::Error {
    match e {
        Error::NoConvergence(_) => anyhow::Error::new(e),
        e => Invalid(e.to_string()).into(),
    }
}

pub fn bias_set(text: &str) -> Result<BiasSet> {
    parse_bias_set(text).map_err(|e: SpecError| Invalid(format!("in `{text}`: {e}")).into())
}

fn expected(set: &BiasSet) -> String {
    format!(
        "expected parameters for `{set}`: {}",
        set.parameter_names().join(", ")
    )
}

pub fn param_map(pairs: &[(String, f64)]) -> Result<ParamValues> {
    let mut values = ParamValues::new();
    for (name, v) in pairs {
        if values.insert(name.clone(), *v).is_some() {
            return invalid(format!("parameter `{name}` given more than once"));
        }
    }
    Ok(values)
}

/// Library error with the list of expected parameter names appended when relevant.
fn with_expected(set: &BiasSet) -> impl Fn(Error) -> anyhow::Error + '_ {
    move |e| match e {
        Error::MissingParameter(_) | Error::UnknownParameter(_) | Error::DuplicateParameter(_) => {
            Invalid(format!("{e}\n{}", expected(set))).into()
        }
        e => lib(e),
    }
}

#[derive(Serialize)]
struct BoundOut<'a> {
    biases: String,
    bound: f64,
    parameters: &'a ParamValues,
}

pub fn bound(
    set: &BiasSet,
    params: &[(String, f64)],
    format: Format,
    out: &mut dyn Write,
) -> Result<()> {
    let values = param_map(params)?;
    let b = multi_bound(set, &values).map_err(with_expected(set))?;
    let text = match format {
        Format::Text => format!("{}\n", num(b)),
        Format::Json => json(BoundOut {
            biases: set.to_string(),
            bound: b,
            parameters: &values,
        })?,
        Format::Csv => csv(&["bound".into()], &[vec![exact(b)]])?,
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub struct EstimateArgs {
    pub est: f64,
    pub measure: Measure,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub true_value: f64,
}

#[derive(Serialize)]
struct Triple {
    point: f64,
    lo: Option<f64>,
    hi: Option<f64>,
}

#[derive(Serialize)]
struct EValueOut {
    biases: String,
    measure: &'static str,
    rare_outcome: Option<bool>,
    true_value: f64,
    estimate: Triple,
    risk_ratio: Triple,
    evalue: Triple,
    parameters: Vec<String>,
}

fn parameter_note(set: &BiasSet) -> String {
    format!(
        "note: the E-value applies jointly to {}",
        set.parameter_names().join(", ")
    )
}

pub fn evalue(
    set: &BiasSet,
    args: &EstimateArgs,
    format: Format,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let mut est = EffectEstimate::new(args.measure, args.est);
    est.lo = args.lo;
    est.hi = args.hi;
    let r = multi_evalue(set, &est, args.true_value).map_err(lib)?;

    if args.true_value != 1.0 {
        writeln!(
            err,
            "note: non-null E-value: the least bias that would move the estimate and its \
             interval to a true value of {} instead of the null",
            num(args.true_value)
        )?;
    }
    writeln!(err, "{}", parameter_note(set))?;

    let text = match format {
        Format::Text => {
            let header: Vec<String> = ["", "point", "lower", "upper"].map(String::from).to_vec();
            let rows = vec![
                vec!["RR".into(), num(r.point), opt_num(r.lo), opt_num(r.hi)],
                vec![
                    "Multi-bias E-values".into(),
                    num(r.evalue_point),
                    opt_num(r.evalue_lo),
                    opt_num(r.evalue_hi),
                ],
            ];
            table(&header, &rows, &[Align::Left])
        }
        Format::Json => json(EValueOut {
            biases: set.to_string(),
            measure: args.measure.label(),
            rare_outcome: match args.measure {
                Measure::RiskRatio => None,
                Measure::OddsRatio { rare_outcome } | Measure::HazardRatio { rare_outcome } => {
                    Some(rare_outcome)
                }
            },
            true_value: r.true_value,
            estimate: Triple {
                point: args.est,
                lo: args.lo,
                hi: args.hi,
            },
            risk_ratio: Triple {
                point: r.point,
                lo: r.lo,
                hi: r.hi,
            },
            evalue: Triple {
                point: r.evalue_point,
                lo: r.evalue_lo,
                hi: r.evalue_hi,
            },
            parameters: r.parameters,
        })?,
        Format::Csv => csv(
            &["row", "point", "lower", "upper"].map(String::from),
            &[
                vec![
                    "RR".into(),
                    exact(r.point),
                    opt_exact(r.lo),
                    opt_exact(r.hi),
                ],
                vec![
                    "evalue".into(),
                    exact(r.evalue_point),
                    opt_exact(r.evalue_lo),
                    opt_exact(r.evalue_hi),
                ],
            ],
        )?,
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryOut {
    biases: String,
    parameters: Vec<multibias::SummaryRow>,
}

pub fn summary(set: &BiasSet, latex: bool, format: Format, out: &mut dyn Write) -> Result<()> {
    let rows = parameter_summary(set, latex);
    let mut header: Vec<String> = ["bias", "output", "argument"].map(String::from).to_vec();
    if latex {
        header.push("latex".into());
    }
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut line = vec![r.bias.clone(), r.output.clone(), r.argument.clone()];
            line.extend(r.latex.clone());
            line
        })
        .collect();
    let text = match format {
        Format::Text => table(&header, &cells, &[Align::Left; 4]),
        Format::Json => json(SummaryOut {
            biases: set.to_string(),
            parameters: rows,
        })?,
        Format::Csv => csv(&header, &cells)?,
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

/// Values like R's `seq(from, to, by)`.
pub fn seq(from: f64, to: f64, by: f64) -> Result<Vec<f64>> {
    if ![from, to, by].iter().all(|v| v.is_finite()) {
        return invalid("sequence bounds must be finite");
    }
    if from == to {
        return Ok(vec![from]);
    }
    let steps = (to - from) / by;
    if by == 0.0 || steps < 0.0 {
        return invalid(format!("step {by} does not lead from {from} to {to}"));
    }
    if steps > 1e6 {
        return invalid(format!("sequence {from}:{to}:{by} is too long"));
    }
    let n = (steps + 1e-10).floor() as usize;
    Ok((0..=n).map(|i| from + i as f64 * by).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vary {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Serialize)]
struct GridOut {
    biases: String,
    #[serde(flatten)]
    grid: multibias::Grid,
}

pub fn grid(
    set: &BiasSet,
    rows: &Vary,
    cols: &Vary,
    fixed: &[(String, f64)],
    format: Format,
    out: &mut dyn Write,
) -> Result<()> {
    let fixed = param_map(fixed)?;
    let g = grid_table(
        set,
        (&rows.name, &rows.values),
        (&cols.name, &cols.values),
        &fixed,
    )
    .map_err(with_expected(set))?;
    let corner = format!("{}\\{}", g.row_parameter, g.column_parameter);
    let text = match format {
        Format::Json => json(GridOut {
            biases: set.to_string(),
            grid: g,
        })?,
        Format::Text | Format::Csv => {
            let cell: fn(f64) -> String = if format == Format::Text { num } else { exact };
            let mut header = vec![corner];
            header.extend(g.columns.iter().map(|&c| cell(c)));
            let body: Vec<Vec<String>> = g
                .rows
                .iter()
                .zip(&g.values)
                .map(|(&r, line)| {
                    let mut v = vec![cell(r)];
                    v.extend(line.iter().map(|&x| cell(x)));
                    v
                })
                .collect();
            if format == Format::Text {
                table(&header, &body, &[Align::Left])
            } else {
                csv(&header, &body)?
            }
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn bias_sets(list: &str) -> Result<Vec<BiasSet>> {
    let parts = split_top_level(list, &[',', ';']).map_err(|e| Invalid(e.to_string()))?;
    parts
        .into_iter()
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(bias_set)
        .collect::<Result<Vec<_>>>()
        .and_then(|sets| {
            if sets.is_empty() {
                invalid("no bias sets given")
            } else {
                Ok(sets)
            }
        })
}

pub fn linspace(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite()) || min > max {
        return invalid(format!("risk-ratio range {min}..{max} is empty"));
    }
    match points {
        0 => invalid("need at least one point"),
        1 => Ok(vec![min]),
        n => Ok((0..n)
            .map(|i| {
                if i == n - 1 {
                    max
                } else {
                    min + (max - min) * i as f64 / (n - 1) as f64
                }
            })
            .collect()),
    }
}

#[derive(Serialize)]
struct CurveOut {
    rows: Vec<multibias::CurveRow>,
}

pub fn curve(sets: &[BiasSet], rr: &[f64], format: Format, out: &mut dyn Write) -> Result<()> {
    let rows = evalue_curve(sets, rr).map_err(lib)?;
    let header: Vec<String> = ["rr", "bias_set", "evalue"].map(String::from).to_vec();
    let text = match format {
        Format::Json => json(CurveOut { rows })?,
        Format::Text => {
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![num(r.rr), r.bias_set.clone(), num(r.evalue)])
                .collect();
            table(&header, &body, &[Align::Right, Align::Left, Align::Right])
        }
        Format::Csv => {
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![exact(r.rr), r.bias_set.clone(), exact(r.evalue)])
                .collect();
            csv(&header, &body)?
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub const RESULT1: &str = "confounding + selection(general) + misclassification(outcome)";
pub const RESULT2: &str =
    "confounding + selection(general) + misclassification(exposure, rare_outcome)";
pub const RESULT3: &str = "confounding + selection(selected) + misclassification(outcome)";

/// Default outcome-risk ceiling for the rare-outcome preset.
pub const RESULT2_CEILING: f64 = 0.01;

pub fn structure(text: &str) -> Result<(BiasSet, Option<f64>)> {
    match text.trim() {
        "result1" => Ok((bias_set(RESULT1)?, None)),
        "result2" => Ok((bias_set(RESULT2)?, Some(RESULT2_CEILING))),
        "result3" => Ok((bias_set(RESULT3)?, None)),
        dsl => Ok((bias_set(dsl)?, None)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum VerifyFormat {
    Jsonl,
    Json,
    Text,
}

#[derive(Serialize)]
struct VerifySummary {
    structure: String,
    worlds: usize,
    first_seed: u64,
    violations: usize,
    max_ratio_to_bound: Option<f64>,
    max_violation: f64,
    max_prevalence: Option<f64>,
}

pub fn verify(
    config: &WorldConfig,
    first_seed: u64,
    worlds: usize,
    format: VerifyFormat,
    out: &mut dyn Write,
) -> Result<()> {
    let mut violations = 0;
    let mut sharpest: Option<f64> = None;
    let mut worst = 0.0f64;
    let mut prevalence: Option<f64> = None;
    for i in 0..worlds as u64 {
        let seed = first_seed.wrapping_add(i);
        let report = verify_worlds(config, seed, 1).map_err(lib)?.remove(0);
        let r = &report.report;
        if !r.holds {
            violations += 1;
        }
        sharpest = Some(sharpest.map_or(r.ratio / r.bound, |s| s.max(r.ratio / r.bound)));
        worst = worst.max(r.violation);
        prevalence = Some(prevalence.map_or(r.prevalence, |p| p.max(r.prevalence)));
        if format == VerifyFormat::Jsonl {
            json_line(&report, out)?;
        }
    }
    let summary = VerifySummary {
        structure: config.bias_set.to_string(),
        worlds,
        first_seed,
        violations,
        max_ratio_to_bound: sharpest,
        max_violation: worst,
        max_prevalence: prevalence,
    };
    match format {
        VerifyFormat::Jsonl => {}
        VerifyFormat::Json => out.write_all(json(summary)?.as_bytes())?,
        VerifyFormat::Text => {
            let rows = vec![
                vec!["structure".into(), summary.structure.clone()],
                vec!["worlds".into(), worlds.to_string()],
                vec!["first seed".into(), first_seed.to_string()],
                vec!["violations".into(), violations.to_string()],
                vec!["max ratio/bound".into(), opt_num(sharpest)],
                vec!["max violation".into(), num(worst)],
                vec!["max outcome risk".into(), opt_num(prevalence)],
            ];
            let mut text = String::new();
            for line in rows {
                text.push_str(&format!("{:<17}{}\n", line[0], line[1]));
            }
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

pub fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let name = name.trim();
    if name.is_empty() {
        return Err(format!("missing parameter name in `{s}`"));
    }
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("`{}` is not a number", value.trim()))?;
    Ok((name.to_string(), value))
}

fn number(s: &str) -> Result<f64, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("`{}` is not a number", s.trim()))
}

/// `NAME=start:stop:step` or `NAME=v1,v2,...`.
pub fn parse_vary(s: &str) -> Result<Vary, String> {
    let (name, spec) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=start:stop:step or NAME=v1,v2,..., got `{s}`"))?;
    let name = name.trim().to_string();
    if name.is_empty() {
        return Err(format!("missing parameter name in `{s}`"));
    }
    let values = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [from, to, by] = parts[..] else {
            return Err(format!("expected start:stop:step, got `{spec}`"));
        };
        seq(number(from)?, number(to)?, number(by)?).map_err(|e| e.to_string())?
    } else {
        spec.split(',').map(number).collect::<Result<Vec<_>, _>>()?
    };
    Ok(Vary { name, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seq_matches_r() {
        assert_eq!(seq(1.25, 3.0, 0.25).unwrap().len(), 8);
        assert_eq!(seq(1.0, 2.0, 0.1).unwrap().len(), 11);
        assert_eq!(seq(3.0, 1.0, -1.0).unwrap(), [3.0, 2.0, 1.0]);
        assert_eq!(seq(2.0, 2.0, 1.0).unwrap(), [2.0]);
        assert!(seq(1.0, 2.0, -0.5).is_err());
        assert!(seq(1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn linspace_hits_both_ends() {
        let v = linspace(1.0, 7.0, 61).unwrap();
        assert_eq!(v.len(), 61);
        assert_eq!(v[0], 1.0);
        assert_eq!(v[60], 7.0);
        assert!((v[30] - 4.0).abs() < 1e-15);
        assert!(linspace(2.0, 1.0, 3).is_err());
        assert!(linspace(1.0, 2.0, 0).is_err());
    }

    #[test]
    fn parses_vary_forms() {
        let v = parse_vary("RRAUc=1.25:3:0.25").unwrap();
        assert_eq!(v.name, "RRAUc");
        assert_eq!(v.values.len(), 8);
        let v = parse_vary("RRUcY = 1.3, 1.5,2").unwrap();
        assert_eq!(v.values, [1.3, 1.5, 2.0]);
        assert!(parse_vary("RRAUc").is_err());
        assert!(parse_vary("RRAUc=1:2").is_err());
        assert!(parse_vary("RRAUc=a,b").is_err());
    }

    #[test]
    fn parses_assignments() {
        assert_eq!(
            parse_assignment("RRAUc=2.3").unwrap(),
            ("RRAUc".into(), 2.3)
        );
        assert!(parse_assignment("RRAUc").is_err());
        assert!(parse_assignment("=2").is_err());
        assert!(parse_assignment("RRAUc=x").is_err());
    }

    #[test]
    fn text_bound_uses_seven_digits() {
        let set = bias_set("confounding + selection(general, increased_risk)").unwrap();
        let params: Vec<(String, f64)> = [
            ("RRAUc", 2.3),
            ("RRUcY", 2.5),
            ("RRUsYA1", 3.0),
            ("RRSUsA1", 2.0),
        ]
        .iter()
        .map(|&(k, v)| (k.to_string(), v))
        .collect();
        let mut out = Vec::new();
        bound(&set, &params, Format::Text, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "2.269737\n");
    }

    #[test]
    fn missing_parameter_lists_expected_names() {
        let set = bias_set("confounding").unwrap();
        let err = bound(
            &set,
            &[("RRAUc".into(), 2.0)],
            Format::Text,
            &mut Vec::new(),
        )
        .unwrap_err();
        let msg = err.downcast_ref::<Invalid>().unwrap().to_string();
        assert!(msg.contains("RRUcY"));
        assert!(msg.contains("expected parameters"));
    }

    #[test]
    fn schema_version_is_present() {
        let set = bias_set("confounding").unwrap();
        let mut out = Vec::new();
        summary(&set, false, Format::Json, &mut out).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
        assert_eq!(v["schema_version"], crate::output::SCHEMA_VERSION);
        assert_eq!(v["parameters"][0]["argument"], "RRAUc");
    }
}
