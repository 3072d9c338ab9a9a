use std::process::{Command, Output};

use multibias::{
    evalue_polynomial, multi_bound, multi_evalue, param_values, BiasSet, BiasSpec, EffectEstimate,
    Selection,
};
use serde_json::Value;

const HIV: &str = "confounding + selection(general,increased_risk)";
const HIV_PARAMS: [&str; 8] = [
    "--param",
    "RRAUc=2.3",
    "--param",
    "RRUcY=2.5",
    "--param",
    "RRUsYA1=3",
    "--param",
    "RRSUsA1=2",
];
const LEUKEMIA: &str = "confounding + misclassification(exposure, rare_outcome)";
const THREE: &str = "confounding + selection(general) + misclassification(outcome)";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multibias"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    stdout(&o)
}

fn json(args: &[&str]) -> Value {
    let v: Value = serde_json::from_str(&ok(args)).unwrap();
    assert_eq!(v["schema_version"], 1);
    v
}

fn near(v: &Value, want: f64, tol: f64) {
    let got = v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"));
    assert!((got - want).abs() <= tol, "{got} vs {want}");
}

fn hiv_set() -> BiasSet {
    BiasSet::new([
        BiasSpec::Confounding,
        Selection::general().increased_risk().into(),
    ])
    .unwrap()
}

#[test]
fn bound_text_matches_printed_value() {
    let mut args = vec!["bound", "--biases", HIV];
    args.extend(HIV_PARAMS);
    assert_eq!(ok(&args), "2.269737\n");
}

#[test]
fn bound_json_is_the_library_value() {
    let mut args = vec!["bound", "--biases", HIV, "--format", "json"];
    args.extend(HIV_PARAMS);
    let v = json(&args);
    let lib = multi_bound(
        &hiv_set(),
        &param_values([
            ("RRAUc", 2.3),
            ("RRUcY", 2.5),
            ("RRUsYA1", 3.0),
            ("RRSUsA1", 2.0),
        ]),
    )
    .unwrap();
    assert_eq!(v["bound"].as_f64().unwrap(), lib);
    near(&v["bound"], 2.269737, 1e-6);
    assert_eq!(v["parameters"]["RRSUsA1"], 2.0);
}

#[test]
fn bound_csv_has_full_precision() {
    let mut args = vec!["bound", "--biases", HIV, "--format", "csv"];
    args.extend(HIV_PARAMS);
    let text = ok(&args);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("bound"));
    let v: f64 = lines.next().unwrap().parse().unwrap();
    assert!((v - 2.269737).abs() < 1e-6);
}

#[test]
fn missing_parameter_is_named() {
    let o = run(&[
        "bound",
        "--biases",
        HIV,
        "--param",
        "RRAUc=2.3",
        "--param",
        "RRUcY=2.5",
        "--param",
        "RRUsYA1=3",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("RRSUsA1"), "{err}");
    assert!(err.contains("RRAUc, RRUcY, RRUsYA1, RRSUsA1"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn unknown_and_repeated_parameters_are_rejected() {
    let mut args = vec!["bound", "--biases", HIV, "--param", "RRXYZ=2"];
    args.extend(HIV_PARAMS);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("RRXYZ"));

    let mut args = vec!["bound", "--biases", HIV, "--param", "RRAUc=2"];
    args.extend(HIV_PARAMS);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("more than once"));
}

#[test]
fn out_of_domain_parameter_exits_2() {
    let o = run(&[
        "bound",
        "--biases",
        "confounding",
        "--param",
        "RRAUc=0.5",
        "--param",
        "RRUcY=2",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_bias_specs_exit_2() {
    for spec in [
        "confounder",
        "selection(general, big)",
        "confounding + confounding",
        "misclassification(exposure)",
        "selection(selected, s_equals_u)",
    ] {
        let o = run(&["summary", "--biases", spec]);
        assert_eq!(o.status.code(), Some(2), "{spec}");
        assert!(stderr(&o).starts_with("error:"), "{spec}");
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["bound"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        run(&["bound", "--biases", "confounding", "--param", "RRAUc"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn hiv_evalue_matrix() {
    let o = run(&[
        "evalue",
        "--biases",
        HIV,
        "--est",
        "6.75",
        "--measure",
        "OR",
        "--rare",
        "--lo",
        "2.79",
        "--hi",
        "16.31",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].split_whitespace().eq(["point", "lower", "upper"]));
    assert!(lines[1]
        .split_whitespace()
        .eq(["RR", "6.75", "2.79", "16.31"]));
    assert!(
        lines[2].ends_with("4.635703 2.728474    NA"),
        "{}",
        lines[2]
    );
    let err = stderr(&o);
    assert!(err.contains("RRAUc, RRUcY, RRUsYA1, RRSUsA1"), "{err}");
    assert!(!err.contains("non-null"));
}

#[test]
fn evalue_json_matches_library_and_printed_values() {
    let v = json(&[
        "evalue",
        "--biases",
        HIV,
        "--est",
        "6.75",
        "--measure",
        "OR",
        "--rare",
        "--lo",
        "2.79",
        "--hi",
        "16.31",
        "--format",
        "json",
    ]);
    let lib = multi_evalue(
        &hiv_set(),
        &EffectEstimate::or(6.75, true).with_ci(2.79, 16.31),
        1.0,
    )
    .unwrap();
    assert_eq!(v["evalue"]["point"].as_f64().unwrap(), lib.evalue_point);
    near(&v["evalue"]["point"], 4.635703, 1e-4);
    near(&v["evalue"]["lo"], 2.728474, 1e-4);
    assert!(v["evalue"]["hi"].is_null());
    assert_eq!(v["measure"], "OR");
    assert_eq!(v["parameters"][3], "RRSUsA1");
}

#[test]
fn leukemia_evalue_reports_upper_limit() {
    let v = json(&[
        "evalue",
        "--biases",
        LEUKEMIA,
        "--est",
        "0.51",
        "--measure",
        "OR",
        "--rare",
        "--lo",
        "0.3",
        "--hi",
        "0.89",
        "--format",
        "json",
    ]);
    near(&v["evalue"]["point"], 1.351985, 1e-4);
    near(&v["evalue"]["hi"], 1.058404, 1e-4);
    assert!(v["evalue"]["lo"].is_null());

    let inverted = json(&[
        "evalue",
        "--biases",
        LEUKEMIA,
        "--est",
        &(1.0 / 0.51).to_string(),
        "--measure",
        "OR",
        "--rare",
        "--lo",
        &(1.0 / 0.89).to_string(),
        "--hi",
        &(1.0 / 0.3).to_string(),
        "--format",
        "json",
    ]);
    assert_eq!(inverted["evalue"]["point"], v["evalue"]["point"]);
    assert_eq!(inverted["evalue"]["lo"], v["evalue"]["hi"]);
}

#[test]
fn non_null_evalue_prints_notice() {
    let o = run(&[
        "evalue",
        "--biases",
        HIV,
        "--est",
        "6.75",
        "--measure",
        "OR",
        "--rare",
        "--lo",
        "2.79",
        "--hi",
        "16.31",
        "--true",
        "2",
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("non-null"));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    near(&v["evalue"]["point"], 3.077243, 1e-4);
    near(&v["evalue"]["lo"], 1.643623, 1e-4);
    assert_eq!(v["true_value"], 2.0);
}

#[test]
fn evalue_csv_leaves_missing_limits_empty() {
    let out = ok(&[
        "evalue",
        "--biases",
        "confounding",
        "--est",
        "10.73",
        "--format",
        "csv",
    ]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "row,point,lower,upper");
    assert_eq!(lines[1], "RR,10.73,,");
    assert!(lines[2].starts_with("evalue,20.9477"));
}

#[test]
fn hazard_ratio_is_rejected() {
    let o = run(&[
        "evalue",
        "--biases",
        "confounding",
        "--est",
        "2",
        "--measure",
        "HR",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn summary_examples() {
    let v = json(&["summary", "--biases", HIV, "--format", "json"]);
    let rows = v["parameters"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3]["bias"], "selection");
    assert_eq!(rows[3]["output"], "RR_SUs|A=1");
    assert_eq!(rows[3]["argument"], "RRSUsA1");
    assert!(rows[3].get("latex").is_none());

    let v = json(&[
        "summary",
        "--biases",
        "selection(general) + misclassification(exposure, rare_outcome)",
        "--format",
        "json",
    ]);
    let last = v["parameters"].as_array().unwrap().last().unwrap().clone();
    assert_eq!(last["bias"], "exposure misclassification");
    assert_eq!(last["output"], "OR_YA*|a,S");
    assert_eq!(last["argument"], "ORYAaS");

    let text = ok(&[
        "summary",
        "--biases",
        "misclassification(exposure, rare_outcome) + selection(general)",
    ]);
    assert!(text.contains("RR_UsY|A*=1"), "{text}");
    assert!(text.contains("RR_SUs|A*=0"), "{text}");
}

#[test]
fn summary_latex_column() {
    let out = ok(&[
        "summary",
        "--biases",
        "confounding",
        "--latex",
        "--format",
        "csv",
    ]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("bias,output,argument,latex"));
    assert!(lines
        .next()
        .unwrap()
        .starts_with("confounding,RR_AUc,RRAUc,"));
}

#[test]
fn grid_reproduces_hiv_variant() {
    let v = json(&[
        "grid",
        "--biases",
        HIV,
        "--vary",
        "RRAUc=1.25:3:0.25",
        "--vary",
        "RRUcY=1.25:3:0.25",
        "--param",
        "RRUsYA1=3",
        "--param",
        "RRSUsA1=2",
        "--format",
        "json",
    ]);
    let values = v["values"].as_array().unwrap();
    assert_eq!(values.len(), 8);
    near(&values[0][0], 1.5625, 1e-12);
    near(&values[4][4], 2.169643, 5e-7);
    near(&values[7][7], 2.7, 1e-12);
    assert_eq!(v["row_parameter"], "RRAUc");
    assert_eq!(v["columns"].as_array().unwrap().len(), 8);

    let text = ok(&[
        "grid",
        "--biases",
        HIV,
        "--vary",
        "RRAUc=1.25:3:0.25",
        "--vary",
        "RRUcY=1.25:3:0.25",
        "--param",
        "RRUsYA1=3",
        "--param",
        "RRSUsA1=2",
    ]);
    let first: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(first[..3], ["1.25", "1.5625", "1.607143"]);
}

#[test]
fn grid_accepts_value_lists() {
    let out = ok(&[
        "grid",
        "--biases",
        "confounding",
        "--vary",
        "RRAUc=1.3,2,10",
        "--vary",
        "RRUcY=1.3,2,10",
        "--format",
        "csv",
    ]);
    let rows: Vec<Vec<f64>> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!((rows[2][3] - 5.26).abs() < 5e-3);
    assert!((rows[0][1] - 1.06).abs() < 5e-3);
    assert!(out.starts_with("RRAUc\\RRUcY,1.3,2.0,10.0\n"));
}

#[test]
fn grid_needs_two_axes() {
    let o = run(&["grid", "--biases", "confounding", "--vary", "RRAUc=1,2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "grid",
        "--biases",
        "confounding",
        "--vary",
        "RRAUc=1,2",
        "--vary",
        "RRAUc=1,2",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

fn curve_rows(out: &str) -> Vec<(f64, String, f64)> {
    let mut reader = csv::Reader::from_reader(out.as_bytes());
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (
                r[0].parse().unwrap(),
                r[1].to_string(),
                r[2].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn curve_examples() {
    let list = format!("confounding, {THREE}; selection(general, increased_risk)");
    let out = ok(&[
        "curve",
        "--bias-sets",
        &list,
        "--rr-min",
        "1",
        "--rr-max",
        "7",
        "--points",
        "7",
    ]);
    let rows = curve_rows(&out);
    assert_eq!(rows.len(), 21);
    for (rr, set, e) in &rows {
        if *rr == 1.0 {
            assert_eq!(*e, 1.0, "{set}");
        }
        if set == "confounding" {
            let closed = rr + (rr * (rr - 1.0)).sqrt();
            assert!((e / closed - 1.0).abs() < 1e-12);
        }
    }
    let at4 = rows
        .iter()
        .find(|(rr, set, _)| *rr == 4.0 && set.contains("misclassification"))
        .unwrap();
    assert!((at4.2 - 1.888478).abs() < 1e-4);
    // labels with commas are quoted
    assert!(out.contains("\"selection(general, increased_risk)\""));
}

#[test]
fn curve_matches_library_bit_for_bit() {
    let out = ok(&[
        "curve",
        "--bias-sets",
        THREE,
        "--rr-min",
        "1.5",
        "--rr-max",
        "3",
        "--points",
        "4",
    ]);
    let set = BiasSet::new([
        BiasSpec::Confounding,
        Selection::general().into(),
        multibias::Misclassification::Outcome.into(),
    ])
    .unwrap();
    let poly = evalue_polynomial(&set);
    for (rr, _, e) in curve_rows(&out) {
        assert_eq!(e, poly.solve(rr).unwrap());
    }
}

#[test]
fn curve_rejects_bad_ranges() {
    for args in [
        ["--rr-min", "0.5", "--rr-max", "2"],
        ["--rr-min", "3", "--rr-max", "2"],
    ] {
        let mut a = vec!["curve", "--bias-sets", "confounding"];
        a.extend(args);
        assert_eq!(run(&a).status.code(), Some(2));
    }
}

#[test]
fn verify_result1_has_no_violations() {
    let v = json(&[
        "verify",
        "--structure",
        "result1",
        "--worlds",
        "1000",
        "--format",
        "json",
    ]);
    assert_eq!(v["worlds"], 1000);
    assert_eq!(v["violations"], 0);
    assert!(v["max_ratio_to_bound"].as_f64().unwrap() <= 1.0);
}

#[test]
fn verify_stream_is_deterministic() {
    let args = [
        "verify",
        "--structure",
        "result3",
        "--worlds",
        "25",
        "--seed",
        "42",
    ];
    let a = ok(&args);
    let b = ok(&args);
    assert_eq!(a, b);
    let lines: Vec<Value> = a
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 25);
    assert_eq!(lines[0]["seed"], 42);
    assert_eq!(lines[24]["seed"], 66);
    for l in &lines {
        for key in [
            "schema_version",
            "structure",
            "ratio",
            "bound",
            "slack",
            "prevalence",
        ] {
            assert!(l.get(key).is_some(), "missing {key}");
        }
        assert_eq!(l["holds"], true);
    }
}

#[test]
fn verify_with_no_worlds_prints_nothing() {
    let o = run(&["verify", "--worlds", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn verify_rare_outcome_preset_caps_prevalence() {
    let out = ok(&["verify", "--structure", "result2", "--worlds", "50"]);
    for line in out.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["prevalence"].as_f64().unwrap() <= 0.01);
        assert_eq!(v["approximate"], true);
    }
}

#[test]
fn verify_accepts_bias_lists_and_levels() {
    let v = json(&[
        "verify",
        "--structure",
        "confounding + selection(general, decreased_risk)",
        "--worlds",
        "50",
        "--confounder-levels",
        "3",
        "--selection-levels",
        "3",
        "--format",
        "json",
    ]);
    assert_eq!(v["violations"], 0);
    assert_eq!(
        v["structure"],
        "confounding + selection(general, decreased_risk)"
    );
}

#[test]
fn verify_rejects_bad_configs() {
    for args in [
        vec!["verify", "--confounder-levels", "5"],
        vec!["verify", "--rare-ceiling", "0"],
        vec!["verify", "--structure", "result4"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}
