//! Text syntax for bias sets, e.g.
//! `confounding + selection(general, increased_risk) + misclassification(exposure, rare_outcome)`.

use std::fmt;

use multibias::{BiasSet, BiasSpec, Misclassification, Selection};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError(pub String);

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseError {}

fn fail<T>(msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError(msg.into()))
}

/// Splits on any of `seps` outside parentheses.
pub fn split_top_level<'a>(text: &'a str, seps: &[char]) -> Result<Vec<&'a str>, ParseError> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in text.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return fail(format!("unbalanced `)` in `{text}`"));
                }
            }
            c if depth == 0 && seps.contains(&c) => {
                parts.push(&text[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    if depth != 0 {
        return fail(format!("unbalanced `(` in `{text}`"));
    }
    parts.push(&text[start..]);
    Ok(parts)
}

fn clause(text: &str) -> Result<BiasSpec, ParseError> {
    let text = text.trim();
    let (name, opts) = match text.find('(') {
        Some(open) => {
            let Some(inner) = text[open + 1..].strip_suffix(')') else {
                return fail(format!("expected `)` at the end of `{text}`"));
            };
            if inner.contains(['(', ')']) {
                return fail(format!("nested parentheses in `{text}`"));
            }
            let opts: Vec<&str> = inner
                .split(',')
                .map(str::trim)
                .filter(|o| !o.is_empty())
                .collect();
            (text[..open].trim(), opts)
        }
        None => (text, Vec::new()),
    };
    for (i, o) in opts.iter().enumerate() {
        if opts[..i].contains(o) {
            return fail(format!("option `{o}` repeated in `{text}`"));
        }
    }
    match name {
        "confounding" => {
            if let Some(o) = opts.first() {
                return fail(format!("confounding takes no options, got `{o}`"));
            }
            Ok(BiasSpec::Confounding)
        }
        "selection" => selection(&opts).map(BiasSpec::from),
        "misclassification" => misclassification(&opts).map(BiasSpec::from),
        "" => fail("empty bias clause"),
        other => fail(format!(
            "unknown bias `{other}`; expected confounding, selection or misclassification"
        )),
    }
}

fn selection(opts: &[&str]) -> Result<Selection, ParseError> {
    let mut population = None;
    let mut direction: Option<&str> = None;
    let mut s_equals_u = false;
    for &o in opts {
        match o {
            "general" | "selected" => {
                if population.replace(o).is_some() {
                    return fail("selection takes only one of `general` or `selected`");
                }
            }
            "increased_risk" | "decreased_risk" => {
                if direction.replace(o).is_some() {
                    return fail(
                        "selection takes only one of `increased_risk` or `decreased_risk`",
                    );
                }
            }
            "s_equals_u" => s_equals_u = true,
            other => {
                return fail(format!(
                    "unknown selection option `{other}`; expected general, selected, \
                     increased_risk, decreased_risk or s_equals_u"
                ))
            }
        }
    }
    let mut sel = match population {
        Some("general") => Selection::general(),
        Some(_) => Selection::selected(),
        None => return fail("selection needs `general` or `selected`"),
    };
    match direction {
        Some("increased_risk") => sel = sel.increased_risk(),
        Some(_) => sel = sel.decreased_risk(),
        None => {}
    }
    if s_equals_u {
        sel = sel.s_equals_u();
    }
    Ok(sel)
}

fn misclassification(opts: &[&str]) -> Result<Misclassification, ParseError> {
    let mut target = None;
    let (mut rare_outcome, mut rare_exposure) = (false, false);
    for &o in opts {
        match o {
            "outcome" | "exposure" => {
                if target.replace(o).is_some() {
                    return fail("misclassification takes only one of `outcome` or `exposure`");
                }
            }
            "rare_outcome" => rare_outcome = true,
            "rare_exposure" => rare_exposure = true,
            other => {
                return fail(format!(
                    "unknown misclassification option `{other}`; expected outcome, exposure, \
                     rare_outcome or rare_exposure"
                ))
            }
        }
    }
    match target {
        Some("outcome") if rare_outcome || rare_exposure => {
            fail("rare_outcome and rare_exposure apply only to exposure misclassification")
        }
        Some("outcome") => Ok(Misclassification::Outcome),
        Some(_) => Ok(Misclassification::exposure(rare_outcome, rare_exposure)),
        None => fail("misclassification needs `outcome` or `exposure`"),
    }
}

/// Parses the clause list only; combination rules are checked by [`parse_bias_set`].
pub fn parse_specs(text: &str) -> Result<Vec<BiasSpec>, ParseError> {
    if text.trim().is_empty() {
        return fail("no biases given");
    }
    split_top_level(text, &['+'])?
        .into_iter()
        .map(clause)
        .collect()
}

#[derive(Debug)]
pub enum SpecError {
    Parse(ParseError),
    Invalid(multibias::Error),
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecError::Parse(e) => e.fmt(f),
            SpecError::Invalid(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for SpecError {}

pub fn parse_bias_set(text: &str) -> Result<BiasSet, SpecError> {
    let specs = parse_specs(text).map_err(SpecError::Parse)?;
    BiasSet::new(specs).map_err(SpecError::Invalid)
}
