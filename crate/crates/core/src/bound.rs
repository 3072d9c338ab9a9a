//! Multiplicative bounds on the composite bias.
//!
//! Each layer of bias contributes either a `g` term over a pair of
//! parameters or a single factor; the bound is their product.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bias::{BiasSet, Parameter, Role};
use crate::error::{Error, Result};

/// Parameter values keyed by argument name.
pub type ParamValues = BTreeMap<String, f64>;

/// Builds a [`ParamValues`] map from `(name, value)` pairs.
pub fn param_values<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> ParamValues {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Bounding factor for a pair of sensitivity parameters: `ab / (a + b - 1)`.
pub fn g(a: f64, b: f64) -> Result<f64> {
    check_ratio("first argument of g", a)?;
    check_ratio("second argument of g", b)?;
    Ok(g_unchecked(a, b))
}

#[inline]
pub(crate) fn g_unchecked(a: f64, b: f64) -> f64 {
    a * b / (a + b - 1.0)
}

fn check_ratio(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(what, "a finite number >= 1", v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundTerm {
    /// `g(p, q)` over two parameters, by index into the bias set's parameter list.
    G(usize, usize),
    /// A factor equal to one parameter's value.
    Single(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundExpression {
    terms: Vec<BoundTerm>,
    bias_set: BiasSet,
}

impl BoundExpression {
    pub fn terms(&self) -> &[BoundTerm] {
        &self.terms
    }

    pub fn bias_set(&self) -> &BiasSet {
        &self.bias_set
    }

    pub fn term_parameters(&self, term: BoundTerm) -> Vec<&Parameter> {
        let params = self.bias_set.parameters();
        match term {
            BoundTerm::G(p, q) => vec![&params[p], &params[q]],
            BoundTerm::Single(p) => vec![&params[p]],
        }
    }

    /// Evaluates at values in canonical parameter order.
    pub fn evaluate_ordered(&self, values: &[f64]) -> Result<f64> {
        let params = self.bias_set.parameters();
        if values.len() != params.len() {
            return Err(Error::MissingParameter(
                params
                    .get(values.len())
                    .map_or_else(|| "<extra value>".to_string(), |p| p.name.clone()),
            ));
        }
        for (p, &v) in params.iter().zip(values) {
            check_ratio(&p.name, v)?;
        }
        Ok(self
            .terms
            .iter()
            .map(|t| match *t {
                BoundTerm::G(p, q) => g_unchecked(values[p], values[q]),
                BoundTerm::Single(p) => values[p],
            })
            .product())
    }

    pub fn evaluate(&self, values: &ParamValues) -> Result<f64> {
        let ordered = ordered_values(&self.bias_set, values)?;
        self.evaluate_ordered(&ordered)
    }
}

/// Checks a value map against the bias set and returns values in canonical order.
pub fn ordered_values(bias_set: &BiasSet, values: &ParamValues) -> Result<Vec<f64>> {
    if let Some(unknown) = values.keys().find(|k| bias_set.parameter(k).is_none()) {
        return Err(Error::UnknownParameter(unknown.clone()));
    }
    bias_set
        .parameters()
        .iter()
        .map(|p| {
            values
                .get(&p.name)
                .copied()
                .ok_or_else(|| Error::MissingParameter(p.name.clone()))
        })
        .collect()
}

pub fn bound_expression(bias_set: &BiasSet) -> BoundExpression {
    let params = bias_set.parameters();
    let find = |role: Role| params.iter().position(|p| p.role == role);
    let mut terms = Vec::new();
    for (i, p) in params.iter().enumerate() {
        let term = match p.role {
            Role::ExposureConfounder => find(Role::ConfounderOutcome).map(|j| BoundTerm::G(i, j)),
            Role::ExposureJointFactor => find(Role::JointFactorOutcome).map(|j| BoundTerm::G(i, j)),
            Role::SelectionFactorOutcome(a) => {
                find(Role::SelectionFactor(a)).map(|j| BoundTerm::G(i, j))
            }
            Role::SelectionOutcome(_) | Role::Misclassification => Some(BoundTerm::Single(i)),
            // second member of a pair, already consumed
            Role::ConfounderOutcome | Role::JointFactorOutcome | Role::SelectionFactor(_) => None,
        };
        terms.extend(term);
    }
    BoundExpression {
        terms,
        bias_set: bias_set.clone(),
    }
}

/// Bounding factor for the declared biases at the given parameter values.
pub fn multi_bound(bias_set: &BiasSet, values: &ParamValues) -> Result<f64> {
    bound_expression(bias_set).evaluate(values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub row_parameter: String,
    pub column_parameter: String,
    pub rows: Vec<f64>,
    pub columns: Vec<f64>,
    pub fixed: ParamValues,
    /// `values[i][j]` is the bound at `rows[i]`, `columns[j]`.
    pub values: Vec<Vec<f64>>,
}

pub fn grid_table(
    bias_set: &BiasSet,
    row: (&str, &[f64]),
    column: (&str, &[f64]),
    fixed: &ParamValues,
) -> Result<Grid> {
    let (row_name, row_values) = row;
    let (col_name, col_values) = column;
    if row_name == col_name || fixed.contains_key(row_name) {
        return Err(Error::DuplicateParameter(row_name.to_string()));
    }
    if fixed.contains_key(col_name) {
        return Err(Error::DuplicateParameter(col_name.to_string()));
    }
    let expr = bound_expression(bias_set);
    let mut values = fixed.clone();
    values.insert(row_name.to_string(), 1.0);
    values.insert(col_name.to_string(), 1.0);
    let mut ordered = ordered_values(bias_set, &values)?;
    let params = bias_set.parameters();
    let ri = params.iter().position(|p| p.name == row_name).unwrap();
    let ci = params.iter().position(|p| p.name == col_name).unwrap();

    let mut table = Vec::with_capacity(row_values.len());
    for &r in row_values {
        let mut line = Vec::with_capacity(col_values.len());
        for &c in col_values {
            ordered[ri] = r;
            ordered[ci] = c;
            line.push(expr.evaluate_ordered(&ordered)?);
        }
        table.push(line);
    }
    Ok(Grid {
        row_parameter: row_name.to_string(),
        column_parameter: col_name.to_string(),
        rows: row_values.to_vec(),
        columns: col_values.to_vec(),
        fixed: fixed.clone(),
        values: table,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Adjusted {
    pub bound: f64,
    pub estimate: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

/// Shifts a risk-ratio estimate and its interval toward the null by the bound.
///
/// Estimates at or above 1 are divided by the bound, protective estimates are
/// multiplied; the whole interval follows the point estimate.
pub fn adjust_estimate(
    bias_set: &BiasSet,
    values: &ParamValues,
    estimate: f64,
    lo: Option<f64>,
    hi: Option<f64>,
) -> Result<Adjusted> {
    for (what, v) in [
        ("estimate", Some(estimate)),
        ("lower limit", lo),
        ("upper limit", hi),
    ] {
        if let Some(v) = v {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(what, "a positive finite number", v));
            }
        }
    }
    if lo.is_some_and(|l| l > estimate) || hi.is_some_and(|h| h < estimate) {
        return Err(Error::InvalidEstimate(
            "confidence limits must bracket the estimate".into(),
        ));
    }
    let bound = multi_bound(bias_set, values)?;
    let shift = |v: f64| {
        if estimate >= 1.0 {
            v / bound
        } else {
            v * bound
        }
    };
    Ok(Adjusted {
        bound,
        estimate: shift(estimate),
        lo: lo.map(shift),
        hi: hi.map(shift),
    })
}
