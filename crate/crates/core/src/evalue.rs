//! Multi-bias E-values.
//!
//! Setting every sensitivity parameter to a common value `x` turns the bound
//! into `x^n / (2x - 1)^k`; the E-value is the `x` at which that reaches the
//! observed risk ratio (or the ratio of observed to hypothesised true value).

use serde::Serialize;

use crate::bias::BiasSet;
use crate::bound::{bound_expression, BoundTerm};
use crate::error::{Error, Result};
use crate::solve::solve_increasing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    RiskRatio,
    OddsRatio {
        rare_outcome: bool,
    },
    /// Accepted for a clear rejection; not convertible here.
    HazardRatio {
        rare_outcome: bool,
    },
}

impl Measure {
    pub fn label(&self) -> &'static str {
        match self {
            Measure::RiskRatio => "RR",
            Measure::OddsRatio { .. } => "OR",
            Measure::HazardRatio { .. } => "HR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectEstimate {
    pub measure: Measure,
    pub point: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl EffectEstimate {
    pub fn rr(point: f64) -> Self {
        Self::new(Measure::RiskRatio, point)
    }

    pub fn or(point: f64, rare_outcome: bool) -> Self {
        Self::new(Measure::OddsRatio { rare_outcome }, point)
    }

    pub fn hr(point: f64, rare_outcome: bool) -> Self {
        Self::new(Measure::HazardRatio { rare_outcome }, point)
    }

    pub fn new(measure: Measure, point: f64) -> Self {
        Self {
            measure,
            point,
            lo: None,
            hi: None,
        }
    }

    pub fn with_lo(mut self, lo: f64) -> Self {
        self.lo = Some(lo);
        self
    }

    pub fn with_hi(mut self, hi: f64) -> Self {
        self.hi = Some(hi);
        self
    }

    pub fn with_ci(self, lo: f64, hi: f64) -> Self {
        self.with_lo(lo).with_hi(hi)
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("point estimate", Some(self.point)),
            ("lower limit", self.lo),
            ("upper limit", self.hi),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidEstimate(format!(
                        "{what} must be a positive finite number, got {v}"
                    )));
                }
            }
        }
        if self.lo.is_some_and(|lo| lo > self.point) {
            return Err(Error::InvalidEstimate(
                "lower limit exceeds the point estimate".into(),
            ));
        }
        if self.hi.is_some_and(|hi| hi < self.point) {
            return Err(Error::InvalidEstimate(
                "upper limit is below the point estimate".into(),
            ));
        }
        Ok(())
    }

    /// Converts to the risk-ratio scale.
    ///
    /// Odds ratios for a rare outcome are read as risk ratios; otherwise the
    /// square root of the odds ratio is used.
    pub fn to_risk_ratio(&self) -> Result<EffectEstimate> {
        self.validate()?;
        let convert: fn(f64) -> f64 = match self.measure {
            Measure::RiskRatio | Measure::OddsRatio { rare_outcome: true } => |v| v,
            Measure::OddsRatio {
                rare_outcome: false,
            } => f64::sqrt,
            Measure::HazardRatio { .. } => return Err(Error::UnsupportedMeasure),
        };
        Ok(EffectEstimate {
            measure: Measure::RiskRatio,
            point: convert(self.point),
            lo: self.lo.map(convert),
            hi: self.hi.map(convert),
        })
    }
}

pub fn to_risk_ratio(est: &EffectEstimate) -> Result<EffectEstimate> {
    est.to_risk_ratio()
}

/// `f(x) = x^n / (2x - 1)^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct EValuePolynomial {
    n: u32,
    k: u32,
}

impl EValuePolynomial {
    /// Requires `n >= 1` and `n >= 2k`, which makes `f` strictly increasing on `[1, inf)`.
    pub fn new(n: u32, k: u32) -> Result<Self> {
        if n == 0 || n < 2 * k {
            return Err(Error::InvalidPolynomial { n, k });
        }
        Ok(Self { n, k })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.ln_eval(x).exp()
    }

    pub fn ln_eval(&self, x: f64) -> f64 {
        f64::from(self.n) * x.ln() - f64::from(self.k) * (2.0 * x - 1.0).ln()
    }

    /// Smallest `x >= 1` with `f(x) = target`.
    pub fn solve(&self, target: f64) -> Result<f64> {
        check_target(target)?;
        if target == 1.0 {
            return Ok(1.0);
        }
        match (self.n, self.k) {
            (n, 0) => Ok(target.powf(1.0 / f64::from(n))),
            (2, 1) => Ok(target + (target * (target - 1.0)).sqrt()),
            _ => self.solve_by_bisection(target),
        }
    }

    /// Same as [`solve`](Self::solve) but never uses a closed form.
    pub fn solve_by_bisection(&self, target: f64) -> Result<f64> {
        check_target(target)?;
        solve_increasing(|x| self.ln_eval(x), target.ln(), 1.0)
    }
}

fn check_target(target: f64) -> Result<()> {
    if target.is_finite() && target >= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(
            "E-value target",
            "a finite number >= 1",
            target,
        ))
    }
}

pub fn evalue_polynomial(bias_set: &BiasSet) -> EValuePolynomial {
    let expr = bound_expression(bias_set);
    let params = bias_set.parameters();
    let (n, k) = expr
        .terms()
        .iter()
        .fold((0, 0), |(n, k), term| match *term {
            BoundTerm::G(..) => (n + 2, k + 1),
            BoundTerm::Single(p) => (n + params[p].evalue_degree, k),
        });
    EValuePolynomial::new(n, k).expect("bias sets always yield n >= 2k >= 0, n >= 1")
}

pub fn solve_polynomial(poly: EValuePolynomial, target: f64) -> Result<f64> {
    poly.solve(target)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EValueResult {
    /// Estimate on the risk-ratio scale, in its original orientation.
    pub point: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub evalue_point: f64,
    pub evalue_lo: Option<f64>,
    pub evalue_hi: Option<f64>,
    pub true_value: f64,
    pub parameters: Vec<String>,
}

pub fn multi_evalue(
    bias_set: &BiasSet,
    est: &EffectEstimate,
    true_value: f64,
) -> Result<EValueResult> {
    if !(true_value.is_finite() && true_value > 0.0) {
        return Err(Error::domain(
            "true value",
            "a positive finite number",
            true_value,
        ));
    }
    let rr = est.to_risk_ratio()?;
    let poly = evalue_polynomial(bias_set);

    // Orient so the estimate is >= 1; the limit nearer the null is then the lower one.
    let protective = rr.point < 1.0;
    let (point, near, truth) = if protective {
        (1.0 / rr.point, rr.hi.map(|h| 1.0 / h), 1.0 / true_value)
    } else {
        (rr.point, rr.lo, true_value)
    };
    let solve = |v: f64| -> Result<f64> {
        let target = v / truth;
        if target <= 1.0 {
            Ok(1.0)
        } else {
            poly.solve(target)
        }
    };
    let evalue_point = solve(point)?;
    let evalue_near = near.map(solve).transpose()?;
    let (evalue_lo, evalue_hi) = if protective {
        (None, evalue_near)
    } else {
        (evalue_near, None)
    };

    Ok(EValueResult {
        point: rr.point,
        lo: rr.lo,
        hi: rr.hi,
        evalue_point,
        evalue_lo,
        evalue_hi,
        true_value,
        parameters: bias_set
            .parameter_names()
            .into_iter()
            .map(String::from)
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub rr: f64,
    pub bias_set: String,
    pub evalue: f64,
}

/// Point E-values for each bias set over a range of observed risk ratios.
pub fn evalue_curve(bias_sets: &[BiasSet], rr_values: &[f64]) -> Result<Vec<CurveRow>> {
    if let Some(&bad) = rr_values.iter().find(|&&v| !(v.is_finite() && v >= 1.0)) {
        return Err(Error::domain(
            "observed risk ratio",
            "a finite number >= 1",
            bad,
        ));
    }
    let mut rows = Vec::with_capacity(bias_sets.len() * rr_values.len());
    for set in bias_sets {
        let label = set.to_string();
        for &rr in rr_values {
            let res = multi_evalue(set, &EffectEstimate::rr(rr), 1.0)?;
            rows.push(CurveRow {
                rr,
                bias_set: label.clone(),
                evalue: res.evalue_point,
            });
        }
    }
    Ok(rows)
}
