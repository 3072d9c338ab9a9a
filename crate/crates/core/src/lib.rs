//! Sensitivity bounds and multi-bias E-values for risk ratios subject to any
//! combination of unmeasured confounding, selection bias, and differential
//! misclassification.
//!
//! ```
//! use multibias::{multi_bound, param_values, BiasSet, BiasSpec, Selection};
//!
//! let biases = BiasSet::new([
//!     BiasSpec::Confounding,
//!     Selection::general().increased_risk().into(),
//! ])
//! .unwrap();
//! let values = param_values([
//!     ("RRAUc", 2.3),
//!     ("RRUcY", 2.5),
//!     ("RRUsYA1", 3.0),
//!     ("RRSUsA1", 2.0),
//! ]);
//! let bound = multi_bound(&biases, &values).unwrap();
//! assert!((bound - 2.269737).abs() < 1e-6);
//! ```

pub mod bias;
pub mod bound;
pub mod error;
pub mod evalue;
pub mod oracle;
pub mod solve;

pub use bias::{
    build_bias_set, parameter_summary, BiasKind, BiasSet, BiasSpec, Misclassification, Parameter,
    RiskDirection, Role, Scale, Selection, SelectionPopulation, SummaryRow,
};
pub use bound::{
    adjust_estimate, bound_expression, g, grid_table, multi_bound, param_values, Adjusted,
    BoundExpression, BoundTerm, Grid, ParamValues,
};
pub use error::{Error, Result};
pub use evalue::{
    evalue_curve, evalue_polynomial, multi_evalue, solve_polynomial, to_risk_ratio, CurveRow,
    EValuePolynomial, EValueResult, EffectEstimate, Measure,
};
