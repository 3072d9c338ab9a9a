//! Declared biases and the sensitivity parameters they imply.
//!
//! A [`BiasSet`] is built from an ordered list of [`BiasSpec`]s. The order is
//! the order in which the biases arise: selection declared before
//! misclassification means measurement happens in the selected sample, so the
//! misclassification parameter is conditioned on `S = 1`; misclassification
//! declared first means selection acts on the mismeasured variable.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasKind {
    Confounding,
    Selection,
    Misclassification,
}

impl BiasKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BiasKind::Confounding => "confounding",
            BiasKind::Selection => "selection",
            BiasKind::Misclassification => "misclassification",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPopulation {
    /// Inference targets the whole population.
    #[default]
    General,
    /// Inference targets the selected (`S = 1`) population only.
    Selected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskDirection {
    /// The outcome is at least as likely in the selected part of both exposure groups.
    IncreasedRisk,
    /// The outcome is at most as likely in the selected part of both exposure groups.
    DecreasedRisk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Selection {
    pub population: SelectionPopulation,
    pub risk_direction: Option<RiskDirection>,
    /// Selection is directly on the selection factor (`S = U_s`).
    pub s_equals_u: bool,
}

impl Selection {
    pub fn general() -> Self {
        Self::default()
    }

    pub fn selected() -> Self {
        Self {
            population: SelectionPopulation::Selected,
            ..Self::default()
        }
    }

    pub fn increased_risk(mut self) -> Self {
        self.risk_direction = Some(RiskDirection::IncreasedRisk);
        self
    }

    pub fn decreased_risk(mut self) -> Self {
        self.risk_direction = Some(RiskDirection::DecreasedRisk);
        self
    }

    pub fn s_equals_u(mut self) -> Self {
        self.s_equals_u = true;
        self
    }

    /// Exposure arms (1 then 0) whose selection factor stays in the bound.
    pub fn retained_arms(&self) -> &'static [u8] {
        match self.risk_direction {
            None => &[1, 0],
            Some(RiskDirection::IncreasedRisk) => &[1],
            Some(RiskDirection::DecreasedRisk) => &[0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Misclassification {
    Outcome,
    Exposure {
        rare_outcome: bool,
        rare_exposure: bool,
    },
}

impl Misclassification {
    pub fn exposure(rare_outcome: bool, rare_exposure: bool) -> Self {
        Misclassification::Exposure {
            rare_outcome,
            rare_exposure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasSpec {
    Confounding,
    Selection(Selection),
    Misclassification(Misclassification),
}

impl BiasSpec {
    pub fn kind(&self) -> BiasKind {
        match self {
            BiasSpec::Confounding => BiasKind::Confounding,
            BiasSpec::Selection(_) => BiasKind::Selection,
            BiasSpec::Misclassification(_) => BiasKind::Misclassification,
        }
    }
}

impl From<Selection> for BiasSpec {
    fn from(s: Selection) -> Self {
        BiasSpec::Selection(s)
    }
}

impl From<Misclassification> for BiasSpec {
    fn from(m: Misclassification) -> Self {
        BiasSpec::Misclassification(m)
    }
}

/// Renders in the same clause syntax the command line accepts.
impl fmt::Display for BiasSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BiasSpec::Confounding => f.write_str("confounding"),
            BiasSpec::Selection(s) => {
                let mut opts = vec![match s.population {
                    SelectionPopulation::General => "general",
                    SelectionPopulation::Selected => "selected",
                }];
                match s.risk_direction {
                    Some(RiskDirection::IncreasedRisk) => opts.push("increased_risk"),
                    Some(RiskDirection::DecreasedRisk) => opts.push("decreased_risk"),
                    None => {}
                }
                if s.s_equals_u {
                    opts.push("s_equals_u");
                }
                write!(f, "selection({})", opts.join(", "))
            }
            BiasSpec::Misclassification(Misclassification::Outcome) => {
                f.write_str("misclassification(outcome)")
            }
            BiasSpec::Misclassification(Misclassification::Exposure {
                rare_outcome,
                rare_exposure,
            }) => {
                let mut opts = vec!["exposure"];
                if *rare_outcome {
                    opts.push("rare_outcome");
                }
                if *rare_exposure {
                    opts.push("rare_exposure");
                }
                write!(f, "misclassification({})", opts.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    RiskRatio,
    OddsRatio,
}

/// What a parameter measures; used to pair parameters into bound terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Exposure–confounder association, `RR_AUc`.
    ExposureConfounder,
    /// Confounder–outcome association, `RR_UcY`.
    ConfounderOutcome,
    /// Selection factor–outcome association within exposure arm `a`.
    SelectionFactorOutcome(u8),
    /// Selection–selection factor association within exposure arm `a`.
    SelectionFactor(u8),
    /// Selection–outcome association within arm `a` when `S = U_s`.
    SelectionOutcome(u8),
    /// Exposure–(U_s, U_c) association in the selected population.
    ExposureJointFactor,
    /// (U_s, U_c)–outcome association in the selected population.
    JointFactorOutcome,
    /// The single misclassification factor.
    Misclassification,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Parameter {
    /// Argument name, e.g. `RRAUc`.
    pub name: String,
    /// Bias the parameter belongs to, e.g. `confounding and selection`.
    pub bias: String,
    pub role: Role,
    pub scale: Scale,
    /// Plain-text symbol, e.g. `RR_UsY|A=1`.
    pub display_symbol: String,
    pub latex: String,
    /// Power of `x` this parameter contributes when every parameter equals `x`.
    pub evalue_degree: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiasSet {
    biases: Vec<BiasSpec>,
    parameters: Vec<Parameter>,
}

impl BiasSet {
    pub fn new<I, B>(specs: I) -> Result<Self>
    where
        I: IntoIterator<Item = B>,
        B: Into<BiasSpec>,
    {
        build_bias_set(specs.into_iter().map(Into::into).collect())
    }

    pub fn biases(&self) -> &[BiasSpec] {
        &self.biases
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn parameter(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn parameter_names(&self) -> Vec<&str> {
        self.parameters.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn has_confounding(&self) -> bool {
        self.biases.contains(&BiasSpec::Confounding)
    }

    pub fn selection(&self) -> Option<&Selection> {
        self.biases.iter().find_map(|b| match b {
            BiasSpec::Selection(s) => Some(s),
            _ => None,
        })
    }

    pub fn misclassification(&self) -> Option<&Misclassification> {
        self.biases.iter().find_map(|b| match b {
            BiasSpec::Misclassification(m) => Some(m),
            _ => None,
        })
    }

    pub fn targets_selected_population(&self) -> bool {
        self.selection()
            .is_some_and(|s| s.population == SelectionPopulation::Selected)
    }

    fn position(&self, kind: BiasKind) -> Option<usize> {
        self.biases.iter().position(|b| b.kind() == kind)
    }

    /// Selection acts on the mismeasured variable (misclassification declared first).
    pub fn selection_on_misclassified(&self) -> bool {
        if self.targets_selected_population() {
            return false;
        }
        match (
            self.position(BiasKind::Misclassification),
            self.position(BiasKind::Selection),
        ) {
            (Some(m), Some(s)) => m < s,
            _ => false,
        }
    }

    /// Misclassification parameters are defined within `S = 1`.
    pub fn misclassification_in_selected(&self) -> bool {
        self.selection().is_some() && !self.selection_on_misclassified()
    }

    /// Parameter table in canonical order.
    pub fn summary(&self, include_latex: bool) -> Vec<SummaryRow> {
        parameter_summary(self, include_latex)
    }
}

/// Clauses joined by ` + `, in declaration order.
impl fmt::Display for BiasSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.biases.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

pub fn build_bias_set(specs: Vec<BiasSpec>) -> Result<BiasSet> {
    if specs.is_empty() {
        return Err(Error::EmptyBiasSet);
    }
    for (i, spec) in specs.iter().enumerate() {
        if specs[..i].iter().any(|s| s.kind() == spec.kind()) {
            return Err(Error::DuplicateBias(spec.kind().as_str()));
        }
        match spec {
            BiasSpec::Misclassification(Misclassification::Exposure {
                rare_outcome: false,
                ..
            }) => return Err(Error::RareOutcomeRequired),
            BiasSpec::Selection(s) if s.population == SelectionPopulation::Selected => {
                match s.risk_direction {
                    Some(RiskDirection::IncreasedRisk) => {
                        return Err(Error::SelectedPopulationConflict("increased_risk"))
                    }
                    Some(RiskDirection::DecreasedRisk) => {
                        return Err(Error::SelectedPopulationConflict("decreased_risk"))
                    }
                    None => {}
                }
                if s.s_equals_u {
                    return Err(Error::SelectedPopulationConflict("s_equals_u"));
                }
            }
            _ => {}
        }
    }

    let mut set = BiasSet {
        biases: specs,
        parameters: Vec::new(),
    };
    set.parameters = derive_parameters(&set);
    Ok(set)
}

fn param(
    name: impl Into<String>,
    bias: &str,
    role: Role,
    scale: Scale,
    display_symbol: impl Into<String>,
    latex: impl Into<String>,
    evalue_degree: u32,
) -> Parameter {
    Parameter {
        name: name.into(),
        bias: bias.to_string(),
        role,
        scale,
        display_symbol: display_symbol.into(),
        latex: latex.into(),
        evalue_degree,
    }
}

fn derive_parameters(set: &BiasSet) -> Vec<Parameter> {
    let mut out = Vec::new();

    if set.targets_selected_population() {
        let label = if set.has_confounding() {
            "confounding and selection"
        } else {
            "selection"
        };
        out.push(param(
            "RRAUscS",
            label,
            Role::ExposureJointFactor,
            Scale::RiskRatio,
            "RR_AUsc|S",
            r"\text{RR}_{AU_{sc} \mid S = 1}",
            1,
        ));
        out.push(param(
            "RRUscYS",
            label,
            Role::JointFactorOutcome,
            Scale::RiskRatio,
            "RR_UscY|S",
            r"\text{RR}_{U_{sc}Y \mid S = 1}",
            1,
        ));
    } else {
        if set.has_confounding() {
            out.push(param(
                "RRAUc",
                "confounding",
                Role::ExposureConfounder,
                Scale::RiskRatio,
                "RR_AUc",
                r"\text{RR}_{AU_c}",
                1,
            ));
            out.push(param(
                "RRUcY",
                "confounding",
                Role::ConfounderOutcome,
                Scale::RiskRatio,
                "RR_UcY",
                r"\text{RR}_{U_cY}",
                1,
            ));
        }
        if let Some(sel) = set.selection() {
            out.extend(selection_parameters(set, sel));
        }
    }

    if let Some(m) = set.misclassification() {
        out.push(misclassification_parameter(
            m,
            set.misclassification_in_selected(),
        ));
    }
    out
}

fn selection_parameters(set: &BiasSet, sel: &Selection) -> Vec<Parameter> {
    // Which variable the selection layer sees depends on declaration order.
    let (y, y_tex, a, a_tex) = match (set.selection_on_misclassified(), set.misclassification()) {
        (true, Some(Misclassification::Outcome)) => ("Y*", "Y^*", "A", "A"),
        (true, Some(Misclassification::Exposure { .. })) => ("Y", "Y", "A*", "A^*"),
        _ => ("Y", "Y", "A", "A"),
    };
    let mut out = Vec::new();
    for &arm in sel.retained_arms() {
        if sel.s_equals_u {
            out.push(param(
                format!("RRSYA{arm}"),
                "selection",
                Role::SelectionOutcome(arm),
                Scale::RiskRatio,
                format!("RR_S{y}|{a}={arm}"),
                format!(r"\text{{RR}}_{{S{y_tex} \mid {a_tex} = {arm}}}"),
                1,
            ));
        } else {
            out.push(param(
                format!("RRUsYA{arm}"),
                "selection",
                Role::SelectionFactorOutcome(arm),
                Scale::RiskRatio,
                format!("RR_Us{y}|{a}={arm}"),
                format!(r"\text{{RR}}_{{U_s{y_tex} \mid {a_tex} = {arm}}}"),
                1,
            ));
            out.push(param(
                format!("RRSUsA{arm}"),
                "selection",
                Role::SelectionFactor(arm),
                Scale::RiskRatio,
                format!("RR_SUs|{a}={arm}"),
                format!(r"\text{{RR}}_{{SU_s \mid {a_tex} = {arm}}}"),
                1,
            ));
        }
    }
    out
}

fn misclassification_parameter(m: &Misclassification, in_selected: bool) -> Parameter {
    let (suffix, ctx, ctx_tex) = if in_selected {
        ("S", ",S", ", S = 1")
    } else {
        ("", "", "")
    };
    match *m {
        Misclassification::Outcome => param(
            format!("RRAYy{suffix}"),
            "outcome misclassification",
            Role::Misclassification,
            Scale::RiskRatio,
            format!("RR_AY*|y{ctx}"),
            format!(r"\text{{RR}}_{{AY^* \mid y{ctx_tex}}}"),
            1,
        ),
        Misclassification::Exposure {
            rare_exposure: true,
            ..
        } => param(
            format!("RRYAa{suffix}"),
            "exposure misclassification",
            Role::Misclassification,
            Scale::RiskRatio,
            format!("RR_YA*|a{ctx}"),
            format!(r"\text{{RR}}_{{YA^* \mid a{ctx_tex}}}"),
            1,
        ),
        // Odds-ratio parameter; its square root approximates a risk ratio.
        Misclassification::Exposure { .. } => param(
            format!("ORYAa{suffix}"),
            "exposure misclassification",
            Role::Misclassification,
            Scale::OddsRatio,
            format!("OR_YA*|a{ctx}"),
            format!(r"\text{{OR}}_{{YA^* \mid a{ctx_tex}}}"),
            2,
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummaryRow {
    pub bias: String,
    pub output: String,
    pub argument: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latex: Option<String>,
}

pub fn parameter_summary(bias_set: &BiasSet, include_latex: bool) -> Vec<SummaryRow> {
    bias_set
        .parameters()
        .iter()
        .map(|p| SummaryRow {
            bias: p.bias.clone(),
            output: p.display_symbol.clone(),
            argument: p.name.clone(),
            latex: include_latex.then(|| p.latex.clone()),
        })
        .collect()
}
