//! Brute-force verification on small exact joint distributions.
//!
//! A [`World`] is a fully enumerated distribution over
//! `(U_c, U_s, A, Y, S, M)` built from conditional probability tables that
//! satisfy the independences a [`BiasSet`] assumes:
//!
//! * `A` depends on `U_c` only, so `Y_a` is independent of `A` given `U_c`;
//! * `Y` depends on `(A, U_c, U_s)`;
//! * `S` depends on the exposure seen by the selection layer (`A`, or `A*`
//!   when selection follows exposure misclassification) and `U_s`, plus
//!   `U_c` when inference targets the selected population;
//! * `M` is the misclassified variable (`Y*` or `A*`), drawn from
//!   `(A, Y, S)`, without `S` when misclassification precedes selection.
//!
//! Biases that are not declared are switched off: `S = 1` always, `M = Y`,
//! or `A` independent of the unmeasured factors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::Serialize;

use crate::bias::{BiasSet, Misclassification, RiskDirection, Role, SelectionPopulation};
use crate::bound::{multi_bound, ParamValues};
use crate::error::{Error, Result};

/// Conditioning events lighter than this are treated as degenerate.
pub const DEGENERATE_MASS: f64 = 1e-9;

/// Relative slack allowed when checking an exact bound.
pub const BOUND_SLACK: f64 = 1e-12;

const MAX_ATTEMPTS: usize = 10_000;
const MIN_PROB: f64 = 0.01;
const MAX_PROB: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub bias_set: BiasSet,
    pub confounder_levels: usize,
    pub selection_factor_levels: usize,
    /// Upper limit on `P(Y = 1 | A, U_c, U_s)`.
    pub rare_outcome_ceiling: Option<f64>,
    /// Upper limit on `P(A* = 1 | A, Y, S)`, used with rare-exposure bias sets.
    pub rare_exposure_ceiling: Option<f64>,
}

impl WorldConfig {
    pub fn new(bias_set: BiasSet) -> Self {
        Self {
            bias_set,
            confounder_levels: 2,
            selection_factor_levels: 2,
            rare_outcome_ceiling: None,
            rare_exposure_ceiling: None,
        }
    }

    pub fn levels(mut self, confounder: usize, selection_factor: usize) -> Self {
        self.confounder_levels = confounder;
        self.selection_factor_levels = selection_factor;
        self
    }

    pub fn rare_outcome(mut self, ceiling: f64) -> Self {
        self.rare_outcome_ceiling = Some(ceiling);
        self
    }

    pub fn rare_exposure(mut self, ceiling: f64) -> Self {
        self.rare_exposure_ceiling = Some(ceiling);
        self
    }

    fn validate(&self) -> Result<()> {
        for (what, n) in [
            ("confounder levels", self.confounder_levels),
            ("selection factor levels", self.selection_factor_levels),
        ] {
            if !(2..=3).contains(&n) {
                return Err(Error::InfeasibleConfig(format!(
                    "{what} must be 2 or 3, got {n}"
                )));
            }
        }
        if self.bias_set.selection().is_some_and(|s| s.s_equals_u)
            && self.selection_factor_levels != 2
        {
            return Err(Error::InfeasibleConfig(
                "selection on the selection factor needs a binary factor".into(),
            ));
        }
        for (what, c) in [
            ("rare outcome ceiling", self.rare_outcome_ceiling),
            ("rare exposure ceiling", self.rare_exposure_ceiling),
        ] {
            if let Some(c) = c {
                if !(c > 0.0 && c <= 1.0) {
                    return Err(Error::InfeasibleConfig(format!(
                        "{what} must lie in (0, 1], got {c}"
                    )));
                }
                if c * MIN_PROB < DEGENERATE_MASS * 1e3 {
                    return Err(Error::InfeasibleConfig(format!(
                        "{what} {c} leaves no room for positive strata"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Conditional probability tables of a world.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Factors {
    pub confounder_levels: usize,
    pub selection_factor_levels: usize,
    /// `P(U_c = i, U_s = j)` at `i * selection_factor_levels + j`.
    pub unmeasured: Vec<f64>,
    /// `P(A = 1 | U_c = i)`.
    pub exposure: Vec<f64>,
    /// `P(Y = 1 | A = a, U_c = i, U_s = j)` at `(a * nc + i) * ns + j`.
    pub outcome: Vec<f64>,
    /// `P(S = 1 | X = x, U_c = i, U_s = j)` at `(x * nc + i) * ns + j`, where
    /// `X` is the exposure seen by the selection layer.
    pub selection: Vec<f64>,
    /// `P(M = 1 | A = a, Y = y, S = s)`.
    pub measurement: [[[f64; 2]; 2]; 2],
}

impl Factors {
    fn u(&self, i: usize, j: usize) -> f64 {
        self.unmeasured[i * self.selection_factor_levels + j]
    }

    fn idx(&self, x: usize, i: usize, j: usize) -> usize {
        (x * self.confounder_levels + i) * self.selection_factor_levels + j
    }

    pub fn outcome_risk(&self, a: usize, i: usize, j: usize) -> f64 {
        self.outcome[self.idx(a, i, j)]
    }

    pub fn selection_prob(&self, x: usize, i: usize, j: usize) -> f64 {
        self.selection[self.idx(x, i, j)]
    }
}

/// One cell of the joint table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub uc: usize,
    pub us: usize,
    pub a: u8,
    pub y: u8,
    pub s: u8,
    pub m: u8,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    bias_set: BiasSet,
    factors: Factors,
    cells: Vec<Cell>,
}

fn bern(p: f64, v: u8) -> f64 {
    if v == 1 {
        p
    } else {
        1.0 - p
    }
}

impl World {
    /// Validates the tables against the bias set's structure and enumerates the joint.
    pub fn new(bias_set: BiasSet, factors: Factors) -> Result<Self> {
        check_structure(&bias_set, &factors)?;
        let selection_on_a_star = selection_reads_misclassified_exposure(&bias_set);
        let f = &factors;
        let (nc, ns) = (f.confounder_levels, f.selection_factor_levels);
        let mut cells = Vec::with_capacity(nc * ns * 16);
        for uc in 0..nc {
            for us in 0..ns {
                let pu = f.u(uc, us);
                for a in 0..2u8 {
                    let pa = bern(f.exposure[uc], a);
                    for y in 0..2u8 {
                        let py = bern(f.outcome_risk(a as usize, uc, us), y);
                        for s in 0..2u8 {
                            for m in 0..2u8 {
                                let pm = bern(f.measurement[a as usize][y as usize][s as usize], m);
                                let x = if selection_on_a_star { m } else { a };
                                let ps = bern(f.selection_prob(x as usize, uc, us), s);
                                cells.push(Cell {
                                    uc,
                                    us,
                                    a,
                                    y,
                                    s,
                                    m,
                                    p: pu * pa * py * ps * pm,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            bias_set,
            factors,
            cells,
        })
    }

    pub fn bias_set(&self) -> &BiasSet {
        &self.bias_set
    }

    pub fn factors(&self) -> &Factors {
        &self.factors
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn mass(&self, event: impl Fn(&Cell) -> bool) -> f64 {
        self.cells.iter().filter(|c| event(c)).map(|c| c.p).sum()
    }

    /// `P(event | given)`.
    pub fn prob(
        &self,
        event: impl Fn(&Cell) -> bool,
        given: impl Fn(&Cell) -> bool,
        label: &str,
    ) -> Result<f64> {
        let denom = self.mass(&given);
        if denom < DEGENERATE_MASS {
            return Err(Error::DegenerateStratum(label.to_string()));
        }
        Ok(self.mass(|c| given(c) && event(c)) / denom)
    }

    /// Exposure as recorded in the data.
    pub fn observed_exposure(&self, c: &Cell) -> u8 {
        match self.bias_set.misclassification() {
            Some(Misclassification::Exposure { .. }) => c.m,
            _ => c.a,
        }
    }

    /// Outcome as recorded in the data.
    pub fn observed_outcome(&self, c: &Cell) -> u8 {
        match self.bias_set.misclassification() {
            Some(Misclassification::Outcome) => c.m,
            _ => c.y,
        }
    }

    fn selection_exposure(&self, c: &Cell) -> u8 {
        if selection_reads_misclassified_exposure(&self.bias_set) {
            c.m
        } else {
            c.a
        }
    }

    fn selection_outcome(&self, c: &Cell) -> u8 {
        if self.bias_set.selection_on_misclassified()
            && self.bias_set.misclassification() == Some(&Misclassification::Outcome)
        {
            c.m
        } else {
            c.y
        }
    }

    /// Largest outcome risk over all strata of `(A, U_c, U_s)`.
    pub fn max_outcome_risk(&self) -> f64 {
        self.factors.outcome.iter().copied().fold(0.0, f64::max)
    }

    fn unmeasured_levels(&self) -> Vec<(usize, usize)> {
        let (nc, ns) = (
            self.factors.confounder_levels,
            self.factors.selection_factor_levels,
        );
        (0..nc).flat_map(|i| (0..ns).map(move |j| (i, j))).collect()
    }
}

fn selection_reads_misclassified_exposure(set: &BiasSet) -> bool {
    set.selection_on_misclassified()
        && matches!(
            set.misclassification(),
            Some(Misclassification::Exposure { .. })
        )
}

fn check_structure(set: &BiasSet, f: &Factors) -> Result<()> {
    let (nc, ns) = (f.confounder_levels, f.selection_factor_levels);
    let mismatch = |msg: &str| Err(Error::StructureMismatch(msg.to_string()));
    if nc == 0 || ns == 0 {
        return mismatch("unmeasured factors need at least one level");
    }
    if f.unmeasured.len() != nc * ns
        || f.exposure.len() != nc
        || f.outcome.len() != 2 * nc * ns
        || f.selection.len() != 2 * nc * ns
    {
        return mismatch("table sizes do not match factor levels");
    }
    let all = f
        .unmeasured
        .iter()
        .chain(&f.exposure)
        .chain(&f.outcome)
        .chain(&f.selection)
        .chain(f.measurement.iter().flatten().flatten());
    for &p in all {
        if !(0.0..=1.0).contains(&p) {
            return mismatch("probabilities must lie in [0, 1]");
        }
    }
    if (f.unmeasured.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return mismatch("joint of the unmeasured factors must sum to 1");
    }
    if f.exposure.iter().any(|&p| p <= 0.0 || p >= 1.0) {
        return Err(Error::InfeasibleConfig(
            "exposure probabilities must lie strictly in (0, 1)".into(),
        ));
    }
    if !set.has_confounding() && f.exposure.iter().any(|&p| p != f.exposure[0]) {
        return mismatch("exposure depends on U_c but confounding is not declared");
    }
    match set.selection() {
        None => {
            if f.selection.iter().any(|&p| p != 1.0) {
                return mismatch("selection probabilities must be 1 without selection bias");
            }
        }
        Some(sel) if sel.s_equals_u => {
            for x in 0..2 {
                for i in 0..nc {
                    for j in 0..ns {
                        if ns != 2 || f.selection_prob(x, i, j) != j as f64 {
                            return mismatch("S = U_s requires S to equal a binary U_s");
                        }
                    }
                }
            }
        }
        Some(sel) if sel.population == SelectionPopulation::General => {
            for x in 0..2 {
                for j in 0..ns {
                    if (0..nc).any(|i| f.selection_prob(x, i, j) != f.selection_prob(x, 0, j)) {
                        return mismatch("selection depends on U_c in the general population");
                    }
                }
            }
        }
        Some(_) => {}
    }
    match set.misclassification() {
        None => {
            for a in 0..2 {
                for y in 0..2 {
                    for s in 0..2 {
                        if f.measurement[a][y][s] != y as f64 {
                            return mismatch(
                                "measured variable must equal Y without misclassification",
                            );
                        }
                    }
                }
            }
        }
        Some(_) if set.selection_on_misclassified() => {
            for a in 0..2 {
                for y in 0..2 {
                    if f.measurement[a][y][0] != f.measurement[a][y][1] {
                        return mismatch(
                            "misclassification preceding selection cannot depend on S",
                        );
                    }
                }
            }
        }
        Some(_) => {}
    }
    Ok(())
}

fn max_ratio(values: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    values
        .into_iter()
        .map(|(num, den)| num / den)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// Exact sensitivity parameters of a world, keyed like the bias set's arguments.
pub fn extract_parameters(world: &World, bias_set: &BiasSet) -> Result<ParamValues> {
    if world.bias_set.biases() != bias_set.biases() {
        return Err(Error::StructureMismatch(format!(
            "world built for `{}`, asked for `{}`",
            world.bias_set, bias_set
        )));
    }
    let w = world;
    let nc = w.factors.confounder_levels;
    let ns = w.factors.selection_factor_levels;
    let in_sel = bias_set.misclassification_in_selected();
    let mut out = ParamValues::new();

    for p in bias_set.parameters() {
        let value = match p.role {
            Role::ExposureConfounder => {
                let mut pairs = Vec::new();
                for i in 0..nc {
                    let p1 = w.prob(|c| c.uc == i, |c| c.a == 1, "A = 1")?;
                    let p0 = w.prob(|c| c.uc == i, |c| c.a == 0, "A = 0")?;
                    pairs.push((p1, p0));
                }
                max_ratio(pairs)
            }
            Role::ConfounderOutcome => {
                let mut best = f64::NEG_INFINITY;
                for a in 0..2u8 {
                    let risks = (0..nc)
                        .map(|i| w.prob(|c| c.y == 1, |c| c.a == a && c.uc == i, "A, U_c"))
                        .collect::<Result<Vec<_>>>()?;
                    best = best.max(spread(&risks));
                }
                best
            }
            Role::SelectionFactorOutcome(a) => {
                let risks = (0..ns)
                    .map(|j| {
                        w.prob(
                            |c| w.selection_outcome(c) == 1,
                            |c| w.selection_exposure(c) == a && c.us == j,
                            "A, U_s",
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                spread(&risks)
            }
            Role::SelectionFactor(a) => {
                // arm 1: selected over unselected; arm 0: unselected over selected
                let (num_s, den_s) = if a == 1 { (1, 0) } else { (0, 1) };
                let mut pairs = Vec::new();
                for j in 0..ns {
                    let num = w.prob(
                        |c| c.us == j,
                        |c| w.selection_exposure(c) == a && c.s == num_s,
                        "A, S",
                    )?;
                    let den = w.prob(
                        |c| c.us == j,
                        |c| w.selection_exposure(c) == a && c.s == den_s,
                        "A, S",
                    )?;
                    pairs.push((num, den));
                }
                max_ratio(pairs)
            }
            Role::SelectionOutcome(a) => {
                let risk = |s: u8| {
                    w.prob(
                        |c| w.selection_outcome(c) == 1,
                        |c| w.selection_exposure(c) == a && c.s == s,
                        "A, S",
                    )
                };
                let (r1, r0) = (risk(1)?, risk(0)?);
                if a == 1 {
                    r1 / r0
                } else {
                    r0 / r1
                }
            }
            Role::ExposureJointFactor => {
                let mut pairs = Vec::new();
                for (i, j) in w.unmeasured_levels() {
                    let p1 = w.prob(
                        |c| c.uc == i && c.us == j,
                        |c| c.a == 1 && c.s == 1,
                        "A = 1, S = 1",
                    )?;
                    let p0 = w.prob(
                        |c| c.uc == i && c.us == j,
                        |c| c.a == 0 && c.s == 1,
                        "A = 0, S = 1",
                    )?;
                    pairs.push((p1, p0));
                }
                max_ratio(pairs)
            }
            Role::JointFactorOutcome => {
                let mut best = f64::NEG_INFINITY;
                for a in 0..2u8 {
                    let risks = w
                        .unmeasured_levels()
                        .into_iter()
                        .map(|(i, j)| {
                            w.prob(
                                |c| c.y == 1,
                                |c| c.a == a && c.s == 1 && c.uc == i && c.us == j,
                                "A, S = 1, U_sc",
                            )
                        })
                        .collect::<Result<Vec<_>>>()?;
                    best = best.max(spread(&risks));
                }
                best
            }
            Role::Misclassification => {
                // P(M = 1 | Y = y, A = a[, S = 1])
                let rate = |y: u8, a: u8| {
                    w.prob(
                        |c| c.m == 1,
                        |c| c.y == y && c.a == a && (!in_sel || c.s == 1),
                        "Y, A",
                    )
                };
                match bias_set.misclassification() {
                    Some(Misclassification::Outcome) => {
                        let mut pairs = Vec::new();
                        for y in 0..2 {
                            pairs.push((rate(y, 1)?, rate(y, 0)?));
                        }
                        max_ratio(pairs)
                    }
                    Some(Misclassification::Exposure {
                        rare_exposure: true,
                        ..
                    }) => {
                        let mut pairs = Vec::new();
                        for a in 0..2 {
                            pairs.push((rate(1, a)?, rate(0, a)?));
                        }
                        max_ratio(pairs)
                    }
                    _ => {
                        let (s1, s0) = (rate(1, 1)?, rate(0, 1)?);
                        let (f1, f0) = (rate(1, 0)?, rate(0, 0)?);
                        exposure_misclassification_or(s1, s0, f1, f0)
                    }
                }
            }
        };
        out.insert(p.name.clone(), value.max(1.0));
    }
    Ok(out)
}

/// Largest of the four odds-ratio contrasts between sensitivities `s1, s0`
/// (true exposure 1) and false-positive rates `f1, f0` (true exposure 0),
/// indexed by outcome.
pub fn exposure_misclassification_or(s1: f64, s0: f64, f1: f64, f0: f64) -> f64 {
    let odds = |p: f64| p / (1.0 - p);
    [
        odds(s1) / odds(s0),
        odds(f1) / odds(f0),
        (f1 / f0) / ((1.0 - s1) / (1.0 - s0)),
        (s1 / s0) / ((1.0 - f1) / (1.0 - f0)),
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskRatios {
    /// Ratio in the data: selected, possibly misclassified.
    pub observed: f64,
    /// Causal risk ratio in the whole population.
    pub truth: f64,
    /// Causal risk ratio within `S = 1`; absent when selection depends on a
    /// variable downstream of the outcome.
    pub truth_selected: Option<f64>,
}

pub fn observed_and_true_rr(world: &World, bias_set: &BiasSet) -> Result<RiskRatios> {
    if world.bias_set.biases() != bias_set.biases() {
        return Err(Error::StructureMismatch(format!(
            "world built for `{}`, asked for `{}`",
            world.bias_set, bias_set
        )));
    }
    let w = world;
    let risk = |x: u8| {
        w.prob(
            |c| w.observed_outcome(c) == 1,
            |c| w.observed_exposure(c) == x && c.s == 1,
            "observed exposure, S = 1",
        )
    };
    let observed = risk(1)? / risk(0)?;

    let f = &w.factors;
    let levels = w.unmeasured_levels();
    let standardized = |weights: &dyn Fn(usize, usize) -> f64| {
        let r1: f64 = levels
            .iter()
            .map(|&(i, j)| weights(i, j) * f.outcome_risk(1, i, j))
            .sum();
        let r0: f64 = levels
            .iter()
            .map(|&(i, j)| weights(i, j) * f.outcome_risk(0, i, j))
            .sum();
        r1 / r0
    };
    let truth = standardized(&|i, j| f.u(i, j));

    let truth_selected = if selection_reads_misclassified_exposure(&w.bias_set) {
        None
    } else {
        let selected = w.mass(|c| c.s == 1);
        if selected < DEGENERATE_MASS {
            return Err(Error::DegenerateStratum("S = 1".into()));
        }
        let weights: Vec<f64> = levels
            .iter()
            .map(|&(i, j)| w.mass(|c| c.s == 1 && c.uc == i && c.us == j) / selected)
            .collect();
        let ns = f.selection_factor_levels;
        Some(standardized(&|i, j| weights[i * ns + j]))
    };
    Ok(RiskRatios {
        observed,
        truth,
        truth_selected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub structure: String,
    /// Observed risk ratio over the targeted causal risk ratio.
    pub ratio: f64,
    pub bound: f64,
    /// `bound - ratio`; negative when the bound is exceeded.
    pub slack: f64,
    /// `max(0, ratio - bound)`.
    pub violation: f64,
    pub holds: bool,
    /// The bound only holds approximately (exposure misclassification).
    pub approximate: bool,
    /// Largest stratum-specific outcome risk.
    pub prevalence: f64,
    pub parameters: ParamValues,
}

pub fn verify_bound(world: &World, bias_set: &BiasSet) -> Result<BoundReport> {
    let params = extract_parameters(world, bias_set)?;
    let rrs = observed_and_true_rr(world, bias_set)?;
    let target = if bias_set.targets_selected_population() {
        rrs.truth_selected.ok_or_else(|| {
            Error::StructureMismatch("selected-population target unavailable".into())
        })?
    } else {
        rrs.truth
    };
    let ratio = rrs.observed / target;
    let bound = multi_bound(bias_set, &params)?;
    Ok(BoundReport {
        structure: bias_set.to_string(),
        ratio,
        bound,
        slack: bound - ratio,
        violation: (ratio - bound).max(0.0),
        holds: ratio <= bound * (1.0 + BOUND_SLACK),
        approximate: matches!(
            bias_set.misclassification(),
            Some(Misclassification::Exposure { .. })
        ),
        prevalence: world.max_outcome_risk(),
        parameters: params,
    })
}

struct Sampler {
    rng: ChaCha8Rng,
    beta: Beta<f64>,
    gamma: Gamma<f64>,
}

impl Sampler {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            // U-shaped so near-extreme tables are common
            beta: Beta::new(0.5, 0.5).expect("valid beta"),
            gamma: Gamma::new(0.5, 1.0).expect("valid gamma"),
        }
    }

    fn prob(&mut self) -> f64 {
        self.beta.sample(&mut self.rng).clamp(MIN_PROB, MAX_PROB)
    }

    fn capped(&mut self, ceiling: Option<f64>) -> f64 {
        let p = self.prob();
        ceiling.map_or(p, |c| c * p)
    }

    fn simplex(&mut self, n: usize) -> Vec<f64> {
        let floor = MIN_PROB / n as f64;
        let raw: Vec<f64> = (0..n)
            .map(|_| self.gamma.sample(&mut self.rng) + floor)
            .collect();
        let total: f64 = raw.iter().sum();
        let mut out: Vec<f64> = raw.iter().map(|v| v / total).collect();
        // exact normalization
        let rest: f64 = out[1..].iter().sum();
        out[0] = 1.0 - rest;
        out
    }
}

fn draw_factors(config: &WorldConfig, sampler: &mut Sampler) -> Factors {
    let set = &config.bias_set;
    let (nc, ns) = (config.confounder_levels, config.selection_factor_levels);

    let unmeasured = sampler.simplex(nc * ns);

    let exposure = if set.has_confounding() {
        (0..nc).map(|_| sampler.prob()).collect()
    } else {
        vec![sampler.prob(); nc]
    };

    let outcome = (0..2 * nc * ns)
        .map(|_| sampler.capped(config.rare_outcome_ceiling))
        .collect();

    let mut selection = vec![1.0; 2 * nc * ns];
    if let Some(sel) = set.selection() {
        for x in 0..2 {
            for j in 0..ns {
                let shared = sampler.prob();
                for i in 0..nc {
                    let idx = (x * nc + i) * ns + j;
                    selection[idx] = if sel.s_equals_u {
                        j as f64
                    } else if sel.population == SelectionPopulation::Selected {
                        sampler.prob()
                    } else {
                        shared
                    };
                }
            }
        }
    }

    let mut measurement = [[[0.0; 2]; 2]; 2];
    for by_y in measurement.iter_mut() {
        for (y, by_s) in by_y.iter_mut().enumerate() {
            match set.misclassification() {
                None => *by_s = [y as f64; 2],
                Some(m) => {
                    let ceiling = match m {
                        Misclassification::Exposure {
                            rare_exposure: true,
                            ..
                        } => config.rare_exposure_ceiling,
                        _ => None,
                    };
                    let first = sampler.capped(ceiling);
                    let second = if set.selection_on_misclassified() {
                        first
                    } else {
                        sampler.capped(ceiling)
                    };
                    *by_s = [first, second];
                }
            }
        }
    }

    Factors {
        confounder_levels: nc,
        selection_factor_levels: ns,
        unmeasured,
        exposure,
        outcome,
        selection,
        measurement,
    }
}

/// Assumptions a world must satisfy beyond its factorization.
fn satisfies_assumptions(world: &World) -> Result<bool> {
    let set = world.bias_set();
    if let Some(dir) = set.selection().and_then(|s| s.risk_direction) {
        for a in 0..2u8 {
            let risk = |s: u8| {
                world.prob(
                    |c| world.selection_outcome(c) == 1,
                    |c| world.selection_exposure(c) == a && c.s == s,
                    "A, S",
                )
            };
            let (r1, r0) = (risk(1)?, risk(0)?);
            let ok = match dir {
                RiskDirection::IncreasedRisk => r1 >= r0,
                RiskDirection::DecreasedRisk => r1 <= r0,
            };
            if !ok {
                return Ok(false);
            }
        }
    }
    if set.misclassification().is_some() {
        // The misclassification step needs a non-negative true association
        // in the layer it is applied to.
        let in_sel = set.misclassification_in_selected();
        let risk = |a: u8| world.prob(|c| c.y == 1, |c| c.a == a && (!in_sel || c.s == 1), "A");
        if risk(1)? < risk(0)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Draws a random world satisfying the bias set's assumptions; deterministic per seed.
pub fn generate_world(config: &WorldConfig, seed: u64) -> Result<World> {
    config.validate()?;
    let mut sampler = Sampler::new(seed);
    for _ in 0..MAX_ATTEMPTS {
        let factors = draw_factors(config, &mut sampler);
        let world = World::new(config.bias_set.clone(), factors)?;
        let usable = satisfies_assumptions(&world).and_then(|ok| {
            if ok {
                extract_parameters(&world, &config.bias_set)?;
                observed_and_true_rr(&world, &config.bias_set)?;
            }
            Ok(ok)
        });
        match usable {
            Ok(true) => return Ok(world),
            Ok(false) | Err(Error::DegenerateStratum(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::InfeasibleConfig(format!(
        "no admissible world for `{}` after {MAX_ATTEMPTS} draws",
        config.bias_set
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeededReport {
    pub seed: u64,
    #[serde(flatten)]
    pub report: BoundReport,
}

/// Verifies `count` worlds with seeds `first_seed, first_seed + 1, ...`.
pub fn verify_worlds(
    config: &WorldConfig,
    first_seed: u64,
    count: usize,
) -> Result<Vec<SeededReport>> {
    (0..count as u64)
        .map(|i| {
            let seed = first_seed.wrapping_add(i);
            let world = generate_world(config, seed)?;
            Ok(SeededReport {
                seed,
                report: verify_bound(&world, &config.bias_set)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bias::{BiasSpec, Selection};

    fn conf() -> BiasSet {
        BiasSet::new([BiasSpec::Confounding]).unwrap()
    }

    #[test]
    fn generated_world_is_normalized() {
        let w = generate_world(&WorldConfig::new(conf()), 1).unwrap();
        assert!((w.mass(|_| true) - 1.0).abs() < 1e-12);
        assert!(w.cells().iter().all(|c| c.p >= 0.0));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = WorldConfig::new(
            BiasSet::new([BiasSpec::Confounding, Selection::general().into()]).unwrap(),
        )
        .levels(3, 3);
        assert_eq!(
            generate_world(&cfg, 42).unwrap(),
            generate_world(&cfg, 42).unwrap()
        );
        assert_ne!(
            generate_world(&cfg, 42).unwrap(),
            generate_world(&cfg, 43).unwrap()
        );
    }

    #[test]
    fn rare_ceiling_is_respected() {
        let cfg = WorldConfig::new(conf()).rare_outcome(0.01);
        let w = generate_world(&cfg, 7).unwrap();
        assert!(w.max_outcome_risk() <= 0.01);
    }

    #[test]
    fn infeasible_configs() {
        assert!(matches!(
            generate_world(&WorldConfig::new(conf()).rare_outcome(1e-12), 1),
            Err(Error::InfeasibleConfig(_))
        ));
        assert!(matches!(
            generate_world(&WorldConfig::new(conf()).levels(4, 2), 1),
            Err(Error::InfeasibleConfig(_))
        ));
        let su = BiasSet::new([Selection::general().s_equals_u()]).unwrap();
        assert!(matches!(
            generate_world(&WorldConfig::new(su).levels(2, 3), 1),
            Err(Error::InfeasibleConfig(_))
        ));
    }

    #[test]
    fn structure_mismatch() {
        let w = generate_world(&WorldConfig::new(conf()), 3).unwrap();
        let other = BiasSet::new([Selection::general()]).unwrap();
        assert!(matches!(
            extract_parameters(&w, &other),
            Err(Error::StructureMismatch(_))
        ));
    }

    #[test]
    fn exposure_or_of_nondifferential_rates_is_one() {
        let v = exposure_misclassification_or(0.8, 0.8, 0.1, 0.1);
        assert!((v - 1.0).abs() < 1e-12);
    }
}
