#![allow(dead_code)]

use multibias::{BiasSet, BiasSpec, Misclassification, Selection};

pub fn selection_options() -> Vec<Selection> {
    let mut out = Vec::new();
    for base in [Selection::general(), Selection::selected()] {
        for dir in 0..3 {
            for su in [false, true] {
                let mut s = base;
                s = match dir {
                    1 => s.increased_risk(),
                    2 => s.decreased_risk(),
                    _ => s,
                };
                if su {
                    s = s.s_equals_u();
                }
                out.push(s);
            }
        }
    }
    out
}

pub fn misclassification_options() -> Vec<Misclassification> {
    let mut out = vec![Misclassification::Outcome];
    for ro in [false, true] {
        for re in [false, true] {
            out.push(Misclassification::exposure(ro, re));
        }
    }
    out
}

fn permutations(items: &[BiasSpec]) -> Vec<Vec<BiasSpec>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Every bias set the constructor accepts, in every declaration order.
pub fn all_bias_sets() -> Vec<BiasSet> {
    let mut sels: Vec<Option<BiasSpec>> = vec![None];
    sels.extend(selection_options().into_iter().map(|s| Some(s.into())));
    let mut mis: Vec<Option<BiasSpec>> = vec![None];
    mis.extend(
        misclassification_options()
            .into_iter()
            .map(|m| Some(m.into())),
    );

    let mut out = Vec::new();
    for conf in [None, Some(BiasSpec::Confounding)] {
        for s in &sels {
            for m in &mis {
                let specs: Vec<BiasSpec> = [conf, *s, *m].into_iter().flatten().collect();
                if specs.is_empty() {
                    continue;
                }
                for order in permutations(&specs) {
                    if let Ok(set) = BiasSet::new(order) {
                        out.push(set);
                    }
                }
            }
        }
    }
    out
}

pub fn hiv() -> BiasSet {
    BiasSet::new([
        BiasSpec::Confounding,
        Selection::general().increased_risk().into(),
    ])
    .unwrap()
}

pub fn leukemia() -> BiasSet {
    BiasSet::new([
        BiasSpec::Confounding,
        Misclassification::exposure(true, false).into(),
    ])
    .unwrap()
}

/// Confounding, general selection and outcome misclassification.
pub fn result1(selection: Selection, misclassification_first: bool) -> BiasSet {
    let specs: Vec<BiasSpec> = if misclassification_first {
        vec![
            BiasSpec::Confounding,
            Misclassification::Outcome.into(),
            selection.into(),
        ]
    } else {
        vec![
            BiasSpec::Confounding,
            selection.into(),
            Misclassification::Outcome.into(),
        ]
    };
    BiasSet::new(specs).unwrap()
}

/// Confounding, general selection and exposure misclassification under a rare outcome.
pub fn result2() -> BiasSet {
    BiasSet::new([
        BiasSpec::Confounding,
        Selection::general().into(),
        Misclassification::exposure(true, false).into(),
    ])
    .unwrap()
}

/// Confounding and outcome misclassification within the selected population.
pub fn result3() -> BiasSet {
    BiasSet::new([
        BiasSpec::Confounding,
        Selection::selected().into(),
        Misclassification::Outcome.into(),
    ])
    .unwrap()
}
