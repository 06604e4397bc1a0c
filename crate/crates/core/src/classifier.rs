//! Choquet–Deny classification of discrete groupoids: a groupoid is
//! Choquet–Deny iff its orbits are finite and its isotropy groups are
//! Choquet–Deny.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::groupoids::{GroupoidError, GroupoidHandle, GroupoidKind, Orbit};
use crate::groups::{fc_tower, is_icc_up_to_budget, FcTower, GroupElement, GroupError, GroupHandle, IccStatus, TowerStatus};
use crate::harmonic::harmonic_space;
use crate::markov::{nondegenerate_check, MarkovOperator, Nondegeneracy};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifierError {
    #[error("expected a group bundle, got a {0}")]
    NotABundle(&'static str),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budgets {
    /// Radius of the reference ball for FC towers and icc searches.
    pub ball_radius: usize,
    /// Largest conjugacy class accepted as finite.
    pub class_budget: usize,
    pub max_levels: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { ball_radius: 4, class_budget: 20, max_levels: 6 }
    }
}

impl Budgets {
    fn describe(&self) -> String {
        format!("radius {}, class budget {}, {} levels", self.ball_radius, self.class_budget, self.max_levels)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    ChoquetDeny,
    NotChoquetDeny,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evidence {
    pub criterion: String,
    pub result: String,
    pub budget: Option<String>,
}

fn ev(criterion: &str, result: String, budget: Option<String>) -> Evidence {
    Evidence { criterion: criterion.to_string(), result, budget }
}

/// Exact Liouville status of one operator at one unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossCheck {
    pub operator: usize,
    pub unit: usize,
    pub nondegenerate: bool,
    pub harmonic_dimension: usize,
    /// False only if the verdict is Choquet–Deny but a non-degenerate operator has nonconstant harmonic functions.
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub evidence: Vec<Evidence>,
    pub cross_checks: Vec<CrossCheck>,
    pub diagnostics: Vec<String>,
}

/// Choquet–Deny status of a single group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupStatus {
    ChoquetDeny(String),
    NotChoquetDeny(String),
    Unknown(String),
    /// Oracle and computation disagree.
    Conflict(String),
}

/// Oracle first, then finiteness, then the FC tower; the oracle never
/// silently overrides a computed answer.
pub fn assess_group(g: &GroupHandle, budgets: &Budgets) -> Result<(GroupStatus, Vec<Evidence>), GroupError> {
    let mut evidence = Vec::new();
    if let Some(o) = g.oracle() {
        evidence.push(ev(
            "oracle",
            format!("{g}: {} ({})", if o.choquet_deny { "Choquet-Deny" } else { "not Choquet-Deny" }, o.source),
            None,
        ));
    }
    let computed = if let Some(n) = g.order() {
        evidence.push(ev("finite group", format!("{g} has order {n}"), None));
        Some(format!("finite group of order {n}"))
    } else {
        let t = fc_tower(g, budgets.ball_radius, budgets.class_budget, budgets.max_levels)?;
        let sizes: Vec<usize> = t.levels.iter().map(|l| l.members.len()).collect();
        evidence.push(ev(
            "fc tower",
            format!("{g}: {:?} with level sizes {sizes:?}{}", t.status, t.note.map(|n| format!(" ({n})")).unwrap_or_default()),
            Some(budgets.describe()),
        ));
        (t.status == TowerStatus::Hypercentral)
            .then(|| format!("FC-hypercentral on the ball at level {}", t.levels.len()))
    };
    let status = match (g.oracle(), computed) {
        (Some(o), Some(why)) if !o.choquet_deny => GroupStatus::Conflict(format!(
            "oracle says {g} is not Choquet-Deny ({}) but computation finds it {why}",
            o.source
        )),
        (Some(o), computed) if o.choquet_deny => GroupStatus::ChoquetDeny(match computed {
            Some(why) => format!("oracle ({}) and {why}", o.source),
            None => format!("oracle ({}); not confirmed by the tower within budget", o.source),
        }),
        (Some(o), _) => GroupStatus::NotChoquetDeny(format!("oracle ({}); FC tower not hypercentral", o.source)),
        (None, Some(why)) => GroupStatus::ChoquetDeny(why),
        (None, None) => GroupStatus::Unknown(format!("no oracle for {g} and the FC tower is not hypercentral within budget")),
    };
    Ok((status, evidence))
}

pub fn classify(g: &GroupoidHandle, budgets: &Budgets) -> Result<Verdict, ClassifierError> {
    let mut v = Verdict { outcome: Outcome::ChoquetDeny, evidence: Vec::new(), cross_checks: Vec::new(), diagnostics: Vec::new() };

    // condition (1): finite orbits
    let mut largest = 0;
    for x in 0..g.num_units() {
        match g.orbit_of(x)? {
            Orbit::Finite(o) => largest = largest.max(o.len()),
            Orbit::ExceedsUnitSpace => {
                v.evidence.push(ev(
                    "finite orbits",
                    format!("orbit of unit {x} is infinite ({g})"),
                    Some(format!("{} materialized units", g.num_units())),
                ));
                v.outcome = Outcome::NotChoquetDeny;
                return Ok(v);
            }
        }
    }
    v.evidence.push(ev("finite orbits", format!("all {} orbits finite, largest has {largest} units", g.blocks().len()), None));

    // condition (2): Choquet–Deny isotropy
    let groups: Vec<(GroupHandle, String)> = match g.kind() {
        GroupoidKind::FiniteRelation | GroupoidKind::CountableFullRelation { .. } => {
            v.evidence.push(ev("isotropy", "trivial isotropy groups".into(), None));
            Vec::new()
        }
        GroupoidKind::GroupBundle { groups } | GroupoidKind::Semidirect { groups, .. } => {
            let mut distinct: Vec<(GroupHandle, String)> = Vec::new();
            for (x, h) in groups.iter().enumerate() {
                if !distinct.iter().any(|(d, _)| d == h) {
                    distinct.push((h.clone(), format!("isotropy at unit {x}")));
                }
            }
            distinct
        }
        GroupoidKind::Transformation { group, .. } => {
            v.evidence.push(ev(
                "isotropy",
                format!(
                    "stabilizers have index at most {largest} in {group}; Choquet-Deny status passes to and from finite-index subgroups"
                ),
                None,
            ));
            alloc::vec![(group.clone(), "acting group".to_string())]
        }
    };
    let mut unknown = false;
    let mut failed = false;
    for (h, label) in groups {
        let (status, evidence) = assess_group(&h, budgets)?;
        v.evidence.extend(evidence);
        match status {
            GroupStatus::ChoquetDeny(why) => v.evidence.push(ev("isotropy Choquet-Deny", format!("{label}: {why}"), None)),
            GroupStatus::NotChoquetDeny(why) => {
                failed = true;
                v.evidence.push(ev("isotropy Choquet-Deny", format!("{label}: violated, {why}"), None));
            }
            GroupStatus::Unknown(why) => {
                unknown = true;
                v.evidence.push(ev("isotropy Choquet-Deny", format!("{label}: undetermined, {why}"), Some(budgets.describe())));
            }
            GroupStatus::Conflict(why) => {
                unknown = true;
                v.diagnostics.push(why);
            }
        }
    }
    v.outcome = if unknown {
        Outcome::Inconclusive
    } else if failed {
        Outcome::NotChoquetDeny
    } else {
        Outcome::ChoquetDeny
    };
    Ok(v)
}

/// Compares the verdict with exact harmonic spaces of the given operators
/// on every finite fiber.
pub fn attach_cross_checks(v: &mut Verdict, ops: &[MarkovOperator]) {
    for (i, p) in ops.iter().enumerate() {
        let g = p.groupoid();
        for x in 0..g.num_units() {
            let Some(size) = g.fiber_size(x) else { continue };
            let Ok(nd) = nondegenerate_check(p, x, size.max(1), size) else { continue };
            let Ok(h) = harmonic_space(p, x) else { continue };
            let nondegenerate = matches!(nd, Nondegeneracy::CoveredBall { .. });
            let consistent = !(v.outcome == Outcome::ChoquetDeny && nondegenerate && h.dimension() != 1);
            if !consistent {
                v.diagnostics.push(format!(
                    "operator {i} at unit {x} is non-degenerate with {} harmonic dimensions",
                    h.dimension()
                ));
            }
            v.cross_checks.push(CrossCheck { operator: i, unit: x, nondegenerate, harmonic_dimension: h.dimension(), consistent });
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IccGroupoid {
    IccUpToBudget,
    /// A section of nontrivial isotropy elements with finite conjugacy closure.
    NotIcc { section: BTreeMap<usize, GroupElement> },
}

pub fn icc_groupoid_check(g: &GroupoidHandle, budgets: &Budgets) -> Result<IccGroupoid, ClassifierError> {
    let radius = budgets.ball_radius.max(1);
    let mut section = BTreeMap::new();
    match g.kind() {
        GroupoidKind::FiniteRelation | GroupoidKind::CountableFullRelation { .. } => {}
        GroupoidKind::GroupBundle { groups } => {
            for (x, h) in groups.iter().enumerate() {
                if let IccStatus::NotIcc(w) = is_icc_up_to_budget(h, radius, budgets.class_budget)? {
                    section.insert(x, w);
                }
            }
        }
        GroupoidKind::Semidirect { groups, .. } => {
            // conjugation by arrows transports a witness along δ to the whole orbit
            for block in g.blocks() {
                let x = block[0];
                if let IccStatus::NotIcc(w) = is_icc_up_to_budget(&groups[x], radius, budgets.class_budget)? {
                    for &y in block {
                        section.insert(y, g.delta(y, x, &w)?);
                    }
                }
            }
        }
        GroupoidKind::Transformation { group, .. } => {
            for x in 0..g.num_units() {
                for h in crate::groups::ball(group, radius)? {
                    if h.is_identity() || g.act(&h, x)? != x {
                        continue;
                    }
                    if crate::groups::conjugacy_class(group, &h, budgets.class_budget, 1)?.is_finite() {
                        section.insert(x, h);
                        break;
                    }
                }
            }
        }
    }
    Ok(if section.is_empty() { IccGroupoid::IccUpToBudget } else { IccGroupoid::NotIcc { section } })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuotientTower {
    pub towers: Vec<FcTower>,
    /// Number of nontrivial quotient steps per unit.
    pub lengths: Vec<usize>,
    /// Every fiber's tower ended trivial or icc up to budget.
    pub terminal_icc: bool,
}

/// Fiberwise FC-quotient tower of a group bundle.
pub fn fc_quotient_tower(g: &GroupoidHandle, budgets: &Budgets) -> Result<QuotientTower, ClassifierError> {
    let GroupoidKind::GroupBundle { groups } = g.kind() else {
        return Err(ClassifierError::NotABundle(g.kind().tag()));
    };
    let mut cache: Vec<(GroupHandle, FcTower)> = Vec::new();
    let mut towers = Vec::with_capacity(groups.len());
    for h in groups {
        let t = match cache.iter().find(|(c, _)| c == h) {
            Some((_, t)) => t.clone(),
            None => {
                let t = fc_tower(h, budgets.ball_radius, budgets.class_budget, budgets.max_levels)?;
                cache.push((h.clone(), t.clone()));
                t
            }
        };
        towers.push(t);
    }
    let lengths = towers.iter().map(FcTower::length).collect();
    let terminal_icc = towers.iter().all(|t| t.status != TowerStatus::BudgetExhausted);
    Ok(QuotientTower { towers, lengths, terminal_icc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoids::{rotation_action, uniform_weights};

    fn b() -> Budgets {
        Budgets::default()
    }

    #[test]
    fn swap_action_is_choquet_deny() {
        let g = GroupoidHandle::transformation(&GroupHandle::integers(), rotation_action(2), uniform_weights(2)).unwrap();
        assert_eq!(classify(&g, &b()).unwrap().outcome, Outcome::ChoquetDeny);
    }

    #[test]
    fn lamplighter_bundle_is_not() {
        let g = GroupoidHandle::constant_bundle(&GroupHandle::lamplighter(), uniform_weights(1)).unwrap();
        let v = classify(&g, &b()).unwrap();
        assert_eq!(v.outcome, Outcome::NotChoquetDeny);
        assert!(v.diagnostics.is_empty());
    }

    #[test]
    fn infinite_orbit_is_not() {
        let g = GroupoidHandle::countable_full_relation(8);
        assert_eq!(classify(&g, &b()).unwrap().outcome, Outcome::NotChoquetDeny);
    }

    #[test]
    fn missing_oracle_is_inconclusive_not_negative() {
        let bare = GroupHandle::lamplighter().with_oracle(None);
        let g = GroupoidHandle::constant_bundle(&bare, uniform_weights(1)).unwrap();
        assert_eq!(classify(&g, &b()).unwrap().outcome, Outcome::Inconclusive);
        let heis = GroupHandle::heisenberg().with_oracle(None);
        let g = GroupoidHandle::constant_bundle(&heis, uniform_weights(1)).unwrap();
        assert_eq!(classify(&g, &b()).unwrap().outcome, Outcome::ChoquetDeny);
    }

    #[test]
    fn oracle_conflict_is_flagged() {
        let liar = GroupHandle::dihedral_inf().with_oracle(Some(crate::groups::Oracle {
            choquet_deny: false,
            source: "deliberately wrong".into(),
        }));
        let g = GroupoidHandle::constant_bundle(&liar, uniform_weights(1)).unwrap();
        let v = classify(&g, &b()).unwrap();
        assert_eq!(v.outcome, Outcome::Inconclusive);
        assert_eq!(v.diagnostics.len(), 1);
    }

    #[test]
    fn icc_examples() {
        let rel = GroupoidHandle::finite_relation(&[alloc::vec![0, 1, 2]], uniform_weights(3)).unwrap();
        assert_eq!(icc_groupoid_check(&rel, &b()).unwrap(), IccGroupoid::IccUpToBudget);
        let zb = GroupoidHandle::constant_bundle(&GroupHandle::integers(), uniform_weights(3)).unwrap();
        match icc_groupoid_check(&zb, &b()).unwrap() {
            IccGroupoid::NotIcc { section } => {
                assert_eq!(section.len(), 3);
                assert!(section.values().all(|w| *w == GroupElement::int(1)));
            }
            other => panic!("{other:?}"),
        }
        let lb = GroupoidHandle::constant_bundle(&GroupHandle::lamplighter(), uniform_weights(1)).unwrap();
        let budgets = Budgets { ball_radius: 2, ..b() };
        assert_eq!(icc_groupoid_check(&lb, &budgets).unwrap(), IccGroupoid::IccUpToBudget);
    }

    #[test]
    fn quotient_towers() {
        let tower = |h: GroupHandle| {
            let g = GroupoidHandle::constant_bundle(&h, uniform_weights(2)).unwrap();
            fc_quotient_tower(&g, &b()).unwrap()
        };
        let s3 = tower(GroupHandle::symmetric(3).unwrap());
        assert_eq!(s3.lengths, alloc::vec![1, 1]);
        assert!(s3.terminal_icc);
        assert_eq!(tower(GroupHandle::dihedral_inf()).lengths, alloc::vec![2, 2]);
        assert_eq!(tower(GroupHandle::lamplighter()).lengths, alloc::vec![0, 0]);
        let rel = GroupoidHandle::finite_relation(&[alloc::vec![0, 1]], uniform_weights(2)).unwrap();
        assert!(fc_quotient_tower(&rel, &b()).is_err());
    }
}
