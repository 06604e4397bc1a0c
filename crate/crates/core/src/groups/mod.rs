//! Finitely generated groups given by normal forms: word balls, budgeted
//! conjugacy classes, FC-centers, FC-towers and icc semi-decisions.
//!
//! Conjugacy-class finiteness is undecidable in general, so every answer
//! here is relative to an explicit budget. `Finite` results are exact;
//! budget overruns are reported as such and never read as proofs of
//! infiniteness.

mod element;
mod handle;
mod notation;
mod walk;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use element::{Gen, GroupElement, Lamps, Perm, Word};
pub use handle::{Family, GroupHandle, Oracle, FINITE_TABLE_ORDER_CAP};
pub use notation::parse_element;
pub use walk::BallWalker;

/// Default cap on the number of elements materialized by [`ball`].
pub const DEFAULT_BALL_CAP: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroupError {
    #[error("resource cap exceeded: {what} above {cap}")]
    ResourceCap { what: &'static str, cap: usize },
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("element does not belong to the group: {0}")]
    ForeignElement(String),
    #[error("cannot parse group element: {0}")]
    Parse(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Elements of word length at most `radius`, in shortlex order.
pub fn ball(group: &GroupHandle, radius: usize) -> Result<Vec<GroupElement>, GroupError> {
    ball_with_cap(group, radius, DEFAULT_BALL_CAP)
}

pub fn ball_with_cap(
    group: &GroupHandle,
    radius: usize,
    cap: usize,
) -> Result<Vec<GroupElement>, GroupError> {
    let mut out = Vec::new();
    for (g, r) in BallWalker::new(group) {
        if r > radius {
            break;
        }
        if out.len() >= cap {
            return Err(GroupError::ResourceCap { what: "ball size", cap });
        }
        out.push(g);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConjugacyResult {
    Finite(BTreeSet<GroupElement>),
    ExceedsBudget { count_found: usize, budget: usize },
}

impl ConjugacyResult {
    pub fn is_finite(&self) -> bool {
        matches!(self, ConjugacyResult::Finite(_))
    }
}

/// Closure of `{g}` under conjugation by the nontrivial elements of the ball
/// of radius `max(conjugator_radius, 1)`. Gives up as soon as more than
/// `budget` distinct conjugates are known.
pub fn conjugacy_class(
    group: &GroupHandle,
    g: &GroupElement,
    budget: usize,
    conjugator_radius: usize,
) -> Result<ConjugacyResult, GroupError> {
    if budget == 0 {
        return Err(GroupError::InvalidArgument("class budget must be at least 1".into()));
    }
    let conjugators: Vec<GroupElement> = if conjugator_radius <= 1 {
        group.generators().to_vec()
    } else {
        ball(group, conjugator_radius)?
            .into_iter()
            .filter(|c| !c.is_identity())
            .collect()
    };
    let mut class = BTreeSet::new();
    class.insert(g.clone());
    let mut frontier = alloc::vec![g.clone()];
    while let Some(x) = frontier.pop() {
        for c in &conjugators {
            let y = x.conj_by(c);
            if class.insert(y.clone()) {
                if class.len() > budget {
                    return Ok(ConjugacyResult::ExceedsBudget {
                        count_found: class.len(),
                        budget,
                    });
                }
                frontier.push(y);
            }
        }
    }
    Ok(ConjugacyResult::Finite(class))
}

/// Elements of the ball whose conjugacy class closes within `class_budget`.
pub fn fc_center_in_ball(
    group: &GroupHandle,
    radius: usize,
    class_budget: usize,
) -> Result<Vec<GroupElement>, GroupError> {
    let mut out = Vec::new();
    for g in ball(group, radius)? {
        if conjugacy_class(group, &g, class_budget, 1)?.is_finite() {
            out.push(g);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IccStatus {
    IccUpToBudget,
    NotIcc(GroupElement),
}

/// Semi-decision for icc: reports the first nontrivial ball element (shortlex)
/// whose class closes within budget.
pub fn is_icc_up_to_budget(
    group: &GroupHandle,
    radius: usize,
    class_budget: usize,
) -> Result<IccStatus, GroupError> {
    for g in ball(group, radius.max(1))? {
        if g.is_identity() {
            continue;
        }
        if conjugacy_class(group, &g, class_budget, 1)?.is_finite() {
            return Ok(IccStatus::NotIcc(g));
        }
    }
    Ok(IccStatus::IccUpToBudget)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TowerStatus {
    Hypercentral,
    StabilizedProper,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FcLevel {
    pub level: usize,
    /// Preimage in the reference ball of the FC-center of the current quotient.
    pub members: Vec<GroupElement>,
    /// The quotient in which this level's FC-center was computed.
    pub quotient: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FcTower {
    pub levels: Vec<FcLevel>,
    pub status: TowerStatus,
    pub note: Option<String>,
}

impl FcTower {
    /// Level at which the ball was exhausted, if hypercentral.
    pub fn hypercentral_level(&self) -> Option<usize> {
        match self.status {
            TowerStatus::Hypercentral => self.levels.last().map(|l| l.level),
            _ => None,
        }
    }

    /// Number of levels that strictly enlarge the previous one.
    pub fn length(&self) -> usize {
        let mut prev = 1;
        let mut n = 0;
        for l in &self.levels {
            if l.members.len() > prev {
                n += 1;
            }
            prev = l.members.len();
        }
        n
    }
}

struct Stage {
    group: GroupHandle,
    /// Image of each reference-ball element in `group`.
    image: Vec<GroupElement>,
    description: String,
}

/// Iterated FC-centers `FC_1 ⊆ FC_2 ⊆ ...` restricted to the ball of `radius`.
///
/// Quotients are realised per family: D_∞ / ℤ as ℤ/2, Heisenberg / center
/// as ℤ², and finite groups through their action on cosets. Anything else
/// ends the tower with [`TowerStatus::BudgetExhausted`] and an explanation.
pub fn fc_tower(
    group: &GroupHandle,
    radius: usize,
    class_budget: usize,
    max_levels: usize,
) -> Result<FcTower, GroupError> {
    if max_levels == 0 {
        return Err(GroupError::InvalidArgument("max_levels must be at least 1".into()));
    }
    let reference = ball(group, radius)?;
    let mut stage = Stage {
        group: group.clone(),
        image: reference.clone(),
        description: format!("{group}"),
    };
    let mut levels = Vec::new();
    for level in 1..=max_levels {
        let mut verdicts: BTreeMap<GroupElement, Option<BTreeSet<GroupElement>>> = BTreeMap::new();
        for q in &stage.image {
            if !verdicts.contains_key(q) {
                let v = match conjugacy_class(&stage.group, q, class_budget, 1)? {
                    ConjugacyResult::Finite(c) => Some(c),
                    ConjugacyResult::ExceedsBudget { .. } => None,
                };
                verdicts.insert(q.clone(), v);
            }
        }
        let members: Vec<GroupElement> = reference
            .iter()
            .zip(&stage.image)
            .filter(|(_, q)| verdicts[*q].is_some())
            .map(|(g, _)| g.clone())
            .collect();
        let nontrivial = verdicts.iter().any(|(q, v)| v.is_some() && !q.is_identity());
        let all = members.len() == reference.len();
        levels.push(FcLevel { level, members, quotient: stage.description.clone() });
        if all {
            return Ok(FcTower { levels, status: TowerStatus::Hypercentral, note: None });
        }
        if !nontrivial {
            return Ok(FcTower {
                levels,
                status: TowerStatus::StabilizedProper,
                note: Some(format!("FC-center of {} is trivial on the ball", stage.description)),
            });
        }
        if level == max_levels {
            break;
        }
        let certified: BTreeSet<GroupElement> = verdicts
            .iter()
            .filter(|(_, v)| v.is_some())
            .map(|(q, _)| q.clone())
            .collect();
        let classes: Vec<&BTreeSet<GroupElement>> = verdicts.values().flatten().collect();
        match quotient_stage(&stage, &certified, &classes) {
            Ok(next) => stage = next,
            Err(reason) => {
                return Ok(FcTower {
                    levels,
                    status: TowerStatus::BudgetExhausted,
                    note: Some(format!("unsupported quotient: {reason}")),
                })
            }
        }
    }
    Ok(FcTower {
        levels,
        status: TowerStatus::BudgetExhausted,
        note: Some(format!("stopped after {max_levels} levels")),
    })
}

fn quotient_stage(
    stage: &Stage,
    certified: &BTreeSet<GroupElement>,
    classes: &[&BTreeSet<GroupElement>],
) -> Result<Stage, String> {
    let g = &stage.group;
    match g.family() {
        Family::DihedralInf => {
            let translations_only = stage.image.iter().all(|q| {
                let is_translation =
                    matches!(q, GroupElement::Dihedral { reflected: false, .. });
                is_translation == certified.contains(q)
            });
            if !translations_only {
                return Err("certified set of D_inf is not the translation subgroup".into());
            }
            let z2 = GroupHandle::cyclic(2);
            let flip = z2.generators()[0].clone();
            let image = stage
                .image
                .iter()
                .map(|q| match q {
                    GroupElement::Dihedral { reflected: true, .. } => flip.clone(),
                    _ => z2.identity(),
                })
                .collect();
            Ok(Stage { group: z2, image, description: format!("{} / <t> = Z/2", stage.description) })
        }
        Family::Heisenberg => {
            let center_only = stage.image.iter().all(|q| {
                let central = matches!(q, GroupElement::Heisenberg { a: 0, b: 0, .. });
                central == certified.contains(q)
            });
            if !center_only {
                return Err("certified set of the Heisenberg group is not its center".into());
            }
            let z2 = GroupHandle::lattice(2);
            let image = stage
                .image
                .iter()
                .map(|q| match q {
                    GroupElement::Heisenberg { a, b, .. } => GroupElement::lattice([*a, *b]),
                    _ => unreachable!(),
                })
                .collect();
            Ok(Stage { group: z2, image, description: format!("{} / Z(H) = Z^2", stage.description) })
        }
        Family::FiniteTable { .. } => coset_quotient(stage, g, classes),
        Family::FinitarySym { support } => {
            if g.order().is_some_and(|n| n as usize <= FINITE_TABLE_ORDER_CAP) {
                let perms: Vec<Perm> = g
                    .generators()
                    .iter()
                    .map(|x| match x {
                        GroupElement::Perm(p) => p.clone(),
                        _ => unreachable!(),
                    })
                    .collect();
                let table = GroupHandle::finite_table(*support as usize, &perms)
                    .map_err(|e| format!("{e}"))?;
                let as_table = Stage {
                    group: table.clone(),
                    image: stage.image.clone(),
                    description: stage.description.clone(),
                };
                coset_quotient(&as_table, &table, classes)
            } else {
                Err(format!("{g} is too large for an explicit coset quotient"))
            }
        }
        _ => Err(format!("no quotient representation for {g}")),
    }
}

/// Quotient of a finite group by the normal subgroup generated by the
/// certified conjugacy classes, realised as the action on left cosets.
fn coset_quotient(
    stage: &Stage,
    g: &GroupHandle,
    classes: &[&BTreeSet<GroupElement>],
) -> Result<Stage, String> {
    let elements = g.table_elements().ok_or("missing element table")?;
    let mut normal: BTreeSet<GroupElement> = BTreeSet::new();
    normal.insert(g.identity());
    let gens: Vec<GroupElement> = classes.iter().flat_map(|c| c.iter().cloned()).collect();
    let mut frontier = alloc::vec![g.identity()];
    while let Some(x) = frontier.pop() {
        for s in &gens {
            let y = x.mul(s);
            if normal.insert(y.clone()) {
                frontier.push(y);
            }
        }
    }
    let mut coset_of: BTreeMap<GroupElement, u16> = BTreeMap::new();
    let mut reps: Vec<GroupElement> = Vec::new();
    for x in elements {
        if coset_of.contains_key(x) {
            continue;
        }
        let idx = reps.len() as u16;
        for n in &normal {
            coset_of.insert(x.mul(n), idx);
        }
        reps.push(x.clone());
    }
    let action = |x: &GroupElement| -> Perm {
        let images: Vec<u16> = reps.iter().map(|r| coset_of[&x.mul(r)]).collect();
        Perm::from_images(&images).expect("left multiplication permutes cosets")
    };
    let perms: Vec<Perm> = g.generators().iter().map(action).collect();
    let quotient = GroupHandle::finite_table(reps.len(), &perms).map_err(|e| format!("{e}"))?;
    let image = stage.image.iter().map(|x| GroupElement::Perm(action(x))).collect();
    Ok(Stage {
        group: quotient,
        image,
        description: format!("{} / FC (order {})", stage.description, reps.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: Vec<GroupElement>) -> BTreeSet<GroupElement> {
        v.into_iter().collect()
    }

    #[test]
    fn integer_ball_radius_two() {
        let b = ball(&GroupHandle::integers(), 2).unwrap();
        assert_eq!(set(b.clone()), set((-2..=2).map(GroupElement::int).collect()));
        // shortlex with generator order (+1, -1)
        assert_eq!(b[1], GroupElement::int(1));
    }

    #[test]
    fn small_balls() {
        assert_eq!(ball(&GroupHandle::dihedral_inf(), 1).unwrap().len(), 4);
        assert_eq!(ball(&GroupHandle::heisenberg(), 1).unwrap().len(), 5);
        assert_eq!(ball(&GroupHandle::symmetric(3).unwrap(), 10).unwrap().len(), 6);
    }

    #[test]
    fn ball_cap_is_enforced() {
        let err = ball_with_cap(&GroupHandle::lamplighter(), 6, 10).unwrap_err();
        assert!(matches!(err, GroupError::ResourceCap { .. }));
    }

    #[test]
    fn conjugacy_examples() {
        let z2 = GroupHandle::lattice(2);
        let g = GroupElement::lattice([1, 0]);
        assert_eq!(
            conjugacy_class(&z2, &g, 10, 1).unwrap(),
            ConjugacyResult::Finite(set(alloc::vec![g]))
        );
        let d = GroupHandle::dihedral_inf();
        let t = GroupElement::Dihedral { translation: 1, reflected: false };
        assert_eq!(
            conjugacy_class(&d, &t, 10, 1).unwrap(),
            ConjugacyResult::Finite(set(alloc::vec![t.clone(), t.inv()]))
        );
        let l = GroupHandle::lamplighter();
        let a = l.generators()[2].clone();
        assert_eq!(
            conjugacy_class(&l, &a, 10, 1).unwrap(),
            ConjugacyResult::ExceedsBudget { count_found: 11, budget: 10 }
        );
        assert!(conjugacy_class(&l, &a, 0, 1).is_err());
    }

    #[test]
    fn fc_centers() {
        let s3 = GroupHandle::symmetric(3).unwrap();
        assert_eq!(fc_center_in_ball(&s3, 3, 10).unwrap().len(), 6);
        let d = GroupHandle::dihedral_inf();
        let expected: BTreeSet<_> = (-3..=3)
            .map(|n| GroupElement::Dihedral { translation: n, reflected: false })
            .collect();
        assert_eq!(set(fc_center_in_ball(&d, 3, 10).unwrap()), expected);
        let l = GroupHandle::lamplighter();
        assert_eq!(fc_center_in_ball(&l, 2, 10).unwrap(), alloc::vec![l.identity()]);
    }

    #[test]
    fn towers() {
        let s3 = fc_tower(&GroupHandle::symmetric(3).unwrap(), 3, 10, 5).unwrap();
        assert_eq!(s3.status, TowerStatus::Hypercentral);
        assert_eq!(s3.hypercentral_level(), Some(1));

        let d = fc_tower(&GroupHandle::dihedral_inf(), 3, 10, 5).unwrap();
        assert_eq!(d.status, TowerStatus::Hypercentral);
        assert_eq!(d.levels.len(), 2);
        assert_eq!(d.levels[0].members.len(), 7);

        // the center is first reached by the commutator, of length 4
        let h = fc_tower(&GroupHandle::heisenberg(), 4, 10, 5).unwrap();
        assert_eq!(h.hypercentral_level(), Some(2));
        let h3 = fc_tower(&GroupHandle::heisenberg(), 3, 10, 5).unwrap();
        assert_eq!(h3.status, TowerStatus::StabilizedProper);

        let l = fc_tower(&GroupHandle::lamplighter(), 3, 10, 5).unwrap();
        assert_eq!(l.status, TowerStatus::StabilizedProper);
        assert_eq!(l.levels.len(), 1);
        assert_eq!(l.levels[0].members.len(), 1);
    }

    #[test]
    fn coset_quotients_of_finite_groups() {
        // S_4 has a trivial FC-quotient tower of length one; the budget
        // restricts level one to classes of size at most 3, i.e. the Klein
        // four group plus the identity, forcing a genuine coset quotient.
        let s4 = GroupHandle::symmetric(4).unwrap();
        let t = fc_tower(&s4, 10, 3, 6).unwrap();
        assert_eq!(t.levels[0].members.len(), 4);
        assert!(t.levels.len() >= 2);
        for w in t.levels.windows(2) {
            let a = set(w[0].members.clone());
            let b = set(w[1].members.clone());
            assert!(a.is_subset(&b));
        }
    }

    #[test]
    fn icc_semidecisions() {
        assert_eq!(
            is_icc_up_to_budget(&GroupHandle::integers(), 2, 10).unwrap(),
            IccStatus::NotIcc(GroupElement::int(1))
        );
        assert_eq!(
            is_icc_up_to_budget(&GroupHandle::lamplighter(), 2, 20).unwrap(),
            IccStatus::IccUpToBudget
        );
        assert_eq!(
            is_icc_up_to_budget(&GroupHandle::finitary_sym(12), 2, 20).unwrap(),
            IccStatus::IccUpToBudget
        );
    }
}
