//! Switching elements and the recursive construction of a symmetric,
//! finitely supported measure whose level structure is the one used to
//! build non-Liouville walks on icc groups.
//!
//! Only the structural hypotheses are certified: every `τ_{n+1}` is
//! super-switching for `(C_n)^{2n+1}` and avoids `(C_n)^{8n+1}`, the measure
//! is symmetric and normalized, and the mixture weights are as stated.
//! Non-Liouvilleness itself is a limit statement and is not claimed.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashSet;
use num_traits::{One, Signed};

use crate::groups::{is_icc_up_to_budget, BallWalker, GroupError, GroupElement, GroupHandle, IccStatus};
use crate::rational::{one, pow2_inv, q, zero, Q};

/// Default cap on the size of a materialized power set `C^k`.
pub const POWER_SET_CAP: usize = 6_000_000;
/// Default radius up to which candidates for `τ_{n+1}` are searched.
pub const SEARCH_RADIUS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstructionError {
    #[error("epsilon must satisfy 0 < epsilon < 1/8, got {0}")]
    InvalidEpsilon(String),
    #[error("invalid level distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no super-switching element found for level {level} within the search budget")]
    SearchExhausted { level: usize },
    #[error("resource cap exceeded: {what} above {cap}")]
    ResourceCap { what: &'static str, cap: usize },
    #[error(transparent)]
    Group(#[from] GroupError),
}

type Set = HashSet<GroupElement>;

/// The verbatim super-switching test: each of `gag, gag⁻¹, g⁻¹ag, g⁻¹ag⁻¹`
/// (for `a ∈ A`) lies outside `A` or is the identity.
pub fn is_super_switching(g: &GroupElement, a_set: &Set) -> bool {
    let gi = g.inv();
    for a in a_set {
        let ga = g.mul(a);
        let gia = gi.mul(a);
        for x in [ga.mul(g), ga.mul(&gi), gia.mul(g), gia.mul(&gi)] {
            if !x.is_identity() && a_set.contains(&x) {
                return false;
            }
        }
    }
    true
}

/// All elements of `ball(radius)` that are super-switching for `a`, in shortlex order.
pub fn super_switching_search(
    group: &GroupHandle,
    a: &[GroupElement],
    radius: usize,
) -> Result<Vec<GroupElement>, ConstructionError> {
    let a_set: Set = a.iter().cloned().collect();
    let mut out = Vec::new();
    for (g, r) in BallWalker::new(group) {
        if r > radius {
            break;
        }
        if is_super_switching(&g, &a_set) {
            out.push(g);
        }
    }
    Ok(out)
}

/// The set of products of `k` elements of `c`. The empty product is the identity.
pub fn power_set(
    identity: &GroupElement,
    c: &[GroupElement],
    k: usize,
    cap: usize,
) -> Result<Set, ConstructionError> {
    let too_big = || ConstructionError::ResourceCap { what: "power set size", cap };
    let mut acc: Set = Set::new();
    acc.insert(identity.clone());
    if k == 0 {
        return Ok(acc);
    }
    if c.iter().any(|x| x == identity) {
        // With e ∈ C the powers are nested, so only the newest layer needs expanding.
        let mut frontier: Vec<GroupElement> = alloc::vec![identity.clone()];
        for _ in 0..k {
            let mut next = Vec::new();
            for x in &frontier {
                for y in c {
                    let z = x.mul(y);
                    if !acc.contains(&z) {
                        if acc.len() >= cap {
                            return Err(too_big());
                        }
                        acc.insert(z.clone());
                        next.push(z);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(acc)
    } else {
        for _ in 0..k {
            let mut next = Set::new();
            for x in &acc {
                for y in c {
                    next.insert(x.mul(y));
                    if next.len() > cap {
                        return Err(too_big());
                    }
                }
            }
            acc = next;
        }
        Ok(acc)
    }
}

/// Weights `p(1), .., p(depth)` on the construction levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LevelDistribution {
    /// `p(n) = 2^{-n}`, truncated to `n ≤ depth` and renormalized.
    Geometric,
    /// Explicit positive weights with total at most 1; the deficit is the truncated mass.
    Table(Vec<Q>),
}

/// Source of the elements `σ_{N+1}, σ_{N+2}, ..` that the measure must eventually charge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Enumeration {
    /// Nontrivial elements in shortlex order.
    BallOrder,
    Explicit(Vec<GroupElement>),
}

#[derive(Debug, Clone)]
pub struct ConstructionConfig {
    pub epsilon: Q,
    pub depth: usize,
    /// Number of initial levels with `τ_n = σ_n = e`.
    pub identity_levels: usize,
    pub distribution: LevelDistribution,
    pub enumeration: Enumeration,
    pub search_radius: usize,
    pub power_cap: usize,
    /// Radius and class budget of the advisory icc check.
    pub icc_radius: usize,
    pub icc_budget: usize,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        ConstructionConfig {
            epsilon: q(1, 16),
            depth: 4,
            identity_levels: 2,
            distribution: LevelDistribution::Geometric,
            enumeration: Enumeration::BallOrder,
            search_radius: SEARCH_RADIUS,
            power_cap: POWER_SET_CAP,
            icc_radius: 2,
            icc_budget: 20,
        }
    }
}

/// Sets attached to level `n`. All vectors are sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchSets {
    pub n: usize,
    pub tau: GroupElement,
    pub sigma: GroupElement,
    pub a: Vec<GroupElement>,
    pub b: Vec<GroupElement>,
    pub c: Vec<GroupElement>,
    /// `|(C_n)^{2n+1}|` and `|(C_n)^{8n+1}|`, when they were materialized.
    pub switch_power_size: Option<usize>,
    pub avoid_power_size: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct NonLiouvilleCertificate {
    pub group: GroupHandle,
    pub epsilon: Q,
    pub identity_levels: usize,
    /// The base section `τ`, a fixed nontrivial element.
    pub tau_base: GroupElement,
    /// Renormalized level weights `p(1), .., p(depth)`.
    pub p: Vec<Q>,
    /// Mass removed by truncating the level distribution before renormalizing.
    pub truncated_mass: Q,
    pub levels: Vec<SwitchSets>,
    pub measure: BTreeMap<GroupElement, Q>,
    /// Support size of the partial mixture `Σ_{m ≤ n} p(m) μ_m` for each `n`.
    pub support_sizes: Vec<usize>,
    pub power_cap: usize,
    pub checks: Vec<String>,
}

impl NonLiouvilleCertificate {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn mass(&self, g: &GroupElement) -> Q {
        self.measure.get(g).cloned().unwrap_or_else(zero)
    }
}

fn sorted(set: impl IntoIterator<Item = GroupElement>) -> Vec<GroupElement> {
    let mut v: Vec<GroupElement> = set.into_iter().collect();
    v.sort();
    v.dedup();
    v
}

fn level_sets(
    tau_base: &GroupElement,
    taus: &[GroupElement],
    sigmas: &[GroupElement],
) -> Vec<(Vec<GroupElement>, Vec<GroupElement>, Vec<GroupElement>)> {
    let mut out = Vec::new();
    let mut b: Vec<GroupElement> = Vec::new();
    for (t, s) in taus.iter().zip(sigmas) {
        let a = sorted([t.clone(), t.inv(), s.clone(), s.inv()]);
        b = sorted(b.into_iter().chain(a.iter().cloned()));
        let c = sorted(b.iter().cloned().chain([tau_base.clone(), tau_base.inv()]));
        out.push((a, b.clone(), c));
    }
    out
}

/// `μ_n = ε2^{-n}·½(δ_σ + δ_{σ⁻¹}) + (1 − ε2^{-n})·½(δ_τ + δ_{τ⁻¹})`.
fn level_measure(n: usize, epsilon: &Q, tau: &GroupElement, sigma: &GroupElement) -> BTreeMap<GroupElement, Q> {
    let w = epsilon * pow2_inv(n as u32);
    let half = q(1, 2);
    let mut m: BTreeMap<GroupElement, Q> = BTreeMap::new();
    for (g, c) in [
        (sigma.clone(), &w * &half),
        (sigma.inv(), &w * &half),
        (tau.clone(), (one() - &w) * &half),
        (tau.inv(), (one() - &w) * &half),
    ] {
        *m.entry(g).or_insert_with(zero) += c;
    }
    m
}

fn mixture(
    p: &[Q],
    epsilon: &Q,
    taus: &[GroupElement],
    sigmas: &[GroupElement],
) -> (BTreeMap<GroupElement, Q>, Vec<usize>) {
    let mut total: BTreeMap<GroupElement, Q> = BTreeMap::new();
    let mut sizes = Vec::new();
    for (i, (t, s)) in taus.iter().zip(sigmas).enumerate() {
        for (g, c) in level_measure(i + 1, epsilon, t, s) {
            *total.entry(g).or_insert_with(zero) += &p[i] * c;
        }
        sizes.push(total.len());
    }
    (total, sizes)
}

fn level_weights(dist: &LevelDistribution, depth: usize) -> Result<(Vec<Q>, Q), ConstructionError> {
    let raw: Vec<Q> = match dist {
        LevelDistribution::Geometric => (1..=depth).map(|n| pow2_inv(n as u32)).collect(),
        LevelDistribution::Table(t) => {
            if t.len() != depth {
                return Err(ConstructionError::InvalidDistribution(format!(
                    "table has {} entries for depth {depth}",
                    t.len()
                )));
            }
            t.clone()
        }
    };
    if raw.iter().any(|x| !x.is_positive()) {
        return Err(ConstructionError::InvalidDistribution(
            "weights must be positive on every level up to the depth".into(),
        ));
    }
    let sum: Q = raw.iter().fold(zero(), |acc, x| acc + x);
    if sum > one() {
        return Err(ConstructionError::InvalidDistribution("weights sum above 1".into()));
    }
    let truncated = one() - &sum;
    Ok((raw.into_iter().map(|x| x / &sum).collect(), truncated))
}

fn sigma_at(group: &GroupHandle, enumeration: &Enumeration, index: usize) -> Result<GroupElement, ConstructionError> {
    match enumeration {
        Enumeration::BallOrder => BallWalker::new(group)
            .map(|(g, _)| g)
            .filter(|g| !g.is_identity())
            .nth(index)
            .ok_or_else(|| {
                ConstructionError::InvalidArgument(format!(
                    "group has fewer than {} nontrivial elements",
                    index + 1
                ))
            }),
        Enumeration::Explicit(v) => {
            let g = v.get(index).cloned().ok_or_else(|| {
                ConstructionError::InvalidArgument(format!("enumeration has no entry {index}"))
            })?;
            if !group.contains(&g) {
                return Err(GroupError::ForeignElement(format!("{g}")).into());
            }
            Ok(g)
        }
    }
}

/// First element in shortlex order that avoids `avoid` and is super-switching for `switch`.
fn find_tau(
    group: &GroupHandle,
    switch: &Set,
    avoid: &Set,
    radius: usize,
    cap: usize,
    level: usize,
) -> Result<GroupElement, ConstructionError> {
    for (visited, (g, r)) in BallWalker::new(group).enumerate() {
        if r > radius {
            break;
        }
        if visited >= cap {
            return Err(ConstructionError::ResourceCap { what: "search candidates", cap });
        }
        if !avoid.contains(&g) && is_super_switching(&g, switch) {
            return Ok(g);
        }
    }
    Err(ConstructionError::SearchExhausted { level })
}

/// Builds `τ_n, σ_n` for `n ≤ depth`, the mixture `Σ p(n) μ_n`, and a certificate.
pub fn build_nonliouville_measure(
    group: &GroupHandle,
    config: &ConstructionConfig,
) -> Result<NonLiouvilleCertificate, ConstructionError> {
    if !(config.epsilon.is_positive() && config.epsilon < q(1, 8)) {
        return Err(ConstructionError::InvalidEpsilon(crate::rational::fmt_q(&config.epsilon)));
    }
    if config.depth == 0 {
        return Err(ConstructionError::InvalidArgument("depth must be at least 1".into()));
    }
    if config.identity_levels == 0 {
        return Err(ConstructionError::InvalidArgument(
            "at least one identity level is required".into(),
        ));
    }
    let (p, truncated_mass) = level_weights(&config.distribution, config.depth)?;
    let e = group.identity();
    let tau_base = group
        .generators()
        .first()
        .cloned()
        .ok_or_else(|| ConstructionError::InvalidArgument("group has no nontrivial element".into()))?;

    let mut checks = Vec::new();
    match is_icc_up_to_budget(group, config.icc_radius, config.icc_budget)? {
        IccStatus::IccUpToBudget => checks.push(format!(
            "icc up to radius {} and class budget {} (advisory)",
            config.icc_radius, config.icc_budget
        )),
        IccStatus::NotIcc(w) => checks.push(format!("not icc: {w} has a finite conjugacy class (advisory)")),
    }

    let mut taus: Vec<GroupElement> = Vec::new();
    let mut sigmas: Vec<GroupElement> = Vec::new();
    let mut sizes: Vec<(Option<usize>, Option<usize>)> = Vec::new();
    for n in 1..=config.depth {
        if n <= config.identity_levels {
            taus.push(e.clone());
            sigmas.push(e.clone());
            sizes.push((None, None));
            continue;
        }
        let m = n - 1;
        let c_prev = &level_sets(&tau_base, &taus, &sigmas)[m - 1].2;
        let switch = power_set(&e, c_prev, 2 * m + 1, config.power_cap)?;
        let avoid = power_set(&e, c_prev, 8 * m + 1, config.power_cap)?;
        let tau = find_tau(group, &switch, &avoid, config.search_radius, config.power_cap, n)?;
        checks.push(format!(
            "level {n}: tau = {tau} is super-switching for (C_{m})^{} ({} elements) and avoids (C_{m})^{} ({} elements)",
            2 * m + 1,
            switch.len(),
            8 * m + 1,
            avoid.len()
        ));
        taus.push(tau);
        sigmas.push(sigma_at(group, &config.enumeration, n - config.identity_levels - 1)?);
        sizes.push((Some(switch.len()), Some(avoid.len())));
    }

    let sets = level_sets(&tau_base, &taus, &sigmas);
    let levels: Vec<SwitchSets> = sets
        .into_iter()
        .enumerate()
        .map(|(i, (a, b, c))| SwitchSets {
            n: i + 1,
            tau: taus[i].clone(),
            sigma: sigmas[i].clone(),
            a,
            b,
            c,
            switch_power_size: sizes[i].0,
            avoid_power_size: sizes[i].1,
        })
        .collect();
    let (measure, support_sizes) = mixture(&p, &config.epsilon, &taus, &sigmas);
    checks.push(format!(
        "measure: {} atoms, symmetric, total 1 after removing truncated mass {}",
        measure.len(),
        crate::rational::fmt_q(&truncated_mass)
    ));
    Ok(NonLiouvilleCertificate {
        group: group.clone(),
        epsilon: config.epsilon.clone(),
        identity_levels: config.identity_levels,
        tau_base,
        p,
        truncated_mass,
        levels,
        measure,
        support_sizes,
        power_cap: config.power_cap,
        checks,
    })
}

/// A condition re-checked by [`verify_certificate`], in the order they are checked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Check {
    EpsilonRange,
    LevelDistribution,
    Symmetry,
    Normalization,
    IdentityConvention { level: usize },
    SuperSwitching { level: usize },
    Avoidance { level: usize },
    LevelSets { level: usize },
    SupportGrowth { level: usize },
    MeasureConsistency,
    /// A power set could not be materialized within the certificate's cap.
    PowerSetCap { level: usize },
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Check::EpsilonRange => write!(f, "epsilon range"),
            Check::LevelDistribution => write!(f, "level distribution"),
            Check::Symmetry => write!(f, "symmetry"),
            Check::Normalization => write!(f, "normalization"),
            Check::IdentityConvention { level } => write!(f, "identity convention at level {level}"),
            Check::SuperSwitching { level } => write!(f, "super-switching at level {level}"),
            Check::Avoidance { level } => write!(f, "avoidance at level {level}"),
            Check::LevelSets { level } => write!(f, "switch sets at level {level}"),
            Check::SupportGrowth { level } => write!(f, "support growth at level {level}"),
            Check::MeasureConsistency => write!(f, "measure consistency"),
            Check::PowerSetCap { level } => write!(f, "power set cap at level {level}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Invalid(Check),
}

/// Re-derives every condition from the certificate's `τ_n`, `σ_n`, `ε` and `p`
/// alone; stored sets and support sizes are compared, never trusted.
pub fn verify_certificate(cert: &NonLiouvilleCertificate) -> Validity {
    use Validity::Invalid;
    let depth = cert.levels.len();
    if !(cert.epsilon.is_positive() && cert.epsilon < q(1, 8)) {
        return Invalid(Check::EpsilonRange);
    }
    let p_sum: Q = cert.p.iter().fold(zero(), |acc, x| acc + x);
    if depth == 0
        || cert.p.len() != depth
        || cert.p.iter().any(|x| !x.is_positive())
        || !p_sum.is_one()
        || cert.truncated_mass.is_negative()
        || cert.truncated_mass >= one()
    {
        return Invalid(Check::LevelDistribution);
    }
    if cert.measure.iter().any(|(g, m)| cert.mass(&g.inv()) != *m) {
        return Invalid(Check::Symmetry);
    }
    let total: Q = cert.measure.values().fold(zero(), |acc, x| acc + x);
    if !total.is_one() || cert.measure.values().any(|m| !m.is_positive()) {
        return Invalid(Check::Normalization);
    }

    let e = cert.group.identity();
    let taus: Vec<GroupElement> = cert.levels.iter().map(|l| l.tau.clone()).collect();
    let sigmas: Vec<GroupElement> = cert.levels.iter().map(|l| l.sigma.clone()).collect();
    let sets = level_sets(&cert.tau_base, &taus, &sigmas);
    for (i, level) in cert.levels.iter().enumerate() {
        let n = i + 1;
        if level.n != n {
            return Invalid(Check::LevelSets { level: n });
        }
        if n <= cert.identity_levels {
            if !level.tau.is_identity() || !level.sigma.is_identity() {
                return Invalid(Check::IdentityConvention { level: n });
            }
        } else {
            let m = n - 1;
            let c_prev = &sets[m - 1].2;
            let Ok(switch) = power_set(&e, c_prev, 2 * m + 1, cert.power_cap) else {
                return Invalid(Check::PowerSetCap { level: n });
            };
            if !is_super_switching(&level.tau, &switch) {
                return Invalid(Check::SuperSwitching { level: n });
            }
            drop(switch);
            let Ok(avoid) = power_set(&e, c_prev, 8 * m + 1, cert.power_cap) else {
                return Invalid(Check::PowerSetCap { level: n });
            };
            if avoid.contains(&level.tau) {
                return Invalid(Check::Avoidance { level: n });
            }
        }
        let (a, b, c) = &sets[i];
        if level.a != *a || level.b != *b || level.c != *c {
            return Invalid(Check::LevelSets { level: n });
        }
    }
    let (expected, sizes) = mixture(&cert.p, &cert.epsilon, &taus, &sigmas);
    for (i, w) in sizes.windows(2).enumerate() {
        let n = i + 2;
        if n > cert.identity_levels && w[1] <= w[0] {
            return Invalid(Check::SupportGrowth { level: n });
        }
    }
    let union: alloc::collections::BTreeSet<&GroupElement> = sets.iter().flat_map(|s| s.0.iter()).collect();
    if expected != cert.measure
        || sizes != cert.support_sizes
        || cert.measure.keys().any(|g| !union.contains(g))
    {
        return Invalid(Check::MeasureConsistency);
    }
    Validity::Valid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{ball, Lamps, Perm};

    fn lamp(pos: &[i32], shift: i32) -> GroupElement {
        GroupElement::Lamplighter { lamps: Lamps::from_positions(pos.iter().copied()), shift }
    }

    fn e_of(g: &GroupHandle) -> GroupElement {
        g.identity()
    }

    fn tr(i: u16, j: u16) -> GroupElement {
        GroupElement::Perm(Perm::transposition(i, j))
    }

    #[test]
    fn transposition_switches_off_its_neighbour() {
        let g = GroupHandle::finitary_sym(6);
        // (1 2) and (1 3) in 1-based cycle notation.
        let found = super_switching_search(&g, &[tr(0, 1)], 2).unwrap();
        assert!(found.contains(&tr(0, 2)));
        assert!(!found.contains(&tr(0, 1)));
    }

    #[test]
    fn shift_switches_a_lamp() {
        let g = GroupHandle::lamplighter();
        let found = super_switching_search(&g, &[lamp(&[0], 0)], 1).unwrap();
        assert!(found.contains(&lamp(&[], 1)));
    }

    #[test]
    fn empty_set_is_switched_by_everything() {
        let g = GroupHandle::heisenberg();
        assert_eq!(super_switching_search(&g, &[], 2).unwrap(), ball(&g, 2).unwrap());
    }

    #[test]
    fn power_sets_are_nested_and_capped() {
        let g = GroupHandle::lamplighter();
        let e = g.identity();
        let c = [e.clone(), lamp(&[], 1), lamp(&[], -1), lamp(&[0], 0)];
        let sizes: Vec<usize> = (0..6).map(|k| power_set(&e, &c, k, 1_000).unwrap().len()).collect();
        for k in 0..6 {
            assert_eq!(sizes[k], ball(&g, k).unwrap().len());
        }
        assert!(matches!(power_set(&e, &c, 20, 100), Err(ConstructionError::ResourceCap { .. })));
        // Without the identity, C^2 of {t, t⁻¹} is {t², e, t⁻²}.
        assert_eq!(power_set(&e, &c[1..3], 2, 100).unwrap().len(), 3);
    }

    #[test]
    fn integers_exhaust_at_first_free_level() {
        let g = GroupHandle::integers();
        let cfg = ConstructionConfig { search_radius: 30, ..Default::default() };
        assert_eq!(
            build_nonliouville_measure(&g, &cfg).unwrap_err(),
            ConstructionError::SearchExhausted { level: 3 }
        );
    }

    #[test]
    fn epsilon_out_of_range_is_refused() {
        let g = GroupHandle::finitary_sym(8);
        let cfg = ConstructionConfig { epsilon: q(1, 8), ..Default::default() };
        assert!(matches!(build_nonliouville_measure(&g, &cfg), Err(ConstructionError::InvalidEpsilon(_))));
    }

    #[test]
    fn finitary_certificate_and_mutations() {
        let g = GroupHandle::finitary_sym(12);
        let cert = build_nonliouville_measure(&g, &ConstructionConfig::default()).unwrap();
        assert_eq!(cert.levels[2].tau, tr(0, 2));
        assert_eq!(verify_certificate(&cert), Validity::Valid);
        let total: Q = cert.measure.values().fold(zero(), |a, b| a + b);
        assert!(total.is_one());
        assert_eq!(cert.truncated_mass, pow2_inv(4));

        let mut bad = cert.clone();
        bad.levels[3].tau = bad.levels[2].tau.clone();
        assert_eq!(verify_certificate(&bad), Validity::Invalid(Check::SuperSwitching { level: 4 }));

        let mut bad = cert.clone();
        bad.epsilon = q(1, 4);
        assert_eq!(verify_certificate(&bad), Validity::Invalid(Check::EpsilonRange));

        let mut bad = cert.clone();
        let three_cycle = GroupElement::Perm(Perm::from_images(&[1, 2, 0]).unwrap());
        let shift = q(1, 1000);
        *bad.measure.get_mut(&e_of(&g)).unwrap() -= &shift;
        bad.measure.insert(three_cycle, shift);
        assert_eq!(verify_certificate(&bad), Validity::Invalid(Check::Symmetry));

        let mut bad = cert.clone();
        bad.levels[1].tau = tr(0, 1);
        assert_eq!(verify_certificate(&bad), Validity::Invalid(Check::IdentityConvention { level: 2 }));
    }
}
