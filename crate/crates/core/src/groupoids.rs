//! Discrete groupoids over atomic unit spaces.
//!
//! Four concrete kinds are supported: finite equivalence relations, group
//! bundles, transformation groupoids `Γ ⋉ X` of finite actions, and
//! semidirect products `Γ ⋊_δ R` of a bundle with a relation along a
//! cocycle of isomorphisms. A countable full relation with geometric
//! weights stands in for the type I_∞ relation with one infinite orbit.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Zero};

use crate::groups::{BallWalker, Family, GroupError, GroupElement, GroupHandle, Perm, Word};
use crate::rational::{pow2_inv, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroupoidError {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid unit weights: {0}")]
    InvalidWeights(String),
    #[error("inconsistent action: {0}")]
    ActionInconsistent(String),
    #[error("cocycle violation: {0}")]
    CocycleViolation(String),
    #[error("arrows not composable: source {source_unit} of the left arrow differs from target {target_unit} of the right")]
    NotComposable { source_unit: usize, target_unit: usize },
    #[error("arrow does not belong to the groupoid: {0}")]
    ForeignArrow(String),
    #[error("unknown unit {0}")]
    UnknownUnit(usize),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// A morphism `source → target` carrying an isotropy coordinate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arrow {
    pub target: usize,
    pub source: usize,
    pub payload: GroupElement,
}

impl Arrow {
    pub fn new(target: usize, source: usize, payload: GroupElement) -> Self {
        Arrow { target, source, payload }
    }

    pub fn is_isotropy(&self) -> bool {
        self.source == self.target
    }
}

impl fmt::Display for Arrow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}; {}<-{})", self.payload, self.target, self.source)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Unit {
    pub id: usize,
    pub weight: Q,
}

/// A group isomorphism `Γ_b → Γ_a`, given by the images of the generators of `Γ_b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Iso {
    Identity,
    Images(Vec<GroupElement>),
}

/// The family `δ_(a,b) : Γ_b → Γ_a`, keyed by `(a, b)`. Missing entries are identities.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cocycle {
    pub map: BTreeMap<(usize, usize), Iso>,
}

#[derive(Clone, Debug)]
pub enum GroupoidKind {
    FiniteRelation,
    /// Generator `i` of `group` acts on the units by `action[i]`.
    Transformation { group: GroupHandle, action: Vec<Vec<usize>> },
    GroupBundle { groups: Vec<GroupHandle> },
    Semidirect { groups: Vec<GroupHandle>, cocycle: Cocycle },
    /// Full relation on ℕ with weights `2^{-(i+1)}`; only `prefix` units are materialized.
    CountableFullRelation { prefix: usize },
}

impl GroupoidKind {
    pub fn tag(&self) -> &'static str {
        match self {
            GroupoidKind::FiniteRelation => "finite_relation",
            GroupoidKind::Transformation { .. } => "transformation",
            GroupoidKind::GroupBundle { .. } => "group_bundle",
            GroupoidKind::Semidirect { .. } => "semidirect",
            GroupoidKind::CountableFullRelation { .. } => "countable_full_relation",
        }
    }
}

#[derive(Debug)]
struct GroupoidData {
    kind: GroupoidKind,
    weights: Vec<Q>,
    /// Orbit partition of the materialized units.
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
    trivial: GroupHandle,
}

/// Immutable, cheaply clonable groupoid.
#[derive(Clone, Debug)]
pub struct GroupoidHandle(Arc<GroupoidData>);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Orbit {
    Finite(BTreeSet<usize>),
    ExceedsUnitSpace,
}

fn check_weights(weights: &[Q]) -> Result<(), GroupoidError> {
    if weights.is_empty() {
        return Err(GroupoidError::InvalidWeights("empty unit space".into()));
    }
    if weights.iter().any(|w| *w <= Q::zero()) {
        return Err(GroupoidError::InvalidWeights("weights must be positive".into()));
    }
    let total: Q = weights.iter().sum();
    if !total.is_one() {
        return Err(GroupoidError::InvalidWeights(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

pub fn uniform_weights(n: usize) -> Vec<Q> {
    (0..n).map(|_| Q::new(1.into(), (n as i64).into())).collect()
}

fn check_partition(blocks: &[Vec<usize>], n: usize) -> Result<Vec<usize>, GroupoidError> {
    let mut block_of = alloc::vec![usize::MAX; n];
    for (b, block) in blocks.iter().enumerate() {
        if block.is_empty() {
            return Err(GroupoidError::InvalidPartition(format!("block {b} is empty")));
        }
        for &u in block {
            if u >= n {
                return Err(GroupoidError::InvalidPartition(format!("unit {u} out of range 0..{n}")));
            }
            if block_of[u] != usize::MAX {
                return Err(GroupoidError::InvalidPartition(format!("unit {u} appears twice")));
            }
            block_of[u] = b;
        }
    }
    if let Some(u) = block_of.iter().position(|&b| b == usize::MAX) {
        return Err(GroupoidError::InvalidPartition(format!("unit {u} is in no block")));
    }
    Ok(block_of)
}

fn sorted_blocks(blocks: &[Vec<usize>]) -> Vec<Vec<usize>> {
    blocks
        .iter()
        .map(|b| {
            let mut b = b.clone();
            b.sort_unstable();
            b
        })
        .collect()
}

fn perm_compose(p: &[usize], q: &[usize]) -> Vec<usize> {
    q.iter().map(|&i| p[i]).collect()
}

fn perm_inverse(p: &[usize]) -> Vec<usize> {
    let mut inv = alloc::vec![0; p.len()];
    for (i, &j) in p.iter().enumerate() {
        inv[j] = i;
    }
    inv
}

fn is_perm(p: &[usize], n: usize) -> bool {
    if p.len() != n {
        return false;
    }
    let mut seen = alloc::vec![false; n];
    p.iter().all(|&i| i < n && !core::mem::replace(&mut seen[i], true))
}

/// Checks that the generator permutations define an action of `group`,
/// using the defining relations of its family (or, for finite tables, the
/// whole multiplication structure).
fn check_action(group: &GroupHandle, action: &[Vec<usize>], n: usize) -> Result<(), String> {
    let gens = group.generators();
    if action.len() != gens.len() {
        return Err(format!("{} generators but {} permutations", gens.len(), action.len()));
    }
    for (i, p) in action.iter().enumerate() {
        if !is_perm(p, n) {
            return Err(format!("image of generator {} is not a permutation of 0..{n}", gens[i]));
        }
    }
    let idx = |g: &GroupElement| gens.iter().position(|x| x == g).expect("symmetric generating set");
    for (i, g) in gens.iter().enumerate() {
        let j = idx(&g.inv());
        if action[j] != perm_inverse(&action[i]) {
            return Err(format!("generators {} and {} do not act inversely", gens[i], gens[j]));
        }
    }
    let id: Vec<usize> = (0..n).collect();
    let commute = |a: &[usize], b: &[usize]| perm_compose(a, b) == perm_compose(b, a);
    match group.family() {
        Family::Trivial => {}
        Family::Lattice { .. } => {
            for a in action {
                for b in action {
                    if !commute(a, b) {
                        return Err("lattice generators must act commutingly".into());
                    }
                }
            }
        }
        Family::DihedralInf => {
            let (t, s) = (&action[0], &action[2]);
            if perm_compose(s, s) != id {
                return Err("s must act as an involution".into());
            }
            if perm_compose(s, &perm_compose(t, s)) != action[1] {
                return Err("s t s must act as t^-1".into());
            }
        }
        Family::Heisenberg => {
            let (x, xi, y, yi) = (&action[0], &action[1], &action[2], &action[3]);
            let z = perm_compose(x, &perm_compose(y, &perm_compose(xi, yi)));
            if !commute(&z, x) || !commute(&z, y) {
                return Err("the commutator [x,y] must act centrally".into());
            }
        }
        Family::Lamplighter => {
            let (t, ti, a) = (&action[0], &action[1], &action[2]);
            if perm_compose(a, a) != id {
                return Err("the lamp generator must act as an involution".into());
            }
            // a commutes with every t^k a t^-k; k ranges over one period of t
            let mut tk = t.clone();
            let mut tki = ti.clone();
            while tk != id {
                let conj = perm_compose(&tk, &perm_compose(a, &tki));
                if !commute(a, &conj) {
                    return Err("lamps at different positions must act commutingly".into());
                }
                tk = perm_compose(&tk, t);
                tki = perm_compose(&tki, ti);
            }
        }
        Family::FinitarySym { .. } => {
            // presentation by all transpositions: t² = 1 and t u t = (t u t)
            for (i, a) in gens.iter().enumerate() {
                for (j, b) in gens.iter().enumerate() {
                    let c = b.conj_by(a);
                    let k = idx(&c);
                    if perm_compose(&action[i], &perm_compose(&action[j], &action[i])) != action[k] {
                        return Err(format!("conjugation relation fails for {a} and {b}"));
                    }
                }
            }
        }
        Family::FiniteTable { .. } => {
            // extend along the Cayley graph; a clash means the map is not a homomorphism
            let mut image: BTreeMap<GroupElement, Vec<usize>> = BTreeMap::new();
            image.insert(group.identity(), id);
            let mut queue = VecDeque::from([group.identity()]);
            while let Some(g) = queue.pop_front() {
                let pg = image[&g].clone();
                for (i, s) in gens.iter().enumerate() {
                    let h = g.mul(s);
                    let ph = perm_compose(&pg, &action[i]);
                    match image.get(&h) {
                        Some(prev) if *prev != ph => {
                            return Err(format!("element {h} would act in two different ways"))
                        }
                        Some(_) => {}
                        None => {
                            image.insert(h.clone(), ph);
                            queue.push_back(h);
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn orbits_of_action(action: &[Vec<usize>], n: usize) -> Vec<Vec<usize>> {
    let mut seen = alloc::vec![false; n];
    let mut blocks = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut block = alloc::vec![start];
        let mut i = 0;
        while i < block.len() {
            let u = block[i];
            for p in action {
                if !seen[p[u]] {
                    seen[p[u]] = true;
                    block.push(p[u]);
                }
            }
            i += 1;
        }
        block.sort_unstable();
        blocks.push(block);
    }
    blocks
}

impl GroupoidHandle {
    fn from_parts(kind: GroupoidKind, weights: Vec<Q>, blocks: Vec<Vec<usize>>) -> Self {
        let mut block_of = alloc::vec![0; weights.len()];
        for (b, block) in blocks.iter().enumerate() {
            for &u in block {
                block_of[u] = b;
            }
        }
        GroupoidHandle(Arc::new(GroupoidData {
            kind,
            weights,
            blocks,
            block_of,
            trivial: GroupHandle::trivial(),
        }))
    }

    /// All ordered pairs within each block; trivial isotropy.
    pub fn finite_relation(blocks: &[Vec<usize>], weights: Vec<Q>) -> Result<Self, GroupoidError> {
        check_weights(&weights)?;
        check_partition(blocks, weights.len())?;
        Ok(Self::from_parts(GroupoidKind::FiniteRelation, weights, sorted_blocks(blocks)))
    }

    /// `Γ ⋉ X` for an action of `group` on `{0, .., weights.len()-1}`, given
    /// as one permutation per generator (in the group's generator order).
    pub fn transformation(
        group: &GroupHandle,
        action: Vec<Vec<usize>>,
        weights: Vec<Q>,
    ) -> Result<Self, GroupoidError> {
        check_weights(&weights)?;
        let n = weights.len();
        check_action(group, &action, n).map_err(GroupoidError::ActionInconsistent)?;
        let blocks = orbits_of_action(&action, n);
        Ok(Self::from_parts(
            GroupoidKind::Transformation { group: group.clone(), action },
            weights,
            blocks,
        ))
    }

    /// Convenience constructor: generator `s` sends unit `x` to `act(s, x)`.
    pub fn transformation_from_fn(
        group: &GroupHandle,
        weights: Vec<Q>,
        act: impl Fn(&GroupElement, usize) -> usize,
    ) -> Result<Self, GroupoidError> {
        let n = weights.len();
        let action = group
            .generators()
            .iter()
            .map(|s| (0..n).map(|x| act(s, x)).collect())
            .collect();
        Self::transformation(group, action, weights)
    }

    pub fn group_bundle(groups: Vec<GroupHandle>, weights: Vec<Q>) -> Result<Self, GroupoidError> {
        check_weights(&weights)?;
        if groups.len() != weights.len() {
            return Err(GroupoidError::InvalidPartition(format!(
                "{} fiber groups for {} units",
                groups.len(),
                weights.len()
            )));
        }
        let blocks = (0..weights.len()).map(|u| alloc::vec![u]).collect();
        Ok(Self::from_parts(GroupoidKind::GroupBundle { groups }, weights, blocks))
    }

    /// The same group over every unit.
    pub fn constant_bundle(group: &GroupHandle, weights: Vec<Q>) -> Result<Self, GroupoidError> {
        Self::group_bundle(alloc::vec![group.clone(); weights.len()], weights)
    }

    pub fn semidirect(
        groups: Vec<GroupHandle>,
        blocks: &[Vec<usize>],
        cocycle: Cocycle,
        weights: Vec<Q>,
    ) -> Result<Self, GroupoidError> {
        check_weights(&weights)?;
        if groups.len() != weights.len() {
            return Err(GroupoidError::InvalidPartition(format!(
                "{} fiber groups for {} units",
                groups.len(),
                weights.len()
            )));
        }
        let block_of = check_partition(blocks, weights.len())?;
        for &(a, b) in cocycle.map.keys() {
            if a >= weights.len() || b >= weights.len() || block_of[a] != block_of[b] {
                return Err(GroupoidError::CocycleViolation(format!(
                    "δ_({a},{b}) given for a pair outside the relation"
                )));
            }
        }
        let g = Self::from_parts(
            GroupoidKind::Semidirect { groups, cocycle },
            weights,
            sorted_blocks(blocks),
        );
        g.verify_cocycle()?;
        Ok(g)
    }

    /// `ℕ` with the full relation and weights `2^{-(i+1)}`; `prefix` units are materialized.
    pub fn countable_full_relation(prefix: usize) -> Self {
        let prefix = prefix.max(1);
        let weights = (0..prefix).map(|i| pow2_inv(i as u32 + 1)).collect();
        Self::from_parts(
            GroupoidKind::CountableFullRelation { prefix },
            weights,
            alloc::vec![(0..prefix).collect()],
        )
    }

    pub fn kind(&self) -> &GroupoidKind {
        &self.0.kind
    }

    /// Number of materialized units.
    pub fn num_units(&self) -> usize {
        self.0.weights.len()
    }

    pub fn units(&self) -> Vec<Unit> {
        self.0
            .weights
            .iter()
            .enumerate()
            .map(|(id, w)| Unit { id, weight: w.clone() })
            .collect()
    }

    pub fn weights(&self) -> &[Q] {
        &self.0.weights
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.0.blocks
    }

    fn is_countable(&self) -> bool {
        matches!(self.0.kind, GroupoidKind::CountableFullRelation { .. })
    }

    fn check_unit(&self, x: usize) -> Result<(), GroupoidError> {
        if x < self.num_units() || self.is_countable() {
            Ok(())
        } else {
            Err(GroupoidError::UnknownUnit(x))
        }
    }

    /// The group in which payloads of arrows with source `x` live.
    pub fn group_at(&self, x: usize) -> &GroupHandle {
        match &self.0.kind {
            GroupoidKind::FiniteRelation | GroupoidKind::CountableFullRelation { .. } => &self.0.trivial,
            GroupoidKind::Transformation { group, .. } => group,
            GroupoidKind::GroupBundle { groups } | GroupoidKind::Semidirect { groups, .. } => &groups[x],
        }
    }

    pub fn unit_arrow(&self, x: usize) -> Arrow {
        Arrow::new(x, x, self.group_at(x).identity())
    }

    /// `g · x` for a transformation groupoid; `x` otherwise.
    pub fn act(&self, g: &GroupElement, x: usize) -> Result<usize, GroupoidError> {
        match &self.0.kind {
            GroupoidKind::Transformation { group, action } => {
                let word = group.factor(g)?;
                Ok(word.iter().rev().fold(x, |y, &s| action[s as usize][y]))
            }
            _ => Ok(x),
        }
    }

    /// Applies `δ_(a,b) : Γ_b → Γ_a` (semidirect products only; identity otherwise).
    pub fn delta(&self, a: usize, b: usize, g: &GroupElement) -> Result<GroupElement, GroupoidError> {
        let GroupoidKind::Semidirect { groups, cocycle } = &self.0.kind else {
            return Ok(g.clone());
        };
        match cocycle.map.get(&(a, b)) {
            None | Some(Iso::Identity) => Ok(g.clone()),
            Some(Iso::Images(images)) => {
                let word = groups[b].factor(g)?;
                Ok(word
                    .iter()
                    .fold(groups[a].identity(), |acc, &s| acc.mul(&images[s as usize])))
            }
        }
    }

    fn verify_cocycle(&self) -> Result<(), GroupoidError> {
        let GroupoidKind::Semidirect { groups, cocycle } = &self.0.kind else {
            return Ok(());
        };
        let violation = |s: String| GroupoidError::CocycleViolation(s);
        for block in &self.0.blocks {
            for &a in block {
                for &b in block {
                    match cocycle.map.get(&(a, b)) {
                        None | Some(Iso::Identity) => {
                            if groups[a] != groups[b] {
                                return Err(violation(format!(
                                    "δ_({a},{b}) defaults to the identity but the fiber groups differ"
                                )));
                            }
                        }
                        Some(Iso::Images(images)) => {
                            if images.len() != groups[b].generators().len() {
                                return Err(violation(format!(
                                    "δ_({a},{b}) needs {} generator images",
                                    groups[b].generators().len()
                                )));
                            }
                            if let Some(bad) = images.iter().find(|g| !groups[a].contains(g)) {
                                return Err(violation(format!("δ_({a},{b}) image {bad} is not in Γ_{a}")));
                            }
                        }
                    }
                }
            }
            for &x in block {
                let gens = groups[x].generators();
                for s in gens {
                    if self.delta(x, x, s)? != *s {
                        return Err(violation(format!("δ_({x},{x}) moves generator {s}")));
                    }
                    for &y in block {
                        let sy = self.delta(y, x, s)?;
                        for &z in block {
                            if self.delta(z, y, &sy)? != self.delta(z, x, s)? {
                                return Err(violation(format!(
                                    "δ_({z},{y})∘δ_({y},{x}) ≠ δ_({z},{x}) on generator {s}"
                                )));
                            }
                        }
                        // images of inverse generators must be inverse images
                        if self.delta(y, x, &s.inv())? != sy.inv() {
                            return Err(violation(format!("δ_({y},{x}) is not compatible with inverses at {s}")));
                        }
                    }
                }
                if let Some(elements) = groups[x].table_elements() {
                    for &y in block {
                        for g in elements {
                            for s in gens {
                                let lhs = self.delta(y, x, &g.mul(s))?;
                                let rhs = self.delta(y, x, g)?.mul(&self.delta(y, x, s)?);
                                if lhs != rhs {
                                    return Err(violation(format!("δ_({y},{x}) is not a homomorphism at ({g}, {s})")));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether `a` is an arrow of this groupoid.
    pub fn contains(&self, a: &Arrow) -> bool {
        if self.check_unit(a.source).is_err() || self.check_unit(a.target).is_err() {
            return false;
        }
        match &self.0.kind {
            GroupoidKind::FiniteRelation => {
                a.payload == GroupElement::Trivial && self.0.block_of[a.source] == self.0.block_of[a.target]
            }
            GroupoidKind::CountableFullRelation { .. } => a.payload == GroupElement::Trivial,
            GroupoidKind::GroupBundle { groups } => a.source == a.target && groups[a.source].contains(&a.payload),
            GroupoidKind::Semidirect { groups, .. } => {
                self.0.block_of[a.source] == self.0.block_of[a.target] && groups[a.source].contains(&a.payload)
            }
            GroupoidKind::Transformation { group, .. } => {
                group.contains(&a.payload) && self.act(&a.payload, a.source).ok() == Some(a.target)
            }
        }
    }

    /// `h ∘ g`, defined when `s(h) = t(g)`.
    pub fn compose(&self, h: &Arrow, g: &Arrow) -> Result<Arrow, GroupoidError> {
        if h.source != g.target {
            return Err(GroupoidError::NotComposable { source_unit: h.source, target_unit: g.target });
        }
        let payload = match &self.0.kind {
            GroupoidKind::FiniteRelation | GroupoidKind::CountableFullRelation { .. } => GroupElement::Trivial,
            GroupoidKind::GroupBundle { .. } | GroupoidKind::Transformation { .. } => h.payload.mul(&g.payload),
            GroupoidKind::Semidirect { .. } => self.delta(g.source, g.target, &h.payload)?.mul(&g.payload),
        };
        Ok(Arrow::new(h.target, g.source, payload))
    }

    pub fn invert(&self, g: &Arrow) -> Result<Arrow, GroupoidError> {
        let payload = match &self.0.kind {
            GroupoidKind::FiniteRelation | GroupoidKind::CountableFullRelation { .. } => GroupElement::Trivial,
            GroupoidKind::GroupBundle { .. } | GroupoidKind::Transformation { .. } => g.payload.inv(),
            GroupoidKind::Semidirect { .. } => self.delta(g.target, g.source, &g.payload.inv())?,
        };
        Ok(Arrow::new(g.source, g.target, payload))
    }

    /// `s(G^x)`.
    pub fn orbit_of(&self, x: usize) -> Result<Orbit, GroupoidError> {
        self.check_unit(x)?;
        if self.is_countable() {
            return Ok(Orbit::ExceedsUnitSpace);
        }
        Ok(Orbit::Finite(self.0.blocks[self.0.block_of[x]].iter().copied().collect()))
    }

    /// Size of `G^x`, or `None` when it is infinite.
    pub fn fiber_size(&self, x: usize) -> Option<usize> {
        let orbit = match self.orbit_of(x).ok()? {
            Orbit::Finite(o) => o,
            Orbit::ExceedsUnitSpace => return None,
        };
        match &self.0.kind {
            GroupoidKind::FiniteRelation => Some(orbit.len()),
            GroupoidKind::CountableFullRelation { .. } => None,
            GroupoidKind::GroupBundle { groups } => groups[x].order().map(|n| n as usize),
            GroupoidKind::Semidirect { groups, .. } => orbit
                .iter()
                .map(|&y| groups[y].order().map(|n| n as usize))
                .sum(),
            GroupoidKind::Transformation { group, .. } => group.order().map(|n| n as usize),
        }
    }

    /// Deterministic enumeration of `G^x`: by payload word length, then
    /// lexicographically by word, then by source.
    pub fn fiber(&self, x: usize) -> Fiber<'_> {
        let inner = match &self.0.kind {
            _ if self.check_unit(x).is_err() => FiberInner::List(Vec::new().into_iter()),
            GroupoidKind::FiniteRelation => FiberInner::List(
                self.0.blocks[self.0.block_of[x]]
                    .iter()
                    .map(|&y| Arrow::new(x, y, GroupElement::Trivial))
                    .collect::<Vec<_>>()
                    .into_iter(),
            ),
            GroupoidKind::CountableFullRelation { .. } => FiberInner::Countable { next: 0, x },
            GroupoidKind::GroupBundle { groups } => FiberInner::Bundle { walker: BallWalker::new(&groups[x]), x },
            GroupoidKind::Transformation { group, .. } => {
                FiberInner::Transformation { walker: BallWalker::new(group), groupoid: self, x }
            }
            GroupoidKind::Semidirect { groups, .. } => {
                let walkers = self.0.blocks[self.0.block_of[x]]
                    .iter()
                    .map(|&y| {
                        let mut w = BallWalker::with_words(&groups[y]);
                        let peek = w.next_with_word();
                        (y, w, peek)
                    })
                    .collect();
                FiberInner::Merged { walkers, buffer: VecDeque::new(), radius: 0, x }
            }
        };
        Fiber { inner }
    }

    /// The first `budget` arrows of `G^x` in enumeration order.
    pub fn fiber_enumerate(&self, x: usize, budget: usize) -> Vec<Arrow> {
        self.fiber(x).take(budget).collect()
    }

    /// All of `G^x` if it has at most `cap` arrows.
    pub fn fiber_all(&self, x: usize, cap: usize) -> Option<Vec<Arrow>> {
        let n = self.fiber_size(x)?;
        (n <= cap).then(|| self.fiber(x).collect())
    }
}

impl fmt::Display for GroupoidHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.kind {
            GroupoidKind::FiniteRelation => write!(f, "finite relation with blocks {:?}", self.0.blocks),
            GroupoidKind::Transformation { group, .. } => {
                write!(f, "{group} ⋉ {{0..{}}}", self.num_units())
            }
            GroupoidKind::GroupBundle { groups } => {
                write!(f, "group bundle [")?;
                for (i, g) in groups.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{g}")?;
                }
                write!(f, "]")
            }
            GroupoidKind::Semidirect { groups, .. } => {
                write!(f, "semidirect product of {} over blocks {:?}", groups[0], self.0.blocks)
            }
            GroupoidKind::CountableFullRelation { prefix } => {
                write!(f, "full relation on N (prefix {prefix})")
            }
        }
    }
}

/// Lazy cursor over a target fiber `G^x`.
pub struct Fiber<'a> {
    inner: FiberInner<'a>,
}

enum FiberInner<'a> {
    List(alloc::vec::IntoIter<Arrow>),
    Countable {
        next: usize,
        x: usize,
    },
    Bundle {
        walker: BallWalker<'a>,
        x: usize,
    },
    Transformation {
        walker: BallWalker<'a>,
        groupoid: &'a GroupoidHandle,
        x: usize,
    },
    Merged {
        walkers: Vec<(usize, BallWalker<'a>, Option<(GroupElement, usize, Word)>)>,
        buffer: VecDeque<Arrow>,
        radius: usize,
        x: usize,
    },
}

impl Iterator for Fiber<'_> {
    type Item = Arrow;

    fn next(&mut self) -> Option<Arrow> {
        match &mut self.inner {
            FiberInner::List(it) => it.next(),
            FiberInner::Countable { next, x } => {
                let y = *next;
                *next += 1;
                Some(Arrow::new(*x, y, GroupElement::Trivial))
            }
            FiberInner::Bundle { walker, x } => walker.next().map(|(g, _)| Arrow::new(*x, *x, g)),
            FiberInner::Transformation { walker, groupoid, x } => {
                let (g, _) = walker.next()?;
                let source = groupoid.act(&g.inv(), *x).expect("ball elements factor");
                Some(Arrow::new(*x, source, g))
            }
            FiberInner::Merged { walkers, buffer, radius, x } => loop {
                if let Some(a) = buffer.pop_front() {
                    return Some(a);
                }
                if walkers.iter().all(|(_, _, peek)| peek.is_none()) {
                    return None;
                }
                let mut sphere: Vec<(Word, usize, GroupElement)> = Vec::new();
                for (y, walker, peek) in walkers.iter_mut() {
                    while peek.as_ref().is_some_and(|(_, r, _)| *r == *radius) {
                        let (g, _, w) = peek.take().expect("peeked");
                        sphere.push((w, *y, g));
                        *peek = walker.next_with_word();
                    }
                }
                sphere.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
                buffer.extend(sphere.into_iter().map(|(_, y, g)| Arrow::new(*x, y, g)));
                *radius += 1;
            },
        }
    }
}

/// Permutation of `{0, .., n-1}` given by a permutation group element.
pub fn perm_action(p: &GroupElement, n: usize) -> Vec<usize> {
    match p {
        GroupElement::Perm(p) => (0..n as u16).map(|i| p.apply(i) as usize).collect(),
        _ => (0..n).collect(),
    }
}

/// Cyclic rotation `x ↦ x + 1 mod n` as a ℤ-action, with the generator
/// order of [`GroupHandle::integers`].
pub fn rotation_action(n: usize) -> Vec<Vec<usize>> {
    alloc::vec![
        (0..n).map(|x| (x + 1) % n).collect(),
        (0..n).map(|x| (x + n - 1) % n).collect(),
    ]
}

/// Helper for tests and corpora: an explicit permutation as a group element.
pub fn perm_element(images: &[u16]) -> Option<GroupElement> {
    Perm::from_images(images).map(GroupElement::Perm)
}
