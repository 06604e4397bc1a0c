//! JSON file formats. Rationals are `"p/q"` strings and group elements use
//! the textual normal forms of the core crate, so files round-trip exactly.

use std::collections::BTreeMap;
use std::path::Path;

use choquet_core::construction::{NonLiouvilleCertificate, SwitchSets};
use choquet_core::groupoids::{uniform_weights, Arrow, Cocycle, GroupoidHandle, GroupoidKind, Iso};
use choquet_core::groups::{parse_element, Family, GroupElement, GroupHandle, Perm};
use choquet_core::markov::{make_operator, FiberMeasure, MarkovOperator};
use choquet_core::rational::{fmt_q, parse_q, Q};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A group, tagged by `"family"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GroupSpec {
    Trivial,
    #[serde(rename = "Zd")]
    Zd { rank: usize },
    DihedralInf,
    Heisenberg,
    Lamplighter,
    FinitarySym { support: u16 },
    /// Permutations of `{0, .., degree-1}` given by their images.
    FiniteTable { degree: usize, generators: Vec<Vec<u16>> },
    Cyclic { n: u16 },
    Symmetric { n: u16 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CocycleEntry {
    pub target_unit: usize,
    pub source_unit: usize,
    /// Images of the generators of the source unit's group.
    pub images: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupoidSpec {
    FiniteRelation {
        blocks: Vec<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<String>>,
    },
    Transformation {
        group: GroupSpec,
        /// One permutation of the units per generator, in generator order.
        action: Vec<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<String>>,
    },
    GroupBundle {
        groups: Vec<GroupSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<String>>,
    },
    ConstantBundle {
        group: GroupSpec,
        units: usize,
    },
    Semidirect {
        groups: Vec<GroupSpec>,
        blocks: Vec<Vec<usize>>,
        #[serde(default)]
        cocycle: Vec<CocycleEntry>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<String>>,
    },
    CountableFullRelation {
        prefix: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub target: usize,
    pub source: usize,
    pub payload: String,
    pub mass: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    /// A step measure on the acting group (or common fiber group), element → mass.
    GroupMeasure { mu: BTreeMap<String, String> },
    /// Explicit `d_xP`, one list of atoms per unit.
    Measures { units: Vec<Vec<AtomSpec>> },
}

/// An input file: a groupoid, optionally an operator on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub groupoid: GroupoidSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

pub fn rational(s: &str) -> Result<Q, CliError> {
    parse_q(s).map_err(|e| invalid(e.to_string()))
}

fn weights(w: &Option<Vec<String>>, n: usize) -> Result<Vec<Q>, CliError> {
    match w {
        None => Ok(uniform_weights(n)),
        Some(v) => v.iter().map(|s| rational(s)).collect(),
    }
}

pub fn build_group(spec: &GroupSpec) -> Result<GroupHandle, CliError> {
    let g = match spec {
        GroupSpec::Trivial => GroupHandle::trivial(),
        GroupSpec::Zd { rank } => GroupHandle::lattice(*rank),
        GroupSpec::DihedralInf => GroupHandle::dihedral_inf(),
        GroupSpec::Heisenberg => GroupHandle::heisenberg(),
        GroupSpec::Lamplighter => GroupHandle::lamplighter(),
        GroupSpec::FinitarySym { support } => GroupHandle::finitary_sym(*support),
        GroupSpec::Cyclic { n } => GroupHandle::cyclic(*n),
        GroupSpec::Symmetric { n } => GroupHandle::symmetric(*n)?,
        GroupSpec::FiniteTable { degree, generators } => {
            let perms = generators
                .iter()
                .map(|images| Perm::from_images(images).ok_or_else(|| invalid(format!("{images:?} is not a permutation"))))
                .collect::<Result<Vec<_>, _>>()?;
            GroupHandle::finite_table(*degree, &perms)?
        }
    };
    Ok(g)
}

/// The description that rebuilds `g` with the same generator order.
pub fn group_spec_of(g: &GroupHandle) -> GroupSpec {
    match g.family() {
        Family::Trivial => GroupSpec::Trivial,
        Family::Lattice { rank } => GroupSpec::Zd { rank: *rank },
        Family::DihedralInf => GroupSpec::DihedralInf,
        Family::Heisenberg => GroupSpec::Heisenberg,
        Family::Lamplighter => GroupSpec::Lamplighter,
        Family::FinitarySym { support } => GroupSpec::FinitarySym { support: *support },
        Family::FiniteTable { degree } => GroupSpec::FiniteTable {
            degree: *degree,
            generators: g
                .generators()
                .iter()
                .map(|s| match s {
                    GroupElement::Perm(p) => p.images(*degree),
                    other => unreachable!("finite tables hold permutations, found {other}"),
                })
                .collect(),
        },
    }
}

pub fn element(group: &GroupHandle, text: &str) -> Result<GroupElement, CliError> {
    let g = parse_element(group, text)?;
    if !group.contains(&g) {
        return Err(invalid(format!("{text:?} is not an element of {group}")));
    }
    Ok(g)
}

pub fn build_groupoid(spec: &GroupoidSpec) -> Result<GroupoidHandle, CliError> {
    let g = match spec {
        GroupoidSpec::FiniteRelation { blocks, weights: w } => {
            let n = blocks.iter().map(|b| b.len()).sum();
            GroupoidHandle::finite_relation(blocks, weights(w, n)?)?
        }
        GroupoidSpec::Transformation { group, action, weights: w } => {
            let n = action.first().map_or(0, |a| a.len());
            GroupoidHandle::transformation(&build_group(group)?, action.clone(), weights(w, n)?)?
        }
        GroupoidSpec::GroupBundle { groups, weights: w } => {
            let gs = groups.iter().map(build_group).collect::<Result<Vec<_>, _>>()?;
            let n = gs.len();
            GroupoidHandle::group_bundle(gs, weights(w, n)?)?
        }
        GroupoidSpec::ConstantBundle { group, units } => {
            GroupoidHandle::constant_bundle(&build_group(group)?, uniform_weights(*units))?
        }
        GroupoidSpec::Semidirect { groups, blocks, cocycle, weights: w } => {
            let gs = groups.iter().map(build_group).collect::<Result<Vec<_>, _>>()?;
            let mut c = Cocycle::default();
            for e in cocycle {
                if e.source_unit >= gs.len() {
                    return Err(invalid(format!("unknown unit {}", e.source_unit)));
                }
                let target = gs.get(e.target_unit).ok_or_else(|| invalid(format!("unknown unit {}", e.target_unit)))?;
                let images = e.images.iter().map(|s| element(target, s)).collect::<Result<Vec<_>, _>>()?;
                c.map.insert((e.target_unit, e.source_unit), Iso::Images(images));
            }
            let n = gs.len();
            GroupoidHandle::semidirect(gs, blocks, c, weights(w, n)?)?
        }
        GroupoidSpec::CountableFullRelation { prefix } => GroupoidHandle::countable_full_relation(*prefix),
    };
    Ok(g)
}

pub fn build_operator(g: &GroupoidHandle, spec: &OperatorSpec) -> Result<MarkovOperator, CliError> {
    match spec {
        OperatorSpec::GroupMeasure { mu } => {
            let group = match g.kind() {
                GroupoidKind::Transformation { group, .. } => group.clone(),
                _ => g.group_at(0).clone(),
            };
            let mut m = BTreeMap::new();
            for (k, v) in mu {
                m.insert(element(&group, k)?, rational(v)?);
            }
            Ok(MarkovOperator::from_group_measure(g, &m)?)
        }
        OperatorSpec::Measures { units } => {
            let mut ms = Vec::with_capacity(units.len());
            for (x, atoms) in units.iter().enumerate() {
                let mut map = BTreeMap::new();
                for a in atoms {
                    if a.source >= g.num_units() {
                        return Err(invalid(format!("atom source {} is not a unit", a.source)));
                    }
                    let payload = element(g.group_at(a.source), &a.payload)?;
                    *map.entry(Arrow::new(a.target, a.source, payload)).or_insert_with(|| Q::from_integer(0.into())) +=
                        rational(&a.mass)?;
                }
                ms.push(FiberMeasure::new(x, map));
            }
            Ok(make_operator(g, ms)?)
        }
    }
}

pub fn groupoid_spec_of(g: &GroupoidHandle) -> GroupoidSpec {
    let w = Some(g.weights().iter().map(fmt_q).collect());
    match g.kind() {
        GroupoidKind::FiniteRelation => GroupoidSpec::FiniteRelation { blocks: g.blocks().to_vec(), weights: w },
        GroupoidKind::Transformation { group, action } => {
            GroupoidSpec::Transformation { group: group_spec_of(group), action: action.clone(), weights: w }
        }
        GroupoidKind::GroupBundle { groups } => {
            GroupoidSpec::GroupBundle { groups: groups.iter().map(group_spec_of).collect(), weights: w }
        }
        GroupoidKind::Semidirect { groups, cocycle } => GroupoidSpec::Semidirect {
            groups: groups.iter().map(group_spec_of).collect(),
            blocks: g.blocks().to_vec(),
            cocycle: cocycle
                .map
                .iter()
                .filter_map(|(&(a, b), iso)| match iso {
                    Iso::Identity => None,
                    Iso::Images(images) => Some(CocycleEntry {
                        target_unit: a,
                        source_unit: b,
                        images: images.iter().map(|s| s.to_string()).collect(),
                    }),
                })
                .collect(),
            weights: w,
        },
        GroupoidKind::CountableFullRelation { prefix } => GroupoidSpec::CountableFullRelation { prefix: *prefix },
    }
}

pub fn operator_spec_of(p: &MarkovOperator) -> OperatorSpec {
    OperatorSpec::Measures {
        units: p
            .measures()
            .iter()
            .map(|m| {
                m.atoms
                    .iter()
                    .map(|(a, q)| AtomSpec {
                        target: a.target,
                        source: a.source,
                        payload: a.payload.to_string(),
                        mass: fmt_q(q),
                    })
                    .collect()
            })
            .collect(),
    }
}

/// Parses JSON, reporting the file, line and column of any error.
pub fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_json(path, &text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub n: usize,
    pub tau: String,
    pub sigma: String,
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub c: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_power_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avoid_power_size: Option<usize>,
}

/// On-disk form of a [`NonLiouvilleCertificate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub group: GroupSpec,
    pub epsilon: String,
    pub identity_levels: usize,
    pub tau_base: String,
    pub p: Vec<String>,
    pub truncated_mass: String,
    pub levels: Vec<LevelRecord>,
    pub measure: BTreeMap<String, String>,
    pub support_sizes: Vec<usize>,
    pub power_cap: usize,
    pub checks: Vec<String>,
}

fn strings(v: &[GroupElement]) -> Vec<String> {
    v.iter().map(|g| g.to_string()).collect()
}

impl CertificateFile {
    pub fn from_certificate(c: &NonLiouvilleCertificate, group: GroupSpec) -> Self {
        CertificateFile {
            group,
            epsilon: fmt_q(&c.epsilon),
            identity_levels: c.identity_levels,
            tau_base: c.tau_base.to_string(),
            p: c.p.iter().map(fmt_q).collect(),
            truncated_mass: fmt_q(&c.truncated_mass),
            levels: c
                .levels
                .iter()
                .map(|l| LevelRecord {
                    n: l.n,
                    tau: l.tau.to_string(),
                    sigma: l.sigma.to_string(),
                    a: strings(&l.a),
                    b: strings(&l.b),
                    c: strings(&l.c),
                    switch_power_size: l.switch_power_size,
                    avoid_power_size: l.avoid_power_size,
                })
                .collect(),
            measure: c.measure.iter().map(|(g, m)| (g.to_string(), fmt_q(m))).collect(),
            support_sizes: c.support_sizes.clone(),
            power_cap: c.power_cap,
            checks: c.checks.clone(),
        }
    }

    pub fn to_certificate(&self) -> Result<NonLiouvilleCertificate, CliError> {
        let group = build_group(&self.group)?;
        let el = |s: &String| element(&group, s);
        let els = |v: &[String]| v.iter().map(el).collect::<Result<Vec<_>, _>>();
        let mut measure = BTreeMap::new();
        for (k, v) in &self.measure {
            measure.insert(el(k)?, rational(v)?);
        }
        Ok(NonLiouvilleCertificate {
            epsilon: rational(&self.epsilon)?,
            identity_levels: self.identity_levels,
            tau_base: el(&self.tau_base)?,
            p: self.p.iter().map(|s| rational(s)).collect::<Result<_, _>>()?,
            truncated_mass: rational(&self.truncated_mass)?,
            levels: self
                .levels
                .iter()
                .map(|l| {
                    Ok(SwitchSets {
                        n: l.n,
                        tau: el(&l.tau)?,
                        sigma: el(&l.sigma)?,
                        a: els(&l.a)?,
                        b: els(&l.b)?,
                        c: els(&l.c)?,
                        switch_power_size: l.switch_power_size,
                        avoid_power_size: l.avoid_power_size,
                    })
                })
                .collect::<Result<_, CliError>>()?,
            measure,
            support_sizes: self.support_sizes.clone(),
            power_cap: self.power_cap,
            checks: self.checks.clone(),
            group,
        })
    }
}
