//! Seeded corpus of finite-fiber groupoids with random invariant operators.
//!
//! Every fiber is finite, so the exact machinery (harmonic spaces, absorbing
//! chains, martingale checks) runs to completion on each instance. The same
//! spec and seed always yield the same corpus.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::groupoids::{perm_action, uniform_weights, Arrow, Cocycle, GroupoidHandle, Iso};
use crate::groups::{GroupElement, GroupHandle};
use crate::markov::{make_operator, FiberMeasure, MarkovError, MarkovOperator};
use crate::rational::{qi, Q};

/// Largest fiber the generator will attach a full-support measure to.
const FIBER_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSpec {
    pub seed: u64,
    /// Random finite equivalence relations with full-support operators.
    pub relations: usize,
    /// Bundles of small finite groups.
    pub bundles: usize,
    /// Finite groups acting on a few points.
    pub transformations: usize,
    /// Twisted products of a finite group with a finite relation.
    pub semidirects: usize,
    pub min_orbit: usize,
    pub max_orbit: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            seed: 20_240_229,
            relations: 100,
            bundles: 16,
            transformations: 16,
            semidirects: 16,
            min_orbit: 2,
            max_orbit: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum InstanceFamily {
    Relation,
    Bundle,
    Transformation,
    Semidirect,
}

impl InstanceFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            InstanceFamily::Relation => "relation",
            InstanceFamily::Bundle => "bundle",
            InstanceFamily::Transformation => "transformation",
            InstanceFamily::Semidirect => "semidirect",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusInstance {
    pub name: String,
    pub family: InstanceFamily,
    pub operator: MarkovOperator,
}

fn random_weight<R: Rng>(rng: &mut R) -> Q {
    qi(rng.random_range(1..=9))
}

fn normalize(atoms: Vec<(Arrow, Q)>) -> BTreeMap<Arrow, Q> {
    let total: Q = atoms.iter().map(|(_, w)| w).sum();
    let mut out = BTreeMap::new();
    for (a, w) in atoms {
        *out.entry(a).or_insert_with(|| qi(0)) += w / &total;
    }
    out
}

/// One measure per unit: full support on `G^x` when `full`, otherwise a
/// random nonempty subset of it.
fn random_operator<R: Rng>(g: &GroupoidHandle, full: bool, rng: &mut R) -> Result<MarkovOperator, MarkovError> {
    let mut ms = Vec::with_capacity(g.num_units());
    for x in 0..g.num_units() {
        let mut fiber = g
            .fiber_all(x, FIBER_CAP)
            .ok_or(MarkovError::InfiniteFiber(x))?;
        if !full {
            fiber.shuffle(rng);
            let k = rng.random_range(1..=fiber.len().min(3));
            fiber.truncate(k);
        }
        let atoms = fiber.into_iter().map(|a| (a, random_weight(rng))).collect();
        ms.push(FiberMeasure::new(x, normalize(atoms)));
    }
    make_operator(g, ms)
}

/// Measures charging only arrows whose source is the next unit around each
/// block, so every walk returns to its starting unit after exactly the block length.
fn cyclic_operator<R: Rng>(g: &GroupoidHandle, rng: &mut R) -> Result<MarkovOperator, MarkovError> {
    let mut next = alloc::vec![0; g.num_units()];
    for block in g.blocks() {
        for (i, &x) in block.iter().enumerate() {
            next[x] = block[(i + 1) % block.len()];
        }
    }
    let mut ms = Vec::with_capacity(g.num_units());
    for x in 0..g.num_units() {
        let fiber = g.fiber_all(x, FIBER_CAP).ok_or(MarkovError::InfiniteFiber(x))?;
        let atoms = fiber
            .into_iter()
            .filter(|a| a.source == next[x])
            .map(|a| (a, random_weight(rng)))
            .collect();
        ms.push(FiberMeasure::new(x, normalize(atoms)));
    }
    make_operator(g, ms)
}

fn random_blocks<R: Rng>(spec: &CorpusSpec, rng: &mut R) -> Vec<Vec<usize>> {
    let count = rng.random_range(1..=2);
    let mut blocks = Vec::new();
    let mut next = 0;
    for _ in 0..count {
        let size = rng.random_range(spec.min_orbit..=spec.max_orbit);
        blocks.push((next..next + size).collect());
        next += size;
    }
    blocks
}

fn small_group<R: Rng>(rng: &mut R) -> GroupHandle {
    match rng.random_range(0..4) {
        0 => GroupHandle::symmetric(3).expect("S3 fits the table cap"),
        k => GroupHandle::cyclic(k as u16 + 1),
    }
}

/// `δ_(a,b) = conj(c_a c_b⁻¹)`: a coboundary, so the chain rule holds.
fn inner_cocycle<R: Rng>(group: &GroupHandle, blocks: &[Vec<usize>], rng: &mut R) -> Cocycle {
    let elements = group.table_elements().expect("finite table");
    let n: usize = blocks.iter().map(|b| b.len()).sum();
    let c: Vec<GroupElement> = (0..n).map(|_| elements[rng.random_range(0..elements.len())].clone()).collect();
    let mut cocycle = Cocycle::default();
    for block in blocks {
        for &a in block {
            for &b in block {
                let k = c[a].mul(&c[b].inv());
                if k.is_identity() {
                    continue;
                }
                let images = group.generators().iter().map(|s| s.conj_by(&k)).collect();
                cocycle.map.insert((a, b), Iso::Images(images));
            }
        }
    }
    cocycle
}

pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<CorpusInstance>, MarkovError> {
    if spec.min_orbit == 0 || spec.min_orbit > spec.max_orbit {
        return Err(MarkovError::InvalidArgument(format!(
            "orbit sizes {}..={} are empty",
            spec.min_orbit, spec.max_orbit
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::new();

    for i in 0..spec.relations {
        let blocks = random_blocks(spec, &mut rng);
        let n = blocks.iter().map(|b| b.len()).sum();
        let g = GroupoidHandle::finite_relation(&blocks, uniform_weights(n))?;
        out.push(CorpusInstance {
            name: format!("relation-{i}"),
            family: InstanceFamily::Relation,
            operator: random_operator(&g, true, &mut rng)?,
        });
    }

    for i in 0..spec.bundles {
        let units = rng.random_range(1..=3);
        let groups = (0..units).map(|_| small_group(&mut rng)).collect();
        let g = GroupoidHandle::group_bundle(groups, uniform_weights(units))?;
        let full = rng.random_bool(0.5);
        out.push(CorpusInstance {
            name: format!("bundle-{i}"),
            family: InstanceFamily::Bundle,
            operator: random_operator(&g, full, &mut rng)?,
        });
    }

    for i in 0..spec.transformations {
        let (group, n, action) = if rng.random_bool(0.5) {
            let s3 = GroupHandle::symmetric(3).expect("S3 fits the table cap");
            let action = s3.generators().iter().map(|s| perm_action(s, 3)).collect();
            (s3, 3, action)
        } else {
            let n = rng.random_range(2..=6);
            let z = GroupHandle::cyclic(n as u16);
            let action = z.generators().iter().map(|s| perm_action(s, n)).collect();
            (z, n, action)
        };
        let g = GroupoidHandle::transformation(&group, action, uniform_weights(n))?;
        let mut mu = BTreeMap::new();
        let elements = group.table_elements().expect("finite table");
        let k = rng.random_range(1..=elements.len().min(3));
        let mut picks: Vec<&GroupElement> = elements.iter().collect();
        picks.shuffle(&mut rng);
        for s in picks.into_iter().take(k) {
            mu.insert(s.clone(), random_weight(&mut rng));
        }
        let total: Q = mu.values().sum();
        for w in mu.values_mut() {
            *w /= &total;
        }
        out.push(CorpusInstance {
            name: format!("transformation-{i}"),
            family: InstanceFamily::Transformation,
            operator: MarkovOperator::from_group_measure(&g, &mu)?,
        });
    }

    for i in 0..spec.semidirects {
        let group = if rng.random_bool(0.5) {
            GroupHandle::symmetric(3).expect("S3 fits the table cap")
        } else {
            GroupHandle::cyclic(2)
        };
        let size = rng.random_range(2..=3);
        let blocks = alloc::vec![(0..size).collect::<Vec<_>>()];
        let cocycle = inner_cocycle(&group, &blocks, &mut rng);
        let g = GroupoidHandle::semidirect(alloc::vec![group; size], &blocks, cocycle, uniform_weights(size))?;
        let operator = if i % 2 == 0 {
            cyclic_operator(&g, &mut rng)?
        } else {
            random_operator(&g, rng.random_bool(0.5), &mut rng)?
        };
        out.push(CorpusInstance {
            name: format!("semidirect-{i}"),
            family: InstanceFamily::Semidirect,
            operator,
        });
    }
    Ok(out)
}
