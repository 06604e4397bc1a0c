//! Invariant Markov operators on groupoids.
//!
//! An operator is stored as one measure `d_xP` per unit. The measure at an
//! arbitrary arrow is never stored: it is always `π_g = g · π_{s(g)}`, so
//! invariance holds by construction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::groupoids::{Arrow, GroupoidError, GroupoidHandle, GroupoidKind, Orbit};
use crate::groups::GroupElement;
use crate::rational::{pow, pow2_inv, to_f64, Q};

/// Default cap on the support of any exact distribution.
pub const SUPPORT_CAP: usize = 2_000_000;
/// Largest fiber handled by the exact absorbing-chain solver.
pub const EXACT_FIBER_CAP: usize = 4_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MarkovError {
    #[error("measure at unit {unit} sums to {sum}, not 1")]
    Normalization { unit: usize, sum: String },
    #[error("atom {arrow} of the measure at unit {unit} does not target that unit")]
    TargetMismatch { unit: usize, arrow: String },
    #[error("atom {arrow} at unit {unit} has non-positive mass")]
    NonPositive { unit: usize, arrow: String },
    #[error("expected one measure per unit, in unit order: {0}")]
    MissingUnit(String),
    #[error("resource cap exceeded: {what} above {cap}")]
    ResourceCap { what: &'static str, cap: usize },
    #[error("orbit of unit {0} is infinite")]
    InfiniteOrbit(usize),
    #[error("fiber at unit {0} is infinite or too large for an exact solve")]
    InfiniteFiber(usize),
    #[error("walk from unit {unit} is not certified to return: {detail}")]
    NonabsorbingWalk { unit: usize, detail: String },
    #[error("malformed path: {0}")]
    MalformedPath(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
}

/// A finitely supported probability measure `d_xP` on the fiber `G^x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberMeasure {
    pub unit: usize,
    pub atoms: BTreeMap<Arrow, Q>,
}

impl FiberMeasure {
    pub fn new(unit: usize, atoms: BTreeMap<Arrow, Q>) -> Self {
        FiberMeasure { unit, atoms }
    }

    pub fn dirac(arrow: Arrow) -> Self {
        let unit = arrow.target;
        FiberMeasure { unit, atoms: BTreeMap::from([(arrow, Q::one())]) }
    }

    pub fn total(&self) -> Q {
        self.atoms.values().sum()
    }

    pub fn mass(&self, a: &Arrow) -> Q {
        self.atoms.get(a).cloned().unwrap_or_else(Q::zero)
    }

    pub fn support(&self) -> BTreeSet<Arrow> {
        self.atoms.keys().cloned().collect()
    }
}

#[derive(Clone, Debug)]
pub struct MarkovOperator {
    groupoid: GroupoidHandle,
    per_unit: Vec<FiberMeasure>,
}

pub fn make_operator(g: &GroupoidHandle, measures: Vec<FiberMeasure>) -> Result<MarkovOperator, MarkovError> {
    if let GroupoidKind::CountableFullRelation { .. } = g.kind() {
        return Err(MarkovError::InvalidArgument(
            "operators on countable unit spaces are not materialized".into(),
        ));
    }
    if measures.len() != g.num_units() {
        return Err(MarkovError::MissingUnit(format!(
            "{} measures for {} units",
            measures.len(),
            g.num_units()
        )));
    }
    for (x, m) in measures.iter().enumerate() {
        if m.unit != x {
            return Err(MarkovError::MissingUnit(format!("measure {x} is labelled unit {}", m.unit)));
        }
        for (a, p) in &m.atoms {
            if a.target != x {
                return Err(MarkovError::TargetMismatch { unit: x, arrow: format!("{a}") });
            }
            if *p <= Q::zero() {
                return Err(MarkovError::NonPositive { unit: x, arrow: format!("{a}") });
            }
            if !g.contains(a) {
                return Err(GroupoidError::ForeignArrow(format!("{a}")).into());
            }
        }
        let sum = m.total();
        if !sum.is_one() {
            return Err(MarkovError::Normalization { unit: x, sum: format!("{sum}") });
        }
    }
    Ok(MarkovOperator { groupoid: g.clone(), per_unit: measures })
}

impl MarkovOperator {
    pub fn groupoid(&self) -> &GroupoidHandle {
        &self.groupoid
    }

    pub fn measure(&self, x: usize) -> &FiberMeasure {
        &self.per_unit[x]
    }

    pub fn measures(&self) -> &[FiberMeasure] {
        &self.per_unit
    }

    /// `d_xP = δ_x` everywhere.
    pub fn identity(g: &GroupoidHandle) -> Result<Self, MarkovError> {
        let ms = (0..g.num_units()).map(|x| FiberMeasure::dirac(g.unit_arrow(x))).collect();
        make_operator(g, ms)
    }

    /// The operator induced by a step measure `μ` on the acting group of a
    /// transformation groupoid (or on the common fiber group of a bundle):
    /// `d_yP(s, s⁻¹·y) = μ(s)`.
    pub fn from_group_measure(g: &GroupoidHandle, mu: &BTreeMap<GroupElement, Q>) -> Result<Self, MarkovError> {
        let mut ms = Vec::with_capacity(g.num_units());
        for y in 0..g.num_units() {
            let mut atoms = BTreeMap::new();
            for (s, p) in mu {
                let source = g.act(&s.inv(), y)?;
                atoms.insert(Arrow::new(y, source, s.clone()), p.clone());
            }
            ms.push(FiberMeasure::new(y, atoms));
        }
        make_operator(g, ms)
    }

    /// `π_g`: the law of `g ∘ h` with `h ~ d_{s(g)}P`.
    pub fn step_from<'a>(&'a self, g: &'a Arrow) -> impl Iterator<Item = (Arrow, &'a Q)> + 'a {
        self.per_unit[g.source]
            .atoms
            .iter()
            .map(move |(h, p)| (self.groupoid.compose(g, h).expect("fiber arrows compose"), p))
    }

    /// One step of the fiber chain applied to a distribution on `G^x`.
    pub fn push_forward(&self, dist: &BTreeMap<Arrow, Q>, cap: usize) -> Result<BTreeMap<Arrow, Q>, MarkovError> {
        let mut next: BTreeMap<Arrow, Q> = BTreeMap::new();
        for (g, m) in dist {
            for (gh, p) in self.step_from(g) {
                *next.entry(gh).or_insert_with(Q::zero) += m * p;
                if next.len() > cap {
                    return Err(MarkovError::ResourceCap { what: "distribution support", cap });
                }
            }
        }
        Ok(next)
    }

    /// `(P_x f)(g) = Σ_h d_{s(g)}P(h) f(g h)`.
    pub fn apply(&self, g: &Arrow, f: impl Fn(&Arrow) -> Q) -> Q {
        self.step_from(g).map(|(gh, p)| p * f(&gh)).sum()
    }
}

/// `d_xP^n` exactly.
pub fn convolve(p: &MarkovOperator, x: usize, n: usize) -> Result<FiberMeasure, MarkovError> {
    if n == 0 {
        return Err(MarkovError::InvalidArgument("convolution power must be at least 1".into()));
    }
    let mut dist = BTreeMap::from([(p.groupoid.unit_arrow(x), Q::one())]);
    for _ in 0..n {
        dist = p.push_forward(&dist, SUPPORT_CAP)?;
    }
    Ok(FiberMeasure::new(x, dist))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Nondegeneracy {
    /// Every probed arrow lies in `supp P^m` for some `m ≤ n`, and `n` is minimal.
    CoveredBall { n: usize },
    /// First probed arrow (in fiber order) not reached within the budget.
    Uncovered(Arrow),
}

pub fn nondegenerate_check(
    p: &MarkovOperator,
    x: usize,
    budget_n: usize,
    budget_fiber: usize,
) -> Result<Nondegeneracy, MarkovError> {
    if budget_n == 0 || budget_fiber == 0 {
        return Err(MarkovError::InvalidArgument("budgets must be at least 1".into()));
    }
    let window = p.groupoid.fiber_enumerate(x, budget_fiber);
    let mut missing: BTreeSet<Arrow> = window.iter().cloned().collect();
    let mut frontier: BTreeSet<Arrow> = BTreeSet::from([p.groupoid.unit_arrow(x)]);
    for n in 1..=budget_n {
        let mut next = BTreeSet::new();
        for g in &frontier {
            for (gh, _) in p.step_from(g) {
                next.insert(gh);
            }
        }
        if next.len() > SUPPORT_CAP {
            return Err(MarkovError::ResourceCap { what: "support", cap: SUPPORT_CAP });
        }
        for a in &next {
            missing.remove(a);
        }
        if missing.is_empty() {
            return Ok(Nondegeneracy::CoveredBall { n });
        }
        frontier = next;
    }
    let first = window.into_iter().find(|a| missing.contains(a)).expect("missing arrow is in the window");
    Ok(Nondegeneracy::Uncovered(first))
}

/// `P̃ = Σ_{i=1}^{depth} 2^{-i} P^i / (1 − 2^{-depth})`.
pub fn regularize(p: &MarkovOperator, depth: usize) -> Result<MarkovOperator, MarkovError> {
    if depth == 0 {
        return Err(MarkovError::InvalidArgument("depth must be at least 1".into()));
    }
    let norm = Q::one() - pow2_inv(depth as u32);
    let mut ms = Vec::with_capacity(p.per_unit.len());
    for x in 0..p.per_unit.len() {
        let mut atoms: BTreeMap<Arrow, Q> = BTreeMap::new();
        let mut dist = BTreeMap::from([(p.groupoid.unit_arrow(x), Q::one())]);
        for i in 1..=depth {
            dist = p.push_forward(&dist, SUPPORT_CAP)?;
            let w = pow2_inv(i as u32) / &norm;
            for (a, m) in &dist {
                *atoms.entry(a.clone()).or_insert_with(Q::zero) += &w * m;
            }
        }
        ms.push(FiberMeasure::new(x, atoms));
    }
    make_operator(&p.groupoid, ms)
}

/// A trajectory `g₀, g₁, …` in `G^x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Path {
    pub start: usize,
    pub steps: Vec<Arrow>,
}

/// `μ_x(Z(g₀..g_i)) = δ_{x,g₀} Π_j π_{s(g_j)}(g_j⁻¹ g_{j+1})`.
pub fn cylinder_prob(p: &MarkovOperator, path: &Path) -> Result<Q, MarkovError> {
    let x = path.start;
    if x >= p.per_unit.len() {
        return Err(MarkovError::MalformedPath(format!("unknown start unit {x}")));
    }
    let Some(first) = path.steps.first() else {
        return Err(MarkovError::MalformedPath("empty path".into()));
    };
    if let Some(a) = path.steps.iter().find(|a| a.target != x || !p.groupoid.contains(a)) {
        return Err(MarkovError::MalformedPath(format!("{a} is not an arrow of G^{x}")));
    }
    if *first != p.groupoid.unit_arrow(x) {
        return Ok(Q::zero());
    }
    let mut prob = Q::one();
    for w in path.steps.windows(2) {
        let inc = p.groupoid.compose(&p.groupoid.invert(&w[0])?, &w[1])?;
        prob *= p.per_unit[w[0].source].mass(&inc);
        if prob.is_zero() {
            break;
        }
    }
    Ok(prob)
}

/// Floating-point sampling tables; used only by stochastic routines.
pub struct StepSampler {
    tables: Vec<Vec<(Arrow, f64)>>,
}

impl StepSampler {
    pub fn new(p: &MarkovOperator) -> Self {
        let tables = p
            .per_unit
            .iter()
            .map(|m| {
                let mut acc = 0.0;
                m.atoms
                    .iter()
                    .map(|(a, q)| {
                        acc += to_f64(q);
                        (a.clone(), acc)
                    })
                    .collect()
            })
            .collect();
        StepSampler { tables }
    }

    /// Draws an increment `h ~ d_xP`.
    pub fn draw<R: Rng>(&self, x: usize, rng: &mut R) -> &Arrow {
        let table = &self.tables[x];
        let u: f64 = rng.random::<f64>() * table.last().map_or(1.0, |e| e.1);
        let i = table.partition_point(|(_, c)| *c <= u).min(table.len() - 1);
        &table[i].0
    }
}

/// The RNG stream of `worker` under `seed`.
pub fn worker_rng(seed: u64, worker: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker);
    rng
}

pub fn sample_path(p: &MarkovOperator, x: usize, length: usize, seed: u64) -> Path {
    let sampler = StepSampler::new(p);
    let mut rng = worker_rng(seed, 0);
    let mut steps = alloc::vec![p.groupoid.unit_arrow(x)];
    for _ in 0..length {
        let g = steps.last().expect("nonempty");
        let h = sampler.draw(g.source, &mut rng);
        let next = p.groupoid.compose(g, h).expect("fiber arrows compose");
        steps.push(next);
    }
    Path { start: x, steps }
}

fn finite_orbit(p: &MarkovOperator, x: usize) -> Result<BTreeSet<usize>, MarkovError> {
    match p.groupoid.orbit_of(x)? {
        Orbit::Finite(o) => Ok(o),
        Orbit::ExceedsUnitSpace => Err(MarkovError::InfiniteOrbit(x)),
    }
}

/// Transition kernel of the source process `s(X_i)`.
fn source_chain(p: &MarkovOperator) -> Vec<BTreeMap<usize, Q>> {
    p.per_unit
        .iter()
        .map(|m| {
            let mut row: BTreeMap<usize, Q> = BTreeMap::new();
            for (a, q) in &m.atoms {
                *row.entry(a.source).or_insert_with(Q::zero) += q;
            }
            row
        })
        .collect()
}

/// `α_k = max_{z ∈ s(G^x)} R_k(z)`, where `R_k(z)` is the probability that a
/// walk whose current source is `z` avoids source `x` at steps `1..=k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TailBound {
    pub unit: usize,
    pub k: usize,
    pub alpha_k: Q,
    pub avoid: BTreeMap<usize, Q>,
}

impl TailBound {
    /// The certified bound `μ_x(T > 2ⁿk) ≤ α_k^{n+1}`.
    pub fn bound(&self, n: u32) -> Q {
        pow(&self.alpha_k, n + 1)
    }

    /// Exact `μ_x(T > k)`.
    pub fn exact_tail(&self) -> &Q {
        &self.avoid[&self.unit]
    }
}

pub fn return_time_tail(p: &MarkovOperator, x: usize, k: usize) -> Result<TailBound, MarkovError> {
    if k == 0 {
        return Err(MarkovError::InvalidArgument("k must be at least 1".into()));
    }
    let orbit = finite_orbit(p, x)?;
    let chain = source_chain(p);
    let mut r: BTreeMap<usize, Q> = orbit.iter().map(|&z| (z, Q::one())).collect();
    for _ in 0..k {
        r = orbit
            .iter()
            .map(|&z| {
                let v = chain[z]
                    .iter()
                    .filter(|(&w, _)| w != x)
                    .map(|(w, q)| q * &r[w])
                    .sum();
                (z, v)
            })
            .collect();
    }
    let alpha_k = r.values().max().cloned().unwrap_or_else(Q::zero);
    Ok(TailBound { unit: x, k, alpha_k, avoid: r })
}

/// The best bound on `μ_x(T > horizon)` obtainable from `α_k^{n+1}` with `2ⁿk ≤ horizon`.
pub fn certified_tail_at(p: &MarkovOperator, x: usize, horizon: usize) -> Result<Q, MarkovError> {
    let mut best = Q::one();
    for k in 1..=horizon {
        let n = (horizon / k).ilog2();
        let b = return_time_tail(p, x, k)?.bound(n);
        if b < best {
            best = b;
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HittingMode {
    ExactFinite,
    Enumerated { horizon: usize },
    MonteCarlo { samples: u64, seed: u64, step_cap: usize, workers: u64 },
}

/// Law of `X_T` on the isotropy group `G_x^x`, by payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HittingMeasure {
    pub unit: usize,
    pub atoms: BTreeMap<GroupElement, Q>,
    /// Mass not yet absorbed: exact for `Enumerated`, empirical for `MonteCarlo`, zero for `ExactFinite`.
    pub unaccounted_mass: Q,
    /// For `Enumerated`: the return-time bound on `μ_x(T > horizon)`, which dominates `unaccounted_mass`.
    pub certified_bound: Option<Q>,
    pub method: HittingMode,
}

impl HittingMeasure {
    pub fn total(&self) -> Q {
        self.atoms.values().sum()
    }

    pub fn mass(&self, g: &GroupElement) -> Q {
        self.atoms.get(g).cloned().unwrap_or_else(Q::zero)
    }

    /// The isotropy arrow carrying payload `g`.
    pub fn arrow(&self, g: &GroupElement) -> Arrow {
        Arrow::new(self.unit, self.unit, g.clone())
    }
}

pub fn hitting_measure(p: &MarkovOperator, x: usize, mode: HittingMode) -> Result<HittingMeasure, MarkovError> {
    let orbit = finite_orbit(p, x)?;
    match mode {
        HittingMode::ExactFinite => hitting_exact(p, x),
        HittingMode::Enumerated { horizon } => {
            if horizon == 0 {
                return Err(MarkovError::InvalidArgument("horizon must be at least 1".into()));
            }
            let probe = horizon.max(orbit.len());
            if return_time_tail(p, x, probe)?.alpha_k.is_one() {
                return Err(MarkovError::NonabsorbingWalk {
                    unit: x,
                    detail: format!("α_k = 1 for every k ≤ {probe}"),
                });
            }
            let mut alive = BTreeMap::from([(p.groupoid.unit_arrow(x), Q::one())]);
            let mut atoms: BTreeMap<GroupElement, Q> = BTreeMap::new();
            for _ in 0..horizon {
                let next = p.push_forward(&alive, SUPPORT_CAP)?;
                alive = BTreeMap::new();
                for (a, m) in next {
                    if a.is_isotropy() {
                        *atoms.entry(a.payload).or_insert_with(Q::zero) += m;
                    } else {
                        alive.insert(a, m);
                    }
                }
            }
            let unaccounted_mass: Q = alive.values().sum();
            let bound = certified_tail_at(p, x, horizon)?;
            debug_assert!(unaccounted_mass <= bound);
            Ok(HittingMeasure {
                unit: x,
                atoms,
                unaccounted_mass,
                certified_bound: Some(bound),
                method: mode,
            })
        }
        HittingMode::MonteCarlo { samples, seed, step_cap, workers } => {
            if samples == 0 || workers == 0 || step_cap == 0 {
                return Err(MarkovError::InvalidArgument("samples, workers and step cap must be positive".into()));
            }
            let mut total = McCounts::default();
            for w in 0..workers {
                let n = samples / workers + u64::from(w < samples % workers);
                total.merge(monte_carlo_chunk(p, x, n, seed, w, step_cap));
            }
            Ok(total.into_measure(x, mode))
        }
    }
}

/// Absorbing-chain solve over the (finite) fiber.
fn hitting_exact(p: &MarkovOperator, x: usize) -> Result<HittingMeasure, MarkovError> {
    use crate::linalg::{solve, Matrix};

    if p.groupoid.fiber_all(x, EXACT_FIBER_CAP).is_none() {
        return Err(MarkovError::InfiniteFiber(x));
    }
    // transient states reachable from the first step without passing through isotropy
    let start = p.groupoid.unit_arrow(x);
    let mut transient: Vec<Arrow> = Vec::new();
    let mut index: BTreeMap<Arrow, usize> = BTreeMap::new();
    let mut absorbing: BTreeSet<GroupElement> = BTreeSet::new();
    let mut queue: Vec<Arrow> = alloc::vec![start.clone()];
    let mut expanded: BTreeSet<Arrow> = BTreeSet::new();
    while let Some(g) = queue.pop() {
        if !expanded.insert(g.clone()) {
            continue;
        }
        for (gh, _) in p.step_from(&g) {
            if gh.is_isotropy() {
                absorbing.insert(gh.payload);
            } else if !index.contains_key(&gh) {
                index.insert(gh.clone(), transient.len());
                transient.push(gh.clone());
                queue.push(gh);
            }
        }
    }
    let targets: Vec<GroupElement> = absorbing.into_iter().collect();
    let tpos: BTreeMap<&GroupElement, usize> = targets.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let n = transient.len();
    let mut a: Matrix = alloc::vec![alloc::vec![Q::zero(); n]; n];
    let mut b: Matrix = alloc::vec![alloc::vec![Q::zero(); targets.len()]; n];
    for (i, g) in transient.iter().enumerate() {
        a[i][i] += Q::one();
        for (gh, q) in p.step_from(g) {
            if gh.is_isotropy() {
                b[i][tpos[&gh.payload]] += q;
            } else {
                a[i][index[&gh]] -= q;
            }
        }
    }
    let sol = if n == 0 {
        Vec::new()
    } else {
        solve(&a, &b).ok_or_else(|| MarkovError::NonabsorbingWalk {
            unit: x,
            detail: "some reachable state never returns to the isotropy group".into(),
        })?
    };
    let mut atoms: BTreeMap<GroupElement, Q> = BTreeMap::new();
    for (gh, q) in p.step_from(&start) {
        if gh.is_isotropy() {
            *atoms.entry(gh.payload).or_insert_with(Q::zero) += q;
        } else {
            for (j, v) in sol[index[&gh]].iter().enumerate() {
                if !v.is_zero() {
                    *atoms.entry(targets[j].clone()).or_insert_with(Q::zero) += q * v;
                }
            }
        }
    }
    atoms.retain(|_, v| !v.is_zero());
    Ok(HittingMeasure {
        unit: x,
        atoms,
        unaccounted_mass: Q::zero(),
        certified_bound: None,
        method: HittingMode::ExactFinite,
    })
}

/// Raw Monte Carlo tallies; merge across workers, then normalize.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct McCounts {
    pub samples: u64,
    pub atoms: BTreeMap<GroupElement, u64>,
    pub unabsorbed: u64,
}

impl McCounts {
    pub fn merge(&mut self, other: McCounts) {
        self.samples += other.samples;
        self.unabsorbed += other.unabsorbed;
        for (g, c) in other.atoms {
            *self.atoms.entry(g).or_insert(0) += c;
        }
    }

    pub fn into_measure(self, x: usize, method: HittingMode) -> HittingMeasure {
        let n = self.samples.max(1) as i64;
        let frac = |c: u64| Q::new((c as i64).into(), n.into());
        HittingMeasure {
            unit: x,
            atoms: self.atoms.into_iter().map(|(g, c)| (g, frac(c))).collect(),
            unaccounted_mass: frac(self.unabsorbed),
            certified_bound: None,
            method,
        }
    }
}

/// `samples` independent walks from `x` on stream `worker` of `seed`, stopped at the return time.
pub fn monte_carlo_chunk(
    p: &MarkovOperator,
    x: usize,
    samples: u64,
    seed: u64,
    worker: u64,
    step_cap: usize,
) -> McCounts {
    let sampler = StepSampler::new(p);
    let mut rng = worker_rng(seed, worker);
    let mut counts = McCounts { samples, ..McCounts::default() };
    for _ in 0..samples {
        let mut g = p.groupoid.unit_arrow(x);
        let mut hit = false;
        for _ in 0..step_cap {
            let h = sampler.draw(g.source, &mut rng);
            g = p.groupoid.compose(&g, h).expect("fiber arrows compose");
            if g.is_isotropy() {
                hit = true;
                break;
            }
        }
        if hit {
            *counts.atoms.entry(g.payload).or_insert(0) += 1;
        } else {
            counts.unabsorbed += 1;
        }
    }
    counts
}

/// Seeded samples of the return time `T`, capped at `cap` (a capped sample reads `cap + 1`).
pub fn return_time_samples(p: &MarkovOperator, x: usize, samples: u64, seed: u64, cap: usize) -> Vec<usize> {
    let chain: Vec<Vec<(usize, f64)>> = source_chain(p)
        .into_iter()
        .map(|row| {
            let mut acc = 0.0;
            row.into_iter()
                .map(|(z, q)| {
                    acc += to_f64(&q);
                    (z, acc)
                })
                .collect()
        })
        .collect();
    let mut rng = worker_rng(seed, 0);
    (0..samples)
        .map(|_| {
            let mut z = x;
            for t in 1..=cap {
                let row = &chain[z];
                let u: f64 = rng.random::<f64>() * row.last().map_or(1.0, |e| e.1);
                let i = row.partition_point(|(_, c)| *c <= u).min(row.len() - 1);
                z = row[i].0;
                if z == x {
                    return t;
                }
            }
            cap + 1
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoids::{rotation_action, uniform_weights};
    use crate::groups::GroupHandle;
    use crate::rational::q;

    fn pair() -> GroupoidHandle {
        GroupoidHandle::finite_relation(&[alloc::vec![0, 1]], uniform_weights(2)).unwrap()
    }

    fn arrow(t: usize, s: usize) -> Arrow {
        Arrow::new(t, s, GroupElement::Trivial)
    }

    fn measure(x: usize, atoms: &[((usize, usize), Q)]) -> FiberMeasure {
        FiberMeasure::new(x, atoms.iter().map(|((t, s), p)| (arrow(*t, *s), p.clone())).collect())
    }

    pub(crate) fn uniform_pair() -> MarkovOperator {
        let g = pair();
        make_operator(
            &g,
            alloc::vec![
                measure(0, &[((0, 0), q(1, 2)), ((0, 1), q(1, 2))]),
                measure(1, &[((1, 1), q(1, 2)), ((1, 0), q(1, 2))]),
            ],
        )
        .unwrap()
    }

    pub(crate) fn swap_walk() -> MarkovOperator {
        let g = GroupoidHandle::transformation(&GroupHandle::integers(), rotation_action(2), uniform_weights(2)).unwrap();
        let mu = BTreeMap::from([(GroupElement::int(1), q(1, 2)), (GroupElement::int(-1), q(1, 2))]);
        MarkovOperator::from_group_measure(&g, &mu).unwrap()
    }

    #[test]
    fn operator_validation() {
        let g = pair();
        let bad = make_operator(
            &g,
            alloc::vec![
                measure(0, &[((0, 0), q(9, 10))]),
                measure(1, &[((1, 1), q(1, 1))]),
            ],
        );
        assert!(matches!(bad, Err(MarkovError::Normalization { unit: 0, .. })));
        let mismatch = make_operator(
            &g,
            alloc::vec![measure(0, &[((1, 0), q(1, 1))]), measure(1, &[((1, 1), q(1, 1))])],
        );
        assert!(matches!(mismatch, Err(MarkovError::TargetMismatch { .. })));
        assert!(MarkovOperator::identity(&g).is_ok());
    }

    #[test]
    fn convolution_examples() {
        let p = uniform_pair();
        let c = convolve(&p, 0, 2).unwrap();
        assert_eq!(c.mass(&arrow(0, 0)), q(1, 2));
        assert_eq!(c.mass(&arrow(0, 1)), q(1, 2));
        assert_eq!(convolve(&p, 0, 1).unwrap(), *p.measure(0));
        let id = MarkovOperator::identity(&pair()).unwrap();
        assert_eq!(convolve(&id, 1, 5).unwrap(), FiberMeasure::dirac(arrow(1, 1)));
    }

    #[test]
    fn nondegeneracy_examples() {
        let g = pair();
        let flip = make_operator(
            &g,
            alloc::vec![measure(0, &[((0, 1), q(1, 1))]), measure(1, &[((1, 0), q(1, 1))])],
        )
        .unwrap();
        assert_eq!(nondegenerate_check(&flip, 0, 3, 10).unwrap(), Nondegeneracy::CoveredBall { n: 2 });
        let id = MarkovOperator::identity(&g).unwrap();
        assert_eq!(nondegenerate_check(&id, 0, 3, 10).unwrap(), Nondegeneracy::Uncovered(arrow(0, 1)));
        assert_eq!(
            nondegenerate_check(&uniform_pair(), 0, 1, 10).unwrap(),
            Nondegeneracy::CoveredBall { n: 1 }
        );
        // regularizing the flip walk at depth 2 covers the fiber in one step
        let r = regularize(&flip, 2).unwrap();
        assert_eq!(nondegenerate_check(&r, 0, 1, 10).unwrap(), Nondegeneracy::CoveredBall { n: 1 });
    }

    #[test]
    fn regularize_depth_one_is_identity_map() {
        let p = uniform_pair();
        assert_eq!(regularize(&p, 1).unwrap().measures(), p.measures());
        let id = MarkovOperator::identity(&pair()).unwrap();
        assert_eq!(regularize(&id, 3).unwrap().measures(), id.measures());
    }

    #[test]
    fn cylinder_examples() {
        let p = uniform_pair();
        let path = Path { start: 0, steps: alloc::vec![arrow(0, 0), arrow(0, 1), arrow(0, 0)] };
        assert_eq!(cylinder_prob(&p, &path).unwrap(), q(1, 4));
        let unit = Path { start: 0, steps: alloc::vec![arrow(0, 0)] };
        assert_eq!(cylinder_prob(&p, &unit).unwrap(), q(1, 1));
        let off = Path { start: 0, steps: alloc::vec![arrow(0, 1)] };
        assert_eq!(cylinder_prob(&p, &off).unwrap(), q(0, 1));
        let foreign = Path { start: 0, steps: alloc::vec![arrow(1, 1)] };
        assert!(cylinder_prob(&p, &foreign).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = swap_walk();
        assert_eq!(sample_path(&p, 0, 50, 7), sample_path(&p, 0, 50, 7));
        assert_ne!(sample_path(&p, 0, 50, 7), sample_path(&p, 0, 50, 8));
        let id = MarkovOperator::identity(&pair()).unwrap();
        assert!(sample_path(&id, 1, 10, 3).steps.iter().all(|a| *a == arrow(1, 1)));
    }

    #[test]
    fn tail_examples() {
        let p = swap_walk();
        assert_eq!(return_time_tail(&p, 0, 2).unwrap().alpha_k, q(0, 1));
        assert_eq!(return_time_tail(&p, 0, 1).unwrap().alpha_k, q(1, 1));

        let bundle = GroupoidHandle::constant_bundle(&GroupHandle::integers(), uniform_weights(1)).unwrap();
        let mu = BTreeMap::from([(GroupElement::int(1), q(1, 2)), (GroupElement::int(-1), q(1, 2))]);
        let pb = MarkovOperator::from_group_measure(&bundle, &mu).unwrap();
        assert_eq!(return_time_tail(&pb, 0, 1).unwrap().alpha_k, q(0, 1));

        let g = pair();
        let escape = make_operator(
            &g,
            alloc::vec![measure(0, &[((0, 1), q(1, 1))]), measure(1, &[((1, 1), q(1, 1))])],
        )
        .unwrap();
        for k in 1..5 {
            assert_eq!(return_time_tail(&escape, 0, k).unwrap().alpha_k, q(1, 1));
        }
        assert!(matches!(
            hitting_measure(&escape, 0, HittingMode::Enumerated { horizon: 4 }),
            Err(MarkovError::NonabsorbingWalk { .. })
        ));
        assert!(matches!(
            hitting_measure(&escape, 0, HittingMode::ExactFinite),
            Err(MarkovError::NonabsorbingWalk { .. })
        ));
    }

    #[test]
    fn swap_hitting_measure() {
        let p = swap_walk();
        let h = hitting_measure(&p, 0, HittingMode::Enumerated { horizon: 2 }).unwrap();
        assert_eq!(h.mass(&GroupElement::int(0)), q(1, 2));
        assert_eq!(h.mass(&GroupElement::int(2)), q(1, 4));
        assert_eq!(h.mass(&GroupElement::int(-2)), q(1, 4));
        assert_eq!(h.unaccounted_mass, q(0, 1));
        assert_eq!(h.certified_bound, Some(q(0, 1)));
        // the fiber is infinite, so no exact solve
        assert!(matches!(hitting_measure(&p, 0, HittingMode::ExactFinite), Err(MarkovError::InfiniteFiber(0))));
    }

    #[test]
    fn bundle_hitting_is_step_measure() {
        let s3 = GroupHandle::symmetric(3).unwrap();
        let bundle = GroupoidHandle::constant_bundle(&s3, uniform_weights(1)).unwrap();
        let mu: BTreeMap<GroupElement, Q> = s3.generators().iter().map(|g| (g.clone(), q(1, 3))).collect();
        let p = MarkovOperator::from_group_measure(&bundle, &mu).unwrap();
        for mode in [HittingMode::ExactFinite, HittingMode::Enumerated { horizon: 1 }] {
            let h = hitting_measure(&p, 0, mode).unwrap();
            assert_eq!(h.atoms, mu);
        }
    }

    #[test]
    fn exact_and_enumerated_agree_on_uniform_pair() {
        let p = uniform_pair();
        let exact = hitting_measure(&p, 0, HittingMode::ExactFinite).unwrap();
        assert_eq!(exact.total(), q(1, 1));
        let e = hitting_measure(&p, 0, HittingMode::Enumerated { horizon: 6 }).unwrap();
        assert_eq!(e.total() + &e.unaccounted_mass, q(1, 1));
        assert!(e.unaccounted_mass <= e.certified_bound.clone().unwrap());
        assert_eq!(e.unaccounted_mass, q(1, 64));
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let p = swap_walk();
        let mode = HittingMode::MonteCarlo { samples: 1000, seed: 11, step_cap: 100, workers: 3 };
        let a = hitting_measure(&p, 0, mode.clone()).unwrap();
        assert_eq!(a, hitting_measure(&p, 0, mode).unwrap());
        assert_eq!(a.total(), q(1, 1));
    }
}
