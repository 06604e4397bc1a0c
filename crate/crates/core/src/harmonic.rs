//! Harmonic functions on fibers: exact kernels, windowed residuals,
//! martingale and optional-stopping checks, and the group-to-groupoid lift.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use crate::groupoids::{Arrow, GroupoidHandle, GroupoidKind};
use crate::groups::GroupElement;
use crate::linalg::{in_span, kernel, Matrix};
use crate::markov::{
    cylinder_prob, hitting_measure, HittingMeasure, HittingMode, MarkovError, MarkovOperator, Path, SUPPORT_CAP,
};
use crate::rational::Q;

/// Largest fiber for which the harmonic space is computed exactly.
pub const HARMONIC_FIBER_CAP: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HarmonicError {
    #[error("fiber at unit {0} is infinite or too large")]
    InfiniteFiber(usize),
    #[error("value {value} exceeds the declared bound {bound}")]
    BoundViolated { value: String, bound: String },
    #[error("not a transformation groupoid")]
    NotTransformation,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("resource cap exceeded: {what} above {cap}")]
    ResourceCap { what: &'static str, cap: usize },
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

/// A bounded function on a fiber: an explicit table plus a default value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundedFunction {
    pub table: BTreeMap<Arrow, Q>,
    pub default: Q,
    pub bound: Q,
}

impl BoundedFunction {
    pub fn new(table: BTreeMap<Arrow, Q>, default: Q, bound: Q) -> Result<Self, HarmonicError> {
        if let Some(v) = table.values().chain(core::iter::once(&default)).find(|v| v.abs() > bound) {
            return Err(HarmonicError::BoundViolated { value: format!("{v}"), bound: format!("{bound}") });
        }
        Ok(BoundedFunction { table, default, bound })
    }

    pub fn constant(c: Q) -> Self {
        BoundedFunction { table: BTreeMap::new(), bound: c.abs(), default: c }
    }

    /// The function with values `v` on `fiber`, zero elsewhere, bounded by `max |v|`.
    pub fn from_vector(fiber: &[Arrow], v: &[Q]) -> Self {
        let bound = v.iter().map(|x| x.abs()).max().unwrap_or_else(Q::zero);
        BoundedFunction {
            table: fiber.iter().cloned().zip(v.iter().cloned()).collect(),
            default: Q::zero(),
            bound,
        }
    }

    pub fn eval(&self, a: &Arrow) -> Q {
        self.table.get(a).cloned().unwrap_or_else(|| self.default.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HarmonicBasis {
    pub unit: usize,
    pub fiber: Vec<Arrow>,
    pub basis: Vec<Vec<Q>>,
}

impl HarmonicBasis {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn is_liouville(&self) -> bool {
        self.dimension() == 1
    }

    pub fn contains_constants(&self) -> bool {
        in_span(&self.basis, &alloc::vec![Q::one(); self.fiber.len()])
    }

    pub fn function(&self, i: usize) -> BoundedFunction {
        BoundedFunction::from_vector(&self.fiber, &self.basis[i])
    }
}

/// The whole fiber `G^x` together with the matrix of `P_x` in fiber order.
pub fn transition_matrix(p: &MarkovOperator, x: usize) -> Result<(Vec<Arrow>, Matrix), HarmonicError> {
    let fiber = p
        .groupoid()
        .fiber_all(x, HARMONIC_FIBER_CAP)
        .ok_or(HarmonicError::InfiniteFiber(x))?;
    let index: BTreeMap<&Arrow, usize> = fiber.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let n = fiber.len();
    let mut m: Matrix = alloc::vec![alloc::vec![Q::zero(); n]; n];
    for (i, g) in fiber.iter().enumerate() {
        for (gh, q) in p.step_from(g) {
            m[i][index[&gh]] += q;
        }
    }
    Ok((fiber, m))
}

/// Exact basis of `ker(P_x − I)` on a finite fiber.
pub fn harmonic_space(p: &MarkovOperator, x: usize) -> Result<HarmonicBasis, HarmonicError> {
    let (fiber, mut m) = transition_matrix(p, x)?;
    for (i, row) in m.iter_mut().enumerate() {
        row[i] -= Q::one();
    }
    let basis = kernel(&m, fiber.len());
    Ok(HarmonicBasis { unit: x, fiber, basis })
}

/// Whether `v` (indexed by `fiber`) is exactly `P_x`-harmonic.
pub fn is_harmonic_vector(p: &MarkovOperator, fiber: &[Arrow], v: &[Q]) -> bool {
    let f = BoundedFunction::from_vector(fiber, v);
    fiber.iter().all(|g| p.apply(g, |a| f.eval(a)) == f.eval(g))
}

/// Residual of `P_x f − f` on a window of the fiber.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Residual {
    /// Number of fiber arrows probed, in enumeration order.
    pub window: usize,
    pub max_residual: Q,
    pub worst: Option<Arrow>,
    /// Probed arrows whose one-step neighbourhood lies inside the table.
    pub interior: usize,
    pub interior_max_residual: Q,
}

fn residual_at(p: &MarkovOperator, f: &BoundedFunction, g: &Arrow) -> (Q, bool) {
    let mut inside = true;
    let pf: Q = p
        .step_from(g)
        .map(|(gh, q)| {
            inside &= f.table.contains_key(&gh);
            q * f.eval(&gh)
        })
        .sum();
    ((pf - f.eval(g)).abs(), inside)
}

pub fn check_harmonic(p: &MarkovOperator, x: usize, f: &BoundedFunction, ball_budget: usize) -> Residual {
    let mut r = Residual {
        window: 0,
        max_residual: Q::zero(),
        worst: None,
        interior: 0,
        interior_max_residual: Q::zero(),
    };
    for g in p.groupoid().fiber(x).take(ball_budget.max(1)) {
        let (res, inside) = residual_at(p, f, &g);
        r.window += 1;
        if inside {
            r.interior += 1;
            if res > r.interior_max_residual {
                r.interior_max_residual = res.clone();
            }
        }
        if res > r.max_residual || r.worst.is_none() {
            if res > r.max_residual {
                r.max_residual = res;
            }
            r.worst = Some(g);
        }
    }
    r
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MartingaleOutcome {
    /// Number of (time, state) pairs verified.
    Holds { checked: usize },
    /// `E[f(X_{i+1}) | Z] ≠ f(X_i)` on the witness cylinder `Z`.
    Fails { witness: Path, conditional_mean: Q, value: Q },
}

/// Verifies the martingale property of `f(X_i)` on every positive-probability
/// cylinder of length `≤ depth`. By the Markov property the conditional mean
/// only depends on the last arrow, so one representative cylinder per
/// reached arrow and time suffices.
pub fn martingale_check(
    p: &MarkovOperator,
    x: usize,
    f: &BoundedFunction,
    depth: usize,
) -> Result<MartingaleOutcome, HarmonicError> {
    if depth == 0 {
        return Err(HarmonicError::InvalidArgument("depth must be at least 1".into()));
    }
    let start = p.groupoid().unit_arrow(x);
    let mut layer: BTreeMap<Arrow, Path> =
        BTreeMap::from([(start.clone(), Path { start: x, steps: alloc::vec![start] })]);
    let mut checked = 0;
    for _ in 0..depth {
        let mut next: BTreeMap<Arrow, Path> = BTreeMap::new();
        for (g, path) in &layer {
            let z = cylinder_prob(p, path)?;
            debug_assert!(z > Q::zero());
            let mut mean = Q::zero();
            for (gh, _) in p.step_from(g) {
                let mut ext = path.clone();
                ext.steps.push(gh.clone());
                mean += cylinder_prob(p, &ext)? * f.eval(&gh);
                next.entry(gh).or_insert(ext);
            }
            mean /= &z;
            let value = f.eval(g);
            if mean != value {
                return Ok(MartingaleOutcome::Fails { witness: path.clone(), conditional_mean: mean, value });
            }
            checked += 1;
        }
        if next.len() > SUPPORT_CAP {
            return Err(HarmonicError::ResourceCap { what: "cylinders", cap: SUPPORT_CAP });
        }
        layer = next;
    }
    Ok(MartingaleOutcome::Holds { checked })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OptionalStopping {
    pub value_at_unit: Q,
    /// `Σ_h ν(h) f(h)` over the enumerated hitting measure.
    pub stopped_mean: Q,
    pub deviation: Q,
    pub unaccounted_mass: Q,
    /// `deviation + bound(f) · unaccounted_mass`.
    pub residual_bound: Q,
    /// Whether `f` is exactly harmonic at every arrow visited before the horizon.
    pub harmonic_precheck: bool,
    pub precheck_residual: Q,
    pub hitting: HittingMeasure,
}

pub fn optional_stopping_check(
    p: &MarkovOperator,
    x: usize,
    f: &BoundedFunction,
    horizon: usize,
) -> Result<OptionalStopping, HarmonicError> {
    let hitting = hitting_measure(p, x, HittingMode::Enumerated { horizon })?;
    // arrows visited strictly before absorption, up to the horizon
    let start = p.groupoid().unit_arrow(x);
    let mut visited: BTreeSet<Arrow> = BTreeSet::from([start.clone()]);
    let mut alive: BTreeSet<Arrow> = BTreeSet::from([start.clone()]);
    for _ in 1..horizon {
        let mut next = BTreeSet::new();
        for g in &alive {
            for (gh, _) in p.step_from(g) {
                if !gh.is_isotropy() {
                    next.insert(gh);
                }
            }
        }
        visited.extend(next.iter().cloned());
        alive = next;
    }
    let precheck_residual = visited
        .iter()
        .map(|g| residual_at(p, f, g).0)
        .max()
        .unwrap_or_else(Q::zero);
    let value_at_unit = f.eval(&start);
    let stopped_mean: Q = hitting.atoms.iter().map(|(g, m)| m * f.eval(&hitting.arrow(g))).sum();
    let deviation = (&value_at_unit - &stopped_mean).abs();
    let residual_bound = &deviation + &f.bound * &hitting.unaccounted_mass;
    Ok(OptionalStopping {
        value_at_unit,
        stopped_mean,
        deviation,
        unaccounted_mass: hitting.unaccounted_mass.clone(),
        residual_bound,
        harmonic_precheck: precheck_residual.is_zero(),
        precheck_residual,
        hitting,
    })
}

/// `f(g) = Σ_h ν(h) f(g h)` on isotropy arrows, within `bound · unaccounted`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RestrictionCheck {
    pub max_residual: Q,
    pub allowed: Q,
    pub checked: Vec<GroupElement>,
    /// Window elements whose translates leave the function's table.
    pub skipped: Vec<GroupElement>,
}

impl RestrictionCheck {
    pub fn holds(&self) -> bool {
        self.max_residual <= self.allowed
    }
}

pub fn restriction_harmonic_check(
    p: &MarkovOperator,
    x: usize,
    f: &BoundedFunction,
    horizon: usize,
    window: &[GroupElement],
) -> Result<RestrictionCheck, HarmonicError> {
    let nu = hitting_measure(p, x, HittingMode::Enumerated { horizon })?;
    let g = p.groupoid();
    let mut out = RestrictionCheck {
        max_residual: Q::zero(),
        allowed: &f.bound * &nu.unaccounted_mass,
        checked: Vec::new(),
        skipped: Vec::new(),
    };
    for w in window {
        let a = nu.arrow(w);
        let translates: Vec<(Arrow, &Q)> = nu
            .atoms
            .iter()
            .map(|(h, m)| (g.compose(&a, &nu.arrow(h)).expect("isotropy arrows compose"), m))
            .collect();
        if !f.table.contains_key(&a) || translates.iter().any(|(b, _)| !f.table.contains_key(b)) {
            out.skipped.push(w.clone());
            continue;
        }
        let mean: Q = translates.iter().map(|(b, m)| *m * f.eval(b)).sum();
        let r = (mean - f.eval(&a)).abs();
        if r > out.max_residual {
            out.max_residual = r;
        }
        out.checked.push(w.clone());
    }
    Ok(out)
}

/// A bounded function on a window of a group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupFunction {
    pub table: BTreeMap<GroupElement, Q>,
    pub default: Q,
    pub bound: Q,
}

impl GroupFunction {
    pub fn eval(&self, g: &GroupElement) -> Q {
        self.table.get(g).cloned().unwrap_or_else(|| self.default.clone())
    }
}

/// `H(g, g⁻¹·x) := F(g)` on the fiber of a transformation groupoid at `x`.
pub fn lift_group_harmonic(
    f: &GroupFunction,
    t: &GroupoidHandle,
    x: usize,
) -> Result<BoundedFunction, HarmonicError> {
    if !matches!(t.kind(), GroupoidKind::Transformation { .. }) {
        return Err(HarmonicError::NotTransformation);
    }
    let mut table = BTreeMap::new();
    for (g, v) in &f.table {
        let source = t.act(&g.inv(), x).map_err(MarkovError::from)?;
        table.insert(Arrow::new(x, source, g.clone()), v.clone());
    }
    BoundedFunction::new(table, f.default.clone(), f.bound.clone())
}

/// Residual of `F ↦ Σ_s μ(s) F(g s) − F(g)` over the table of `F`.
pub fn group_residual(mu: &BTreeMap<GroupElement, Q>, f: &GroupFunction) -> Residual {
    let mut r = Residual {
        window: 0,
        max_residual: Q::zero(),
        worst: None,
        interior: 0,
        interior_max_residual: Q::zero(),
    };
    for g in f.table.keys() {
        let mut inside = true;
        let mean: Q = mu
            .iter()
            .map(|(s, m)| {
                let gs = g.mul(s);
                inside &= f.table.contains_key(&gs);
                m * f.eval(&gs)
            })
            .sum();
        let res = (mean - f.eval(g)).abs();
        r.window += 1;
        if inside {
            r.interior += 1;
            if res > r.interior_max_residual {
                r.interior_max_residual = res.clone();
            }
        }
        if res > r.max_residual {
            r.max_residual = res;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoids::{rotation_action, uniform_weights};
    use crate::groups::GroupHandle;
    use crate::markov::{make_operator, FiberMeasure};
    use crate::rational::{q, qi};

    fn pair() -> GroupoidHandle {
        GroupoidHandle::finite_relation(&[alloc::vec![0, 1]], uniform_weights(2)).unwrap()
    }

    fn rel(t: usize, s: usize) -> Arrow {
        Arrow::new(t, s, GroupElement::Trivial)
    }

    fn uniform_pair() -> MarkovOperator {
        let atoms = |x: usize| {
            [(rel(x, 0), q(1, 2)), (rel(x, 1), q(1, 2))].into_iter().collect()
        };
        make_operator(&pair(), alloc::vec![FiberMeasure::new(0, atoms(0)), FiberMeasure::new(1, atoms(1))]).unwrap()
    }

    fn simple_walk_mu() -> BTreeMap<GroupElement, Q> {
        BTreeMap::from([(GroupElement::int(1), q(1, 2)), (GroupElement::int(-1), q(1, 2))])
    }

    fn z_point() -> MarkovOperator {
        let g = GroupoidHandle::constant_bundle(&GroupHandle::integers(), uniform_weights(1)).unwrap();
        MarkovOperator::from_group_measure(&g, &simple_walk_mu()).unwrap()
    }

    fn swap() -> (GroupoidHandle, MarkovOperator) {
        let g = GroupoidHandle::transformation(&GroupHandle::integers(), rotation_action(2), uniform_weights(2)).unwrap();
        let p = MarkovOperator::from_group_measure(&g, &simple_walk_mu()).unwrap();
        (g, p)
    }

    #[test]
    fn harmonic_space_examples() {
        let h = harmonic_space(&uniform_pair(), 0).unwrap();
        assert_eq!(h.dimension(), 1);
        assert!(h.contains_constants());

        let three = GroupoidHandle::finite_relation(&[alloc::vec![0, 1, 2]], uniform_weights(3)).unwrap();
        let id = MarkovOperator::identity(&three).unwrap();
        assert_eq!(harmonic_space(&id, 0).unwrap().dimension(), 3);

        let lazy = MarkovOperator::identity(&pair()).unwrap();
        assert_eq!(harmonic_space(&lazy, 0).unwrap().dimension(), 2);

        assert!(matches!(harmonic_space(&z_point(), 0), Err(HarmonicError::InfiniteFiber(0))));
    }

    #[test]
    fn residual_examples() {
        let p = uniform_pair();
        let c = BoundedFunction::constant(qi(3));
        assert!(check_harmonic(&p, 0, &c, 10).max_residual.is_zero());

        let ind = BoundedFunction::new(BTreeMap::from([(rel(0, 0), qi(1))]), qi(0), qi(1)).unwrap();
        assert!(check_harmonic(&p, 0, &ind, 10).max_residual > Q::zero());

        let zp = z_point();
        let table: BTreeMap<Arrow, Q> =
            (-5..=5).map(|n| (Arrow::new(0, 0, GroupElement::int(n)), qi(n))).collect();
        let lin = BoundedFunction::new(table, qi(0), qi(5)).unwrap();
        let r = check_harmonic(&zp, 0, &lin, 11);
        assert_eq!(r.window, 11);
        assert_eq!(r.interior, 9);
        assert!(r.interior_max_residual.is_zero());
        assert!(r.max_residual > Q::zero());
    }

    #[test]
    fn martingale_examples() {
        let p = uniform_pair();
        assert!(matches!(
            martingale_check(&p, 0, &BoundedFunction::constant(qi(2)), 3).unwrap(),
            MartingaleOutcome::Holds { .. }
        ));
        let f = BoundedFunction::new(BTreeMap::from([(rel(0, 1), qi(1))]), qi(0), qi(1)).unwrap();
        match martingale_check(&p, 0, &f, 1).unwrap() {
            MartingaleOutcome::Fails { witness, conditional_mean, value } => {
                assert_eq!(witness.steps, alloc::vec![rel(0, 0)]);
                assert_eq!(conditional_mean, q(1, 2));
                assert_eq!(value, qi(0));
            }
            other => panic!("expected failure, got {other:?}"),
        }
        let id = MarkovOperator::identity(&pair()).unwrap();
        assert!(matches!(martingale_check(&id, 0, &f, 4).unwrap(), MartingaleOutcome::Holds { .. }));
    }

    #[test]
    fn optional_stopping_examples() {
        let (_, p) = swap();
        let c = BoundedFunction::constant(qi(7));
        let r = optional_stopping_check(&p, 0, &c, 2).unwrap();
        assert!(r.residual_bound.is_zero());
        assert!(r.harmonic_precheck);

        let ind = BoundedFunction::new(BTreeMap::from([(Arrow::new(0, 0, GroupElement::int(0)), qi(1))]), qi(0), qi(1))
            .unwrap();
        let r = optional_stopping_check(&p, 0, &ind, 2).unwrap();
        assert!(r.residual_bound > Q::zero());
        assert!(!r.harmonic_precheck);

        // on the uniform pair, constants lose exactly the unabsorbed mass
        let r = optional_stopping_check(&uniform_pair(), 0, &BoundedFunction::constant(qi(1)), 3).unwrap();
        assert_eq!(r.deviation, q(1, 8));
        assert_eq!(r.residual_bound, q(1, 4));
    }

    #[test]
    fn restriction_of_constant_is_harmonic() {
        let (_, p) = swap();
        let window: Vec<GroupElement> = (-2..=2).map(|n| GroupElement::int(2 * n)).collect();
        let table = (-20..=20)
            .map(|n| {
                let g = GroupElement::int(n);
                (Arrow::new(0, n.rem_euclid(2) as usize, g), qi(1))
            })
            .collect();
        let f = BoundedFunction::new(table, qi(1), qi(1)).unwrap();
        let r = restriction_harmonic_check(&p, 0, &f, 2, &window).unwrap();
        assert!(r.holds());
        assert_eq!(r.checked.len(), 5);
    }

    #[test]
    fn lift_matches_group_residual() {
        let (t, p) = swap();
        let parity = GroupFunction {
            table: (-6..=6).map(|n| (GroupElement::int(n), qi(i64::from(n % 2 == 0)))).collect(),
            default: qi(0),
            bound: qi(1),
        };
        let h = lift_group_harmonic(&parity, &t, 0).unwrap();
        let rg = group_residual(&simple_walk_mu(), &parity);
        let rh = check_harmonic(&p, 0, &h, 13);
        assert!(rg.interior_max_residual > Q::zero());
        assert_eq!(rg.interior_max_residual, rh.interior_max_residual);

        let zp = z_point();
        let lin = GroupFunction {
            table: (-4..=4).map(|n| (GroupElement::int(n), qi(n))).collect(),
            default: qi(0),
            bound: qi(4),
        };
        assert!(group_residual(&simple_walk_mu(), &lin).interior_max_residual.is_zero());
        assert!(matches!(lift_group_harmonic(&lin, zp.groupoid(), 0), Err(HarmonicError::NotTransformation)));
    }
}
