//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use choquet_core::classifier::{attach_cross_checks, classify, Budgets, Outcome};
use choquet_core::construction::{
    build_nonliouville_measure, verify_certificate, Check, ConstructionConfig, NonLiouvilleCertificate, Validity,
};
use choquet_core::corpus::{generate_corpus, CorpusInstance, CorpusSpec, InstanceFamily};
use choquet_core::groupoids::{rotation_action, uniform_weights, Arrow, GroupoidHandle, GroupoidKind};
use choquet_core::groups::{ball, fc_tower, GroupElement, GroupHandle, Perm, TowerStatus};
use choquet_core::harmonic::{
    harmonic_space, is_harmonic_vector, martingale_check, optional_stopping_check, transition_matrix,
    BoundedFunction, MartingaleOutcome,
};
use choquet_core::markov::{
    certified_tail_at, hitting_measure, monte_carlo_chunk, nondegenerate_check, regularize, return_time_samples,
    return_time_tail, HittingMode, MarkovOperator, McCounts, Nondegeneracy,
};
use choquet_core::rational::{q, to_f64, Q};
use num_traits::{One, Zero};

// Pinned tolerances and limits.
const SIGMAS: f64 = 3.0;
const MC_SAMPLES: u64 = 100_000;
const TAIL_SAMPLES: u64 = 100_000;
const RETURN_HORIZON: usize = 32;
const MARTINGALE_DEPTH: usize = 5;
const NONDEGENERACY_RADIUS: usize = 3;
const CONSTRUCTION_DEPTH: usize = 4;
const LIMIT_C1: Duration = Duration::from_secs(10);
const LIMIT_C2: Duration = Duration::from_secs(30);
const LIMIT_C9: Duration = Duration::from_secs(60);
const LIMIT_DEFAULT: Duration = Duration::from_secs(120);

struct Report {
    ok: bool,
    detail: String,
}

fn pass(detail: String) -> Report {
    Report { ok: true, detail }
}

fn fail(detail: String) -> Report {
    Report { ok: false, detail }
}

fn corpus() -> Vec<CorpusInstance> {
    generate_corpus(&CorpusSpec::default()).expect("default corpus generates")
}

fn swap_walk() -> MarkovOperator {
    let g = GroupoidHandle::transformation(&GroupHandle::integers(), rotation_action(2), uniform_weights(2)).unwrap();
    let mu = BTreeMap::from([(GroupElement::int(1), q(1, 2)), (GroupElement::int(-1), q(1, 2))]);
    MarkovOperator::from_group_measure(&g, &mu).unwrap()
}

fn is_nondegenerate(p: &MarkovOperator) -> bool {
    let g = p.groupoid();
    (0..g.num_units()).all(|x| {
        let size = g.fiber_size(x).expect("finite fiber");
        matches!(nondegenerate_check(p, x, size, size), Ok(Nondegeneracy::CoveredBall { .. }))
    })
}

fn c1(corpus: &[CorpusInstance]) -> Report {
    let mut relations = 0;
    let mut fibers = 0;
    for inst in corpus.iter().filter(|i| i.family == InstanceFamily::Relation) {
        relations += 1;
        let g = inst.operator.groupoid();
        for x in 0..g.num_units() {
            let h = harmonic_space(&inst.operator, x).unwrap();
            fibers += 1;
            if h.dimension() != 1 {
                return fail(format!("{} unit {x}: harmonic dimension {}", inst.name, h.dimension()));
            }
        }
    }
    if relations < 100 {
        return fail(format!("only {relations} relations"));
    }
    pass(format!("{relations} relations, {fibers} fibers, all harmonic spaces are the constants"))
}

fn c2(corpus: &[CorpusInstance]) -> Report {
    let p = swap_walk();
    let h = hitting_measure(&p, 0, HittingMode::Enumerated { horizon: 2 }).unwrap();
    let expected = BTreeMap::from([(GroupElement::int(0), q(1, 2)), (GroupElement::int(2), q(1, 4)), (GroupElement::int(-2), q(1, 4))]);
    if h.atoms != expected || !h.unaccounted_mass.is_zero() {
        return fail(format!("swap walk: got {:?} with unaccounted {}", h.atoms, h.unaccounted_mass));
    }

    let mut matched = 0;
    let mut mc_checked = Vec::new();
    for inst in corpus {
        let g = inst.operator.groupoid();
        for x in 0..g.num_units() {
            let Ok(exact) = hitting_measure(&inst.operator, x, HittingMode::ExactFinite) else { continue };
            let en = match hitting_measure(&inst.operator, x, HittingMode::Enumerated { horizon: 8 }) {
                Ok(en) => en,
                Err(e) => return fail(format!("{} unit {x}: enumerated failed where the exact solve succeeded: {e}", inst.name)),
            };
            let bound = en.certified_bound.clone().unwrap_or_else(Q::one);
            if en.unaccounted_mass > bound {
                return fail(format!("{} unit {x}: unaccounted mass above its certified bound", inst.name));
            }
            let keys: BTreeSet<&GroupElement> = exact.atoms.keys().chain(en.atoms.keys()).collect();
            for k in keys {
                let d = exact.mass(k) - en.mass(k);
                if d < Q::zero() || d > bound {
                    return fail(format!("{} unit {x}: atom {k} differs by {d}", inst.name));
                }
            }
            matched += 1;
            if mc_checked.len() < 4 && x == 0 && inst.family != InstanceFamily::Relation {
                mc_checked.push((inst.operator.clone(), exact, inst.name.clone()));
            }
        }
        if matched >= 40 && mc_checked.len() >= 4 {
            break;
        }
    }
    if matched < 20 {
        return fail(format!("only {matched} exact/enumerated comparisons"));
    }

    let swap_exact = h;
    mc_checked.push((p, swap_exact, "swap walk".into()));
    let mut worst: f64 = 0.0;
    for (op, exact, name) in &mc_checked {
        let mut counts = McCounts::default();
        for w in 0..4 {
            counts.merge(monte_carlo_chunk(op, exact.unit, MC_SAMPLES / 4, 7, w, 10_000));
        }
        let mc = counts.into_measure(exact.unit, HittingMode::ExactFinite);
        let keys: BTreeSet<&GroupElement> = exact.atoms.keys().chain(mc.atoms.keys()).collect();
        for k in keys {
            let pe = to_f64(&exact.mass(k));
            let sigma = (pe * (1.0 - pe) / MC_SAMPLES as f64).sqrt().max(1e-12);
            let z = (to_f64(&mc.mass(k)) - pe).abs() / sigma;
            worst = worst.max(z);
            if z > SIGMAS {
                return fail(format!("{name}: Monte Carlo atom {k} is {z:.2} sigma off"));
            }
        }
    }
    pass(format!(
        "swap walk exact; {matched} exact/enumerated comparisons within bound; {} Monte Carlo checks, worst {worst:.2} sigma",
        mc_checked.len()
    ))
}

/// Arrows reachable from the unit arrow in fewer than `depth` steps.
fn reachable(p: &MarkovOperator, x: usize, depth: usize) -> BTreeSet<Arrow> {
    let start = p.groupoid().unit_arrow(x);
    let mut seen = BTreeSet::from([start.clone()]);
    let mut layer = BTreeSet::from([start]);
    for _ in 1..depth {
        let mut next = BTreeSet::new();
        for g in &layer {
            for (gh, _) in p.step_from(g) {
                next.insert(gh);
            }
        }
        seen.extend(next.iter().cloned());
        layer = next;
    }
    seen
}

fn c3(corpus: &[CorpusInstance]) -> Report {
    let mut harmonic = 0;
    let mut perturbed = 0;
    let mut skipped = 0;
    for inst in corpus {
        let p = &inst.operator;
        for x in 0..p.groupoid().num_units() {
            let h = harmonic_space(p, x).unwrap();
            let (fiber, m) = transition_matrix(p, x).unwrap();
            let window = reachable(p, x, MARTINGALE_DEPTH);
            for i in 0..h.dimension() {
                let f = h.function(i);
                match martingale_check(p, x, &f, MARTINGALE_DEPTH).unwrap() {
                    MartingaleOutcome::Holds { .. } => harmonic += 1,
                    MartingaleOutcome::Fails { .. } => {
                        return fail(format!("{} unit {x}: harmonic basis function {i} fails", inst.name))
                    }
                }
                for (j, target) in fiber.iter().enumerate().take(4) {
                    let mut v = h.basis[i].clone();
                    v[j] += Q::one();
                    // residual of P f − f on the probed window decides whether the perturbation is visible
                    let visible = fiber.iter().enumerate().any(|(r, a)| {
                        window.contains(a) && {
                            let pf: Q = m[r].iter().zip(&v).map(|(a, b)| a * b).sum();
                            pf != v[r]
                        }
                    });
                    if !visible {
                        if !is_harmonic_vector(p, &fiber, &v) {
                            skipped += 1;
                        }
                        continue;
                    }
                    let g = BoundedFunction::from_vector(&fiber, &v);
                    match martingale_check(p, x, &g, MARTINGALE_DEPTH).unwrap() {
                        MartingaleOutcome::Fails { witness, .. } if witness.start == x => perturbed += 1,
                        other => {
                            return fail(format!(
                                "{} unit {x}: perturbation at {target} not caught ({other:?})",
                                inst.name
                            ))
                        }
                    }
                }
            }
        }
    }
    pass(format!(
        "{harmonic} harmonic functions hold to depth {MARTINGALE_DEPTH}; {perturbed} perturbations rejected with witnesses; {skipped} non-harmonic only beyond the window"
    ))
}

fn c4(corpus: &[CorpusInstance]) -> Report {
    let mut checked = 0;
    let mut instances = 0;
    let mut unbounded = 0;
    for inst in corpus {
        let p = &inst.operator;
        let mut used = false;
        for x in 0..p.groupoid().num_units() {
            // α_k is nonincreasing in k, so one long horizon decides bounded return
            if !return_time_tail(p, x, RETURN_HORIZON).unwrap().alpha_k.is_zero() {
                unbounded += 1;
                continue;
            }
            let horizon = (1..=RETURN_HORIZON)
                .find(|&k| return_time_tail(p, x, k).unwrap().alpha_k.is_zero())
                .expect("alpha vanishes by the long horizon");
            if !certified_tail_at(p, x, horizon).unwrap().is_zero() {
                return fail(format!("{} unit {x}: tail bound not certified at horizon {horizon}", inst.name));
            }
            let h = harmonic_space(p, x).unwrap();
            for i in 0..h.dimension() {
                let os = optional_stopping_check(p, x, &h.function(i), horizon).unwrap();
                if !os.residual_bound.is_zero() || !os.unaccounted_mass.is_zero() || !os.harmonic_precheck {
                    return fail(format!(
                        "{} unit {x}: residual bound {} at horizon {horizon}",
                        inst.name, os.residual_bound
                    ));
                }
                checked += 1;
                used = true;
            }
        }
        instances += used as usize;
    }
    if instances == 0 {
        return fail("no instance has a certified return horizon".into());
    }
    pass(format!(
        "{checked} harmonic functions on {instances} instances with certified bounded return: residual bound 0; {unbounded} fibers without bounded return excluded"
    ))
}

fn c5(corpus: &[CorpusInstance]) -> Report {
    let mut instances = 0;
    let mut worst = f64::NEG_INFINITY;
    for (idx, inst) in corpus.iter().filter(|i| i.family == InstanceFamily::Relation).take(24).enumerate() {
        let p = &inst.operator;
        let x = 0;
        let samples = return_time_samples(p, x, TAIL_SAMPLES, 1000 + idx as u64, 1 << 12);
        for k in 1..=3usize {
            let tb = return_time_tail(p, x, k).unwrap();
            for n in 0..=3u32 {
                let t = (1usize << n) * k;
                let emp = samples.iter().filter(|&&s| s > t).count() as f64 / TAIL_SAMPLES as f64;
                let b = to_f64(&tb.bound(n));
                let sigma = (b * (1.0 - b) / TAIL_SAMPLES as f64).sqrt();
                let slack = emp - (b + SIGMAS * sigma);
                worst = worst.max(slack);
                if slack > 0.0 {
                    return fail(format!("{} k={k} n={n}: empirical {emp} above bound {b}", inst.name));
                }
            }
        }
        instances += 1;
    }
    if instances < 20 {
        return fail(format!("only {instances} instances"));
    }
    pass(format!("{instances} instances, k in 1..=3, n in 0..=3; max excess over bound+3 sigma {worst:.4}"))
}

fn semigroup_closure(gens: &BTreeSet<GroupElement>) -> BTreeSet<GroupElement> {
    let mut closure = gens.clone();
    let mut frontier: Vec<GroupElement> = gens.iter().cloned().collect();
    while let Some(a) = frontier.pop() {
        for b in gens {
            let c = a.mul(b);
            if closure.insert(c.clone()) {
                frontier.push(c);
            }
        }
    }
    closure
}

/// Payloads of isotropy arrows at `x` whose payload lies in the word ball of radius `r`.
fn isotropy_ball(g: &GroupoidHandle, x: usize, r: usize) -> BTreeSet<GroupElement> {
    let group = match g.kind() {
        GroupoidKind::Transformation { group, .. } => group.clone(),
        _ => g.group_at(x).clone(),
    };
    ball(&group, r)
        .unwrap()
        .into_iter()
        .filter(|h| g.contains(&Arrow::new(x, x, h.clone())))
        .collect()
}

fn c6(corpus: &[CorpusInstance]) -> Report {
    let mut checked = 0;
    let mut degenerate = 0;
    for inst in corpus {
        let p = &inst.operator;
        if !is_nondegenerate(p) {
            degenerate += 1;
            continue;
        }
        for x in 0..p.groupoid().num_units() {
            let nu = hitting_measure(p, x, HittingMode::ExactFinite).unwrap();
            let support: BTreeSet<GroupElement> = nu.atoms.keys().cloned().collect();
            let closure = semigroup_closure(&support);
            let target = isotropy_ball(p.groupoid(), x, NONDEGENERACY_RADIUS);
            if let Some(miss) = target.iter().find(|h| !closure.contains(*h)) {
                return fail(format!("{} unit {x}: {miss} not generated by supp(nu)", inst.name));
            }
            checked += 1;
        }
    }
    pass(format!("{checked} fibers of non-degenerate operators; {degenerate} degenerate operators excluded"))
}

fn c7(corpus: &[CorpusInstance]) -> Report {
    let b = Budgets::default();
    let outcome = |g: &GroupoidHandle| classify(g, &b).unwrap().outcome;
    if outcome(swap_walk().groupoid()) != Outcome::ChoquetDeny {
        return fail("integers acting on two points".into());
    }
    for n in 1..=12 {
        let g = GroupoidHandle::transformation(&GroupHandle::integers(), rotation_action(n), uniform_weights(n)).unwrap();
        if outcome(&g) != Outcome::ChoquetDeny {
            return fail(format!("transitive integer action on {n} points"));
        }
    }
    let lamp = GroupoidHandle::constant_bundle(&GroupHandle::lamplighter(), uniform_weights(2)).unwrap();
    if outcome(&lamp) != Outcome::NotChoquetDeny {
        return fail("constant lamplighter bundle".into());
    }
    if outcome(&GroupoidHandle::countable_full_relation(16)) != Outcome::NotChoquetDeny {
        return fail("full relation with an infinite orbit".into());
    }
    let mut cross = 0;
    for inst in corpus {
        let mut v = classify(inst.operator.groupoid(), &b).unwrap();
        if v.outcome != Outcome::ChoquetDeny {
            return fail(format!("{}: {:?}", inst.name, v.outcome));
        }
        attach_cross_checks(&mut v, std::slice::from_ref(&inst.operator));
        if let Some(c) = v.cross_checks.iter().find(|c| !c.consistent) {
            return fail(format!("{}: unit {} disagrees with the exact harmonic space", inst.name, c.unit));
        }
        cross += v.cross_checks.len();
    }
    pass(format!("named examples classified; {} corpus verdicts agree with {cross} exact fiber checks", corpus.len()))
}

fn c8() -> Report {
    let s3 = GroupHandle::symmetric(3).unwrap();
    let t = fc_tower(&s3, 3, 20, 6).unwrap();
    if t.hypercentral_level() != Some(1) {
        return fail(format!("S3: {:?}", t.status));
    }
    let t = fc_tower(&GroupHandle::dihedral_inf(), 3, 20, 6).unwrap();
    if t.hypercentral_level() != Some(2) {
        return fail(format!("infinite dihedral: {:?}", t.status));
    }
    let t = fc_tower(&GroupHandle::lamplighter(), 3, 20, 6).unwrap();
    let trivial = t.levels.first().is_some_and(|l| l.members.len() == 1 && l.members.iter().all(|g| g.is_identity()));
    if t.status != TowerStatus::StabilizedProper || !trivial {
        return fail(format!("lamplighter: {:?}", t.status));
    }
    pass("S3 hypercentral at 1, infinite dihedral at 2, lamplighter stabilizes at {e}".into())
}

fn break_symmetry(cert: &mut NonLiouvilleCertificate) {
    let shift = q(1, 1000);
    let e = cert.group.identity();
    if let Some(g) = cert.measure.keys().find(|g| **g != g.inv()).cloned() {
        *cert.measure.get_mut(&g).unwrap() += &shift;
        *cert.measure.get_mut(&g.inv()).unwrap() -= &shift;
    } else {
        // every atom is an involution: move mass onto a 3-cycle
        let c = GroupElement::Perm(Perm::from_images(&[1, 2, 0]).unwrap());
        *cert.measure.get_mut(&e).unwrap() -= &shift;
        cert.measure.insert(c, shift);
    }
}

fn c9() -> Report {
    let cfg = ConstructionConfig { depth: CONSTRUCTION_DEPTH, epsilon: q(1, 16), ..Default::default() };
    let mut notes = Vec::new();
    for group in [GroupHandle::lamplighter(), GroupHandle::finitary_sym(12)] {
        let cert = match build_nonliouville_measure(&group, &cfg) {
            Ok(c) => c,
            Err(e) => return fail(format!("{group}: {e}")),
        };
        if verify_certificate(&cert) != Validity::Valid {
            return fail(format!("{group}: fresh certificate rejected: {:?}", verify_certificate(&cert)));
        }
        let last = cert.levels.len();
        let mut swapped = cert.clone();
        swapped.levels[last - 1].tau = swapped.levels[last - 2].tau.clone();
        let mut eps = cert.clone();
        eps.epsilon = q(1, 4);
        let mut sym = cert.clone();
        break_symmetry(&mut sym);
        for (name, bad, expected) in [
            ("tau swap", swapped, Check::SuperSwitching { level: last }),
            ("epsilon 1/4", eps, Check::EpsilonRange),
            ("broken symmetry", sym, Check::Symmetry),
        ] {
            let got = verify_certificate(&bad);
            if got != Validity::Invalid(expected.clone()) {
                return fail(format!("{group} {name}: expected {expected}, got {got:?}"));
            }
        }
        notes.push(format!("{group}: {} atoms, tau_{last} = {}", cert.measure.len(), cert.levels[last - 1].tau));
    }
    pass(format!("{}; all three mutations rejected at the right check", notes.join("; ")))
}

fn c10(corpus: &[CorpusInstance]) -> Report {
    let mut kernels = 0;
    let mut mixing = 0;
    for inst in corpus {
        let p = &inst.operator;
        let g = p.groupoid();
        let depth = (0..g.num_units()).filter_map(|x| g.fiber_size(x)).max().unwrap_or(1);
        let pt = regularize(p, depth).unwrap();
        for x in 0..g.num_units() {
            let h = harmonic_space(p, x).unwrap();
            for v in &h.basis {
                if !is_harmonic_vector(&pt, &h.fiber, v) {
                    return fail(format!("{} unit {x}: harmonic function lost under regularization", inst.name));
                }
                kernels += 1;
            }
            let size = g.fiber_size(x).unwrap();
            if let Nondegeneracy::CoveredBall { .. } = nondegenerate_check(p, x, depth, size).unwrap() {
                if nondegenerate_check(&pt, x, 1, size).unwrap() != (Nondegeneracy::CoveredBall { n: 1 }) {
                    return fail(format!("{} unit {x}: regularized operator does not mix in one step", inst.name));
                }
                mixing += 1;
            }
        }
    }
    pass(format!("{kernels} harmonic vectors preserved; {mixing} fibers mix in one regularized step"))
}

fn main() -> ExitCode {
    let t = Instant::now();
    let corpus = corpus();
    println!("corpus: {} instances in {:.2?}", corpus.len(), t.elapsed());

    let criteria: Vec<(&str, Duration, Box<dyn Fn() -> Report + '_>)> = vec![
        ("1 finite-relation Liouville", LIMIT_C1, Box::new(|| c1(&corpus))),
        ("2 hitting measure exactness", LIMIT_C2, Box::new(|| c2(&corpus))),
        ("3 martingale <-> harmonic", LIMIT_DEFAULT, Box::new(|| c3(&corpus))),
        ("4 optional stopping", LIMIT_DEFAULT, Box::new(|| c4(&corpus))),
        ("5 tail bound validity", LIMIT_DEFAULT, Box::new(|| c5(&corpus))),
        ("6 hitting measure non-degeneracy", LIMIT_DEFAULT, Box::new(|| c6(&corpus))),
        ("7 classifier consistency", LIMIT_DEFAULT, Box::new(|| c7(&corpus))),
        ("8 FC towers", LIMIT_DEFAULT, Box::new(c8)),
        ("9 switching-element certificates", LIMIT_C9, Box::new(c9)),
        ("10 regularization", LIMIT_DEFAULT, Box::new(|| c10(&corpus))),
    ];
    let mut failures = 0;
    for (name, limit, run) in criteria {
        let t = Instant::now();
        let mut out = run();
        let elapsed = t.elapsed();
        if out.ok && elapsed > limit {
            out = fail(format!("{} (took {elapsed:.2?}, limit {limit:?})", out.detail));
        }
        failures += !out.ok as usize;
        println!(
            "[{}] {name}: {} ({elapsed:.2?} / {limit:?})",
            if out.ok { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
