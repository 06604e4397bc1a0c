use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use smallvec::smallvec;

use super::element::{Gen, GroupElement, Lamps, Perm, Word};
use super::walk::BallWalker;
use super::GroupError;

/// Largest finite table group we are willing to enumerate at construction.
pub const FINITE_TABLE_ORDER_CAP: usize = 200_000;

/// Built-in group families.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Family {
    Trivial,
    /// Free abelian group ℤ^rank.
    Lattice { rank: usize },
    DihedralInf,
    Heisenberg,
    /// ℤ/2 ≀ ℤ.
    Lamplighter,
    /// Finitary permutations of ℕ, truncated to supports in `{1, .., support}`.
    FinitarySym { support: u16 },
    /// Permutation group generated by explicit permutations of `{0, .., degree-1}`.
    FiniteTable { degree: usize },
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Trivial => "trivial",
            Family::Lattice { .. } => "Zd",
            Family::DihedralInf => "dihedral_inf",
            Family::Heisenberg => "heisenberg",
            Family::Lamplighter => "lamplighter",
            Family::FinitarySym { .. } => "finitary_sym",
            Family::FiniteTable { .. } => "finite_table",
        }
    }
}

/// Known Choquet–Deny status of a group, with the literature it comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Oracle {
    pub choquet_deny: bool,
    pub source: String,
}

#[derive(Debug)]
struct FiniteData {
    /// Elements in shortlex order of their minimal words.
    elements: Vec<GroupElement>,
    words: BTreeMap<GroupElement, Word>,
}

#[derive(Debug)]
struct GroupData {
    family: Family,
    generators: Vec<GroupElement>,
    oracle: Option<Oracle>,
    finite: Option<FiniteData>,
}

/// An immutable, cheaply clonable finitely generated group.
#[derive(Clone, Debug)]
pub struct GroupHandle(Arc<GroupData>);

impl PartialEq for GroupHandle {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.family == other.0.family && self.0.generators == other.0.generators)
    }
}

impl fmt::Display for GroupHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.family {
            Family::Lattice { rank } => write!(f, "Z^{rank}"),
            Family::FinitarySym { support } => write!(f, "finitary_sym({support})"),
            Family::FiniteTable { degree } => {
                write!(f, "finite_table(degree {degree}, order {})", self.order().unwrap_or(0))
            }
            other => write!(f, "{}", other.tag()),
        }
    }
}

fn oracle(cd: bool, source: &str) -> Option<Oracle> {
    Some(Oracle { choquet_deny: cd, source: source.to_string() })
}

impl GroupHandle {
    fn from_parts(family: Family, generators: Vec<GroupElement>, oracle: Option<Oracle>) -> Self {
        GroupHandle(Arc::new(GroupData { family, generators, oracle, finite: None }))
    }

    pub fn trivial() -> Self {
        Self::from_parts(Family::Trivial, Vec::new(), oracle(true, "trivial group"))
    }

    /// ℤ^rank with generators `e_1, -e_1, e_2, -e_2, ...`.
    pub fn lattice(rank: usize) -> Self {
        let mut gens = Vec::with_capacity(2 * rank);
        for i in 0..rank {
            for sign in [1, -1] {
                gens.push(GroupElement::lattice((0..rank).map(|j| if j == i { sign } else { 0 })));
            }
        }
        Self::from_parts(
            Family::Lattice { rank },
            gens,
            oracle(true, "abelian: Choquet-Deny theorem (Choquet-Deny 1960)"),
        )
    }

    pub fn integers() -> Self {
        Self::lattice(1)
    }

    /// D_∞ with generators `t, t⁻¹, s`.
    pub fn dihedral_inf() -> Self {
        let t = GroupElement::Dihedral { translation: 1, reflected: false };
        let s = GroupElement::Dihedral { translation: 0, reflected: true };
        Self::from_parts(
            Family::DihedralInf,
            alloc::vec![t.clone(), t.inv(), s],
            oracle(true, "virtually abelian: virtually nilpotent groups are Choquet-Deny (Frisch-Hartman-Tamuz-Vahidi Ferdowsi 2019)"),
        )
    }

    /// Discrete Heisenberg group with generators `x, x⁻¹, y, y⁻¹`.
    pub fn heisenberg() -> Self {
        let x = GroupElement::Heisenberg { a: 1, b: 0, c: 0 };
        let y = GroupElement::Heisenberg { a: 0, b: 1, c: 0 };
        Self::from_parts(
            Family::Heisenberg,
            alloc::vec![x.clone(), x.inv(), y.clone(), y.inv()],
            oracle(true, "nilpotent: virtually nilpotent groups are Choquet-Deny (Frisch-Hartman-Tamuz-Vahidi Ferdowsi 2019)"),
        )
    }

    /// ℤ/2 ≀ ℤ with generators `t, t⁻¹, a` (`a` toggles the lamp under the lighter).
    pub fn lamplighter() -> Self {
        let t = GroupElement::Lamplighter { lamps: Lamps::empty(), shift: 1 };
        let a = GroupElement::Lamplighter { lamps: Lamps::single(0), shift: 0 };
        Self::from_parts(
            Family::Lamplighter,
            alloc::vec![t.clone(), t.inv(), a],
            oracle(false, "icc amenable: Z/2 wr Z has an icc quotient (itself) hence is not Choquet-Deny (Frisch-Hartman-Tamuz-Vahidi Ferdowsi 2019; Kaimanovich-Vershik 1983)"),
        )
    }

    /// Finitary symmetric group truncated to supports in `{1, .., support}`,
    /// generated by all transpositions in lexicographic order.
    pub fn finitary_sym(support: u16) -> Self {
        let mut gens = Vec::new();
        for i in 0..support {
            for j in (i + 1)..support {
                gens.push(GroupElement::Perm(Perm::transposition(i, j)));
            }
        }
        Self::from_parts(Family::FinitarySym { support }, gens, None)
    }

    /// Permutation group on `{0, .., degree-1}` generated by `perms`.
    /// The generator list is symmetrized and the identity dropped.
    pub fn finite_table(degree: usize, perms: &[Perm]) -> Result<Self, GroupError> {
        let mut gens: Vec<GroupElement> = Vec::new();
        for p in perms {
            if p.degree() > degree {
                return Err(GroupError::InvalidGenerator(alloc::format!(
                    "permutation moves points beyond degree {degree}"
                )));
            }
            for q in [p.clone(), p.inverse()] {
                let q = GroupElement::Perm(q);
                if !q.is_identity() && !gens.contains(&q) {
                    gens.push(q);
                }
            }
        }
        let mut handle = GroupData {
            family: Family::FiniteTable { degree },
            generators: gens,
            oracle: None,
            finite: None,
        };
        let provisional = GroupHandle(Arc::new(GroupData {
            family: handle.family.clone(),
            generators: handle.generators.clone(),
            oracle: None,
            finite: None,
        }));
        let mut elements = Vec::new();
        let mut words = BTreeMap::new();
        let mut walker = BallWalker::with_words(&provisional);
        while let Some((g, _, w)) = walker.next_with_word() {
            if elements.len() >= FINITE_TABLE_ORDER_CAP {
                return Err(GroupError::ResourceCap {
                    what: "finite table group order",
                    cap: FINITE_TABLE_ORDER_CAP,
                });
            }
            words.insert(g.clone(), w);
            elements.push(g);
        }
        handle.finite = Some(FiniteData { elements, words });
        Ok(GroupHandle(Arc::new(handle)))
    }

    /// Cyclic group ℤ/n as a finite table.
    pub fn cyclic(n: u16) -> Self {
        if n <= 1 {
            return Self::finite_table(1, &[]).expect("trivial table");
        }
        let images: Vec<u16> = (0..n).map(|i| (i + 1) % n).collect();
        Self::finite_table(n as usize, &[Perm::from_images(&images).expect("rotation")])
            .expect("cyclic group fits the table cap")
    }

    /// Symmetric group S_n as a finite table generated by a transposition and an n-cycle.
    pub fn symmetric(n: u16) -> Result<Self, GroupError> {
        if n <= 1 {
            return Self::finite_table(1, &[]);
        }
        let cycle: Vec<u16> = (0..n).map(|i| (i + 1) % n).collect();
        Self::finite_table(
            n as usize,
            &[Perm::transposition(0, 1), Perm::from_images(&cycle).expect("cycle")],
        )
    }

    pub fn with_oracle(&self, oracle: Option<Oracle>) -> Self {
        GroupHandle(Arc::new(GroupData {
            family: self.0.family.clone(),
            generators: self.0.generators.clone(),
            oracle,
            finite: self.0.finite.as_ref().map(|f| FiniteData {
                elements: f.elements.clone(),
                words: f.words.clone(),
            }),
        }))
    }

    pub fn family(&self) -> &Family {
        &self.0.family
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.0.generators
    }

    pub fn oracle(&self) -> Option<&Oracle> {
        self.0.oracle.as_ref()
    }

    pub fn identity(&self) -> GroupElement {
        match &self.0.family {
            Family::Trivial => GroupElement::Trivial,
            Family::Lattice { rank } => GroupElement::lattice((0..*rank).map(|_| 0)),
            Family::DihedralInf => GroupElement::Dihedral { translation: 0, reflected: false },
            Family::Heisenberg => GroupElement::Heisenberg { a: 0, b: 0, c: 0 },
            Family::Lamplighter => GroupElement::Lamplighter { lamps: Lamps::empty(), shift: 0 },
            Family::FinitarySym { .. } | Family::FiniteTable { .. } => {
                GroupElement::Perm(Perm::identity())
            }
        }
    }

    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        a.mul(b)
    }

    pub fn inv(&self, a: &GroupElement) -> GroupElement {
        a.inv()
    }

    /// Number of elements for finite groups, `None` for infinite families.
    pub fn order(&self) -> Option<u64> {
        match &self.0.family {
            Family::Trivial => Some(1),
            Family::FinitarySym { support } => (1..=*support as u64).try_fold(1u64, |acc, k| acc.checked_mul(k)),
            Family::FiniteTable { .. } => self.0.finite.as_ref().map(|f| f.elements.len() as u64),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.order().is_some()
    }

    /// Every element of a finite table group, in shortlex order.
    pub fn table_elements(&self) -> Option<&[GroupElement]> {
        self.0.finite.as_ref().map(|f| f.elements.as_slice())
    }

    pub fn is_abelian_family(&self) -> bool {
        match &self.0.family {
            Family::Trivial | Family::Lattice { .. } => true,
            Family::FiniteTable { .. } => {
                let g = &self.0.generators;
                g.iter().all(|a| g.iter().all(|b| a.mul(b) == b.mul(a)))
            }
            Family::FinitarySym { support } => *support <= 2,
            _ => false,
        }
    }

    /// Whether `g` is a well-formed element of this group.
    pub fn contains(&self, g: &GroupElement) -> bool {
        match (&self.0.family, g) {
            (Family::Trivial, GroupElement::Trivial) => true,
            (Family::Lattice { rank }, GroupElement::Lattice(v)) => v.len() == *rank,
            (Family::DihedralInf, GroupElement::Dihedral { .. }) => true,
            (Family::Heisenberg, GroupElement::Heisenberg { .. }) => true,
            (Family::Lamplighter, GroupElement::Lamplighter { .. }) => true,
            (Family::FinitarySym { support }, GroupElement::Perm(p)) => p.degree() <= *support as usize,
            (Family::FiniteTable { .. }, GroupElement::Perm(_)) => self
                .0
                .finite
                .as_ref()
                .is_some_and(|f| f.words.contains_key(g)),
            _ => false,
        }
    }

    fn gen_index(&self, g: &GroupElement) -> Gen {
        self.0
            .generators
            .iter()
            .position(|x| x == g)
            .expect("generator present") as Gen
    }

    /// A word in the generators whose product is `g` (not necessarily geodesic).
    pub fn factor(&self, g: &GroupElement) -> Result<Word, GroupError> {
        if !self.contains(g) {
            return Err(GroupError::ForeignElement(alloc::format!("{g} is not in {self}")));
        }
        let mut w: Word = smallvec![];
        let push_pow = |w: &mut Word, pos: Gen, neg: Gen, n: i64| {
            let idx = if n >= 0 { pos } else { neg };
            for _ in 0..n.unsigned_abs() {
                w.push(idx);
            }
        };
        match g {
            GroupElement::Trivial => {}
            GroupElement::Lattice(v) => {
                for (i, &x) in v.iter().enumerate() {
                    push_pow(&mut w, 2 * i as Gen, 2 * i as Gen + 1, x);
                }
            }
            GroupElement::Dihedral { translation, reflected } => {
                push_pow(&mut w, 0, 1, *translation);
                if *reflected {
                    w.push(2);
                }
            }
            GroupElement::Heisenberg { a, b, c } => {
                push_pow(&mut w, 0, 1, *a);
                push_pow(&mut w, 2, 3, *b);
                // x^a y^b = [a, b, ab]; the remaining central part is a power of [x, y]
                let m = c - a * b;
                let z: [Gen; 4] = if m >= 0 { [0, 2, 1, 3] } else { [2, 0, 3, 1] };
                for _ in 0..m.unsigned_abs() {
                    w.extend_from_slice(&z);
                }
            }
            GroupElement::Lamplighter { lamps, shift } => {
                for p in lamps.positions() {
                    push_pow(&mut w, 0, 1, p as i64);
                    w.push(2);
                    push_pow(&mut w, 0, 1, -(p as i64));
                }
                push_pow(&mut w, 0, 1, *shift as i64);
            }
            GroupElement::Perm(p) => match &self.0.family {
                Family::FiniteTable { .. } => {
                    w = self.0.finite.as_ref().expect("finite data").words[g].clone();
                }
                _ => {
                    // (c0 c1 .. cm) = (c0 cm)(c0 c(m-1)) .. (c0 c1)
                    for cycle in p.cycles() {
                        let c0 = cycle[0];
                        for &c in cycle[1..].iter().rev() {
                            let t = GroupElement::Perm(Perm::transposition(c0, c));
                            w.push(self.gen_index(&t));
                        }
                    }
                }
            },
        }
        Ok(w)
    }

    /// Product of a word in the generators.
    pub fn eval(&self, word: &[Gen]) -> GroupElement {
        word.iter()
            .fold(self.identity(), |acc, &i| acc.mul(&self.0.generators[i as usize]))
    }
}
