use core::fmt;

use smallvec::SmallVec;

/// Index of a generator in a [`GroupHandle`](super::GroupHandle)'s generator list.
pub type Gen = u16;

/// A word in the generators, read left to right as a product.
pub type Word = SmallVec<[Gen; 8]>;

/// Finite set of lit lamps for the lamplighter group, kept sorted and duplicate free.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lamps(SmallVec<[i32; 8]>);

impl Lamps {
    pub fn empty() -> Self {
        Lamps(SmallVec::new())
    }

    pub fn single(position: i32) -> Self {
        let mut v = SmallVec::new();
        v.push(position);
        Lamps(v)
    }

    pub fn from_positions<I: IntoIterator<Item = i32>>(positions: I) -> Self {
        // toggling semantics: a position listed twice is switched off again
        let mut out = Lamps::empty();
        for p in positions {
            out = out.toggled(p);
        }
        out
    }

    pub fn positions(&self) -> impl Iterator<Item = i32> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn toggled(&self, p: i32) -> Lamps {
        let mut v = self.0.clone();
        match v.binary_search(&p) {
            Ok(i) => {
                v.remove(i);
            }
            Err(i) => v.insert(i, p),
        }
        Lamps(v)
    }

    /// Symmetric difference of `self` with `other` translated by `shift`.
    pub fn xor_shifted(&self, other: &Lamps, shift: i32) -> Lamps {
        let mut out: SmallVec<[i32; 8]> = SmallVec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        let a = &self.0;
        let b = &other.0;
        while i < a.len() || j < b.len() {
            let bj = b.get(j).map(|p| p + shift);
            match (a.get(i), bj) {
                (Some(&x), Some(y)) if x == y => {
                    i += 1;
                    j += 1;
                }
                (Some(&x), Some(y)) if x < y => {
                    out.push(x);
                    i += 1;
                }
                (Some(_), Some(y)) => {
                    out.push(y);
                    j += 1;
                }
                (Some(&x), None) => {
                    out.push(x);
                    i += 1;
                }
                (None, Some(y)) => {
                    out.push(y);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        Lamps(out)
    }

    pub fn shifted(&self, shift: i32) -> Lamps {
        Lamps(self.0.iter().map(|p| p + shift).collect())
    }
}

/// Permutation of `{0, .., n-1}` with trailing fixed points trimmed, so that
/// the encoding is canonical for finitary permutations of the naturals.
/// Products follow `(p * q)(i) = p(q(i))`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Perm(SmallVec<[u16; 12]>);

impl Perm {
    pub fn identity() -> Self {
        Perm(SmallVec::new())
    }

    /// Builds a permutation from its image array. Returns `None` if the array
    /// is not a bijection of `{0, .., len-1}`.
    pub fn from_images(images: &[u16]) -> Option<Self> {
        let mut seen = alloc::vec![false; images.len()];
        for &i in images {
            let i = i as usize;
            if i >= images.len() || seen[i] {
                return None;
            }
            seen[i] = true;
        }
        let mut v: SmallVec<[u16; 12]> = images.iter().copied().collect();
        trim(&mut v);
        Some(Perm(v))
    }

    pub fn transposition(i: u16, j: u16) -> Self {
        let n = i.max(j) as usize + 1;
        let mut v: SmallVec<[u16; 12]> = (0..n as u16).collect();
        v.swap(i as usize, j as usize);
        trim(&mut v);
        Perm(v)
    }

    /// Smallest `n` such that every moved point is below `n`.
    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn apply(&self, i: u16) -> u16 {
        self.0.get(i as usize).copied().unwrap_or(i)
    }

    pub fn images(&self, n: usize) -> alloc::vec::Vec<u16> {
        (0..n as u16).map(|i| self.apply(i)).collect()
    }

    pub fn compose(&self, other: &Perm) -> Perm {
        let n = self.0.len().max(other.0.len());
        let mut v: SmallVec<[u16; 12]> = (0..n as u16).map(|i| self.apply(other.apply(i))).collect();
        trim(&mut v);
        Perm(v)
    }

    pub fn inverse(&self) -> Perm {
        let mut v: SmallVec<[u16; 12]> = SmallVec::from_elem(0, self.0.len());
        for (i, &p) in self.0.iter().enumerate() {
            v[p as usize] = i as u16;
        }
        Perm(v)
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    /// Nontrivial cycles, each starting at its least point, ordered by that point.
    pub fn cycles(&self) -> alloc::vec::Vec<alloc::vec::Vec<u16>> {
        let n = self.0.len();
        let mut seen = alloc::vec![false; n];
        let mut out = alloc::vec::Vec::new();
        for start in 0..n {
            if seen[start] || self.0[start] as usize == start {
                continue;
            }
            let mut cycle = alloc::vec::Vec::new();
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                cycle.push(i as u16);
                i = self.0[i] as usize;
            }
            out.push(cycle);
        }
        out
    }
}

fn trim(v: &mut SmallVec<[u16; 12]>) {
    while let Some(&last) = v.last() {
        if last as usize == v.len() - 1 {
            v.pop();
        } else {
            break;
        }
    }
}

/// Normal form of a group element. Equality of encodings is equality of elements.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupElement {
    Trivial,
    /// ℤ^d as an integer vector.
    Lattice(SmallVec<[i64; 3]>),
    /// `t^translation s^reflected` in the infinite dihedral group.
    Dihedral { translation: i64, reflected: bool },
    /// Upper unitriangular matrix `[[1,a,c],[0,1,b],[0,0,1]]`.
    Heisenberg { a: i64, b: i64, c: i64 },
    /// Lamp configuration and lamplighter position in ℤ/2 ≀ ℤ.
    Lamplighter { lamps: Lamps, shift: i32 },
    Perm(Perm),
}

impl GroupElement {
    pub fn lattice<I: IntoIterator<Item = i64>>(coords: I) -> Self {
        GroupElement::Lattice(coords.into_iter().collect())
    }

    pub fn int(n: i64) -> Self {
        GroupElement::lattice([n])
    }

    /// Group product `self * other`. Both operands must come from the same family.
    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        use GroupElement::*;
        match (self, other) {
            (Trivial, Trivial) => Trivial,
            (Lattice(a), Lattice(b)) => {
                debug_assert_eq!(a.len(), b.len());
                Lattice(a.iter().zip(b.iter()).map(|(x, y)| x + y).collect())
            }
            (
                Dihedral { translation: n, reflected: r },
                Dihedral { translation: m, reflected: q },
            ) => Dihedral {
                translation: if *r { n - m } else { n + m },
                reflected: r ^ q,
            },
            (Heisenberg { a, b, c }, Heisenberg { a: a2, b: b2, c: c2 }) => Heisenberg {
                a: a + a2,
                b: b + b2,
                c: c + c2 + a * b2,
            },
            (Lamplighter { lamps: f, shift: k }, Lamplighter { lamps: g, shift: m }) => Lamplighter {
                lamps: f.xor_shifted(g, *k),
                shift: k + m,
            },
            (Perm(p), Perm(q)) => Perm(p.compose(q)),
            (a, b) => panic!("cannot multiply elements of different families: {a} * {b}"),
        }
    }

    pub fn inv(&self) -> GroupElement {
        use GroupElement::*;
        match self {
            Trivial => Trivial,
            Lattice(a) => Lattice(a.iter().map(|x| -x).collect()),
            Dihedral { translation, reflected } => {
                if *reflected {
                    self.clone()
                } else {
                    Dihedral { translation: -translation, reflected: false }
                }
            }
            Heisenberg { a, b, c } => Heisenberg { a: -a, b: -b, c: -c + a * b },
            Lamplighter { lamps, shift } => Lamplighter {
                lamps: lamps.shifted(-shift),
                shift: -shift,
            },
            Perm(p) => Perm(p.inverse()),
        }
    }

    pub fn conj_by(&self, g: &GroupElement) -> GroupElement {
        g.mul(self).mul(&g.inv())
    }

    pub fn is_identity(&self) -> bool {
        use GroupElement::*;
        match self {
            Trivial => true,
            Lattice(a) => a.iter().all(|&x| x == 0),
            Dihedral { translation, reflected } => *translation == 0 && !reflected,
            Heisenberg { a, b, c } => *a == 0 && *b == 0 && *c == 0,
            Lamplighter { lamps, shift } => lamps.is_empty() && *shift == 0,
            Perm(p) => p.is_identity(),
        }
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use GroupElement::*;
        match self {
            Trivial => write!(f, "e"),
            Lattice(a) if a.len() == 1 => write!(f, "{}", a[0]),
            Lattice(a) => {
                write!(f, "(")?;
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
            Dihedral { translation, reflected } => {
                match (*translation, *reflected) {
                    (0, false) => write!(f, "e")?,
                    (0, true) => {}
                    (n, _) => write!(f, "t^{n}")?,
                }
                if *reflected {
                    write!(f, "s")?;
                }
                Ok(())
            }
            Heisenberg { a, b, c } => write!(f, "[{a},{b},{c}]"),
            Lamplighter { lamps, shift } => {
                write!(f, "{{")?;
                for (i, p) in lamps.positions().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, "}};{shift}")
            }
            Perm(p) => {
                let cycles = p.cycles();
                if cycles.is_empty() {
                    return write!(f, "()");
                }
                for c in cycles {
                    write!(f, "(")?;
                    for (i, x) in c.iter().enumerate() {
                        if i > 0 {
                            write!(f, " ")?;
                        }
                        write!(f, "{}", x + 1)?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}
