//! Parsing of the textual element notation produced by `Display`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::element::{GroupElement, Lamps, Perm};
use super::handle::{Family, GroupHandle};
use super::GroupError;

fn bad(s: &str, why: &str) -> GroupError {
    GroupError::Parse(format!("{s:?}: {why}"))
}

fn ints<T: core::str::FromStr>(s: &str, body: &str) -> Result<Vec<T>, GroupError> {
    if body.trim().is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| bad(s, "expected integers")))
        .collect()
}

fn delimited<'a>(s: &'a str, open: char, close: char) -> Option<&'a str> {
    s.strip_prefix(open)?.strip_suffix(close)
}

/// Parses an element of `group`. Accepted forms, by family:
///
/// * trivial: `e`
/// * ℤ: `-3`; ℤ^d: `(1,0,-2)`
/// * D_∞: `e`, `s`, `t`, `t^-4`, `t^3s`
/// * Heisenberg: `[a,b,c]`
/// * lamplighter: `{0,2};-1` (lit lamps; position)
/// * permutations: cycles `(1 2)(3 4 5)` (1-based), `()`, or 0-based images `[1,0,2]`
pub fn parse_element(group: &GroupHandle, text: &str) -> Result<GroupElement, GroupError> {
    let s: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let s = s.as_str();
    let g = match group.family() {
        Family::Trivial => match s {
            "e" | "" => GroupElement::Trivial,
            _ => return Err(bad(s, "trivial group has only e")),
        },
        Family::Lattice { rank } => {
            let v: Vec<i64> = match delimited(s, '(', ')') {
                Some(body) => ints(s, body)?,
                None if s == "e" => alloc::vec![0; *rank],
                None => ints(s, s)?,
            };
            if v.len() != *rank {
                return Err(bad(s, "wrong rank"));
            }
            GroupElement::lattice(v)
        }
        Family::DihedralInf => {
            let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
            let (head, reflected) = match compact.strip_suffix('s') {
                Some(h) => (h, true),
                None => (compact.as_str(), false),
            };
            let translation = match head {
                "" | "e" => 0,
                "t" => 1,
                _ => head
                    .strip_prefix("t^")
                    .and_then(|n| n.parse::<i64>().ok())
                    .ok_or_else(|| bad(s, "expected t^n, s or t^ns"))?,
            };
            GroupElement::Dihedral { translation, reflected }
        }
        Family::Heisenberg => {
            let body = delimited(s, '[', ']').ok_or_else(|| bad(s, "expected [a,b,c]"))?;
            match ints::<i64>(s, body)?.as_slice() {
                [a, b, c] => GroupElement::Heisenberg { a: *a, b: *b, c: *c },
                _ => return Err(bad(s, "expected three coordinates")),
            }
        }
        Family::Lamplighter => {
            if s == "e" {
                return Ok(group.identity());
            }
            let (lamps, shift) = s.split_once(';').ok_or_else(|| bad(s, "expected {lamps};shift"))?;
            let body = delimited(lamps.trim(), '{', '}').ok_or_else(|| bad(s, "expected {lamps}"))?;
            let positions: Vec<i32> = ints(s, body)?;
            let mut sorted = positions.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != positions.len() {
                return Err(bad(s, "repeated lamp"));
            }
            let shift = shift.trim().parse::<i32>().map_err(|_| bad(s, "bad shift"))?;
            GroupElement::Lamplighter { lamps: Lamps::from_positions(positions), shift }
        }
        Family::FinitarySym { .. } | Family::FiniteTable { .. } => GroupElement::Perm(parse_perm(s)?),
    };
    if !group.contains(&g) {
        return Err(GroupError::ForeignElement(format!("{g} is not in {group}")));
    }
    Ok(g)
}

fn parse_perm(s: &str) -> Result<Perm, GroupError> {
    if s == "e" || s == "()" {
        return Ok(Perm::identity());
    }
    if let Some(body) = delimited(s, '[', ']') {
        let images: Vec<u16> = ints(s, body)?;
        return Perm::from_images(&images).ok_or_else(|| bad(s, "images are not a permutation"));
    }
    let mut p = Perm::identity();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let close = rest.find(')').ok_or_else(|| bad(s, "unbalanced cycle"))?;
        let cycle = rest[..close].strip_prefix('(').ok_or_else(|| bad(s, "expected '('"))?;
        rest = rest[close + 1..].trim_start();
        let pts: Vec<u16> = cycle
            .split(|c: char| c == ' ' || c == ',')
            .filter(|x| !x.is_empty())
            .map(|x| x.parse::<u16>().ok().filter(|&v| v >= 1).ok_or_else(|| bad(s, "points are 1-based")))
            .collect::<Result<_, _>>()?;
        let n = pts.iter().copied().max().unwrap_or(0) as usize;
        let mut images: Vec<u16> = (0..n as u16).collect();
        for (i, &a) in pts.iter().enumerate() {
            let b = pts[(i + 1) % pts.len()];
            if images[a as usize - 1] != a - 1 {
                return Err(bad(s, "repeated point in cycle"));
            }
            images[a as usize - 1] = b - 1;
        }
        let c = Perm::from_images(&images).ok_or_else(|| bad(s, "repeated point in cycle"))?;
        // cycles compose right to left, like the products they denote
        p = p.compose(&c);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::ball;

    #[test]
    fn display_round_trips() {
        for g in [
            GroupHandle::integers(),
            GroupHandle::lattice(2),
            GroupHandle::dihedral_inf(),
            GroupHandle::heisenberg(),
            GroupHandle::lamplighter(),
            GroupHandle::finitary_sym(5),
            GroupHandle::symmetric(4).unwrap(),
        ] {
            for x in ball(&g, 4).unwrap() {
                let shown = format!("{x}");
                assert_eq!(parse_element(&g, &shown).unwrap(), x, "{g}: {shown}");
            }
        }
    }

    #[test]
    fn rejects_malformed() {
        let l = GroupHandle::lamplighter();
        assert!(parse_element(&l, "{0,0};1").is_err());
        assert!(parse_element(&l, "0;1").is_err());
        let s = GroupHandle::finitary_sym(3);
        assert!(parse_element(&s, "(1 4)").is_err());
        assert!(parse_element(&s, "(0 1)").is_err());
        assert!(parse_element(&GroupHandle::lattice(2), "(1)").is_err());
    }

    #[test]
    fn perm_forms_agree() {
        let s = GroupHandle::finitary_sym(4);
        assert_eq!(parse_element(&s, "(1 2)").unwrap(), parse_element(&s, "[1,0]").unwrap());
        assert_eq!(
            parse_element(&s, "(1 2)(3 4)").unwrap(),
            parse_element(&s, "[1,0,3,2]").unwrap()
        );
    }
}
