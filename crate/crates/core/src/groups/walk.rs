use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::mem;

use super::element::{Gen, GroupElement, Word};
use super::handle::GroupHandle;

/// Breadth-first enumeration of a Cayley graph in shortlex order.
///
/// Only the previous, current and next spheres are kept; this is enough
/// because generator sets are symmetric, so neighbours of sphere `r` lie in
/// spheres `r - 1`, `r` and `r + 1`.
pub struct BallWalker<'a> {
    group: &'a GroupHandle,
    track_words: bool,
    started: bool,
    prev: BTreeSet<GroupElement>,
    cur: Vec<GroupElement>,
    cur_set: BTreeSet<GroupElement>,
    cur_words: Vec<Word>,
    next: Vec<GroupElement>,
    next_set: BTreeSet<GroupElement>,
    next_words: Vec<Word>,
    radius: usize,
    pos: usize,
    gen_pos: usize,
}

impl<'a> BallWalker<'a> {
    pub fn new(group: &'a GroupHandle) -> Self {
        BallWalker {
            group,
            track_words: false,
            started: false,
            prev: BTreeSet::new(),
            cur: Vec::new(),
            cur_set: BTreeSet::new(),
            cur_words: Vec::new(),
            next: Vec::new(),
            next_set: BTreeSet::new(),
            next_words: Vec::new(),
            radius: 0,
            pos: 0,
            gen_pos: 0,
        }
    }

    pub fn with_words(group: &'a GroupHandle) -> Self {
        let mut w = Self::new(group);
        w.track_words = true;
        w
    }

    /// Next element, its word length, and (when tracking) its shortlex-least word.
    pub fn next_with_word(&mut self) -> Option<(GroupElement, usize, Word)> {
        if !self.started {
            self.started = true;
            let e = self.group.identity();
            self.cur.push(e.clone());
            self.cur_set.insert(e.clone());
            self.cur_words.push(Word::new());
            self.radius = 1;
            return Some((e, 0, Word::new()));
        }
        let gens = self.group.generators();
        if gens.is_empty() {
            return None;
        }
        loop {
            if self.pos >= self.cur.len() {
                if self.next.is_empty() {
                    return None;
                }
                self.prev = mem::take(&mut self.cur_set);
                self.cur = mem::take(&mut self.next);
                self.cur_set = mem::take(&mut self.next_set);
                self.cur_words = mem::take(&mut self.next_words);
                self.pos = 0;
                self.gen_pos = 0;
                self.radius += 1;
            }
            let parent = self.pos;
            let x = &self.cur[parent];
            let gi = self.gen_pos;
            let y = x.mul(&gens[gi]);
            self.gen_pos += 1;
            if self.gen_pos == gens.len() {
                self.gen_pos = 0;
                self.pos += 1;
            }
            if self.prev.contains(&y) || self.cur_set.contains(&y) || self.next_set.contains(&y) {
                continue;
            }
            let word = if self.track_words {
                let mut w = self.cur_words[parent].clone();
                w.push(gi as Gen);
                w
            } else {
                Word::new()
            };
            self.next.push(y.clone());
            self.next_set.insert(y.clone());
            if self.track_words {
                self.next_words.push(word.clone());
            }
            return Some((y, self.radius, word));
        }
    }
}

impl Iterator for BallWalker<'_> {
    type Item = (GroupElement, usize);

    fn next(&mut self) -> Option<Self::Item> {
        self.next_with_word().map(|(g, r, _)| (g, r))
    }
}
