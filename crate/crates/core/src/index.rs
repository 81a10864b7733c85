//! Exact nearest-neighbor search over a dialect vocabulary under
//! Levenshtein distance.
//!
//! Two index structures are provided. Both return the complete set of terms
//! whose distance is at most the k-th smallest distance, so the tie-breaking
//! in [`knn`] sees the same input regardless of the structure used.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;

use crate::distance::{levenshtein_bounded, levenshtein_chars};
use crate::error::{Error, Result};
use crate::vocab::DialectTermEntry;

#[derive(Debug, Clone)]
pub struct IndexedTerm {
    pub surface: String,
    pub freq: u64,
    chars: Box<[char]>,
}

impl IndexedTerm {
    fn new(entry: &DialectTermEntry) -> Self {
        IndexedTerm {
            surface: entry.surface.clone(),
            freq: entry.freq,
            chars: entry.surface.chars().collect(),
        }
    }
}

/// A term id (position in the indexed vocabulary) with its distance.
pub type Hit = (usize, usize);

pub trait NeighborIndex: Send + Sync {
    fn terms(&self) -> &[IndexedTerm];

    /// Every term within distance `max` of `query`, in no particular order.
    fn within(&self, query: &[char], max: usize) -> Vec<Hit>;

    /// Every term whose distance is at most the `k`-th smallest distance.
    /// Returns the whole vocabulary when it has at most `k` terms.
    fn cut_set(&self, query: &[char], k: usize) -> Vec<Hit>;

    fn len(&self) -> usize {
        self.terms().len()
    }

    fn is_empty(&self) -> bool {
        self.terms().is_empty()
    }
}

/// Keeps the hits at or below the k-th smallest distance.
fn truncate_to_cut(mut hits: Vec<Hit>, k: usize) -> Vec<Hit> {
    if hits.len() <= k {
        return hits;
    }
    hits.sort_unstable_by_key(|&(id, d)| (d, id));
    let boundary = hits[k - 1].1;
    hits.retain(|&(_, d)| d <= boundary);
    hits
}

/// Tracks the k-th smallest distance seen so far.
struct CutTracker {
    k: usize,
    hits: Vec<Hit>,
    // Max-heap over the k smallest distances.
    best: std::collections::BinaryHeap<usize>,
}

impl CutTracker {
    fn new(k: usize) -> Self {
        CutTracker {
            k,
            hits: Vec::new(),
            best: Default::default(),
        }
    }

    fn bound(&self) -> usize {
        if self.best.len() < self.k {
            usize::MAX
        } else {
            *self.best.peek().unwrap()
        }
    }

    fn push(&mut self, id: usize, d: usize) {
        if d > self.bound() {
            return;
        }
        self.hits.push((id, d));
        self.best.push(d);
        if self.best.len() > self.k {
            self.best.pop();
        }
    }

    fn finish(self) -> Vec<Hit> {
        truncate_to_cut(self.hits, self.k)
    }
}

/// Terms bucketed by length in chars. A query visits buckets in order of
/// increasing length difference, which is a lower bound on the distance,
/// and stops once that gap exceeds the current k-th best distance.
pub struct LengthBandIndex {
    terms: Vec<IndexedTerm>,
    buckets: BTreeMap<usize, Vec<usize>>,
}

impl LengthBandIndex {
    pub fn new(vocab: &[DialectTermEntry]) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let terms: Vec<IndexedTerm> = vocab.iter().map(IndexedTerm::new).collect();
        let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (id, t) in terms.iter().enumerate() {
            buckets.entry(t.chars.len()).or_default().push(id);
        }
        Ok(LengthBandIndex { terms, buckets })
    }

    /// Bucket lengths ordered by distance from `len`.
    fn band_order(&self, len: usize) -> Vec<(usize, usize)> {
        let mut order: Vec<(usize, usize)> =
            self.buckets.keys().map(|&l| (l.abs_diff(len), l)).collect();
        order.sort_unstable();
        order
    }
}

impl NeighborIndex for LengthBandIndex {
    fn terms(&self) -> &[IndexedTerm] {
        &self.terms
    }

    fn within(&self, query: &[char], max: usize) -> Vec<Hit> {
        let lo = query.len().saturating_sub(max);
        let hi = query.len().saturating_add(max);
        let mut out = Vec::new();
        for (_, ids) in self.buckets.range(lo..=hi) {
            for &id in ids {
                if let Some(d) = levenshtein_bounded(query, &self.terms[id].chars, max) {
                    out.push((id, d));
                }
            }
        }
        out
    }

    fn cut_set(&self, query: &[char], k: usize) -> Vec<Hit> {
        let mut tracker = CutTracker::new(k);
        for (gap, len) in self.band_order(query.len()) {
            let bound = tracker.bound();
            if gap > bound {
                break;
            }
            for &id in &self.buckets[&len] {
                let bound = tracker.bound();
                let d = if bound == usize::MAX {
                    Some(levenshtein_chars(query, &self.terms[id].chars))
                } else {
                    levenshtein_bounded(query, &self.terms[id].chars, bound)
                };
                if let Some(d) = d {
                    tracker.push(id, d);
                }
            }
        }
        tracker.finish()
    }
}

struct BkNode {
    id: usize,
    children: BTreeMap<usize, usize>,
}

/// Burkhard–Keller tree. Each child edge is labelled with its distance to
/// the parent; the triangle inequality prunes subtrees during search.
pub struct BkTree {
    terms: Vec<IndexedTerm>,
    nodes: Vec<BkNode>,
}

impl BkTree {
    pub fn new(vocab: &[DialectTermEntry]) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let terms: Vec<IndexedTerm> = vocab.iter().map(IndexedTerm::new).collect();
        let mut nodes = vec![BkNode {
            id: 0,
            children: BTreeMap::new(),
        }];
        for id in 1..terms.len() {
            let mut cur = 0;
            loop {
                let d = levenshtein_chars(&terms[nodes[cur].id].chars, &terms[id].chars);
                if d == 0 {
                    // Duplicate surface: indexed once.
                    break;
                }
                match nodes[cur].children.get(&d) {
                    Some(&next) => cur = next,
                    None => {
                        let new = nodes.len();
                        nodes.push(BkNode {
                            id,
                            children: BTreeMap::new(),
                        });
                        nodes[cur].children.insert(d, new);
                        break;
                    }
                }
            }
        }
        Ok(BkTree { terms, nodes })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

impl NeighborIndex for BkTree {
    fn terms(&self) -> &[IndexedTerm] {
        &self.terms
    }

    fn within(&self, query: &[char], max: usize) -> Vec<Hit> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let d = levenshtein_chars(query, &self.terms[node.id].chars);
            if d <= max {
                out.push((node.id, d));
            }
            for (_, &child) in node
                .children
                .range(d.saturating_sub(max)..=d.saturating_add(max))
            {
                stack.push(child);
            }
        }
        out
    }

    fn cut_set(&self, query: &[char], k: usize) -> Vec<Hit> {
        let mut tracker = CutTracker::new(k);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let d = levenshtein_chars(query, &self.terms[node.id].chars);
            tracker.push(node.id, d);
            let bound = tracker.bound();
            for (&edge, &child) in &node.children {
                if bound == usize::MAX || edge.abs_diff(d) <= bound {
                    stack.push(child);
                }
            }
        }
        tracker.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexKind {
    #[default]
    LengthBand,
    BkTree,
}

impl FromStr for IndexKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "band" | "length-band" => Ok(IndexKind::LengthBand),
            "bktree" | "bk-tree" => Ok(IndexKind::BkTree),
            other => Err(format!("unknown index kind `{other}`")),
        }
    }
}

pub fn build_index(vocab: &[DialectTermEntry], kind: IndexKind) -> Result<Box<dyn NeighborIndex>> {
    Ok(match kind {
        IndexKind::LengthBand => Box::new(LengthBandIndex::new(vocab)?),
        IndexKind::BkTree => Box::new(BkTree::new(vocab)?),
    })
}

/// One selected neighbor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbor {
    pub term: String,
    pub term_freq: u64,
    pub distance: usize,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnnResult {
    pub neighbors: Vec<Neighbor>,
    /// Set when the vocabulary had fewer than `k` terms.
    pub short: bool,
}

/// The `k` nearest terms to `query`.
///
/// Terms strictly closer than the k-th distance are always included. When
/// the boundary distance is shared by more terms than there are free slots,
/// the fillers are drawn uniformly from that tie set with `rng`; the tie set
/// is put in lexicographic order first so the draw does not depend on the
/// index structure.
pub fn knn<R: Rng + ?Sized>(
    query: &str,
    index: &dyn NeighborIndex,
    k: usize,
    rng: &mut R,
) -> Result<KnnResult> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    if index.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let q: Vec<char> = query.chars().collect();
    let terms = index.terms();
    let mut hits = index.cut_set(&q, k);
    hits.sort_by(|a, b| {
        a.1.cmp(&b.1)
            .then_with(|| terms[a.0].surface.cmp(&terms[b.0].surface))
    });
    let short = hits.len() < k;

    let selected: Vec<Hit> = if hits.len() <= k {
        hits
    } else {
        let boundary = hits[k - 1].1;
        let below = hits.iter().take_while(|h| h.1 < boundary).count();
        let ties: Vec<Hit> = hits[below..]
            .iter()
            .copied()
            .filter(|h| h.1 == boundary)
            .collect();
        let picks = sample(rng, ties.len(), k - below);
        let mut out = hits[..below].to_vec();
        out.extend(picks.into_iter().map(|i| ties[i]));
        out
    };

    let neighbors = selected
        .into_iter()
        .enumerate()
        .map(|(i, (id, d))| Neighbor {
            term: terms[id].surface.clone(),
            term_freq: terms[id].freq,
            distance: d,
            rank: i + 1,
        })
        .collect();
    Ok(KnnResult { neighbors, short })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vocab(words: &[&str]) -> Vec<DialectTermEntry> {
        words
            .iter()
            .map(|w| DialectTermEntry {
                surface: w.to_string(),
                freq: 1,
            })
            .collect()
    }

    #[test]
    fn empty_vocab_is_error() {
        assert!(matches!(LengthBandIndex::new(&[]), Err(Error::EmptyIndex)));
        assert!(matches!(BkTree::new(&[]), Err(Error::EmptyIndex)));
    }

    #[test]
    fn single_term_always_returned() {
        let v = vocab(&["Haus"]);
        for kind in [IndexKind::LengthBand, IndexKind::BkTree] {
            let idx = build_index(&v, kind).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            for q in ["a", "Hausmeister", ""] {
                let r = knn(q, idx.as_ref(), 3, &mut rng).unwrap();
                assert_eq!(r.neighbors.len(), 1);
                assert_eq!(r.neighbors[0].term, "Haus");
                assert!(r.short);
            }
        }
    }

    #[test]
    fn index_size_equals_vocab_size() {
        let v = vocab(&["a", "ab", "abc", "b", "xyz"]);
        assert_eq!(LengthBandIndex::new(&v).unwrap().len(), 5);
        assert_eq!(BkTree::new(&v).unwrap().node_count(), 5);
    }

    #[test]
    fn no_boundary_tie_is_seed_independent() {
        // distances from "aaaaa": a=1, b=2, c=2, d=5
        let v = vocab(&["aaaa", "aaxxa", "aaayy", "zzzzz"]);
        for kind in [IndexKind::LengthBand, IndexKind::BkTree] {
            let idx = build_index(&v, kind).unwrap();
            for seed in 0..20 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let r = knn("aaaaa", idx.as_ref(), 3, &mut rng).unwrap();
                let terms: Vec<_> = r.neighbors.iter().map(|n| n.term.as_str()).collect();
                assert_eq!(terms, ["aaaa", "aaayy", "aaxxa"]);
                assert!(!r.short);
            }
        }
    }

    #[test]
    fn boundary_tie_draws_from_tie_set() {
        // distances from "aaaaa": a=1, b=3, c=3, d=3
        let v = vocab(&["aaaa", "axxxa", "aayyy", "zzzaa"]);
        let tie_set = ["axxxa", "aayyy", "zzzaa"];
        let idx = LengthBandIndex::new(&v).unwrap();
        let mut seen = std::collections::HashSet::new();
        for seed in 0..64 {
            let pick = |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                knn("aaaaa", &idx, 2, &mut rng).unwrap()
            };
            let r = pick(seed);
            assert_eq!(r, pick(seed));
            assert_eq!(r.neighbors[0].term, "aaaa");
            assert_eq!(r.neighbors[0].distance, 1);
            assert_eq!(r.neighbors[1].distance, 3);
            assert!(tie_set.contains(&r.neighbors[1].term.as_str()));
            seen.insert(r.neighbors[1].term.clone());
        }
        assert_eq!(seen.len(), 3, "every tied term should be reachable");
    }

    #[test]
    fn small_vocab_is_flagged() {
        let v = vocab(&["a", "b", "c", "d", "e"]);
        let idx = BkTree::new(&v).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = knn("x", &idx, 10, &mut rng).unwrap();
        assert_eq!(r.neighbors.len(), 5);
        assert!(r.short);
    }

    #[test]
    fn within_matches_scan() {
        let v = vocab(&["Haus", "Hoas", "Heisl", "Maus", "Hausl", "Gaudi"]);
        for kind in [IndexKind::LengthBand, IndexKind::BkTree] {
            let idx = build_index(&v, kind).unwrap();
            let q: Vec<char> = "Haus".chars().collect();
            let mut got = idx.within(&q, 1);
            got.sort();
            assert_eq!(got, [(0, 0), (3, 1), (4, 1)]);
        }
    }
}
