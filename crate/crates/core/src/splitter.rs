//! Splitting set systems that do not lay out compactly.
//!
//! The dual hypergraph has a vertex per set and a hyperedge per element.
//! Small vertex separators of its primal graph cut the input into parts
//! that share only the separator sets, which are then drawn once per part.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::layout::{compactness_gap, LayoutError, LayoutSolution};
use crate::model::{ElementId, SetId, SetSystem, ShapeClass};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualHypergraph {
    pub vertices: BTreeSet<SetId>,
    /// Element id to the sets containing it, for elements in at least one set.
    pub hyperedges: BTreeMap<ElementId, BTreeSet<SetId>>,
}

pub fn build_dual_hypergraph(sys: &SetSystem) -> DualHypergraph {
    let vertices = sys.sets().iter().map(|s| s.id.clone()).collect();
    let hyperedges = sys
        .elements()
        .iter()
        .filter_map(|e| {
            let sets: BTreeSet<SetId> = sys.sets_of(&e.id).into_iter().cloned().collect();
            (!sets.is_empty()).then(|| (e.id.clone(), sets))
        })
        .collect();
    DualHypergraph {
        vertices,
        hyperedges,
    }
}

impl DualHypergraph {
    /// Primal adjacency: two sets are adjacent iff some element lies in both.
    pub fn adjacency(&self) -> BTreeMap<&SetId, BTreeSet<&SetId>> {
        let mut adj: BTreeMap<&SetId, BTreeSet<&SetId>> =
            self.vertices.iter().map(|v| (v, BTreeSet::new())).collect();
        for edge in self.hyperedges.values() {
            for a in edge {
                for b in edge {
                    if a != b {
                        adj.get_mut(a).expect("declared vertex").insert(b);
                    }
                }
            }
        }
        adj
    }

    /// Connected components of the primal graph with `removed` deleted,
    /// each sorted, listed by their smallest vertex.
    pub fn components_without(&self, removed: &BTreeSet<SetId>) -> Vec<BTreeSet<SetId>> {
        let adj = self.adjacency();
        let mut seen: BTreeSet<&SetId> = BTreeSet::new();
        let mut out = Vec::new();
        for v in &self.vertices {
            if removed.contains(v) || seen.contains(v) {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut stack = vec![v];
            seen.insert(v);
            while let Some(u) = stack.pop() {
                comp.insert(u.clone());
                for w in &adj[u] {
                    if !removed.contains(*w) && seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
            out.push(comp);
        }
        out
    }
}

/// Parameters of separator enumeration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparatorOptions {
    pub max_size: usize,
    /// Allowed merged component sizes, as fractions of the vertex count.
    pub balance: (f64, f64),
}

impl Default for SeparatorOptions {
    fn default() -> Self {
        Self {
            max_size: 5,
            balance: (1.0 / 3.0, 2.0 / 3.0),
        }
    }
}

/// Weight of each component above the maximum size in the score.
pub const OVERSIZE_PENALTY: u64 = 10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeparatorCandidate {
    pub removed: BTreeSet<SetId>,
    /// Merged components, in the order produced by merging.
    pub components: Vec<BTreeSet<SetId>>,
    pub score: u64,
}

/// `ceil(2n / 3)`, the size above which a component is penalized.
pub fn max_component_size(n: usize) -> usize {
    (2 * n).div_ceil(3)
}

/// Groups components into `k` groups, largest component first, each into
/// the currently smallest group. Ties go to the lower group index.
fn merge_into(components: &[BTreeSet<SetId>], k: usize) -> Vec<BTreeSet<SetId>> {
    let mut order: Vec<&BTreeSet<SetId>> = components.iter().collect();
    order.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let mut groups: Vec<BTreeSet<SetId>> = vec![BTreeSet::new(); k];
    for c in order {
        let target = (0..k).min_by_key(|&i| (groups[i].len(), i)).expect("k >= 1");
        groups[target].extend(c.iter().cloned());
    }
    groups
}

fn within(size: usize, n: usize, balance: (f64, f64)) -> bool {
    let s = size as f64;
    let n = n as f64;
    s >= balance.0 * n - 1e-9 && s <= balance.1 * n + 1e-9
}

/// Merges components into as many groups as possible while every group
/// lies inside the balance window. `None` if no grouping fits.
pub fn merge_components(
    components: &[BTreeSet<SetId>],
    n: usize,
    balance: (f64, f64),
) -> Option<Vec<BTreeSet<SetId>>> {
    (2..=components.len()).rev().find_map(|k| {
        let groups = merge_into(components, k);
        groups
            .iter()
            .all(|g| within(g.len(), n, balance))
            .then_some(groups)
    })
}

/// Number of components that hold a neighbor of `v`.
pub fn copies_of(g: &DualHypergraph, v: &SetId, components: &[BTreeSet<SetId>]) -> usize {
    let adj = g.adjacency();
    components
        .iter()
        .filter(|c| adj[v].iter().any(|w| c.contains(*w)))
        .count()
}

pub fn score_candidate(
    g: &DualHypergraph,
    removed: &BTreeSet<SetId>,
    components: &[BTreeSet<SetId>],
    max_component: usize,
) -> u64 {
    let copies: usize = removed.iter().map(|v| copies_of(g, v, components)).sum();
    let oversize = components.iter().filter(|c| c.len() > max_component).count();
    let biggest = components.iter().map(|c| c.len()).max().unwrap_or(0);
    let smallest = components.iter().map(|c| c.len()).min().unwrap_or(0);
    components.len() as u64
        + removed.len() as u64
        + copies as u64
        + OVERSIZE_PENALTY * oversize as u64
        + (biggest - smallest) as u64
}

fn for_each_subset<T: Clone>(items: &[T], max: usize, f: &mut impl FnMut(&[T])) {
    fn go<T: Clone>(items: &[T], start: usize, max: usize, cur: &mut Vec<T>, f: &mut impl FnMut(&[T])) {
        f(cur);
        if cur.len() == max {
            return;
        }
        for i in start..items.len() {
            cur.push(items[i].clone());
            go(items, i + 1, max, cur, f);
            cur.pop();
        }
    }
    go(items, 0, max, &mut Vec::new(), f);
}

/// All separators of at most `opts.max_size` vertices (including the empty
/// one when the graph is already disconnected) whose merged components fit
/// the balance window, sorted best first.
pub fn enumerate_separators(g: &DualHypergraph, opts: &SeparatorOptions) -> Vec<SeparatorCandidate> {
    let n = g.vertices.len();
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    let verts: Vec<SetId> = g.vertices.iter().cloned().collect();
    let max_comp = max_component_size(n);
    for_each_subset(&verts, opts.max_size.min(n - 1), &mut |s| {
        let removed: BTreeSet<SetId> = s.iter().cloned().collect();
        let comps = g.components_without(&removed);
        if comps.len() < 2 {
            return;
        }
        if let Some(components) = merge_components(&comps, n, opts.balance) {
            let score = score_candidate(g, &removed, &components, max_comp);
            out.push(SeparatorCandidate {
                removed,
                components,
                score,
            });
        }
    });
    out.sort_by(|a, b| {
        (a.score, a.removed.len(), &a.removed).cmp(&(b.score, b.removed.len(), &b.removed))
    });
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitPlan {
    pub parts: Vec<SetSystem>,
    pub duplicated_sets: BTreeSet<SetId>,
    /// Separator used, empty for the fallback.
    pub separator: BTreeSet<SetId>,
    pub fallback: bool,
}

struct PartBuilder {
    sets: BTreeSet<SetId>,
    elements: BTreeSet<ElementId>,
}

fn finish(sys: &SetSystem, parts: Vec<PartBuilder>, separator: BTreeSet<SetId>, fallback: bool) -> SplitPlan {
    let parts: Vec<SetSystem> = parts
        .into_iter()
        .filter(|p| !p.elements.is_empty())
        .map(|p| sys.restrict(&p.elements).expect("restriction of a valid system"))
        .collect();
    let mut count: BTreeMap<&SetId, usize> = BTreeMap::new();
    for p in &parts {
        for s in p.sets() {
            *count.entry(&s.id).or_default() += 1;
        }
    }
    let duplicated_sets = count.into_iter().filter(|(_, c)| *c >= 2).map(|(s, _)| s.clone()).collect();
    SplitPlan {
        parts,
        duplicated_sets,
        separator,
        fallback,
    }
}

/// Elements whose sets all lie in the separator, largest hyperedge first.
fn separator_only<'a>(g: &'a DualHypergraph, removed: &BTreeSet<SetId>) -> Vec<(&'a ElementId, &'a BTreeSet<SetId>)> {
    let mut v: Vec<_> = g
        .hyperedges
        .iter()
        .filter(|(_, e)| e.is_subset(removed))
        .collect();
    v.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(b.0)));
    v
}

fn free_elements(sys: &SetSystem, g: &DualHypergraph) -> Vec<ElementId> {
    sys.elements()
        .iter()
        .filter(|e| !g.hyperedges.contains_key(&e.id))
        .map(|e| e.id.clone())
        .collect()
}

fn place_free(sys: &SetSystem, g: &DualHypergraph, parts: &mut [PartBuilder]) {
    for e in free_elements(sys, g) {
        let i = (0..parts.len()).min_by_key(|&i| (parts[i].elements.len(), i)).expect("parts");
        parts[i].elements.insert(e);
    }
}

/// Splits `sys` along candidate `c`. Separator sets are copied into each
/// part that receives one of their elements.
pub fn apply_split(sys: &SetSystem, g: &DualHypergraph, c: &SeparatorCandidate) -> SplitPlan {
    let mut parts: Vec<PartBuilder> = c
        .components
        .iter()
        .map(|comp| PartBuilder {
            sets: comp.clone(),
            elements: BTreeSet::new(),
        })
        .collect();
    for (e, edge) in &g.hyperedges {
        if let Some(v) = edge.iter().find(|v| !c.removed.contains(*v)) {
            let i = parts.iter().position(|p| p.sets.contains(v)).expect("component of v");
            parts[i].elements.insert(e.clone());
        }
    }
    // separator copies next to their neighbors
    let adj = g.adjacency();
    for v in &c.removed {
        for p in parts.iter_mut() {
            if adj[v].iter().any(|w| p.sets.contains(*w) && !c.removed.contains(*w)) {
                p.sets.insert(v.clone());
            }
        }
    }
    for (e, edge) in separator_only(g, &c.removed) {
        let i = (0..parts.len())
            .min_by_key(|&i| {
                let overlap = parts[i].sets.intersection(edge).count();
                (usize::MAX - overlap, parts[i].sets.len(), parts[i].elements.len(), i)
            })
            .expect("at least two parts");
        parts[i].elements.insert(e.clone());
        parts[i].sets.extend(edge.iter().cloned());
    }
    place_free(sys, g, &mut parts);
    finish(sys, parts, c.removed.clone(), false)
}

/// Split used when no separator qualifies: every set is duplicated into two
/// parts and elements are dealt out, largest hyperedge first, to the part
/// with fewer elements (ties to larger overlap, then the first part).
pub fn fallback_split(sys: &SetSystem, g: &DualHypergraph) -> SplitPlan {
    let mut parts: Vec<PartBuilder> = (0..2)
        .map(|_| PartBuilder {
            sets: BTreeSet::new(),
            elements: BTreeSet::new(),
        })
        .collect();
    for (e, edge) in separator_only(g, &g.vertices) {
        let i = (0..2)
            .min_by_key(|&i| {
                let overlap = parts[i].sets.intersection(edge).count();
                (parts[i].elements.len(), usize::MAX - overlap, i)
            })
            .expect("two parts");
        parts[i].elements.insert(e.clone());
        parts[i].sets.extend(edge.iter().cloned());
    }
    place_free(sys, g, &mut parts);
    finish(sys, parts, BTreeSet::new(), true)
}

/// Best split of `sys`: the top-ranked separator, else the fallback.
pub fn plan_split(sys: &SetSystem, opts: &SeparatorOptions) -> SplitPlan {
    let g = build_dual_hypergraph(sys);
    match enumerate_separators(&g, opts).first() {
        Some(c) => apply_split(sys, &g, c),
        None => fallback_split(sys, &g),
    }
}

/// Gap threshold multiplier used when none is configured.
pub fn default_threshold_factor(cls: ShapeClass) -> f64 {
    match cls {
        ShapeClass::Rectangle => 3.0,
        _ => 1.0,
    }
}

/// True iff the layout failed or leaves more than `factor * n / 5` empty
/// cells inside the hull of the occupied cells.
pub fn should_split(result: &Result<LayoutSolution, LayoutError>, n: usize, factor: f64) -> bool {
    match result {
        Err(e) => e.is_failure(),
        Ok(sol) => gap_exceeds(compactness_gap(&sol.layout), n, factor),
    }
}

pub fn gap_exceeds(gap: usize, n: usize, factor: f64) -> bool {
    gap as f64 > factor * n as f64 / 5.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Element, SetDef};
    use alloc::format;
    use alloc::string::String;

    fn ids(v: &[&str]) -> BTreeSet<SetId> {
        v.iter().map(|s| SetId::from(*s)).collect()
    }

    /// Sets given by name and their element names.
    fn system(sets: &[(&str, &[&str])]) -> SetSystem {
        let mut names: BTreeSet<&str> = BTreeSet::new();
        for (_, m) in sets {
            names.extend(m.iter());
        }
        let elements = names.iter().map(|e| Element::text(e, "x")).collect();
        let defs = sets.iter().map(|(s, m)| SetDef::new(s, m.iter().copied())).collect();
        SetSystem::new(elements, defs).unwrap()
    }

    fn path() -> SetSystem {
        system(&[("A", &["e1"]), ("B", &["e1", "e2"]), ("C", &["e2"])])
    }

    fn star(leaves: usize) -> SetSystem {
        let names: Vec<(String, String)> = (0..leaves).map(|i| (format!("L{i}"), format!("e{i}"))).collect();
        let center: Vec<&str> = names.iter().map(|(_, e)| e.as_str()).collect();
        let mut sets: Vec<(&str, Vec<&str>)> = vec![("c", center)];
        for (s, e) in &names {
            sets.push((s.as_str(), vec![e.as_str()]));
        }
        let borrowed: Vec<(&str, &[&str])> = sets.iter().map(|(s, m)| (*s, m.as_slice())).collect();
        system(&borrowed)
    }

    #[test]
    fn dual_hypergraph_examples() {
        let g = build_dual_hypergraph(&system(&[("A", &["e1", "e2", "e3"])]));
        assert_eq!(g.vertices.len(), 1);
        assert_eq!(g.hyperedges.len(), 3);
        assert!(g.hyperedges.values().all(|e| *e == ids(&["A"])));

        let g = build_dual_hypergraph(&system(&[("A", &["e1", "e2"]), ("B", &["e2"])]));
        assert_eq!(g.hyperedges[&ElementId::from("e1")], ids(&["A"]));
        assert_eq!(g.hyperedges[&ElementId::from("e2")], ids(&["A", "B"]));

        let g = build_dual_hypergraph(&star(6));
        assert_eq!(g.vertices.len(), 7);
        assert_eq!(g.hyperedges.len(), 6);
        assert!(g.hyperedges.values().all(|e| e.len() == 2));
    }

    #[test]
    fn path_separator_and_split() {
        let sys = path();
        let g = build_dual_hypergraph(&sys);
        let cands = enumerate_separators(&g, &SeparatorOptions::default());
        let best = &cands[0];
        assert_eq!(best.removed, ids(&["B"]));
        assert_eq!(best.components, vec![ids(&["A"]), ids(&["C"])]);
        assert_eq!(best.score, 5);
        let plan = apply_split(&sys, &g, best);
        assert_eq!(plan.parts.len(), 2);
        assert_eq!(plan.duplicated_sets, ids(&["B"]));
        let p0: BTreeSet<&str> = plan.parts[0].sets().iter().map(|s| s.id.as_str()).collect();
        assert_eq!(p0, ["A", "B"].into_iter().collect());
        assert_eq!(plan.parts[0].elements()[0].id.as_str(), "e1");
        assert_eq!(plan.parts[1].elements()[0].id.as_str(), "e2");
    }

    #[test]
    fn star_merges_into_two_triples() {
        let sys = star(6);
        let g = build_dual_hypergraph(&sys);
        let cands = enumerate_separators(&g, &SeparatorOptions::default());
        let best = &cands[0];
        assert_eq!(best.removed, ids(&["c"]));
        let sizes: Vec<usize> = best.components.iter().map(|c| c.len()).collect();
        assert_eq!(sizes, vec![3, 3]);
        assert_eq!(best.score, 5);
        let unbalanced = [
            ids(&["L0", "L1", "L2", "L3"]),
            ids(&["L4", "L5"]),
        ];
        assert_eq!(score_candidate(&g, &ids(&["c"]), &unbalanced, max_component_size(7)), 7);
    }

    #[test]
    fn complete_graph_has_no_separator() {
        let sys = system(&[
            ("A", &["ab", "ac", "ad"]),
            ("B", &["ab", "bc", "bd"]),
            ("C", &["ac", "bc", "cd"]),
            ("D", &["ad", "bd", "cd"]),
        ]);
        let g = build_dual_hypergraph(&sys);
        assert!(enumerate_separators(&g, &SeparatorOptions::default()).is_empty());
        let plan = plan_split(&sys, &SeparatorOptions::default());
        assert!(plan.fallback);
        assert_eq!(plan.parts.len(), 2);
        assert_eq!(plan.parts[0].len() + plan.parts[1].len(), 6);
        assert_eq!(plan.parts[0].len(), 3);
    }

    #[test]
    fn oversize_penalty_is_ten() {
        let g = build_dual_hypergraph(&star(6));
        let lopsided = [ids(&["L0", "L1", "L2", "L3", "L4"]), ids(&["L5"])];
        // 2 components + 1 removed + 2 copies + 10 oversize + 4 difference
        assert_eq!(max_component_size(7), 5);
        let six = [ids(&["L0", "L1", "L2", "L3", "L4", "L5"])];
        assert_eq!(score_candidate(&g, &ids(&["c"]), &lopsided, 5), 2 + 1 + 2 + 4);
        assert_eq!(score_candidate(&g, &ids(&["c"]), &six, 5), 1 + 1 + 1 + 10);
    }

    #[test]
    fn split_trigger_boundary() {
        assert!(!gap_exceeds(5, 25, 1.0));
        assert!(gap_exceeds(6, 25, 1.0));
        assert!(should_split(&Err(LayoutError::Timeout), 25, 1.0));
        assert!(should_split(&Err(LayoutError::Infeasible), 25, 1.0));
        assert!(!gap_exceeds(15, 25, default_threshold_factor(ShapeClass::Rectangle)));
    }

    #[test]
    fn separator_only_elements_follow_overlap() {
        // B and D separate A from C; element "bd" lies only in the separator.
        let sys = system(&[
            ("A", &["a", "ab"]),
            ("B", &["ab", "bc", "bd"]),
            ("C", &["bc", "c", "cd"]),
            ("D", &["cd", "bd"]),
        ]);
        let g = build_dual_hypergraph(&sys);
        let c = SeparatorCandidate {
            removed: ids(&["B", "D"]),
            components: vec![ids(&["A"]), ids(&["C"])],
            score: 0,
        };
        let plan = apply_split(&sys, &g, &c);
        // part 1 already holds copies of both B and D
        let p1: BTreeSet<&str> = plan.parts[1].elements().iter().map(|e| e.id.as_str()).collect();
        assert!(p1.contains("bd"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_system() -> impl Strategy<Value = SetSystem> {
            (2usize..7, proptest::collection::vec(proptest::collection::btree_set(0usize..10, 1..4), 2..7)).prop_map(|(_, sets)| {
                let names: Vec<String> = (0..sets.len()).map(|i| format!("S{i}")).collect();
                let members: Vec<Vec<String>> = sets.iter().map(|m| m.iter().map(|e| format!("e{e}")).collect()).collect();
                let mut elems: BTreeSet<String> = members.iter().flatten().cloned().collect();
                elems.insert(String::from("free"));
                let elements = elems.iter().map(|e| Element::text(e, "x")).collect();
                let defs = names
                    .iter()
                    .zip(&members)
                    .map(|(n, m)| SetDef::new(n, m.iter().map(|s| s.as_str())))
                    .collect();
                SetSystem::new(elements, defs).unwrap()
            })
        }

        proptest! {
            #[test]
            fn splits_partition_elements(sys in random_system()) {
                let g = build_dual_hypergraph(&sys);
                let cands = enumerate_separators(&g, &SeparatorOptions::default());
                for w in cands.windows(2) {
                    prop_assert!((w[0].score, w[0].removed.len()) <= (w[1].score, w[1].removed.len()));
                }
                for c in &cands {
                    let n = g.vertices.len();
                    let recomputed = score_candidate(&g, &c.removed, &c.components, max_component_size(n));
                    prop_assert_eq!(recomputed, c.score);
                    prop_assert!(c.components.iter().all(|k| within(k.len(), n, (1.0/3.0, 2.0/3.0))));
                }
                let plan = plan_split(&sys, &SeparatorOptions::default());
                let mut seen: BTreeMap<ElementId, usize> = BTreeMap::new();
                for p in &plan.parts {
                    for e in p.elements() {
                        *seen.entry(e.id.clone()).or_default() += 1;
                    }
                }
                prop_assert_eq!(seen.len(), sys.len());
                prop_assert!(seen.values().all(|c| *c == 1));
                let covered: BTreeSet<SetId> = plan.parts.iter().flat_map(|p| p.sets().iter().map(|s| s.id.clone())).collect();
                prop_assert_eq!(covered.len(), sys.sets().len());
                if !plan.fallback {
                    for p in &plan.parts {
                        prop_assert!(p.sets().iter().any(|s| !plan.duplicated_sets.contains(&s.id)));
                    }
                }
            }
        }
    }
}
