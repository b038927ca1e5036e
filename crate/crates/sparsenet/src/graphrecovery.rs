//! Graph square root: rebuild the positive bipartite graph from the
//! distance-2 relation it induces on the lower side, or from the 3-uniform
//! hypergraph of triples sharing a parent.

use std::fmt::Write as _;

use rand::Rng as _;
use rand::seq::SliceRandom;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::correlation::{intersect_sorted, pair_key, triple_key, unpack_pair, unpack_triple, CorrelationGraph, CorrelationHypergraph};
use crate::error::{Error, Result};
use crate::graphprops::{check_degree_band, PropertyReport};
use crate::netmodel::SignedBipartiteGraph;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy)]
pub enum Relation<'a> {
    Pairwise(&'a CorrelationGraph),
    Threewise(&'a CorrelationHypergraph),
}

#[derive(Debug, Clone, Copy)]
pub struct RecoveryInstance<'a> {
    pub relation: Relation<'a>,
    /// Expected number of positive children per hidden unit.
    pub degree: f64,
    pub n: usize,
    /// Iteration cap; `None` means `200 n`.
    pub budget: Option<usize>,
}

impl<'a> RecoveryInstance<'a> {
    pub fn pairwise(g: &'a CorrelationGraph, degree: f64) -> Self {
        Self {
            relation: Relation::Pairwise(g),
            degree,
            n: g.n,
            budget: None,
        }
    }

    pub fn threewise(h: &'a CorrelationHypergraph, degree: f64) -> Self {
        Self {
            relation: Relation::Threewise(h),
            degree,
            n: h.n,
            budget: None,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = Some(budget);
        self
    }

    fn budget(&self) -> usize {
        self.budget.unwrap_or(200 * self.n)
    }

    fn validate(&self) -> Result<()> {
        if !(self.degree >= 2.0) {
            return Err(Error::InvalidParams(format!("recovery degree {} < 2", self.degree)));
        }
        Ok(())
    }
}

/// Anonymous hidden units, each given by its child set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredPositiveGraph {
    pub n_lower: usize,
    /// Sorted child sets, in discovery order.
    pub units: Vec<Vec<u32>>,
    /// Relation edges (or hyperedges) left unmarked.
    pub residue: usize,
    pub iterations: usize,
    /// Iterations that marked at least one new edge.
    pub successful_iterations: usize,
}

impl RecoveredPositiveGraph {
    pub fn num_units(&self) -> usize {
        self.units.len()
    }

    /// Child sets as a sorted family, for order-free comparison.
    pub fn family(&self) -> Vec<Vec<u32>> {
        let mut f = self.units.clone();
        f.sort();
        f
    }

    /// All-positive graph with one upper node per unit.
    pub fn to_graph(&self) -> SignedBipartiteGraph {
        SignedBipartiteGraph::from_edges(
            self.units.len(),
            self.n_lower,
            self.units
                .iter()
                .enumerate()
                .flat_map(|(u, s)| s.iter().map(move |&v| (u, v as usize, 1.0))),
        )
        .expect("recovered sets are valid")
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("recovered {} {} {}\n", self.units.len(), self.n_lower, self.residue);
        for (u, s) in self.units.iter().enumerate() {
            for v in s {
                let _ = writeln!(out, "{u} {v} 1");
            }
        }
        out
    }
}

/// Ground-truth family `{F(u)}` of a positive graph, ignoring childless units.
pub fn true_family(g_plus: &SignedBipartiteGraph) -> Vec<Vec<u32>> {
    let mut f: Vec<Vec<u32>> = g_plus.child_sets().into_iter().filter(|s| !s.is_empty()).collect();
    f.sort();
    f
}

/// Unmarked keys with O(1) uniform pick and removal.
struct Unmarked {
    keys: Vec<u64>,
    pos: FxHashMap<u64, usize>,
}

impl Unmarked {
    fn new(mut keys: Vec<u64>) -> Self {
        keys.sort_unstable();
        let pos = keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        Self { keys, pos }
    }

    fn len(&self) -> usize {
        self.keys.len()
    }

    fn pick(&self, rng: &mut Rng) -> u64 {
        self.keys[rng.gen_range(0..self.keys.len())]
    }

    fn remove(&mut self, k: u64) -> bool {
        let Some(i) = self.pos.remove(&k) else {
            return false;
        };
        self.keys.swap_remove(i);
        if i < self.keys.len() {
            self.pos.insert(self.keys[i], i);
        }
        true
    }
}

struct Progress {
    out: RecoveredPositiveGraph,
    seen: FxHashSet<Vec<u32>>,
}

impl Progress {
    fn new(n_lower: usize) -> Self {
        Self {
            out: RecoveredPositiveGraph {
                n_lower,
                units: Vec::new(),
                residue: 0,
                iterations: 0,
                successful_iterations: 0,
            },
            seen: FxHashSet::default(),
        }
    }

    fn emit(&mut self, s: Vec<u32>) {
        if self.seen.insert(s.clone()) {
            self.out.units.push(s);
        }
    }

    fn finish(mut self, residue: usize, budget: usize) -> Result<RecoveredPositiveGraph> {
        self.out.residue = residue;
        if residue > 0 {
            return Err(Error::IterationBudgetExhausted {
                budget,
                partial: Box::new(self.out),
            });
        }
        Ok(self.out)
    }
}

/// Runs the pairwise or 3-wise recovery loop according to the instance.
pub fn recover(inst: &RecoveryInstance<'_>, rng: &mut Rng) -> Result<RecoveredPositiveGraph> {
    match inst.relation {
        Relation::Pairwise(_) => recover_graph(inst, rng),
        Relation::Threewise(_) => recover_graph_3wise(inst, rng),
    }
}

pub fn recover_graph(inst: &RecoveryInstance<'_>, rng: &mut Rng) -> Result<RecoveredPositiveGraph> {
    inst.validate()?;
    let Relation::Pairwise(g) = inst.relation else {
        return Err(Error::InvalidParams("pairwise recovery needs a correlation graph".into()));
    };
    let d = inst.degree;
    let budget = inst.budget();
    let mut unmarked = Unmarked::new(g.edges().map(|(a, b)| pair_key(a, b)).collect());
    let mut prog = Progress::new(g.n);

    while unmarked.len() > 0 && prog.out.iterations < budget {
        prog.out.iterations += 1;
        let (v1, v2) = unpack_pair(unmarked.pick(rng));
        let mut s = intersect_sorted(g.neighbors(v1 as usize), g.neighbors(v2 as usize));
        s.push(v1);
        s.push(v2);
        s.sort_unstable();
        if (s.len() as f64) >= 1.3 * d {
            continue;
        }
        let s_prime: Vec<u32> = s
            .iter()
            .copied()
            .filter(|&v| intersect_sorted(g.neighbors(v as usize), &s).len() as f64 >= 0.8 * d - 1.0)
            .collect();
        if s_prime.is_empty() {
            continue;
        }
        let mut marked = false;
        for (i, &a) in s_prime.iter().enumerate() {
            for &b in &s_prime[i + 1..] {
                marked |= unmarked.remove(pair_key(a, b));
            }
        }
        if marked {
            prog.out.successful_iterations += 1;
        }
        prog.emit(s_prime);
    }
    prog.finish(unmarked.len(), budget)
}

/// `C(ceil(0.8 d) - 1, 2)`, the participation needed to stay in S'.
pub fn threewise_participation_cut(d: f64) -> usize {
    let k = ((0.8 * d).ceil() as usize).saturating_sub(1);
    k * k.saturating_sub(1) / 2
}

pub fn recover_graph_3wise(inst: &RecoveryInstance<'_>, rng: &mut Rng) -> Result<RecoveredPositiveGraph> {
    inst.validate()?;
    let Relation::Threewise(h) = inst.relation else {
        return Err(Error::InvalidParams("3-wise recovery needs a hypergraph".into()));
    };
    let d = inst.degree;
    let cut = threewise_participation_cut(d);
    let budget = inst.budget();
    let mut unmarked = Unmarked::new(h.hyperedges().into_iter().map(|[a, b, c]| triple_key(a, b, c)).collect());
    let mut prog = Progress::new(h.n);

    while unmarked.len() > 0 && prog.out.iterations < budget {
        prog.out.iterations += 1;
        let [v1, v2, v3] = unpack_triple(unmarked.pick(rng));
        let mut s = intersect_sorted(&intersect_sorted(h.thirds(v1, v2), h.thirds(v1, v3)), h.thirds(v2, v3));
        s.extend([v1, v2, v3]);
        s.sort_unstable();
        s.dedup();
        if (s.len() as f64) >= 1.3 * d {
            continue;
        }
        // Each hyperedge {v, a, b} inside S is seen once from a and once from b.
        let s_prime: Vec<u32> = s
            .iter()
            .copied()
            .filter(|&v| {
                let twice: usize = s
                    .iter()
                    .filter(|&&a| a != v)
                    .map(|&a| intersect_sorted(h.thirds(v, a), &s).len())
                    .sum();
                twice / 2 >= cut
            })
            .collect();
        if s_prime.is_empty() {
            continue;
        }
        let mut marked = false;
        for i in 0..s_prime.len() {
            for j in i + 1..s_prime.len() {
                for k in j + 1..s_prime.len() {
                    marked |= unmarked.remove(triple_key(s_prime[i], s_prime[j], s_prime[k]));
                }
            }
        }
        if marked {
            prog.out.successful_iterations += 1;
        }
        prog.emit(s_prime);
    }
    prog.finish(unmarked.len(), budget)
}

/// Distance-2 relation of a positive graph: pairs sharing a parent.
pub fn distance_two_graph(g_plus: &SignedBipartiteGraph) -> CorrelationGraph {
    let mut edges = Vec::new();
    for u in 0..g_plus.n_upper() {
        let c = g_plus.children(u);
        for (i, &(a, _)) in c.iter().enumerate() {
            for &(b, _) in &c[i + 1..] {
                edges.push((a, b));
            }
        }
    }
    CorrelationGraph::from_edges(g_plus.n_lower(), edges)
}

/// Triples sharing a parent in a positive graph.
pub fn common_parent_hypergraph(g_plus: &SignedBipartiteGraph) -> CorrelationHypergraph {
    let mut triples = Vec::new();
    for u in 0..g_plus.n_upper() {
        let c: Vec<u32> = g_plus.children(u).iter().map(|e| e.0).collect();
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                for k in j + 1..c.len() {
                    triples.push([c[i], c[j], c[k]]);
                }
            }
        }
    }
    CorrelationHypergraph::from_triples(g_plus.n_lower(), triples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryProperties {
    pub reports: Vec<PropertyReport>,
}

impl RecoveryProperties {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    pub fn get(&self, property: &str) -> Option<&PropertyReport> {
        self.reports.iter().find(|r| r.property == property)
    }
}

/// Default cap on `n d^2` for [`verify_recovery_properties`].
pub const DEFAULT_PROPERTY_BUDGET: u128 = 1 << 34;

fn report(name: &str, witness: Option<Vec<usize>>, margin: f64) -> PropertyReport {
    match witness {
        None => PropertyReport::pass(name, if margin.is_finite() { margin } else { 0.0 }),
        Some(w) => PropertyReport::fail(name, w, margin),
    }
}

/// Exhaustive check of the four recovery properties of a positive graph,
/// plus the `[0.8d, 1.2d]` degree band the recovery argument also relies on.
pub fn verify_recovery_properties(g_plus: &SignedBipartiteGraph, d: f64, budget: u128) -> Result<RecoveryProperties> {
    let n = g_plus.n_lower();
    let cost = (n.max(g_plus.n_upper()) as u128) * (d.ceil() as u128).pow(2);
    if cost > budget {
        return Err(Error::BudgetExceeded { cost, budget });
    }
    let corr = distance_two_graph(g_plus);
    let gamma = |v: usize| corr.neighbors(v);
    let parents = |v: usize| -> Vec<u32> { g_plus.parents(v).iter().map(|e| e.0).collect() };
    let small = d / 20.0;

    // Property 1: common neighbours of v1, v2 not explained by a common parent.
    let mut p1_margin = f64::INFINITY;
    let mut p1_witness = None;
    let mut via: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut touched = Vec::new();
    'p1: for v1 in 0..n {
        for &w in gamma(v1) {
            for &v2 in gamma(w as usize) {
                if (v2 as usize) > v1 {
                    if via[v2 as usize].is_empty() {
                        touched.push(v2);
                    }
                    via[v2 as usize].push(w);
                }
            }
        }
        let b1 = parents(v1);
        for &v2 in &touched {
            let common = intersect_sorted(&b1, &parents(v2 as usize));
            let spurious = via[v2 as usize]
                .iter()
                .filter(|&&w| intersect_sorted(&parents(w as usize), &common).is_empty())
                .count();
            let m = small - spurious as f64;
            p1_margin = p1_margin.min(m);
            if m <= 0.0 {
                p1_witness = Some(vec![v1, v2 as usize]);
            }
        }
        for &v2 in &touched {
            via[v2 as usize].clear();
        }
        touched.clear();
        if p1_witness.is_some() {
            break 'p1;
        }
    }
    if p1_margin.is_infinite() {
        p1_margin = small;
    }

    // Property 2: |F(u1) ∪ F(u2)| > 1.5 d for every pair of units.
    let m_up = g_plus.n_upper();
    let deg = g_plus.upper_degrees();
    let mut overlap: FxHashMap<u64, usize> = FxHashMap::default();
    for v in 0..n {
        let b = g_plus.parents(v);
        for (i, &(a, _)) in b.iter().enumerate() {
            for &(c, _) in &b[i + 1..] {
                *overlap.entry(pair_key(a, c)).or_insert(0) += 1;
            }
        }
    }
    let union = |a: usize, b: usize, o: usize| (deg[a] + deg[b] - o) as f64;
    let mut p2_margin = f64::INFINITY;
    let mut p2_witness = None;
    for (&k, &o) in &overlap {
        let (a, b) = unpack_pair(k);
        let m = union(a as usize, b as usize, o) - 1.5 * d;
        if m < p2_margin {
            p2_margin = m;
            if m <= 0.0 {
                p2_witness = Some(vec![a as usize, b as usize]);
            }
        }
    }
    let mut by_deg: Vec<usize> = (0..m_up).collect();
    by_deg.sort_by_key(|&u| deg[u]);
    // Pairs without overlap: the first non-overlapping partner in degree
    // order has the smallest union for that unit.
    for i in 0..by_deg.len() {
        for &b in &by_deg[i + 1..] {
            let a = by_deg[i];
            let m = union(a, b, 0) - 1.5 * d;
            if m > 0.0 {
                p2_margin = p2_margin.min(m);
                break;
            }
            if overlap.contains_key(&pair_key(a as u32, b as u32)) {
                continue;
            }
            p2_margin = p2_margin.min(m);
            p2_witness.get_or_insert_with(|| vec![a, b]);
            break;
        }
    }

    // Property 3: outsiders see few children of any unit.
    let mut p3_margin = f64::INFINITY;
    let mut p3_witness = None;
    let mut cnt = vec![0u32; n];
    'p3: for u in 0..m_up {
        let f: Vec<u32> = g_plus.children(u).iter().map(|e| e.0).collect();
        let mut hit = Vec::new();
        for &w in &f {
            for &v in gamma(w as usize) {
                if cnt[v as usize] == 0 {
                    hit.push(v);
                }
                cnt[v as usize] += 1;
            }
        }
        for &v in &hit {
            if f.binary_search(&v).is_err() {
                let m = small - cnt[v as usize] as f64;
                p3_margin = p3_margin.min(m);
                if m <= 0.0 && p3_witness.is_none() {
                    p3_witness = Some(vec![u, v as usize]);
                }
            }
            cnt[v as usize] = 0;
        }
        if p3_witness.is_some() {
            break 'p3;
        }
    }

    // Property 4: enough child pairs whose only common parent is u.
    let mut p4_margin = f64::INFINITY;
    let mut p4_witness = Vec::new();
    for u in 0..m_up {
        let f: Vec<u32> = g_plus.children(u).iter().map(|e| e.0).collect();
        let pairs = f.len() * f.len().saturating_sub(1) / 2;
        if pairs == 0 {
            continue;
        }
        let mut unique = 0usize;
        for (i, &a) in f.iter().enumerate() {
            let pa = parents(a as usize);
            for &b in &f[i + 1..] {
                if intersect_sorted(&pa, &parents(b as usize)).len() == 1 {
                    unique += 1;
                }
            }
        }
        let m = unique as f64 / pairs as f64 - 0.1;
        p4_margin = p4_margin.min(m);
        if m < 0.0 {
            p4_witness.push(u);
        }
    }

    let reports = vec![
        report("recovery_property_1", p1_witness, p1_margin),
        report("recovery_property_2", p2_witness, p2_margin),
        report("recovery_property_3", p3_witness, p3_margin.min(small)),
        report("recovery_property_4", (!p4_witness.is_empty()).then_some(p4_witness), p4_margin),
        check_degree_band(g_plus, d, 0.8, 1.2),
    ];
    Ok(RecoveryProperties { reports })
}

/// Random instance of the recovery model: `m` units, each with a uniformly
/// random child set whose size is uniform in `[ceil(0.8 d), floor(1.2 d)]`.
pub fn random_recovery_graph(m: usize, n: usize, d: f64, rng: &mut Rng) -> Result<SignedBipartiteGraph> {
    let lo = (0.8 * d).ceil() as usize;
    let hi = ((1.2 * d).floor() as usize).min(n);
    if lo == 0 || lo > hi {
        return Err(Error::InvalidParams(format!("no degree in [0.8d, 1.2d] for d={d}, n={n}")));
    }
    let all: Vec<usize> = (0..n).collect();
    let mut edges = Vec::new();
    for u in 0..m {
        let k = rng.gen_range(lo..=hi);
        for &v in all.choose_multiple(rng, k) {
            edges.push((u, v, 1.0));
        }
    }
    SignedBipartiteGraph::from_edges(m, n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn clique(vs: &[u32], n: usize) -> CorrelationGraph {
        let mut e = Vec::new();
        for (i, &a) in vs.iter().enumerate() {
            for &b in &vs[i + 1..] {
                e.push((a, b));
            }
        }
        CorrelationGraph::from_edges(n, e)
    }

    #[test]
    fn single_clique_gives_one_unit() {
        let g = clique(&[1, 3, 4, 7, 9], 12);
        let r = recover_graph(&RecoveryInstance::pairwise(&g, 5.0), &mut rng::stream(0, 0, 0)).unwrap();
        assert_eq!(r.units, vec![vec![1, 3, 4, 7, 9]]);
        assert_eq!(r.residue, 0);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn empty_inputs_give_empty_results() {
        let g = CorrelationGraph::from_edges(10, []);
        let r = recover_graph(&RecoveryInstance::pairwise(&g, 4.0), &mut rng::stream(0, 0, 0)).unwrap();
        assert_eq!((r.num_units(), r.residue), (0, 0));
        let h = CorrelationHypergraph::from_triples(10, []);
        let r = recover_graph_3wise(&RecoveryInstance::threewise(&h, 4.0), &mut rng::stream(0, 0, 0)).unwrap();
        assert_eq!((r.num_units(), r.residue), (0, 0));
    }

    #[test]
    fn complete_three_uniform_hypergraph_gives_one_unit() {
        let mut t = Vec::new();
        for a in 0..6u32 {
            for b in a + 1..6 {
                for c in b + 1..6 {
                    t.push([a + 2, b + 2, c + 2]);
                }
            }
        }
        let h = CorrelationHypergraph::from_triples(10, t);
        let r = recover_graph_3wise(&RecoveryInstance::threewise(&h, 6.0), &mut rng::stream(0, 0, 0)).unwrap();
        assert_eq!(r.units, vec![vec![2, 3, 4, 5, 6, 7]]);
        assert_eq!(threewise_participation_cut(6.0), 6);
    }

    #[test]
    fn budget_exhaustion_returns_partial_result() {
        // A lone edge with d = 10 never reaches the 0.8d - 1 inner degree.
        let g = CorrelationGraph::from_edges(4, [(0, 1)]);
        match recover_graph(&RecoveryInstance::pairwise(&g, 10.0).with_budget(7), &mut rng::stream(0, 0, 0)) {
            Err(Error::IterationBudgetExhausted { budget, partial }) => {
                assert_eq!(budget, 7);
                assert_eq!(partial.residue, 1);
                assert_eq!(partial.iterations, 7);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn complete_bipartite_fails_property_two() {
        let g = SignedBipartiteGraph::from_edges(4, 4, (0..4).flat_map(|u| (0..4).map(move |v| (u, v, 1.0)))).unwrap();
        let p = verify_recovery_properties(&g, 4.0, DEFAULT_PROPERTY_BUDGET).unwrap();
        let r = p.get("recovery_property_2").unwrap();
        assert!(!r.pass);
        assert_eq!(r.witness.as_ref().unwrap().len(), 2);
    }

    #[test]
    fn single_unit_passes_everything() {
        let g = SignedBipartiteGraph::from_edges(1, 10, (0..5).map(|v| (0, 2 * v, 1.0))).unwrap();
        let p = verify_recovery_properties(&g, 5.0, DEFAULT_PROPERTY_BUDGET).unwrap();
        assert!(p.all_pass(), "{p:?}");
    }

    #[test]
    fn property_budget_is_enforced() {
        let g = SignedBipartiteGraph::empty(10, 100);
        assert!(matches!(
            verify_recovery_properties(&g, 10.0, 1000),
            Err(Error::BudgetExceeded { cost: 10_000, budget: 1000 })
        ));
    }

    /// Naive recount of property 1 over all lower pairs.
    fn naive_property_one(g: &SignedBipartiteGraph, d: f64) -> bool {
        let corr = distance_two_graph(g);
        let n = g.n_lower();
        let par = |v: usize| -> Vec<u32> { g.parents(v).iter().map(|e| e.0).collect() };
        for a in 0..n {
            for b in a + 1..n {
                let common = intersect_sorted(&par(a), &par(b));
                let shared = intersect_sorted(corr.neighbors(a), corr.neighbors(b));
                let bad = shared
                    .iter()
                    .filter(|&&w| intersect_sorted(&par(w as usize), &common).is_empty())
                    .count();
                if bad as f64 >= d / 20.0 {
                    return false;
                }
            }
        }
        true
    }

    fn naive_property_two(g: &SignedBipartiteGraph, d: f64) -> bool {
        let f = g.child_sets();
        for a in 0..f.len() {
            for b in a + 1..f.len() {
                let mut u = f[a].clone();
                u.extend(&f[b]);
                u.sort_unstable();
                u.dedup();
                if u.len() as f64 <= 1.5 * d {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn random_model_graphs_mostly_pass() {
        // Four units of degree ~21 on 2000 vertices. Properties 1 and 3 allow
        // one shared vertex per pair of units (d/20 = 1.05); a pair shares
        // Poisson(0.22) vertices, so all six pairs are fine with probability
        // about 0.88.
        let mut ok = 0;
        for seed in 0..100 {
            let g = random_recovery_graph(4, 2000, 21.0, &mut rng::stream(seed, 9, 0)).unwrap();
            ok += usize::from(verify_recovery_properties(&g, 21.0, DEFAULT_PROPERTY_BUDGET).unwrap().all_pass());
        }
        assert!(ok >= 75, "{ok}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn property_checks_match_naive(seed in any::<u64>(), m in 1usize..6, n in 8usize..40, d in 3.0f64..7.0) {
            let mut r = rng::stream(seed, 10, 0);
            let g = random_recovery_graph(m, n, d, &mut r).unwrap();
            let p = verify_recovery_properties(&g, d, DEFAULT_PROPERTY_BUDGET).unwrap();
            prop_assert_eq!(p.get("recovery_property_1").unwrap().pass, naive_property_one(&g, d));
            prop_assert_eq!(p.get("recovery_property_2").unwrap().pass, naive_property_two(&g, d));
        }

        #[test]
        fn passing_instances_are_recovered_exactly(seed in any::<u64>(), m in 1usize..6, d in 21.0f64..30.0) {
            let mut r = rng::stream(seed, 11, 0);
            let g = random_recovery_graph(m, 2000, d, &mut r).unwrap();
            prop_assume!(verify_recovery_properties(&g, d, DEFAULT_PROPERTY_BUDGET).unwrap().all_pass());
            let corr = distance_two_graph(&g);
            let mut families = Vec::new();
            for s in 0..10 {
                let rec = recover_graph(&RecoveryInstance::pairwise(&corr, d), &mut rng::stream(seed, 12, s)).unwrap();
                prop_assert!(rec.units.iter().all(|u| (u.len() as f64) < 1.3 * d));
                families.push(rec.family());
            }
            prop_assert_eq!(&families[0], &true_family(&g));
            prop_assert!(families.windows(2).all(|w| w[0] == w[1]));
        }

        #[test]
        fn residue_falls_on_every_success(seed in any::<u64>()) {
            let mut r = rng::stream(seed, 13, 0);
            let g = random_recovery_graph(6, 60, 8.0, &mut r).unwrap();
            let corr = distance_two_graph(&g);
            let total = corr.num_edges();
            let inst = RecoveryInstance::pairwise(&corr, 8.0).with_budget(400);
            let rec = match recover_graph(&inst, &mut rng::stream(seed, 14, 0)) {
                Ok(x) => x,
                Err(Error::IterationBudgetExhausted { partial, .. }) => *partial,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            // Every success marks at least one edge, so successes bound the drop.
            prop_assert!(total - rec.residue >= rec.successful_iterations);
            prop_assert!(rec.units.iter().all(|u| (u.len() as f64) < 1.3 * 8.0));
        }
    }
}
