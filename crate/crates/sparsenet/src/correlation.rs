//! Co-firing statistics on one layer: thresholded pair counts, triple counts
//! and real-valued triple moments.

use std::fmt::Write as _;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{Observed, SparseBinaryVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationConfig {
    /// Pair/triple threshold as a multiple of `rho * N`.
    pub threshold_frac: f64,
    /// Sample-count constant `c` in `N >= c log n / rho^2`.
    pub sample_constant: f64,
    /// Largest support for which triples are enumerated.
    pub support_cap: usize,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self {
            threshold_frac: 1.0 / 3.0,
            sample_constant: 40.0,
            support_cap: 400,
        }
    }
}

/// `ceil(c log n / rho^2)`.
pub fn recommended_samples(n: usize, rho: f64, c: f64) -> u64 {
    (c * (n as f64).ln() / (rho * rho)).ceil() as u64
}

pub(crate) fn pair_key(a: u32, b: u32) -> u64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    (u64::from(lo) << 32) | u64::from(hi)
}

pub(crate) fn unpack_pair(k: u64) -> (u32, u32) {
    ((k >> 32) as u32, k as u32)
}

const TRIPLE_BITS: u32 = 21;
/// Largest layer size the packed triple keys support.
pub const MAX_TRIPLE_N: usize = 1 << TRIPLE_BITS;

pub(crate) fn triple_key(a: u32, b: u32, c: u32) -> u64 {
    let mut t = [a, b, c];
    t.sort_unstable();
    (u64::from(t[0]) << (2 * TRIPLE_BITS)) | (u64::from(t[1]) << TRIPLE_BITS) | u64::from(t[2])
}

pub(crate) fn unpack_triple(k: u64) -> [u32; 3] {
    let m = (1u64 << TRIPLE_BITS) - 1;
    [
        (k >> (2 * TRIPLE_BITS)) as u32,
        ((k >> TRIPLE_BITS) & m) as u32,
        (k & m) as u32,
    ]
}

/// Pair co-occurrence accumulator; merging two counters adds their counts.
#[derive(Debug, Clone, Default)]
pub struct PairCounter {
    pub counts: FxHashMap<u64, u64>,
    pub samples: u64,
}

impl PairCounter {
    pub fn add(&mut self, support: &[u32]) {
        self.samples += 1;
        for (i, &a) in support.iter().enumerate() {
            for &b in &support[i + 1..] {
                *self.counts.entry(pair_key(a, b)).or_insert(0) += 1;
            }
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        let (mut big, small) = if self.counts.len() >= other.counts.len() {
            (std::mem::take(&mut self.counts), other.counts)
        } else {
            (other.counts, std::mem::take(&mut self.counts))
        };
        for (k, c) in small {
            *big.entry(k).or_insert(0) += c;
        }
        Self {
            counts: big,
            samples: self.samples + other.samples,
        }
    }
}

/// Triple co-occurrence accumulator.
#[derive(Debug, Clone, Default)]
pub struct TripleCounter {
    pub counts: FxHashMap<u64, u64>,
    pub samples: u64,
}

impl TripleCounter {
    pub fn add(&mut self, support: &[u32], cap: usize) -> Result<()> {
        if support.len() > cap {
            return Err(Error::SupportTooDense {
                size: support.len(),
                cap,
            });
        }
        self.samples += 1;
        let s = support;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                for k in j + 1..s.len() {
                    *self.counts.entry(triple_key(s[i], s[j], s[k])).or_insert(0) += 1;
                }
            }
        }
        Ok(())
    }

    pub fn merge(mut self, other: Self) -> Self {
        for (k, c) in other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self.samples += other.samples;
        self
    }
}

#[derive(Debug, Clone)]
pub struct CorrelationGraph {
    pub n: usize,
    pub num_samples: u64,
    /// Minimum count for an edge; pairs that never co-fired are never edges.
    pub threshold: f64,
    pub pair_counts: FxHashMap<u64, u64>,
    adjacency: Vec<Vec<u32>>,
    pub warnings: Vec<String>,
}

impl CorrelationGraph {
    pub fn from_counts(n: usize, counter: PairCounter, threshold: f64) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for (&k, &c) in &counter.counts {
            if c as f64 >= threshold {
                let (a, b) = unpack_pair(k);
                adjacency[a as usize].push(b);
                adjacency[b as usize].push(a);
            }
        }
        for row in &mut adjacency {
            row.sort_unstable();
        }
        Self {
            n,
            num_samples: counter.samples,
            threshold,
            pair_counts: counter.counts,
            adjacency,
            warnings: Vec::new(),
        }
    }

    /// Graph with the given edges and no counts, e.g. an exact relation.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut counter = PairCounter::default();
        for (a, b) in edges {
            if a != b {
                counter.counts.insert(pair_key(a, b), 1);
            }
        }
        Self::from_counts(n, counter, 1.0)
    }

    /// Γ(v), sorted.
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.adjacency[a as usize].binary_search(&b).is_ok()
    }

    pub fn count(&self, a: u32, b: u32) -> u64 {
        self.pair_counts.get(&pair_key(a, b)).copied().unwrap_or(0)
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges with `a < b`, in increasing order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(a, row)| {
            row.iter()
                .copied()
                .filter(move |&b| (a as u32) < b)
                .map(move |b| (a as u32, b))
        })
    }

    /// `u v count` lines after a header carrying n, N and the threshold.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("pairwise {} {} {}\n", self.n, self.num_samples, self.threshold);
        for (a, b) in self.edges() {
            let _ = writeln!(out, "{a} {b} {}", self.count(a, b));
        }
        out
    }
}

fn insufficient(n: usize, n_samples: u64, rho: f64, c: f64) -> Option<String> {
    let need = recommended_samples(n, rho, c);
    (n_samples < need).then(|| format!("InsufficientSamples: {n_samples} < {need}"))
}

fn check_dims<'a>(n: usize, s: &'a SparseBinaryVector) -> Result<&'a [u32]> {
    if s.dimension() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: s.dimension(),
        });
    }
    Ok(s.support())
}

/// Edges are pairs with at least `threshold_frac * rho * N` joint firings.
pub fn build_pairwise<'a, I>(n: usize, samples: I, rho: f64, cfg: &CorrelationConfig) -> Result<CorrelationGraph>
where
    I: IntoIterator<Item = &'a SparseBinaryVector>,
{
    let mut counter = PairCounter::default();
    for s in samples {
        counter.add(check_dims(n, s)?);
    }
    Ok(finish_pairwise(n, counter, rho, cfg.threshold_frac * rho, cfg))
}

/// Parallel variant over an in-memory sample slice; the result equals
/// [`build_pairwise`] on the same samples.
pub fn build_pairwise_par(
    n: usize,
    samples: &[SparseBinaryVector],
    rho: f64,
    cfg: &CorrelationConfig,
) -> Result<CorrelationGraph> {
    if let Some(s) = samples.iter().find(|s| s.dimension() != n) {
        check_dims(n, s)?;
    }
    let counter = samples
        .par_iter()
        .fold(PairCounter::default, |mut c, s| {
            c.add(s.support());
            c
        })
        .reduce(PairCounter::default, PairCounter::merge);
    Ok(finish_pairwise(n, counter, rho, cfg.threshold_frac * rho, cfg))
}

/// Pairwise graph for an intermediate layer: related pairs fire together with
/// probability at least `rho_next/2`, others at most `rho_next/4`; the cut is
/// their midpoint.
pub fn build_pairwise_multilayer<'a, I>(
    n: usize,
    samples: I,
    rho_next: f64,
    cfg: &CorrelationConfig,
) -> Result<CorrelationGraph>
where
    I: IntoIterator<Item = &'a SparseBinaryVector>,
{
    let mut counter = PairCounter::default();
    for s in samples {
        counter.add(check_dims(n, s)?);
    }
    Ok(finish_pairwise(n, counter, rho_next, 0.375 * rho_next, cfg))
}

fn finish_pairwise(n: usize, counter: PairCounter, rho: f64, rate: f64, cfg: &CorrelationConfig) -> CorrelationGraph {
    let samples = counter.samples;
    let mut g = CorrelationGraph::from_counts(n, counter, rate * samples as f64);
    if samples == 0 {
        // A zero threshold would connect nothing anyway; keep it explicit.
        g.threshold = 0.0;
    }
    g.warnings.extend(insufficient(n, samples, rho, cfg.sample_constant));
    g
}

#[derive(Debug, Clone)]
pub struct CorrelationHypergraph {
    pub n: usize,
    pub num_samples: u64,
    pub threshold: f64,
    pub triple_counts: FxHashMap<u64, u64>,
    hyperedges: FxHashSet<u64>,
    /// For each pair, the third vertices completing a hyperedge (sorted).
    pair_index: FxHashMap<u64, Vec<u32>>,
    pub warnings: Vec<String>,
}

impl CorrelationHypergraph {
    pub fn from_counts(n: usize, counter: TripleCounter, threshold: f64) -> Self {
        let keep: Vec<u64> = counter
            .counts
            .iter()
            .filter(|(_, &c)| c > 0 && c as f64 >= threshold)
            .map(|(&k, _)| k)
            .collect();
        let mut h = Self {
            n,
            num_samples: counter.samples,
            threshold,
            triple_counts: counter.counts,
            hyperedges: FxHashSet::default(),
            pair_index: FxHashMap::default(),
            warnings: Vec::new(),
        };
        for k in keep {
            h.insert(k);
        }
        for list in h.pair_index.values_mut() {
            list.sort_unstable();
        }
        h
    }

    /// Hypergraph with the given triples and no counts.
    pub fn from_triples(n: usize, triples: impl IntoIterator<Item = [u32; 3]>) -> Self {
        let mut counter = TripleCounter::default();
        for [a, b, c] in triples {
            if a != b && b != c && a != c {
                counter.counts.insert(triple_key(a, b, c), 1);
            }
        }
        Self::from_counts(n, counter, 1.0)
    }

    fn insert(&mut self, k: u64) {
        if !self.hyperedges.insert(k) {
            return;
        }
        let [a, b, c] = unpack_triple(k);
        for (x, y, z) in [(a, b, c), (a, c, b), (b, c, a)] {
            self.pair_index.entry(pair_key(x, y)).or_default().push(z);
        }
    }

    pub fn has_triple(&self, a: u32, b: u32, c: u32) -> bool {
        self.hyperedges.contains(&triple_key(a, b, c))
    }

    /// Vertices `v` with `{a, b, v}` a hyperedge, sorted.
    pub fn thirds(&self, a: u32, b: u32) -> &[u32] {
        self.pair_index.get(&pair_key(a, b)).map_or(&[], Vec::as_slice)
    }

    pub fn num_hyperedges(&self) -> usize {
        self.hyperedges.len()
    }

    /// Hyperedges as sorted triples, in increasing order.
    pub fn hyperedges(&self) -> Vec<[u32; 3]> {
        let mut v: Vec<u64> = self.hyperedges.iter().copied().collect();
        v.sort_unstable();
        v.into_iter().map(unpack_triple).collect()
    }

    pub fn count(&self, a: u32, b: u32, c: u32) -> u64 {
        self.triple_counts.get(&triple_key(a, b, c)).copied().unwrap_or(0)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("threewise {} {} {}\n", self.n, self.num_samples, self.threshold);
        for [a, b, c] in self.hyperedges() {
            let _ = writeln!(out, "{a} {b} {c} {}", self.count(a, b, c));
        }
        out
    }
}

fn count_triples<'a, I>(n: usize, samples: I, cap: usize) -> Result<TripleCounter>
where
    I: IntoIterator<Item = &'a SparseBinaryVector>,
{
    if n > MAX_TRIPLE_N {
        return Err(Error::InvalidParams(format!("layer size {n} too large for triple keys")));
    }
    let mut counter = TripleCounter::default();
    for s in samples {
        counter.add(check_dims(n, s)?, cap)?;
    }
    Ok(counter)
}

/// Hyperedges are triples with at least `threshold_frac * rho * N` joint firings.
pub fn build_threewise<'a, I>(n: usize, samples: I, rho: f64, cfg: &CorrelationConfig) -> Result<CorrelationHypergraph>
where
    I: IntoIterator<Item = &'a SparseBinaryVector>,
{
    let counter = count_triples(n, samples, cfg.support_cap)?;
    let samples = counter.samples;
    let mut h = CorrelationHypergraph::from_counts(n, counter, cfg.threshold_frac * rho * samples as f64);
    h.warnings.extend(insufficient(n, samples, rho, cfg.sample_constant));
    Ok(h)
}

/// Upper bound on the joint firing rate of an unrelated triple in layer `i`.
pub fn multilayer_unrelated_bound(rho_next: f64, rho_i: f64) -> f64 {
    2.0 * rho_i.powi(3) + 0.2 * rho_next
}

/// Triples of layer `i` thresholded midway between the related lower bound
/// `rho_{i+1}/3` and the unrelated upper bound.
pub fn build_threewise_multilayer<'a, I>(
    n: usize,
    samples: I,
    rho_next: f64,
    rho_i: f64,
    cfg: &CorrelationConfig,
) -> Result<CorrelationHypergraph>
where
    I: IntoIterator<Item = &'a SparseBinaryVector>,
{
    let related = rho_next / 3.0;
    let unrelated = multilayer_unrelated_bound(rho_next, rho_i);
    if unrelated >= related {
        return Err(Error::RegimeViolation(format!(
            "2*rho_i^3 + 0.2*rho_(i+1) = {unrelated:.3e} is not below rho_(i+1)/3 = {related:.3e}"
        )));
    }
    let counter = count_triples(n, samples, cfg.support_cap)?;
    let samples = counter.samples;
    let mut h = CorrelationHypergraph::from_counts(n, counter, samples as f64 * (related + unrelated) / 2.0);
    if samples == 0 {
        h.threshold = 0.0;
    }
    h.warnings.extend(insufficient(n, samples, rho_next, cfg.sample_constant));
    Ok(h)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentStat {
    pub mean: f64,
    /// Standard error of the mean, `sd / sqrt(N)`.
    pub std_err: f64,
}

#[derive(Debug, Clone)]
pub struct TripleMomentTable {
    pub n: usize,
    pub num_samples: u64,
    /// Relatedness cut on `|moment|`.
    pub threshold: f64,
    moments: FxHashMap<u64, MomentStat>,
    /// Triples with `|moment| >= threshold`, with the moment's sign.
    pub related: Vec<([u32; 3], f64)>,
    pub warnings: Vec<String>,
}

impl TripleMomentTable {
    /// Symmetric lookup.
    pub fn get(&self, a: u32, b: u32, c: u32) -> Option<MomentStat> {
        self.moments.get(&triple_key(a, b, c)).copied()
    }

    pub fn len(&self) -> usize {
        self.moments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moments.is_empty()
    }

    /// Related triples as a hypergraph for graph recovery.
    pub fn hypergraph(&self) -> CorrelationHypergraph {
        CorrelationHypergraph::from_triples(self.n, self.related.iter().map(|r| r.0))
    }
}

/// Empirical `E[y_u y_v y_s]` over real samples for the candidate triples;
/// a triple is related iff `|moment| >= rho1/2`.
pub fn build_last_layer_moments<'a, I>(
    n: usize,
    samples: I,
    candidates: &[[u32; 3]],
    rho1: f64,
    cfg: &CorrelationConfig,
) -> Result<TripleMomentTable>
where
    I: IntoIterator<Item = &'a Observed>,
{
    if n > MAX_TRIPLE_N {
        return Err(Error::InvalidParams(format!("layer size {n} too large for triple keys")));
    }
    let mut keys: Vec<u64> = candidates
        .iter()
        .filter(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
        .map(|t| triple_key(t[0], t[1], t[2]))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let triples: Vec<[u32; 3]> = keys.iter().map(|&k| unpack_triple(k)).collect();
    let mut first = vec![CompensatedSum::default(); triples.len()];
    let mut second = vec![CompensatedSum::default(); triples.len()];
    let mut count = 0u64;
    for obs in samples {
        let y = obs.as_real().ok_or(Error::WrongOutputMode)?;
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        count += 1;
        for (i, t) in triples.iter().enumerate() {
            let p = y[t[0] as usize] * y[t[1] as usize] * y[t[2] as usize];
            if p != 0.0 {
                first[i].add(p);
                second[i].add(p * p);
            }
        }
    }
    let threshold = rho1 / 2.0;
    let mut moments = FxHashMap::default();
    let mut related = Vec::new();
    for (i, (&k, t)) in keys.iter().zip(&triples).enumerate() {
        let stat = if count == 0 {
            MomentStat { mean: 0.0, std_err: 0.0 }
        } else {
            let nf = count as f64;
            let mean = first[i].value() / nf;
            let var = (second[i].value() / nf - mean * mean).max(0.0);
            let sd = if count > 1 { (var * nf / (nf - 1.0)).sqrt() } else { 0.0 };
            MomentStat {
                mean,
                std_err: sd / nf.sqrt(),
            }
        };
        if count > 0 && stat.mean.abs() >= threshold && threshold > 0.0 {
            related.push((*t, stat.mean.signum()));
        }
        moments.insert(k, stat);
    }
    let mut warnings = Vec::new();
    let need = (cfg.sample_constant * (n as f64).ln() / rho1.max(f64::MIN_POSITIVE)).ceil() as u64;
    if count < need {
        warnings.push(format!("InsufficientSamples: {count} < {need}"));
    }
    Ok(TripleMomentTable {
        n,
        num_samples: count,
        threshold,
        moments,
        related,
        warnings,
    })
}

/// Candidate triples for the real-valued case: triangles of the graph of pairs
/// whose empirical `|E[y_u y_v]|` reaches `pair_cut`.
pub fn candidate_triples_from_pairs<'a, I>(n: usize, samples: I, pair_cut: f64) -> Result<Vec<[u32; 3]>>
where
    I: IntoIterator<Item = &'a Observed>,
{
    let mut sums: FxHashMap<u64, f64> = FxHashMap::default();
    let mut count = 0u64;
    let mut nz: Vec<(u32, f64)> = Vec::new();
    for obs in samples {
        let y = obs.as_real().ok_or(Error::WrongOutputMode)?;
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        count += 1;
        nz.clear();
        nz.extend(y.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(i, &v)| (i as u32, v)));
        for (i, &(a, ya)) in nz.iter().enumerate() {
            for &(b, yb) in &nz[i + 1..] {
                *sums.entry(pair_key(a, b)).or_insert(0.0) += ya * yb;
            }
        }
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let pairs = sums
        .into_iter()
        .filter(|(_, s)| (s / count as f64).abs() >= pair_cut)
        .map(|(k, _)| unpack_pair(k));
    let g = CorrelationGraph::from_edges(n, pairs);
    let mut out = Vec::new();
    for (a, b) in g.edges() {
        for &c in intersect_sorted(g.neighbors(a as usize), g.neighbors(b as usize)).iter() {
            if c > b {
                out.push([a, b, c]);
            }
        }
    }
    Ok(out)
}

pub(crate) fn intersect_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}
