//! Completing a layer from its positive edges (negative edges and real
//! weights), the single-layer pipeline, the layerwise driver, and evaluation
//! against a ground-truth net.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::correlation::{
    build_last_layer_moments, build_pairwise, build_threewise, build_threewise_multilayer, candidate_triples_from_pairs,
    pair_key, CorrelationConfig,
};
use crate::encoding::{partial_encode, EncoderMode, EncoderSpec};
use crate::error::{Error, Result};
use crate::graphrecovery::{recover_graph, recover_graph_3wise, RecoveredPositiveGraph, RecoveryInstance};
use crate::netmodel::{generate_samples, DeepNet, DeepNetParams, Observed, OutputMode, SignedBipartiteGraph, SparseBinaryVector, WeightMode};
use crate::rng;

/// Learner's view of one layer. Upper indices are anonymous recovered units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredLayer {
    pub n_upper: usize,
    pub n_lower: usize,
    /// Sorted `(upper, lower)` pairs.
    pub e_plus: Vec<(u32, u32)>,
    pub e_minus: Vec<(u32, u32)>,
    /// `(upper, lower, weight)` when weights were solved for.
    pub real_weights: Option<Vec<(u32, u32, f64)>>,
    /// Candidate edges whose status could not be decided.
    pub residual_candidates: Vec<(u32, u32)>,
    /// Lower nodes whose linear system was rank-deficient.
    pub rank_deficient: Vec<u32>,
    /// Unmarked relation edges left by graph recovery.
    pub recovery_residue: usize,
}

impl RecoveredLayer {
    /// Layer view of a known graph; real weights are kept unless all are +-1.
    pub fn from_graph(g: &SignedBipartiteGraph) -> Self {
        let signed_only = g.edges().all(|e| e.2.abs() == 1.0);
        let pick = |neg: bool| g.edges().filter(|e| (e.2 < 0.0) == neg).map(|(u, v, _)| (u as u32, v as u32)).collect();
        Self {
            n_upper: g.n_upper(),
            n_lower: g.n_lower(),
            e_plus: pick(false),
            e_minus: pick(true),
            real_weights: (!signed_only).then(|| g.edges().map(|(u, v, w)| (u as u32, v as u32, w)).collect()),
            residual_candidates: Vec::new(),
            rank_deficient: Vec::new(),
            recovery_residue: 0,
        }
    }

    fn check(&self) -> Result<()> {
        let plus: FxHashSet<(u32, u32)> = self.e_plus.iter().copied().collect();
        if let Some(e) = self.e_minus.iter().find(|e| plus.contains(e)) {
            return Err(Error::InvalidParams(format!("edge {e:?} is both positive and negative")));
        }
        Ok(())
    }

    /// Signed graph: solved weights if present, otherwise +1 / -1.
    pub fn to_graph(&self) -> Result<SignedBipartiteGraph> {
        match &self.real_weights {
            Some(w) => SignedBipartiteGraph::from_edges(
                self.n_upper,
                self.n_lower,
                w.iter().map(|&(u, v, x)| (u as usize, v as usize, x)),
            ),
            None => SignedBipartiteGraph::from_edges(
                self.n_upper,
                self.n_lower,
                self.e_plus
                    .iter()
                    .map(|&(u, v)| (u as usize, v as usize, 1.0))
                    .chain(self.e_minus.iter().map(|&(u, v)| (u as usize, v as usize, -1.0))),
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerMetrics {
    pub precision_plus: Option<f64>,
    pub recall_plus: Option<f64>,
    pub precision_minus: Option<f64>,
    pub recall_minus: Option<f64>,
    /// Recovery residue plus, after evaluation, candidate negatives that are not true edges.
    pub residue: usize,
    pub samples: usize,
    pub seconds: f64,
    pub units: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedNet {
    /// `layers[i]` is the learned `G_i` (bottom first).
    pub layers: Vec<RecoveredLayer>,
    /// Mean fraction of active units in the top encoded layer.
    pub top_density: f64,
    pub metrics: Vec<LayerMetrics>,
}

impl LearnedNet {
    /// Net in the shared text format, padding every side to `params.layer_size`.
    pub fn to_deep_net(&self, params: &DeepNetParams) -> Result<DeepNet> {
        let n = params.layer_size;
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in self.layers.iter().rev() {
            if l.n_upper > n || l.n_lower > n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: l.n_upper.max(l.n_lower),
                });
            }
            let g = l.to_graph()?;
            let snap = |w: f64| match params.weight_mode {
                WeightMode::PlusMinusOne => w.signum(),
                WeightMode::UniformReal => w,
            };
            layers.push(SignedBipartiteGraph::from_edges(n, n, g.edges().map(|(u, v, w)| (u, v, snap(w))))?);
        }
        let mut p = params.clone();
        p.num_layers = layers.len();
        DeepNet::new(p, layers)
    }

    pub fn metrics_json(&self) -> String {
        serde_json::to_string_pretty(&self.metrics).expect("metrics serialize")
    }
}

/// Negative-edge elimination state: the candidate set `R`, stored as a bitset over `U x V`.
#[derive(Debug, Clone)]
pub struct NegativeEdgeLearner {
    n_upper: usize,
    n_lower: usize,
    bits: Vec<u64>,
    pos_parents: Vec<Vec<u32>>,
    remaining: usize,
    samples: usize,
}

/// Largest `|U| * |V|` the candidate bitset may cover.
pub const MAX_CANDIDATE_CELLS: usize = 1 << 31;

impl NegativeEdgeLearner {
    /// `R = (U x V) \ E+`.
    pub fn new(e_plus: &SignedBipartiteGraph) -> Result<Self> {
        let (m, n) = (e_plus.n_upper(), e_plus.n_lower());
        let cells = m.checked_mul(n).filter(|&c| c <= MAX_CANDIDATE_CELLS).ok_or(Error::BudgetExceeded {
            cost: (m as u128) * (n as u128),
            budget: MAX_CANDIDATE_CELLS as u128,
        })?;
        let mut bits = vec![!0u64; cells.div_ceil(64)];
        if cells % 64 != 0 {
            *bits.last_mut().expect("nonempty") = (1u64 << (cells % 64)) - 1;
        }
        let mut learner = Self {
            n_upper: m,
            n_lower: n,
            bits,
            pos_parents: (0..n)
                .map(|v| e_plus.parents(v).iter().filter(|e| e.1 > 0.0).map(|e| e.0).collect())
                .collect(),
            remaining: cells,
            samples: 0,
        };
        for (u, v, w) in e_plus.edges() {
            if w > 0.0 {
                learner.clear(u as u32, v as u32);
            }
        }
        Ok(learner)
    }

    fn clear(&mut self, u: u32, v: u32) {
        let i = u as usize * self.n_lower + v as usize;
        let mask = 1u64 << (i % 64);
        if self.bits[i / 64] & mask != 0 {
            self.bits[i / 64] &= !mask;
            self.remaining -= 1;
        }
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        let i = u as usize * self.n_lower + v as usize;
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    /// For each fired `v` with exactly one active positive parent, no other
    /// active unit can have a negative edge to `v`.
    pub fn observe(&mut self, h: &SparseBinaryVector, y: &SparseBinaryVector) -> Result<()> {
        if h.dimension() != self.n_upper || y.dimension() != self.n_lower {
            return Err(Error::DimensionMismatch {
                expected: self.n_upper,
                found: h.dimension(),
            });
        }
        self.samples += 1;
        for &v in y.support() {
            let active = self.pos_parents[v as usize].iter().filter(|&&u| h.contains(u as usize)).count();
            if active == 1 {
                for &s in h.support() {
                    self.clear(s, v);
                }
            }
        }
        Ok(())
    }

    pub fn candidates_left(&self) -> usize {
        self.remaining
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Remaining candidates, i.e. the learned negative edges.
    pub fn e_minus(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.remaining);
        for (wi, &word) in self.bits.iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let i = wi * 64 + w.trailing_zeros() as usize;
                out.push(((i / self.n_lower) as u32, (i % self.n_lower) as u32));
                w &= w - 1;
            }
        }
        out
    }
}

/// Runs negative-edge elimination over `(h, y)` pairs and returns the surviving candidates.
pub fn learn_negative_edges<'a, I>(e_plus: &SignedBipartiteGraph, pairs: I) -> Result<Vec<(u32, u32)>>
where
    I: IntoIterator<Item = (&'a SparseBinaryVector, &'a SparseBinaryVector)>,
{
    let mut l = NegativeEdgeLearner::new(e_plus)?;
    for (h, y) in pairs {
        l.observe(h, y)?;
    }
    Ok(l.e_minus())
}

/// Learned candidates that are not true negative edges.
pub fn negative_residue(learned: &[(u32, u32)], truth_minus: &SignedBipartiteGraph) -> usize {
    learned
        .iter()
        .filter(|&&(u, v)| truth_minus.weight(u as usize, v as usize).map_or(true, |w| w >= 0.0))
        .count()
}

/// How candidate parents of each lower node are chosen for the linear solve.
#[derive(Debug, Clone, Copy)]
pub enum Candidates<'a> {
    /// Parents given by a known support graph.
    Support(&'a SignedBipartiteGraph),
    /// Units seen active at least once, with `y_v != 0` every time.
    Eliminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealWeights {
    pub weights: Vec<(u32, u32, f64)>,
    /// Per lower node residual norm (0 for nodes without equations).
    pub residuals: Vec<f64>,
    pub rank_deficient: Vec<u32>,
    /// Informative equations per lower node.
    pub rows: Vec<usize>,
}

fn candidate_lists(
    cands: Candidates<'_>,
    n_upper: usize,
    n_lower: usize,
    hs: &[SparseBinaryVector],
    ys: &[&[f64]],
) -> Result<Vec<Vec<u32>>> {
    match cands {
        Candidates::Support(g) => {
            if g.n_upper() != n_upper || g.n_lower() != n_lower {
                return Err(Error::DimensionMismatch {
                    expected: n_upper,
                    found: g.n_upper(),
                });
            }
            Ok((0..n_lower).map(|v| g.parents(v).iter().map(|e| e.0).collect()).collect())
        }
        Candidates::Eliminate => {
            let cells = n_upper.checked_mul(n_lower).filter(|&c| c <= MAX_CANDIDATE_CELLS / 4).ok_or(
                Error::BudgetExceeded {
                    cost: (n_upper as u128) * (n_lower as u128),
                    budget: (MAX_CANDIDATE_CELLS / 4) as u128,
                },
            )?;
            let mut active = vec![0u32; n_upper];
            let mut co = vec![0u32; cells];
            let mut nz = Vec::new();
            for (h, y) in hs.iter().zip(ys) {
                nz.clear();
                nz.extend(y.iter().enumerate().filter(|e| *e.1 != 0.0).map(|e| e.0));
                for &u in h.support() {
                    active[u as usize] += 1;
                    let row = &mut co[u as usize * n_lower..(u as usize + 1) * n_lower];
                    for &v in &nz {
                        row[v] += 1;
                    }
                }
            }
            let mut lists = vec![Vec::new(); n_lower];
            for u in 0..n_upper {
                if active[u] == 0 {
                    continue;
                }
                for v in 0..n_lower {
                    if co[u * n_lower + v] == active[u] {
                        lists[v].push(u as u32);
                    }
                }
            }
            Ok(lists)
        }
    }
}

/// Per lower node, least squares for `y_v = sum_u w(u,v) h_u` over the
/// candidate parents; coefficients below `tau` in magnitude are dropped.
pub fn learn_real_weights(
    cands: Candidates<'_>,
    n_upper: usize,
    hs: &[SparseBinaryVector],
    ys: &[Observed],
    tau: f64,
) -> Result<RealWeights> {
    if hs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: hs.len(),
            found: ys.len(),
        });
    }
    let ys: Vec<&[f64]> = ys.iter().map(|o| o.as_real().ok_or(Error::WrongOutputMode)).collect::<Result<_>>()?;
    let n_lower = ys.first().map_or(0, |y| y.len());
    if let Some(h) = hs.iter().find(|h| h.dimension() != n_upper) {
        return Err(Error::DimensionMismatch {
            expected: n_upper,
            found: h.dimension(),
        });
    }
    if let Some(y) = ys.iter().find(|y| y.len() != n_lower) {
        return Err(Error::DimensionMismatch {
            expected: n_lower,
            found: y.len(),
        });
    }
    let lists = candidate_lists(cands, n_upper, n_lower, hs, &ys)?;
    let mut children: Vec<Vec<u32>> = vec![Vec::new(); n_upper];
    for (v, l) in lists.iter().enumerate() {
        for &u in l {
            children[u as usize].push(v as u32);
        }
    }
    // Informative rows: samples activating some candidate parent of v.
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n_lower];
    let mut last = vec![u32::MAX; n_lower];
    for (t, h) in hs.iter().enumerate() {
        for &u in h.support() {
            for &v in &children[u as usize] {
                if last[v as usize] != t as u32 {
                    last[v as usize] = t as u32;
                    rows[v as usize].push(t as u32);
                }
            }
        }
    }
    let solved: Vec<(Vec<(u32, u32, f64)>, f64, bool)> = (0..n_lower)
        .into_par_iter()
        .map(|v| {
            let cand = &lists[v];
            if cand.is_empty() {
                return (Vec::new(), 0.0, false);
            }
            let r = &rows[v];
            if r.len() < cand.len() {
                return (Vec::new(), 0.0, true);
            }
            let col: FxHashMap<u32, usize> = cand.iter().enumerate().map(|(j, &u)| (u, j)).collect();
            let mut a = DMatrix::<f64>::zeros(r.len(), cand.len());
            let mut b = DVector::<f64>::zeros(r.len());
            for (i, &t) in r.iter().enumerate() {
                for &u in hs[t as usize].support() {
                    if let Some(&j) = col.get(&u) {
                        a[(i, j)] = 1.0;
                    }
                }
                b[i] = ys[t as usize][v];
            }
            let svd = a.clone().svd(true, true);
            let smax = svd.singular_values.max();
            let eps = smax * 1e-10 * (r.len().max(cand.len()) as f64);
            if svd.rank(eps) < cand.len() {
                return (Vec::new(), 0.0, true);
            }
            let x = svd.solve(&b, eps).expect("u and v computed");
            let resid = (&a * &x - &b).norm();
            let w = cand
                .iter()
                .zip(x.iter())
                .filter(|(_, &w)| w.abs() >= tau)
                .map(|(&u, &w)| (u, v as u32, w))
                .collect();
            (w, resid, false)
        })
        .collect();
    let mut out = RealWeights {
        weights: Vec::new(),
        residuals: Vec::with_capacity(n_lower),
        rank_deficient: Vec::new(),
        rows: rows.iter().map(Vec::len).collect(),
    };
    for (v, (w, res, bad)) in solved.into_iter().enumerate() {
        out.weights.extend(w);
        out.residuals.push(res);
        if bad {
            out.rank_deficient.push(v as u32);
        }
    }
    out.weights.sort_by_key(|e| (e.0, e.1));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LearnMode {
    Pairwise,
    Threewise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerLearnConfig {
    /// Expected degree `d` of the generating layer.
    pub d: f64,
    /// Density of the layer above the observed one.
    pub rho: f64,
    pub mode: LearnMode,
    /// Degree used by graph recovery; defaults to `d/2`, the expected
    /// positive degree of a +-1 layer.
    pub recovery_degree: f64,
    /// Partial-encoder threshold; defaults to `0.3 d`.
    pub theta: f64,
    pub correlation: CorrelationConfig,
    /// Refuse densities outside the proven regime.
    pub enforce_regime: bool,
    pub seed: u64,
    /// Zero tolerance for solved weights.
    pub tau: f64,
    pub recovery_budget: Option<usize>,
}

impl LayerLearnConfig {
    pub fn new(d: f64, rho: f64, mode: LearnMode) -> Self {
        Self {
            d,
            rho,
            mode,
            recovery_degree: d / 2.0,
            theta: 0.3 * d,
            correlation: CorrelationConfig::default(),
            enforce_regime: true,
            seed: 0,
            tau: 1e-8,
            recovery_budget: None,
        }
    }

    /// `rho <= 0.1/d^2` (pairwise) or `rho <= 0.1/d^1.5` (3-wise).
    pub fn regime_bound(&self) -> f64 {
        match self.mode {
            LearnMode::Pairwise => 0.1 / (self.d * self.d),
            LearnMode::Threewise => 0.1 / self.d.powf(1.5),
        }
    }

    fn check_regime(&self) -> Result<()> {
        let bound = self.regime_bound();
        if self.enforce_regime && self.rho > bound {
            return Err(Error::RegimeViolation(format!(
                "rho = {:.3e} exceeds {:.3e} for {:?} learning at d = {}",
                self.rho, bound, self.mode, self.d
            )));
        }
        Ok(())
    }
}

fn recover_with(inst: RecoveryInstance<'_>, cfg: &LayerLearnConfig) -> Result<RecoveredPositiveGraph> {
    let inst = match cfg.recovery_budget {
        Some(b) => inst.with_budget(b),
        None => inst,
    };
    let mut r = rng::stream(cfg.seed, rng::DOMAIN_RECOVERY, 0);
    let out = match inst.relation {
        crate::graphrecovery::Relation::Pairwise(_) => recover_graph(&inst, &mut r),
        crate::graphrecovery::Relation::Threewise(_) => recover_graph_3wise(&inst, &mut r),
    };
    match out {
        Ok(g) => Ok(g),
        // Keep what was found; the residue is reported in the metrics.
        Err(Error::IterationBudgetExhausted { partial, .. }) => Ok(*partial),
        Err(e) => Err(e),
    }
}

/// Learned layer plus the encodings of the samples one level up.
pub struct LayerOutcome {
    pub layer: RecoveredLayer,
    pub encoded: Vec<SparseBinaryVector>,
}

fn finish_binary_layer(
    n: usize,
    ys: &[&SparseBinaryVector],
    rec: RecoveredPositiveGraph,
    cfg: &LayerLearnConfig,
) -> Result<LayerOutcome> {
    let g_plus = rec.to_graph();
    let m = g_plus.n_upper();
    let spec = EncoderSpec::new(g_plus.clone(), cfg.theta, EncoderMode::PartialBinary)?;
    let encoded: Vec<SparseBinaryVector> = ys.par_iter().map(|y| partial_encode(&spec, y)).collect::<Result<_>>()?;
    let e_minus = learn_negative_edges(&g_plus, encoded.iter().zip(ys.iter().copied()))?;
    let mut e_plus: Vec<(u32, u32)> = g_plus.edges().map(|(u, v, _)| (u as u32, v as u32)).collect();
    e_plus.sort_unstable();
    let layer = RecoveredLayer {
        n_upper: m,
        n_lower: n,
        e_plus,
        e_minus,
        real_weights: None,
        residual_candidates: Vec::new(),
        rank_deficient: Vec::new(),
        recovery_residue: rec.residue,
    };
    layer.check()?;
    Ok(LayerOutcome { layer, encoded })
}

fn binary_views(n: usize, samples: &[Observed]) -> Result<Vec<&SparseBinaryVector>> {
    samples
        .iter()
        .map(|s| {
            let b = s.as_binary().ok_or_else(|| Error::InvalidParams("expected thresholded samples".into()))?;
            if b.dimension() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: b.dimension(),
                });
            }
            Ok(b)
        })
        .collect()
}

/// Correlation build, graph recovery, partial encoding and negative edges
/// for one thresholded layer whose upper side is a uniform sparse vector.
pub fn learn_single_layer_encoded(n: usize, samples: &[Observed], cfg: &LayerLearnConfig) -> Result<LayerOutcome> {
    if samples.iter().any(|s| s.as_real().is_some()) {
        return learn_last_layer(n, samples, cfg);
    }
    cfg.check_regime()?;
    let ys = binary_views(n, samples)?;
    let rec = match cfg.mode {
        LearnMode::Pairwise => {
            let g = build_pairwise(n, ys.iter().copied(), cfg.rho, &cfg.correlation)?;
            recover_with(RecoveryInstance::pairwise(&g, cfg.recovery_degree), cfg)?
        }
        LearnMode::Threewise => {
            let h = build_threewise(n, ys.iter().copied(), cfg.rho, &cfg.correlation)?;
            recover_with(RecoveryInstance::threewise(&h, cfg.recovery_degree), cfg)?
        }
    };
    finish_binary_layer(n, &ys, rec, cfg)
}

pub fn learn_single_layer(n: usize, samples: &[Observed], cfg: &LayerLearnConfig) -> Result<RecoveredLayer> {
    Ok(learn_single_layer_encoded(n, samples, cfg)?.layer)
}

/// Real-valued bottom layer: related triples from third moments, 3-wise
/// recovery of full child sets, support encoding, then per-node linear solves.
fn learn_last_layer(n: usize, samples: &[Observed], cfg: &LayerLearnConfig) -> Result<LayerOutcome> {
    let cands = candidate_triples_from_pairs(n, samples, cfg.rho / 2.0)?;
    let table = build_last_layer_moments(n, samples, &cands, cfg.rho, &cfg.correlation)?;
    let hyper = table.hypergraph();
    // Moments see every child regardless of sign, so recover with the full degree.
    let rec = recover_with(RecoveryInstance::threewise(&hyper, cfg.d), cfg)?;
    let support = rec.to_graph();
    let spec = EncoderSpec::new(support.clone(), 0.5 * cfg.d, EncoderMode::PartialBinary)?;
    let encoded: Vec<SparseBinaryVector> = samples
        .par_iter()
        .map(|s| {
            let y = s.as_real().ok_or(Error::WrongOutputMode)?;
            let nz = y.iter().enumerate().filter(|e| *e.1 != 0.0).map(|e| e.0 as u32).collect();
            partial_encode(&spec, &SparseBinaryVector::new(n, nz)?)
        })
        .collect::<Result<_>>()?;
    let rw = learn_real_weights(Candidates::Support(&support), support.n_upper(), &encoded, samples, cfg.tau)?;
    let mut e_plus = Vec::new();
    let mut e_minus = Vec::new();
    for &(u, v, w) in &rw.weights {
        if w > 0.0 {
            e_plus.push((u, v));
        } else {
            e_minus.push((u, v));
        }
    }
    let solved: FxHashSet<(u32, u32)> = rw.weights.iter().map(|e| (e.0, e.1)).collect();
    let residual_candidates = support
        .edges()
        .map(|(u, v, _)| (u as u32, v as u32))
        .filter(|e| rw.rank_deficient.contains(&e.1) && !solved.contains(e))
        .collect();
    let layer = RecoveredLayer {
        n_upper: support.n_upper(),
        n_lower: n,
        e_plus,
        e_minus,
        real_weights: Some(rw.weights),
        residual_candidates,
        rank_deficient: rw.rank_deficient,
        recovery_residue: rec.residue,
    };
    layer.check()?;
    Ok(LayerOutcome { layer, encoded })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerwiseConfig {
    /// Mode for a one-layer net; deeper nets use the 3-wise multilayer thresholds.
    pub single_layer_mode: LearnMode,
    pub recovery_degree_frac: f64,
    pub theta_frac: f64,
    pub correlation: CorrelationConfig,
    pub enforce_regime: bool,
    pub seed: u64,
    pub tau: f64,
}

impl Default for LayerwiseConfig {
    fn default() -> Self {
        Self {
            single_layer_mode: LearnMode::Pairwise,
            recovery_degree_frac: 0.5,
            theta_frac: 0.3,
            correlation: CorrelationConfig::default(),
            enforce_regime: true,
            seed: 0,
            tau: 1e-8,
        }
    }
}

/// Learns every layer bottom-up from observed samples only.
pub fn learn_layerwise(params: &DeepNetParams, samples: &[Observed], cfg: &LayerwiseConfig) -> Result<LearnedNet> {
    params.validate()?;
    let l = params.num_layers;
    let d = params.expected_degree;
    let rho = params.density_schedule().rho;
    let mut net = LearnedNet {
        layers: Vec::new(),
        top_density: 0.0,
        metrics: Vec::new(),
    };
    let mut current: Vec<Observed> = Vec::new();
    let mut n_cur = params.layer_size;
    for i in 0..l {
        let input: &[Observed] = if i == 0 { samples } else { &current };
        let start = Instant::now();
        let layer_cfg = LayerLearnConfig {
            d,
            rho: rho[i + 1],
            mode: cfg.single_layer_mode,
            recovery_degree: cfg.recovery_degree_frac * d,
            theta: cfg.theta_frac * d,
            correlation: cfg.correlation.clone(),
            enforce_regime: cfg.enforce_regime,
            seed: rng::derive_seed(cfg.seed, i as u64),
            tau: cfg.tau,
            recovery_budget: None,
        };
        let real_bottom = i == 0 && params.output_mode == OutputMode::RealValued;
        let outcome = if l == 1 || real_bottom {
            learn_single_layer_encoded(n_cur, input, &layer_cfg)
        } else {
            learn_multilayer_step(n_cur, input, rho[i + 1], rho[i], &layer_cfg)
        };
        let outcome = match outcome {
            Ok(o) => o,
            Err(e) => {
                return Err(Error::LayerFailed {
                    layer: i,
                    reason: e.to_string(),
                    partial: Box::new(net),
                })
            }
        };
        net.metrics.push(LayerMetrics {
            residue: outcome.layer.recovery_residue,
            samples: input.len(),
            seconds: start.elapsed().as_secs_f64(),
            units: outcome.layer.n_upper,
            ..LayerMetrics::default()
        });
        n_cur = outcome.layer.n_upper;
        net.layers.push(outcome.layer);
        current = outcome.encoded.into_iter().map(Observed::Binary).collect();
    }
    let active: usize = current.iter().filter_map(|o| o.as_binary()).map(|h| h.len()).sum();
    net.top_density = if n_cur == 0 || current.is_empty() {
        0.0
    } else {
        active as f64 / (n_cur as f64 * current.len() as f64)
    };
    Ok(net)
}

/// One intermediate layer: triples of `h^(i)` thresholded with the
/// multilayer bounds, then the same completion as a single layer.
fn learn_multilayer_step(
    n: usize,
    samples: &[Observed],
    rho_next: f64,
    rho_i: f64,
    cfg: &LayerLearnConfig,
) -> Result<LayerOutcome> {
    let ys = binary_views(n, samples)?;
    let h = build_threewise_multilayer(n, ys.iter().copied(), rho_next, rho_i, &cfg.correlation)?;
    let rec = recover_with(RecoveryInstance::threewise(&h, cfg.recovery_degree), cfg)?;
    finish_binary_layer(n, &ys, rec, cfg)
}

fn greedy_pass(
    learned: &SignedBipartiteGraph,
    truth: &SignedBipartiteGraph,
    negative: bool,
    map: &mut [Option<u32>],
    taken: &mut [bool],
) {
    let sign = |w: f64| if negative { w < 0.0 } else { w > 0.0 };
    let mut overlap: FxHashMap<u64, usize> = FxHashMap::default();
    for v in 0..learned.n_lower().min(truth.n_lower()) {
        for &(a, wa) in learned.parents(v) {
            if !sign(wa) || map[a as usize].is_some() {
                continue;
            }
            for &(b, wb) in truth.parents(v) {
                if sign(wb) && !taken[b as usize] {
                    *overlap.entry((u64::from(a) << 32) | u64::from(b)).or_insert(0) += 1;
                }
            }
        }
    }
    let size = |g: &SignedBipartiteGraph, u: u32| g.children(u as usize).iter().filter(|e| sign(e.1)).count();
    // Largest overlap first; ties go to the pair with the smallest symmetric difference.
    let mut pairs: Vec<(usize, usize, u32, u32)> = overlap
        .into_iter()
        .map(|(k, c)| {
            let (a, b) = ((k >> 32) as u32, k as u32);
            (c, size(learned, a) + size(truth, b) - 2 * c, a, b)
        })
        .collect();
    pairs.sort_unstable_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)).then(x.3.cmp(&y.3)));
    for (_, _, a, b) in pairs {
        if map[a as usize].is_none() && !taken[b as usize] {
            map[a as usize] = Some(b);
            taken[b as usize] = true;
        }
    }
}

/// Greedy maximum-overlap matching of learned to true units, first by
/// positive child sets and then, for units left over, by negative ones.
/// A learned unit without children keeps its own index when that is free.
/// Returns `map[learned] = Some(true)`.
pub fn match_units(learned: &SignedBipartiteGraph, truth: &SignedBipartiteGraph) -> Vec<Option<u32>> {
    let mut map = vec![None; learned.n_upper()];
    let mut taken = vec![false; truth.n_upper()];
    greedy_pass(learned, truth, false, &mut map, &mut taken);
    greedy_pass(learned, truth, true, &mut map, &mut taken);
    for (a, m) in map.iter_mut().enumerate() {
        if m.is_none() && learned.children(a).is_empty() && a < taken.len() && !taken[a] {
            *m = Some(a as u32);
            taken[a] = true;
        }
    }
    map
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignScores {
    pub precision_plus: f64,
    pub recall_plus: f64,
    pub precision_minus: f64,
    pub recall_minus: f64,
    /// Learned negative edges that are not true negative edges.
    pub residue: usize,
}

impl SignScores {
    pub fn exact(&self) -> bool {
        self.precision_plus == 1.0 && self.recall_plus == 1.0 && self.precision_minus == 1.0 && self.recall_minus == 1.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision/recall per sign after relabelling learned units (and learned
/// lower nodes, via `lower_map`) onto the truth.
pub fn score_layer(
    learned: &RecoveredLayer,
    truth: &SignedBipartiteGraph,
    lower_map: &[Option<u32>],
) -> Result<(SignScores, Vec<Option<u32>>)> {
    let relabel_lower = |v: u32| lower_map.get(v as usize).copied().flatten();
    let lg = learned.to_graph()?;
    // Learned graph on true lower labels, for matching.
    let mapped = SignedBipartiteGraph::from_edges(
        learned.n_upper,
        truth.n_lower(),
        lg.edges()
            .filter_map(|(u, v, w)| relabel_lower(v as u32).map(|tv| (u, tv as usize, w))),
    )?;
    let umap = match_units(&mapped, truth);
    let mut counts = [[0usize; 2]; 2]; // [sign][correct, learned]
    for (u, v, w) in lg.edges() {
        let s = usize::from(w < 0.0);
        counts[s][1] += 1;
        let hit = match (umap[u], relabel_lower(v as u32)) {
            (Some(tu), Some(tv)) => truth
                .weight(tu as usize, tv as usize)
                .is_some_and(|tw| (tw < 0.0) == (w < 0.0)),
            _ => false,
        };
        counts[s][0] += usize::from(hit);
    }
    let true_plus = truth.edges().filter(|e| e.2 > 0.0).count();
    let true_minus = truth.num_edges() - true_plus;
    let scores = SignScores {
        precision_plus: ratio(counts[0][0], counts[0][1]),
        recall_plus: ratio(counts[0][0], true_plus),
        precision_minus: ratio(counts[1][0], counts[1][1]),
        recall_minus: ratio(counts[1][0], true_minus),
        residue: counts[1][1] - counts[1][0],
    };
    Ok((scores, umap))
}

/// Scores every learned layer bottom-up and fills the metrics.
pub fn evaluate_learned(truth: &DeepNet, learned: &mut LearnedNet) -> Result<Vec<SignScores>> {
    let mut lower_map: Vec<Option<u32>> = (0..truth.observed_dim() as u32).map(Some).collect();
    let mut out = Vec::new();
    for (i, layer) in learned.layers.iter().enumerate() {
        let (s, umap) = score_layer(layer, truth.graph(i), &lower_map)?;
        if let Some(m) = learned.metrics.get_mut(i) {
            m.precision_plus = Some(s.precision_plus);
            m.recall_plus = Some(s.recall_plus);
            m.precision_minus = Some(s.precision_minus);
            m.recall_minus = Some(s.recall_minus);
            m.residue = layer.recovery_residue + s.residue;
        }
        out.push(s);
        lower_map = umap;
    }
    Ok(out)
}

/// Per-layer scores of one net against another with the same depth.
pub fn compare_nets(truth: &DeepNet, learned: &DeepNet) -> Result<Vec<SignScores>> {
    if truth.num_layers() != learned.num_layers() {
        return Err(Error::DimensionMismatch {
            expected: truth.num_layers(),
            found: learned.num_layers(),
        });
    }
    let mut ln = LearnedNet {
        layers: (0..learned.num_layers()).map(|i| RecoveredLayer::from_graph(learned.graph(i))).collect(),
        top_density: 0.0,
        metrics: Vec::new(),
    };
    evaluate_learned(truth, &mut ln)
}

/// Relabels the hidden units of `learned` onto `truth` by the same
/// bottom-up matching used for scoring; unmatched units take the free slots.
pub fn align_net(truth: &DeepNet, learned: &DeepNet) -> Result<DeepNet> {
    let l = learned.num_layers();
    if truth.num_layers() != l {
        return Err(Error::DimensionMismatch {
            expected: truth.num_layers(),
            found: l,
        });
    }
    let mut lower: Vec<u32> = (0..learned.observed_dim() as u32).collect();
    let mut relabelled = Vec::with_capacity(l);
    for i in 0..l {
        let g = learned.graph(i);
        let t = truth.graph(i);
        if g.n_upper() != t.n_upper() || g.n_lower() != t.n_lower() {
            return Err(Error::DimensionMismatch {
                expected: t.n_upper(),
                found: g.n_upper(),
            });
        }
        let low = SignedBipartiteGraph::from_edges(
            g.n_upper(),
            g.n_lower(),
            g.edges().map(|(u, v, w)| (u, lower[v] as usize, w)),
        )?;
        let umap = match_units(&low, t);
        let mut used = vec![false; g.n_upper()];
        for &m in umap.iter().flatten() {
            used[m as usize] = true;
        }
        let mut free = (0..g.n_upper() as u32).filter(|&x| !used[x as usize]);
        let upper: Vec<u32> = umap.iter().map(|m| m.unwrap_or_else(|| free.next().expect("permutation"))).collect();
        relabelled.push(SignedBipartiteGraph::from_edges(
            g.n_upper(),
            g.n_lower(),
            low.edges().map(|(u, v, w)| (upper[u] as usize, v, w)),
        )?);
        lower = upper;
    }
    relabelled.reverse();
    DeepNet::new(learned.params.clone(), relabelled)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    /// Largest discrepancy over the compared moments.
    pub distance: f64,
    /// Standard error of the difference at the maximizing moment.
    pub sampling_error: f64,
    pub samples: usize,
}

struct MomentAcc {
    first: Vec<f64>,
    second: FxHashMap<u64, f64>,
}

fn accumulate_moments(net: &DeepNet, count: usize, seed: u64) -> MomentAcc {
    let n = net.observed_dim();
    let mut acc = MomentAcc {
        first: vec![0.0; n],
        second: FxHashMap::default(),
    };
    let mut nz: Vec<(u32, f64)> = Vec::new();
    for s in generate_samples(net, count, seed, false) {
        nz.clear();
        match &s.observed {
            Observed::Binary(b) => nz.extend(b.support().iter().map(|&v| (v, 1.0))),
            Observed::Real(y) => nz.extend(y.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(v, &x)| (v as u32, x))),
        }
        for (i, &(a, x)) in nz.iter().enumerate() {
            acc.first[a as usize] += x;
            for &(b, z) in &nz[i + 1..] {
                *acc.second.entry(pair_key(a, b)).or_insert(0.0) += x * z;
            }
        }
    }
    acc
}

/// Moment-matching proxy for the distance between the observed
/// distributions of two nets: the largest gap in first moments (firing
/// rates) or pairwise second moments (co-firing rates). It lower-bounds
/// how distinguishable the nets are; it is not total variation.
pub fn estimate_statistical_distance(a: &DeepNet, b: &DeepNet, num_samples: usize, seed: u64) -> Result<DistanceEstimate> {
    if a.observed_dim() != b.observed_dim() {
        return Err(Error::DimensionMismatch {
            expected: a.observed_dim(),
            found: b.observed_dim(),
        });
    }
    if num_samples == 0 {
        return Err(Error::InvalidParams("num_samples must be at least 1".into()));
    }
    let (ma, mb) = rayon::join(
        || accumulate_moments(a, num_samples, seed),
        || accumulate_moments(b, num_samples, seed),
    );
    let nf = num_samples as f64;
    let binary = a.params.output_mode == OutputMode::Thresholded;
    let mut best = (0.0f64, 0.0f64, 0.0f64);
    let mut consider = |x: f64, y: f64| {
        let (pa, pb) = (x / nf, y / nf);
        let gap = (pa - pb).abs();
        if gap > best.0 {
            best = (gap, pa, pb);
        }
    };
    for (x, y) in ma.first.iter().zip(&mb.first) {
        consider(*x, *y);
    }
    for (k, x) in &ma.second {
        consider(*x, mb.second.get(k).copied().unwrap_or(0.0));
    }
    for (k, y) in &mb.second {
        if !ma.second.contains_key(k) {
            consider(0.0, *y);
        }
    }
    let (gap, pa, pb) = best;
    let var = |p: f64| if binary { p * (1.0 - p) } else { p.abs() };
    let sampling_error = ((var(pa) + var(pb)) / nf).sqrt();
    Ok(DistanceEstimate {
        distance: gap,
        sampling_error,
        samples: num_samples,
    })
}
