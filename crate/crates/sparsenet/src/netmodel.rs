//! Ground-truth generative network: parameters, layer graphs, sampling and
//! the line-oriented text format.
//!
//! Layers are stored top first: `layers[0]` is `G_{l-1}` and `layers[l-1]` is
//! `G_0`, which maps `h^(1)` onto the observed vector `y = h^(0)`.

use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightMode {
    PlusMinusOne,
    UniformReal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputMode {
    RealValued,
    Thresholded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepNetParams {
    pub num_layers: usize,
    pub layer_size: usize,
    pub expected_degree: f64,
    /// Recorded only; `expected_degree` is what generation uses.
    pub degree_exponent: f64,
    pub top_density: f64,
    pub weight_mode: WeightMode,
    pub output_mode: OutputMode,
    pub rng_seed: u64,
    /// Regenerate (up to 100 times) until every upper degree is in [0.8d, 1.2d].
    pub strict_degree: bool,
    /// Warning cap on rho_l * (d/2)^l.
    pub density_cap: f64,
}

impl DeepNetParams {
    pub fn new(num_layers: usize, layer_size: usize, expected_degree: f64, top_density: f64) -> Self {
        let gamma = if layer_size > 1 && expected_degree > 0.0 {
            expected_degree.ln() / (layer_size as f64).ln()
        } else {
            0.0
        };
        Self {
            num_layers,
            layer_size,
            expected_degree,
            degree_exponent: gamma,
            top_density,
            weight_mode: WeightMode::PlusMinusOne,
            output_mode: OutputMode::Thresholded,
            rng_seed: 0,
            strict_degree: false,
            density_cap: 1.0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_modes(mut self, weight: WeightMode, output: OutputMode) -> Self {
        self.weight_mode = weight;
        self.output_mode = output;
        self
    }

    /// k = round(rho_l * n).
    pub fn top_support_size(&self) -> usize {
        (self.top_density * self.layer_size as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.num_layers == 0 || self.layer_size == 0 {
            return bad("num_layers and layer_size must be positive".into());
        }
        if !(self.expected_degree > 0.0) {
            return bad(format!("expected degree {} must be positive", self.expected_degree));
        }
        if self.expected_degree > self.layer_size as f64 {
            return bad(format!(
                "expected degree {} exceeds layer size {}",
                self.expected_degree, self.layer_size
            ));
        }
        if !(self.top_density > 0.0 && self.top_density <= 1.0) {
            return bad(format!("top density {} outside (0,1]", self.top_density));
        }
        if self.top_support_size() < 1 {
            return bad(format!(
                "rho_l * n = {} rounds to zero active top units",
                self.top_density * self.layer_size as f64
            ));
        }
        if self.num_layers > 1 {
            let rho1 = self.density_schedule().rho[1];
            if rho1 >= 1.0 {
                return bad(format!("derived density rho_1 = {rho1} is not below 1"));
            }
        }
        Ok(())
    }

    pub fn density_schedule(&self) -> DensitySchedule {
        density_schedule(self)
    }
}

/// `rho[i]` for `i = 0..=l`; `rho[0]` is the expected density of the
/// observed layer and `rho[l]` equals the top density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySchedule {
    pub rho: Vec<f64>,
    /// rho_l * (d/2)^l.
    pub constant: f64,
    pub warning: Option<String>,
}

pub fn density_schedule(p: &DeepNetParams) -> DensitySchedule {
    let l = p.num_layers;
    let half = p.expected_degree / 2.0;
    let rho: Vec<f64> = (0..=l)
        .map(|i| p.top_density * half.powi((l - i) as i32))
        .collect();
    let constant = p.top_density * half.powi(l as i32);
    let warning = (constant > p.density_cap).then(|| {
        format!(
            "rho_l*(d/2)^l = {constant:.4} exceeds the cap {}",
            p.density_cap
        )
    });
    DensitySchedule { rho, constant, warning }
}

/// Weighted bipartite graph from an upper (hidden) side to a lower side.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedBipartiteGraph {
    n_upper: usize,
    n_lower: usize,
    forward: Vec<Vec<(u32, f64)>>,
    backward: Vec<Vec<(u32, f64)>>,
}

impl SignedBipartiteGraph {
    pub fn empty(n_upper: usize, n_lower: usize) -> Self {
        Self {
            n_upper,
            n_lower,
            forward: vec![Vec::new(); n_upper],
            backward: vec![Vec::new(); n_lower],
        }
    }

    /// Builds the graph, rejecting duplicates, zero weights and out-of-range endpoints.
    pub fn from_edges<I>(n_upper: usize, n_lower: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut g = Self::empty(n_upper, n_lower);
        for (u, v, w) in edges {
            if u >= n_upper || v >= n_lower {
                return Err(Error::InvalidParams(format!(
                    "edge ({u},{v}) outside {n_upper}x{n_lower}"
                )));
            }
            if w == 0.0 || !w.is_finite() {
                return Err(Error::InvalidParams(format!("edge ({u},{v}) has weight {w}")));
            }
            g.forward[u].push((v as u32, w));
        }
        for (u, row) in g.forward.iter_mut().enumerate() {
            row.sort_by_key(|e| e.0);
            if let Some(pair) = row.windows(2).find(|p| p[0].0 == p[1].0) {
                return Err(Error::InvalidParams(format!("duplicate edge ({u},{})", pair[0].0)));
            }
        }
        g.rebuild_backward();
        Ok(g)
    }

    fn rebuild_backward(&mut self) {
        let mut backward = vec![Vec::new(); self.n_lower];
        for (u, row) in self.forward.iter().enumerate() {
            for &(v, w) in row {
                backward[v as usize].push((u as u32, w));
            }
        }
        self.backward = backward;
    }

    pub fn n_upper(&self) -> usize {
        self.n_upper
    }

    pub fn n_lower(&self) -> usize {
        self.n_lower
    }

    /// F(u) with weights, sorted by lower index.
    pub fn children(&self, u: usize) -> &[(u32, f64)] {
        &self.forward[u]
    }

    /// B(v) with weights, sorted by upper index.
    pub fn parents(&self, v: usize) -> &[(u32, f64)] {
        &self.backward[v]
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let row = &self.forward[u];
        row.binary_search_by_key(&(v as u32), |e| e.0)
            .ok()
            .map(|i| row[i].1)
    }

    pub fn num_edges(&self) -> usize {
        self.forward.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.forward
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().map(move |&(v, w)| (u, v as usize, w)))
    }

    /// Same edges enumerated through the backward view.
    pub fn edges_by_lower(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.backward
            .iter()
            .enumerate()
            .flat_map(|(v, col)| col.iter().map(move |&(u, w)| (u as usize, v, w)))
    }

    /// Subgraph of strictly positive edges (E+).
    pub fn positive_part(&self) -> Self {
        self.filter(|w| w > 0.0)
    }

    /// Subgraph of strictly negative edges (E-).
    pub fn negative_part(&self) -> Self {
        self.filter(|w| w < 0.0)
    }

    fn filter(&self, keep: impl Fn(f64) -> bool) -> Self {
        let forward = self
            .forward
            .iter()
            .map(|row| row.iter().copied().filter(|e| keep(e.1)).collect())
            .collect();
        let mut g = Self {
            n_upper: self.n_upper,
            n_lower: self.n_lower,
            forward,
            backward: Vec::new(),
        };
        g.rebuild_backward();
        g
    }

    /// Child sets F(u) without weights.
    pub fn child_sets(&self) -> Vec<Vec<u32>> {
        self.forward
            .iter()
            .map(|row| row.iter().map(|e| e.0).collect())
            .collect()
    }

    pub fn upper_degrees(&self) -> Vec<usize> {
        self.forward.iter().map(Vec::len).collect()
    }

    /// Dense `n_lower x n_upper` weight matrix (rows are lower nodes).
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n_upper]; self.n_lower];
        for (u, v, w) in self.edges() {
            m[v][u] = w;
        }
        m
    }
}

/// A 0/1 assignment stored by its sorted support.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SparseBinaryVector {
    dimension: usize,
    support: Vec<u32>,
}

impl SparseBinaryVector {
    pub fn new(dimension: usize, mut support: Vec<u32>) -> Result<Self> {
        support.sort_unstable();
        support.dedup();
        if let Some(&last) = support.last() {
            if last as usize >= dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: last as usize + 1,
                });
            }
        }
        Ok(Self { dimension, support })
    }

    /// Caller guarantees a sorted, duplicate-free, in-range support.
    pub(crate) fn from_sorted(dimension: usize, support: Vec<u32>) -> Self {
        debug_assert!(support.windows(2).all(|w| w[0] < w[1]));
        Self { dimension, support }
    }

    pub fn zeros(dimension: usize) -> Self {
        Self { dimension, support: Vec::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn contains(&self, i: usize) -> bool {
        self.support.binary_search(&(i as u32)).is_ok()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn to_dense(&self) -> Vec<u8> {
        let mut d = vec![0u8; self.dimension];
        for &i in &self.support {
            d[i as usize] = 1;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerOutput {
    Binary(SparseBinaryVector),
    Real(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepNet {
    pub params: DeepNetParams,
    /// Top first: `layers[0] = G_{l-1}`, ..., `layers[l-1] = G_0`.
    pub layers: Vec<SignedBipartiteGraph>,
}

impl DeepNet {
    pub fn new(params: DeepNetParams, layers: Vec<SignedBipartiteGraph>) -> Result<Self> {
        if layers.len() != params.num_layers {
            return Err(Error::InvalidParams(format!(
                "{} layers given for num_layers = {}",
                layers.len(),
                params.num_layers
            )));
        }
        for pair in layers.windows(2) {
            if pair[0].n_lower() != pair[1].n_upper() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].n_lower(),
                    found: pair[1].n_upper(),
                });
            }
        }
        if params.weight_mode == WeightMode::PlusMinusOne {
            if let Some((u, v, w)) = layers
                .iter()
                .flat_map(|g| g.edges())
                .find(|e| e.2.abs() != 1.0)
            {
                return Err(Error::InvalidParams(format!(
                    "edge ({u},{v}) weight {w} in a PlusMinusOne net"
                )));
            }
        }
        Ok(Self { params, layers })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// `G_i`, counting from the bottom (`G_0` feeds the observed layer).
    pub fn graph(&self, i: usize) -> &SignedBipartiteGraph {
        &self.layers[self.layers.len() - 1 - i]
    }

    pub fn observed_dim(&self) -> usize {
        self.layers.last().map_or(0, |g| g.n_lower())
    }

    pub fn top_dim(&self) -> usize {
        self.layers.first().map_or(0, |g| g.n_upper())
    }
}

pub fn generate_network(params: &DeepNetParams) -> Result<DeepNet> {
    params.validate()?;
    let n = params.layer_size;
    let attempts = if params.strict_degree { 100 } else { 1 };
    for attempt in 0..attempts {
        let seed = if attempt == 0 {
            params.rng_seed
        } else {
            rng::derive_seed(params.rng_seed, attempt as u64)
        };
        let layers: Vec<SignedBipartiteGraph> = (0..params.num_layers)
            .map(|li| {
                let mut r = rng::stream(seed, rng::DOMAIN_NETWORK, li as u64);
                random_layer(n, n, params.expected_degree / n as f64, params.weight_mode, &mut r)
            })
            .collect();
        let in_band = |g: &SignedBipartiteGraph| {
            let (lo, hi) = (0.8 * params.expected_degree, 1.2 * params.expected_degree);
            g.upper_degrees().iter().all(|&k| (k as f64) >= lo && (k as f64) <= hi)
        };
        if !params.strict_degree || layers.iter().all(in_band) {
            return DeepNet::new(params.clone(), layers);
        }
    }
    Err(Error::InvalidParams(
        "no net within the [0.8d, 1.2d] degree band after 100 attempts".into(),
    ))
}

/// Each of the `n_upper * n_lower` pairs is an edge independently with probability `p`.
pub fn random_layer(
    n_upper: usize,
    n_lower: usize,
    p: f64,
    mode: WeightMode,
    rng: &mut Rng,
) -> SignedBipartiteGraph {
    let mut g = SignedBipartiteGraph::empty(n_upper, n_lower);
    if p <= 0.0 {
        return g;
    }
    let geo = Geometric::new(p.min(1.0)).expect("probability in (0,1]");
    for row in g.forward.iter_mut() {
        let mut pos = 0u64;
        loop {
            pos += geo.sample(rng);
            if pos >= n_lower as u64 {
                break;
            }
            row.push((pos as u32, random_weight(mode, rng)));
            pos += 1;
        }
    }
    g.rebuild_backward();
    g
}

pub fn random_weight(mode: WeightMode, rng: &mut Rng) -> f64 {
    match mode {
        WeightMode::PlusMinusOne => {
            if rng.gen_bool(0.5) {
                1.0
            } else {
                -1.0
            }
        }
        WeightMode::UniformReal => loop {
            let w: f64 = rng.gen_range(-1.0..=1.0);
            if w != 0.0 {
                break w;
            }
        },
    }
}

/// Uniformly random subset of size round(rho_l * n).
pub fn sample_top(params: &DeepNetParams, rng: &mut Rng) -> SparseBinaryVector {
    sample_subset(params.layer_size, params.top_support_size(), rng)
}

pub fn sample_subset(n: usize, k: usize, rng: &mut Rng) -> SparseBinaryVector {
    let mut s: Vec<u32> = index::sample(rng, n, k.min(n))
        .into_iter()
        .map(|i| i as u32)
        .collect();
    s.sort_unstable();
    SparseBinaryVector::from_sorted(n, s)
}

/// Reusable accumulator for sparse forward passes.
#[derive(Debug, Clone, Default)]
pub struct ForwardScratch {
    acc: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<u32>,
}

impl ForwardScratch {
    fn accumulate(&mut self, g: &SignedBipartiteGraph, support: &[u32]) {
        if self.acc.len() < g.n_lower() {
            self.acc.resize(g.n_lower(), 0.0);
            self.seen.resize(g.n_lower(), false);
        }
        self.touched.clear();
        for &u in support {
            for &(v, w) in g.children(u as usize) {
                if !self.seen[v as usize] {
                    self.seen[v as usize] = true;
                    self.touched.push(v);
                }
                self.acc[v as usize] += w;
            }
        }
    }

    fn reset(&mut self, v: u32) -> f64 {
        self.seen[v as usize] = false;
        std::mem::take(&mut self.acc[v as usize])
    }

    /// Support of sgn(G h) with strict positivity.
    pub fn threshold(&mut self, g: &SignedBipartiteGraph, support: &[u32]) -> Vec<u32> {
        self.accumulate(g, support);
        let mut out = Vec::new();
        for i in 0..self.touched.len() {
            let v = self.touched[i];
            if self.reset(v) > 0.0 {
                out.push(v);
            }
        }
        out.sort_unstable();
        out
    }

    /// Sparse entries of G h.
    pub fn linear(&mut self, g: &SignedBipartiteGraph, support: &[u32]) -> Vec<(u32, f64)> {
        self.accumulate(g, support);
        let mut out = Vec::with_capacity(self.touched.len());
        for i in 0..self.touched.len() {
            let v = self.touched[i];
            let s = self.reset(v);
            if s != 0.0 {
                out.push((v, s));
            }
        }
        out.sort_unstable_by_key(|e| e.0);
        out
    }
}

pub fn forward_layer(
    g: &SignedBipartiteGraph,
    h: &SparseBinaryVector,
    threshold_output: bool,
) -> Result<LayerOutput> {
    if h.dimension() != g.n_upper() {
        return Err(Error::DimensionMismatch {
            expected: g.n_upper(),
            found: h.dimension(),
        });
    }
    let mut scratch = ForwardScratch::default();
    Ok(if threshold_output {
        LayerOutput::Binary(SparseBinaryVector::from_sorted(
            g.n_lower(),
            scratch.threshold(g, h.support()),
        ))
    } else {
        let mut y = vec![0.0; g.n_lower()];
        for (v, s) in scratch.linear(g, h.support()) {
            y[v as usize] = s;
        }
        LayerOutput::Real(y)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Observed {
    Binary(SparseBinaryVector),
    Real(Vec<f64>),
}

impl Observed {
    pub fn as_binary(&self) -> Option<&SparseBinaryVector> {
        match self {
            Observed::Binary(b) => Some(b),
            Observed::Real(_) => None,
        }
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Observed::Real(r) => Some(r),
            Observed::Binary(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// h^(l), ..., h^(1); present only when hidden layers were requested.
    pub hidden: Option<Vec<SparseBinaryVector>>,
    pub observed: Observed,
}

/// Lazily generated, index-addressable sample stream.
pub struct SampleStream<'a> {
    net: &'a DeepNet,
    seed: u64,
    next: u64,
    end: u64,
    keep_hidden: bool,
    scratch: ForwardScratch,
}

impl<'a> SampleStream<'a> {
    pub fn new(net: &'a DeepNet, seed: u64, count: usize, keep_hidden: bool) -> Self {
        Self::range(net, seed, 0, count as u64, keep_hidden)
    }

    /// Samples with indices `start..end`; concatenating ranges reproduces the full stream.
    pub fn range(net: &'a DeepNet, seed: u64, start: u64, end: u64, keep_hidden: bool) -> Self {
        Self {
            net,
            seed,
            next: start,
            end,
            keep_hidden,
            scratch: ForwardScratch::default(),
        }
    }
}

impl Iterator for SampleStream<'_> {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        if self.next >= self.end {
            return None;
        }
        let s = draw_sample(self.net, self.seed, self.next, self.keep_hidden, &mut self.scratch);
        self.next += 1;
        Some(s)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = (self.end - self.next) as usize;
        (r, Some(r))
    }
}

pub fn generate_samples(net: &DeepNet, count: usize, seed: u64, keep_hidden: bool) -> SampleStream<'_> {
    SampleStream::new(net, seed, count, keep_hidden)
}

/// Sample number `index` of the stream keyed by `seed`.
pub fn draw_sample(
    net: &DeepNet,
    seed: u64,
    index: u64,
    keep_hidden: bool,
    scratch: &mut ForwardScratch,
) -> Sample {
    let mut r = rng::stream(seed, rng::DOMAIN_SAMPLE, index);
    let top = sample_subset(net.top_dim(), net.params.top_support_size(), &mut r);
    propagate(net, top, keep_hidden, scratch)
}

/// Runs a top assignment down the whole stack.
pub fn propagate(
    net: &DeepNet,
    top: SparseBinaryVector,
    keep_hidden: bool,
    scratch: &mut ForwardScratch,
) -> Sample {
    let l = net.num_layers();
    let mut hidden = Vec::with_capacity(if keep_hidden { l } else { 0 });
    let mut current = top;
    for (li, g) in net.layers.iter().enumerate() {
        let bottom = li + 1 == l;
        if bottom && net.params.output_mode == OutputMode::RealValued {
            let mut y = vec![0.0; g.n_lower()];
            for (v, s) in scratch.linear(g, current.support()) {
                y[v as usize] = s;
            }
            if keep_hidden {
                hidden.push(current);
            }
            return Sample {
                hidden: keep_hidden.then_some(hidden),
                observed: Observed::Real(y),
            };
        }
        let next = SparseBinaryVector::from_sorted(g.n_lower(), scratch.threshold(g, current.support()));
        if keep_hidden {
            hidden.push(current);
        }
        current = next;
    }
    Sample {
        hidden: keep_hidden.then_some(hidden),
        observed: Observed::Binary(current),
    }
}

fn mode_token(p: &DeepNetParams) -> &'static str {
    match (p.weight_mode, p.output_mode) {
        (WeightMode::PlusMinusOne, OutputMode::Thresholded) => "pm1-thresholded",
        (WeightMode::PlusMinusOne, OutputMode::RealValued) => "pm1-real",
        (WeightMode::UniformReal, OutputMode::Thresholded) => "uniform-thresholded",
        (WeightMode::UniformReal, OutputMode::RealValued) => "uniform-real",
    }
}

fn parse_mode(tok: &str) -> Option<(WeightMode, OutputMode)> {
    Some(match tok {
        "pm1-thresholded" => (WeightMode::PlusMinusOne, OutputMode::Thresholded),
        "pm1-real" => (WeightMode::PlusMinusOne, OutputMode::RealValued),
        "uniform-thresholded" => (WeightMode::UniformReal, OutputMode::Thresholded),
        "uniform-real" => (WeightMode::UniformReal, OutputMode::RealValued),
        _ => return None,
    })
}

/// Exact weight text: integers for +-1, 17 significant digits otherwise.
pub fn format_weight(w: f64) -> String {
    if w == 1.0 || w == -1.0 {
        format!("{}", w as i32)
    } else {
        format!("{w:.16e}")
    }
}

pub fn write_net(net: &DeepNet) -> String {
    let p = &net.params;
    let mut out = format!(
        "layers {} {} {} {} {} {}\n",
        p.num_layers,
        p.layer_size,
        p.expected_degree,
        p.top_density,
        mode_token(p),
        p.rng_seed
    );
    for i in (0..net.num_layers()).rev() {
        let _ = writeln!(out, "layer {i}");
        for (u, v, w) in net.graph(i).edges() {
            let _ = writeln!(out, "{u} {v} {}", format_weight(w));
        }
    }
    out
}

pub fn read_net(text: &str) -> Result<DeepNet> {
    let fmt = |line: usize, msg: &str| Error::Format { line, msg: msg.to_string() };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines.next().ok_or_else(|| fmt(1, "empty input"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 7 || h[0] != "layers" {
        return Err(fmt(hl, "expected `layers l n d rho_l mode seed`"));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| fmt(hl, "bad number in header"));
    let int = |s: &str| s.parse::<u64>().map_err(|_| fmt(hl, "bad integer in header"));
    let l = int(h[1])? as usize;
    let n = int(h[2])? as usize;
    let mut params = DeepNetParams::new(l, n, num(h[3])?, num(h[4])?);
    let (wm, om) = parse_mode(h[5]).ok_or_else(|| fmt(hl, "unknown mode"))?;
    params = params.with_modes(wm, om).with_seed(int(h[6])?);

    let mut edges: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); l];
    let mut current: Option<usize> = None;
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks[0] == "layer" {
            let i: usize = toks
                .get(1)
                .and_then(|t| t.parse().ok())
                .filter(|&i| i < l)
                .ok_or_else(|| fmt(ln, "bad layer index"))?;
            current = Some(i);
            continue;
        }
        let i = current.ok_or_else(|| fmt(ln, "edge before any `layer` line"))?;
        if toks.len() != 3 {
            return Err(fmt(ln, "expected `u v w`"));
        }
        let u = toks[0].parse().map_err(|_| fmt(ln, "bad upper index"))?;
        let v = toks[1].parse().map_err(|_| fmt(ln, "bad lower index"))?;
        let w = toks[2].parse().map_err(|_| fmt(ln, "bad weight"))?;
        edges[i].push((u, v, w));
    }
    let layers = edges
        .into_iter()
        .rev()
        .map(|e| SignedBipartiteGraph::from_edges(n, n, e))
        .collect::<Result<Vec<_>>>()?;
    DeepNet::new(params, layers)
}

/// One line: hidden supports top first, then the observed layer, separated by `|`.
pub fn format_sample(s: &Sample) -> String {
    let join = |v: &SparseBinaryVector| {
        v.support().iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
    };
    let mut parts: Vec<String> = s
        .hidden
        .iter()
        .flatten()
        .map(join)
        .collect();
    parts.push(match &s.observed {
        Observed::Binary(b) => join(b),
        Observed::Real(y) => y.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" "),
    });
    parts.join(" | ")
}

/// Inverse of [`format_sample`] for a given net shape.
pub fn parse_sample(line: &str, net: &DeepNet, with_hidden: bool) -> Result<Sample> {
    let fmt = |msg: &str| Error::Format { line: 0, msg: msg.to_string() };
    let parts: Vec<&str> = line.split('|').map(str::trim).collect();
    let want = if with_hidden { net.num_layers() + 1 } else { 1 };
    if parts.len() != want {
        return Err(fmt("wrong number of `|`-separated layers"));
    }
    let ints = |s: &str, dim: usize| -> Result<SparseBinaryVector> {
        let v = s
            .split_whitespace()
            .map(|t| t.parse::<u32>().map_err(|_| fmt("bad index")))
            .collect::<Result<Vec<_>>>()?;
        SparseBinaryVector::new(dim, v)
    };
    let hidden = if with_hidden {
        let mut h = Vec::new();
        for (li, g) in net.layers.iter().enumerate() {
            h.push(ints(parts[li], g.n_upper())?);
        }
        Some(h)
    } else {
        None
    };
    let last = parts[parts.len() - 1];
    let observed = match net.params.output_mode {
        OutputMode::Thresholded => Observed::Binary(ints(last, net.observed_dim())?),
        OutputMode::RealValued => {
            let y = last
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| fmt("bad real")))
                .collect::<Result<Vec<_>>>()?;
            if y.len() != net.observed_dim() {
                return Err(Error::DimensionMismatch {
                    expected: net.observed_dim(),
                    found: y.len(),
                });
            }
            Observed::Real(y)
        }
    };
    Ok(Sample { hidden, observed })
}
