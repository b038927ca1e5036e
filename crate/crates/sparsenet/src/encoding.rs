//! Encoders that run a layer in reverse, plus the denoising check.

use rand_distr::{Distribution, Geometric, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphprops::{check_unique_neighbor, EPS_ENCODER};
use crate::netmodel::{sample_subset, ForwardScratch, SignedBipartiteGraph, SparseBinaryVector};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncoderMode {
    /// Counts fired positive children; weights ignored.
    PartialBinary,
    /// Signed transpose of the decoder, binary input.
    TiedBinary,
    /// Signed transpose of the decoder, real input.
    LastLayerReal,
}

#[derive(Debug, Clone)]
pub struct EncoderSpec {
    pub graph: SignedBipartiteGraph,
    pub theta: f64,
    pub mode: EncoderMode,
}

impl EncoderSpec {
    pub fn new(graph: SignedBipartiteGraph, theta: f64, mode: EncoderMode) -> Result<Self> {
        if !(theta > 0.0) {
            return Err(Error::InvalidParams(format!("encoder threshold {theta} must be positive")));
        }
        if mode == EncoderMode::PartialBinary && graph.edges().any(|e| e.2 <= 0.0) {
            return Err(Error::InvalidParams("partial encoder needs an all-positive graph".into()));
        }
        Ok(Self { graph, theta, mode })
    }

    /// Partial encoder on the positive part of `g`, threshold `0.3 d`.
    pub fn partial(g: &SignedBipartiteGraph, d: f64) -> Result<Self> {
        Self::new(g.positive_part(), 0.3 * d, EncoderMode::PartialBinary)
    }

    /// Weight-tied encoder, threshold `0.2 d`.
    pub fn tied(g: &SignedBipartiteGraph, d: f64) -> Result<Self> {
        Self::new(g.clone(), 0.2 * d, EncoderMode::TiedBinary)
    }

    /// Real-input encoder, threshold `0.4 d`.
    pub fn last_layer(g: &SignedBipartiteGraph, d: f64) -> Result<Self> {
        Self::new(g.clone(), 0.4 * d, EncoderMode::LastLayerReal)
    }
}

/// Input to an encoder: a binary layer or a dense real vector.
#[derive(Debug, Clone, Copy)]
pub enum EncoderInput<'a> {
    Binary(&'a SparseBinaryVector),
    Real(&'a [f64]),
}

fn check_dim(g: &SignedBipartiteGraph, found: usize) -> Result<()> {
    if found != g.n_lower() {
        return Err(Error::DimensionMismatch {
            expected: g.n_lower(),
            found,
        });
    }
    Ok(())
}

/// Per-upper-node score accumulator.
struct Scores {
    score: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<u32>,
}

impl Scores {
    fn new(n_upper: usize) -> Self {
        Self {
            score: vec![0.0; n_upper],
            seen: vec![false; n_upper],
            touched: Vec::new(),
        }
    }

    #[inline]
    fn add(&mut self, u: u32, x: f64) {
        let i = u as usize;
        if !self.seen[i] {
            self.seen[i] = true;
            self.touched.push(u);
        }
        self.score[i] += x;
    }

    /// Upper nodes whose score strictly exceeds `theta`.
    fn above(self, theta: f64) -> SparseBinaryVector {
        let mut support: Vec<u32> = self.touched.into_iter().filter(|&u| self.score[u as usize] > theta).collect();
        support.sort_unstable();
        SparseBinaryVector::new(self.score.len(), support).expect("indices are in range")
    }
}

/// `h_u = 1` iff more than `theta` positive children of `u` fired.
pub fn partial_encode(spec: &EncoderSpec, y: &SparseBinaryVector) -> Result<SparseBinaryVector> {
    let g = &spec.graph;
    check_dim(g, y.dimension())?;
    let mut acc = Scores::new(g.n_upper());
    for &v in y.support() {
        for &(u, w) in g.parents(v as usize) {
            if w > 0.0 {
                acc.add(u, 1.0);
            }
        }
    }
    Ok(acc.above(spec.theta))
}

/// `h_u = 1` iff `(G^T y)_u > theta` with signed weights.
pub fn tied_encode(g: &SignedBipartiteGraph, y: &SparseBinaryVector, theta: f64) -> Result<SparseBinaryVector> {
    check_dim(g, y.dimension())?;
    let mut acc = Scores::new(g.n_upper());
    for &v in y.support() {
        for &(u, w) in g.parents(v as usize) {
            acc.add(u, w);
        }
    }
    Ok(acc.above(theta))
}

/// `h_u = 1` iff `(G^T y)_u > theta` for a real observation.
pub fn last_layer_encode(g: &SignedBipartiteGraph, y: &[f64], theta: f64) -> Result<SparseBinaryVector> {
    check_dim(g, y.len())?;
    let mut acc = Scores::new(g.n_upper());
    for (v, &yv) in y.iter().enumerate().filter(|e| *e.1 != 0.0) {
        for &(u, w) in g.parents(v) {
            acc.add(u, w * yv);
        }
    }
    Ok(acc.above(theta))
}

pub fn encode(spec: &EncoderSpec, y: EncoderInput<'_>) -> Result<SparseBinaryVector> {
    match (spec.mode, y) {
        (EncoderMode::PartialBinary, EncoderInput::Binary(b)) => partial_encode(spec, b),
        (EncoderMode::TiedBinary, EncoderInput::Binary(b)) => tied_encode(&spec.graph, b, spec.theta),
        (EncoderMode::LastLayerReal, EncoderInput::Real(r)) => last_layer_encode(&spec.graph, r, spec.theta),
        (EncoderMode::LastLayerReal, EncoderInput::Binary(_)) => Err(Error::WrongOutputMode),
        (_, EncoderInput::Real(_)) => Err(Error::InvalidParams("binary encoder given a real vector".into())),
    }
}

/// Sufficient condition, checkable per support, for `partial_encode` with
/// threshold `theta` to invert a +-1 layer exactly on `h`: the support has
/// the 11/12-strong unique-neighbor property, every member keeps more than
/// `theta` unique positive children, and no outsider has more than `theta`
/// children covered by the support.
pub fn certify_partial_exactness(g: &SignedBipartiteGraph, h: &[u32], theta: f64) -> bool {
    if g.edges().any(|e| e.2.abs() != 1.0) {
        return false;
    }
    if !check_unique_neighbor(g, h, EPS_ENCODER).pass {
        return false;
    }
    let mut in_s = vec![false; g.n_upper()];
    for &u in h {
        in_s[u as usize] = true;
    }
    (0..g.n_upper()).all(|u| {
        let total = g.children(u).len() as f64;
        if in_s[u] {
            let pos = g.children(u).iter().filter(|e| e.1 > 0.0).count() as f64;
            pos - total * EPS_ENCODER > theta
        } else {
            total * EPS_ENCODER <= theta
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseSpec {
    BitFlip(f64),
    AdditiveGaussian(f64),
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::BitFlip(p) if !(0.0..=0.5).contains(&p) => {
                Err(Error::InvalidParams(format!("flip probability {p} outside [0, 0.5]")))
            }
            NoiseSpec::AdditiveGaussian(v) if !(v >= 0.0) => Err(Error::InvalidParams(format!("variance {v} < 0"))),
            _ => Ok(()),
        }
    }
}

/// Flips every coordinate independently with probability `p`.
pub fn flip_bits(y: &SparseBinaryVector, p: f64, rng: &mut Rng) -> SparseBinaryVector {
    let n = y.dimension();
    let mut flips = Vec::new();
    if p >= 1.0 {
        flips.extend(0..n as u32);
    } else if p > 0.0 {
        let geo = Geometric::new(p).expect("p in (0,1)");
        let mut i = geo.sample(rng);
        while i < n as u64 {
            flips.push(i as u32);
            i += 1 + geo.sample(rng);
        }
    }
    // Symmetric difference of two sorted lists.
    let (a, b) = (y.support(), &flips);
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&x), Some(&z)) if x == z => {
                i += 1;
                j += 1;
            }
            (Some(&x), Some(&z)) if x < z => {
                out.push(x);
                i += 1;
            }
            (Some(_), Some(&z)) => {
                out.push(z);
                j += 1;
            }
            (Some(&x), None) => {
                out.push(x);
                i += 1;
            }
            (None, Some(&z)) => {
                out.push(z);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    SparseBinaryVector::new(n, out).expect("sorted in range")
}

/// Adds independent `N(0, variance)` noise to every coordinate.
pub fn add_gaussian(y: &mut [f64], variance: f64, rng: &mut Rng) {
    if variance == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite variance");
    for x in y {
        *x += normal.sample(rng);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoisingReport {
    pub trials: usize,
    pub exact: usize,
    pub rate: f64,
}

/// Fraction of trials with `E(D(h) + noise) = h`, for uniformly random
/// `k`-subsets `h` of the upper side. The decoder is the thresholded forward
/// pass of `decoder` for binary encoders and the linear pass for the real one.
pub fn check_denoising(
    spec: &EncoderSpec,
    decoder: &SignedBipartiteGraph,
    k: usize,
    noise: NoiseSpec,
    trials: usize,
    seed: u64,
) -> Result<DenoisingReport> {
    noise.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    if k > decoder.n_upper() || decoder.n_upper() != spec.graph.n_upper() || decoder.n_lower() != spec.graph.n_lower() {
        return Err(Error::DimensionMismatch {
            expected: spec.graph.n_upper(),
            found: decoder.n_upper(),
        });
    }
    let real = spec.mode == EncoderMode::LastLayerReal;
    match (real, noise) {
        (true, NoiseSpec::BitFlip(p)) if p > 0.0 => {
            return Err(Error::InvalidParams("bit flips apply to binary layers only".into()))
        }
        (false, NoiseSpec::AdditiveGaussian(v)) if v > 0.0 => {
            return Err(Error::InvalidParams("Gaussian noise applies to real layers only".into()))
        }
        _ => {}
    }
    let exact = (0..trials)
        .into_par_iter()
        .map_init(ForwardScratch::default, |scratch, t| -> Result<usize> {
            let mut r = rng::stream(seed, rng::DOMAIN_NOISE, t as u64);
            let h = sample_subset(decoder.n_upper(), k, &mut r);
            let got = if real {
                let mut y = vec![0.0; decoder.n_lower()];
                for (v, x) in scratch.linear(decoder, h.support()) {
                    y[v as usize] = x;
                }
                if let NoiseSpec::AdditiveGaussian(var) = noise {
                    add_gaussian(&mut y, var, &mut r);
                }
                encode(spec, EncoderInput::Real(&y))?
            } else {
                let y = SparseBinaryVector::new(decoder.n_lower(), scratch.threshold(decoder, h.support()))?;
                let y = match noise {
                    NoiseSpec::BitFlip(p) => flip_bits(&y, p, &mut r),
                    NoiseSpec::AdditiveGaussian(_) => y,
                };
                encode(spec, EncoderInput::Binary(&y))?
            };
            Ok(usize::from(got == h))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(DenoisingReport {
        trials,
        exact,
        rate: exact as f64 / trials as f64,
    })
}
