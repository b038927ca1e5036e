//! Two-layer versus one-layer separation: cancellation gadgets, exact
//! infeasibility certificates for any single linear threshold, and the
//! disagreement rate of a fitted single-layer adversary.

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{generate_samples, DeepNet, OutputMode, SignedBipartiteGraph, WeightMode};

/// Top-node patterns on `(u1, u2, u3, u4)`, two that must leave `v` off
/// followed by two that must turn it on.
pub const PATTERNS: [[bool; 4]; 4] = [
    [true, true, false, false],
    [false, false, true, true],
    [true, false, false, true],
    [false, true, true, false],
];
pub const EXPECTED: [bool; 4] = [false, false, true, true];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GadgetInstance {
    pub output: u32,
    /// `u1 .. u4` in the top layer.
    pub top: [u32; 4],
    /// `x1, x2` in the middle layer; both positive parents of `output`.
    pub intermediates: [u32; 2],
    /// Weight from `(u1, u2)` into `x1` and from `(u3, u4)` into `x2`.
    pub signs: [[i8; 2]; 2],
}

fn check_two_layer(net: &DeepNet) -> Result<()> {
    if net.num_layers() != 2 {
        return Err(Error::InvalidParams(format!("need a 2-layer net, got {}", net.num_layers())));
    }
    if net.params.weight_mode != WeightMode::PlusMinusOne || net.params.output_mode != OutputMode::Thresholded {
        return Err(Error::InvalidParams("need a thresholded +-1 net".into()));
    }
    Ok(())
}

/// Output bit of `v` when exactly the top nodes in `active` are on.
pub fn simulate_output(net: &DeepNet, v: u32, active: &[u32]) -> bool {
    let (top, bottom) = (net.graph(1), net.graph(0));
    let total: f64 = bottom
        .parents(v as usize)
        .iter()
        .filter(|&&(x, _)| {
            active.iter().filter_map(|&u| top.weight(u as usize, x as usize)).sum::<f64>() > 0.0
        })
        .map(|e| e.1)
        .sum();
    total > 0.0
}

fn verify(net: &DeepNet, v: u32, u: [u32; 4]) -> bool {
    PATTERNS.iter().zip(EXPECTED).all(|(p, want)| {
        let mut active = [0u32; 2];
        for (slot, i) in active.iter_mut().zip((0..4).filter(|&i| p[i])) {
            *slot = u[i];
        }
        simulate_output(net, v, &active) == want
    })
}

fn signed_parents(g: &SignedBipartiteGraph, x: u32, positive: bool) -> impl Iterator<Item = u32> + '_ {
    g.parents(x as usize).iter().filter(move |e| (e.1 > 0.0) == positive).map(|e| e.0)
}

/// Every `(v, x1 < x2, u1..u4)` with `u1 -> x1` positive, `u2 -> x1`
/// negative, likewise `u3, u4` for `x2`, and `x1, x2` positive into `v`,
/// whose truth table holds by forward simulation.
pub fn find_gadgets(net: &DeepNet) -> Result<Vec<GadgetInstance>> {
    check_two_layer(net)?;
    let (top, bottom) = (net.graph(1), net.graph(0));
    let per_output: Vec<Vec<GadgetInstance>> = (0..bottom.n_lower() as u32)
        .into_par_iter()
        .map(|v| {
            let mut found = Vec::new();
            let xs: Vec<u32> = signed_parents(bottom, v, true).collect();
            for (i, &x1) in xs.iter().enumerate() {
                for &x2 in &xs[i + 1..] {
                    for u1 in signed_parents(top, x1, true) {
                        for u2 in signed_parents(top, x1, false) {
                            for u3 in signed_parents(top, x2, true) {
                                for u4 in signed_parents(top, x2, false) {
                                    let u = [u1, u2, u3, u4];
                                    let distinct = (0..4).all(|a| (a + 1..4).all(|b| u[a] != u[b]));
                                    if distinct && verify(net, v, u) {
                                        found.push(GadgetInstance {
                                            output: v,
                                            top: u,
                                            intermediates: [x1, x2],
                                            signs: [[1, -1], [1, -1]],
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
            found
        })
        .collect();
    Ok(per_output.into_iter().flatten().collect())
}

/// `sum_i coeffs[i] * A_{u_i, v} + bias * b_v` compared with 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub coeffs: [i64; 4],
    pub bias: i64,
    /// `> 0` when true, `<= 0` otherwise.
    pub strict_positive: bool,
}

impl LinearConstraint {
    fn from_pattern(p: &[bool; 4], on: bool) -> Self {
        Self {
            coeffs: p.map(i64::from),
            bias: 1,
            strict_positive: on,
        }
    }

    fn add(&self, o: &Self) -> Self {
        Self {
            coeffs: std::array::from_fn(|i| self.coeffs[i] + o.coeffs[i]),
            bias: self.bias + o.bias,
            strict_positive: self.strict_positive,
        }
    }

    fn render(&self) -> String {
        let mut terms: Vec<String> = (0..4)
            .filter(|&i| self.coeffs[i] != 0)
            .map(|i| match self.coeffs[i] {
                1 => format!("A{}", i + 1),
                c => format!("{c}A{}", i + 1),
            })
            .collect();
        terms.push(if self.bias == 1 { "b".into() } else { format!("{}b", self.bias) });
        format!("{} {} 0", terms.join(" + "), if self.strict_positive { ">" } else { "<=" })
    }
}

/// Two "off" constraints whose sum has the same left side as the sum of
/// two "on" constraints, so no `(A, b)` satisfies all four.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfeasibilityCertificate {
    pub constraints: Vec<LinearConstraint>,
    pub rendered: Vec<String>,
    /// Indices of the two `<= 0` and the two `> 0` constraints combined.
    pub off_pair: [usize; 2],
    pub on_pair: [usize; 2],
    pub off_sum: LinearConstraint,
    pub on_sum: LinearConstraint,
    pub contradiction: String,
}

impl InfeasibilityCertificate {
    /// Re-checks the arithmetic: equal left sides, one `<= 0`, one `> 0`.
    pub fn is_valid(&self) -> bool {
        let sum = |p: [usize; 2]| self.constraints[p[0]].add(&self.constraints[p[1]]);
        let (off, on) = (sum(self.off_pair), sum(self.on_pair));
        off.coeffs == on.coeffs
            && off.bias == on.bias
            && self.off_pair.iter().all(|&i| !self.constraints[i].strict_positive)
            && self.on_pair.iter().all(|&i| self.constraints[i].strict_positive)
            && off == self.off_sum
            && on == self.on_sum
    }
}

/// Certificate that no single linear threshold over four inputs realizes
/// the table, if one exists of the pairwise-sum form.
pub fn certify_truth_table(patterns: &[[bool; 4]], outputs: &[bool]) -> Option<InfeasibilityCertificate> {
    let constraints: Vec<LinearConstraint> = patterns
        .iter()
        .zip(outputs)
        .map(|(p, &on)| LinearConstraint::from_pattern(p, on))
        .collect();
    let idx = |on: bool| -> Vec<usize> { (0..constraints.len()).filter(|&i| constraints[i].strict_positive == on).collect() };
    let (offs, ons) = (idx(false), idx(true));
    for (a, &i) in offs.iter().enumerate() {
        for &j in &offs[a..] {
            let off = constraints[i].add(&constraints[j]);
            for (b, &k) in ons.iter().enumerate() {
                for &l in &ons[b..] {
                    let on = constraints[k].add(&constraints[l]);
                    if off.coeffs == on.coeffs && off.bias == on.bias {
                        let lhs = on.render();
                        let lhs = lhs.trim_end_matches(" > 0");
                        return Some(InfeasibilityCertificate {
                            rendered: constraints.iter().map(LinearConstraint::render).collect(),
                            off_pair: [i, j],
                            on_pair: [k, l],
                            contradiction: format!("{lhs} <= 0 and {lhs} > 0"),
                            constraints,
                            off_sum: off,
                            on_sum: on,
                        });
                    }
                }
            }
        }
    }
    None
}

/// Certificate for one gadget, built from its simulated truth table.
pub fn certify_gadget(net: &DeepNet, g: &GadgetInstance) -> Option<InfeasibilityCertificate> {
    let outputs: Vec<bool> = PATTERNS
        .iter()
        .map(|p| {
            let active: Vec<u32> = (0..4).filter(|&i| p[i]).map(|i| g.top[i]).collect();
            simulate_output(net, g.output, &active)
        })
        .collect();
    certify_truth_table(&PATTERNS, &outputs)
}

/// Integer linear threshold `sum_{u active} w_u + bias > 0` over the
/// top-layer ancestors of one output node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearThreshold {
    pub weights: FxHashMap<u32, i64>,
    pub bias: i64,
}

impl LinearThreshold {
    pub fn predict(&self, active: &[u32]) -> bool {
        active.iter().filter_map(|u| self.weights.get(u)).sum::<i64>() + self.bias > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub train_samples: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        Self {
            train_samples: 100_000,
            epochs: 20,
            seed: 1,
        }
    }
}

fn ancestors(net: &DeepNet, v: u32) -> Vec<u32> {
    let (top, bottom) = (net.graph(1), net.graph(0));
    let mut a: Vec<u32> = bottom
        .parents(v as usize)
        .iter()
        .flat_map(|&(x, _)| top.parents(x as usize).iter().map(|e| e.0))
        .collect();
    a.sort_unstable();
    a.dedup();
    a
}

/// Pocket perceptron over distinct `(active ancestors, label)` examples
/// weighted by multiplicity. Returns the iterate with the fewest weighted
/// training errors.
pub fn fit_perceptron(examples: &[(Vec<u32>, bool, usize)], epochs: usize) -> LinearThreshold {
    let mut cur = LinearThreshold {
        weights: FxHashMap::default(),
        bias: 0,
    };
    let errors = |t: &LinearThreshold| -> usize {
        examples.iter().filter(|(a, y, _)| t.predict(a) != *y).map(|e| e.2).sum()
    };
    let mut best = (errors(&cur), cur.clone());
    for _ in 0..epochs {
        let mut changed = false;
        for (a, y, _) in examples {
            if cur.predict(a) != *y {
                let step = if *y { 1 } else { -1 };
                for &u in a {
                    *cur.weights.entry(u).or_insert(0) += step;
                }
                cur.bias += step;
                changed = true;
            }
        }
        let e = errors(&cur);
        if e < best.0 {
            best = (e, cur.clone());
        }
        if !changed || best.0 == 0 {
            break;
        }
    }
    best.1
}

/// Fits one adversary per listed output node by empirical risk
/// minimization on fresh samples. A heuristic: the separation claim
/// concerns every `(A, b)`, which the certificates cover locally.
pub fn fit_adversaries(net: &DeepNet, outputs: &[u32], cfg: &AdversaryConfig) -> Result<FxHashMap<u32, LinearThreshold>> {
    check_two_layer(net)?;
    let anc: Vec<FxHashSet<u32>> = outputs.iter().map(|&v| ancestors(net, v).into_iter().collect()).collect();
    let mut tables: Vec<FxHashMap<(Vec<u32>, bool), usize>> = vec![FxHashMap::default(); outputs.len()];
    for s in generate_samples(net, cfg.train_samples, cfg.seed, true) {
        let top = &s.hidden.as_ref().expect("hidden kept")[0];
        let y = s.observed.as_binary().expect("thresholded");
        for (j, &v) in outputs.iter().enumerate() {
            let active: Vec<u32> = top.support().iter().copied().filter(|u| anc[j].contains(u)).collect();
            *tables[j].entry((active, y.contains(v as usize))).or_insert(0) += 1;
        }
    }
    Ok(outputs
        .par_iter()
        .zip(tables)
        .map(|(&v, t)| {
            let mut ex: Vec<(Vec<u32>, bool, usize)> = t.into_iter().map(|((a, y), c)| (a, y, c)).collect();
            ex.sort();
            (v, fit_perceptron(&ex, cfg.epochs))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementReport {
    pub samples: usize,
    pub disagreements: usize,
    pub rate: f64,
    pub gadget_outputs: usize,
    /// True when no gadget was found, in which case the rate is 0.
    pub no_certificate: bool,
}

/// Fraction of fresh samples on which some gadget-bearing output differs
/// between the net and its adversary.
pub fn measure_disagreement(
    net: &DeepNet,
    adversaries: &FxHashMap<u32, LinearThreshold>,
    num_samples: usize,
    seed: u64,
) -> Result<DisagreementReport> {
    check_two_layer(net)?;
    if adversaries.is_empty() {
        return Ok(DisagreementReport {
            samples: num_samples,
            disagreements: 0,
            rate: 0.0,
            gadget_outputs: 0,
            no_certificate: true,
        });
    }
    let mut outs: Vec<(&u32, &LinearThreshold)> = adversaries.iter().collect();
    outs.sort_by_key(|e| *e.0);
    let mut disagreements = 0usize;
    for s in generate_samples(net, num_samples, seed, true) {
        let top = s.hidden.as_ref().expect("hidden kept")[0].support();
        let y = s.observed.as_binary().expect("thresholded");
        if outs.iter().any(|(&v, t)| t.predict(top) != y.contains(v as usize)) {
            disagreements += 1;
        }
    }
    Ok(DisagreementReport {
        samples: num_samples,
        disagreements,
        rate: if num_samples == 0 { 0.0 } else { disagreements as f64 / num_samples as f64 },
        gadget_outputs: outs.len(),
        no_certificate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub gadgets: Vec<GadgetInstance>,
    pub certificates: Vec<InfeasibilityCertificate>,
    pub all_certified: bool,
    pub disagreement: DisagreementReport,
    /// `rho_3^2` for the net's top density.
    pub rho_top_squared: f64,
}

impl SeparationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Gadgets, certificates, fitted adversaries and their disagreement rate.
/// At most `max_outputs` gadget outputs (lowest indices) are fitted.
pub fn run_separation(
    net: &DeepNet,
    cfg: &AdversaryConfig,
    eval_samples: usize,
    max_outputs: usize,
) -> Result<SeparationReport> {
    let gadgets = find_gadgets(net)?;
    let certificates: Vec<InfeasibilityCertificate> = gadgets.iter().filter_map(|g| certify_gadget(net, g)).collect();
    let all_certified = certificates.len() == gadgets.len() && certificates.iter().all(|c| c.is_valid());
    let mut outputs: Vec<u32> = gadgets.iter().map(|g| g.output).collect();
    outputs.dedup();
    outputs.truncate(max_outputs);
    let adv = fit_adversaries(net, &outputs, cfg)?;
    let disagreement = measure_disagreement(net, &adv, eval_samples, cfg.seed.wrapping_add(1))?;
    let rho = net.params.top_support_size() as f64 / net.top_dim().max(1) as f64;
    Ok(SeparationReport {
        gadgets,
        certificates,
        all_certified,
        disagreement,
        rho_top_squared: rho * rho,
    })
}
