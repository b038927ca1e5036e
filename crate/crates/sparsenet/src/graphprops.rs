//! Brute-force random-graph property oracles.

use serde::{Deserialize, Serialize};

use crate::netmodel::SignedBipartiteGraph;

/// Default slack for the strong unique-neighbor check used by the partial encoder.
pub const EPS_ENCODER: f64 = 1.0 / 12.0;
/// Slack used by the autoencoder argument.
pub const EPS_AUTOENCODER: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: String,
    pub pass: bool,
    /// Offending nodes; always present on failure.
    pub witness: Option<Vec<usize>>,
    /// Signed slack of the tightest node (negative on failure).
    pub margin: f64,
}

impl PropertyReport {
    pub fn pass(property: &str, margin: f64) -> Self {
        Self {
            property: property.to_string(),
            pass: true,
            witness: None,
            margin,
        }
    }

    pub fn fail(property: &str, witness: Vec<usize>, margin: f64) -> Self {
        Self {
            property: property.to_string(),
            pass: false,
            witness: Some(witness),
            margin,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Number of members of `s` adjacent to each lower node.
pub(crate) fn cover_counts(g: &SignedBipartiteGraph, s: &[u32]) -> Vec<u32> {
    let mut c = vec![0u32; g.n_lower()];
    for &u in s {
        for &(v, _) in g.children(u as usize) {
            c[v as usize] += 1;
        }
    }
    c
}

/// Unique-neighbor weight fraction of every upper node with respect to `s`.
///
/// A node without edges has fraction 1.
pub fn unique_neighbor_fractions(g: &SignedBipartiteGraph, s: &[u32]) -> Vec<f64> {
    let cover = cover_counts(g, s);
    let mut in_s = vec![false; g.n_upper()];
    for &u in s {
        in_s[u as usize] = true;
    }
    (0..g.n_upper())
        .map(|u| {
            let own = u32::from(in_s[u]);
            let (mut uniq, mut total) = (0.0, 0.0);
            for &(v, w) in g.children(u) {
                total += w.abs();
                if cover[v as usize] == own {
                    uniq += w.abs();
                }
            }
            if total == 0.0 {
                1.0
            } else {
                uniq / total
            }
        })
        .collect()
}

/// `(1 - eps)`-strong unique-neighbor property of `s`, checked for every upper node.
pub fn check_unique_neighbor(g: &SignedBipartiteGraph, s: &[u32], eps: f64) -> PropertyReport {
    let name = "strong_unique_neighbor";
    let fr = unique_neighbor_fractions(g, s);
    let (worst, &min) = match fr
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))
    {
        Some(x) => x,
        None => return PropertyReport::pass(name, eps),
    };
    let margin = min - (1.0 - eps);
    if margin >= -1e-12 {
        PropertyReport::pass(name, margin)
    } else {
        PropertyReport::fail(name, vec![worst], margin)
    }
}

/// Every upper degree inside `[lo*d, hi*d]`.
pub fn check_degree_band(g: &SignedBipartiteGraph, d: f64, lo: f64, hi: f64) -> PropertyReport {
    let name = "degree_band";
    let (a, b) = (lo * d, hi * d);
    let mut margin = f64::INFINITY;
    let mut witness = Vec::new();
    for (u, &k) in g.upper_degrees().iter().enumerate() {
        let k = k as f64;
        let m = (k - a).min(b - k);
        margin = margin.min(m);
        if m < 0.0 {
            witness.push(u);
        }
    }
    if witness.is_empty() {
        PropertyReport::pass(name, if margin.is_finite() { margin } else { 0.0 })
    } else {
        PropertyReport::fail(name, witness, margin)
    }
}
