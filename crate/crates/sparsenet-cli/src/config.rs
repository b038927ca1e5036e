//! Flat `key = value` experiment configs with `#` comments.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::Serialize;
use sparsenet::correlation::{multilayer_unrelated_bound, recommended_samples};
use sparsenet::weightlearning::{LayerLearnConfig, LearnMode};
use sparsenet::{DeepNetParams, Error, OutputMode, Result, WeightMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Learner {
    Pairwise,
    Threewise,
    Lastlayer,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub params: DeepNetParams,
    pub learner: Learner,
    /// Explicit sample count; overrides the multiplier.
    pub samples: Option<usize>,
    pub sample_multiplier: f64,
    pub seeds: Vec<u64>,
    pub enforce_regime: bool,
    pub eval_samples: usize,
    pub sweep_n: Vec<usize>,
    pub sweep_d: Vec<f64>,
    pub sweep_rho: Vec<f64>,
    /// Every key as written, for echoing into reports.
    pub raw: BTreeMap<String, String>,
}

const KEYS: &[&str] = &[
    "num_layers",
    "layer_size",
    "expected_degree",
    "top_density",
    "weight_mode",
    "output_mode",
    "seed",
    "strict_degree",
    "density_cap",
    "learner",
    "samples",
    "sample_multiplier",
    "seeds",
    "enforce_regime",
    "eval_samples",
    "sweep_n",
    "sweep_d",
    "sweep_rho",
];

fn bad(msg: String) -> Error {
    Error::InvalidParams(msg)
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(format!("cannot parse `{v}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
            line: i + 1,
            msg: "expected `key = value`".into(),
        })?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(Error::Format {
                line: i + 1,
                msg: format!("unknown key `{k}`"),
            });
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_map(parse_kv(text)?)
    }

    pub fn from_map(raw: BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| raw.get(k).map(String::as_str);
        let req = |k: &str| get(k).ok_or_else(|| bad(format!("missing key `{k}`")));
        let mut params = DeepNetParams::new(
            parse("num_layers", req("num_layers")?)?,
            parse("layer_size", req("layer_size")?)?,
            parse("expected_degree", req("expected_degree")?)?,
            parse("top_density", req("top_density")?)?,
        );
        if let Some(v) = get("weight_mode") {
            params.weight_mode = match v {
                "pm1" => WeightMode::PlusMinusOne,
                "uniform" => WeightMode::UniformReal,
                _ => return Err(bad(format!("weight_mode `{v}` is not pm1 or uniform"))),
            };
        }
        if let Some(v) = get("output_mode") {
            params.output_mode = match v {
                "thresholded" => OutputMode::Thresholded,
                "real" => OutputMode::RealValued,
                _ => return Err(bad(format!("output_mode `{v}` is not thresholded or real"))),
            };
        }
        if let Some(v) = get("seed") {
            params.rng_seed = parse("seed", v)?;
        }
        if let Some(v) = get("strict_degree") {
            params.strict_degree = parse("strict_degree", v)?;
        }
        if let Some(v) = get("density_cap") {
            params.density_cap = parse("density_cap", v)?;
        }
        let learner = match get("learner").unwrap_or(if params.output_mode == OutputMode::RealValued {
            "lastlayer"
        } else {
            "pairwise"
        }) {
            "pairwise" => Learner::Pairwise,
            "threewise" => Learner::Threewise,
            "lastlayer" => Learner::Lastlayer,
            v => return Err(bad(format!("learner `{v}` is not pairwise, threewise or lastlayer"))),
        };
        let cfg = Self {
            learner,
            samples: get("samples").map(|v| parse("samples", v)).transpose()?,
            sample_multiplier: get("sample_multiplier").map_or(Ok(40.0), |v| parse("sample_multiplier", v))?,
            seeds: get("seeds").map_or(Ok(vec![params.rng_seed]), |v| parse_list("seeds", v))?,
            enforce_regime: get("enforce_regime").map_or(Ok(true), |v| parse("enforce_regime", v))?,
            eval_samples: get("eval_samples").map_or(Ok(100_000), |v| parse("eval_samples", v))?,
            sweep_n: get("sweep_n").map_or(Ok(vec![params.layer_size]), |v| parse_list("sweep_n", v))?,
            sweep_d: get("sweep_d").map_or(Ok(vec![params.expected_degree]), |v| parse_list("sweep_d", v))?,
            sweep_rho: get("sweep_rho").map_or(Ok(vec![params.top_density]), |v| parse_list("sweep_rho", v))?,
            params,
            raw,
        };
        cfg.params.validate()?;
        if cfg.learner == Learner::Lastlayer && cfg.params.output_mode != OutputMode::RealValued {
            return Err(bad("learner lastlayer needs output_mode = real".into()));
        }
        if !(cfg.sample_multiplier > 0.0) {
            return Err(bad("sample_multiplier must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.params.rng_seed = seed;
        self.seeds = vec![seed];
        self
    }

    /// `c * log n / rho_l^2` unless `samples` is set.
    pub fn sample_count(&self) -> usize {
        self.samples.unwrap_or_else(|| {
            recommended_samples(self.params.layer_size, self.params.top_density, self.sample_multiplier) as usize
        })
    }

    pub fn learn_mode(&self) -> LearnMode {
        match self.learner {
            Learner::Threewise => LearnMode::Threewise,
            _ => LearnMode::Pairwise,
        }
    }

    /// Every density precondition of the learner, checked before any work.
    pub fn regime_report(&self) -> Vec<String> {
        let p = &self.params;
        let rho = p.density_schedule().rho;
        let mut problems = Vec::new();
        if p.num_layers == 1 && self.learner != Learner::Lastlayer {
            let lc = LayerLearnConfig::new(p.expected_degree, rho[1], self.learn_mode());
            if rho[1] > lc.regime_bound() {
                problems.push(format!(
                    "rho_1 = {:.3e} exceeds {:.3e} for {:?} learning",
                    rho[1],
                    lc.regime_bound(),
                    self.learner
                ));
            }
        }
        if p.num_layers > 1 {
            for i in 0..p.num_layers {
                if i == 0 && p.output_mode == OutputMode::RealValued {
                    continue;
                }
                let bound = multilayer_unrelated_bound(rho[i + 1], rho[i]);
                if bound >= rho[i + 1] / 3.0 {
                    problems.push(format!(
                        "layer {i}: 2 rho_{i}^3 + 0.2 rho_{} = {bound:.3e} is not below rho_{}/3 = {:.3e}",
                        i + 1,
                        i + 1,
                        rho[i + 1] / 3.0
                    ));
                }
            }
        }
        problems
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_defaults() {
        let c = ExperimentConfig::from_text(
            "# desk run\nnum_layers = 1\nlayer_size=1000 # n\nexpected_degree = 5\ntop_density = 0.004\nseeds = 1, 2,3\n",
        )
        .unwrap();
        assert_eq!(c.params.layer_size, 1000);
        assert_eq!(c.seeds, vec![1, 2, 3]);
        assert_eq!(c.learner, Learner::Pairwise);
        assert_eq!(c.sweep_n, vec![1000]);
        assert!(c.regime_report().is_empty());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(ExperimentConfig::from_text("colour = red"), Err(Error::Format { line: 1, .. })));
        let e = ExperimentConfig::from_text("num_layers=1\nlayer_size=10\nexpected_degree=2\ntop_density=1.5");
        assert!(matches!(e, Err(Error::InvalidParams(_))));
    }

    #[test]
    fn empty_sweep_list() {
        let c = ExperimentConfig::from_text(
            "num_layers=1\nlayer_size=100\nexpected_degree=5\ntop_density=0.01\nsweep_n=\n",
        )
        .unwrap();
        assert!(c.sweep_n.is_empty());
    }

    #[test]
    fn regime_problems_are_listed() {
        let c = ExperimentConfig::from_text("num_layers=1\nlayer_size=100\nexpected_degree=10\ntop_density=0.05\n").unwrap();
        assert_eq!(c.regime_report().len(), 1);
    }
}
