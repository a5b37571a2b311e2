//! Vector similarities, distances and the locality kernel.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Which text-side score becomes the regression target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TextMetric {
    Cosine,
    Wd,
    #[default]
    InvWd,
    #[serde(rename = "inv_wd_cosine")]
    InvWdPlusCosine,
    #[serde(rename = "wd_cosine")]
    WdPlusCosine,
}

impl TextMetric {
    pub const ALL: [TextMetric; 5] = [
        TextMetric::Cosine,
        TextMetric::InvWd,
        TextMetric::InvWdPlusCosine,
        TextMetric::Wd,
        TextMetric::WdPlusCosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TextMetric::Cosine => "cosine",
            TextMetric::Wd => "wd",
            TextMetric::InvWd => "inv_wd",
            TextMetric::InvWdPlusCosine => "inv_wd_cosine",
            TextMetric::WdPlusCosine => "wd_cosine",
        }
    }
}

impl fmt::Display for TextMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TextMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cosine" => TextMetric::Cosine,
            "wd" => TextMetric::Wd,
            "inv_wd" => TextMetric::InvWd,
            "inv_wd_cosine" | "inv_wd_plus_cosine" => TextMetric::InvWdPlusCosine,
            "wd_cosine" | "wd_plus_cosine" => TextMetric::WdPlusCosine,
            other => return Err(Error::Config(format!("unknown text metric {other:?}"))),
        })
    }
}

/// What goes inside the Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    /// `exp(-(1 - s)^2 / sigma^2)` with `s` a [0, 1] similarity: identical
    /// samples get weight 1.
    #[default]
    Distance,
    /// `exp(-c^2 / sigma^2)` with the raw cosine `c`, as the formula is
    /// commonly printed. Down-weights the most similar samples.
    Literal,
}

/// How vector entries are paired before the order-p mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WassersteinMode {
    /// Sort both vectors first: the 1-D Wasserstein distance between the two
    /// empirical distributions of entries.
    #[default]
    Sorted,
    /// Pair entries by index without sorting.
    Paired,
}

/// Decreasing map from a Wasserstein distance to a (0, 1] similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseMap {
    /// `1 / (1 + wd)`
    #[default]
    Reciprocal,
    /// `exp(-wd)`
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityConfig {
    pub text_metric: TextMetric,
    /// Wasserstein order, at least 1.
    pub p: f64,
    pub hybrid_alpha: f64,
    pub kernel_sigma: f64,
    pub kernel_mode: KernelMode,
    pub wasserstein_mode: WassersteinMode,
    pub inverse_map: InverseMap,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            text_metric: TextMetric::InvWd,
            p: 1.0,
            hybrid_alpha: 0.5,
            kernel_sigma: 0.25,
            kernel_mode: KernelMode::Distance,
            wasserstein_mode: WassersteinMode::Sorted,
            inverse_map: InverseMap::Reciprocal,
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::Config(format!("Wasserstein order {} must be >= 1", self.p)));
        }
        if !(0.0..=1.0).contains(&self.hybrid_alpha) {
            return Err(Error::Config("hybrid_alpha must lie in [0, 1]".into()));
        }
        if !(self.kernel_sigma > 0.0 && self.kernel_sigma.is_finite()) {
            return Err(Error::Config("kernel_sigma must be positive".into()));
        }
        Ok(())
    }
}

/// All text-side scores between an original and a perturbed answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreBundle {
    pub cosine: f64,
    pub wd: f64,
    pub inv_wd: f64,
    pub hybrid: f64,
}

impl ScoreBundle {
    /// The regression target selected by `metric`.
    pub fn target(&self, metric: TextMetric) -> f64 {
        match metric {
            TextMetric::Cosine => self.cosine,
            TextMetric::Wd => self.wd,
            TextMetric::InvWd => self.inv_wd,
            TextMetric::InvWdPlusCosine | TextMetric::WdPlusCosine => self.hybrid,
        }
    }
}

fn check_pair(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!(
            "vector dimensions differ: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    if u.is_empty() {
        return Err(Error::Shape("vectors are empty".into()));
    }
    if u.iter().chain(v).any(|x| x.is_nan()) {
        return Err(Error::Contract("NaN in input vector".into()));
    }
    Ok(())
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    check_pair(u, v)?;
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu2: f64 = u.iter().map(|a| a * a).sum();
    let nv2: f64 = v.iter().map(|b| b * b).sum();
    if nu2 == 0.0 || nv2 == 0.0 {
        return Ok(0.0);
    }
    // sqrt(x*x) == x exactly, so cosine(u, u) is exactly 1
    let prod = nu2 * nv2;
    let denom = if prod.is_finite() && prod >= f64::MIN_POSITIVE {
        prod.sqrt()
    } else {
        nu2.sqrt() * nv2.sqrt()
    };
    Ok((dot / denom).clamp(-1.0, 1.0))
}

/// Maps a cosine in [-1, 1] onto [0, 1].
pub fn map_cosine(c: f64) -> f64 {
    (c + 1.0) / 2.0
}

/// Order-`p` Wasserstein distance between the entries of `u` and `v` viewed as
/// equal-weight empirical distributions.
pub fn wasserstein(u: &[f64], v: &[f64], p: f64) -> Result<f64> {
    wasserstein_with(u, v, p, WassersteinMode::Sorted)
}

pub fn wasserstein_with(u: &[f64], v: &[f64], p: f64, mode: WassersteinMode) -> Result<f64> {
    check_pair(u, v)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Config(format!("Wasserstein order {p} must be >= 1")));
    }
    let (mut a, mut b) = (u.to_vec(), v.to_vec());
    if mode == WassersteinMode::Sorted {
        a.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
        b.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    }
    let n = a.len() as f64;
    let mean = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs().powf(p))
        .sum::<f64>()
        / n;
    Ok(mean.powf(1.0 / p))
}

/// `1 / (1 + W_p(u, v))`: 1 for identical samples, strictly decreasing in the distance.
pub fn inverse_wd(u: &[f64], v: &[f64], p: f64) -> Result<f64> {
    Ok(invert_distance(wasserstein(u, v, p)?, InverseMap::Reciprocal))
}

pub fn invert_distance(wd: f64, map: InverseMap) -> f64 {
    match map {
        InverseMap::Reciprocal => 1.0 / (1.0 + wd),
        InverseMap::Exponential => (-wd).exp(),
    }
}

/// `alpha * (cos + 1) / 2 + (1 - alpha) * inv_wd`.
pub fn hybrid(u: &[f64], v: &[f64], cfg: &SimilarityConfig) -> Result<f64> {
    Ok(score_bundle(u, v, cfg)?.hybrid)
}

pub fn score_bundle(u: &[f64], v: &[f64], cfg: &SimilarityConfig) -> Result<ScoreBundle> {
    let cos = cosine(u, v)?;
    let wd = wasserstein_with(u, v, cfg.p, cfg.wasserstein_mode)?;
    let inv_wd = invert_distance(wd, cfg.inverse_map);
    let hybrid = cfg.hybrid_alpha * map_cosine(cos) + (1.0 - cfg.hybrid_alpha) * inv_wd;
    Ok(ScoreBundle {
        cosine: cos,
        wd,
        inv_wd,
        hybrid,
    })
}

/// Gaussian locality kernel. Clamped below at the smallest positive normal
/// float so weights stay in (0, 1].
pub fn kernel_weight(score: f64, cfg: &SimilarityConfig) -> Result<f64> {
    if !(cfg.kernel_sigma > 0.0 && cfg.kernel_sigma.is_finite()) {
        return Err(Error::Config("kernel_sigma must be positive".into()));
    }
    if !score.is_finite() {
        return Err(Error::Contract(format!("kernel input {score} is not finite")));
    }
    let x = match cfg.kernel_mode {
        KernelMode::Distance => 1.0 - score,
        KernelMode::Literal => score,
    };
    let sigma2 = cfg.kernel_sigma * cfg.kernel_sigma;
    Ok((-(x * x) / sigma2).exp().clamp(f64::MIN_POSITIVE, 1.0))
}

/// Kernel weight of a perturbation from its graph-to-graph cosine: distance
/// mode feeds the [0, 1]-mapped cosine, literal mode the raw cosine.
pub fn graph_kernel_weight(graph_cosine: f64, cfg: &SimilarityConfig) -> Result<f64> {
    let score = match cfg.kernel_mode {
        KernelMode::Distance => map_cosine(graph_cosine),
        KernelMode::Literal => graph_cosine,
    };
    kernel_weight(score, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cosine_cases() {
        assert_eq!(cosine(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap(), 0.5_f64.sqrt(), epsilon = 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(cosine(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(matches!(cosine(&[f64::NAN], &[1.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn wasserstein_cases() {
        assert_eq!(wasserstein(&[0.1, 0.7], &[0.7, 0.1], 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(wasserstein(&[0.0, 0.5, 2.0], &[0.3, 0.8, 2.3], 1.0).unwrap(), 0.3, epsilon = 1e-12);
        assert_eq!(wasserstein(&[0.0, 0.0], &[1.0, 3.0], 1.0).unwrap(), 2.0);
        assert_abs_diff_eq!(wasserstein(&[0.0, 0.0], &[1.0, 3.0], 2.0).unwrap(), 5f64.sqrt(), epsilon = 1e-12);
        assert!(matches!(wasserstein(&[1.0], &[1.0], 0.5), Err(Error::Config(_))));
        assert_eq!(
            wasserstein_with(&[0.1, 0.7], &[0.7, 0.1], 1.0, WassersteinMode::Paired).unwrap(),
            0.6
        );
    }

    #[test]
    fn inverse_and_hybrid() {
        assert_eq!(inverse_wd(&[1.0, 2.0], &[1.0, 2.0], 1.0).unwrap(), 1.0);
        assert_eq!(invert_distance(1.0, InverseMap::Reciprocal), 0.5);
        assert_abs_diff_eq!(inverse_wd(&[0.0, 0.0], &[1.0, 3.0], 1.0).unwrap(), 1.0 / 3.0, epsilon = 1e-12);

        let cfg = SimilarityConfig::default();
        assert_eq!(hybrid(&[0.2, 0.5], &[0.2, 0.5], &cfg).unwrap(), 1.0);
        let alpha1 = SimilarityConfig {
            hybrid_alpha: 1.0,
            ..cfg.clone()
        };
        let (u, v) = ([1.0, 0.0], [1.0, 1.0]);
        assert_eq!(hybrid(&u, &v, &alpha1).unwrap(), map_cosine(cosine(&u, &v).unwrap()));
        // sorted: [0,1] vs [1,1] -> wd = 0.5
        let expected = 0.5 * ((0.5_f64.sqrt() + 1.0) / 2.0) + 0.5 * (1.0 / 1.5);
        assert_abs_diff_eq!(hybrid(&u, &v, &cfg).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn kernel_cases() {
        let cfg = SimilarityConfig::default();
        assert_eq!(kernel_weight(1.0, &cfg).unwrap(), 1.0);
        assert_abs_diff_eq!(kernel_weight(0.5, &cfg).unwrap(), 0.0183156, epsilon = 1e-6);
        let literal = SimilarityConfig {
            kernel_mode: KernelMode::Literal,
            ..cfg.clone()
        };
        assert_eq!(kernel_weight(0.0, &literal).unwrap(), 1.0);
        let tiny = SimilarityConfig {
            kernel_sigma: 1e-3,
            ..cfg.clone()
        };
        assert!(kernel_weight(-1.0, &tiny).unwrap() > 0.0);
        let bad = SimilarityConfig {
            kernel_sigma: 0.0,
            ..cfg
        };
        assert!(kernel_weight(0.5, &bad).is_err());
    }

    #[test]
    fn metric_names_round_trip() {
        for m in TextMetric::ALL {
            assert_eq!(m.name().parse::<TextMetric>().unwrap(), m);
        }
        assert!("l2".parse::<TextMetric>().is_err());
    }
}
