//! Local surrogate models over perturbation masks.
//!
//! Each perturbation sample is a row; each triple is a 0/1 column (1 = the
//! triple was kept). The target is the chosen text-similarity score and the
//! row weight is the kernel weight of the sample. Coefficients of the fitted
//! linear model are the triple attributions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;
use crate::metrics::{fidelity, FidelityReport};
use crate::perturbation::PerturbationRun;
use crate::similarity::TextMetric;

/// Diagonal jitter added to the normal equations so rank-deficient designs
/// (constant columns, duplicate masks) still have a unique solution.
pub const RIDGE_JITTER: f64 = 1e-8;
const MAX_REFINEMENTS: usize = 10;

const BAYES_INIT: f64 = 1e-6;
const BAYES_HYPERPRIOR: f64 = 1e-6;
const BAYES_MAX_ITER: usize = 300;
const BAYES_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateMethod {
    #[default]
    Wls,
    BayesianRidge,
}

impl fmt::Display for SurrogateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurrogateMethod::Wls => "wls",
            SurrogateMethod::BayesianRidge => "bayes",
        })
    }
}

impl FromStr for SurrogateMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wls" | "linear" => Ok(SurrogateMethod::Wls),
            "bayes" | "bayesian_ridge" => Ok(SurrogateMethod::BayesianRidge),
            other => Err(Error::Config(format!("unknown surrogate {other:?}"))),
        }
    }
}

/// How kernel weights enter the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignMode {
    /// Presence features, kernel weights as sample weights.
    #[default]
    Standard,
    /// Features multiplied by the sample's kernel weight, unweighted rows.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureCoding {
    /// 1 = triple kept.
    #[default]
    Presence,
    /// 1 = triple removed.
    Removal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    weights: Vec<f64>,
    coding: FeatureCoding,
    constant_columns: Vec<usize>,
}

impl DesignMatrix {
    pub fn new(rows: Vec<Vec<f64>>, targets: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Shape("design has no samples".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("design rows differ in length".into()));
        }
        if targets.len() != rows.len() || weights.len() != rows.len() {
            return Err(Error::Shape("targets/weights do not match the row count".into()));
        }
        if rows.iter().flatten().chain(&targets).chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::Contract("non-finite value in design".into()));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::Contract("sample weights must be positive".into()));
        }
        let constant_columns = (0..cols)
            .filter(|&c| rows.iter().all(|r| r[c] == rows[0][c]))
            .collect::<Vec<_>>();
        if !constant_columns.is_empty() {
            log::warn!(
                "columns {constant_columns:?} are constant across samples; their coefficients are unidentifiable"
            );
        }
        Ok(Self {
            rows,
            targets,
            weights,
            coding: FeatureCoding::Presence,
            constant_columns,
        })
    }

    /// The same design with removal coding (`x -> 1 - x`).
    pub fn to_removal_coding(&self) -> Self {
        let mut out = self.clone();
        out.rows.iter_mut().flatten().for_each(|x| *x = 1.0 - *x);
        out.coding = match self.coding {
            FeatureCoding::Presence => FeatureCoding::Removal,
            FeatureCoding::Removal => FeatureCoding::Presence,
        };
        out
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coding(&self) -> FeatureCoding {
        self.coding
    }

    /// Columns whose value never changes; flagged at construction.
    pub fn constant_columns(&self) -> &[usize] {
        &self.constant_columns
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.rows[0].len()
    }

    /// Rows with a leading intercept column of ones.
    fn augmented(&self) -> DMatrix<f64> {
        let (n, k) = (self.n_samples(), self.n_features());
        DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { self.rows[i][j - 1] })
    }
}

/// Transcribes a perturbation run into a regression design.
pub fn build_design(run: &PerturbationRun, metric: TextMetric, mode: DesignMode) -> Result<DesignMatrix> {
    if run.samples.is_empty() {
        return Err(Error::Shape("perturbation run has no samples".into()));
    }
    let mut rows = Vec::with_capacity(run.samples.len());
    let mut targets = Vec::with_capacity(run.samples.len());
    let mut weights = Vec::with_capacity(run.samples.len());
    for s in &run.samples {
        let presence = s.mask.keep().iter().map(|&k| if k { 1.0 } else { 0.0 });
        match mode {
            DesignMode::Standard => {
                rows.push(presence.collect());
                weights.push(s.kernel_weight);
            }
            DesignMode::Literal => {
                rows.push(presence.map(|x| x * s.kernel_weight).collect());
                weights.push(1.0);
            }
        }
        targets.push(s.text_scores.target(metric));
    }
    DesignMatrix::new(rows, targets, weights)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitDiagnostics {
    /// Weighted residual sum of squares `Σ w (y - ŷ)²`.
    pub loss: f64,
    pub r2w: Option<f64>,
    pub adj_r2w: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurrogateFit {
    pub intercept: f64,
    /// One coefficient per triple, in triple-index order.
    pub coefficients: Vec<f64>,
    pub method: SurrogateMethod,
    pub diagnostics: FitDiagnostics,
    /// Surrogate predictions for the design rows.
    pub predictions: Vec<f64>,
    pub fidelity: FidelityReport,
}

impl SurrogateFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }
}

fn finish(design: &DesignMatrix, intercept: f64, coefficients: Vec<f64>, method: SurrogateMethod, iterations: usize) -> Result<SurrogateFit> {
    if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Contract("surrogate produced non-finite coefficients".into()));
    }
    let mut fit = SurrogateFit {
        intercept,
        coefficients,
        method,
        diagnostics: FitDiagnostics {
            loss: 0.0,
            r2w: None,
            adj_r2w: None,
            iterations,
        },
        predictions: Vec::new(),
        fidelity: FidelityReport {
            r2: None,
            mean_l1: 0.0,
            mean_l2: 0.0,
            weighted_l1: 0.0,
            weighted_l2: 0.0,
            r2w: None,
            adj_r2w: None,
            mean_loss_lm: 0.0,
            n_p: 0,
            n_s: 0,
        },
    };
    fit.predictions = design.rows().iter().map(|r| fit.predict(r)).collect();
    fit.fidelity = fidelity(design.targets(), &fit.predictions, design.weights(), design.n_features())?;
    fit.diagnostics.loss = design
        .targets()
        .iter()
        .zip(&fit.predictions)
        .zip(design.weights())
        .map(|((y, g), w)| w * (y - g) * (y - g))
        .sum();
    fit.diagnostics.r2w = fit.fidelity.r2w;
    fit.diagnostics.adj_r2w = fit.fidelity.adj_r2w;
    Ok(fit)
}

fn check_rows(design: &DesignMatrix) -> Result<()> {
    if design.n_samples() < 2 {
        return Err(Error::Shape("a surrogate needs at least two samples".into()));
    }
    Ok(())
}

/// Weighted least squares with an intercept.
///
/// Solves `(AᵀWA + λI) β = AᵀWy` by Cholesky with `λ = 1e-8`, then applies a
/// few steps of iterative refinement against the unjittered system so that
/// full-rank designs recover the exact least-squares solution. Weights are
/// rescaled to mean 1 first, so `λ` is relative and a common factor on all
/// weights has no effect.
pub fn fit_wls(design: &DesignMatrix) -> Result<SurrogateFit> {
    check_rows(design)?;
    let a = design.augmented();
    let mean_w = design.weights().iter().sum::<f64>() / design.n_samples() as f64;
    let w = DVector::from_iterator(design.n_samples(), design.weights().iter().map(|x| x / mean_w));
    let y = DVector::from_column_slice(design.targets());
    let wa = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * w[i]);
    let normal = a.transpose() * &wa;
    let rhs = wa.transpose() * &y;
    let p = normal.nrows();
    let jittered = &normal + DMatrix::identity(p, p) * RIDGE_JITTER;

    let solve: Box<dyn Fn(&DVector<f64>) -> Option<DVector<f64>>> =
        match jittered.clone().cholesky() {
            Some(chol) => Box::new(move |b| Some(chol.solve(b))),
            None => {
                let lu = jittered.clone().lu();
                Box::new(move |b| lu.solve(b))
            }
        };
    let singular = || Error::Contract("normal equations are singular".into());

    let mut beta = solve(&rhs).ok_or_else(singular)?;
    let mut iterations = 1;
    for _ in 0..MAX_REFINEMENTS {
        let residual = &rhs - &normal * &beta;
        let delta = solve(&residual).ok_or_else(singular)?;
        beta += &delta;
        iterations += 1;
        if delta.amax() <= f64::EPSILON * (1.0 + beta.amax()) {
            break;
        }
    }
    finish(design, beta[0], beta.iter().skip(1).copied().collect(), SurrogateMethod::Wls, iterations)
}

/// Evidence-maximizing Bayesian ridge regression on the weighted design.
///
/// Data are centered by their weighted means and rows scaled by `√w`; the
/// intercept is recovered from the means. Noise precision `α` and weight
/// precision `λ` start at `1e-6` and follow the MacKay fixed-point updates
/// (with Gamma(1e-6, 1e-6) hyperpriors) until both change by less than `1e-6`
/// relatively or 300 iterations pass.
pub fn fit_bayesian_ridge(design: &DesignMatrix) -> Result<SurrogateFit> {
    check_rows(design)?;
    let (n, k) = (design.n_samples(), design.n_features());
    let weights = design.weights();
    let total_w: f64 = weights.iter().sum();
    let x_mean: Vec<f64> = (0..k)
        .map(|j| (0..n).map(|i| weights[i] * design.rows[i][j]).sum::<f64>() / total_w)
        .collect();
    let y_mean = (0..n).map(|i| weights[i] * design.targets[i]).sum::<f64>() / total_w;

    let xc = DMatrix::from_fn(n, k, |i, j| weights[i].sqrt() * (design.rows[i][j] - x_mean[j]));
    let yc = DVector::from_fn(n, |i, _| weights[i].sqrt() * (design.targets[i] - y_mean));
    let xtx = xc.transpose() * &xc;
    let xty = xc.transpose() * &yc;
    let eigen = SymmetricEigen::new(xtx);
    let spectrum: Vec<f64> = eigen.eigenvalues.iter().map(|s| s.max(0.0)).collect();
    let projected = eigen.eigenvectors.transpose() * &xty;

    let coef_for = |alpha: f64, lambda: f64| -> DVector<f64> {
        let ratio = lambda / alpha;
        let scaled = DVector::from_fn(k, |i, _| projected[i] / (spectrum[i] + ratio));
        &eigen.eigenvectors * scaled
    };

    let (mut alpha, mut lambda) = (BAYES_INIT, BAYES_INIT);
    let mut iterations = 0;
    while iterations < BAYES_MAX_ITER {
        iterations += 1;
        let coef = coef_for(alpha, lambda);
        let sse = (&yc - &xc * &coef).norm_squared();
        let gamma: f64 = spectrum.iter().map(|s| alpha * s / (lambda + alpha * s)).sum();
        let next_lambda = (gamma + 2.0 * BAYES_HYPERPRIOR) / (coef.norm_squared() + 2.0 * BAYES_HYPERPRIOR);
        let next_alpha = (n as f64 - gamma + 2.0 * BAYES_HYPERPRIOR) / (sse + 2.0 * BAYES_HYPERPRIOR);
        let settled = ((next_alpha - alpha) / alpha).abs() < BAYES_TOL
            && ((next_lambda - lambda) / lambda).abs() < BAYES_TOL;
        alpha = next_alpha;
        lambda = next_lambda;
        if settled {
            break;
        }
    }
    let coef = coef_for(alpha, lambda);
    let intercept = y_mean - coef.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    finish(design, intercept, coef.iter().copied().collect(), SurrogateMethod::BayesianRidge, iterations)
}

pub fn fit(design: &DesignMatrix, method: SurrogateMethod) -> Result<SurrogateFit> {
    match method {
        SurrogateMethod::Wls => fit_wls(design),
        SurrogateMethod::BayesianRidge => fit_bayesian_ridge(design),
    }
}

/// Per-triple and per-node importance with display intensities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributionReport {
    pub triple_scores: Vec<f64>,
    /// Max score over each node's incident triples.
    pub node_scores: BTreeMap<String, f64>,
    /// Triple indices by descending score, ties by ascending index.
    pub ranking: Vec<usize>,
    pub edge_intensity: Vec<f64>,
    pub node_intensity: BTreeMap<String, f64>,
}

/// Min-max normalization onto [0, 1]; all-equal inputs map to 0.5.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

impl AttributionReport {
    /// The `k` highest-scoring node ids, ties broken by ascending id.
    pub fn top_nodes(&self, k: usize) -> Vec<String> {
        let mut nodes: Vec<(&String, f64)> = self.node_scores.iter().map(|(n, s)| (n, *s)).collect();
        nodes.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        nodes.into_iter().take(k).map(|(n, _)| n.clone()).collect()
    }
}

pub fn attribute(fit: &SurrogateFit, kg: &KnowledgeGraph) -> Result<AttributionReport> {
    if fit.coefficients.len() != kg.len() {
        return Err(Error::Shape(format!(
            "{} coefficients for {} triples",
            fit.coefficients.len(),
            kg.len()
        )));
    }
    let triple_scores = fit.coefficients.clone();
    let mut node_scores: BTreeMap<String, f64> = BTreeMap::new();
    for (t, &score) in kg.triples().iter().zip(&triple_scores) {
        for node in [&t.subject, &t.object] {
            node_scores
                .entry(node.to_string())
                .and_modify(|s| *s = s.max(score))
                .or_insert(score);
        }
    }
    let mut ranking: Vec<usize> = (0..triple_scores.len()).collect();
    ranking.sort_by(|&a, &b| triple_scores[b].total_cmp(&triple_scores[a]).then(a.cmp(&b)));

    let edge_intensity = min_max(&triple_scores);
    let node_values: Vec<f64> = node_scores.values().copied().collect();
    let node_intensity = node_scores
        .keys()
        .cloned()
        .zip(min_max(&node_values))
        .collect();
    Ok(AttributionReport {
        triple_scores,
        node_scores,
        ranking,
        edge_intensity,
        node_intensity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bits(n: usize, k: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..k).map(|j| (((i * 7 + j * 3) ^ (i >> 1)) % 3 != 0) as u8 as f64).collect())
            .collect()
    }

    #[test]
    fn constant_target() {
        let rows = bits(12, 4);
        let d = DesignMatrix::new(rows, vec![0.7; 12], vec![1.0; 12]).unwrap();
        let fit = fit_wls(&d).unwrap();
        assert_abs_diff_eq!(fit.intercept, 0.7, epsilon = 1e-9);
        for c in &fit.coefficients {
            assert_abs_diff_eq!(*c, 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn bayes_zero_target() {
        let d = DesignMatrix::new(bits(12, 4), vec![0.0; 12], vec![0.5; 12]).unwrap();
        let fit = fit_bayesian_ridge(&d).unwrap();
        assert_abs_diff_eq!(fit.intercept, 0.0, epsilon = 1e-9);
        for c in &fit.coefficients {
            assert_abs_diff_eq!(*c, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn constant_columns_are_flagged() {
        let mut rows = bits(6, 3);
        rows.iter_mut().for_each(|r| r[1] = 1.0);
        let d = DesignMatrix::new(rows, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![1.0; 6]).unwrap();
        assert_eq!(d.constant_columns(), &[1]);
        assert!(fit_wls(&d).is_ok());
    }

    #[test]
    fn design_validation() {
        assert!(DesignMatrix::new(vec![], vec![], vec![]).is_err());
        assert!(DesignMatrix::new(vec![vec![1.0]], vec![1.0], vec![0.0]).is_err());
        assert!(DesignMatrix::new(vec![vec![1.0], vec![1.0, 0.0]], vec![1.0; 2], vec![1.0; 2]).is_err());
        let one = DesignMatrix::new(vec![vec![1.0]], vec![1.0], vec![1.0]).unwrap();
        assert!(fit_wls(&one).is_err());
    }

    #[test]
    fn attribution_singleton_and_ties() {
        let kg = KnowledgeGraph::from_strs([("a", "r", "b")]).unwrap();
        let d = DesignMatrix::new(vec![vec![1.0], vec![0.0]], vec![1.0, 0.0], vec![1.0; 2]).unwrap();
        let fit = fit_wls(&d).unwrap();
        let report = attribute(&fit, &kg).unwrap();
        assert_eq!(report.ranking, vec![0]);
        assert_eq!(report.node_scores["a"], report.node_scores["b"]);
        assert_eq!(report.node_intensity["a"], 0.5);

        assert_eq!(min_max(&[0.2, 0.2, 0.2]), vec![0.5; 3]);
        assert_eq!(min_max(&[1.0, 3.0, 2.0]), vec![0.0, 1.0, 0.5]);

        let kg2 = KnowledgeGraph::from_strs([("a", "r", "b"), ("c", "r", "d")]).unwrap();
        assert!(matches!(attribute(&fit, &kg2), Err(Error::Shape(_))));
    }

    #[test]
    fn top_nodes_tie_break() {
        let report = AttributionReport {
            triple_scores: vec![],
            node_scores: [("b".to_string(), 1.0), ("a".to_string(), 1.0), ("c".to_string(), 2.0)]
                .into_iter()
                .collect(),
            ranking: vec![],
            edge_intensity: vec![],
            node_intensity: BTreeMap::new(),
        };
        assert_eq!(report.top_nodes(2), vec!["c", "a"]);
    }
}
