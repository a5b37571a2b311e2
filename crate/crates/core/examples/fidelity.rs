// Fit both surrogates to a planted linear target and report their fit.

use kgrag_explain::metrics::fidelity;
use kgrag_explain::surrogate::{fit, DesignMatrix, SurrogateMethod};

pub fn run() -> kgrag_explain::Result<()> {
    let rows: Vec<Vec<f64>> = (0..16u32)
        .map(|i| (0..4).map(|j| f64::from((i >> j) & 1)).collect())
        .collect();
    let targets: Vec<f64> = rows.iter().map(|r| 0.2 + 0.6 * r[0] - 0.3 * r[2]).collect();
    let weights: Vec<f64> = (0..16).map(|i| 0.5 + f64::from(i) / 16.0).collect();
    let design = DesignMatrix::new(rows, targets, weights)?;

    for method in [SurrogateMethod::Wls, SurrogateMethod::BayesianRidge] {
        let f = fit(&design, method)?;
        let coefs: Vec<String> = f.coefficients.iter().map(|c| format!("{c:+.4}")).collect();
        println!("{method:?}: intercept {:+.4}, coefficients [{}]", f.intercept, coefs.join(", "));
        println!("  r2w {:?}, weighted_l2 {:.3e}", f.fidelity.r2w, f.fidelity.weighted_l2);
    }

    let report = fidelity(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0], &[1.0, 1.0, 1.0], 1)?;
    println!("hand example: r2 {:?}, mean_l1 {:.4}", report.r2, report.mean_l1);
    Ok(())
}

#[allow(dead_code)]
fn main() -> kgrag_explain::Result<()> {
    run()
}
