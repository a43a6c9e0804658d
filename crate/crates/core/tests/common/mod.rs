//! Shared test oracles, independent of the library's estimator paths.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Physicists' Gauss-Hermite nodes and weights via the Golub-Welsch
/// eigenvalue method: integrates `exp(-t^2) f(t)` exactly for polynomials up
/// to degree `2n - 1`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let beta = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = beta;
        jacobi[(k, k - 1)] = beta;
    }
    let eigen = nalgebra::SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let node = eigen.eigenvalues[k];
            let v0 = eigen.eigenvectors[(0, k)];
            (node, std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Exact (to quadrature accuracy) mutual information of a uniformly used
/// constellation on the AWGN channel with noise variance `1/SNR`, in
/// bits/symbol. Direct 2-D Gauss-Hermite evaluation of the MI integral,
/// sharing no code with the library's Monte-Carlo estimators.
pub fn awgn_mi_oracle(points: &[Complex64], snr_db: f64, order: usize) -> f64 {
    let m = points.len() as f64;
    let sigma_sq = 10f64.powf(-snr_db / 10.0);
    let per_dim_std = (sigma_sq / 2.0).sqrt();
    let (nodes, weights) = gauss_hermite(order);

    let mut conditional = 0.0;
    for &x in points {
        let mut expect = 0.0;
        for (&ta, &wa) in nodes.iter().zip(&weights) {
            for (&tb, &wb) in nodes.iter().zip(&weights) {
                // n = sigma_per_dim * sqrt(2) * (ta + i tb), weight wa*wb/pi.
                let n = Complex64::new(ta, tb) * (per_dim_std * std::f64::consts::SQRT_2);
                let y = x + n;
                let base = n.norm_sqr();
                // log2 sum_x' exp(-(|y - x'|^2 - |n|^2)/sigma^2), max-subtracted.
                let exps: Vec<f64> = points
                    .iter()
                    .map(|&xp| -((y - xp).norm_sqr() - base) / sigma_sq)
                    .collect();
                let max = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + exps.iter().map(|e| (e - max).exp()).sum::<f64>().ln();
                expect += wa * wb * lse / std::f64::consts::LN_2;
            }
        }
        conditional += expect / std::f64::consts::PI;
    }
    m.log2() - conditional / m
}

/// Closed-form scalar Kalman update for measurement model `z = w + v`,
/// `v ~ N(0, r)`, against observation `z`: returns posterior (mean, var).
pub fn scalar_kalman_update(
    prior_mean: f64,
    prior_var: f64,
    process_q: f64,
    meas_r: f64,
    observation: f64,
) -> (f64, f64) {
    let p_pred = prior_var + process_q;
    let gain = p_pred / (p_pred + meas_r);
    (
        prior_mean + gain * (observation - prior_mean),
        p_pred - gain * p_pred,
    )
}
