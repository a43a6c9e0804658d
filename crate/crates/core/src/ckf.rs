//! Cubature-Kalman-filter optimizer for the autoencoder weights.
//!
//! The weights are the state of a random-walk process model with covariance
//! `q I`; the measurement is the scalarized cross-entropy of each batch
//! element, forced towards zero with noise covariance `r I`. One filter
//! iteration is predict -> cubature points -> measurement propagation ->
//! correct. No gradients are involved anywhere, so the channel inside the
//! measurement function can be an arbitrary black box.
//!
//! The filter core (predict, cubature points, correct) is agnostic of what
//! the state vector means; only the measurement propagation interprets it as
//! autoencoder weights.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::channels::{ChannelConfig, ChannelDraw};
use crate::error::{Error, Result};
use crate::nn::{
    batch_cross_entropy, constellation_of, unflatten_slice, OneHotBatch, WeightLayout,
    WeightVector, PROB_CLIP,
};

/// Scalar process- and measurement-noise levels: `Q = q I`, `R = r I`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CkfHyperparams {
    pub q: f64,
    pub r: f64,
}

impl CkfHyperparams {
    pub fn new(q: f64, r: f64) -> Result<Self> {
        if !(q >= 0.0) {
            return Err(Error::Config(format!("process noise q must be >= 0, got {q}")));
        }
        if !(r > 0.0) {
            return Err(Error::Config(format!(
                "measurement noise r must be > 0, got {r}"
            )));
        }
        Ok(Self { q, r })
    }
}

/// Filter state: mean, covariance and the iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub struct CkfState {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub iteration: usize,
}

impl CkfState {
    /// Fresh state around `mean` with identity covariance.
    pub fn initial(mean: DVector<f64>) -> Self {
        let n = mean.len();
        Self {
            mean,
            covariance: DMatrix::identity(n, n),
            iteration: 0,
        }
    }

    pub fn from_weights(weights: &WeightVector) -> Self {
        Self::initial(DVector::from_column_slice(weights.values()))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Reinterprets the state mean as autoencoder weights.
    pub fn weights(&self, layout: WeightLayout) -> Result<WeightVector> {
        WeightVector::new(layout, self.mean.as_slice().to_vec())
    }
}

/// One training batch viewed as a measurement: one-hot inputs, target
/// indices, and the all-zero measured vector the filter drives the
/// cross-entropy towards.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBatch {
    inputs: OneHotBatch,
    measured: Vec<f64>,
}

impl MeasurementBatch {
    /// Targets equal the hot indices; the measured vector is identically zero.
    pub fn new(inputs: OneHotBatch) -> Self {
        let measured = vec![0.0; inputs.len()];
        Self { inputs, measured }
    }

    pub fn inputs(&self) -> &OneHotBatch {
        &self.inputs
    }

    pub fn targets(&self) -> &[usize] {
        self.inputs.indices()
    }

    pub fn measured(&self) -> &[f64] {
        &self.measured
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn m(&self) -> usize {
        self.inputs.m()
    }
}

/// Scalarized measurement `sqrt(-ln s^(target))` with the posterior clipped
/// at 1e-12.
pub fn scalar_measurement(posterior_row: &[f64], target: usize) -> f64 {
    scalar_measurement_from_log(posterior_row[target].max(PROB_CLIP).ln())
}

fn scalar_measurement_from_log(log_posterior: f64) -> f64 {
    (-log_posterior.max(PROB_CLIP.ln())).max(0.0).sqrt()
}

/// Prediction step: the random-walk process model leaves the mean unchanged
/// and inflates the covariance by `q I`.
pub fn predict(state: &CkfState, hp: &CkfHyperparams) -> CkfState {
    let mut covariance = state.covariance.clone();
    for i in 0..covariance.nrows() {
        covariance[(i, i)] += hp.q;
    }
    CkfState {
        mean: state.mean.clone(),
        covariance,
        iteration: state.iteration,
    }
}

/// Lower-triangular Cholesky factor of `p`, retrying with escalating diagonal
/// jitter (1e-12 to 1e-6 of the mean diagonal) before giving up.
fn cholesky_with_jitter(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    let base = p.trace() / n as f64;
    let mut jitter = 0.0;
    loop {
        let mut attempt = p.clone();
        if jitter > 0.0 {
            for i in 0..n {
                attempt[(i, i)] += jitter;
            }
        }
        if let Some(chol) = nalgebra::Cholesky::new(attempt) {
            return Ok(chol.unpack());
        }
        jitter = if jitter == 0.0 { base * 1e-12 } else { jitter * 10.0 };
        if !(jitter > 0.0) || jitter > base * 1e-6 {
            return Err(Error::NumericalBreakdown(format!(
                "covariance Cholesky failed after diagonal jitter up to {:e}",
                base * 1e-6
            )));
        }
    }
}

/// Forms the `N x 2N` cubature-point matrix `[w + eps S_i | w - eps S_i]`
/// with `eps = sqrt(N)` and `S` the lower Cholesky factor of the predicted
/// covariance.
pub fn cubature_points(state: &CkfState) -> Result<DMatrix<f64>> {
    let n = state.dim();
    let factor = cholesky_with_jitter(&state.covariance)?;
    let eps = (n as f64).sqrt();
    let mut points = DMatrix::zeros(n, 2 * n);
    for i in 0..n {
        for row in 0..n {
            let offset = eps * factor[(row, i)];
            points[(row, i)] = state.mean[row] + offset;
            points[(row, n + i)] = state.mean[row] - offset;
        }
    }
    Ok(points)
}

/// Propagates every cubature point through the autoencoder and the channel,
/// drawing one fresh noise realization shared by all points.
pub fn propagate_measurements<R: Rng + ?Sized>(
    points: &DMatrix<f64>,
    layout: WeightLayout,
    batch: &MeasurementBatch,
    channel: &ChannelConfig,
    rng: &mut R,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let draw = channel.draw(batch.len(), rng);
    propagate_measurements_with_draw(points, layout, batch, channel, &draw)
}

/// Measurement propagation against a fixed noise realization.
///
/// Column `i` holds the scalarized measurement of every batch element under
/// the weights of cubature point `i`. The same noise draw is used for all
/// columns, so columns differ only through the weights. Also returns the
/// predicted measurement (row-wise mean over the columns).
pub fn propagate_measurements_with_draw(
    points: &DMatrix<f64>,
    layout: WeightLayout,
    batch: &MeasurementBatch,
    channel: &ChannelConfig,
    draw: &ChannelDraw,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = layout.n_total();
    if points.nrows() != n {
        return Err(Error::InvalidInput(format!(
            "cubature points have {} rows, layout needs {n}",
            points.nrows()
        )));
    }
    if batch.m() != layout.m() {
        return Err(Error::InvalidInput(format!(
            "batch alphabet {} does not match layout alphabet {}",
            batch.m(),
            layout.m()
        )));
    }
    let b = batch.len();
    let num_points = points.ncols();
    let columns: Vec<Vec<f64>> = (0..num_points)
        .into_par_iter()
        .map(|i| propagate_column(points.column(i).as_slice(), layout, batch, channel, draw))
        .collect::<Result<_>>()?;

    let mut t_matrix = DMatrix::zeros(b, num_points);
    for (i, col) in columns.iter().enumerate() {
        t_matrix.column_mut(i).copy_from_slice(col);
    }
    let mut t_hat = DVector::zeros(b);
    for k in 0..b {
        t_hat[k] = t_matrix.row(k).sum() / num_points as f64;
    }
    Ok((t_matrix, t_hat))
}

fn propagate_column(
    weights: &[f64],
    layout: WeightLayout,
    batch: &MeasurementBatch,
    channel: &ChannelConfig,
    draw: &ChannelDraw,
) -> Result<Vec<f64>> {
    let (enc, dec) = unflatten_slice(layout, weights);
    let constellation = constellation_of(&enc)?;
    let xs: Vec<_> = batch
        .targets()
        .iter()
        .map(|&t| constellation.point(t))
        .collect();
    let ys = channel.apply_with_draw(&xs, &constellation, draw)?;
    let mut scratch = dec.scratch();
    Ok(ys
        .iter()
        .zip(batch.targets())
        .map(|(&y, &t)| scalar_measurement_from_log(dec.log_posterior_target(y, t, &mut scratch)))
        .collect())
}

/// Correction step: innovation and cross covariances, Kalman gain via a
/// linear solve, weight update towards the zero measurement, covariance
/// update with re-symmetrization.
pub fn correct(
    predicted: &CkfState,
    points: &DMatrix<f64>,
    t_matrix: &DMatrix<f64>,
    t_hat: &DVector<f64>,
    hp: &CkfHyperparams,
) -> Result<CkfState> {
    let n = predicted.dim();
    let num_points = points.ncols();
    let b = t_hat.len();
    if points.nrows() != n || t_matrix.ncols() != num_points || t_matrix.nrows() != b {
        return Err(Error::InvalidInput(
            "inconsistent dimensions in CKF correction".into(),
        ));
    }
    let inv_points = 1.0 / num_points as f64;

    let mut d_w = points.clone();
    for mut col in d_w.column_iter_mut() {
        col -= &predicted.mean;
    }
    let mut d_t = t_matrix.clone();
    for mut col in d_t.column_iter_mut() {
        col -= t_hat;
    }

    // P_TT = (1/2N) D_T D_T' + r I, P_WT = (1/2N) D_W D_T'.
    let mut p_tt = &d_t * d_t.transpose();
    p_tt *= inv_points;
    for i in 0..b {
        p_tt[(i, i)] += hp.r;
    }
    let mut p_wt = &d_w * d_t.transpose();
    p_wt *= inv_points;

    let chol = nalgebra::Cholesky::new(p_tt.clone()).ok_or_else(|| {
        Error::NumericalBreakdown("innovation covariance is not positive definite".into())
    })?;
    // Solve P_TT X = P_WT' so that G = X' and G P_TT G' = P_WT X.
    let x = chol.solve(&p_wt.transpose());
    let gain = x.transpose();

    let mean = &predicted.mean - &gain * t_hat;
    let mut covariance = &predicted.covariance - &p_wt * &x;
    // Re-symmetrize against drift: P <- (P + P')/2.
    let transposed = covariance.transpose();
    covariance += &transposed;
    covariance *= 0.5;

    Ok(CkfState {
        mean,
        covariance,
        iteration: predicted.iteration + 1,
    })
}

/// One full filter iteration on autoencoder weights. Returns the new state
/// and the batch mean of squared scalarized measurements at the updated
/// weights (the mean cross-entropy in nats), evaluated on the same noise
/// realization the update used.
pub fn ckf_step<R: Rng + ?Sized>(
    state: &CkfState,
    hp: &CkfHyperparams,
    layout: WeightLayout,
    batch: &MeasurementBatch,
    channel: &ChannelConfig,
    rng: &mut R,
) -> Result<(CkfState, f64)> {
    let draw = channel.draw(batch.len(), rng);
    let predicted = predict(state, hp);
    let points = cubature_points(&predicted)?;
    let (t_matrix, t_hat) =
        propagate_measurements_with_draw(&points, layout, batch, channel, &draw)?;
    let new_state = correct(&predicted, &points, &t_matrix, &t_hat, hp)?;
    let loss = batch_cross_entropy(&new_state.weights(layout)?, batch.inputs(), channel, &draw)?;
    Ok((new_state, loss))
}
