//! One-vs-rest linear classifier trained on the squared-hinge objective
//!
//! ```text
//! ½‖w_k‖² + C · Σ_i max(0, 1 − y_ik (w_k·x_i + b_k))²
//! ```
//!
//! by full-batch gradient descent with a fixed step size. Each class is
//! trained independently; the bias is not regularized.
//!
//! The descent runs on features centered at the training mean, with the bias
//! step divided by `N`. This is a linear change of variables of the same
//! objective and keeps a fixed learning rate usable for features with a
//! large common offset.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, read_matrix, write_json, write_matrix, MatrixFormat};
use crate::matrix::{FeatureMatrix, LabelVector, Matrix, ScoreMatrix};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    pub c: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Standard deviation of gaussian initial weights; 0 means zero init.
    pub init_noise: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            c: 100.0,
            epochs: 200,
            learning_rate: 1e-4,
            init_noise: 0.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidParameter(format!("C must be > 0, got {}", self.c)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.init_noise.is_finite() && self.init_noise >= 0.0) {
            return Err(Error::InvalidParameter(format!("init_noise must be >= 0, got {}", self.init_noise)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// `K × D`, one row per class.
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub hyperparams: Hyperparams,
}

impl LinearModel {
    pub fn classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn dims(&self) -> usize {
        self.weights.cols()
    }

    pub fn bit_eq(&self, other: &LinearModel) -> bool {
        self.weights.bit_eq(&other.weights)
            && self.biases.len() == other.biases.len()
            && self.biases.iter().zip(&other.biases).all(|(a, b)| a.to_bits() == b.to_bits())
            && self.hyperparams == other.hyperparams
    }
}

/// `+1` for samples of `class`, `-1` otherwise.
#[inline]
fn sign(label: usize, class: usize) -> f64 {
    if label == class {
        1.0
    } else {
        -1.0
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Objective and gradient for one class, accumulating rows in `order`.
/// `grad` receives the weight gradient followed by the bias gradient.
#[allow(clippy::too_many_arguments)]
fn objective(
    w: &[f64],
    b: f64,
    x: &FeatureMatrix,
    labels: &[usize],
    class: usize,
    c: f64,
    order: &[usize],
    grad: &mut [f64],
) -> f64 {
    let d = w.len();
    grad.fill(0.0);
    let mut hinge = 0.0;
    for &i in order {
        let xi = x.row(i);
        let y = sign(labels[i], class);
        let margin = 1.0 - y * (dot(w, xi) + b);
        if margin > 0.0 {
            hinge += margin * margin;
            let coef = -2.0 * c * y * margin;
            for (g, &v) in grad[..d].iter_mut().zip(xi) {
                *g += coef * v;
            }
            grad[d] += coef;
        }
    }
    for (g, &wj) in grad[..d].iter_mut().zip(w) {
        *g += wj;
    }
    0.5 * dot(w, w) + c * hinge
}

fn check_training_data(x: &FeatureMatrix, y: &LabelVector) -> Result<usize> {
    if x.rows() < 2 {
        return Err(Error::InsufficientSamples(format!("training needs at least 2 rows, got {}", x.rows())));
    }
    let k = y.num_classes();
    y.validate(x.rows(), k)?;
    let distinct = y.class_counts().iter().filter(|&&c| c > 0).count();
    if distinct < 2 {
        return Err(Error::InsufficientSamples("training labels contain a single class".into()));
    }
    Ok(k)
}

/// Row order that depends only on row contents, so shuffling the training
/// set cannot change the floating-point accumulation order.
fn canonical_order(x: &FeatureMatrix, labels: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.rows()).collect();
    order.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b))
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(labels[a].cmp(&labels[b]))
    });
    order
}

/// Squared-hinge objective of class `class` under `model`, and its gradient
/// (`D` weight entries followed by the bias entry).
pub fn loss_and_gradient(model: &LinearModel, x: &FeatureMatrix, y: &LabelVector, class: usize) -> Result<(f64, Vec<f64>)> {
    if x.cols() != model.dims() {
        return Err(Error::DimensionMismatch(format!("model has {} dims, data has {}", model.dims(), x.cols())));
    }
    if class >= model.classes() {
        return Err(Error::DimensionMismatch(format!("class {class} not in model with {} classes", model.classes())));
    }
    y.validate(x.rows(), usize::MAX)?;
    let order: Vec<usize> = (0..x.rows()).collect();
    let mut grad = vec![0.0; x.cols() + 1];
    let loss = objective(
        model.weights.row(class),
        model.biases[class],
        x,
        y.as_slice(),
        class,
        model.hyperparams.c,
        &order,
        &mut grad,
    );
    Ok((loss, grad))
}

/// Trains `K = max label + 1` binary classifiers. `rng_seed` only matters
/// when `init_noise > 0`.
pub fn train_ovr_linear(x: &FeatureMatrix, y: &LabelVector, h: &Hyperparams, rng_seed: u64) -> Result<LinearModel> {
    h.validate()?;
    let k = check_training_data(x, y)?;
    let d = x.cols();
    let labels = y.as_slice();
    let order = canonical_order(x, labels);

    // Descent runs on centered features with the bias step scaled by 1/N.
    // Both are changes of variables (the bias is unregularized), so the
    // objective is unchanged; they only remove the ill-conditioning caused
    // by a large common offset, as rank features have.
    let n = x.rows();
    let mut mean = vec![0.0; d];
    for &i in &order {
        for (m, &v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = x.map_rows(|row, out| {
        for ((o, &v), &m) in out.iter_mut().zip(row).zip(&mean) {
            *o = v - m;
        }
    });
    let bias_step = h.learning_rate / n as f64;

    let per_class: Vec<Result<(Vec<f64>, f64)>> = par::map_range(k, |class| {
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        if h.init_noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(class as u64);
            let normal = Normal::new(0.0, h.init_noise).expect("validated noise");
            w.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
        }
        let mut grad = vec![0.0; d + 1];
        for epoch in 0..h.epochs {
            let loss = objective(&w, b, &centered, labels, class, h.c, &order, &mut grad);
            if !loss.is_finite() {
                return Err(Error::Diverged { class, epoch });
            }
            for (wj, g) in w.iter_mut().zip(&grad[..d]) {
                *wj -= h.learning_rate * g;
            }
            b -= bias_step * grad[d];
        }
        // Back to the original coordinates: w·(x − μ) + b = w·x + (b − w·μ).
        let b = b - dot(&w, &mean);
        if !(b.is_finite() && w.iter().all(|v| v.is_finite())) {
            return Err(Error::Diverged { class, epoch: h.epochs });
        }
        Ok((w, b))
    });

    let mut weights = Vec::with_capacity(k * d);
    let mut biases = Vec::with_capacity(k);
    for r in per_class {
        let (w, b) = r?;
        weights.extend(w);
        biases.push(b);
    }
    Ok(LinearModel {
        weights: Matrix::new(k, d, weights)?,
        biases,
        hyperparams: *h,
    })
}

/// Full-batch objective of every class, summed; used to monitor training.
pub fn total_objective(model: &LinearModel, x: &FeatureMatrix, y: &LabelVector) -> Result<f64> {
    (0..model.classes())
        .map(|k| loss_and_gradient(model, x, y, k).map(|(l, _)| l))
        .sum()
}

/// `score(i, k) = w_k · x_i + b_k`.
pub fn predict_scores(model: &LinearModel, x: &FeatureMatrix) -> Result<ScoreMatrix> {
    if x.cols() != model.dims() {
        return Err(Error::DimensionMismatch(format!("model has {} dims, data has {}", model.dims(), x.cols())));
    }
    let k = model.classes();
    let mut out = vec![0.0; x.rows() * k];
    par::for_each_chunk_mut(&mut out, k, |i, row| {
        let xi = x.row(i);
        for (c, s) in row.iter_mut().enumerate() {
            *s = dot(model.weights.row(c), xi) + model.biases[c];
        }
    });
    Matrix::from_computed(x.rows(), k, out)
}

/// JSON stored next to the binary weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSidecar {
    pub classes: usize,
    pub dims: usize,
    pub biases: Vec<f64>,
    pub hyperparams: Hyperparams,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

/// Writes the `K × D` weights at `path` and biases plus hyperparameters at `<path>.json`.
pub fn write_model(model: &LinearModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_matrix(&model.weights, path, MatrixFormat::Binary)?;
    let side = ModelSidecar {
        classes: model.classes(),
        dims: model.dims(),
        biases: model.biases.clone(),
        hyperparams: model.hyperparams,
    };
    write_json(&side, sidecar_path(path))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<LinearModel> {
    let path = path.as_ref();
    let weights = read_matrix(path, MatrixFormat::Binary)?;
    let side_path = sidecar_path(path);
    let side: ModelSidecar = read_json(&side_path)?;
    if side.classes != weights.rows() || side.dims != weights.cols() || side.biases.len() != side.classes {
        return Err(Error::Format {
            path: side_path,
            format: "model sidecar",
            location: "classes/dims/biases".into(),
            reason: format!(
                "sidecar declares {}x{} with {} biases, weights are {}x{}",
                side.classes,
                side.dims,
                side.biases.len(),
                weights.rows(),
                weights.cols()
            ),
        });
    }
    if side.biases.iter().any(|b| !b.is_finite()) {
        return Err(Error::Format {
            path: side_path,
            format: "model sidecar",
            location: "biases".into(),
            reason: "non-finite bias".into(),
        });
    }
    Ok(LinearModel {
        weights,
        biases: side.biases,
        hyperparams: side.hyperparams,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(w: &[&[f64]], b: &[f64], c: f64) -> LinearModel {
        LinearModel {
            weights: Matrix::from_rows(w).unwrap(),
            biases: b.to_vec(),
            hyperparams: Hyperparams { c, ..Hyperparams::default() },
        }
    }

    #[test]
    fn zero_epochs_gives_zero_model() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let y = LabelVector::new(vec![0, 1, 2]);
        let h = Hyperparams { epochs: 0, ..Hyperparams::default() };
        let m = train_ovr_linear(&x, &y, &h, 1).unwrap();
        assert!(m.weights.as_slice().iter().all(|&v| v == 0.0));
        assert!(m.biases.iter().all(|&v| v == 0.0));
        assert!(predict_scores(&m, &x).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn predict_examples() {
        let m = model(&[&[1.0, 0.0]], &[0.0], 1.0);
        let x = Matrix::from_rows(&[[2.0, 5.0]]).unwrap();
        assert_eq!(predict_scores(&m, &x).unwrap().as_slice(), &[2.0]);
        let x2 = x.scale(2.0).unwrap();
        assert_eq!(predict_scores(&m, &x2).unwrap().as_slice(), &[4.0]);
        let wide = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        assert!(predict_scores(&m, &wide).is_err());
    }

    #[test]
    fn loss_beyond_margin_is_regularizer_only() {
        let m = model(&[&[2.0, 0.0], &[-2.0, 0.0]], &[0.0, 0.0], 5.0);
        let x = Matrix::from_rows(&[[1.0, 0.3], [-1.0, 0.1]]).unwrap();
        let y = LabelVector::new(vec![0, 1]);
        let (loss, grad) = loss_and_gradient(&m, &x, &y, 0).unwrap();
        assert_eq!(loss, 2.0);
        assert_eq!(grad, vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn loss_at_origin_single_positive() {
        let m = model(&[&[0.0], &[0.0]], &[0.0, 0.0], 1.0);
        let x = Matrix::from_rows(&[[1.0]]).unwrap();
        let y = LabelVector::new(vec![0]);
        let (loss, grad) = loss_and_gradient(&m, &x, &y, 0).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grad, vec![-2.0, -2.0]);
    }

    #[test]
    fn rejects_bad_training_input() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let h = Hyperparams::default();
        assert!(matches!(
            train_ovr_linear(&x, &LabelVector::new(vec![1, 1]), &h, 0),
            Err(Error::InsufficientSamples(_))
        ));
        let one = Matrix::from_rows(&[[1.0]]).unwrap();
        assert!(train_ovr_linear(&one, &LabelVector::new(vec![0]), &h, 0).is_err());
        assert!(train_ovr_linear(&x, &LabelVector::new(vec![0]), &h, 0).is_err());
        let bad = Hyperparams { learning_rate: 0.0, ..h };
        assert!(train_ovr_linear(&x, &LabelVector::new(vec![0, 1]), &bad, 0).is_err());
    }

    #[test]
    fn divergence_reports_epoch() {
        let x = Matrix::from_rows(&[[100.0], [-100.0]]).unwrap();
        let y = LabelVector::new(vec![0, 1]);
        let h = Hyperparams { learning_rate: 10.0, epochs: 1000, ..Hyperparams::default() };
        match train_ovr_linear(&x, &y, &h, 0) {
            Err(Error::Diverged { epoch, .. }) => assert!(epoch > 0 && epoch < 1000),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn init_noise_depends_on_seed() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let y = LabelVector::new(vec![0, 1]);
        let h = Hyperparams { epochs: 0, init_noise: 0.1, ..Hyperparams::default() };
        let a = train_ovr_linear(&x, &y, &h, 1).unwrap();
        let b = train_ovr_linear(&x, &y, &h, 1).unwrap();
        let c = train_ovr_linear(&x, &y, &h, 2).unwrap();
        assert!(a.bit_eq(&b));
        assert!(!a.bit_eq(&c));
        assert_ne!(a.weights.row(0), a.weights.row(1));
    }

    #[test]
    fn model_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = model(&[&[1.0, -0.5], &[0.25, 3.0]], &[0.1, -0.2], 100.0);
        let p = dir.path().join("model.bin");
        write_model(&m, &p).unwrap();
        assert!(read_model(&p).unwrap().bit_eq(&m));
    }
}
