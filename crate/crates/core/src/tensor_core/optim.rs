use std::collections::BTreeMap;

use super::{Gradients, ParameterSet, Precision, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Row-norm cap for weight matrices; `None` disables the constraint.
    pub max_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_norm: Some(2.0),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct OptimizerState {
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
    step: u64,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, name: &str) -> Option<&[f64]> {
        self.first.get(name).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    /// Parameters whose gradient contained NaN/Inf and were left untouched.
    pub skipped: Vec<String>,
}

/// One bias-corrected Adam update followed by row max-norm clipping of every
/// updated weight matrix.
pub fn adam_step(
    params: &mut ParameterSet,
    grads: &Gradients,
    state: &mut OptimizerState,
    config: &AdamConfig,
    precision: Precision,
) -> StepReport {
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - config.beta1.powf(t);
    let bc2 = 1.0 - config.beta2.powf(t);
    let mut report = StepReport::default();
    for (name, grad) in grads.iter() {
        let Ok(param) = params.get_mut(name) else {
            continue;
        };
        if !grad.is_finite() {
            log::warn!("skipping update of {name}: non-finite gradient");
            report.skipped.push(name.clone());
            continue;
        }
        let n = param.len();
        let m = state.first.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
        let v = state.second.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
        for (((p, g), m), v) in param.data_mut().iter_mut().zip(grad.data()).zip(m).zip(v) {
            *m = config.beta1 * *m + (1.0 - config.beta1) * g;
            *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= config.lr * m_hat / (v_hat.sqrt() + config.eps);
        }
        if let Some(cap) = config.max_norm {
            clip_row_norms(param, cap);
        }
        precision.round(param.data_mut());
    }
    report
}

/// Rescales each row of a matrix whose Euclidean norm exceeds `cap`.
/// Vectors are left alone.
pub fn clip_row_norms(param: &mut Tensor, cap: f64) {
    if param.rank() != 2 {
        return;
    }
    let cols = param.cols();
    for row in param.data_mut().chunks_mut(cols) {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > cap {
            let s = cap / norm;
            for x in row.iter_mut() {
                *x *= s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(name: &str, t: Tensor) -> ParameterSet {
        let mut p = ParameterSet::new();
        p.insert(name, t);
        p
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = single("w", Tensor::vector(vec![0.5, -0.25]));
        let before = params.clone();
        let mut grads = Gradients::new();
        grads.insert("w", Tensor::zeros(&[2]));
        let mut state = OptimizerState::new();
        adam_step(&mut params, &grads, &mut state, &AdamConfig::default(), Precision::F64);
        assert_eq!(params, before);
        assert_eq!(state.step(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut params = single("w", Tensor::scalar(1.0));
        let mut grads = Gradients::new();
        grads.insert("w", Tensor::scalar(1.0));
        let mut state = OptimizerState::new();
        let cfg = AdamConfig::default();
        adam_step(&mut params, &grads, &mut state, &cfg, Precision::F64);
        // m_hat = 1, v_hat = 1 after bias correction.
        let expected = 1.0 - cfg.lr * 1.0 / (1.0 + cfg.eps);
        assert!((params.get("w").unwrap().item() - expected).abs() < 1e-15);
    }

    #[test]
    fn absent_params_untouched() {
        let mut params = single("w", Tensor::scalar(1.0));
        params.insert("u", Tensor::scalar(3.0));
        let mut grads = Gradients::new();
        grads.insert("w", Tensor::scalar(1.0));
        adam_step(&mut params, &grads, &mut OptimizerState::new(), &AdamConfig::default(), Precision::F64);
        assert_eq!(params.get("u").unwrap().item(), 3.0);
    }

    #[test]
    fn non_finite_gradient_skipped() {
        let mut params = single("w", Tensor::scalar(1.0));
        let mut grads = Gradients::new();
        grads.insert("w", Tensor::new(vec![1], vec![f64::NAN]).unwrap_or(Tensor::scalar(f64::NAN)));
        let report = adam_step(&mut params, &grads, &mut OptimizerState::new(), &AdamConfig::default(), Precision::F64);
        assert_eq!(report.skipped, vec!["w".to_string()]);
        assert_eq!(params.get("w").unwrap().item(), 1.0);
    }

    #[test]
    fn row_of_norm_four_halved() {
        let mut m = Tensor::matrix(2, 2, vec![0.0, 4.0, 1.0, 0.0]).unwrap();
        clip_row_norms(&mut m, 2.0);
        assert_eq!(m.data(), &[0.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn clipping_is_idempotent() {
        let mut m = Tensor::matrix(2, 3, vec![3.0, -4.0, 1.0, 0.1, 0.2, 0.3]).unwrap();
        clip_row_norms(&mut m, 2.0);
        let once = m.clone();
        clip_row_norms(&mut m, 2.0);
        assert_eq!(m, once);
        for r in 0..2 {
            let n: f64 = m.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(n <= 2.0 + 1e-12);
        }
    }
}
