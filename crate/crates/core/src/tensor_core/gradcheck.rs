//! Central finite-difference checks of tape gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Mode, ParameterSet, Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Minimum number of coordinates compared.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            eps: 1e-3,
            samples: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
}

/// Relative error `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares analytic parameter gradients of the loss built by `build` with
/// fourth-order central differences at a sample of coordinates.
///
/// Coordinates are drawn per parameter: half from entries with a non-zero
/// analytic gradient, half uniformly, with every parameter visited at least
/// once. The builder runs on an eval-mode 64-bit tape.
pub fn grad_check<F>(params: &ParameterSet, config: &GradCheckConfig, build: F) -> Result<GradCheckReport>
where
    F: for<'p> Fn(&mut Tape<'p>, &'p ParameterSet) -> Result<Var>,
{
    let eval = |p: &ParameterSet| -> Result<f64> {
        let mut tape = Tape::new(Mode::Eval);
        let loss = build(&mut tape, p)?;
        Ok(tape.scalar(loss))
    };

    let mut tape = Tape::new(Mode::Eval);
    let loss = build(&mut tape, params)?;
    let first = tape.scalar(loss);
    let analytic = tape.backward(loss)?.parameters();
    drop(tape);

    let second = eval(params)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let names: Vec<&String> = analytic.iter().map(|(n, _)| n).collect();
    if names.is_empty() {
        return Err(Error::invalid("loss builder registered no parameters"));
    }
    let per_param = config.samples.div_ceil(names.len()).max(1);

    let mut coords: Vec<(String, usize)> = Vec::new();
    for name in &names {
        let g = analytic.get(name).expect("gradient present");
        let mut nonzero: Vec<usize> = (0..g.len()).filter(|&i| g.data()[i] != 0.0).collect();
        nonzero.shuffle(&mut rng);
        let mut all: Vec<usize> = (0..g.len()).collect();
        all.shuffle(&mut rng);
        let half = per_param.div_ceil(2);
        let mut picked: Vec<usize> = nonzero.into_iter().take(half).collect();
        for i in all {
            if picked.len() >= per_param.min(g.len()) {
                break;
            }
            if !picked.contains(&i) {
                picked.push(i);
            }
        }
        coords.extend(picked.into_iter().map(|i| ((*name).clone(), i)));
    }

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: coords.len(),
    };
    let mut perturbed = params.clone();
    for (name, i) in coords {
        let original = params.get(&name)?.data()[i];
        let mut at = |offset: f64| -> Result<f64> {
            perturbed.get_mut(&name)?.data_mut()[i] = original + offset;
            eval(&perturbed)
        };
        let h = config.eps;
        let near = at(h)? - at(-h)?;
        let far = at(2.0 * h)? - at(-2.0 * h)?;
        perturbed.get_mut(&name)?.data_mut()[i] = original;

        let numeric = (8.0 * near - far) / (12.0 * h);
        let a = analytic.get(&name).expect("gradient present").data()[i];
        let err = relative_error(a, numeric);
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = err;
            report.worst = Some((name, i));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_core::Tensor;

    #[test]
    fn linear_loss_is_exact() {
        let mut params = ParameterSet::new();
        params.insert("w", Tensor::vector((0..300).map(|i| (i as f64 * 0.37).sin()).collect()));
        let x = Tensor::vector((0..300).map(|i| (i as f64 * 0.11).cos()).collect());
        let report = grad_check(&params, &GradCheckConfig::default(), |tape, p| {
            let w = tape.param(p, "w")?;
            let xv = tape.constant(x.clone())?;
            tape.dot(w, xv)
        })
        .unwrap();
        assert!(report.coordinates >= 200);
        assert!(report.max_rel_error <= 1e-9, "{report:?}");
    }

    #[test]
    fn nondeterministic_builder_rejected() {
        use std::cell::Cell;
        let mut params = ParameterSet::new();
        params.insert("w", Tensor::vector(vec![1.0, 2.0]));
        let calls = Cell::new(0.0);
        let err = grad_check(&params, &GradCheckConfig::default(), |tape, p| {
            calls.set(calls.get() + 1.0);
            let w = tape.param(p, "w")?;
            let s = tape.sum(w)?;
            tape.affine(s, 1.0, calls.get())
        })
        .unwrap_err();
        assert!(matches!(err, Error::NonDeterministic { .. }));
    }
}
