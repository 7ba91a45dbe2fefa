//! Adam with the inverse-square-root warmup schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Mat, Parameters};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.98;
pub const ADAM_EPS: f64 = 1e-9;

/// `d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)`.
pub fn lr_at_step(step: u64, d_model: usize, warmup: u64) -> Result<f64> {
    if step == 0 {
        return Err(Error::InvalidConfig("learning-rate step must be >= 1".into()));
    }
    if warmup == 0 || d_model == 0 {
        return Err(Error::InvalidConfig("warmup and d_model must be >= 1".into()));
    }
    let s = step as f64;
    let w = warmup as f64;
    Ok((d_model as f64).powf(-0.5) * s.powf(-0.5).min(s * w.powf(-1.5)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<Mat>,
    pub v: Vec<Mat>,
}

impl OptimizerState {
    pub fn new(params: &Parameters) -> Self {
        let zeros: Vec<Mat> = params.tensors.iter().map(|t| Mat::zeros(t.rows, t.cols)).collect();
        OptimizerState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update. Parameters and moments are kept on the
/// `f32` grid afterwards. Nothing is modified when a gradient is non-finite.
pub fn adam_step(params: &mut Parameters, grads: &Parameters, state: &mut OptimizerState, lr: f64) -> Result<()> {
    if params.tensors.len() != grads.tensors.len() || params.tensors.len() != state.m.len() {
        return Err(Error::LengthMismatch {
            left: params.tensors.len(),
            right: grads.tensors.len(),
        });
    }
    for ((name, p), g) in params.names.iter().zip(&params.tensors).zip(&grads.tensors) {
        if p.shape() != g.shape() {
            return Err(Error::InvalidConfig(format!(
                "gradient shape {:?} for parameter {name} of shape {:?}",
                g.shape(),
                p.shape()
            )));
        }
        if !g.all_finite() {
            return Err(Error::NonFinite(format!("gradient of {name}")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (i, p) in params.tensors.iter_mut().enumerate() {
        let g = &grads.tensors[i];
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        for j in 0..p.data.len() {
            let gj = g.data[j];
            let mj = (BETA1 * m.data[j] + (1.0 - BETA1) * gj) as f32 as f64;
            let vj = (BETA2 * v.data[j] + (1.0 - BETA2) * gj * gj) as f32 as f64;
            m.data[j] = mj;
            v.data[j] = vj;
            let update = lr * (mj / c1) / ((vj / c2).sqrt() + ADAM_EPS);
            p.data[j] = (p.data[j] - update) as f32 as f64;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_params(v: f64) -> Parameters {
        Parameters {
            names: vec!["w".into()],
            tensors: vec![Mat::from_vec(1, 1, vec![v])],
        }
    }

    #[test]
    fn schedule_spot_values() {
        let peak = lr_at_step(4000, 512, 4000).unwrap();
        assert!((peak - 6.988e-4).abs() < 1e-7, "{peak}");
        let first = lr_at_step(1, 512, 4000).unwrap();
        let oracle = 1.0 / (512f64.sqrt() * 4000f64.powf(1.5));
        assert!((first - oracle).abs() < 1e-15);
        assert!((first - 1.747e-7).abs() < 1e-10);
        assert!(lr_at_step(0, 512, 4000).is_err());
    }

    #[test]
    fn schedule_peaks_at_warmup() {
        let at = |s| lr_at_step(s, 128, 300).unwrap();
        assert!(at(299) < at(300));
        assert!(at(301) < at(300));
        let best = (1..2000).max_by(|&a, &b| at(a).total_cmp(&at(b))).unwrap();
        assert_eq!(best, 300);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = scalar_params(0.5);
        let g = scalar_params(0.0);
        let mut s = OptimizerState::new(&p);
        for _ in 0..5 {
            adam_step(&mut p, &g, &mut s, 1e-2).unwrap();
        }
        assert_eq!(p.tensors[0].data[0], 0.5);
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        let mut p = scalar_params(0.0);
        let g = scalar_params(1.0);
        let mut s = OptimizerState::new(&p);
        adam_step(&mut p, &g, &mut s, 1e-3).unwrap();
        assert!((p.tensors[0].data[0] + 1e-3).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = scalar_params(0.0);
        let g = scalar_params(f64::NAN);
        let mut s = OptimizerState::new(&p);
        let err = adam_step(&mut p, &g, &mut s, 1e-3).unwrap_err();
        assert!(err.to_string().contains("w"));
        assert_eq!(s.step, 0);
    }
}
