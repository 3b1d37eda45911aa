use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates with bias-correction step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// One Adam update in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
    if state.m.len() != params.len() || grad.len() != params.len() {
        return Err(Error::Length {
            what: "adam gradient",
            expected: params.len(),
            got: grad.len(),
        });
    }
    if let Some(bad) = grad.iter().find(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: "gradient".into(),
            value: *bad,
        });
    }
    state.step += 1;
    let k = state.step as i32;
    let c1 = 1.0 - BETA1.powi(k);
    let c2 = 1.0 - BETA2.powi(k);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g;
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut s = AdamState::new(3);
        let mut p = vec![1.0, 2.0, 3.0];
        adam_step(&mut s, &mut p, &[0.0; 3], 1e-3).unwrap();
        assert_eq!(p, vec![1.0, 2.0, 3.0]);

        let mut s = AdamState::new(3);
        s.m = vec![0.5, -0.2, 0.1];
        s.v = vec![1.0; 3];
        let mut p = vec![0.0; 3];
        adam_step(&mut s, &mut p, &[0.0; 3], 0.0).unwrap();
        for (a, b) in s.m.iter().zip([0.5, -0.2, 0.1]) {
            assert!((a - BETA1 * b).abs() < 1e-15);
        }
        assert!(s.v.iter().all(|&v| (v - BETA2).abs() < 1e-15));
        assert_eq!(p, vec![0.0; 3]);
    }

    #[test]
    fn first_step_oracle() {
        // m̂ = g, v̂ = g², update = lr·g/(|g| + ε)
        let g = [0.5, -2.0, 1e-3];
        let lr = 1e-3;
        let mut s = AdamState::new(3);
        let mut p = vec![0.0; 3];
        adam_step(&mut s, &mut p, &g, lr).unwrap();
        for (pi, gi) in p.iter().zip(&g) {
            let expect = -lr * gi / (gi.abs() + EPSILON);
            assert!((pi - expect).abs() < 1e-15);
            assert!((pi + lr * gi.signum()).abs() < lr * 1e-4);
        }
    }

    #[test]
    fn deterministic_and_checked() {
        let g = [0.3, -0.1];
        let run = || {
            let mut s = AdamState::new(2);
            let mut p = vec![1.0, -1.0];
            for _ in 0..5 {
                adam_step(&mut s, &mut p, &g, 1e-2).unwrap();
            }
            (s, p)
        };
        assert_eq!(run(), run());
        let mut s = AdamState::new(2);
        let mut p = vec![0.0; 2];
        assert!(adam_step(&mut s, &mut p, &[f64::NAN, 0.0], 1e-3).is_err());
        assert!(adam_step(&mut s, &mut p, &[0.0], 1e-3).is_err());
    }
}
