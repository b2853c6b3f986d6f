use super::{Scalar, Tensor};
use crate::error::{Error, Result};

pub trait Optimizer<T: Scalar> {
    /// Applies one update using each tensor's accumulated `grad`.
    fn step(&mut self, params: &mut [Tensor<T>], lr: T) -> Result<()>;

    /// Number of updates applied so far.
    fn steps(&self) -> usize;
}

fn check_finite<T: Scalar>(params: &[Tensor<T>], step: usize) -> Result<()> {
    if params.iter().any(|p| p.grad.iter().any(|g| !g.is_finite())) {
        return Err(Error::Diverged { step });
    }
    Ok(())
}

/// Plain gradient descent.
#[derive(Debug, Clone, Default)]
pub struct Sgd {
    t: usize,
}

impl Sgd {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<T: Scalar> Optimizer<T> for Sgd {
    fn step(&mut self, params: &mut [Tensor<T>], lr: T) -> Result<()> {
        check_finite(params, self.t + 1)?;
        self.t += 1;
        for p in params {
            for (w, &g) in p.values.iter_mut().zip(&p.grad) {
                *w = *w - lr * g;
            }
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        self.t
    }
}

/// Adaptive moment estimation with bias-corrected first and second moments.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: usize,
}

impl<T: Scalar> Default for Adam<T> {
    fn default() -> Self {
        Self::new(T::of(0.9), T::of(0.999), T::of(1e-8))
    }
}

impl<T: Scalar> Adam<T> {
    pub fn new(beta1: T, beta2: T, eps: T) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }
}

impl<T: Scalar> Optimizer<T> for Adam<T> {
    fn step(&mut self, params: &mut [Tensor<T>], lr: T) -> Result<()> {
        check_finite(params, self.t + 1)?;
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() || self.m.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len()) {
            return Err(Error::Shape("optimizer state does not match parameter shapes".into()));
        }
        self.t += 1;
        let t = self.t as i32;
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.values.len() {
                let g = p.grad[i];
                m[i] = self.beta1 * m[i] + (T::one() - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (T::one() - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p.values[i] = p.values[i] - lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        self.t
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(params: &mut [Tensor<T>], max_norm: T) -> T {
    let sq: T = params
        .iter()
        .flat_map(|p| p.grad.iter())
        .map(|&g| g * g)
        .sum();
    let norm = sq.sqrt();
    if norm > max_norm && norm.is_finite() {
        let scale = max_norm / norm;
        for p in params {
            p.grad.iter_mut().for_each(|g| *g = *g * scale);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(w: f64) -> Vec<Tensor<f64>> {
        vec![Tensor::new(vec![1], vec![w]).unwrap()]
    }

    fn quad_grad(p: &mut [Tensor<f64>]) {
        p[0].grad[0] = 2.0 * (p[0].values[0] - 3.0);
    }

    #[test]
    fn sgd_one_step_on_quadratic() {
        let mut p = scalar(0.0);
        quad_grad(&mut p);
        Sgd::new().step(&mut p, 0.1).unwrap();
        assert!((p[0].values[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        for g in [1e-3, 0.7, 42.0] {
            let mut p = scalar(1.0);
            p[0].grad[0] = g;
            Adam::default().step(&mut p, 0.01).unwrap();
            assert!((p[0].values[0] - (1.0 - 0.01)).abs() < 1e-6, "g = {g}");
        }
    }

    #[test]
    fn adam_converges_on_quadratic() {
        let mut p = scalar(0.0);
        let mut opt = Adam::default();
        for _ in 0..200 {
            quad_grad(&mut p);
            opt.step(&mut p, 0.1).unwrap();
        }
        assert!((p[0].values[0] - 3.0).abs() < 1e-2, "{}", p[0].values[0]);
        assert_eq!(Optimizer::<f64>::steps(&opt), 200);
    }

    #[test]
    fn zero_lr_is_a_no_op() {
        let mut p = vec![Tensor::new(vec![3], vec![0.3f32, -1.7, 2.5]).unwrap()];
        let before = p[0].values.clone();
        p[0].grad = vec![0.5, -0.25, 3.0];
        Adam::default().step(&mut p, 0.0).unwrap();
        assert_eq!(p[0].values, before);
    }

    #[test]
    fn non_finite_gradient_diverges() {
        let mut p = scalar(0.0);
        let mut opt = Adam::default();
        quad_grad(&mut p);
        opt.step(&mut p, 0.1).unwrap();
        p[0].grad[0] = f64::NAN;
        match opt.step(&mut p, 0.1) {
            Err(Error::Diverged { step }) => assert_eq!(step, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn clipping_caps_norm() {
        let mut p = vec![Tensor::new(vec![2], vec![0.0f64, 0.0]).unwrap()];
        p[0].grad = vec![30.0, 40.0];
        let norm = clip_global_norm(&mut p, 5.0);
        assert_eq!(norm, 50.0);
        assert!((p[0].grad[0] - 3.0).abs() < 1e-12 && (p[0].grad[1] - 4.0).abs() < 1e-12);
    }
}
