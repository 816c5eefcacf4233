use crate::error::{ensure, Error, Result};
use crate::params::ParamStore;
use crate::tensor::{Float, Tensor};

/// Adam moments for every parameter of a store.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T: Float = f32> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    step: u64,
}

impl<T: Float> AdamState<T> {
    pub fn new(params: &ParamStore<T>) -> Self {
        let zeros = || params.tensors().iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect();
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor<T>] {
        &self.v
    }
}

/// One bias-corrected Adam update of every parameter. `grads` is aligned
/// with the store; a `None` entry is an error naming the parameter.
pub fn adam_step<T: Float>(
    params: &mut ParamStore<T>,
    grads: &[Option<Tensor<T>>],
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    ensure!(
        grads.len() == params.len() && state.m.len() == params.len(),
        Contract,
        "{} gradients and {} moment sets for {} parameters",
        grads.len(),
        state.m.len(),
        params.len()
    );
    for (id, g) in params.ids().zip(grads) {
        let g = g.as_ref().ok_or_else(|| {
            Error::Contract(format!("missing gradient for parameter `{}`", params.name(id)))
        })?;
        ensure!(
            g.shape() == params.get(id).shape(),
            Contract,
            "gradient for `{}` has shape {:?}, parameter is {:?}",
            params.name(id),
            g.shape(),
            params.get(id).shape()
        );
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::of_f64(state.beta1), T::of_f64(state.beta2));
    let (one_b1, one_b2) = (T::of_f64(1.0 - state.beta1), T::of_f64(1.0 - state.beta2));
    let corr1 = T::of_f64(1.0 - state.beta1.powi(t));
    let corr2 = T::of_f64(1.0 - state.beta2.powi(t));
    let (lr, eps) = (T::of_f64(lr), T::of_f64(state.eps));

    for (i, tensor) in params.tensors_mut().iter_mut().enumerate() {
        let g = grads[i].as_ref().expect("checked above").data();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, w) in tensor.data_mut().iter_mut().enumerate() {
            m[j] = b1 * m[j] + one_b1 * g[j];
            v[j] = b2 * v[j] + one_b2 * g[j] * g[j];
            let m_hat = m[j] / corr1;
            let v_hat = v[j] / corr2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
