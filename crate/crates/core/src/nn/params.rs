//! Named parameter storage and the Adam optimizer.
//!
//! Parameters live outside the tape. Each forward pass injects them as
//! leaves; after `backward` the tape gradients are accumulated back so
//! several sequences can share one optimizer step.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::tape::{Id, Tape};
use super::{NnError, Real};
use crate::vmft;

/// Index of a parameter inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PIdx(pub usize);

#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
    pub grad: Vec<T>,
}

#[derive(Debug, Clone, Default)]
pub struct ParamSet<T> {
    params: Vec<Param<T>>,
}

impl<T: Real> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet { params: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, idx: PIdx) -> &Param<T> {
        &self.params[idx.0]
    }

    pub fn get_mut(&mut self, idx: PIdx) -> &mut Param<T> {
        &mut self.params[idx.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, data: Vec<T>) -> PIdx {
        let name = name.into();
        assert_eq!(data.len(), rows * cols, "param {name} shape mismatch");
        assert!(self.params.iter().all(|p| p.name != name), "duplicate param {name}");
        self.params.push(Param { name, rows, cols, grad: vec![T::zero(); data.len()], data });
        PIdx(self.params.len() - 1)
    }

    /// Width-scaled uniform init over `[-a, a]` with `a = sqrt(6/(rows+cols))`.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut ChaCha20Rng,
    ) -> PIdx {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let data =
            (0..rows * cols).map(|_| T::from(rng.random_range(-a..a)).unwrap()).collect();
        self.add(name, rows, cols, data)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> PIdx {
        self.add(name, rows, cols, vec![T::zero(); rows * cols])
    }

    pub fn add_ones(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> PIdx {
        self.add(name, rows, cols, vec![T::one(); rows * cols])
    }

    pub fn add_scalar(&mut self, name: impl Into<String>, value: T) -> PIdx {
        self.add(name, 1, 1, vec![value])
    }

    /// Pushes every parameter onto a fresh tape, returning tape ids aligned
    /// with parameter indices.
    pub fn inject(&self, tape: &mut Tape<T>) -> Vec<Id> {
        self.params.iter().map(|p| tape.leaf(p.rows, p.cols, p.data.clone())).collect()
    }

    /// Accumulates tape gradients back into the parameter grads.
    pub fn accumulate_grads(&mut self, tape: &Tape<T>, ids: &[Id]) {
        assert_eq!(ids.len(), self.params.len());
        for (param, &id) in self.params.iter_mut().zip(ids) {
            if let Some(g) = tape.grad(id) {
                for (pg, &tg) in param.grad.iter_mut().zip(g) {
                    *pg += tg;
                }
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }
}

impl ParamSet<f32> {
    pub fn to_tensors(&self) -> BTreeMap<String, vmft::Tensor> {
        self.params
            .iter()
            .map(|p| {
                (
                    p.name.clone(),
                    vmft::Tensor::new(vec![p.rows as u32, p.cols as u32], p.data.clone()),
                )
            })
            .collect()
    }

    /// Restores parameter values from named tensors; names and shapes must
    /// match exactly.
    pub fn load_tensors(&mut self, tensors: &BTreeMap<String, vmft::Tensor>) -> Result<(), NnError> {
        if tensors.len() != self.params.len() {
            return Err(NnError::Checkpoint(format!(
                "expected {} tensors, found {}",
                self.params.len(),
                tensors.len()
            )));
        }
        for p in &mut self.params {
            let t = tensors
                .get(&p.name)
                .ok_or_else(|| NnError::Checkpoint(format!("missing tensor {}", p.name)))?;
            if t.dims != vec![p.rows as u32, p.cols as u32] {
                return Err(NnError::Checkpoint(format!(
                    "tensor {} has shape {:?}, expected [{}, {}]",
                    p.name, t.dims, p.rows, p.cols
                )));
            }
            p.data.copy_from_slice(&t.data);
        }
        Ok(())
    }
}

/// Adam with bias correction; no learning-rate schedule.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr: T::from(lr).unwrap(),
            beta1: T::from(0.9).unwrap(),
            beta2: T::from(0.999).unwrap(),
            eps: T::from(1e-8).unwrap(),
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ParamSet<T>) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::zero(); p.data.len()]).collect();
            self.v = params.iter().map(|p| vec![T::zero(); p.data.len()]).collect();
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        for (idx, p) in params.params.iter_mut().enumerate() {
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            for i in 0..p.data.len() {
                let g = p.grad[i];
                m[i] = self.beta1 * m[i] + (T::one() - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (T::one() - self.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p.data[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_leaves_parameters_bit_identical() {
        let mut ps: ParamSet<f32> = ParamSet::new();
        let mut rng = crate::toy::rng(0);
        let w = ps.add_uniform("w", 4, 4, &mut rng);
        let before = ps.get(w).data.clone();
        for g in ps.get_mut(w).grad.iter_mut() {
            *g = 1.5;
        }
        let mut adam = Adam::new(0.0);
        adam.step(&mut ps);
        let after = &ps.get(w).data;
        assert!(before.iter().zip(after).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn adam_descends_a_quadratic() {
        // minimize (x - 3)^2
        let mut ps: ParamSet<f64> = ParamSet::new();
        let x = ps.add_scalar("x", 0.0);
        let mut adam = Adam::new(0.1);
        for _ in 0..500 {
            let xv = ps.get(x).data[0];
            ps.get_mut(x).grad[0] = 2.0 * (xv - 3.0);
            adam.step(&mut ps);
            ps.zero_grads();
        }
        assert!((ps.get(x).data[0] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn grad_accumulation_sums_over_passes() {
        let mut ps: ParamSet<f64> = ParamSet::new();
        let w = ps.add("w", 1, 2, vec![2.0, -1.0]);
        for _ in 0..3 {
            let mut tape = Tape::new();
            let ids = ps.inject(&mut tape);
            let x = tape.leaf(1, 2, vec![1.0, 1.0]);
            let y = tape.add(ids[w.0], x);
            let sq = tape.matmul_tb(y, y); // sum of squares
            tape.backward(sq);
            ps.accumulate_grads(&tape, &ids);
        }
        // d/dw sum((w+1)^2) = 2 (w+1); accumulated three times.
        assert_eq!(ps.get(w).grad, vec![18.0, 0.0]);
    }

    #[test]
    fn tensor_round_trip_restores_values() {
        let mut rng = crate::toy::rng(1);
        let mut ps: ParamSet<f32> = ParamSet::new();
        ps.add_uniform("a", 3, 2, &mut rng);
        ps.add_uniform("b", 1, 4, &mut rng);
        let tensors = ps.to_tensors();

        let mut other: ParamSet<f32> = ParamSet::new();
        other.add_zeros("a", 3, 2);
        other.add_zeros("b", 1, 4);
        other.load_tensors(&tensors).unwrap();
        for (p, q) in ps.iter().zip(other.iter()) {
            assert_eq!(p.data, q.data);
        }
    }
}
