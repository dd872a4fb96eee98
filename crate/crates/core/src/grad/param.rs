use crate::error::{check_len, Result};
use crate::scalar::Scalar;

/// Stable index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable array and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<F> {
    pub id: ParamId,
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<F>,
    pub grad: Vec<F>,
}

impl<F: Scalar> Parameter<F> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> F {
        self.values.iter().map(|&v| v * v).sum::<F>().sqrt()
    }
}

/// Owns every parameter of a model, in declaration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<F> {
    params: Vec<Parameter<F>>,
}

impl<F: Scalar> ParamStore<F> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, values: Vec<F>) -> Result<ParamId> {
        check_len(shape.iter().product(), values.len())?;
        let id = ParamId(self.params.len());
        let grad = vec![F::zero(); values.len()];
        self.params.push(Parameter { id, name: name.into(), shape, values, grad });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<F> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<F> {
        &mut self.params[id.0]
    }

    pub fn values(&self, id: ParamId) -> &[F] {
        &self.params[id.0].values
    }

    pub fn values_mut(&mut self, id: ParamId) -> &mut [F] {
        &mut self.params[id.0].values
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<F>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<F>> {
        self.params.iter_mut()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = F::zero());
        }
    }

    /// A detached, zeroed gradient buffer shaped like this store.
    pub fn zero_gradients(&self) -> Gradients<F> {
        Gradients { grads: self.params.iter().map(|p| vec![F::zero(); p.len()]).collect() }
    }

    /// `grad += other` for every parameter.
    pub fn accumulate(&mut self, other: &Gradients<F>) {
        for (p, g) in self.params.iter_mut().zip(&other.grads) {
            for (a, &b) in p.grad.iter_mut().zip(g) {
                *a += b;
            }
        }
    }

    pub fn total_norm(&self) -> F {
        self.params.iter().map(|p| p.values.iter().map(|&v| v * v).sum::<F>()).sum::<F>().sqrt()
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }
}

/// Gradient buffer detached from a store, so several tapes can accumulate independently.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F> {
    grads: Vec<Vec<F>>,
}

impl<F: Scalar> Gradients<F> {
    pub fn get(&self, id: ParamId) -> &[F] {
        &self.grads[id.0]
    }

    pub(crate) fn get_mut(&mut self, id: ParamId) -> &mut [F] {
        &mut self.grads[id.0]
    }

    pub fn add_assign(&mut self, other: &Gradients<F>) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: F) {
        self.grads.iter_mut().flatten().for_each(|g| *g *= s);
    }

    /// Zeroes the gradient of every parameter for which `keep` is false.
    pub fn retain(&mut self, mut keep: impl FnMut(ParamId) -> bool) {
        for (i, g) in self.grads.iter_mut().enumerate() {
            if !keep(ParamId(i)) {
                g.iter_mut().for_each(|v| *v = F::zero());
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().flatten().all(|g| g.is_finite())
    }
}
