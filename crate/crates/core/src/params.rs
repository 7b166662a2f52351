//! Named parameter storage and gradient containers.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{lit, Matrix, Scalar};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Flat store of weight matrices keyed by module-qualified names
/// (`gen.nmmp.f_v.1.l0.w`). Insertion order is stable and defines checkpoint order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T: Scalar> {
    names: Vec<String>,
    values: Vec<Matrix<T>>,
    index: HashMap<String, ParamId>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { names: Vec::new(), values: Vec::new(), index: HashMap::new() }
    }

    /// Registers a parameter. Panics on duplicate names: that is a model-construction bug.
    pub fn add(&mut self, name: impl Into<String>, value: Matrix<T>) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter name {name}");
        let id = ParamId(self.values.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Matrix<T> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix<T> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.values.len()).map(ParamId)
    }

    /// Ids of every parameter whose name starts with `prefix`.
    pub fn ids_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = ParamId> + 'a {
        self.names.iter().enumerate().filter(move |(_, n)| n.starts_with(prefix)).map(|(i, _)| ParamId(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Matrix<T>)> {
        self.names.iter().zip(&self.values).enumerate().map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    /// Overwrites values from `other`, matching by name. Every tensor of `self` must be
    /// present in `other` with identical shape.
    pub fn load_from(&mut self, other: &ParamStore<T>) -> Result<()> {
        for (i, name) in self.names.iter().enumerate() {
            let src = other.id(name).ok_or_else(|| Error::MissingTensor(name.clone()))?;
            let src = other.get(src);
            if src.shape() != self.values[i].shape() {
                return Err(Error::TensorShape {
                    name: name.clone(),
                    expected: self.values[i].shape(),
                    found: src.shape(),
                });
            }
            self.values[i] = src.clone();
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            values: self.values.iter().map(Matrix::cast).collect(),
            index: self.index.clone(),
        }
    }
}

/// Uniform Glorot initialisation for a `fan_in x fan_out` weight.
pub fn glorot<T: Scalar, R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Matrix<T> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| lit::<T>(rng.random_range(-bound..bound))).collect();
    Matrix::from_vec(fan_in, fan_out, data)
}

/// Per-parameter gradients, aligned with a [`ParamStore`]. `None` means the parameter
/// did not take part in the computation.
#[derive(Clone, Debug)]
pub struct Gradients<T: Scalar> {
    grads: Vec<Option<Matrix<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn empty(n: usize) -> Self {
        Self { grads: vec![None; n] }
    }

    pub fn get(&self, id: ParamId) -> Option<&Matrix<T>> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, g: &Matrix<T>) {
        match &mut self.grads[id.0] {
            Some(acc) => acc.add_assign(g),
            slot @ None => *slot = Some(g.clone()),
        }
    }

    /// Adds another gradient set into this one.
    pub fn merge(&mut self, other: &Gradients<T>) {
        for (i, g) in other.grads.iter().enumerate() {
            if let Some(g) = g {
                self.accumulate(ParamId(i), g);
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for g in self.grads.iter_mut().flatten() {
            *g = g.scale(s);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.grads.iter().flatten().all(Matrix::all_finite)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Matrix<T>)> {
        self.grads.iter().enumerate().filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }
}
