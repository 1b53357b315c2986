use std::collections::HashMap;

use crate::error::{config_err, shape_err, Result};
use crate::numcore::Tensor;

/// Adam moment estimates for one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    fn new(len: usize) -> Self {
        Self {
            first: vec![0.0; len],
            second: vec![0.0; len],
            step: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub trainable: bool,
    pub adam: AdamState,
}

/// Named parameters in registration order.
///
/// Registration order is the iteration order everywhere (optimizer updates,
/// checkpoints, parameter walks), which keeps runs reproducible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(config_err(format!("parameter `{name}` registered twice")));
        }
        let adam = AdamState::new(value.len());
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param {
            name,
            value,
            trainable: true,
            adam,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.param(name)
            .map(|p| &p.value)
            .ok_or_else(|| config_err(format!("unknown parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| config_err(format!("unknown parameter `{name}`")))?;
        Ok(&mut self.params[i].value)
    }

    /// Flat data of a registered parameter. Panics on unknown names; model
    /// code only asks for names it registered itself.
    #[inline]
    pub fn data(&self, name: &str) -> &[f64] {
        match self.index.get(name) {
            Some(&i) => self.params[i].value.data(),
            None => panic!("parameter `{name}` not registered"),
        }
    }

    /// Overwrite a parameter's value, keeping its shape.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let slot = self.get_mut(name)?;
        if slot.shape() != value.shape() {
            return Err(shape_err(format!(
                "`{name}`: expected shape {:?}, got {:?}",
                slot.shape(),
                value.shape()
            )));
        }
        *slot = value;
        Ok(())
    }

    pub fn set_trainable(&mut self, name: &str, trainable: bool) -> Result<()> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| config_err(format!("unknown parameter `{name}`")))?;
        self.params[i].trainable = trainable;
        Ok(())
    }

    pub fn set_all_trainable(&mut self, trainable: bool) {
        for p in &mut self.params {
            p.trainable = trainable;
        }
    }

    /// Forget optimizer history (moments and step counts) for every parameter.
    pub fn reset_optimizer(&mut self) {
        for p in &mut self.params {
            p.adam = AdamState::new(p.value.len());
        }
    }

    /// Number of scalar values held by parameters whose name satisfies `keep`.
    pub fn count_where(&self, keep: impl Fn(&str) -> bool) -> usize {
        self.params
            .iter()
            .filter(|p| keep(&p.name))
            .map(|p| p.value.len())
            .sum()
    }
}

/// Gradient buffers aligned with a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Grads {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        let names: Vec<String> = store.names().map(str::to_owned).collect();
        let tensors = store.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Self { names, tensors, index }
    }

    /// Build from explicit named tensors (any subset of a store's parameters).
    pub fn from_named(named: Vec<(String, Tensor)>) -> Self {
        let (names, tensors): (Vec<_>, Vec<_>) = named.into_iter().unzip();
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n): (usize, &String)| (n.clone(), i))
            .collect();
        Self { names, tensors, index }
    }

    pub fn zero(&mut self) {
        for t in &mut self.tensors {
            t.fill(0.0);
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    /// Mutable flat buffer for a parameter. Panics on unknown names.
    #[inline]
    pub fn buf(&mut self, name: &str) -> &mut [f64] {
        match self.index.get(name) {
            Some(&i) => self.tensors[i].data_mut(),
            None => panic!("gradient `{name}` not registered"),
        }
    }

    /// Two distinct mutable buffers at once. Panics on unknown or equal names.
    pub fn pair_mut(&mut self, a: &str, b: &str) -> (&mut [f64], &mut [f64]) {
        let ia = *self
            .index
            .get(a)
            .unwrap_or_else(|| panic!("gradient `{a}` not registered"));
        let ib = *self
            .index
            .get(b)
            .unwrap_or_else(|| panic!("gradient `{b}` not registered"));
        assert_ne!(ia, ib, "pair_mut needs two distinct buffers");
        if ia < ib {
            let (lo, hi) = self.tensors.split_at_mut(ib);
            (lo[ia].data_mut(), hi[0].data_mut())
        } else {
            let (lo, hi) = self.tensors.split_at_mut(ia);
            (hi[0].data_mut(), lo[ib].data_mut())
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter_mut())
    }

    /// `g += coeff * θ` for every trainable parameter (L2 penalty gradient).
    pub fn add_l2(&mut self, store: &ParamStore, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        for p in store.iter().filter(|p| p.trainable) {
            if let Some(&i) = self.index.get(&p.name) {
                let g = self.tensors[i].data_mut();
                for (gi, &v) in g.iter_mut().zip(p.value.data()) {
                    *gi += coeff * v;
                }
            }
        }
    }
}
