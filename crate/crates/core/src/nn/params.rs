//! Named parameter storage with a frozen/trainable split.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{shape_err, Error, Result};
use crate::math;
use crate::tensor::Tensor;

/// Stable handle into a [`ParameterSet`]; valid only for the set that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }

    pub(crate) fn at(index: usize) -> Self {
        Self(index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub trainable: bool,
}

/// Insertion-ordered parameters with unique names.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet {
    entries: Vec<Parameter>,
    index: BTreeMap<String, usize>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor, trainable: bool) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::Contract(format!("duplicate parameter name `{name}`")));
        }
        let id = self.entries.len();
        self.index.insert(name.to_string(), id);
        self.entries.push(Parameter {
            name: name.to_string(),
            value,
            trainable,
        });
        Ok(ParamId(id))
    }

    /// Inserts a `[fan_in, fan_out]` matrix drawn from the Glorot uniform range.
    pub fn insert_glorot<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        self.insert(name, Tensor::matrix(fan_in, fan_out, data)?, true)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn entry(&self, id: ParamId) -> &Parameter {
        &self.entries[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.id(name).map(|id| &self.entries[id.0])
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id.0].trainable
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.entries[id.0].trainable = trainable;
    }

    /// Sets the trainable flag on every parameter whose name starts with `prefix`.
    pub fn set_trainable_prefix(&mut self, prefix: &str, trainable: bool) -> usize {
        let mut n = 0;
        for p in self.entries.iter_mut().filter(|p| p.name.starts_with(prefix)) {
            p.trainable = trainable;
            n += 1;
        }
        n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.entries.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total scalar count across all parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|p| p.value.len()).sum()
    }

    pub fn trainable_scalar_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.len())
            .sum()
    }

    /// Scalar count of parameters whose names start with `prefix`.
    pub fn scalar_count_prefix(&self, prefix: &str) -> usize {
        self.entries
            .iter()
            .filter(|p| p.name.starts_with(prefix))
            .map(|p| p.value.len())
            .sum()
    }

    /// Concatenation of all trainable values in insertion order.
    pub fn flatten_trainable(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.trainable_scalar_count());
        for p in self.entries.iter().filter(|p| p.trainable) {
            out.extend_from_slice(p.value.data());
        }
        out
    }

    /// Inverse of [`flatten_trainable`](Self::flatten_trainable).
    pub fn assign_trainable(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.trainable_scalar_count();
        if flat.len() != n {
            return Err(shape_err(&[n], &[flat.len()]));
        }
        let mut offset = 0;
        for p in self.entries.iter_mut().filter(|p| p.trainable) {
            let len = p.value.len();
            p.value
                .data_mut()
                .copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    /// Appends every entry of `other` under `prefix`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &ParameterSet) -> Result<()> {
        for p in &other.entries {
            self.insert(&format!("{prefix}{}", p.name), p.value.clone(), p.trainable)?;
        }
        Ok(())
    }

    /// Entries whose names start with `prefix`, with the prefix stripped.
    pub fn extract_prefixed(&self, prefix: &str) -> Result<ParameterSet> {
        let mut out = ParameterSet::new();
        for p in self.entries.iter().filter(|p| p.name.starts_with(prefix)) {
            out.insert(&p.name[prefix.len()..], p.value.clone(), p.trainable)?;
        }
        Ok(out)
    }

    /// Replaces this set with `loaded`, requiring identical names, order and shapes.
    pub fn replace_matching(&mut self, loaded: ParameterSet) -> Result<()> {
        if loaded.len() != self.len() {
            return Err(Error::Compatibility(format!(
                "expected {} parameters, found {}",
                self.len(),
                loaded.len()
            )));
        }
        for (mine, theirs) in self.entries.iter().zip(&loaded.entries) {
            if mine.name != theirs.name {
                return Err(Error::Compatibility(format!(
                    "parameter `{}` where `{}` was expected",
                    theirs.name, mine.name
                )));
            }
            if mine.value.shape() != theirs.value.shape() {
                return Err(Error::Compatibility(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    theirs.name,
                    theirs.value.shape(),
                    mine.value.shape()
                )));
            }
        }
        *self = loaded;
        Ok(())
    }
}

/// Gradient slots aligned with a [`ParameterSet`]. Frozen parameters have no slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    slots: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Zeroed slots for exactly the trainable parameters.
    pub fn for_trainable(params: &ParameterSet) -> Self {
        let slots = params
            .entries
            .iter()
            .map(|p| p.trainable.then(|| Tensor::zeros(p.value.shape())))
            .collect();
        Self { slots }
    }

    /// Empty gradient map sized for `params`.
    pub fn empty(params: &ParameterSet) -> Self {
        Self {
            slots: vec![None; params.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Adds `delta` into the slot for `id`; a missing slot (frozen parameter) is skipped.
    #[inline]
    pub fn accumulate(&mut self, id: ParamId, delta: &[f64]) {
        if let Some(slot) = &mut self.slots[id.0] {
            for (g, d) in slot.data_mut().iter_mut().zip(delta) {
                *g += d;
            }
        }
    }

    /// Mutable access to a slot, if present.
    #[inline]
    pub fn slot_mut(&mut self, id: ParamId) -> Option<&mut [f64]> {
        self.slots[id.0].as_mut().map(|t| t.data_mut())
    }

    pub fn has(&self, id: ParamId) -> bool {
        self.slots[id.0].is_some()
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.slots[id.0].as_ref()
    }

    /// Overwrites the slot for `id`, creating it if needed.
    pub fn set(&mut self, id: ParamId, value: Tensor) {
        self.slots[id.0] = Some(value);
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.slots.iter_mut().flatten() {
            for v in t.data_mut() {
                *v *= factor;
            }
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.slots.iter_mut().zip(&other.slots) {
            if let (Some(a), Some(b)) = (a, b) {
                for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                    *x += y;
                }
            }
        }
    }

    /// Concatenation of slots for trainable parameters, matching
    /// [`ParameterSet::flatten_trainable`].
    pub fn flatten_trainable(&self, params: &ParameterSet) -> Vec<f64> {
        let mut out = Vec::with_capacity(params.trainable_scalar_count());
        for (slot, p) in self.slots.iter().zip(&params.entries) {
            if !p.trainable {
                continue;
            }
            match slot {
                Some(t) => out.extend_from_slice(t.data()),
                None => out.extend(core::iter::repeat_n(0.0, p.value.len())),
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.slots.iter().flatten().all(Tensor::is_finite)
    }

    pub(crate) fn slots(&self) -> &[Option<Tensor>] {
        &self.slots
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut p = ParameterSet::new();
        p.insert("a", Tensor::zeros(&[2]), true).unwrap();
        assert!(matches!(
            p.insert("a", Tensor::zeros(&[2]), true),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn flatten_round_trip_skips_frozen() {
        let mut p = ParameterSet::new();
        p.insert("a", Tensor::vector(vec![1.0, 2.0]).unwrap(), true).unwrap();
        p.insert("b", Tensor::vector(vec![3.0]).unwrap(), false).unwrap();
        p.insert("c", Tensor::vector(vec![4.0]).unwrap(), true).unwrap();
        assert_eq!(p.flatten_trainable(), vec![1.0, 2.0, 4.0]);
        p.assign_trainable(&[5.0, 6.0, 7.0]).unwrap();
        assert_eq!(p.by_name("b").unwrap().value.data(), &[3.0]);
        assert_eq!(p.by_name("c").unwrap().value.data(), &[7.0]);
    }

    #[test]
    fn replace_matching_checks_layout() {
        let mut p = ParameterSet::new();
        p.insert("a", Tensor::zeros(&[2]), true).unwrap();
        let mut q = ParameterSet::new();
        q.insert("a", Tensor::zeros(&[3]), true).unwrap();
        assert!(matches!(p.replace_matching(q), Err(Error::Compatibility(_))));
    }

    #[test]
    fn frozen_slots_are_absent() {
        let mut p = ParameterSet::new();
        let a = p.insert("a", Tensor::zeros(&[2]), false).unwrap();
        let mut g = Gradients::for_trainable(&p);
        g.accumulate(a, &[1.0, 1.0]);
        assert!(!g.has(a));
    }
}
