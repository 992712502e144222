use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Frame descriptors keyed by payload reference.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PayloadTable {
    dim: usize,
    table: BTreeMap<String, Vec<f64>>,
}

impl PayloadTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            table: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, payload_ref: String, values: Vec<f64>) -> Result<()> {
        if values.len() != self.dim {
            return Err(Error::Validation(format!(
                "payload `{payload_ref}` has {} values, descriptor_dim is {}",
                values.len(),
                self.dim
            )));
        }
        self.table.insert(payload_ref, values);
        Ok(())
    }

    pub fn get(&self, payload_ref: &str) -> Result<&[f64]> {
        self.table
            .get(payload_ref)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Coverage(format!("payload `{payload_ref}` not loaded")))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<f64>)> {
        self.table.iter()
    }
}
