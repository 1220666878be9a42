use super::{NodeId, Shape, Tape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Shape,
    pub value: Vec<f64>,
}

/// Named parameter leaves in a fixed order.
///
/// The flat layout is the concatenation of entries in insertion order; it is
/// what optimizers and gradient checks operate on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    entries: Vec<ParamEntry>,
}

impl Params {
    pub fn new() -> Self {
        Params::default()
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Shape, value: Vec<f64>) {
        assert_eq!(shape.len(), value.len(), "parameter shape/value length");
        self.entries.push(ParamEntry {
            name: name.into(),
            shape,
            value,
        });
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn value(&self, name: &str) -> Result<&[f64]> {
        self.get(name)
            .map(|e| e.value.as_slice())
            .ok_or_else(|| Error::invalid(format!("missing parameter `{name}`")))
    }

    /// Total scalar count.
    pub fn count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|e| e.value.iter().copied())
            .collect()
    }

    /// Same layout, values taken from `flat`.
    pub fn unflatten(&self, flat: &[f64]) -> Result<Params> {
        if flat.len() != self.count() {
            return Err(Error::dims("Params::unflatten", self.count(), flat.len()));
        }
        let mut offset = 0;
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let n = e.value.len();
                let value = flat[offset..offset + n].to_vec();
                offset += n;
                ParamEntry {
                    name: e.name.clone(),
                    shape: e.shape,
                    value,
                }
            })
            .collect();
        Ok(Params { entries })
    }

    /// Registers every entry as a leaf, in order.
    pub fn register(&self, tape: &mut Tape) -> Vec<NodeId> {
        self.entries
            .iter()
            .map(|e| {
                tape.leaf(e.shape, e.value.clone())
                    .expect("entry shape matches its value")
            })
            .collect()
    }
}
