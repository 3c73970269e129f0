use std::collections::HashMap;

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};

/// One named block of a network's state.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    /// False for batch-norm running statistics, which change only through
    /// train-mode forward passes.
    pub trainable: bool,
}

/// Ordered, named parameter blocks of one network.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<ParamEntry>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, shape: &[usize], values: Vec<f64>, trainable: bool) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(Error::invalid(format!("duplicate parameter block {name}")));
        }
        if shape.iter().product::<usize>() != values.len() {
            return Err(Error::invalid(format!("block {name}: shape {shape:?} does not hold {} values", values.len())));
        }
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
            values,
            trainable,
        });
        Ok(())
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ParamEntry> {
        self.index.get(name).map(|&i| &mut self.entries[i])
    }

    pub(crate) fn require_mut(&mut self, name: &str) -> Result<&mut ParamEntry> {
        self.get_mut(name)
            .ok_or_else(|| Error::invalid(format!("missing parameter block {name}")))
    }

    /// Number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.entries.iter().filter(|e| e.trainable).map(|e| e.values.len()).sum()
    }

    /// Trainable values concatenated in entry order.
    pub fn trainable_values(&self) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .flat_map(|e| e.values.iter().copied())
            .collect()
    }

    pub fn set_trainable_values(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.trainable_count() {
            return Err(Error::shape("set_trainable_values", &[flat.len()], &[self.trainable_count()]));
        }
        let mut off = 0;
        for e in self.entries.iter_mut().filter(|e| e.trainable) {
            let n = e.values.len();
            e.values.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Adds every trainable block to `g` as a leaf. With `track` the leaves
    /// require gradients; otherwise they are constants.
    pub fn bind(&self, g: &mut Graph<f64>, track: bool) -> Binding {
        let ids = self
            .entries
            .iter()
            .map(|e| {
                e.trainable.then(|| {
                    let t = Tensor::new(&e.shape, e.values.clone()).expect("validated on insert");
                    if track {
                        g.variable(t)
                    } else {
                        g.constant(t)
                    }
                })
            })
            .collect();
        Binding {
            ids,
            index: self.index.clone(),
        }
    }

    /// Checks that `other` has exactly the same block names, shapes and
    /// trainable flags, in any order.
    pub fn check_layout(&self, other: &ParamSet) -> Result<()> {
        for e in &self.entries {
            let o = other
                .get(&e.name)
                .ok_or_else(|| Error::invalid(format!("missing parameter block {}", e.name)))?;
            if o.shape != e.shape {
                return Err(Error::invalid(format!("block {} has shape {:?}, expected {:?}", e.name, o.shape, e.shape)));
            }
            if o.trainable != e.trainable {
                return Err(Error::invalid(format!("parameter block {} has the wrong kind", e.name)));
            }
        }
        if let Some(extra) = other.entries.iter().find(|e| self.get(&e.name).is_none()) {
            return Err(Error::invalid(format!("unexpected parameter block {}", extra.name)));
        }
        Ok(())
    }

    /// Reorders `other` into this set's entry order after a layout check.
    pub(crate) fn adopt(&self, other: ParamSet) -> Result<ParamSet> {
        self.check_layout(&other)?;
        let mut out = ParamSet::new();
        for e in &self.entries {
            let o = other.get(&e.name).expect("checked");
            out.insert(&o.name, &o.shape, o.values.clone(), o.trainable)?;
        }
        Ok(out)
    }
}

/// Graph leaves created by [`ParamSet::bind`].
#[derive(Debug, Clone)]
pub struct Binding {
    ids: Vec<Option<NodeId>>,
    index: HashMap<String, usize>,
}

impl Binding {
    pub fn node(&self, name: &str) -> Result<NodeId> {
        self.index
            .get(name)
            .and_then(|&i| self.ids[i])
            .ok_or_else(|| Error::invalid(format!("parameter block {name} is not bound")))
    }

    /// Points `name` at a different node, e.g. a leaf owned by the caller.
    pub fn rebind(&mut self, name: &str, id: NodeId) {
        if let Some(&i) = self.index.get(name) {
            self.ids[i] = Some(id);
        }
    }

    /// Gradients of all trainable blocks, concatenated like
    /// [`ParamSet::trainable_values`].
    pub fn gradient(&self, g: &Graph<f64>) -> Vec<f64> {
        self.ids.iter().flatten().flat_map(|&id| g.grad(id).iter().copied()).collect()
    }
}
