/// Statistics of one training epoch.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean total loss over the epoch's batches.
    pub loss: f64,
    /// Named mean loss components, in a fixed order per stage.
    pub components: Vec<(String, f64)>,
    /// Mean L2 norm of the parameter gradient per batch.
    pub grad_norm: f64,
    pub wall_secs: f64,
}

/// Equality ignores `wall_secs`, so two runs with one seed compare equal.
impl PartialEq for EpochRecord {
    fn eq(&self, other: &Self) -> bool {
        self.epoch == other.epoch
            && self.loss.to_bits() == other.loss.to_bits()
            && self.grad_norm.to_bits() == other.grad_norm.to_bits()
            && self.components.len() == other.components.len()
            && self
                .components
                .iter()
                .zip(&other.components)
                .all(|(a, b)| a.0 == b.0 && a.1.to_bits() == b.1.to_bits())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn first_loss(&self) -> Option<f64> {
        self.records.first().map(|r| r.loss)
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    pub fn component(&self, name: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| r.components.iter().find(|c| c.0 == name).map(|c| c.1))
            .collect()
    }
}
