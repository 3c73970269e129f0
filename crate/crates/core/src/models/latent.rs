use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A point in the shared latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode(Vec<f64>);

impl LatentCode {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("latent code must be non-empty"));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "latent code".into(),
                index,
            });
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Diagonal Gaussian over latent codes.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLatent {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl GaussianLatent {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(Error::shape("gaussian latent", &[mu.len()], &[sigma.len()]));
        }
        LatentCode::new(mu.clone())?;
        if let Some(index) = sigma.iter().position(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::NonFinite {
                context: "sigma (must be finite and non-negative)".into(),
                index,
            });
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn mean_sigma(&self) -> f64 {
        self.sigma.iter().sum::<f64>() / self.sigma.len() as f64
    }
}

/// `z = mu + epsilon * sigma`, elementwise.
pub fn reparameterize(g: &GaussianLatent, epsilon: &[f64]) -> Result<LatentCode> {
    if epsilon.len() != g.len() {
        return Err(Error::shape("reparameterize", &[epsilon.len()], &[g.len()]));
    }
    LatentCode::new(
        g.mu.iter()
            .zip(&g.sigma)
            .zip(epsilon)
            .map(|((&m, &s), &e)| m + e * s)
            .collect(),
    )
}

/// How noise is drawn for the reparameterized sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpsilonMode {
    /// Independent standard normal per latent dimension.
    #[default]
    PerDimension,
    /// One standard normal shared by every dimension.
    Shared,
}

pub fn sample_epsilon(k: usize, mode: EpsilonMode, rng: &mut impl Rng) -> Vec<f64> {
    match mode {
        EpsilonMode::PerDimension => (0..k).map(|_| rng.sample(StandardNormal)).collect(),
        EpsilonMode::Shared => vec![rng.sample(StandardNormal); k],
    }
}
