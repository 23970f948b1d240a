//! Named parameter storage, gradient accumulation, and initializers.
//!
//! Parameters live outside any tape in a plain [`ParamStore`] (cheap to share
//! across threads immutably); each forward pass leases the values it needs
//! onto a tape. After backward, gradients are exported into a [`GradStore`]
//! aligned with the parameter store, ready for an optimizer step.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

/// Stable handle to one registered parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// All trainable parameters of a model, keyed by unique name.
#[derive(Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
    index: HashMap<String, usize>,
}

/// Serialized form of one parameter (for checkpoints).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamExport {
    pub shape: (usize, usize),
    pub data: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    /// Register a fresh parameter. Each name may be registered exactly once;
    /// a duplicate indicates a model-construction bug and panics.
    pub fn register(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "parameter `{}` registered twice",
            name
        );
        let id = ParamId(self.values.len());
        self.index.insert(name.clone(), id.0);
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

    /// Total number of scalar entries across all parameters.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    /// Iterate parameters in registration order (deterministic).
    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Matrix)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    /// Export all parameters sorted by name (stable checkpoint layout).
    pub fn export(&self) -> BTreeMap<String, ParamExport> {
        self.iter()
            .map(|(_, name, m)| {
                (
                    name.to_string(),
                    ParamExport { shape: m.shape(), data: m.data().to_vec() },
                )
            })
            .collect()
    }

    /// Overwrite values from an export. The export must cover exactly the
    /// registered parameters with matching shapes.
    pub fn load(&mut self, export: &BTreeMap<String, ParamExport>) -> Result<(), String> {
        for (name, _) in export {
            if !self.index.contains_key(name) {
                return Err(format!("checkpoint has unknown parameter `{}`", name));
            }
        }
        for (i, name) in self.names.iter().enumerate() {
            let entry = export
                .get(name)
                .ok_or_else(|| format!("checkpoint is missing parameter `{}`", name))?;
            let current = self.values[i].shape();
            if entry.shape != current {
                return Err(format!(
                    "parameter `{}` shape mismatch: checkpoint {:?}, model {:?}",
                    name, entry.shape, current
                ));
            }
            self.values[i] = Matrix::from_vec(entry.shape.0, entry.shape.1, entry.data.clone());
        }
        Ok(())
    }
}

/// Dense gradients aligned with a [`ParamStore`].
pub struct GradStore {
    grads: Vec<Matrix>,
}

impl GradStore {
    pub fn zeros_like(store: &ParamStore) -> Self {
        GradStore {
            grads: store.values.iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect(),
        }
    }

    pub fn accumulate(&mut self, id: ParamId, g: &Matrix) {
        self.grads[id.0].add_scaled_assign(g, 1.0);
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.grads[id.0]
    }

    /// Largest absolute gradient entry (diagnostic).
    pub fn max_abs(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|m| m.data().iter())
            .fold(0.0f64, |acc, &x| acc.max(x.abs()))
    }
}

/// Xavier/Glorot uniform initialization: U(-s, s), s = sqrt(6 / (fan_in + fan_out)).
pub fn xavier_uniform(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-s..=s))
}

/// Gaussian initialization with mean 0 (used for embedding tables).
pub fn normal_init(rng: &mut impl Rng, rows: usize, cols: usize, std: f64) -> Matrix {
    let dist = Normal::new(0.0, std).expect("std must be finite and positive");
    Matrix::from_fn(rows, cols, |_, _| dist.sample(rng))
}
