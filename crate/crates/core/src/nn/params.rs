//! Named parameter tensors and their gradients.
//!
//! A [`ParameterStore`] owns every trainable tensor of a model as a flat,
//! ordered list of named entries.  Registration order is the canonical
//! order: checkpoint serialization, gradient flattening, optimizer updates,
//! and finite-difference sweeps all iterate entries the same way, which is
//! one of the ingredients of bitwise-reproducible training runs.
//!
//! Gradients live outside the store in a [`ParamGrads`] value shaped like
//! it, so a forward pass can borrow the store immutably while gradients are
//! being accumulated.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::rng::DetRng;

/// Half-width of the uniform initialization interval `[-0.1, 0.1]`.
pub const INIT_RANGE: f64 = 0.1;

/// A dense row-major tensor of 1 or 2 dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    /// All-zero tensor of the given shape.
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(
            matches!(dims.len(), 1 | 2) && dims.iter().all(|&d| d > 0),
            "tensor shape must be 1-D or 2-D with positive dims, got {dims:?}"
        );
        let len = dims.iter().product();
        Tensor { dims: dims.to_vec(), data: vec![0.0; len] }
    }

    /// Tensor with entries drawn uniformly from `[-INIT_RANGE, INIT_RANGE)`.
    pub fn uniform(dims: &[usize], rng: &mut DetRng) -> Self {
        let mut t = Tensor::zeros(dims);
        for v in t.data.iter_mut() {
            *v = rng.uniform(-INIT_RANGE, INIT_RANGE);
        }
        t
    }

    /// Builds a tensor from existing data, checking the element count.
    pub fn from_data(dims: &[usize], data: Vec<f64>) -> Self {
        let expect: usize = dims.iter().product();
        assert_eq!(data.len(), expect, "tensor data length mismatch for shape {dims:?}");
        assert!(matches!(dims.len(), 1 | 2) && dims.iter().all(|&d| d > 0));
        Tensor { dims: dims.to_vec(), data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row count: 1 for vectors, `dims[0]` for matrices.
    pub fn rows(&self) -> usize {
        if self.dims.len() == 1 {
            1
        } else {
            self.dims[0]
        }
    }

    /// Column count: the full length for vectors, `dims[1]` for matrices.
    pub fn cols(&self) -> usize {
        if self.dims.len() == 1 {
            self.dims[0]
        } else {
            self.dims[1]
        }
    }

    /// Row `i` as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }
}

/// Handle to one tensor in a [`ParameterStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

struct Entry {
    name: String,
    tensor: Tensor,
}

/// Ordered collection of named parameter tensors.
#[derive(Default)]
pub struct ParameterStore {
    entries: Vec<Entry>,
}

impl ParameterStore {
    pub fn new() -> Self {
        ParameterStore { entries: Vec::new() }
    }

    /// Registers a tensor under a unique name.
    pub fn add(&mut self, name: &str, tensor: Tensor) -> ParamId {
        assert!(
            self.entries.iter().all(|e| e.name != name),
            "duplicate parameter name {name:?}"
        );
        let id = ParamId(self.entries.len());
        self.entries.push(Entry { name: String::from(name), tensor });
        id
    }

    /// Registers a uniformly initialized tensor.
    pub fn add_uniform(&mut self, name: &str, dims: &[usize], rng: &mut DetRng) -> ParamId {
        self.add(name, Tensor::uniform(dims, rng))
    }

    /// Registers an all-zero tensor.
    pub fn add_zeros(&mut self, name: &str, dims: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(dims))
    }

    /// Number of registered tensors.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar values across all tensors.
    pub fn total_values(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.len()).sum()
    }

    /// Looks a tensor up by name.
    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn data(&self, id: ParamId) -> &[f64] {
        &self.entries[id.0].tensor.data
    }

    pub fn row(&self, id: ParamId, i: usize) -> &[f64] {
        self.entries[id.0].tensor.row(i)
    }

    /// Entries in registration order.
    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (ParamId(i), e.name.as_str(), &e.tensor))
    }

    /// Overwrites one scalar value (used by finite-difference probes).
    pub fn set_value(&mut self, id: ParamId, idx: usize, v: f64) {
        self.entries[id.0].tensor.data[idx] = v;
    }

    pub fn value(&self, id: ParamId, idx: usize) -> f64 {
        self.entries[id.0].tensor.data[idx]
    }
}

impl fmt::Debug for ParameterStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("ParameterStore");
        for e in &self.entries {
            d.field(&e.name, &e.tensor.dims);
        }
        d.finish()
    }
}

/// Gradient buffers shaped like a [`ParameterStore`].
#[derive(Debug, Clone)]
pub struct ParamGrads {
    slots: Vec<Vec<f64>>,
}

impl ParamGrads {
    /// All-zero gradients matching the store's tensors.
    pub fn zeros(store: &ParameterStore) -> Self {
        ParamGrads { slots: store.entries.iter().map(|e| vec![0.0; e.tensor.len()]).collect() }
    }

    pub fn slot(&self, id: ParamId) -> &[f64] {
        &self.slots[id.0]
    }

    pub fn slot_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.slots[id.0]
    }

    /// Element-wise `self += other`.
    pub fn accumulate(&mut self, other: &ParamGrads) {
        assert_eq!(self.slots.len(), other.slots.len());
        for (a, b) in self.slots.iter_mut().zip(other.slots.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += *y;
            }
        }
    }

    /// Resets every slot to zero.
    pub fn zero(&mut self) {
        for s in self.slots.iter_mut() {
            for v in s.iter_mut() {
                *v = 0.0;
            }
        }
    }

    /// Multiplies every value by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for s in self.slots.iter_mut() {
            for v in s.iter_mut() {
                *v *= factor;
            }
        }
    }

    /// Euclidean norm over all values of all slots.
    pub fn global_norm(&self) -> f64 {
        let mut sq = 0.0;
        for s in &self.slots {
            for &v in s {
                sq += v * v;
            }
        }
        libm::sqrt(sq)
    }

    /// True when every value is finite.
    pub fn all_finite(&self) -> bool {
        self.slots.iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}
