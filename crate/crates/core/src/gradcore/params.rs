use std::collections::HashMap;
use std::sync::Arc;

use super::Tensor;
use crate::Scalar;

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct ParamEntry<F> {
    pub name: String,
    /// Optimizer group, used for per-group learning rates.
    pub group: String,
    pub trainable: bool,
    value: Arc<Tensor<F>>,
}

impl<F: Scalar> ParamEntry<F> {
    pub fn value(&self) -> &Tensor<F> {
        &self.value
    }
}

/// Named parameter tensors in insertion order.
///
/// Values are reference counted so a computation graph can hold a parameter
/// without copying it; mutation goes through [`ParamStore::value_mut`], which
/// only copies when a graph still holds the old value.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<F> {
    entries: Vec<ParamEntry<F>>,
    index: HashMap<String, usize>,
}

impl<F: Scalar> ParamStore<F> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Registers a parameter. Panics on a duplicate name.
    pub fn insert(&mut self, name: &str, group: &str, trainable: bool, value: Tensor<F>) -> ParamId {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter name `{name}`"
        );
        let id = ParamId(self.entries.len());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            group: group.to_string(),
            trainable,
            value: Arc::new(value),
        });
        self.index.insert(name.to_string(), id.0);
        id
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry<F> {
        &self.entries[id.0]
    }

    pub fn entries(&self) -> impl Iterator<Item = (ParamId, &ParamEntry<F>)> {
        self.entries.iter().enumerate().map(|(i, e)| (ParamId(i), e))
    }

    pub fn value(&self, id: ParamId) -> &Tensor<F> {
        &self.entries[id.0].value
    }

    pub(crate) fn shared(&self, id: ParamId) -> Arc<Tensor<F>> {
        Arc::clone(&self.entries[id.0].value)
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        Arc::make_mut(&mut self.entries[id.0].value)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<F>> {
        self.id(name).map(|id| self.value(id))
    }

    /// Replaces a parameter value; shapes must agree.
    pub fn set(&mut self, id: ParamId, value: Tensor<F>) {
        assert_eq!(
            self.value(id).shape(),
            value.shape(),
            "shape mismatch when setting `{}`",
            self.entries[id.0].name
        );
        self.entries[id.0].value = Arc::new(value);
    }

    pub fn trainable_ids(&self) -> Vec<ParamId> {
        self.entries()
            .filter(|(_, e)| e.trainable)
            .map(|(id, _)| id)
            .collect()
    }

    /// Total number of scalar parameters.
    pub fn num_values(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// `self[p] += alpha * grads[p]` for every trainable parameter.
    pub fn add_scaled(&mut self, alpha: F, grads: &GradientMap<F>) {
        for (id, g) in grads.iter() {
            self.value_mut(id).axpy(alpha, g);
        }
    }
}

/// One gradient tensor per trainable parameter of the originating store,
/// in store order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMap<F> {
    ids: Vec<ParamId>,
    names: Arc<[String]>,
    tensors: Vec<Tensor<F>>,
}

impl<F: Scalar> GradientMap<F> {
    pub fn zeros(store: &ParamStore<F>) -> Self {
        let ids = store.trainable_ids();
        let names: Arc<[String]> = ids
            .iter()
            .map(|&id| store.entry(id).name.clone())
            .collect();
        let tensors = ids.iter().map(|&id| store.value(id).zeros_like()).collect();
        Self {
            ids,
            names,
            tensors,
        }
    }

    /// Builds a map from explicit `(name, tensor)` pairs; mostly useful in
    /// tests and for maps not tied to a live store.
    pub fn from_named(entries: Vec<(String, Tensor<F>)>) -> Self {
        let ids = (0..entries.len()).map(ParamId).collect();
        let (names, tensors): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        Self {
            ids,
            names: names.into(),
            tensors,
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor<F>)> {
        self.ids.iter().copied().zip(&self.tensors)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<F>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<F>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(move |i| &mut self.tensors[i])
    }

    pub(crate) fn slot_mut(&mut self, id: ParamId) -> Option<&mut Tensor<F>> {
        // ids are sorted ascending since they come from store order
        self.ids
            .binary_search(&id)
            .ok()
            .map(move |i| &mut self.tensors[i])
    }

    pub fn tensors(&self) -> &[Tensor<F>] {
        &self.tensors
    }

    fn assert_compatible(&self, other: &Self) {
        assert!(
            self.names == other.names,
            "gradient maps have different key sets: {:?} vs {:?}",
            self.names,
            other.names
        );
        for ((n, a), b) in self.names.iter().zip(&self.tensors).zip(&other.tensors) {
            assert_eq!(a.shape(), b.shape(), "shape mismatch for `{n}`");
        }
    }

    /// Sum over all parameters of the elementwise products.
    pub fn dot(&self, other: &Self) -> F {
        self.assert_compatible(other);
        self.tensors
            .iter()
            .zip(&other.tensors)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    pub fn norm_sq(&self) -> F {
        self.tensors.iter().map(|t| t.norm_sq()).sum()
    }

    pub fn global_norm(&self) -> F {
        self.norm_sq().sqrt()
    }

    pub fn scale(&mut self, alpha: F) {
        for t in &mut self.tensors {
            t.scale_in_place(alpha);
        }
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: F, other: &Self) {
        self.assert_compatible(other);
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.axpy(alpha, b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.is_finite())
    }
}

/// Dot product of two gradient maps over identical key sets.
pub fn grad_dot<F: Scalar>(a: &GradientMap<F>, b: &GradientMap<F>) -> F {
    a.dot(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(a: &[f64], b: &[f64]) -> GradientMap<f64> {
        GradientMap::from_named(vec![
            ("a".into(), Tensor::vector(a.to_vec())),
            ("b".into(), Tensor::vector(b.to_vec())),
        ])
    }

    #[test]
    fn dot_of_explicit_maps() {
        let x = map(&[1.0, 2.0], &[3.0]);
        let y = map(&[4.0, 5.0], &[6.0]);
        assert_eq!(grad_dot(&x, &y), 32.0);
        assert_eq!(grad_dot(&x, &x), x.norm_sq());
        assert_eq!(grad_dot(&x, &map(&[0.0, 0.0], &[0.0])), 0.0);
    }

    #[test]
    #[should_panic(expected = "different key sets")]
    fn dot_rejects_key_mismatch() {
        let x = map(&[1.0, 2.0], &[3.0]);
        let y = GradientMap::from_named(vec![
            ("a".into(), Tensor::vector(vec![1.0, 2.0])),
            ("c".into(), Tensor::vector(vec![3.0])),
        ]);
        grad_dot(&x, &y);
    }

    #[test]
    fn store_order_is_insertion_order() {
        let mut s = ParamStore::<f64>::new();
        s.insert("z", "default", true, Tensor::zeros(&[1]));
        s.insert("a", "default", false, Tensor::zeros(&[2]));
        s.insert("m", "default", true, Tensor::zeros(&[3]));
        let names: Vec<_> = s.entries().map(|(_, e)| e.name.clone()).collect();
        assert_eq!(names, ["z", "a", "m"]);
        let g = GradientMap::zeros(&s);
        assert_eq!(g.names(), ["z", "m"]);
    }
}
