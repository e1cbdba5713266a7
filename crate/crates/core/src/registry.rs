//! Name-keyed registries of interchangeable strategies.
//!
//! Coefficient presets, truncation strategies and inequality monitors are
//! all looked up by the name used in run configs; each family keeps its own
//! [`Registry`] of boxed trait objects.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("{kind} '{name}' is already registered")]
    AlreadyRegistered { kind: &'static str, name: String },
    #[error("unknown {kind} '{name}' (known: {known})")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },
}

/// Implemented by every registrable strategy.
pub trait Named {
    fn name(&self) -> &'static str;
}

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Arc<T>>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, entry: Arc<T>) -> Result<(), RegistryError> {
        let name = entry.name();
        if self.entries.contains_key(name) {
            return Err(RegistryError::AlreadyRegistered {
                kind: self.kind,
                name: name.to_string(),
            });
        }
        self.entries.insert(name, entry);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>, RegistryError> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| RegistryError::Unknown {
                kind: self.kind,
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    /// Registered names in sorted order.
    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<T>> {
        self.entries.values()
    }
}

impl<T: ?Sized> fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("entries", &self.entries.keys().collect::<Vec<_>>())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct A;
    impl Named for A {
        fn name(&self) -> &'static str {
            "a"
        }
    }

    #[test]
    fn duplicate_and_unknown() {
        let mut r: Registry<dyn Named> = Registry::new("thing");
        r.register(Arc::new(A)).unwrap();
        assert!(matches!(
            r.register(Arc::new(A)),
            Err(RegistryError::AlreadyRegistered { .. })
        ));
        assert_eq!(r.get("a").unwrap().name(), "a");
        let err = r.get("b").err().unwrap();
        assert!(err.to_string().contains("known: a"));
    }
}
