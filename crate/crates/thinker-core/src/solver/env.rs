use crate::logical_form::Alias;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("#{index} is already bound")]
    IndexRebound { index: usize },
    #[error("alias `{alias}` is already bound")]
    AliasRebound { alias: Alias },
}

/// Write-once store connecting the two reference styles: `#n` used in step
/// text and output aliases used in actions. When sub-problem n completes,
/// both names hold the same answer text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BindingEnv {
    by_index: BTreeMap<usize, String>,
    by_alias: BTreeMap<Alias, String>,
}

impl BindingEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind_index(&mut self, index: usize, value: impl Into<String>) -> Result<(), EnvError> {
        if self.by_index.contains_key(&index) {
            return Err(EnvError::IndexRebound { index });
        }
        self.by_index.insert(index, value.into());
        Ok(())
    }

    pub fn bind_alias(&mut self, alias: &Alias, value: impl Into<String>) -> Result<(), EnvError> {
        if self.by_alias.contains_key(alias) {
            return Err(EnvError::AliasRebound { alias: alias.clone() });
        }
        self.by_alias.insert(alias.clone(), value.into());
        Ok(())
    }

    /// Binds unless the alias already holds a value; reports whether a new
    /// binding was made. Used for planner-declared display names, which lose
    /// to any earlier binding.
    pub fn bind_alias_if_absent(&mut self, alias: &Alias, value: &str) -> bool {
        if self.by_alias.contains_key(alias) {
            return false;
        }
        self.by_alias.insert(alias.clone(), value.to_owned());
        true
    }

    pub fn index(&self, index: usize) -> Option<&str> {
        self.by_index.get(&index).map(String::as_str)
    }

    pub fn alias(&self, alias: &Alias) -> Option<&str> {
        self.by_alias.get(alias).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.by_index.is_empty() && self.by_alias.is_empty()
    }
}
