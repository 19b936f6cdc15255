use std::collections::HashMap;
use std::fmt;
use std::sync::{LazyLock, RwLock};

/// An interned variable name. Ids are assigned in first-use order and are
/// shared by every polynomial in the process.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(u32);

#[derive(Default)]
struct Table {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

static TABLE: LazyLock<RwLock<Table>> = LazyLock::new(Default::default);

pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Var {
    /// Interns `name`. Panics on names that the polynomial text format
    /// could not parse back.
    pub fn new(name: &str) -> Var {
        assert!(is_valid_name(name), "invalid variable name {name:?}");
        if let Some(&id) = TABLE.read().expect("variable table poisoned").ids.get(name) {
            return Var(id);
        }
        let mut t = TABLE.write().expect("variable table poisoned");
        if let Some(&id) = t.ids.get(name) {
            return Var(id);
        }
        let id = t.names.len() as u32;
        t.names.push(name.to_string());
        t.ids.insert(name.to_string(), id);
        Var(id)
    }

    pub fn lookup(name: &str) -> Option<Var> {
        TABLE.read().expect("variable table poisoned").ids.get(name).map(|&id| Var(id))
    }

    pub fn name(self) -> String {
        TABLE.read().expect("variable table poisoned").names[self.0 as usize].clone()
    }

    pub fn id(self) -> u32 {
        self.0
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}
