use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

/// An interned string. Equal symbols are equal strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(u32);

#[derive(Default)]
struct Interner {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

fn interner() -> &'static RwLock<Interner> {
    static I: OnceLock<RwLock<Interner>> = OnceLock::new();
    I.get_or_init(Default::default)
}

impl Sym {
    pub fn new(s: &str) -> Sym {
        if let Some(&id) = interner().read().expect("interner lock").ids.get(s) {
            return Sym(id);
        }
        let mut w = interner().write().expect("interner lock");
        if let Some(&id) = w.ids.get(s) {
            return Sym(id);
        }
        let id = u32::try_from(w.names.len()).expect("fewer than 2^32 symbols");
        w.names.push(s.to_string());
        w.ids.insert(s.to_string(), id);
        Sym(id)
    }

    pub fn as_string(self) -> String {
        interner().read().expect("interner lock").names[self.0 as usize].clone()
    }
}
