use std::collections::BTreeMap;

use crate::packet::Name;

use super::FaceId;

/// One route: a name prefix and its ordered next hops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FibEntry {
    pub prefix: Name,
    pub next_hops: Vec<FaceId>,
}

/// Forwarding Information Base keyed by exact prefix.
#[derive(Debug, Default, Clone)]
pub struct Fib {
    entries: BTreeMap<Name, Vec<FaceId>>,
}

impl Fib {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `face` to the prefix's next hops unless it is already there.
    pub fn add(&mut self, prefix: Name, face: FaceId) {
        let hops = self.entries.entry(prefix).or_default();
        if !hops.contains(&face) {
            hops.push(face);
        }
    }

    /// Like [`Fib::add`] but puts `face` ahead of existing next hops.
    pub(crate) fn add_first(&mut self, prefix: Name, face: FaceId) {
        let hops = self.entries.entry(prefix).or_default();
        hops.retain(|&f| f != face);
        hops.insert(0, face);
    }

    pub fn remove_face(&mut self, face: FaceId) {
        for hops in self.entries.values_mut() {
            hops.retain(|&f| f != face);
        }
        self.entries.retain(|_, hops| !hops.is_empty());
    }

    pub fn get(&self, prefix: &Name) -> Option<&[FaceId]> {
        self.entries.get(prefix).map(Vec::as_slice)
    }

    /// The entry sharing the most leading components with `name`.
    pub fn longest_prefix(&self, name: &Name) -> Option<(&Name, &[FaceId])> {
        let components = name.components();
        (1..=components.len()).rev().find_map(|len| {
            let prefix = Name::from_components(components[..len].iter().cloned()).ok()?;
            self.entries
                .get_key_value(&prefix)
                .map(|(k, v)| (k, v.as_slice()))
        })
    }

    pub fn entries(&self) -> impl Iterator<Item = FibEntry> + '_ {
        self.entries.iter().map(|(prefix, hops)| FibEntry {
            prefix: prefix.clone(),
            next_hops: hops.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        Name::parse(s).unwrap()
    }

    #[test]
    fn longest_prefix_wins() {
        let mut fib = Fib::new();
        fib.add(n("/trailer"), FaceId(1));
        fib.add(n("/trailer/can"), FaceId(2));
        let (prefix, hops) = fib.longest_prefix(&n("/trailer/can/raw")).unwrap();
        assert_eq!(prefix, &n("/trailer/can"));
        assert_eq!(hops, &[FaceId(2)]);
        assert_eq!(fib.longest_prefix(&n("/trailer/cam")).unwrap().1, &[FaceId(1)]);
        assert!(fib.longest_prefix(&n("/other")).is_none());
    }

    #[test]
    fn exact_single_entry() {
        let mut fib = Fib::new();
        fib.add(n("/x"), FaceId(1));
        assert_eq!(fib.longest_prefix(&n("/x")).unwrap().1, &[FaceId(1)]);
        assert!(fib.longest_prefix(&n("/y")).is_none());
    }

    #[test]
    fn add_is_idempotent() {
        let mut fib = Fib::new();
        fib.add(n("/trailer/lidar"), FaceId(1));
        fib.add(n("/trailer/lidar"), FaceId(1));
        fib.add(n("/trailer/lidar"), FaceId(3));
        assert_eq!(fib.get(&n("/trailer/lidar")).unwrap(), &[FaceId(1), FaceId(3)]);
        fib.remove_face(FaceId(1));
        fib.remove_face(FaceId(3));
        assert!(fib.is_empty());
    }
}
