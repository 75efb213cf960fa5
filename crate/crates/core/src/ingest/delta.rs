use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{DocumentKey, IngestError, RawTransaction};

/// New and changed records between two extraction snapshots, keyed by
/// [`DocumentKey`]. Deletions are not represented.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaSet {
    pub new: Vec<RawTransaction>,
    /// `(before, after)` pairs that differ in at least one non-key field.
    pub changed: Vec<(RawTransaction, RawTransaction)>,
}

impl DeltaSet {
    pub fn is_empty(&self) -> bool {
        self.new.is_empty() && self.changed.is_empty()
    }

    /// Records to load, in `current` order: new records and after-images.
    pub fn records(&self) -> impl Iterator<Item = &RawTransaction> {
        self.new.iter().chain(self.changed.iter().map(|(_, after)| after))
    }
}

fn index<'a>(
    snapshot: &'a [RawTransaction],
    name: &'static str,
) -> Result<HashMap<DocumentKey, &'a RawTransaction>, IngestError> {
    let mut map = HashMap::with_capacity(snapshot.len());
    for r in snapshot {
        if map.insert(r.key(), r).is_some() {
            return Err(IngestError::KeyConflict { snapshot: name, key: r.key() });
        }
    }
    Ok(map)
}

/// Both lists follow the order of `current`.
pub fn compute_delta(
    previous: &[RawTransaction],
    current: &[RawTransaction],
) -> Result<DeltaSet, IngestError> {
    let before = index(previous, "previous")?;
    index(current, "current")?;
    let mut delta = DeltaSet::default();
    for r in current {
        match before.get(&r.key()) {
            None => delta.new.push(r.clone()),
            Some(old) if *old != r => delta.changed.push(((*old).clone(), r.clone())),
            Some(_) => {}
        }
    }
    Ok(delta)
}
