use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};

use super::{SatStatus, SmtError};

/// Shared result cache with at-most-once computation per key.
///
/// Only definitive results are stored; `Unknown` is recomputed on the next request.
#[derive(Debug, Default)]
pub struct SmtCache {
    entries: Mutex<HashMap<String, Arc<Mutex<Option<SatStatus>>>>>,
}

impl SmtCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the cached status for `key`, or computes it while holding the key's lock.
    /// The flag is true when the status came from the cache.
    pub fn get_or_compute(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<SatStatus, SmtError>,
    ) -> Result<(SatStatus, bool), SmtError> {
        let slot = {
            let mut map = self.entries.lock().unwrap();
            map.entry(key.to_string()).or_default().clone()
        };
        let mut guard = slot.lock().unwrap();
        if let Some(s) = *guard {
            return Ok((s, true));
        }
        let status = compute()?;
        if status != SatStatus::Unknown {
            *guard = Some(status);
        }
        Ok((status, false))
    }

    pub fn len(&self) -> usize {
        self.snapshot().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn snapshot(&self) -> BTreeMap<String, SatStatus> {
        let map = self.entries.lock().unwrap();
        map.iter()
            .filter_map(|(k, v)| v.lock().unwrap().map(|s| (k.clone(), s)))
            .collect()
    }

    /// Loads a JSON map of key hex to `"sat"`/`"unsat"`. A missing file gives an empty cache.
    pub fn load(path: &Path) -> Result<Self, SmtError> {
        if !path.exists() {
            return Ok(Self::new());
        }
        let text = std::fs::read_to_string(path).map_err(|e| SmtError::Cache(format!("{}: {e}", path.display())))?;
        let map: BTreeMap<String, SatStatus> =
            serde_json::from_str(&text).map_err(|e| SmtError::Cache(format!("{}: {e}", path.display())))?;
        let entries = map
            .into_iter()
            .filter(|(_, s)| *s != SatStatus::Unknown)
            .map(|(k, s)| (k, Arc::new(Mutex::new(Some(s)))))
            .collect();
        Ok(SmtCache {
            entries: Mutex::new(entries),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), SmtError> {
        let text = serde_json::to_string_pretty(&self.snapshot()).expect("cache serializes");
        std::fs::write(path, text + "\n").map_err(|e| SmtError::Cache(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn computes_once_and_skips_unknown() {
        let cache = SmtCache::new();
        let calls = AtomicUsize::new(0);
        let run = |s| {
            calls.fetch_add(1, Ordering::SeqCst);
            Ok(s)
        };
        assert_eq!(cache.get_or_compute("a", || run(SatStatus::Sat)).unwrap(), (SatStatus::Sat, false));
        assert_eq!(cache.get_or_compute("a", || run(SatStatus::Unsat)).unwrap(), (SatStatus::Sat, true));
        assert_eq!(cache.get_or_compute("b", || run(SatStatus::Unknown)).unwrap().0, SatStatus::Unknown);
        assert_eq!(cache.get_or_compute("b", || run(SatStatus::Unsat)).unwrap(), (SatStatus::Unsat, false));
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn persists_as_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        let cache = SmtCache::new();
        cache.get_or_compute("k1", || Ok(SatStatus::Unsat)).unwrap();
        cache.save(&path).unwrap();
        let loaded = SmtCache::load(&path).unwrap();
        assert_eq!(loaded.get_or_compute("k1", || Ok(SatStatus::Sat)).unwrap(), (SatStatus::Unsat, true));
    }
}
