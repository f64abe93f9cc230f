use std::collections::HashMap;
use std::sync::Arc;

use super::Image;

/// Least-recently-used decoded frames under a byte budget.
pub(crate) struct DecodeCache {
    budget: usize,
    used: usize,
    tick: u64,
    entries: HashMap<usize, (Arc<Image>, u64)>,
}

impl DecodeCache {
    pub fn new(budget: usize) -> Self {
        DecodeCache {
            budget,
            used: 0,
            tick: 0,
            entries: HashMap::new(),
        }
    }

    pub fn get(&mut self, index: usize) -> Option<Arc<Image>> {
        self.tick += 1;
        let tick = self.tick;
        self.entries.get_mut(&index).map(|(img, last)| {
            *last = tick;
            Arc::clone(img)
        })
    }

    pub fn insert(&mut self, index: usize, image: Arc<Image>) {
        let size = image.byte_len();
        if size > self.budget || self.entries.contains_key(&index) {
            return;
        }
        while self.used + size > self.budget {
            let oldest = self
                .entries
                .iter()
                .min_by_key(|(_, (_, last))| *last)
                .map(|(&k, _)| k)
                .expect("over budget implies entries");
            let (evicted, _) = self.entries.remove(&oldest).expect("key present");
            self.used -= evicted.byte_len();
        }
        self.tick += 1;
        self.used += size;
        self.entries.insert(index, (image, self.tick));
    }

    #[cfg(test)]
    fn cached(&self) -> Vec<usize> {
        let mut keys: Vec<usize> = self.entries.keys().copied().collect();
        keys.sort_unstable();
        keys
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evicts_least_recent_within_budget() {
        let img = || Arc::new(Image::filled(1, 2, 0)); // 6 bytes
        let mut cache = DecodeCache::new(18);
        for i in 0..3 {
            cache.insert(i, img());
        }
        assert!(cache.get(0).is_some());
        cache.insert(3, img());
        assert_eq!(cache.cached(), vec![0, 2, 3]);
    }

    #[test]
    fn oversized_images_are_not_cached() {
        let mut cache = DecodeCache::new(4);
        cache.insert(0, Arc::new(Image::filled(1, 2, 0)));
        assert!(cache.get(0).is_none());
    }
}
