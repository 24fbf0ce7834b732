//! Thread-pool executor for the core's independent-job interface.

use glotvec_core::{Executor, Serial};

/// Fans jobs out over `threads` OS threads, collecting results in index
/// order. Jobs are pure, so results are identical to [`Serial`] bit for bit;
/// `threads = 1` simply runs serially.
pub struct Threaded {
    threads: usize,
}

impl Threaded {
    pub fn new(threads: usize) -> Self {
        Threaded {
            threads: threads.max(1),
        }
    }
}

impl Executor for Threaded {
    fn map<T, F>(&self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        if self.threads == 1 || n <= 1 {
            return Serial.map(n, job);
        }
        let threads = self.threads.min(n);
        let chunk = n.div_ceil(threads);
        let job = &job;
        let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut handles = Vec::with_capacity(threads);
            for (ti, slice) in slots.chunks_mut(chunk).enumerate() {
                let lo = ti * chunk;
                handles.push(scope.spawn(move || {
                    for (off, slot) in slice.iter_mut().enumerate() {
                        *slot = Some(job(lo + off));
                    }
                }));
            }
            for h in handles {
                h.join().expect("worker panicked");
            }
        });
        slots.into_iter().map(|s| s.expect("job ran")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threaded_matches_serial_in_order() {
        let serial = Serial.map(100, |i| i * i);
        for threads in [1, 2, 3, 8] {
            let parallel = Threaded::new(threads).map(100, |i| i * i);
            assert_eq!(parallel, serial);
        }
    }

    #[test]
    fn empty_and_single_jobs() {
        assert!(Threaded::new(4).map(0, |i| i).is_empty());
        assert_eq!(Threaded::new(4).map(1, |i| i + 1), vec![1]);
    }
}
