//! Demand datasets, exact-solver labels and evaluation reports.

mod dataset;
mod eval;
mod labels;

pub use dataset::{
    base_load_shape, generate_dataset, split_indices, Dataset, DatasetManifest, DatasetSpec,
};
pub use eval::{evaluate, write_reports, EvalReport, HourlyCost, REPORT_HOURS};
pub use labels::{label_dataset, label_scenario, read_labels, write_labels, Label};

/// Map `f` over `items` on up to `jobs` threads, preserving order.
pub fn parallel_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                let f = &f;
                scope.spawn(move || {
                    part.iter()
                        .enumerate()
                        .map(|(i, t)| f(c * chunk + i, t))
                        .collect::<Vec<R>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests;
