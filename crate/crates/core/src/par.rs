//! Row-band parallelism for stencil kernels.
//!
//! Kernels write disjoint output rows while reading a shared input slice, so
//! results are bitwise identical for any band count.  Reductions stay
//! sequential (or fold per-row partials in row order) for the same reason.

/// Apply `f(row_index, row_slice)` to every `row_len`-sized chunk of `out`,
/// distributing contiguous row bands over `jobs` threads.
pub fn for_rows<T, F>(jobs: usize, out: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    assert!(row_len > 0 && out.len() % row_len == 0);
    let rows = out.len() / row_len;
    let jobs = jobs.max(1).min(rows.max(1));
    if jobs == 1 {
        for (r, chunk) in out.chunks_mut(row_len).enumerate() {
            f(r, chunk);
        }
        return;
    }
    std::thread::scope(|scope| {
        let mut rest = out;
        let mut row0 = 0usize;
        let f = &f;
        for b in 0..jobs {
            let band_rows = rows / jobs + usize::from(b < rows % jobs);
            let (band, tail) = rest.split_at_mut(band_rows * row_len);
            rest = tail;
            let start = row0;
            scope.spawn(move || {
                for (k, chunk) in band.chunks_mut(row_len).enumerate() {
                    f(start + k, chunk);
                }
            });
            row0 += band_rows;
        }
    });
}

/// Fold per-row partial results in deterministic row order.
///
/// `per_row` computes one partial per row (in parallel); the partials are
/// then summed sequentially from row 0 upward.
pub fn sum_rows<F>(jobs: usize, rows: usize, per_row: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let mut partials = vec![0.0f64; rows];
    for_rows(jobs, &mut partials, 1, |r, slot| slot[0] = per_row(r));
    partials.iter().sum()
}
