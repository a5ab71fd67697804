//! Data-parallel building blocks with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers dispatch to rayon;
//! without it they run plain loops. Reductions always accumulate partial
//! sums over fixed-size chunks and fold them in index order, so results
//! are bit-identical regardless of thread count. `run_sequential` forces
//! the sequential path at runtime, which is what the benches use to
//! compare both paths inside one binary.

use num_complex::Complex64;
use std::cell::Cell;

/// Chunk length for deterministic reductions.
const REDUCE_CHUNK: usize = 4096;

thread_local! {
    static FORCE_SEQ: Cell<bool> = const { Cell::new(false) };
}

/// Run `f` with all parallel helpers forced onto the sequential path.
pub fn run_sequential<R>(f: impl FnOnce() -> R) -> R {
    FORCE_SEQ.with(|c| {
        let prev = c.replace(true);
        let out = f();
        c.set(prev);
        out
    })
}

#[inline]
pub fn sequential_forced() -> bool {
    FORCE_SEQ.with(|c| c.get())
}

/// Apply `f(chunk_start, chunk)` over disjoint chunks of `out`.
pub fn for_each_chunk_mut<T: Send, F>(out: &mut [T], chunk: usize, f: F)
where
    F: Fn(usize, &mut [T]) + Sync,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    {
        if !sequential_forced() {
            use rayon::prelude::*;
            out.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(ci, sl)| f(ci * chunk, sl));
            return;
        }
    }
    for (ci, sl) in out.chunks_mut(chunk).enumerate() {
        f(ci * chunk, sl);
    }
}

/// Map `0..n` to values, preserving index order.
pub fn map_indexed<T: Send, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !sequential_forced() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Deterministic sum of `f(i)` for `i in 0..n`: per-chunk partial sums are
/// computed (possibly in parallel) and folded sequentially in chunk order.
pub fn sum_complex<F>(n: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partials = map_indexed(chunks, |ci| {
        let lo = ci * REDUCE_CHUNK;
        let hi = (lo + REDUCE_CHUNK).min(n);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in lo..hi {
            acc += f(i);
        }
        acc
    });
    partials.into_iter().sum()
}

pub fn sum_real<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partials = map_indexed(chunks, |ci| {
        let lo = ci * REDUCE_CHUNK;
        let hi = (lo + REDUCE_CHUNK).min(n);
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    });
    partials.into_iter().sum()
}

/// `sum conj(x[i]) * y[i]`, deterministic order.
pub fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    debug_assert_eq!(x.len(), y.len());
    sum_complex(x.len(), |i| x[i].conj() * y[i])
}

/// Squared Euclidean norm, deterministic order.
pub fn norm_sq(x: &[Complex64]) -> f64 {
    sum_real(x.len(), |i| x[i].norm_sqr())
}

pub fn norm(x: &[Complex64]) -> f64 {
    norm_sq(x).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reductions_match_sequential_bitwise() {
        let x: Vec<Complex64> = (0..20000)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let y: Vec<Complex64> = (0..20000)
            .map(|i| Complex64::new((i as f64 * 1.3).cos(), (i as f64 * 0.2).sin()))
            .collect();
        let par = dot(&x, &y);
        let seq = run_sequential(|| dot(&x, &y));
        assert_eq!(par, seq);
        assert_eq!(norm_sq(&x), run_sequential(|| norm_sq(&x)));
    }

    #[test]
    fn chunked_map_preserves_order() {
        let mut out = vec![0usize; 1000];
        for_each_chunk_mut(&mut out, 64, |start, sl| {
            for (k, v) in sl.iter_mut().enumerate() {
                *v = start + k;
            }
        });
        assert!(out.iter().enumerate().all(|(i, &v)| i == v));
    }
}
