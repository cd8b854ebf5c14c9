//! Streaming moment accumulation for Monte Carlo estimators.
//!
//! Means and standard errors are tracked with Welford's update, separately
//! for real and imaginary parts. Parallel reduction follows a fixed
//! contract: samples are split into chunks of a constant size, each chunk is
//! accumulated sequentially in sample order, and the per-chunk accumulators
//! are merged left-to-right in chunk order. The result is therefore
//! bit-identical no matter how many worker threads execute the chunks.

use num_complex::Complex64;
use rayon::prelude::*;

/// Fixed chunk length of the parallel reduction contract.
pub(crate) const CHUNK: u64 = 256;

/// Streaming mean/variance of a complex scalar.
#[derive(Clone, Debug)]
pub(crate) struct ScalarWelford {
    count: u64,
    mean: Complex64,
    m2_re: f64,
    m2_im: f64,
}

impl ScalarWelford {
    pub fn new() -> Self {
        Self {
            count: 0,
            mean: Complex64::new(0.0, 0.0),
            m2_re: 0.0,
            m2_im: 0.0,
        }
    }

    pub fn push(&mut self, z: Complex64) {
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        let d = z - self.mean;
        self.mean += d * inv;
        let d2 = z - self.mean;
        self.m2_re += d.re * d2.re;
        self.m2_im += d.im * d2.im;
    }

    pub fn merge(mut self, other: Self) -> Self {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let d = other.mean - self.mean;
        self.mean += d * (nb / n);
        self.m2_re += other.m2_re + d.re * d.re * na * nb / n;
        self.m2_im += other.m2_im + d.im * d.im * na * nb / n;
        self.count += other.count;
        self
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Complex64 {
        self.mean
    }

    /// Standard errors of the mean, (re, im); zero below two samples.
    pub fn stderr(&self) -> (f64, f64) {
        if self.count < 2 {
            return (0.0, 0.0);
        }
        let denom = self.count as f64 * (self.count as f64 - 1.0);
        ((self.m2_re / denom).sqrt(), (self.m2_im / denom).sqrt())
    }
}

/// Entrywise [`ScalarWelford`] over a fixed-length complex buffer.
#[derive(Clone, Debug)]
pub(crate) struct VectorWelford {
    entries: Vec<ScalarWelford>,
}

impl VectorWelford {
    pub fn new(len: usize) -> Self {
        Self {
            entries: vec![ScalarWelford::new(); len],
        }
    }

    pub fn push(&mut self, values: &[Complex64]) {
        assert_eq!(values.len(), self.entries.len(), "length mismatch");
        for (e, &v) in self.entries.iter_mut().zip(values) {
            e.push(v);
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        assert_eq!(self.entries.len(), other.entries.len());
        self.entries = self
            .entries
            .into_iter()
            .zip(other.entries)
            .map(|(a, b)| a.merge(b))
            .collect();
        self
    }

    pub fn entries(&self) -> &[ScalarWelford] {
        &self.entries
    }
}

/// Deterministic chunked parallel reduction over sample indices
/// `0..samples`.
///
/// `body` must depend only on the sample index (not on execution order);
/// `merge` combines two accumulators built from disjoint, ordered index
/// ranges. See the module docs for the determinism contract.
pub(crate) fn chunked_reduce<W, I, B, M>(samples: u64, init: I, body: B, merge: M) -> W
where
    W: Send,
    I: Fn() -> W + Sync,
    B: Fn(&mut W, u64) + Sync,
    M: Fn(W, W) -> W,
{
    assert!(samples >= 1, "need at least one sample");
    let chunk_count = (samples + CHUNK - 1) / CHUNK;
    let parts: Vec<W> = (0..chunk_count)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(samples);
            let mut acc = init();
            for i in lo..hi {
                body(&mut acc, i);
            }
            acc
        })
        .collect();
    parts
        .into_iter()
        .reduce(merge)
        .expect("at least one chunk")
}
