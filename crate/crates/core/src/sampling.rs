//! Bootstrap and without-replacement sub-sampling with exact tracking of the
//! held-out (out-of-bag or remainder) observations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{OteError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DrawKind {
    Bootstrap,
    Subsample,
}

/// One resample: the in-sample multiset and the held-out complement.
///
/// Fresh draws index `0..n`; [`SampleDraw::remap`] translates both sets
/// into an enclosing index space (e.g. the training rows of a split).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleDraw {
    pub in_indices: Vec<usize>,
    /// Sorted ascending.
    pub held_out_indices: Vec<usize>,
    pub kind: DrawKind,
    pub seed: u64,
}

impl SampleDraw {
    /// Translates local positions through `rows` (position `i` becomes
    /// `rows[i]`).
    pub fn remap(self, rows: &[usize]) -> SampleDraw {
        let mut held_out: Vec<usize> = self.held_out_indices.iter().map(|&i| rows[i]).collect();
        held_out.sort_unstable();
        SampleDraw {
            in_indices: self.in_indices.iter().map(|&i| rows[i]).collect(),
            held_out_indices: held_out,
            kind: self.kind,
            seed: self.seed,
        }
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for item `index` of stream `stream`.
///
/// Used for every per-tree, per-chunk and per-repetition RNG so results do
/// not depend on execution order or thread count.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let a = mix64(base.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let b = mix64(a ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    mix64(b ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1))
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` uniform draws with replacement from `0..n`.
pub fn bootstrap(n: usize, seed: u64) -> Result<SampleDraw> {
    if n == 0 {
        return Err(OteError::Empty("bootstrap population"));
    }
    let mut rng = rng(seed);
    let mut seen = vec![false; n];
    let in_indices: Vec<usize> = (0..n)
        .map(|_| {
            let i = rng.gen_range(0..n);
            seen[i] = true;
            i
        })
        .collect();
    let held_out_indices = (0..n).filter(|&i| !seen[i]).collect();
    Ok(SampleDraw {
        in_indices,
        held_out_indices,
        kind: DrawKind::Bootstrap,
        seed,
    })
}

/// `m` distinct uniform indices from `0..n`; the other `n - m` are held out.
pub fn subsample(n: usize, m: usize, seed: u64) -> Result<SampleDraw> {
    if m == 0 {
        return Err(OteError::InvalidParameter("sub-sample size must be positive".into()));
    }
    if m >= n {
        return Err(OteError::InvalidParameter(format!(
            "sub-sample size {m} leaves no held-out rows out of {n}"
        )));
    }
    let mut in_indices = rand::seq::index::sample(&mut rng(seed), n, m).into_vec();
    in_indices.sort_unstable();
    let mut held_out_indices = Vec::with_capacity(n - m);
    let mut next = in_indices.iter().peekable();
    for i in 0..n {
        if next.peek() == Some(&&i) {
            next.next();
        } else {
            held_out_indices.push(i);
        }
    }
    Ok(SampleDraw {
        in_indices,
        held_out_indices,
        kind: DrawKind::Subsample,
        seed,
    })
}

/// Default sub-sample size: 90% of the training rows, kept in `1..n`.
pub fn default_subsample_size(n: usize, fraction: f64) -> Result<usize> {
    let m = (fraction * n as f64).floor() as usize;
    if m == 0 || m >= n {
        return Err(OteError::InvalidParameter(format!(
            "sub-sample fraction {fraction} gives m = {m} for n = {n}; need 1 <= m < n"
        )));
    }
    Ok(m)
}
