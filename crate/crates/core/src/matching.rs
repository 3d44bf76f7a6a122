//! Putative matches by exhaustive nearest-neighbour search, and the two
//! classic filters that operate on descriptor evidence alone (ratio test and
//! mutual nearest neighbour).
//!
//! Distances are Euclidean. The search is brute force over all pairs,
//! parallel over query rows; each query row's result depends only on that
//! row, so the output does not depend on the thread count.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::types::{KeypointSet, PutativeMatch};

/// Queries handled per parallel work item.
const QUERY_CHUNK: usize = 64;
/// Database rows per cache tile.
const DB_TILE: usize = 256;
/// Queries evaluated together against one database row.
const QUERY_BLOCK: usize = 4;
/// Partial sums kept per distance.
const LANES: usize = 16;

#[derive(Debug, Clone, Copy)]
struct NearestTwo {
    best: usize,
    best_d2: f32,
    second_d2: f32,
}

impl NearestTwo {
    const EMPTY: Self = Self {
        best: usize::MAX,
        best_d2: f32::INFINITY,
        second_d2: f32::INFINITY,
    };

    // Candidates arrive in ascending database index, so a strict comparison
    // keeps the smallest index among equal distances.
    #[inline(always)]
    fn push(&mut self, j: usize, d2: f32) {
        if d2 < self.best_d2 {
            self.second_d2 = self.best_d2;
            self.best_d2 = d2;
            self.best = j;
        } else if d2 < self.second_d2 {
            self.second_d2 = d2;
        }
    }
}

fn flatten(set: &KeypointSet) -> Vec<f32> {
    let mut out = Vec::with_capacity(set.len() * set.dim());
    for kp in set.iter() {
        out.extend_from_slice(&kp.descriptor);
    }
    out
}

#[inline(always)]
fn reduce(a: &[f32; LANES]) -> f32 {
    let mut w = *a;
    let mut half = LANES / 2;
    while half > 0 {
        for l in 0..half {
            w[l] += w[l + half];
        }
        half /= 2;
    }
    w[0]
}

#[inline(always)]
fn tail_sq(q: &[f32], r: &[f32], from: usize) -> f32 {
    let mut t = 0f32;
    for c in from..r.len() {
        let d = q[c] - r[c];
        t += d * d;
    }
    t
}

/// Squared distances from one database row to a block of queries. The
/// vector kernels below keep the same per-lane partial sums and the same
/// reduction and the same fused multiply-adds, so all three agree bit for
/// bit.
fn sq_dist_block_scalar(q: [&[f32]; QUERY_BLOCK], r: &[f32]) -> [f32; QUERY_BLOCK] {
    let full = r.len() / LANES * LANES;
    std::array::from_fn(|k| {
        let mut acc = [0f32; LANES];
        for c in (0..full).step_by(LANES) {
            for l in 0..LANES {
                let d = q[k][c + l] - r[c + l];
                acc[l] = d.mul_add(d, acc[l]);
            }
        }
        reduce(&acc) + tail_sq(q[k], r, full)
    })
}

/// The last three halving steps of [`reduce`], in registers. Lane `l` of
/// `v` already holds `a[l] + a[l + 8]`.
#[cfg(target_arch = "x86_64")]
#[inline]
#[target_feature(enable = "avx2")]
fn reduce_m256(v: std::arch::x86_64::__m256) -> f32 {
    use std::arch::x86_64::*;
    let s4 = _mm_add_ps(_mm256_castps256_ps128(v), _mm256_extractf128_ps::<1>(v));
    let s2 = _mm_add_ps(s4, _mm_movehl_ps(s4, s4));
    let s1 = _mm_add_ss(s2, _mm_shuffle_ps::<1>(s2, s2));
    _mm_cvtss_f32(s1)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn sq_dist_block_avx512(q: [&[f32]; QUERY_BLOCK], r: &[f32]) -> [f32; QUERY_BLOCK] {
    use std::arch::x86_64::*;
    let full = r.len() / LANES * LANES;
    let mut acc = [_mm512_setzero_ps(); QUERY_BLOCK];
    let mut c = 0;
    while c < full {
        // SAFETY: c + LANES <= full, and every row has the length of `r`.
        let rv = _mm512_loadu_ps(r.as_ptr().wrapping_add(c));
        for k in 0..QUERY_BLOCK {
            let d = _mm512_sub_ps(_mm512_loadu_ps(q[k].as_ptr().wrapping_add(c)), rv);
            acc[k] = _mm512_fmadd_ps(d, d, acc[k]);
        }
        c += LANES;
    }
    std::array::from_fn(|k| {
        let v = acc[k];
        let lo = _mm512_castps512_ps256(v);
        let hi = _mm256_castpd_ps(_mm512_extractf64x4_pd::<1>(_mm512_castps_pd(v)));
        reduce_m256(_mm256_add_ps(lo, hi)) + tail_sq(q[k], r, full)
    })
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn sq_dist_block_avx2(q: [&[f32]; QUERY_BLOCK], r: &[f32]) -> [f32; QUERY_BLOCK] {
    use std::arch::x86_64::*;
    let full = r.len() / LANES * LANES;
    let mut lo = [_mm256_setzero_ps(); QUERY_BLOCK];
    let mut hi = [_mm256_setzero_ps(); QUERY_BLOCK];
    let mut c = 0;
    while c < full {
        // SAFETY: c + LANES <= full, and every row has the length of `r`.
        let r_lo = _mm256_loadu_ps(r.as_ptr().wrapping_add(c));
        let r_hi = _mm256_loadu_ps(r.as_ptr().wrapping_add(c + 8));
        for k in 0..QUERY_BLOCK {
            let qp = q[k].as_ptr().wrapping_add(c);
            let d_lo = _mm256_sub_ps(_mm256_loadu_ps(qp), r_lo);
            let d_hi = _mm256_sub_ps(_mm256_loadu_ps(qp.wrapping_add(8)), r_hi);
            lo[k] = _mm256_fmadd_ps(d_lo, d_lo, lo[k]);
            hi[k] = _mm256_fmadd_ps(d_hi, d_hi, hi[k]);
        }
        c += LANES;
    }
    std::array::from_fn(|k| reduce_m256(_mm256_add_ps(lo[k], hi[k])) + tail_sq(q[k], r, full))
}

#[inline(always)]
fn nearest_two_chunk_impl(
    queries: &[f32],
    db: &[f32],
    dim: usize,
    kernel: impl Fn([&[f32]; QUERY_BLOCK], &[f32]) -> [f32; QUERY_BLOCK],
) -> Vec<NearestTwo> {
    let nq = queries.len() / dim;
    let nd = db.len() / dim;
    let mut state = vec![NearestTwo::EMPTY; nq];
    let mut tile_start = 0;
    while tile_start < nd {
        let tile_end = (tile_start + DB_TILE).min(nd);
        let mut qb = 0;
        while qb < nq {
            let qn = (nq - qb).min(QUERY_BLOCK);
            // Pad short blocks by repeating the last query; padded results
            // are discarded.
            let rows: [&[f32]; QUERY_BLOCK] = std::array::from_fn(|k| {
                let qi = qb + k.min(qn - 1);
                &queries[qi * dim..(qi + 1) * dim]
            });
            for j in tile_start..tile_end {
                let d = kernel(rows, &db[j * dim..(j + 1) * dim]);
                for k in 0..qn {
                    state[qb + k].push(j, d[k]);
                }
            }
            qb += QUERY_BLOCK;
        }
        tile_start = tile_end;
    }
    state
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn nearest_two_chunk_avx512(queries: &[f32], db: &[f32], dim: usize) -> Vec<NearestTwo> {
    // SAFETY: only called once avx512f has been detected.
    nearest_two_chunk_impl(queries, db, dim, |q, r| unsafe {
        sq_dist_block_avx512(q, r)
    })
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn nearest_two_chunk_avx2(queries: &[f32], db: &[f32], dim: usize) -> Vec<NearestTwo> {
    // SAFETY: only called once avx2 and fma have been detected.
    nearest_two_chunk_impl(queries, db, dim, |q, r| unsafe { sq_dist_block_avx2(q, r) })
}

fn nearest_two_chunk(queries: &[f32], db: &[f32], dim: usize) -> Vec<NearestTwo> {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx512f") {
            // SAFETY: the required CPU feature was detected at runtime.
            return unsafe { nearest_two_chunk_avx512(queries, db, dim) };
        }
        if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
            // SAFETY: as above.
            return unsafe { nearest_two_chunk_avx2(queries, db, dim) };
        }
    }
    nearest_two_chunk_impl(queries, db, dim, sq_dist_block_scalar)
}

fn nearest_two(queries: &[f32], db: &[f32], dim: usize) -> Vec<NearestTwo> {
    queries
        .par_chunks(QUERY_CHUNK * dim)
        .flat_map_iter(|chunk| nearest_two_chunk(chunk, db, dim))
        .collect()
}

fn check_dims(k1: &KeypointSet, k2: &KeypointSet) -> Result<()> {
    if !k1.is_empty() && !k2.is_empty() && k1.dim() != k2.dim() {
        return Err(invalid(format!(
            "descriptor dimensions differ: {} vs {}",
            k1.dim(),
            k2.dim()
        )));
    }
    Ok(())
}

/// Matches every keypoint of `k1` to its nearest neighbour in `k2`.
///
/// `ratio` is the nearest over the second-nearest distance; it is 1 when the
/// two distances are equal (including both zero). Ties in distance go to
/// the smallest `k2` index.
pub fn nn_match(k1: &KeypointSet, k2: &KeypointSet) -> Result<Vec<PutativeMatch>> {
    if k2.len() < 2 {
        return Err(Error::InsufficientKeypoints {
            needed: 2,
            got: k2.len(),
        });
    }
    check_dims(k1, k2)?;
    if k1.is_empty() {
        return Ok(Vec::new());
    }
    let dim = k1.dim();
    let q = flatten(k1);
    let db = flatten(k2);
    let nn = nearest_two(&q, &db, dim);
    Ok(nn
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            let d1 = f64::from(n.best_d2).sqrt();
            let d2 = f64::from(n.second_d2).sqrt();
            let ratio = if d1 >= d2 { 1.0 } else { d1 / d2 };
            PutativeMatch {
                idx1: i,
                idx2: n.best,
                dist: d1,
                ratio,
            }
        })
        .collect())
}

/// Keeps matches whose ratio is at most `threshold`, preserving order.
pub fn ratio_test_filter(matches: &[PutativeMatch], threshold: f64) -> Result<Vec<PutativeMatch>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(invalid(format!(
            "ratio threshold must lie in (0, 1], got {threshold}"
        )));
    }
    Ok(matches
        .iter()
        .copied()
        .filter(|m| m.ratio <= threshold)
        .collect())
}

/// Keeps a match `i -> j` only if `i` is also the nearest neighbour of `j`
/// among the descriptors of `k1`.
pub fn mutual_nn_filter(
    k1: &KeypointSet,
    k2: &KeypointSet,
    matches: &[PutativeMatch],
) -> Result<Vec<PutativeMatch>> {
    if matches.is_empty() {
        return Ok(Vec::new());
    }
    check_dims(k1, k2)?;
    for m in matches {
        if m.idx1 >= k1.len() || m.idx2 >= k2.len() {
            return Err(invalid(format!(
                "match {} -> {} is out of range for keypoint sets of size {} and {}",
                m.idx1,
                m.idx2,
                k1.len(),
                k2.len()
            )));
        }
    }
    let dim = k1.dim();
    let mut targets: Vec<usize> = matches.iter().map(|m| m.idx2).collect();
    targets.sort_unstable();
    targets.dedup();
    let mut q = Vec::with_capacity(targets.len() * dim);
    for &j in &targets {
        q.extend_from_slice(&k2[j].descriptor);
    }
    let db = flatten(k1);
    let back = nearest_two(&q, &db, dim);
    Ok(matches
        .iter()
        .copied()
        .filter(|m| {
            let pos = targets
                .binary_search(&m.idx2)
                .expect("target collected above");
            back[pos].best == m.idx1
        })
        .collect())
}
