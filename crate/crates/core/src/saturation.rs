//! Quasi-orbit construction for saturated sets on a subshift of finite type:
//! rational convex approximation of a target measure, pools of typical
//! segments, the (N_k, X_k, Y_k, T_k) schedule, symbolic assembly, tracking
//! verification, entropy certificates and a Katok entropy estimator.

use std::collections::{BinaryHeap, HashMap, HashSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sft::{bridge_word, continue_itinerary, sample_itinerary_rng, MarkovMeasure, TransitionMatrix, Word};
use crate::shadowing::{pseudo_orbit_from_points, MapHandle, PseudoOrbit};
use crate::toral::{decode, torus_dist, Itinerary, MarkovPartition, Point};
use crate::weakstar::{continuity_radius, MeasureHandle, Space, TestFamily, TestFn};

pub type Frac = Ratio<i64>;

/// Rationals as `[num, den]` pairs.
mod frac_vec {
    use super::Frac;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Frac], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|r| [*r.numer(), *r.denom()]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Frac>, D::Error> {
        let raw: Vec<[i64; 2]> = Vec::deserialize(d)?;
        raw.into_iter()
            .map(|[n, m]| if m == 0 { Err(serde::de::Error::custom("zero denominator")) } else { Ok(Frac::new(n, m)) })
            .collect()
    }
}

/// Ergodic building blocks of a construction, with bridge lengths
/// s(m_a, m_b) = number of padding symbols between a block of m_a and one of m_b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub matrix: TransitionMatrix,
    pub measures: Vec<MarkovMeasure>,
    pub bridges: Vec<Vec<u64>>,
}

/// Smallest s ≥ 1 such that every pair of symbols is joined by an admissible
/// word with exactly s interior symbols.
pub fn default_bridge_length(b: &TransitionMatrix) -> Result<u64> {
    let l = b.size();
    for s in 1..=(l * l + 2) {
        if (0..l).all(|i| (0..l).all(|j| bridge_word(b, i, j, s + 2).is_ok())) {
            return Ok(s as u64);
        }
    }
    Err(Error::NotMixing)
}

impl Catalog {
    pub fn new(matrix: TransitionMatrix, measures: Vec<MarkovMeasure>, bridges: Vec<Vec<u64>>) -> Result<Self> {
        let c = Catalog { matrix, measures, bridges };
        c.validate()?;
        Ok(c)
    }

    /// All bridge lengths equal to [`default_bridge_length`].
    pub fn with_default_bridges(matrix: TransitionMatrix, measures: Vec<MarkovMeasure>) -> Result<Self> {
        let s = default_bridge_length(&matrix)?;
        let n = measures.len();
        Catalog::new(matrix, measures, vec![vec![s; n]; n])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.measures.len();
        if n == 0 {
            return Err(Error::Invalid("empty catalog".into()));
        }
        for m in &self.measures {
            m.validate(Some(&self.matrix))?;
        }
        if self.bridges.len() != n || self.bridges.iter().any(|r| r.len() != n || r.contains(&0)) {
            return Err(Error::Invalid("bridge lengths must be a positive n×n table".into()));
        }
        Ok(())
    }

    pub fn s(&self, a: usize, b: usize) -> u64 {
        self.bridges[a][b]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub k: u64,
    /// Catalog indices of m_{k,1..p_k}.
    pub components: Vec<usize>,
    #[serde(with = "frac_vec")]
    pub weights: Vec<Frac>,
    /// Segment lengths n(k,j).
    pub lengths: Vec<u64>,
}

impl LevelSpec {
    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        let p = self.components.len();
        if p == 0 || self.weights.len() != p || self.lengths.len() != p {
            return Err(Error::Invalid(format!("level {}: components, weights and lengths must align", self.k)));
        }
        if self.k == 0 || self.components.iter().any(|&c| c >= catalog.measures.len()) {
            return Err(Error::Invalid(format!("level {}: bad level or component index", self.k)));
        }
        if self.weights.iter().any(|a| *a <= Frac::zero()) || self.weights.iter().sum::<Frac>() != Frac::one() {
            return Err(Error::Invalid(format!("level {}: weights must be positive and sum to 1 exactly", self.k)));
        }
        if self.lengths.contains(&0) {
            return Err(Error::Invalid(format!("level {}: segment lengths must be positive", self.k)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxReport {
    pub distance: f64,
    pub denominator: i64,
    /// |h_μ − Σ a_j h_j| when entropies were supplied; reported, not enforced.
    pub entropy_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxConfig {
    pub max_den: i64,
    /// n(k,j) assigned to every selected component.
    pub segment_len: u64,
    /// h_μ and per-catalog entropies, if known.
    pub entropies: Option<(f64, Vec<f64>)>,
    /// Distance to reach instead of 1/k.
    pub goal: Option<f64>,
}

fn combo_distance(fam: &TestFamily, target: &[f64], ints: &[Vec<f64>], counts: &[i64], d: i64) -> f64 {
    let mut mix = vec![0.0; target.len()];
    for (c, v) in counts.iter().zip(ints) {
        if *c > 0 {
            let a = *c as f64 / d as f64;
            for (m, x) in mix.iter_mut().zip(v) {
                *m += a * x;
            }
        }
    }
    fam.distance_from_integrals(target, &mix)
}

/// Greedy walk on the simplex grid {c/d : Σc = d}: start at the best vertex and
/// move one unit of mass between candidates while D decreases.
fn greedy_on_grid(fam: &TestFamily, target: &[f64], ints: &[Vec<f64>], d: i64) -> (Vec<i64>, f64) {
    let p = ints.len();
    let mut best_vertex = (0, f64::INFINITY);
    for i in 0..p {
        let dist = fam.distance_from_integrals(target, &ints[i]);
        if dist < best_vertex.1 {
            best_vertex = (i, dist);
        }
    }
    let mut c = vec![0i64; p];
    c[best_vertex.0] = d;
    let mut cur = best_vertex.1;
    loop {
        let mut improve: Option<(usize, usize, f64)> = None;
        for i in 0..p {
            if c[i] == 0 {
                continue;
            }
            for j in 0..p {
                if i == j {
                    continue;
                }
                c[i] -= 1;
                c[j] += 1;
                let dist = combo_distance(fam, target, ints, &c, d);
                c[i] += 1;
                c[j] -= 1;
                if dist < improve.map_or(cur, |m| m.2) - 1e-15 {
                    improve = Some((i, j, dist));
                }
            }
        }
        match improve {
            Some((i, j, dist)) => {
                c[i] -= 1;
                c[j] += 1;
                cur = dist;
            }
            None => return (c, cur),
        }
    }
}

/// μ_k = Σ a_j m_j with rational a_j of denominator ≤ max_den and
/// D(μ, μ_k) < 1/k, using the smallest denominator that reaches it.
pub fn rational_approximation(mu: &MeasureHandle, k: u64, catalog: &Catalog, fam: &TestFamily, cfg: &ApproxConfig) -> Result<(LevelSpec, ApproxReport)> {
    if k == 0 || cfg.max_den < 1 || cfg.segment_len == 0 {
        return Err(Error::Invalid("k, max_den and segment_len must be positive".into()));
    }
    let target = mu.integrals(fam)?;
    let ints: Vec<Vec<f64>> = catalog.measures.iter().map(|m| MeasureHandle::Markov(m.clone()).integrals(fam)).collect::<Result<_>>()?;
    let goal = cfg.goal.unwrap_or(1.0 / k as f64);
    for d in 1..=cfg.max_den {
        let (c, dist) = greedy_on_grid(fam, &target, &ints, d);
        if dist < goal {
            let chosen: Vec<usize> = (0..c.len()).filter(|&i| c[i] > 0).collect();
            let weights: Vec<Frac> = chosen.iter().map(|&i| Frac::new(c[i], d)).collect();
            let entropy_gap = cfg.entropies.as_ref().map(|(h, hs)| {
                let mix: f64 = chosen.iter().zip(&weights).map(|(&i, a)| a.to_f64().unwrap() * hs[i]).sum();
                (h - mix).abs()
            });
            let level = LevelSpec { k, lengths: vec![cfg.segment_len; chosen.len()], components: chosen, weights };
            return Ok((level, ApproxReport { distance: dist, denominator: d, entropy_gap }));
        }
    }
    Err(Error::NoFeasibleCombination(cfg.max_den as u64))
}

/// Longest cylinder length in a shift test family.
fn max_cylinder_len(fam: &TestFamily) -> usize {
    fam.funcs.iter().map(|f| if let TestFn::Cylinder(w) = f { w.len() } else { 0 }).max().unwrap_or(1)
}

fn shift_matrix(fam: &TestFamily) -> Result<&TransitionMatrix> {
    match &fam.space {
        Space::Shift(b) => Ok(b),
        Space::Torus2 => Err(Error::SpaceMismatch),
    }
}

/// Default anchor: the symbol with the most predecessors (smallest on ties).
pub fn default_anchor(b: &TransitionMatrix) -> usize {
    let l = b.size();
    (0..l).max_by_key(|&j| ((0..l).filter(|&i| b.allowed(i, j)).count(), std::cmp::Reverse(j))).unwrap()
}

pub const DEFAULT_ACCEPTANCE_FLOOR: f64 = 1e-4;

/// Segments of x ∈ Λ(m): length-n words starting at `anchor`, ending in a
/// symbol that may precede `anchor`, with D(E_n(x), m) < 1/k. E_n uses the
/// sampled continuation past n, so cylinders near the end are evaluated on the
/// true orbit. `distances[i]` belongs to `segments[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPool {
    pub n: u64,
    pub k: u64,
    pub anchor: usize,
    pub segments: Vec<Word>,
    pub distances: Vec<f64>,
    pub attempts: u64,
    pub acceptance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolConfig {
    pub pool_size: usize,
    pub seed: u64,
    pub anchor: usize,
    pub floor: f64,
}

pub fn build_segment_pool(m: &MarkovMeasure, n: u64, k: u64, fam: &TestFamily, cfg: &PoolConfig) -> Result<SegmentPool> {
    let b = shift_matrix(fam)?;
    m.validate(Some(b))?;
    if n == 0 || k == 0 || cfg.pool_size == 0 || !(cfg.floor > 0.0 && cfg.floor <= 1.0) {
        return Err(Error::Invalid("n, k, pool_size must be positive and the floor in (0, 1]".into()));
    }
    if cfg.anchor >= b.size() || m.p[cfg.anchor] == 0.0 {
        return Err(Error::Invalid(format!("anchor {} is not charged by the measure", cfg.anchor)));
    }
    let target = MeasureHandle::Markov(m.clone()).integrals(fam)?;
    let idx = fam.cylinder_index();
    let n_us = n as usize;
    let look = max_cylinder_len(fam) - 1;
    let goal = 1.0 / k as f64;
    let attempt = |a: u64| -> Option<(Word, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(a);
        let mut w = vec![cfg.anchor];
        w.extend(continue_itinerary(m, cfg.anchor, n_us - 1 + look, &mut rng));
        if !b.allowed(w[n_us - 1], cfg.anchor) {
            return None;
        }
        let c = idx.counts(&w, 0, n_us);
        let e: Vec<f64> = c.iter().map(|&v| v as f64 / n as f64).collect();
        let d = fam.distance_from_integrals(&e, &target);
        (d < goal).then(|| {
            w.truncate(n_us);
            (w, d)
        })
    };
    let max_attempts = (cfg.pool_size as f64 / cfg.floor).ceil() as u64;
    let batch = (cfg.pool_size as u64).max(256);
    let mut segments = Vec::with_capacity(cfg.pool_size);
    let mut distances = Vec::with_capacity(cfg.pool_size);
    let mut attempts = 0u64;
    while attempts < max_attempts {
        let hi = (attempts + batch).min(max_attempts);
        let results: Vec<Option<(Word, f64)>> = (attempts..hi).into_par_iter().map(attempt).collect();
        for r in results {
            attempts += 1;
            if let Some((w, d)) = r {
                segments.push(w);
                distances.push(d);
                if segments.len() == cfg.pool_size {
                    let acceptance = segments.len() as f64 / attempts as f64;
                    return Ok(SegmentPool { n, k, anchor: cfg.anchor, segments, distances, attempts, acceptance });
                }
            }
        }
    }
    Err(Error::AcceptanceTooLow { rate: segments.len() as f64 / attempts as f64, floor: cfg.floor })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSchedule {
    pub k: u64,
    pub components: Vec<usize>,
    #[serde(with = "frac_vec")]
    pub weights: Vec<Frac>,
    pub lengths: Vec<u64>,
    /// C_{k,j} = a_{k,j}/n(k,j).
    #[serde(with = "frac_vec")]
    pub c: Vec<Frac>,
    /// N_k·C_{k,j}: segments of component j per sweep.
    pub counts: Vec<u64>,
    /// s(m_{k,j}, m_{k,j+1}) with the last entry s(m_{k,p}, m_{k,1}).
    pub s_within: Vec<u64>,
    /// s(m_{k,1}, m_{k+1,1}); 0 on the last level (no trailing bridge).
    pub s_cross: u64,
    pub n_k: u64,
    pub x_k: u64,
    pub y_k: u64,
    pub t_k: u64,
    /// M_k, the position where level k starts.
    pub m_k: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub levels: Vec<LevelSchedule>,
    /// M_{K+1}: total length of the truncated quasi-orbit.
    pub total_len: u64,
}

fn to_u64(v: i128, k: u64) -> Result<u64> {
    if v < 0 || v > i64::MAX as i128 {
        Err(Error::DepthOverflow(k as usize))
    } else {
        Ok(v as u64)
    }
}

pub fn build_schedule(levels: &[LevelSpec], catalog: &Catalog) -> Result<Schedule> {
    if levels.is_empty() {
        return Err(Error::Invalid("depth K must be at least 1".into()));
    }
    catalog.validate()?;
    for (q, l) in levels.iter().enumerate() {
        l.validate(catalog)?;
        if q > 0 && l.k != levels[q - 1].k + 1 {
            return Err(Error::Invalid("levels must be consecutive".into()));
        }
    }
    let kk = levels.len();
    let mut out: Vec<LevelSchedule> = Vec::with_capacity(kk);
    for (q, l) in levels.iter().enumerate() {
        let p = l.components.len();
        let c: Vec<Frac> = l.weights.iter().zip(&l.lengths).map(|(a, &n)| a / Frac::from_integer(n as i64)).collect();
        let lcm = c.iter().fold(1i128, |acc, r| acc.lcm(&(*r.denom() as i128)));
        // Σ of s over all ordered pairs of components on levels ≤ k+1 that exist
        let reach = (q + 2).min(kk);
        let comps: Vec<usize> = levels[..reach].iter().flat_map(|l| l.components.iter().copied()).collect();
        let mut pair_sum: i128 = 0;
        for &a in &comps {
            for &b in &comps {
                pair_sum += catalog.s(a, b) as i128;
            }
        }
        let bound = l.k as i128 * pair_sum;
        let n_k = lcm * ((bound + lcm - 1) / lcm).max(1);
        let counts: Vec<i128> = c.iter().map(|r| n_k * *r.numer() as i128 / *r.denom() as i128).collect();
        let s_within: Vec<u64> = (0..p).map(|j| catalog.s(l.components[j], l.components[(j + 1) % p])).collect();
        let x_k: i128 = s_within.iter().map(|&s| s as i128).sum();
        let s_cross = if q + 1 < kk { catalog.s(l.components[0], levels[q + 1].components[0]) } else { 0 };
        let k = l.k;
        out.push(LevelSchedule {
            k,
            components: l.components.clone(),
            weights: l.weights.clone(),
            lengths: l.lengths.clone(),
            c,
            counts: counts.iter().map(|&v| to_u64(v, k)).collect::<Result<_>>()?,
            s_within,
            s_cross,
            n_k: to_u64(n_k, k)?,
            x_k: to_u64(x_k, k)?,
            y_k: to_u64(n_k + x_k, k)?,
            t_k: 0,
            m_k: 0,
        });
    }
    // minimal strictly increasing T_k such that each level dominates its prefix and the
    // next sweep stays short relative to the past
    let mut prefix_yt: i128 = 0;
    let mut prefix_full: i128 = 0;
    let mut prev_t: i128 = 0;
    for q in 0..kk {
        let (y, k) = (out[q].y_k as i128, out[q].k);
        let mut t = prev_t + 1;
        if q > 0 {
            // Σ_{r<q}(Y_r T_r + s_r) ≤ Y_q T_q / k_q
            t = t.max((k as i128 * prefix_full + y - 1) / y);
        }
        if q + 1 < kk {
            // Y_{q+1} ≤ (1/k_{q+1}) Σ_{r≤q} Y_r T_r
            let need = out[q + 1].k as i128 * out[q + 1].y_k as i128 - prefix_yt;
            if need > 0 {
                t = t.max((need + y - 1) / y);
            }
        }
        out[q].t_k = to_u64(t, k)?;
        out[q].m_k = to_u64(prefix_full, k)?;
        let yt = y.checked_mul(t).ok_or(Error::DepthOverflow(k as usize))?;
        prefix_yt += yt;
        prefix_full += yt + out[q].s_cross as i128;
        to_u64(prefix_full, k)?;
        prev_t = t;
    }
    let total = out.last().map(|l| l.m_k as i128 + (l.y_k * l.t_k) as i128).unwrap();
    let sched = Schedule { levels: out, total_len: to_u64(total, levels[kk - 1].k)? };
    sched.check_invariants()?;
    Ok(sched)
}

impl Schedule {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// M_{k,i} (i is 1-based; i = T_k + 1 gives the start of the next level).
    pub fn m_ki(&self, q: usize, i: u64) -> u64 {
        let l = &self.levels[q];
        if i == l.t_k + 1 {
            return self.levels.get(q + 1).map_or(self.total_len, |n| n.m_k);
        }
        l.m_k + (i - 1) * l.y_k
    }

    pub fn m_kij(&self, q: usize, i: u64, j: usize) -> u64 {
        let l = &self.levels[q];
        let before: u64 = (0..j - 1).map(|r| l.n_k * l.weights[r].numer().unsigned_abs() / l.weights[r].denom().unsigned_abs() + l.s_within[r]).sum();
        l.m_k + (i - 1) * l.y_k + before
    }

    pub fn m_kijt(&self, q: usize, i: u64, j: usize, t: u64) -> u64 {
        self.m_kij(q, i, j) + (t - 1) * self.levels[q].lengths[j - 1]
    }

    /// Start of every segment in layout order, as (level position, i, j, t, M_{k,i,j,t}).
    pub fn segment_starts(&self) -> Vec<(usize, u64, usize, u64, u64)> {
        let mut v = Vec::new();
        for (q, l) in self.levels.iter().enumerate() {
            for i in 1..=l.t_k {
                for j in 1..=l.components.len() {
                    for t in 1..=l.counts[j - 1] {
                        v.push((q, i, j, t, self.m_kijt(q, i, j, t)));
                    }
                }
            }
        }
        v
    }

    /// Exact checks of every schedule identity and inequality.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |k: u64, what: &str| Err(Error::Invalid(format!("schedule invariant violated at level {k}: {what}")));
        let kk = self.levels.len();
        let mut prefix_yt: u128 = 0;
        let mut prefix_full: u128 = 0;
        for (q, l) in self.levels.iter().enumerate() {
            let k = l.k;
            for (j, c) in l.c.iter().enumerate() {
                let nc = Ratio::new(l.n_k as i128, 1) * Ratio::new(*c.numer() as i128, *c.denom() as i128);
                if !nc.is_integer() || nc.to_integer() != l.counts[j] as i128 {
                    return fail(k, "N_k C_{k,j} not integral");
                }
                if *c != l.weights[j] / Frac::from_integer(l.lengths[j] as i64) {
                    return fail(k, "C_{k,j} != a_{k,j}/n(k,j)");
                }
            }
            let covered: u128 = (0..l.counts.len()).map(|j| l.counts[j] as u128 * l.lengths[j] as u128).sum();
            if covered != l.n_k as u128 {
                return fail(k, "Σ N_k C_{k,j} n(k,j) != N_k");
            }
            if l.y_k != l.n_k + l.x_k || l.x_k != l.s_within.iter().sum::<u64>() {
                return fail(k, "Y_k != N_k + X_k");
            }
            // N_k/Y_k ≥ 1 − 1/k  ⇔  k·N_k ≥ (k−1)·Y_k
            if (k as u128) * (l.n_k as u128) < (k as u128 - 1) * l.y_k as u128 {
                return fail(k, "N_k/Y_k < 1 - 1/k");
            }
            if q > 0 {
                if l.t_k <= self.levels[q - 1].t_k {
                    return fail(k, "T_k not strictly increasing");
                }
                if prefix_full * k as u128 > l.y_k as u128 * l.t_k as u128 {
                    return fail(k, "next-sweep bound");
                }
            }
            if l.m_k as u128 != prefix_full {
                return fail(k, "M_k recurrence");
            }
            prefix_yt += l.y_k as u128 * l.t_k as u128;
            prefix_full += l.y_k as u128 * l.t_k as u128 + l.s_cross as u128;
            if q + 1 < kk {
                let nx = &self.levels[q + 1];
                if nx.y_k as u128 * nx.k as u128 > prefix_yt {
                    return fail(k, "prefix bound");
                }
            }
            // the sweep closes exactly: M_{k,i,p} + block_p + s_p = M_{k,i+1}
            let p = l.components.len();
            let last = self.m_kij(q, 1, p) + l.counts[p - 1] * l.lengths[p - 1] + l.s_within[p - 1];
            if last != l.m_k + l.y_k {
                return fail(k, "sweep length != Y_k");
            }
        }
        let last = self.levels.last().unwrap();
        if self.total_len != last.m_k + last.y_k * last.t_k {
            return fail(last.k, "M_{K+1}");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assembly {
    pub word: Word,
    /// Position of every segment, in the order of [`Schedule::segment_starts`].
    pub segment_starts: Vec<u64>,
}

/// Concatenates pool segments and bridge words in the schedule's layout. Pool
/// choices are drawn uniformly with replacement from a seeded stream.
/// `pools[q][j]` serves component j+1 of level position q.
pub fn assemble_symbolic(schedule: &Schedule, pools: &[Vec<SegmentPool>], b: &TransitionMatrix, seed: u64) -> Result<Assembly> {
    if pools.len() != schedule.depth() {
        return Err(Error::Invalid("one pool list per level".into()));
    }
    let anchor = pools.iter().flatten().next().map(|p| p.anchor).ok_or_else(|| Error::Invalid("no pools".into()))?;
    for (q, (l, ps)) in schedule.levels.iter().zip(pools).enumerate() {
        if ps.len() != l.components.len() {
            return Err(Error::Invalid(format!("level position {q}: one pool per component")));
        }
        for (j, p) in ps.iter().enumerate() {
            if p.anchor != anchor || p.n != l.lengths[j] || p.segments.is_empty() {
                return Err(Error::Invalid(format!("pool ({q},{j}) does not match the schedule")));
            }
            if let Some(w) = p.segments.iter().find(|w| w[0] != anchor || !b.is_admissible(w) || !b.allowed(*w.last().unwrap(), anchor)) {
                return Err(Error::Inadmissible(w.len()));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut word: Word = Vec::with_capacity(schedule.total_len as usize);
    let mut starts = Vec::new();
    let mut bridges: HashMap<(usize, u64), Word> = HashMap::new();
    let mut bridge = |word: &mut Word, s: u64| -> Result<()> {
        let from = *word.last().unwrap();
        let w = match bridges.get(&(from, s)) {
            Some(w) => w.clone(),
            None => {
                let full = bridge_word(b, from, anchor, s as usize + 2)?;
                let inner = full[1..=s as usize].to_vec();
                bridges.insert((from, s), inner.clone());
                inner
            }
        };
        word.extend(w);
        Ok(())
    };
    for (q, l) in schedule.levels.iter().enumerate() {
        for _ in 0..l.t_k {
            for j in 0..l.components.len() {
                let pool = &pools[q][j];
                for _ in 0..l.counts[j] {
                    starts.push(word.len() as u64);
                    word.extend_from_slice(&pool.segments[rng.gen_range(0..pool.segments.len())]);
                }
                bridge(&mut word, l.s_within[j])?;
            }
        }
        if l.s_cross > 0 {
            bridge(&mut word, l.s_cross)?;
        }
    }
    if word.len() as u64 != schedule.total_len {
        return Err(Error::Invalid("assembled length differs from M_{K+1}".into()));
    }
    if let Some(i) = b.first_violation(&word) {
        return Err(Error::Inadmissible(i));
    }
    Ok(Assembly { word, segment_starts: starts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// D(E_{Y_k}(σ^{M_{k,i}} z), μ_k) ≤ 6/k.
    Block,
    /// D(E_{M_{k+1}}(z), μ) ≤ 8/k.
    LevelEnd,
    /// sup over M_{k,i} ≤ n ≤ M_{k,i+1} of D(E_n(z), μ) ≤ 15/k.
    Sup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub kind: CheckKind,
    pub k: u64,
    /// Sweep index i (0 for level ends).
    pub i: u64,
    /// Start position for blocks, the averaging length otherwise.
    pub n: u64,
    pub d: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub checkpoints: Vec<Checkpoint>,
    pub all_pass: bool,
    /// min over checkpoints of threshold − D.
    pub min_margin: f64,
}

impl TrackingReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("checkpoint,k,i,n,D,threshold,pass\n");
        for c in &self.checkpoints {
            let kind = match c.kind {
                CheckKind::Block => "block",
                CheckKind::LevelEnd => "level_end",
                CheckKind::Sup => "sup",
            };
            s.push_str(&format!("{kind},{},{},{},{:.12e},{},{}\n", c.k, c.i, c.n, c.d, c.threshold, c.pass));
        }
        s
    }
}

/// Checks the three families of tracking bounds for the symbolic point z with
/// itinerary `word`; `level_targets[q]` is μ_k for level position q and `mu`
/// the limit measure.
pub fn verify_tracking(word: &[usize], schedule: &Schedule, level_targets: &[MeasureHandle], mu: &MeasureHandle, fam: &TestFamily) -> Result<TrackingReport> {
    if (word.len() as u64) < schedule.total_len {
        return Err(Error::TooShort { have: word.len(), need: schedule.total_len as usize });
    }
    if level_targets.len() != schedule.depth() {
        return Err(Error::Invalid("one target per level".into()));
    }
    let idx = fam.cylinder_index();
    let mu_int = mu.integrals(fam)?;
    let dist = |counts: &[u64], n: u64, target: &[f64]| {
        let e: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        fam.distance_from_integrals(&e, target)
    };
    let mut checkpoints = Vec::new();
    let mut push = |kind, k: u64, i, n, d: f64, threshold: f64| {
        checkpoints.push(Checkpoint { kind, k, i, n, d, threshold, pass: d <= threshold });
    };
    for (q, l) in schedule.levels.iter().enumerate() {
        let target = level_targets[q].integrals(fam)?;
        let k = l.k as f64;
        for i in 1..=l.t_k {
            let start = schedule.m_ki(q, i);
            let c = idx.counts(word, start as usize, l.y_k as usize);
            push(CheckKind::Block, l.k, i, start, dist(&c, l.y_k, &target), 6.0 / k);
        }
    }
    // one pass for the running averages E_n(z)
    let mut running = vec![0u64; idx.imax()];
    let mut n: u64 = 0;
    for (q, l) in schedule.levels.iter().enumerate() {
        let k = l.k as f64;
        for i in 1..=l.t_k {
            let (lo, hi) = (schedule.m_ki(q, i), schedule.m_ki(q, i + 1));
            let mut sup = (0.0f64, lo.max(1));
            if lo >= 1 {
                sup = (dist(&running, lo, &mu_int), lo);
            }
            while n < hi {
                idx.for_each_hit(word, n as usize, |h| running[h] += 1);
                n += 1;
                let d = dist(&running, n, &mu_int);
                if d > sup.0 {
                    sup = (d, n);
                }
            }
            push(CheckKind::Sup, l.k, i, sup.1, sup.0, 15.0 / k);
        }
        let end = schedule.m_ki(q, l.t_k + 1);
        push(CheckKind::LevelEnd, l.k, 0, end, dist(&running, end, &mu_int), 8.0 / k);
    }
    let all_pass = checkpoints.iter().all(|c| c.pass);
    let min_margin = checkpoints.iter().map(|c| c.threshold - c.d).fold(f64::INFINITY, f64::min);
    Ok(TrackingReport { checkpoints, all_pass, min_margin })
}

/// Junction tolerance for geometric assembly: b_k(1−e^{−ε})/(4√2·e^{(k+1)ε}).
pub fn junction_gap_bound(fam: &TestFamily, k: usize, eps: f64) -> Result<f64> {
    let b = continuity_radius(fam, k.min(fam.imax()))?;
    Ok(b * (1.0 - (-eps).exp()) / (4.0 * 2f64.sqrt() * ((k as f64 + 1.0) * eps).exp()))
}

/// Torus pseudo-orbit of an assembled word: the point at time t is decoded
/// from the symbols of its piece (pieces start at `cuts`) widened by `context`
/// symbols on both sides, with `past` standing in before time 0. Jumps are
/// confined to what the context does not pin down.
pub fn geometric_pseudo_orbit(p: &MarkovPartition, word: &[usize], past: &[usize], cuts: &[u64], context: usize) -> Result<PseudoOrbit> {
    if word.is_empty() {
        return Err(Error::Invalid("empty word".into()));
    }
    let full: Vec<usize> = past.iter().chain(word).copied().collect();
    let off = past.len();
    let mut bounds: Vec<usize> = cuts.iter().map(|&c| c as usize).filter(|&c| c > 0 && c < word.len()).collect();
    bounds.insert(0, 0);
    bounds.push(word.len());
    bounds.dedup();
    let pieces: Vec<(usize, usize)> = bounds.windows(2).map(|w| (w[0], w[1])).collect();
    let points: Vec<Point> = pieces
        .par_iter()
        .map(|&(a, b)| {
            let lo = (a + off).saturating_sub(context);
            let hi = (b + off + context).min(full.len());
            let window = &full[lo..hi];
            (a..b).map(|t| decode(p, &Itinerary::new(window.to_vec(), t + off - lo)).map(|d| d.point)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    pseudo_orbit_from_points(&p.map, points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateLevel {
    pub k: u64,
    /// (1−1/k)²(Σ a_j h_j − 1/k) − (4/k)(1−1/k)².
    pub bound: f64,
    /// (1/Y_k) Σ_j N_k C_{k,j} n(k,j) (1−1/k)(h_j − 4/k).
    pub raw_bound: f64,
    /// false when the bound is not positive.
    pub informative: bool,
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn big(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Per-level entropy lower bounds in exact arithmetic on the binary values of
/// the supplied entropies; `entropies[c]` belongs to catalog entry c.
pub fn entropy_lower_certificate(schedule: &Schedule, entropies: &[f64]) -> Result<Vec<CertificateLevel>> {
    if entropies.iter().any(|h| !(*h >= 0.0) || !h.is_finite()) {
        return Err(Error::Invalid("entropies must be finite and nonnegative".into()));
    }
    let mut out = Vec::with_capacity(schedule.depth());
    for l in &schedule.levels {
        if l.components.iter().any(|&c| c >= entropies.len()) {
            return Err(Error::Invalid("missing entropy for a component".into()));
        }
        let inv_k = BigRational::new(BigInt::one(), BigInt::from(l.k));
        let q = BigRational::one() - &inv_k;
        let q2 = &q * &q;
        let frac = |r: &Frac| BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()));
        let mix: BigRational = l.components.iter().zip(&l.weights).map(|(&c, a)| frac(a) * exact(entropies[c])).sum();
        let four_k = &inv_k * BigRational::from_integer(BigInt::from(4));
        let bound = &q2 * (&mix - &inv_k) - &four_k * &q2;
        let mut raw = BigRational::zero();
        for (j, &c) in l.components.iter().enumerate() {
            let nc = big(l.n_k) * frac(&l.c[j]);
            raw += nc * big(l.lengths[j]) * &q * (exact(entropies[c]) - &four_k);
        }
        raw /= big(l.y_k);
        let bound = bound.to_f64().unwrap();
        out.push(CertificateLevel { k: l.k, bound, raw_bound: raw.to_f64().unwrap(), informative: bound > 0.0 });
    }
    Ok(out)
}

/// Samples whose d^n-distances define Bowen balls: one-sided symbol sequences
/// (metric 2^{−first disagreement}) or finite orbits in the torus max-metric.
#[derive(Debug, Clone, PartialEq)]
pub enum BowenSamples {
    Shift(Vec<Word>),
    Orbits(Vec<Vec<Point>>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KatokEstimate {
    pub n: usize,
    pub eps: f64,
    pub delta: f64,
    pub samples: usize,
    /// Samples kept after discarding the δ-fraction hardest to cover.
    pub kept: usize,
    pub cover: usize,
    pub separated_eps: usize,
    pub separated_2eps: usize,
    /// log(cover)/n.
    pub estimate: f64,
    /// log(separated_2eps)/n.
    pub lower: f64,
}

pub const DEFAULT_BUDGET: u64 = 4_000_000_000;

/// d^n(x, y) < ε in the shift metric iff x, y agree on the first
/// n − 1 + R symbols, R = ⌊−log₂ ε⌋ + 1; every pair qualifies when R ≤ 0.
fn shift_prefix(n: usize, eps: f64) -> usize {
    let r = (-eps.log2()).floor() + 1.0;
    if r <= 0.0 {
        0
    } else {
        n - 1 + r as usize
    }
}

pub fn katok_entropy_estimate(samples: &BowenSamples, n: usize, eps: f64, delta: f64) -> Result<KatokEstimate> {
    if n == 0 || !(eps > 0.0) || !(0.0..1.0).contains(&delta) {
        return Err(Error::Invalid("need n ≥ 1, ε > 0 and δ in [0, 1)".into()));
    }
    let count = match samples {
        BowenSamples::Shift(w) => w.len(),
        BowenSamples::Orbits(o) => o.len(),
    };
    if count == 0 {
        return Err(Error::Invalid("no samples".into()));
    }
    let need = ((1.0 - delta) * count as f64).ceil() as usize;
    let (cover, sep_eps, sep_2eps, kept) = match samples {
        BowenSamples::Shift(words) => shift_cover(words, n, eps, need)?,
        BowenSamples::Orbits(orbits) => orbit_cover(orbits, n, eps, need)?,
    };
    if !(sep_2eps <= cover && cover <= sep_eps) {
        return Err(Error::Invalid(format!("separated-set sandwich violated: {sep_2eps} ≤ {cover} ≤ {sep_eps}")));
    }
    let nf = n as f64;
    Ok(KatokEstimate {
        n,
        eps,
        delta,
        samples: count,
        kept,
        cover,
        separated_eps: sep_eps,
        separated_2eps: sep_2eps,
        estimate: (cover as f64).ln() / nf,
        lower: (sep_2eps as f64).ln() / nf,
    })
}

/// The shift metric is an ultrametric, so ε-balls are prefix classes and the
/// largest-first choice of classes is an optimal cover.
fn shift_cover(words: &[Word], n: usize, eps: f64, need: usize) -> Result<(usize, usize, usize, usize)> {
    let len = shift_prefix(n, eps);
    let coarse = shift_prefix(n, 2.0 * eps);
    if let Some(w) = words.iter().find(|w| w.len() < len) {
        return Err(Error::TooShort { have: w.len(), need: len });
    }
    let mut classes: HashMap<&[usize], Vec<usize>> = HashMap::new();
    for (i, w) in words.iter().enumerate() {
        classes.entry(&w[..len]).or_default().push(i);
    }
    let mut sorted: Vec<(&[usize], Vec<usize>)> = classes.into_iter().collect();
    sorted.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(b.0)));
    let mut covered = 0;
    let mut taken = 0;
    let mut coarse_keys: HashSet<&[usize]> = HashSet::new();
    for (key, members) in &sorted {
        if covered >= need {
            break;
        }
        covered += members.len();
        taken += 1;
        coarse_keys.insert(&key[..coarse]);
    }
    Ok((taken, taken, coarse_keys.len(), covered))
}

fn orbit_dn(a: &[Point], b: &[Point], n: usize) -> f64 {
    a[..n].iter().zip(&b[..n]).map(|(x, y)| torus_dist(*x, *y)).fold(0.0, f64::max)
}

/// Lazy greedy set cover by balls centred at samples, then greedy maximal
/// separated sets on the covered points.
fn orbit_cover(orbits: &[Vec<Point>], n: usize, eps: f64, need: usize) -> Result<(usize, usize, usize, usize)> {
    let count = orbits.len();
    if (count as u64).saturating_mul(count as u64).saturating_mul(n as u64) > DEFAULT_BUDGET {
        return Err(Error::BudgetExceeded(DEFAULT_BUDGET));
    }
    if let Some(o) = orbits.iter().find(|o| o.len() < n) {
        return Err(Error::TooShort { have: o.len(), need: n });
    }
    let near: Vec<Vec<u32>> = (0..count)
        .into_par_iter()
        .map(|i| (0..count).filter(|&j| orbit_dn(&orbits[i], &orbits[j], n) < eps).map(|j| j as u32).collect())
        .collect();
    let mut covered = vec![false; count];
    let mut n_cov = 0;
    let mut heap: BinaryHeap<(usize, std::cmp::Reverse<usize>)> = (0..count).map(|i| (near[i].len(), std::cmp::Reverse(i))).collect();
    let mut centres = 0;
    while n_cov < need {
        let (gain, std::cmp::Reverse(i)) = heap.pop().unwrap();
        let fresh = near[i].iter().filter(|&&j| !covered[j as usize]).count();
        if fresh < gain {
            heap.push((fresh, std::cmp::Reverse(i)));
            continue;
        }
        centres += 1;
        for &j in &near[i] {
            if !covered[j as usize] {
                covered[j as usize] = true;
                n_cov += 1;
            }
        }
    }
    let kept: Vec<usize> = (0..count).filter(|&i| covered[i]).collect();
    // maximal ε-separated subset of the kept points; it also covers them
    let mut blocked = vec![false; count];
    let mut sep_eps = 0;
    for &i in &kept {
        if !blocked[i] {
            sep_eps += 1;
            for &j in &near[i] {
                blocked[j as usize] = true;
            }
        }
    }
    let mut chosen: Vec<usize> = Vec::new();
    for &i in &kept {
        if chosen.iter().all(|&c| orbit_dn(&orbits[i], &orbits[c], n) >= 2.0 * eps) {
            chosen.push(i);
        }
    }
    Ok((centres.min(sep_eps), sep_eps, chosen.len(), kept.len()))
}

/// `count` independent stationary words of length `len`; sample i uses
/// stream i of the seeded generator.
pub fn sample_shift_words(m: &MarkovMeasure, len: usize, count: usize, seed: u64) -> Vec<Word> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            sample_itinerary_rng(m, len, &mut rng)
        })
        .collect()
}

/// Orbits of length n from the given starting points.
pub fn sample_orbits(f: &dyn MapHandle, starts: &[Point], n: usize) -> Result<Vec<Vec<Point>>> {
    starts
        .par_iter()
        .map(|&x| {
            let mut o = Vec::with_capacity(n);
            let mut y = x;
            for _ in 0..n {
                o.push(y);
                y = f.step(y)?;
            }
            Ok(o)
        })
        .collect()
}

/// Katok entropy of a Markov measure on its shift at scale ε, from
/// `sample_size` seeded samples.
pub fn katok_entropy_shift(m: &MarkovMeasure, n: usize, eps: f64, delta: f64, sample_size: usize, seed: u64) -> Result<KatokEstimate> {
    if n == 0 || !(eps > 0.0) || !(0.0..1.0).contains(&delta) {
        return Err(Error::Invalid("need n ≥ 1, ε > 0 and δ in [0, 1)".into()));
    }
    let len = shift_prefix(n, eps).max(1);
    if (len as u64).saturating_mul(sample_size as u64) > DEFAULT_BUDGET {
        return Err(Error::BudgetExceeded(DEFAULT_BUDGET));
    }
    let words = sample_shift_words(m, len, sample_size, seed);
    katok_entropy_estimate(&BowenSamples::Shift(words), n, eps, delta)
}

/// A Markov measure from a row-stochastic matrix given as decimals, e.g. the
/// perturbed golden-mean chain [[0.3, 0.7], [1, 0]].
pub fn markov_from_rows(rows: Vec<Vec<f64>>, b: &TransitionMatrix) -> Result<MarkovMeasure> {
    let m = MarkovMeasure::from_stochastic(rows)?;
    m.validate(Some(b))?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sft::{markov_entropy, parry_measure};
    use crate::weakstar::build_test_family;

    fn golden() -> (TransitionMatrix, TestFamily) {
        let b = TransitionMatrix::golden_mean();
        let fam = build_test_family(Space::Shift(b.clone()), 64).unwrap();
        (b, fam)
    }

    fn two_measures(b: &TransitionMatrix) -> Vec<MarkovMeasure> {
        vec![parry_measure(b).unwrap(), markov_from_rows(vec![vec![0.3, 0.7], vec![1.0, 0.0]], b).unwrap()]
    }

    #[test]
    fn schedule_instantiation() {
        let b = TransitionMatrix::full_shift(2);
        let m = parry_measure(&b).unwrap();
        let cat = Catalog::new(b, vec![m], vec![vec![2]]).unwrap();
        let lv = LevelSpec { k: 1, components: vec![0], weights: vec![Frac::one()], lengths: vec![4] };
        let s = build_schedule(&[lv], &cat).unwrap();
        let l = &s.levels[0];
        assert_eq!(l.c, vec![Frac::new(1, 4)]);
        assert_eq!(l.x_k, 2);
        // bound k·Σs = 2, smallest multiple of 4 is 4
        assert_eq!(l.n_k, 4);
        assert_eq!(l.y_k, 6);
        assert_eq!(l.t_k, 1);
        assert_eq!(s.total_len, 6);
    }

    #[test]
    fn schedule_integrality() {
        let (b, _) = golden();
        let cat = Catalog::with_default_bridges(b.clone(), two_measures(&b)).unwrap();
        let half = Frac::new(1, 2);
        let levels: Vec<LevelSpec> = (1..=3).map(|k| LevelSpec { k, components: vec![0, 1], weights: vec![half, half], lengths: vec![2, 3] }).collect();
        let s = build_schedule(&levels, &cat).unwrap();
        for l in &s.levels {
            assert_eq!(l.n_k % 12, 0);
        }
        s.check_invariants().unwrap();
        let starts = s.segment_starts();
        assert_eq!(starts[0].4, 0);
        assert!(starts.windows(2).all(|w| w[0].4 < w[1].4));
    }

    #[test]
    fn rational_approximation_cases() {
        let (b, fam) = golden();
        let ms = two_measures(&b);
        let cat = Catalog::with_default_bridges(b, ms.clone()).unwrap();
        let cfg = ApproxConfig { max_den: 8, segment_len: 100, entropies: None, goal: None };
        let (l, r) = rational_approximation(&MeasureHandle::Markov(ms[0].clone()), 5, &cat, &fam, &cfg).unwrap();
        assert_eq!((l.components.clone(), l.weights.clone(), r.distance), (vec![0], vec![Frac::one()], 0.0));
        let mix = MeasureHandle::combination(vec![(0.5, MeasureHandle::Markov(ms[0].clone())), (0.5, MeasureHandle::Markov(ms[1].clone()))]).unwrap();
        let (l, r) = rational_approximation(&mix, 1000, &cat, &fam, &cfg).unwrap();
        assert_eq!(l.weights, vec![half(), half()]);
        assert!(r.distance < 1e-10);
        let far = MeasureHandle::Markov(markov_from_rows(vec![vec![0.9, 0.1], vec![1.0, 0.0]], &TransitionMatrix::golden_mean()).unwrap());
        let single = Catalog::with_default_bridges(TransitionMatrix::golden_mean(), vec![ms[1].clone()]).unwrap();
        assert!(matches!(rational_approximation(&far, 100, &single, &fam, &cfg), Err(Error::NoFeasibleCombination(8))));
    }

    fn half() -> Frac {
        Frac::new(1, 2)
    }

    #[test]
    fn pools() {
        let b = TransitionMatrix::full_shift(2);
        let fam = build_test_family(Space::Shift(b.clone()), 64).unwrap();
        let m = parry_measure(&b).unwrap();
        let cfg = PoolConfig { pool_size: 32, seed: 7, anchor: 0, floor: DEFAULT_ACCEPTANCE_FLOOR };
        let p = build_segment_pool(&m, 2000, 3, &fam, &cfg).unwrap();
        assert!(p.acceptance > 0.5 && p.segments.len() == 32);
        assert!(p.distances.iter().all(|&d| d < 1.0 / 3.0));
        let again = build_segment_pool(&m, 2000, 3, &fam, &cfg).unwrap();
        assert_eq!(p, again);
        let small = PoolConfig { pool_size: 2, ..cfg.clone() };
        assert!(matches!(build_segment_pool(&m, 20, 100_000, &fam, &small), Err(Error::AcceptanceTooLow { .. })));
        // a deterministic two-cycle reproduces its own measure
        let cyc = TransitionMatrix::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
        let fam2 = build_test_family(Space::Shift(cyc.clone()), 8).unwrap();
        let m2 = MarkovMeasure::new(vec![0.5, 0.5], vec![vec![0.0, 1.0], vec![1.0, 0.0]], Some(&cyc)).unwrap();
        let p2 = build_segment_pool(&m2, 10, 1000, &fam2, &cfg).unwrap();
        assert_eq!(p2.acceptance, 1.0);
        assert!(p2.distances.iter().all(|&d| d < 1e-15));
    }

    #[test]
    fn certificate_example_and_limits() {
        let b = TransitionMatrix::full_shift(2);
        let m = parry_measure(&b).unwrap();
        let cat = Catalog::new(b, vec![m], vec![vec![1]]).unwrap();
        let lv = LevelSpec { k: 10, components: vec![0], weights: vec![Frac::one()], lengths: vec![5] };
        let s = build_schedule(&[lv], &cat).unwrap();
        let c = entropy_lower_certificate(&s, &[2f64.ln()]).unwrap();
        assert!((c[0].bound - 0.81 * (2f64.ln() - 0.1) + 0.4 * 0.81).abs() < 1e-12);
        assert!((c[0].bound - 0.15645).abs() < 1e-5);
        assert!(c[0].raw_bound <= 2f64.ln());
        let z = entropy_lower_certificate(&s, &[0.0]).unwrap();
        assert!(z[0].bound <= 0.0 && !z[0].informative);
    }

    #[test]
    fn geometric_pseudo_orbit_of_parry_word() {
        use crate::shadowing::newton_shadow;
        use crate::toral::golden_partition;
        let p = golden_partition();
        let m = parry_measure(&p.transitions).unwrap();
        let w = crate::sft::sample_itinerary(&m, 300, 4);
        let po = geometric_pseudo_orbit(&p, &w, &[0; 20], &[100, 200], 20).unwrap();
        assert_eq!(po.points.len(), 300);
        assert!(po.delta > 0.0 && po.delta < 1e-3);
        let z = newton_shadow(&p.map, &po, 1e-12, 20).unwrap();
        assert!(z.tracking < 5.0 * po.delta);
        // without context the pieces separate at the cuts
        let loose = geometric_pseudo_orbit(&p, &w, &[0; 20], &[100, 200], 0).unwrap();
        assert!(loose.delta > po.delta);
    }

    #[test]
    fn tracking_rejects_bad_words_at_high_k() {
        let b = TransitionMatrix::full_shift(2);
        let fam = build_test_family(Space::Shift(b.clone()), 64).unwrap();
        let m = parry_measure(&b).unwrap();
        let cat = Catalog::new(b, vec![m.clone()], vec![vec![1]]).unwrap();
        let lv = LevelSpec { k: 30, components: vec![0], weights: vec![Frac::one()], lengths: vec![10] };
        let s = build_schedule(&[lv], &cat).unwrap();
        let word = vec![0; s.total_len as usize];
        let t = MeasureHandle::Markov(m);
        let r = verify_tracking(&word, &s, &[t.clone()], &t, &fam).unwrap();
        assert!(!r.all_pass);
        assert!(r.to_csv().starts_with("checkpoint,"));
    }

    #[test]
    fn small_end_to_end() {
        let (b, fam) = golden();
        let ms = two_measures(&b);
        let cat = Catalog::with_default_bridges(b.clone(), ms.clone()).unwrap();
        let anchor = default_anchor(&b);
        assert_eq!(anchor, 0);
        let levels: Vec<LevelSpec> = (1..=2).map(|k| LevelSpec { k, components: vec![0, 1], weights: vec![half(), half()], lengths: vec![50, 50] }).collect();
        let s = build_schedule(&levels, &cat).unwrap();
        let pools: Vec<Vec<SegmentPool>> = s
            .levels
            .iter()
            .map(|l| {
                l.components
                    .iter()
                    .map(|&c| build_segment_pool(&ms[c], 50, l.k, &fam, &PoolConfig { pool_size: 8, seed: 3 + c as u64, anchor, floor: 1e-4 }).unwrap())
                    .collect()
            })
            .collect();
        let a = assemble_symbolic(&s, &pools, &b, 11).unwrap();
        assert!(b.is_admissible(&a.word));
        let expected: Vec<u64> = s.segment_starts().iter().map(|e| e.4).collect();
        assert_eq!(a.segment_starts, expected);
        let mix = MeasureHandle::combination(vec![(0.5, MeasureHandle::Markov(ms[0].clone())), (0.5, MeasureHandle::Markov(ms[1].clone()))]).unwrap();
        let r = verify_tracking(&a.word, &s, &[mix.clone(), mix.clone()], &mix, &fam).unwrap();
        assert!(r.all_pass);
        let h: Vec<f64> = ms.iter().map(markov_entropy).collect();
        let cert = entropy_lower_certificate(&s, &h).unwrap();
        assert_eq!(cert.len(), 2);
    }

    #[test]
    fn katok_estimates() {
        let b = TransitionMatrix::full_shift(2);
        let m = parry_measure(&b).unwrap();
        let e = katok_entropy_shift(&m, 10, 1.0, 0.1, 4000, 5).unwrap();
        assert!(e.separated_2eps <= e.cover && e.cover <= e.separated_eps);
        assert!((e.estimate - 2f64.ln()).abs() < 0.15);
        // identity map: cover count does not depend on n
        struct Id;
        impl MapHandle for Id {
            fn step(&self, x: Point) -> Result<Point> {
                Ok(x)
            }
            fn dstep(&self, _x: Point) -> Result<crate::shadowing::Mat2> {
                Ok([[1.0, 0.0], [0.0, 1.0]])
            }
            fn splitting(&self, _x: Point) -> ([f64; 2], [f64; 2]) {
                ([1.0, 0.0], [0.0, 1.0])
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let starts: Vec<Point> = (0..300).map(|_| [rng.gen(), rng.gen()]).collect();
        let covers: Vec<usize> = [2, 8]
            .iter()
            .map(|&n| {
                let o = sample_orbits(&Id, &starts, n).unwrap();
                katok_entropy_estimate(&BowenSamples::Orbits(o), n, 0.2, 0.1).unwrap().cover
            })
            .collect();
        assert_eq!(covers[0], covers[1]);
    }
}
