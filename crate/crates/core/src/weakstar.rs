//! Truncated weak* metric, empirical measures and continuity radii.

use std::collections::HashMap;
use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sft::{cylinder_measure, MarkovMeasure, TransitionMatrix, Word};
use crate::toral::Point;

pub const DEFAULT_IMAX: usize = 64;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Space {
    Torus2,
    Shift(TransitionMatrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TestFn {
    Constant,
    Cos([i64; 2]),
    Sin([i64; 2]),
    Cylinder(Word),
}

impl TestFn {
    pub fn eval_torus(&self, x: Point) -> f64 {
        match self {
            TestFn::Constant => 1.0,
            TestFn::Cos(m) => (TAU * (m[0] as f64 * x[0] + m[1] as f64 * x[1])).cos(),
            TestFn::Sin(m) => (TAU * (m[0] as f64 * x[0] + m[1] as f64 * x[1])).sin(),
            TestFn::Cylinder(_) => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFamily {
    pub space: Space,
    pub funcs: Vec<TestFn>,
    pub norms: Vec<f64>,
    /// Lipschitz constants for the torus max-metric or the cylinder metric
    /// 2^{-first disagreement}.
    pub lips: Vec<f64>,
}

/// Frequency vectors up to sign, ordered by |m1|+|m2| then lexicographically.
fn frequencies() -> impl Iterator<Item = [i64; 2]> {
    (1i64..).flat_map(|r| {
        let mut ms: Vec<[i64; 2]> = (-r..=r)
            .flat_map(|a| {
                let b = r - a.abs();
                if b == 0 {
                    vec![[a, 0]]
                } else {
                    vec![[a, -b], [a, b]]
                }
            })
            .filter(|m| m[0] > 0 || (m[0] == 0 && m[1] > 0))
            .collect();
        ms.sort();
        ms.into_iter()
    })
}

fn admissible_words(b: &TransitionMatrix) -> impl Iterator<Item = Word> + '_ {
    let l = b.size();
    let mut layer: Vec<Word> = (0..l).map(|a| vec![a]).collect();
    std::iter::from_fn(move || {
        let out = layer.clone();
        layer = layer
            .iter()
            .flat_map(|w| {
                let last = *w.last().unwrap();
                b.successors(last)
                    .map(|c| {
                        let mut v = w.clone();
                        v.push(c);
                        v
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        Some(out)
    })
    .flatten()
}

pub fn build_test_family(space: Space, imax: usize) -> Result<TestFamily> {
    if imax == 0 {
        return Err(Error::Invalid("imax must be at least 1".into()));
    }
    let mut funcs = Vec::with_capacity(imax);
    let mut lips = Vec::with_capacity(imax);
    match &space {
        Space::Torus2 => {
            funcs.push(TestFn::Constant);
            lips.push(0.0);
            for m in frequencies() {
                if funcs.len() >= imax {
                    break;
                }
                // |m·Δ| ≤ (|m1|+|m2|)·max|Δ_i| for the max-metric
                let lip = TAU * (m[0].abs() + m[1].abs()) as f64;
                for f in [TestFn::Cos(m), TestFn::Sin(m)] {
                    if funcs.len() < imax {
                        funcs.push(f);
                        lips.push(lip);
                    }
                }
            }
        }
        Space::Shift(b) => {
            for w in admissible_words(b).take(imax) {
                lips.push(2f64.powi(w.len() as i32 - 1));
                funcs.push(TestFn::Cylinder(w));
            }
        }
    }
    let norms = vec![1.0; funcs.len()];
    Ok(TestFamily { space, funcs, norms, lips })
}

impl TestFamily {
    pub fn imax(&self) -> usize {
        self.funcs.len()
    }

    /// Weight 1/(2^{i+1}‖φ_i‖) for 1-based i.
    pub fn weight(&self, idx: usize) -> f64 {
        1.0 / (2f64.powi(idx as i32 + 2) * self.norms[idx])
    }

    /// Σ_i |a_i − b_i|·weight(i) for precomputed integral vectors.
    pub fn distance_from_integrals(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).enumerate().map(|(i, (x, y))| (x - y).abs() * self.weight(i)).sum()
    }

    fn alphabet(&self) -> Option<usize> {
        match &self.space {
            Space::Shift(b) => Some(b.size()),
            Space::Torus2 => None,
        }
    }

    /// Base-l codes of the cylinder words, grouped by word length.
    pub fn cylinder_index(&self) -> CylinderIndex {
        let l = self.alphabet().unwrap_or(1) as u64;
        let mut by_len: Vec<(usize, HashMap<u64, usize>)> = Vec::new();
        for (i, f) in self.funcs.iter().enumerate() {
            if let TestFn::Cylinder(w) = f {
                let code = word_code(w, l);
                match by_len.iter_mut().find(|(len, _)| *len == w.len()) {
                    Some((_, m)) => {
                        m.insert(code, i);
                    }
                    None => by_len.push((w.len(), HashMap::from([(code, i)]))),
                }
            }
        }
        CylinderIndex { base: l, by_len, imax: self.imax() }
    }
}

pub fn word_code(w: &[usize], base: u64) -> u64 {
    w.iter().fold(0u64, |acc, &a| acc * base + a as u64)
}

/// Lookup from a position in a word to the test functions whose cylinder
/// contains the shifted word.
#[derive(Debug, Clone)]
pub struct CylinderIndex {
    base: u64,
    by_len: Vec<(usize, HashMap<u64, usize>)>,
    imax: usize,
}

impl CylinderIndex {
    pub fn imax(&self) -> usize {
        self.imax
    }

    /// Calls `hit(i)` for every cylinder φ_i with φ_i(σ^pos w) = 1. Cylinders
    /// running past the end of `w` count as misses.
    pub fn for_each_hit(&self, w: &[usize], pos: usize, mut hit: impl FnMut(usize)) {
        for (len, map) in &self.by_len {
            if pos + len <= w.len() {
                if let Some(&i) = map.get(&word_code(&w[pos..pos + len], self.base)) {
                    hit(i);
                }
            }
        }
    }

    pub fn counts(&self, w: &[usize], start: usize, n: usize) -> Vec<u64> {
        let mut c = vec![0u64; self.imax];
        for pos in start..start + n {
            self.for_each_hit(w, pos, |i| c[i] += 1);
        }
        c
    }
}

/// Uniform measure on the first `n` points of an orbit, or on the first `n`
/// shifts of a symbolic window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EmpiricalMeasure {
    Torus(Vec<Point>),
    Shift { word: Word, n: usize },
}

impl EmpiricalMeasure {
    pub fn len(&self) -> usize {
        match self {
            EmpiricalMeasure::Torus(p) => p.len(),
            EmpiricalMeasure::Shift { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn empirical_measure(orbit: &[Point], n: usize) -> Result<EmpiricalMeasure> {
    if n == 0 || orbit.len() < n {
        return Err(Error::TooShort { have: orbit.len(), need: n.max(1) });
    }
    Ok(EmpiricalMeasure::Torus(orbit[..n].to_vec()))
}

/// Empirical measure of σ^0 w, …, σ^{n−1} w; symbols past the end of `word`
/// are treated as unknown (cylinders reaching them are not hit).
pub fn empirical_shift(word: &[usize], n: usize) -> Result<EmpiricalMeasure> {
    if n == 0 || word.len() < n {
        return Err(Error::TooShort { have: word.len(), need: n.max(1) });
    }
    Ok(EmpiricalMeasure::Shift { word: word.to_vec(), n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeasureHandle {
    Empirical(EmpiricalMeasure),
    Markov(MarkovMeasure),
    /// Lebesgue measure on the torus.
    Haar,
    Combination(Vec<(f64, MeasureHandle)>),
}

impl MeasureHandle {
    pub fn combination(parts: Vec<(f64, MeasureHandle)>) -> Result<Self> {
        let total: f64 = parts.iter().map(|(a, _)| a).sum();
        if parts.is_empty() || parts.iter().any(|(a, _)| !(*a > 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid("combination weights must be positive and sum to 1".into()));
        }
        Ok(MeasureHandle::Combination(parts))
    }

    /// ∫φ_i for every function of the family.
    pub fn integrals(&self, fam: &TestFamily) -> Result<Vec<f64>> {
        let k = fam.imax();
        match (self, &fam.space) {
            (MeasureHandle::Empirical(EmpiricalMeasure::Torus(pts)), Space::Torus2) => {
                let partials: Vec<Vec<f64>> = pts
                    .par_chunks(CHUNK)
                    .map(|c| {
                        let mut s = vec![0.0; k];
                        for &x in c {
                            for (i, f) in fam.funcs.iter().enumerate() {
                                s[i] += f.eval_torus(x);
                            }
                        }
                        s
                    })
                    .collect();
                let mut s = vec![0.0; k];
                for p in partials {
                    for i in 0..k {
                        s[i] += p[i];
                    }
                }
                let n = pts.len() as f64;
                Ok(s.into_iter().map(|v| v / n).collect())
            }
            (MeasureHandle::Empirical(EmpiricalMeasure::Shift { word, n }), Space::Shift(b)) => {
                if word.iter().any(|&a| a >= b.size()) {
                    return Err(Error::SpaceMismatch);
                }
                let idx = fam.cylinder_index();
                let c = idx.counts(word, 0, *n);
                Ok(c.into_iter().map(|v| v as f64 / *n as f64).collect())
            }
            (MeasureHandle::Markov(m), Space::Shift(b)) => {
                if m.size() != b.size() {
                    return Err(Error::SpaceMismatch);
                }
                fam.funcs
                    .iter()
                    .map(|f| match f {
                        TestFn::Cylinder(w) => cylinder_measure(m, w),
                        _ => Err(Error::SpaceMismatch),
                    })
                    .collect()
            }
            (MeasureHandle::Haar, Space::Torus2) => Ok(fam
                .funcs
                .iter()
                .map(|f| if *f == TestFn::Constant { 1.0 } else { 0.0 })
                .collect()),
            (MeasureHandle::Combination(parts), _) => {
                let mut s = vec![0.0; k];
                for (a, h) in parts {
                    for (acc, v) in s.iter_mut().zip(h.integrals(fam)?) {
                        *acc += a * v;
                    }
                }
                Ok(s)
            }
            _ => Err(Error::SpaceMismatch),
        }
    }
}

/// Truncated D(μ, ν); the untruncated value lies in [D, D + 2^{-imax}].
pub fn weakstar_distance(mu: &MeasureHandle, nu: &MeasureHandle, fam: &TestFamily) -> Result<f64> {
    Ok(fam.distance_from_integrals(&mu.integrals(fam)?, &nu.integrals(fam)?))
}

/// b_k = min over non-constant φ_j, j ≤ k, of ‖φ_j‖/(k·Lip φ_j); +∞ if all
/// of φ_1..φ_k are constant.
pub fn continuity_radius(fam: &TestFamily, k: usize) -> Result<f64> {
    if k == 0 || k > fam.imax() {
        return Err(Error::Invalid(format!("k = {k} outside 1..={}", fam.imax())));
    }
    Ok((0..k)
        .filter(|&j| fam.lips[j] > 0.0)
        .map(|j| fam.norms[j] / (k as f64 * fam.lips[j]))
        .fold(f64::INFINITY, f64::min))
}
