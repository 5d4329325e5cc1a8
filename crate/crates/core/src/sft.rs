//! Subshifts of finite type: admissibility, mixing, Perron data, Markov measures.
//!
//! Symbols are 0-based indices `0..l` throughout the library.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Word = Vec<usize>;

/// 0/1 incidence matrix of a subshift of finite type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct TransitionMatrix {
    rows: Vec<Vec<u8>>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    size: usize,
    rows: Vec<Vec<u8>>,
}

impl TryFrom<MatrixRepr> for TransitionMatrix {
    type Error = Error;
    fn try_from(r: MatrixRepr) -> Result<Self> {
        if r.rows.len() != r.size {
            return Err(Error::BadMatrix);
        }
        TransitionMatrix::new(r.rows)
    }
}

impl From<TransitionMatrix> for MatrixRepr {
    fn from(b: TransitionMatrix) -> Self {
        MatrixRepr { size: b.size(), rows: b.rows }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MixingReport {
    pub irreducible: bool,
    pub aperiodic: bool,
    pub period: usize,
}

impl TransitionMatrix {
    /// Builds a matrix after checking shape and 0/1 entries. Dead symbols are
    /// allowed here and rejected by [`validate_transition_matrix`].
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let l = rows.len();
        if l == 0 || rows.iter().any(|r| r.len() != l || r.iter().any(|&b| b > 1)) {
            return Err(Error::BadMatrix);
        }
        Ok(TransitionMatrix { rows })
    }

    pub fn full_shift(l: usize) -> Self {
        TransitionMatrix { rows: vec![vec![1; l]; l] }
    }

    pub fn golden_mean() -> Self {
        TransitionMatrix { rows: vec![vec![1, 1], vec![1, 0]] }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    #[inline]
    pub fn allowed(&self, i: usize, j: usize) -> bool {
        self.rows[i][j] == 1
    }

    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[i].iter().enumerate().filter(|(_, &b)| b == 1).map(|(j, _)| j)
    }

    /// Index of the first inadmissible transition, if any.
    pub fn first_violation(&self, w: &[usize]) -> Option<usize> {
        w.windows(2).position(|p| !self.allowed(p[0], p[1]))
    }

    pub fn is_admissible(&self, w: &[usize]) -> bool {
        w.iter().all(|&a| a < self.size()) && self.first_violation(w).is_none()
    }

    /// The edge (2-block) presentation: states are allowed pairs `(i,j)` in
    /// row-major order, with `(i,j) -> (j,k)` allowed.
    pub fn edge_shift(&self) -> (TransitionMatrix, Vec<(usize, usize)>) {
        let l = self.size();
        let edges: Vec<(usize, usize)> = (0..l)
            .flat_map(|i| (0..l).map(move |j| (i, j)))
            .filter(|&(i, j)| self.allowed(i, j))
            .collect();
        let rows = edges
            .iter()
            .map(|&(_, j)| edges.iter().map(|&(a, _)| u8::from(a == j)).collect())
            .collect();
        (TransitionMatrix { rows }, edges)
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(x).filter(|(&b, _)| b == 1).map(|(_, &v)| v).sum())
            .collect()
    }

    fn vecmat(&self, x: &[f64]) -> Vec<f64> {
        let l = self.size();
        let mut out = vec![0.0; l];
        for (i, r) in self.rows.iter().enumerate() {
            for j in 0..l {
                if r[j] == 1 {
                    out[j] += x[i];
                }
            }
        }
        out
    }
}

fn bfs_dist(b: &TransitionMatrix, from: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; b.size()];
    dist[from] = Some(0);
    let mut q = VecDeque::from([from]);
    while let Some(i) = q.pop_front() {
        let d = dist[i].unwrap();
        for j in b.successors(i) {
            if dist[j].is_none() {
                dist[j] = Some(d + 1);
                q.push_back(j);
            }
        }
    }
    dist
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Irreducibility by strong connectivity and period as the gcd of cycle
/// lengths, via BFS levels: for every edge `i -> j`, `level(i) + 1 - level(j)`
/// is a multiple of the period.
pub fn validate_transition_matrix(b: &TransitionMatrix) -> Result<MixingReport> {
    let l = b.size();
    for i in 0..l {
        if b.rows[i].iter().all(|&x| x == 0) || (0..l).all(|r| b.rows[r][i] == 0) {
            return Err(Error::ZeroRowOrColumn(i));
        }
    }
    let level = bfs_dist(b, 0);
    let mut rev = b.rows.clone();
    for i in 0..l {
        for j in 0..l {
            rev[i][j] = b.rows[j][i];
        }
    }
    let back = bfs_dist(&TransitionMatrix { rows: rev }, 0);
    let irreducible = level.iter().all(Option::is_some) && back.iter().all(Option::is_some);
    if !irreducible {
        return Ok(MixingReport { irreducible, aperiodic: false, period: 0 });
    }
    let mut g = 0;
    for i in 0..l {
        for j in b.successors(i) {
            let (li, lj) = (level[i].unwrap() as i64, level[j].unwrap() as i64);
            g = gcd(g, (li + 1 - lj).unsigned_abs() as usize);
        }
    }
    Ok(MixingReport { irreducible, aperiodic: g == 1, period: g })
}

fn require_mixing(b: &TransitionMatrix) -> Result<()> {
    let r = validate_transition_matrix(b)?;
    if r.irreducible && r.aperiodic {
        Ok(())
    } else {
        Err(Error::NotMixing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerronData {
    pub lambda: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// |Σ u_i v_i − 1| after rescaling.
    pub normalization_residual: f64,
}

pub const PERRON_TOL: f64 = 1e-13;
pub const PERRON_MAX_ITER: usize = 100_000;

fn power_iterate(l: usize, apply: impl Fn(&[f64]) -> Vec<f64>, max_iter: usize) -> Result<(f64, Vec<f64>)> {
    let mut x = vec![1.0 / l as f64; l];
    let mut lam_prev = f64::NAN;
    for _ in 0..max_iter {
        let y = apply(&x);
        let s: f64 = y.iter().sum();
        let y: Vec<f64> = y.iter().map(|v| v / s).collect();
        let dx = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = y;
        if (s - lam_prev).abs() < PERRON_TOL * s && dx < PERRON_TOL {
            return Ok((s, x));
        }
        lam_prev = s;
    }
    let y = apply(&x);
    let res = y.iter().zip(&x).map(|(a, b)| (a - lam_prev * b).abs()).fold(0.0, f64::max);
    Err(Error::NoConvergence { iterations: max_iter, residual: res })
}

pub fn perron_eigendata(b: &TransitionMatrix) -> Result<PerronData> {
    perron_eigendata_with(b, PERRON_MAX_ITER)
}

pub fn perron_eigendata_with(b: &TransitionMatrix, max_iter: usize) -> Result<PerronData> {
    require_mixing(b)?;
    let l = b.size();
    let (lambda, v) = power_iterate(l, |x| b.matvec(x), max_iter)?;
    let (_, u) = power_iterate(l, |x| b.vecmat(x), max_iter)?;
    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    let u: Vec<f64> = u.iter().map(|x| x / dot).collect();
    let check: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    Ok(PerronData { lambda, u, v, normalization_residual: (check - 1.0).abs() })
}

/// Stationary Markov chain `(p, P)` on the symbols of an SFT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovMeasure {
    pub p: Vec<f64>,
    #[serde(rename = "P")]
    pub transition: Vec<Vec<f64>>,
}

impl MarkovMeasure {
    /// Checks the row-stochastic and stationarity invariants, and
    /// compatibility with `b` when given.
    pub fn new(p: Vec<f64>, transition: Vec<Vec<f64>>, b: Option<&TransitionMatrix>) -> Result<Self> {
        let m = MarkovMeasure { p, transition };
        m.validate(b)?;
        Ok(m)
    }

    /// Stationary measure of a row-stochastic matrix, by power iteration on the
    /// lazy chain `(I + P)/2`, which shares the stationary vector and is aperiodic.
    pub fn from_stochastic(transition: Vec<Vec<f64>>) -> Result<Self> {
        let l = transition.len();
        if l == 0 || transition.iter().any(|r| r.len() != l) {
            return Err(Error::InvalidMeasure("non-square P".into()));
        }
        let step = |x: &[f64]| {
            let mut y: Vec<f64> = x.iter().map(|v| 0.5 * v).collect();
            for i in 0..l {
                for j in 0..l {
                    y[j] += 0.5 * x[i] * transition[i][j];
                }
            }
            y
        };
        let mut x = vec![1.0 / l as f64; l];
        let mut converged = false;
        for _ in 0..PERRON_MAX_ITER {
            let y = step(&x);
            let s: f64 = y.iter().sum();
            let y: Vec<f64> = y.iter().map(|v| v / s).collect();
            let dx = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            x = y;
            if dx < 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence { iterations: PERRON_MAX_ITER, residual: f64::NAN });
        }
        MarkovMeasure::new(x, transition, None)
    }

    pub fn size(&self) -> usize {
        self.p.len()
    }

    pub fn validate(&self, b: Option<&TransitionMatrix>) -> Result<()> {
        let l = self.p.len();
        let bad = |s: &str| Err(Error::InvalidMeasure(s.to_string()));
        if l == 0 || self.transition.len() != l || self.transition.iter().any(|r| r.len() != l) {
            return bad("shape");
        }
        if self.p.iter().chain(self.transition.iter().flatten()).any(|&x| !(x >= 0.0) || x > 1.0 + 1e-12) {
            return bad("entries outside [0,1]");
        }
        if (self.p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return bad("p does not sum to 1");
        }
        if self.transition.iter().any(|r| (r.iter().sum::<f64>() - 1.0).abs() > 1e-12) {
            return bad("P is not row-stochastic");
        }
        if stationarity_defect(self) > 1e-10 {
            return bad("pP != p");
        }
        if let Some(b) = b {
            if b.size() != l {
                return bad("size differs from transition matrix");
            }
            for i in 0..l {
                for j in 0..l {
                    if self.transition[i][j] > 0.0 && !b.allowed(i, j) {
                        return bad("P charges a forbidden transition");
                    }
                }
            }
        }
        Ok(())
    }

    /// Support graph of `P` as a 0/1 matrix.
    pub fn support(&self) -> TransitionMatrix {
        TransitionMatrix {
            rows: self.transition.iter().map(|r| r.iter().map(|&x| u8::from(x > 0.0)).collect()).collect(),
        }
    }
}

/// max_j |(pP)_j − p_j|.
pub fn stationarity_defect(m: &MarkovMeasure) -> f64 {
    let l = m.size();
    (0..l)
        .map(|j| ((0..l).map(|i| m.p[i] * m.transition[i][j]).sum::<f64>() - m.p[j]).abs())
        .fold(0.0, f64::max)
}

pub fn parry_measure(b: &TransitionMatrix) -> Result<MarkovMeasure> {
    let pd = perron_eigendata(b)?;
    let l = b.size();
    let p: Vec<f64> = (0..l).map(|i| pd.u[i] * pd.v[i]).collect();
    let transition = (0..l)
        .map(|i| {
            (0..l)
                .map(|j| if b.allowed(i, j) { pd.v[j] / (pd.lambda * pd.v[i]) } else { 0.0 })
                .collect()
        })
        .collect();
    MarkovMeasure::new(p, transition, Some(b))
}

/// μ([w_0 … w_n]) = p_{w_0} P_{w_0 w_1} ⋯ P_{w_{n-1} w_n}.
pub fn cylinder_measure(m: &MarkovMeasure, w: &[usize]) -> Result<f64> {
    let l = m.size();
    if let Some(&s) = w.iter().find(|&&s| s >= l) {
        return Err(Error::SymbolOutOfRange { symbol: s, size: l });
    }
    let Some(&first) = w.first() else {
        return Err(Error::Invalid("empty word".into()));
    };
    Ok(w.windows(2).fold(m.p[first], |acc, e| acc * m.transition[e[0]][e[1]]))
}

/// Entropy rate in nats, with 0·log 0 = 0.
pub fn markov_entropy(m: &MarkovMeasure) -> f64 {
    let mut h = 0.0;
    for (pi, row) in m.p.iter().zip(&m.transition) {
        let hr: f64 = row.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
        h += pi * hr;
    }
    h
}

fn draw(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let r: f64 = rng.gen::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if r < acc {
                return i;
            }
        }
    }
    last
}

pub fn sample_itinerary(m: &MarkovMeasure, len: usize, seed: u64) -> Word {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_itinerary_rng(m, len, &mut rng)
}

pub fn sample_itinerary_rng(m: &MarkovMeasure, len: usize, rng: &mut ChaCha8Rng) -> Word {
    let mut w = Vec::with_capacity(len);
    if len == 0 {
        return w;
    }
    w.push(draw(rng, &m.p));
    for _ in 1..len {
        let last = *w.last().unwrap();
        w.push(draw(rng, &m.transition[last]));
    }
    w
}

/// Continues a chain from a given state for `len` further symbols.
pub fn continue_itinerary(m: &MarkovMeasure, from: usize, len: usize, rng: &mut ChaCha8Rng) -> Word {
    let mut w = Vec::with_capacity(len);
    let mut cur = from;
    for _ in 0..len {
        cur = draw(rng, &m.transition[cur]);
        w.push(cur);
    }
    w
}

/// Shortest admissible word of length ≥ 2 from `j1` to `j2`.
pub fn connecting_word(b: &TransitionMatrix, j1: usize, j2: usize) -> Result<Word> {
    require_mixing(b)?;
    let l = b.size();
    for s in [j1, j2] {
        if s >= l {
            return Err(Error::SymbolOutOfRange { symbol: s, size: l });
        }
    }
    // BFS over states reached after at least one step; `prev[j] == None` marks
    // the first layer, whose predecessor is j1 itself.
    let mut prev: Vec<Option<usize>> = vec![None; l];
    let mut seen = vec![false; l];
    let mut q = VecDeque::new();
    for j in b.successors(j1) {
        seen[j] = true;
        q.push_back(j);
    }
    while !seen[j2] {
        let Some(i) = q.pop_front() else {
            return Err(Error::NotMixing);
        };
        for j in b.successors(i) {
            if !seen[j] {
                seen[j] = true;
                prev[j] = Some(i);
                q.push_back(j);
            }
        }
    }
    let mut path = vec![j2];
    let mut cur = j2;
    while let Some(p) = prev[cur] {
        path.push(p);
        cur = p;
    }
    path.push(j1);
    path.reverse();
    Ok(path)
}

/// L_0: the longest shortest connecting word over all ordered pairs.
pub fn max_connecting_length(b: &TransitionMatrix) -> Result<usize> {
    let l = b.size();
    let mut best = 0;
    for i in 0..l {
        for j in 0..l {
            best = best.max(connecting_word(b, i, j)?.len());
        }
    }
    Ok(best)
}

/// An admissible word of exactly `len` symbols starting at `from` and ending
/// at `to` (len ≥ 2), lexicographically smallest among such words.
pub fn bridge_word(b: &TransitionMatrix, from: usize, to: usize, len: usize) -> Result<Word> {
    let l = b.size();
    let infeasible = Error::BridgeInfeasible { from, to, len };
    if len < 2 || from >= l || to >= l {
        return Err(infeasible);
    }
    // reach[r][i]: can reach `to` from i in exactly r steps.
    let mut reach = vec![vec![false; l]; len];
    reach[0][to] = true;
    for r in 1..len {
        for i in 0..l {
            reach[r][i] = b.successors(i).any(|j| reach[r - 1][j]);
        }
    }
    if !reach[len - 1][from] {
        return Err(infeasible);
    }
    let mut w = vec![from];
    let mut cur = from;
    for r in (0..len - 1).rev() {
        cur = b.successors(cur).find(|&j| reach[r][j]).unwrap();
        w.push(cur);
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn perm() -> TransitionMatrix {
        TransitionMatrix::new(vec![vec![0, 1], vec![1, 0]]).unwrap()
    }

    #[test]
    fn mixing_flags() {
        let r = validate_transition_matrix(&TransitionMatrix::full_shift(2)).unwrap();
        assert_eq!(r, MixingReport { irreducible: true, aperiodic: true, period: 1 });
        let r = validate_transition_matrix(&perm()).unwrap();
        assert_eq!(r, MixingReport { irreducible: true, aperiodic: false, period: 2 });
        let dead = TransitionMatrix::new(vec![vec![1, 1], vec![0, 0]]).unwrap();
        assert_eq!(validate_transition_matrix(&dead), Err(Error::ZeroRowOrColumn(1)));
        let reducible = TransitionMatrix::new(vec![vec![1, 1], vec![0, 1]]).unwrap();
        assert!(!validate_transition_matrix(&reducible).unwrap().irreducible);
    }

    #[test]
    fn golden_mean_lambda_matches_characteristic_root() {
        let pd = perron_eigendata(&TransitionMatrix::golden_mean()).unwrap();
        // root of x^2 - x - 1
        let root = (1.0 + 5f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(pd.lambda, root, epsilon = 1e-10);
        assert!(pd.normalization_residual < 1e-12);
        assert_eq!(perron_eigendata(&perm()), Err(Error::NotMixing));
    }

    #[test]
    fn full_shift_perron() {
        let pd = perron_eigendata(&TransitionMatrix::full_shift(2)).unwrap();
        assert_abs_diff_eq!(pd.lambda, 2.0, epsilon = 1e-12);
        for i in 0..2 {
            assert_abs_diff_eq!(pd.u[i] * pd.v[i], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn golden_parry() {
        let m = parry_measure(&TransitionMatrix::golden_mean()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(m.transition[0][0], 1.0 / phi, epsilon = 1e-12);
        assert_abs_diff_eq!(m.transition[0][1], 1.0 / (phi * phi), epsilon = 1e-12);
        assert_abs_diff_eq!(m.transition[1][0], 1.0, epsilon = 1e-12);
        assert_eq!(m.transition[1][1], 0.0);
        // p ∝ (φ², 1)
        assert_abs_diff_eq!(m.p[0], phi * phi / (phi * phi + 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(m.p[0], 0.7236, epsilon = 1e-4);
        assert!(stationarity_defect(&m) < 1e-12);
        assert_abs_diff_eq!(markov_entropy(&m), phi.ln(), epsilon = 1e-10);
        assert_abs_diff_eq!(markov_entropy(&m), 0.481212, epsilon = 1e-6);
        assert_eq!(parry_measure(&perm()), Err(Error::NotMixing));
    }

    #[test]
    fn cylinders() {
        let g = parry_measure(&TransitionMatrix::golden_mean()).unwrap();
        assert_eq!(cylinder_measure(&g, &[1, 1]).unwrap(), 0.0);
        assert_abs_diff_eq!(cylinder_measure(&g, &[0, 0]).unwrap(), 1.0 / 5f64.sqrt(), epsilon = 1e-12);
        let total: f64 = [[0, 0], [0, 1], [1, 0], [1, 1]].iter().map(|w| cylinder_measure(&g, w).unwrap()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        let f = parry_measure(&TransitionMatrix::full_shift(2)).unwrap();
        assert_abs_diff_eq!(cylinder_measure(&f, &[0, 1, 0]).unwrap(), 0.125, epsilon = 1e-12);
        assert!(matches!(cylinder_measure(&f, &[2]), Err(Error::SymbolOutOfRange { .. })));
    }

    #[test]
    fn entropy_of_deterministic_chain_is_zero() {
        let m = MarkovMeasure::new(vec![0.5, 0.5], vec![vec![0.0, 1.0], vec![1.0, 0.0]], None).unwrap();
        assert_eq!(markov_entropy(&m), 0.0);
        let f = parry_measure(&TransitionMatrix::full_shift(2)).unwrap();
        assert_abs_diff_eq!(markov_entropy(&f), 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn sampling() {
        let g = parry_measure(&TransitionMatrix::golden_mean()).unwrap();
        let b = TransitionMatrix::golden_mean();
        let w = sample_itinerary(&g, 500, 7);
        assert!(b.is_admissible(&w));
        assert_eq!(w, sample_itinerary(&g, 500, 7));
        let det = MarkovMeasure::new(vec![0.5, 0.5], vec![vec![0.0, 1.0], vec![1.0, 0.0]], None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(continue_itinerary(&det, 0, 5, &mut rng), vec![1, 0, 1, 0, 1]);
    }

    #[test]
    fn first_symbol_chi_square() {
        // 1 degree of freedom, critical value at 0.01 is 6.635
        let g = parry_measure(&TransitionMatrix::golden_mean()).unwrap();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts = [0usize; 2];
        for _ in 0..n {
            counts[sample_itinerary_rng(&g, 1, &mut rng)[0]] += 1;
        }
        let chi2: f64 = (0..2)
            .map(|i| {
                let e = g.p[i] * n as f64;
                (counts[i] as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < 6.635, "chi2 = {chi2}");
    }

    #[test]
    fn connecting_words() {
        let f = TransitionMatrix::full_shift(2);
        assert_eq!(connecting_word(&f, 0, 1).unwrap(), vec![0, 1]);
        let g = TransitionMatrix::golden_mean();
        assert_eq!(connecting_word(&g, 1, 1).unwrap(), vec![1, 0, 1]);
        assert_eq!(connecting_word(&g, 0, 0).unwrap(), vec![0, 0]);
        assert_eq!(max_connecting_length(&g).unwrap(), 3);
        assert_eq!(connecting_word(&perm(), 0, 1), Err(Error::NotMixing));
    }

    #[test]
    fn bridges() {
        let g = TransitionMatrix::golden_mean();
        let w = bridge_word(&g, 1, 1, 5).unwrap();
        assert_eq!(w.len(), 5);
        assert_eq!((w[0], w[4]), (1, 1));
        assert!(g.is_admissible(&w));
        assert!(bridge_word(&g, 1, 1, 2).is_err());
    }

    #[test]
    fn edge_shift_of_golden_mean() {
        let (e, edges) = TransitionMatrix::golden_mean().edge_shift();
        assert_eq!(edges, vec![(0, 0), (0, 1), (1, 0)]);
        let pd = perron_eigendata(&e).unwrap();
        assert_abs_diff_eq!(pd.lambda, (1.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-10);
    }

    #[test]
    fn json_roundtrip() {
        let g = TransitionMatrix::golden_mean();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"size":2,"rows":[[1,1],[1,0]]}"#);
        assert_eq!(serde_json::from_str::<TransitionMatrix>(&s).unwrap(), g);
        assert!(serde_json::from_str::<TransitionMatrix>(r#"{"size":2,"rows":[[2,1],[1,0]]}"#).is_err());
    }
}
