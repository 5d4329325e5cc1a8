//! Hyperbolic automorphisms of the 2-torus, Markov partitions as validated
//! data, and the symbolic coding map.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Float, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sft::{perron_eigendata, TransitionMatrix, Word};

pub type Point = [f64; 2];

/// Reduces a point of the plane to the fundamental domain [0,1)².
pub fn wrap(x: Point) -> Point {
    x.map(|c| {
        let r = c - c.floor();
        if r >= 1.0 {
            0.0
        } else {
            r + 0.0
        }
    })
}

/// Minimal lift of `a − b`, each coordinate in [−1/2, 1/2].
pub fn torus_diff(a: Point, b: Point) -> Point {
    [0, 1].map(|i| {
        let d = a[i] - b[i];
        d - d.round()
    })
}

/// Max-metric on the torus.
pub fn torus_dist(a: Point, b: Point) -> f64 {
    let d = torus_diff(a, b);
    d[0].abs().max(d[1].abs())
}

type IMat = [[i128; 2]; 2];

fn imul(a: &IMat, b: &IMat) -> Option<IMat> {
    let mut c = [[0i128; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0].checked_mul(b[0][j])?.checked_add(a[i][1].checked_mul(b[1][j])?)?;
        }
    }
    Some(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToralAutomorphism {
    pub matrix: [[i64; 2]; 2],
    pub det: i64,
    /// Eigenvalue of modulus > 1 (signed).
    pub lambda_u: f64,
    pub lambda_s: f64,
    /// Unit eigenvectors with nonnegative first component.
    pub e_u: [f64; 2],
    pub e_s: [f64; 2],
}

fn unit_eigenvector(a: &[[i64; 2]; 2], mu: f64) -> [f64; 2] {
    let (p, q, r, s) = (a[0][0] as f64, a[0][1] as f64, a[1][0] as f64, a[1][1] as f64);
    let v = if q != 0.0 { [q, mu - p] } else { [mu - s, r] };
    let n = v[0].hypot(v[1]);
    let sign = if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) { -1.0 } else { 1.0 };
    [sign * v[0] / n, sign * v[1] / n]
}

pub fn toral_automorphism(matrix: [[i64; 2]; 2]) -> Result<ToralAutomorphism> {
    ToralAutomorphism::new(matrix)
}

impl ToralAutomorphism {
    pub fn new(matrix: [[i64; 2]; 2]) -> Result<Self> {
        let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
        let tr = matrix[0][0] + matrix[1][1];
        if det.abs() != 1 {
            return Err(Error::NotHyperbolic);
        }
        let disc = (tr * tr - 4 * det) as f64;
        if disc <= 0.0 || (det == 1 && tr.abs() <= 2) || (det == -1 && tr == 0) {
            return Err(Error::NotHyperbolic);
        }
        let sq = disc.sqrt();
        let t = tr as f64;
        // stable root via det/λ_u to avoid cancellation
        let lambda_u = if tr > 0 { (t + sq) / 2.0 } else { (t - sq) / 2.0 };
        let lambda_s = det as f64 / lambda_u;
        Ok(ToralAutomorphism {
            matrix,
            det,
            lambda_u,
            lambda_s,
            e_u: unit_eigenvector(&matrix, lambda_u),
            e_s: unit_eigenvector(&matrix, lambda_s),
        })
    }

    pub fn cat() -> Self {
        Self::new([[2, 1], [1, 1]]).unwrap()
    }

    pub fn golden() -> Self {
        Self::new([[1, 1], [1, 0]]).unwrap()
    }

    /// |λ_u|.
    pub fn expansion(&self) -> f64 {
        self.lambda_u.abs()
    }

    pub fn inverse_matrix(&self) -> [[i64; 2]; 2] {
        let [[a, b], [c, d]] = self.matrix;
        let k = self.det;
        [[k * d, -k * b], [-k * c, k * a]]
    }

    pub fn square(&self) -> Self {
        let m = self.matrix;
        let mut s = [[0i64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                s[i][j] = m[i][0] * m[0][j] + m[i][1] * m[1][j];
            }
        }
        Self::new(s).unwrap()
    }

    /// Linear action on a lift in ℝ² (no reduction).
    #[inline]
    pub fn act(&self, x: Point) -> Point {
        let m = &self.matrix;
        [m[0][0] as f64 * x[0] + m[0][1] as f64 * x[1], m[1][0] as f64 * x[0] + m[1][1] as f64 * x[1]]
    }

    /// One forward step in floating point, reduced mod ℤ².
    #[inline]
    pub fn step(&self, x: Point) -> Point {
        wrap(self.act(x))
    }

    pub fn derivative(&self) -> [[f64; 2]; 2] {
        self.matrix.map(|r| r.map(|v| v as f64))
    }

    /// Eigencoordinates (s, u) of a plane vector: v = s·e_s + u·e_u.
    pub fn to_eigen(&self, v: Point) -> [f64; 2] {
        let (es, eu) = (self.e_s, self.e_u);
        let det = es[0] * eu[1] - es[1] * eu[0];
        [(v[0] * eu[1] - v[1] * eu[0]) / det, (es[0] * v[1] - es[1] * v[0]) / det]
    }

    pub fn from_eigen(&self, c: [f64; 2]) -> Point {
        [c[0] * self.e_s[0] + c[1] * self.e_u[0], c[0] * self.e_s[1] + c[1] * self.e_u[1]]
    }

    fn int_power(&self, p: u32, inverse: bool) -> Option<IMat> {
        let base = if inverse { self.inverse_matrix() } else { self.matrix };
        let base = base.map(|r| r.map(i128::from));
        let mut acc: IMat = [[1, 0], [0, 1]];
        for _ in 0..p {
            acc = imul(&acc, &base)?;
        }
        Some(acc)
    }

    /// A^power·x mod ℤ². Integer powers up to |power| = 62 are formed exactly and
    /// applied to the exact binary value of x; longer powers are chained.
    pub fn apply(&self, x: Point, power: i64) -> Point {
        let mut x = wrap(x);
        let inverse = power < 0;
        let mut left = power.unsigned_abs();
        while left > 0 {
            let mut chunk = left.min(62) as u32;
            let m = loop {
                match self.int_power(chunk, inverse) {
                    Some(m) => break m,
                    None => chunk /= 2,
                }
            };
            x = apply_exact(&m, x);
            left -= chunk as u64;
        }
        x
    }
}

fn apply_exact(m: &IMat, x: Point) -> Point {
    // x_i = mant_i · 2^{exp_i}; bring both to the common denominator 2^e.
    let parts: Vec<(u64, i16)> = x.iter().map(|c| {
        let (mant, exp, _) = c.integer_decode();
        (mant, exp)
    }).collect();
    let e = parts.iter().filter(|p| p.0 != 0).map(|p| -(p.1 as i32)).max().unwrap_or(0).max(0);
    let nums: Vec<BigInt> = parts
        .iter()
        .map(|&(mant, exp)| if mant == 0 { BigInt::zero() } else { BigInt::from(mant) << ((exp as i32 + e) as usize) })
        .collect();
    let modulus = BigInt::from(1) << (e as usize);
    let mut out = [0.0; 2];
    for i in 0..2 {
        let y = BigInt::from(m[i][0]) * &nums[0] + BigInt::from(m[i][1]) * &nums[1];
        let mut r = y.mod_floor(&modulus);
        let mut scale = e;
        if scale > 120 {
            r >>= (scale - 120) as usize;
            scale = 120;
        }
        out[i] = r.to_f64().unwrap() * 2f64.powi(-scale);
    }
    wrap(out)
}

/// Rectangle data in eigencoordinates: corner c = c_s·e_s + c_u·e_u and the
/// rectangle {c + s·e_s + u·e_u : s ∈ [0,S], u ∈ [0,U]}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectData {
    pub corner: [f64; 2],
    pub lengths: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionData {
    pub matrix: [[i64; 2]; 2],
    pub rectangles: Vec<RectData>,
}

/// Affine chart change for an allowed transition i → j: points of R_i with
/// local coordinates (σ, υ) whose image lies in R_j have local coordinates
/// (λ_s σ + shift[0], λ_u υ + shift[1]) there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartShift {
    pub from: usize,
    pub to: usize,
    pub shift: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovPartition {
    pub map: ToralAutomorphism,
    pub rects: Vec<RectData>,
    pub transitions: TransitionMatrix,
    pub shifts: Vec<ChartShift>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub samples: usize,
    pub grid: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig { samples: 100_000, grid: 64, seed: 0x5eed, tol: 1e-9 }
    }
}

pub const DEFAULT_MARGIN: f64 = 1e-9;

/// Local coordinates of a torus point in a rectangle, over all lifts that
/// land within `tol` of the closed rectangle.
fn local_coords(map: &ToralAutomorphism, r: &RectData, x: Point, tol: f64) -> Vec<[f64; 2]> {
    let c = map.from_eigen(r.corner);
    let mut hits = Vec::new();
    for n0 in -3..=3 {
        for n1 in -3..=3 {
            let v = [x[0] + n0 as f64 - c[0], x[1] + n1 as f64 - c[1]];
            let e = map.to_eigen(v);
            if e[0] >= -tol && e[0] <= r.lengths[0] + tol && e[1] >= -tol && e[1] <= r.lengths[1] + tol {
                hits.push(e);
            }
        }
    }
    hits
}

/// Distance from local coordinates to the rectangle boundary (negative outside).
fn inset(r: &RectData, e: [f64; 2]) -> f64 {
    e[0].min(r.lengths[0] - e[0]).min(e[1]).min(r.lengths[1] - e[1])
}

impl MarkovPartition {
    pub fn size(&self) -> usize {
        self.rects.len()
    }

    pub fn s_max(&self) -> f64 {
        self.rects.iter().map(|r| r.lengths[0]).fold(0.0, f64::max)
    }

    pub fn u_max(&self) -> f64 {
        self.rects.iter().map(|r| r.lengths[1]).fold(0.0, f64::max)
    }

    /// Rectangles containing `x` at least `margin` inside, with local coordinates.
    pub fn locate(&self, x: Point, margin: f64) -> Vec<(usize, [f64; 2])> {
        let mut out = Vec::new();
        for (i, r) in self.rects.iter().enumerate() {
            for e in local_coords(&self.map, r, x, 0.0) {
                if inset(r, e) >= margin {
                    out.push((i, e));
                }
            }
        }
        out
    }

    pub fn shift(&self, from: usize, to: usize) -> Option<[f64; 2]> {
        self.shifts.iter().find(|c| c.from == from && c.to == to).map(|c| c.shift)
    }

    pub fn data(&self) -> PartitionData {
        PartitionData { matrix: self.map.matrix, rectangles: self.rects.clone() }
    }

    /// The refinement {R_i ∩ f⁻¹R_j}, a Markov partition for the square of the
    /// map whose transition matrix is the edge presentation of B.
    pub fn refine_for_square(&self) -> Result<MarkovPartition> {
        let lu = self.map.lambda_u;
        let mut rects = Vec::new();
        for i in 0..self.size() {
            for j in self.transitions.successors(i).collect::<Vec<_>>() {
                let d = self.shift(i, j).ok_or(Error::Invalid("missing chart shift".into()))?;
                let (a, b) = ((0.0 - d[1]) / lu, (self.rects[j].lengths[1] - d[1]) / lu);
                let (lo, hi) = (a.min(b).max(0.0), a.max(b).min(self.rects[i].lengths[1]));
                let r = self.rects[i];
                rects.push(RectData { corner: [r.corner[0], r.corner[1] + lo], lengths: [r.lengths[0], hi - lo] });
            }
        }
        let data = PartitionData { matrix: self.map.square().matrix, rectangles: rects };
        load_partition(&data, &ValidationConfig::default())
    }
}

pub fn load_partition(data: &PartitionData, cfg: &ValidationConfig) -> Result<MarkovPartition> {
    let map = ToralAutomorphism::new(data.matrix)?;
    let rects = data.rectangles.clone();
    if rects.is_empty() || rects.iter().any(|r| !(r.lengths[0] > 0.0 && r.lengths[1] > 0.0)) {
        return Err(Error::Invalid("rectangles need positive side lengths".into()));
    }
    let tol = cfg.tol;
    let l = rects.len();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pts: Vec<Point> = (0..cfg.samples).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();

    // overlap and coverage, first violation by sample index
    let bad = pts.par_iter().enumerate().find_map_first(|(_, &x)| {
        let mut interior = 0usize;
        let mut closed = 0usize;
        for r in &rects {
            for e in local_coords(&map, r, x, tol) {
                closed += 1;
                if inset(r, e) > tol {
                    interior += 1;
                }
            }
        }
        if interior > 1 {
            Some(Error::OverlapDetected(x[0], x[1]))
        } else if closed == 0 {
            Some(Error::CoverageGap(x[0], x[1]))
        } else {
            None
        }
    });
    if let Some(e) = bad {
        return Err(e);
    }

    // B and chart shifts from a stratified grid inside each rectangle
    let g = cfg.grid.max(4);
    let mut rows = vec![vec![0u8; l]; l];
    let mut shifts: Vec<ChartShift> = Vec::new();
    for (i, r) in rects.iter().enumerate() {
        for a in 0..g {
            for b in 0..g {
                let loc = [r.lengths[0] * (a as f64 + 0.5) / g as f64, r.lengths[1] * (b as f64 + 0.5) / g as f64];
                let c = map.from_eigen(r.corner);
                let off = map.from_eigen(loc);
                let x = wrap([c[0] + off[0], c[1] + off[1]]);
                let y = map.apply(x, 1);
                for (j, rj) in rects.iter().enumerate() {
                    for e in local_coords(&map, rj, y, 0.0) {
                        if inset(rj, e) <= tol {
                            continue;
                        }
                        rows[i][j] = 1;
                        let shift = [e[0] - map.lambda_s * loc[0], e[1] - map.lambda_u * loc[1]];
                        match shifts.iter().find(|s| s.from == i && s.to == j) {
                            None => shifts.push(ChartShift { from: i, to: j, shift }),
                            Some(s) => {
                                if (s.shift[0] - shift[0]).abs() > 1e-7 || (s.shift[1] - shift[1]).abs() > 1e-7 {
                                    return Err(Error::MarkovViolation {
                                        x: x[0],
                                        y: x[1],
                                        detail: format!("R{i} ∩ f⁻¹R{j} is disconnected"),
                                    });
                                }
                            }
                        }
                        // unstable fibre must stretch across R_j, stable fibre must map inside
                        let u_ends = [shift[1], map.lambda_u * r.lengths[1] + shift[1]];
                        let s_ends = [shift[0], map.lambda_s * r.lengths[0] + shift[0]];
                        let (ul, uh) = (u_ends[0].min(u_ends[1]), u_ends[0].max(u_ends[1]));
                        let (sl, sh) = (s_ends[0].min(s_ends[1]), s_ends[0].max(s_ends[1]));
                        if ul > tol || uh < rj.lengths[1] - tol {
                            return Err(Error::MarkovViolation {
                                x: x[0],
                                y: x[1],
                                detail: format!("unstable fibre of R{i} does not cross R{j}"),
                            });
                        }
                        if sl < -tol || sh > rj.lengths[0] + tol {
                            return Err(Error::MarkovViolation {
                                x: x[0],
                                y: x[1],
                                detail: format!("stable fibre of R{i} leaves R{j}"),
                            });
                        }
                    }
                }
            }
        }
    }
    let transitions = TransitionMatrix::new(rows)?;
    shifts.sort_by_key(|s| (s.from, s.to));

    let mut warnings = Vec::new();
    let origin_inside = rects.iter().any(|r| local_coords(&map, r, [0.0, 0.0], 0.0).iter().any(|&e| inset(r, e) > tol));
    if !origin_inside {
        warnings.push("fixed point (0,0) lies on the boundary of the partition".to_string());
    }
    let pd = perron_eigendata(&transitions)?;
    if (pd.lambda.ln() - map.expansion().ln()).abs() > 1e-9 {
        return Err(Error::MarkovViolation {
            x: f64::NAN,
            y: f64::NAN,
            detail: format!("log λ(B) = {} differs from log λ_u = {}", pd.lambda.ln(), map.expansion().ln()),
        });
    }
    Ok(MarkovPartition { map, rects, transitions, shifts, warnings })
}

/// Partition data shipped with the crate for A = [[1,1],[1,0]].
pub const GOLDEN_PARTITION_JSON: &str = include_str!("../data/golden_partition.json");

pub fn golden_partition() -> MarkovPartition {
    let data: PartitionData = serde_json::from_str(GOLDEN_PARTITION_JSON).expect("shipped partition parses");
    load_partition(&data, &ValidationConfig::default()).expect("shipped partition validates")
}

/// A finite piece of an itinerary: `symbols[zero]` is the symbol at time 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Itinerary {
    pub symbols: Word,
    pub zero: usize,
}

impl Itinerary {
    pub fn new(symbols: Word, zero: usize) -> Self {
        Itinerary { symbols, zero }
    }

    pub fn n_minus(&self) -> i64 {
        -(self.zero as i64)
    }

    pub fn n_plus(&self) -> i64 {
        self.symbols.len() as i64 - 1 - self.zero as i64
    }

    pub fn at(&self, t: i64) -> usize {
        self.symbols[(t + self.zero as i64) as usize]
    }

    /// σw: time 0 moves one symbol to the right.
    pub fn shifted(&self) -> Itinerary {
        Itinerary { symbols: self.symbols.clone(), zero: self.zero + 1 }
    }
}

pub fn encode(p: &MarkovPartition, x: Point, n_minus: i64, n_plus: i64, margin: f64) -> Result<Itinerary> {
    if n_minus > 0 || n_plus < 0 {
        return Err(Error::Invalid("window must contain time 0".into()));
    }
    let mut symbols = Vec::with_capacity((n_plus - n_minus + 1) as usize);
    for t in n_minus..=n_plus {
        let y = p.map.apply(x, t);
        let hits = p.locate(y, margin);
        if hits.len() != 1 {
            return Err(Error::BoundaryAmbiguity(t));
        }
        symbols.push(hits[0].0);
    }
    Ok(Itinerary { symbols, zero: (-n_minus) as usize })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decoded {
    pub point: Point,
    pub error_bound: f64,
    /// Local coordinates in the time-0 rectangle.
    pub local: [f64; 2],
}

/// Nested intervals in eigencoordinates: the future of the itinerary confines
/// the unstable coordinate, the past the stable one.
pub fn decode(p: &MarkovPartition, w: &Itinerary) -> Result<Decoded> {
    let (lu, ls) = (p.map.lambda_u, p.map.lambda_s);
    let (nm, np) = (w.n_minus(), w.n_plus());
    for (k, pair) in w.symbols.windows(2).enumerate() {
        if pair[0] >= p.size() || pair[1] >= p.size() || !p.transitions.allowed(pair[0], pair[1]) {
            return Err(Error::Inadmissible(k));
        }
    }
    let (mut ulo, mut uhi) = (0.0, p.rects[w.at(np)].lengths[1]);
    for t in (0..np).rev() {
        let (a, b) = (w.at(t), w.at(t + 1));
        let d = p.shift(a, b).ok_or(Error::EmptyIntersection(t))?[1];
        let (x0, x1) = ((ulo - d) / lu, (uhi - d) / lu);
        ulo = x0.min(x1).max(0.0);
        uhi = x0.max(x1).min(p.rects[a].lengths[1]);
        if ulo > uhi {
            return Err(Error::EmptyIntersection(t));
        }
    }
    let (mut slo, mut shi) = (0.0, p.rects[w.at(nm)].lengths[0]);
    for t in nm..0 {
        let (a, b) = (w.at(t), w.at(t + 1));
        let d = p.shift(a, b).ok_or(Error::EmptyIntersection(t))?[0];
        let (x0, x1) = (ls * slo + d, ls * shi + d);
        slo = x0.min(x1).max(0.0);
        shi = x0.max(x1).min(p.rects[b].lengths[0]);
        if slo > shi {
            return Err(Error::EmptyIntersection(t + 1));
        }
    }
    let r = p.rects[w.at(0)];
    let local = [(slo + shi) / 2.0, (ulo + uhi) / 2.0];
    let c = p.map.from_eigen(r.corner);
    let off = p.map.from_eigen(local);
    let point = wrap([c[0] + off[0], c[1] + off[1]]);
    let error_bound = (p.s_max() * ls.abs().powi((-nm) as i32)).max(p.u_max() * lu.abs().powi(-(np as i32)));
    Ok(Decoded { point, error_bound, local })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigendata() {
        let c = ToralAutomorphism::cat();
        assert_abs_diff_eq!(c.lambda_u, (3.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-12);
        let g = ToralAutomorphism::golden();
        assert_abs_diff_eq!(g.lambda_u, (1.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-12);
        for t in [c, g] {
            for (lam, e) in [(t.lambda_u, t.e_u), (t.lambda_s, t.e_s)] {
                let ae = t.act(e);
                assert!((ae[0] - lam * e[0]).abs() < 1e-12 && (ae[1] - lam * e[1]).abs() < 1e-12);
            }
        }
        assert_eq!(ToralAutomorphism::new([[0, 1], [-1, 0]]), Err(Error::NotHyperbolic));
        assert_eq!(ToralAutomorphism::new([[1, 1], [0, 1]]), Err(Error::NotHyperbolic));
        assert_eq!(ToralAutomorphism::new([[2, 0], [0, 1]]), Err(Error::NotHyperbolic));
    }

    #[test]
    fn apply_powers() {
        let t = ToralAutomorphism::cat();
        assert_eq!(t.apply([0.0, 0.0], 17), [0.0, 0.0]);
        let x = [0.123456789, 0.987654321];
        assert_eq!(t.apply(x, 0), x);
        let y = t.apply(t.apply(x, 5), -5);
        assert!(torus_dist(x, y) < 1e-12);
        let z = t.apply(x, 3);
        let w = t.step(t.step(t.step(x)));
        assert!(torus_dist(z, w) < 1e-13);
        // dyadic rationals are mapped exactly for any power
        let d = [0.375, 0.8125];
        let mut e = d;
        for _ in 0..100 {
            e = t.step(e);
        }
        assert_eq!(t.apply(d, 100), e);
    }

    #[test]
    fn torus_metric() {
        assert_abs_diff_eq!(torus_dist([0.95, 0.1], [0.05, 0.12]), 0.1, epsilon = 1e-15);
        assert_eq!(wrap([-0.25, 1.5]), [0.75, 0.5]);
        assert_eq!(wrap([-1e-18, 0.0])[0], 0.0);
    }

    #[test]
    fn shipped_partition() {
        let p = golden_partition();
        assert_eq!(p.transitions, TransitionMatrix::golden_mean());
        assert!(!p.warnings.is_empty());
        let pd = perron_eigendata(&p.transitions).unwrap();
        assert_abs_diff_eq!(pd.lambda.ln(), p.map.expansion().ln(), epsilon = 1e-9);
    }

    #[test]
    fn bad_partitions() {
        let p = golden_partition();
        let cfg = ValidationConfig { samples: 20_000, ..Default::default() };
        let mut d = p.data();
        d.rectangles[1] = d.rectangles[0];
        assert!(matches!(load_partition(&d, &cfg), Err(Error::OverlapDetected(..))));
        let mut d = p.data();
        d.rectangles.truncate(1);
        assert!(matches!(load_partition(&d, &cfg), Err(Error::CoverageGap(..))));
    }

    #[test]
    fn coding() {
        let p = golden_partition();
        assert!(matches!(encode(&p, [0.0, 0.0], -2, 2, DEFAULT_MARGIN), Err(Error::BoundaryAmbiguity(_))));
        // (A² − I) is unimodular, so O is the only point of period 2; the
        // smallest interior cycle has period 3.
        let w = Itinerary::new([0, 0, 1].repeat(30), 45);
        let d = decode(&p, &w).unwrap();
        assert!(torus_dist(p.map.apply(d.point, 3), d.point) < 1e-6);
        let e = encode(&p, d.point, -10, 10, DEFAULT_MARGIN).unwrap();
        for t in -10..8 {
            assert_eq!(e.at(t), e.at(t + 3));
        }
        // period 2 for the square map on the refined partition
        let q = p.refine_for_square().unwrap();
        let mut found = 0;
        for a in 0..q.size() {
            for b in 0..q.size() {
                if a != b && q.transitions.allowed(a, b) && q.transitions.allowed(b, a) {
                    let d = decode(&q, &Itinerary::new([a, b].repeat(30), 30)).unwrap();
                    let e = encode(&q, d.point, -6, 6, DEFAULT_MARGIN).unwrap();
                    for t in -6..5 {
                        assert_eq!(e.at(t), e.at(t + 2));
                        assert_ne!(e.at(t), e.at(t + 1));
                    }
                    found += 1;
                }
            }
        }
        assert!(found > 0);
        let w30 = Itinerary::new(vec![0; 61], 30);
        let d = decode(&p, &w30).unwrap();
        assert!(d.error_bound <= p.u_max() * p.map.lambda_u.powi(-30) + 1e-18);
        assert!(d.error_bound < 1e-6);
        assert!(matches!(decode(&p, &Itinerary::new(vec![1, 1], 0)), Err(Error::Inadmissible(0))));
    }

    #[test]
    fn square_refinement() {
        let p = golden_partition();
        let q = p.refine_for_square().unwrap();
        assert_eq!(q.map.matrix, [[2, 1], [1, 1]]);
        let b = TransitionMatrix::golden_mean();
        let (_, edges) = b.edge_shift();
        let rows = edges.iter().map(|&(_, j)| edges.iter().map(|&(k, _)| b.rows()[j][k]).collect()).collect();
        assert_eq!(q.transitions, TransitionMatrix::new(rows).unwrap());
    }
}
