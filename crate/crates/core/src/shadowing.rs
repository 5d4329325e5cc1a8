//! Pseudo-orbits and their shadows: a closed-form solver for linear maps and
//! a Newton orbit corrector for differentiable maps.
//!
//! Jumps, residuals and tracking distances use the Euclidean norm of the
//! minimal lift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::toral::{torus_diff, wrap, Point, ToralAutomorphism};

pub type Mat2 = [[f64; 2]; 2];

/// A torus map with derivative, as needed by the Newton solver.
pub trait MapHandle: Sync {
    fn step(&self, x: Point) -> Result<Point>;
    fn dstep(&self, x: Point) -> Result<Mat2>;
    /// Unit stable and unstable directions used for the window-end conditions.
    fn splitting(&self, x: Point) -> ([f64; 2], [f64; 2]);
}

impl MapHandle for ToralAutomorphism {
    fn step(&self, x: Point) -> Result<Point> {
        Ok(ToralAutomorphism::step(self, x))
    }
    fn dstep(&self, _x: Point) -> Result<Mat2> {
        Ok(self.derivative())
    }
    fn splitting(&self, _x: Point) -> ([f64; 2], [f64; 2]) {
        (self.e_s, self.e_u)
    }
}

fn norm(v: Point) -> f64 {
    v[0].hypot(v[1])
}

fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

/// Coefficients (s, u) of v in the (possibly oblique) basis (e_s, e_u).
fn split(es: [f64; 2], eu: [f64; 2], v: Point) -> [f64; 2] {
    let det = es[0] * eu[1] - es[1] * eu[0];
    [(v[0] * eu[1] - v[1] * eu[0]) / det, (es[0] * v[1] - es[1] * v[0]) / det]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoOrbit {
    pub points: Vec<Point>,
    /// e_n = f(x_n) ⊖ x_{n+1}.
    pub jumps: Vec<Point>,
    pub delta: f64,
}

pub fn pseudo_orbit_from_points(f: &dyn MapHandle, points: Vec<Point>) -> Result<PseudoOrbit> {
    if points.len() < 2 {
        return Err(Error::TooShort { have: points.len(), need: 2 });
    }
    let points: Vec<Point> = points.into_iter().map(wrap).collect();
    let jumps = points
        .windows(2)
        .map(|w| Ok(torus_diff(f.step(w[0])?, w[1])))
        .collect::<Result<Vec<_>>>()?;
    let delta = jumps.iter().map(|&e| norm(e)).fold(0.0, f64::max);
    Ok(PseudoOrbit { points, jumps, delta })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowResult {
    pub points: Vec<Point>,
    /// Corrections z_n − x_n on the lift.
    pub corrections: Vec<Point>,
    pub residual: f64,
    pub tracking: f64,
    pub iterations: usize,
    /// Shadowing constant c with tracking ≤ c·δ (linear solver only).
    pub constant: Option<f64>,
}

/// x_{n+1} = f(x_n) + e_n with e_n uniform in the closed disk of radius δ.
pub fn random_pseudo_orbit(f: &dyn MapHandle, len: usize, delta: f64, seed: u64) -> Result<PseudoOrbit> {
    if len < 2 || !(delta >= 0.0) {
        return Err(Error::Invalid("need len ≥ 2 and δ ≥ 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![[rng.gen::<f64>(), rng.gen::<f64>()]];
    for _ in 1..len {
        let r = delta * rng.gen::<f64>().sqrt();
        let a = std::f64::consts::TAU * rng.gen::<f64>();
        let y = f.step(*pts.last().unwrap())?;
        pts.push(wrap([y[0] + r * a.cos(), y[1] + r * a.sin()]));
    }
    pseudo_orbit_from_points(f, pts)
}

impl ShadowResult {
    /// Rows `n,x,y,jump,correction` for plotting.
    pub fn to_csv(&self, po: &PseudoOrbit) -> String {
        let mut s = String::from("n,x,y,jump,correction\n");
        for (n, z) in self.points.iter().enumerate() {
            let jump = po.jumps.get(n).map_or(0.0, |&e| norm(e));
            s.push_str(&format!("{n},{},{},{jump:e},{:e}\n", z[0], z[1], norm(self.corrections[n])));
        }
        s
    }
}

fn residual_of(f: &dyn MapHandle, z: &[Point]) -> Result<f64> {
    let mut r: f64 = 0.0;
    for w in z.windows(2) {
        r = r.max(norm(torus_diff(f.step(w[0])?, w[1])));
    }
    Ok(r)
}

/// c = ‖P_s‖/(1−|λ_s|) + ‖P_u‖/(|λ_u|−1), with P_s, P_u the spectral
/// projections; for symmetric A both norms are 1.
pub fn shadowing_constant(t: &ToralAutomorphism) -> f64 {
    let cos = (t.e_s[0] * t.e_u[0] + t.e_s[1] * t.e_u[1]).abs();
    let proj = 1.0 / (1.0 - cos * cos).sqrt();
    proj / (1.0 - t.lambda_s.abs()) + proj / (t.expansion() - 1.0)
}

const MAX_CORRECTION: f64 = 0.25;

fn finish(f: &dyn MapHandle, po: &PseudoOrbit, corr: Vec<Point>, iterations: usize, constant: Option<f64>) -> Result<ShadowResult> {
    let tracking = corr.iter().map(|&c| norm(c)).fold(0.0, f64::max);
    if tracking >= MAX_CORRECTION {
        return Err(Error::Invalid(format!("corrections reach {tracking}, beyond the single-lift regime")));
    }
    let points: Vec<Point> = po.points.iter().zip(&corr).map(|(&x, &c)| wrap(add(x, c))).collect();
    let residual = residual_of(f, &points)?;
    Ok(ShadowResult { points, corrections: corr, residual, tracking, iterations, constant })
}

/// Closed-form shadow for a pseudo-orbit of the linear map: the stable part of
/// the correction sums past jumps, the unstable part future jumps, with zero
/// stable correction at n = 0 and zero unstable correction at n = N.
pub fn linear_shadow(t: &ToralAutomorphism, po: &PseudoOrbit) -> Result<ShadowResult> {
    let n_pts = po.points.len();
    let (ls, lu) = (t.lambda_s, t.lambda_u);
    let parts: Vec<[f64; 2]> = po.jumps.iter().map(|&e| split(t.e_s, t.e_u, e)).collect();
    let mut cs = vec![0.0; n_pts];
    for n in 1..n_pts {
        cs[n] = ls * cs[n - 1] + parts[n - 1][0];
    }
    let mut cu = vec![0.0; n_pts];
    for n in (0..n_pts - 1).rev() {
        cu[n] = (cu[n + 1] - parts[n][1]) / lu;
    }
    let corr: Vec<Point> = (0..n_pts)
        .map(|n| add(t.from_eigen([cs[n], 0.0]), t.from_eigen([0.0, cu[n]])))
        .collect();
    finish(t, po, corr, 0, Some(shadowing_constant(t)))
}

/// Dense-storage banded Gaussian elimination with partial pivoting.
fn banded_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, kl: usize, ku: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..n {
        let last_row = (i + kl).min(n - 1);
        let last_col = (i + kl + ku).min(n - 1);
        let p = (i..=last_row).max_by(|&r, &s| a[r][i].abs().total_cmp(&a[s][i].abs())).unwrap();
        if a[p][i].abs() < 1e-14 * scale {
            return Err(Error::SingularJacobian(i / 2));
        }
        a.swap(i, p);
        b.swap(i, p);
        for r in i + 1..=last_row {
            let m = a[r][i] / a[i][i];
            if m != 0.0 {
                for c in i..=last_col {
                    a[r][c] -= m * a[i][c];
                }
                b[r] -= m * b[i];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let last_col = (i + kl + ku).min(n - 1);
        let s: f64 = (i + 1..=last_col).map(|c| a[i][c] * x[c]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Ok(x)
}

pub const NEWTON_TOL: f64 = 1e-12;

pub fn newton_shadow(f: &dyn MapHandle, po: &PseudoOrbit, tol: f64, max_iter: usize) -> Result<ShadowResult> {
    newton_shadow_from(f, po, vec![[0.0; 2]; po.points.len()], tol, max_iter)
}

/// Newton's method on F(z)_n = f(z_n) ⊖ z_{n+1} with the window-end conditions
/// of [`linear_shadow`], started from the given corrections.
pub fn newton_shadow_from(f: &dyn MapHandle, po: &PseudoOrbit, start: Vec<Point>, tol: f64, max_iter: usize) -> Result<ShadowResult> {
    let n_pts = po.points.len();
    if start.len() != n_pts {
        return Err(Error::Invalid("start corrections must match the orbit length".into()));
    }
    let (es0, eu0) = f.splitting(po.points[0]);
    let (es1, eu1) = f.splitting(po.points[n_pts - 1]);
    let mut corr = start;
    let dim = 2 * n_pts;
    let mut best: Option<(f64, Vec<Point>)> = None;
    for iter in 0..=max_iter {
        let z: Vec<Point> = po.points.iter().zip(&corr).map(|(&x, &c)| add(x, c)).collect();
        let mut rhs = vec![0.0; dim];
        let mut res: f64 = 0.0;
        let b0 = split(es0, eu0, corr[0])[0];
        let b1 = split(es1, eu1, corr[n_pts - 1])[1];
        res = res.max(b0.abs()).max(b1.abs());
        let mut fz = Vec::with_capacity(n_pts - 1);
        for n in 0..n_pts - 1 {
            let r = torus_diff(f.step(wrap(z[n]))?, wrap(z[n + 1]));
            res = res.max(norm(r));
            fz.push(r);
        }
        if best.as_ref().map_or(true, |(r, _)| res < *r) {
            best = Some((res, corr.clone()));
        }
        if res <= tol {
            return finish(f, po, corr, iter, None);
        }
        if iter == max_iter {
            break;
        }
        let mut a = vec![vec![0.0; dim]; dim];
        // row 0: stable coefficient of h_0 at the start
        let det0 = es0[0] * eu0[1] - es0[1] * eu0[0];
        a[0][0] = eu0[1] / det0;
        a[0][1] = -eu0[0] / det0;
        rhs[0] = -b0;
        for n in 0..n_pts - 1 {
            let d = f.dstep(wrap(z[n]))?;
            for i in 0..2 {
                let row = 2 * n + 1 + i;
                a[row][2 * n] = d[i][0];
                a[row][2 * n + 1] = d[i][1];
                a[row][2 * n + 2 + i] = -1.0;
                rhs[row] = -fz[n][i];
            }
        }
        let det1 = es1[0] * eu1[1] - es1[1] * eu1[0];
        a[dim - 1][dim - 2] = -es1[1] / det1;
        a[dim - 1][dim - 1] = es1[0] / det1;
        rhs[dim - 1] = -b1;
        let h = banded_solve(a, rhs, 2, 3)?;
        for n in 0..n_pts {
            corr[n] = add(corr[n], [h[2 * n], h[2 * n + 1]]);
        }
    }
    let residual = best.map_or(f64::INFINITY, |b| b.0);
    Err(Error::NoConvergence { iterations: max_iter, residual })
}

/// Per-step budgets c·ε₀·e^{−ε s_n} for caller-supplied block indices s_n.
pub fn lyapunov_budgets(c: f64, eps0: f64, eps: f64, block_indices: &[u64]) -> Vec<f64> {
    block_indices.iter().map(|&s| c * eps0 * (-eps * s as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orbit(t: &ToralAutomorphism, x: Point, n: usize) -> Vec<Point> {
        let mut v = vec![x];
        for _ in 1..n {
            v.push(t.step(*v.last().unwrap()));
        }
        v
    }

    #[test]
    fn constant_for_cat_map() {
        let t = ToralAutomorphism::cat();
        let lu = t.lambda_u;
        let c = shadowing_constant(&t);
        assert!((c - (1.0 / (1.0 - 1.0 / lu) + 1.0 / (lu - 1.0))).abs() < 1e-12);
        assert!((c - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn true_orbit_is_its_own_shadow() {
        let t = ToralAutomorphism::cat();
        let po = pseudo_orbit_from_points(&t, orbit(&t, [0.3, 0.1], 50)).unwrap();
        assert_eq!(po.delta, 0.0);
        let s = linear_shadow(&t, &po).unwrap();
        assert_eq!(s.tracking, 0.0);
        let n = newton_shadow(&t, &po, NEWTON_TOL, 10).unwrap();
        assert_eq!(n.iterations, 0);
        assert_eq!(n.tracking, 0.0);
    }

    #[test]
    fn single_jump() {
        let t = ToralAutomorphism::cat();
        let mut pts = orbit(&t, [0.3, 0.1], 41);
        let tail = orbit(&t, [pts[20][0] + 1e-6, pts[20][1]], 21);
        pts.splice(20.., tail);
        let po = pseudo_orbit_from_points(&t, pts).unwrap();
        assert_eq!(po.jumps.iter().filter(|e| norm(**e) > 0.0).count(), 1);
        let s = linear_shadow(&t, &po).unwrap();
        assert!(s.tracking <= s.constant.unwrap() * po.delta);
        assert!(s.residual < 1e-12);
        let n = newton_shadow(&t, &po, NEWTON_TOL, 10).unwrap();
        assert_eq!(n.iterations, 1);
        for (a, b) in s.points.iter().zip(&n.points) {
            assert!(norm(torus_diff(*a, *b)) < 1e-10);
        }
    }

    #[test]
    fn perturbed_starts_converge_to_same_shadow() {
        let t = ToralAutomorphism::cat();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point> = orbit(&t, [0.7, 0.2], 60)
            .into_iter()
            .map(|x| [x[0] + 1e-5 * rng.gen::<f64>(), x[1] - 1e-5 * rng.gen::<f64>()])
            .collect();
        let po = pseudo_orbit_from_points(&t, pts).unwrap();
        let a = newton_shadow(&t, &po, NEWTON_TOL, 10).unwrap();
        let start: Vec<Point> = (0..60).map(|_| [1e-4 * (rng.gen::<f64>() - 0.5), 1e-4 * (rng.gen::<f64>() - 0.5)]).collect();
        let b = newton_shadow_from(&t, &po, start, NEWTON_TOL, 10).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            assert!(norm(torus_diff(*x, *y)) < 1e-9);
        }
    }

    #[test]
    fn too_short() {
        let t = ToralAutomorphism::cat();
        assert!(matches!(pseudo_orbit_from_points(&t, vec![[0.0, 0.0]]), Err(Error::TooShort { .. })));
    }

    #[test]
    fn budgets() {
        let b = lyapunov_budgets(2.0, 0.1, 0.5, &[0, 2]);
        assert_eq!(b[0], 0.2);
        assert!((b[1] - 0.2 * (-1f64).exp()).abs() < 1e-15);
    }
}
