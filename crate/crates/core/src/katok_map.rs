//! The Katok slowdown of a hyperbolic toral automorphism near its fixed point,
//! with finite-time Lyapunov exponents, Pesin-block checks and frequency sets.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::shadowing::{MapHandle, Mat2};
use crate::toral::{torus_diff, wrap, Point, ToralAutomorphism};

/// A torus map with an inverse, as needed for two-sided orbit windows.
pub trait Diffeo: MapHandle {
    fn step_back(&self, y: Point) -> Result<Point>;
}

impl Diffeo for ToralAutomorphism {
    fn step_back(&self, y: Point) -> Result<Point> {
        Ok(self.apply(y, -1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KatokMap {
    pub base: ToralAutomorphism,
    pub r0: f64,
    pub r1: f64,
    pub alpha: f64,
    pub log_lambda: f64,
    /// Target agreement between successive step-doubled time-1 maps.
    pub tol: f64,
    pub max_substeps: usize,
}

pub fn build_katok_map(base: ToralAutomorphism, r0: f64, r1: f64, alpha: f64) -> Result<KatokMap> {
    let lam = base.expansion();
    // r0·λ < r1 keeps time-1 trajectories from ∂D_{r1} out of {ψ < 1}, so the
    // glued map is A near the circle; λ·r1 < 1/2 keeps images on one lift.
    if !(r0 > 0.0 && r0 < r1 && r0 * lam < r1 && lam * r1 < 0.5 && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::BadRadii);
    }
    if base.lambda_u < 0.0 || base.lambda_s < 0.0 {
        return Err(Error::Invalid("slowdown needs positive eigenvalues".into()));
    }
    Ok(KatokMap { base, r0, r1, alpha, log_lambda: lam.ln(), tol: 1e-12, max_substeps: 1_000_000 })
}

impl Default for KatokMap {
    fn default() -> Self {
        build_katok_map(ToralAutomorphism::cat(), 0.05, 0.15, 0.5).unwrap()
    }
}

fn mmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn minv(a: &Mat2) -> Mat2 {
    let d = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]
}

fn mvec(a: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

#[derive(Clone, Copy)]
struct State {
    s: [f64; 2],
    m: Mat2,
}

impl KatokMap {
    pub fn psi(&self, u: f64) -> f64 {
        let c = self.r0 * self.r0;
        if u >= c {
            1.0
        } else if u <= 0.0 {
            0.0
        } else {
            (u / c).powf(self.alpha)
        }
    }

    /// Eigencoordinates (s1 along e_u, s2 along e_s) of the minimal lift of x − O.
    pub fn local(&self, x: Point) -> [f64; 2] {
        let e = self.base.to_eigen(torus_diff(x, [0.0, 0.0]));
        [e[1], e[0]]
    }

    fn plane(&self, s: [f64; 2]) -> Point {
        self.base.from_eigen([s[1], s[0]])
    }

    pub fn in_disk(&self, x: Point) -> bool {
        let s = self.local(x);
        s[0] * s[0] + s[1] * s[1] < self.r1 * self.r1
    }

    /// Inside the slowdown core {ψ < 1}.
    pub fn in_core(&self, x: Point) -> bool {
        let s = self.local(x);
        s[0] * s[0] + s[1] * s[1] < self.r0 * self.r0
    }

    /// Vector field and variational equation on the core, using the smooth
    /// branch (u/r0²)^α so that stages landing on the exit circle stay exact.
    fn field(&self, st: &State, dir: f64) -> State {
        let [s1, s2] = st.s;
        let u = s1 * s1 + s2 * s2;
        let (p, dp) = if u > 0.0 {
            let p = (u / (self.r0 * self.r0)).powf(self.alpha);
            (p, self.alpha * p / u)
        } else {
            (0.0, 0.0)
        };
        let c = dir * self.log_lambda;
        let j: Mat2 = [
            [c * (p + 2.0 * dp * s1 * s1), c * 2.0 * dp * s1 * s2],
            [-c * 2.0 * dp * s1 * s2, -c * (p + 2.0 * dp * s2 * s2)],
        ];
        State { s: [c * s1 * p, -c * s2 * p], m: mmul(&j, &st.m) }
    }

    fn rk4(&self, st: &State, h: f64, dir: f64) -> State {
        let comb = |a: &State, k: &State, w: f64| {
            let mut m = a.m;
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += w * k.m[i][j];
                }
            }
            State { s: [a.s[0] + w * k.s[0], a.s[1] + w * k.s[1]], m }
        };
        let k1 = self.field(st, dir);
        let k2 = self.field(&comb(st, &k1, h / 2.0), dir);
        let k3 = self.field(&comb(st, &k2, h / 2.0), dir);
        let k4 = self.field(&comb(st, &k3, h), dir);
        let mut out = *st;
        for k in 0..2 {
            out.s[k] += h / 6.0 * (k1.s[k] + 2.0 * k2.s[k] + 2.0 * k3.s[k] + k4.s[k]);
            for j in 0..2 {
                out.m[k][j] += h / 6.0 * (k1.m[k][j] + 2.0 * k2.m[k][j] + 2.0 * k3.m[k][j] + k4.m[k][j]);
            }
        }
        out
    }

    /// Unit-time flow with variational equation. Outside the core the linear
    /// flow is applied in closed form up to the entry time; inside, RK4 with
    /// step 1/n, landing on the exit circle by bisection. Returns the state and
    /// whether any RK4 step was taken.
    fn flow(&self, s: [f64; 2], dir: f64, n: usize) -> Result<(State, bool)> {
        let c = self.log_lambda;
        let r2 = self.r0 * self.r0;
        let h = 1.0 / n as f64;
        let mut st = State { s, m: [[1.0, 0.0], [0.0, 1.0]] };
        let mut t = 0.0;
        let mut used_rk = false;
        let mut just_exited = false;
        let mut guard = 0usize;
        while t < 1.0 {
            guard += 1;
            if guard > self.max_substeps {
                return Err(Error::IntegratorUnderflow(self.max_substeps));
            }
            let rem = 1.0 - t;
            let [s1, s2] = st.s;
            let u = s1 * s1 + s2 * s2;
            if u >= r2 {
                // along the linear flow g(τ) = a²X + b²/X with X = e^{2cτ}
                let (a, b) = if dir > 0.0 { (s1, s2) } else { (s2, s1) };
                let disc = r2 * r2 - 4.0 * a * a * b * b;
                let mut tau = rem;
                let mut enter = false;
                if disc >= 0.0 && b != 0.0 {
                    let x1 = 2.0 * b * b / (r2 + disc.sqrt());
                    let x2 = if a != 0.0 { (r2 + disc.sqrt()) / (2.0 * a * a) } else { f64::INFINITY };
                    if x1 > 1.0 {
                        let th = x1.ln() / (2.0 * c);
                        if th < rem {
                            tau = th;
                            enter = true;
                        }
                    } else if x2 > 1.0 && !just_exited {
                        tau = 0.0;
                        enter = true;
                    }
                }
                if tau > 0.0 {
                    let e = (dir * c * tau).exp();
                    st.s = [s1 * e, s2 / e];
                    st.m = [[e * st.m[0][0], e * st.m[0][1]], [st.m[1][0] / e, st.m[1][1] / e]];
                    t += tau;
                }
                just_exited = false;
                if !enter {
                    t = 1.0;
                    continue;
                }
            }
            let dt = h.min(1.0 - t);
            if dt <= 0.0 {
                break;
            }
            used_rk = true;
            let next = self.rk4(&st, dt, dir);
            let un = next.s[0] * next.s[0] + next.s[1] * next.s[1];
            if un > r2 {
                let (mut lo, mut hi) = (0.0, dt);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let p = self.rk4(&st, mid, dir);
                    if p.s[0] * p.s[0] + p.s[1] * p.s[1] > r2 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                st = self.rk4(&st, hi, dir);
                t += hi;
                just_exited = true;
            } else {
                st = next;
                t += dt;
            }
        }
        Ok((st, used_rk))
    }

    fn time_one(&self, s: [f64; 2], dir: f64) -> Result<State> {
        let mut n = 16usize;
        let (mut prev, used) = self.flow(s, dir, n)?;
        if !used {
            return Ok(prev);
        }
        loop {
            n *= 2;
            if n > self.max_substeps {
                return Err(Error::IntegratorUnderflow(self.max_substeps));
            }
            let (cur, _) = self.flow(s, dir, n)?;
            let mut diff: f64 = (0..2).map(|i| (cur.s[i] - prev.s[i]).abs()).fold(0.0, f64::max);
            for i in 0..2 {
                for j in 0..2 {
                    diff = diff.max((cur.m[i][j] - prev.m[i][j]).abs() * 1e-2);
                }
            }
            prev = cur;
            if diff < self.tol {
                return Ok(prev);
            }
        }
    }

    fn to_plane_derivative(&self, m: &Mat2) -> Mat2 {
        // columns of P are e_u and e_s
        let p: Mat2 = [[self.base.e_u[0], self.base.e_s[0]], [self.base.e_u[1], self.base.e_s[1]]];
        mmul(&mmul(&p, m), &minv(&p))
    }

    pub fn step(&self, x: Point) -> Result<Point> {
        let x = wrap(x);
        if !self.in_disk(x) {
            return Ok(self.base.step(x));
        }
        let st = self.time_one(self.local(x), 1.0)?;
        Ok(wrap(self.plane(st.s)))
    }

    pub fn dstep(&self, x: Point) -> Result<Mat2> {
        let x = wrap(x);
        if !self.in_disk(x) {
            return Ok(self.base.derivative());
        }
        let st = self.time_one(self.local(x), 1.0)?;
        Ok(self.to_plane_derivative(&st.m))
    }

    pub fn step_inverse(&self, y: Point) -> Result<Point> {
        let pre = self.base.apply(y, -1);
        if !self.in_disk(pre) {
            return Ok(pre);
        }
        let st = self.time_one(self.local(y), -1.0)?;
        Ok(wrap(self.plane(st.s)))
    }

    /// det Df(x); equal to 1 outside D_{r1}, reported (not asserted) inside.
    pub fn area_distortion(&self, x: Point) -> Result<f64> {
        let d = self.dstep(x)?;
        Ok(d[0][0] * d[1][1] - d[0][1] * d[1][0])
    }

    /// Smallest expansion ‖Df·e_u‖ over sampled points at distance ≥ r_v from
    /// O (a measured stand-in for the expansion rate away from the core).
    pub fn measured_lambda_v(&self, r_v: f64, samples: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = f64::INFINITY;
        let mut taken = 0;
        while taken < samples {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let s = self.local(x);
            if s[0].hypot(s[1]) < r_v {
                continue;
            }
            taken += 1;
            let v = mvec(&self.dstep(x)?, self.base.e_u);
            best = best.min(v[0].hypot(v[1]));
        }
        Ok(best)
    }
}

impl MapHandle for KatokMap {
    fn step(&self, x: Point) -> Result<Point> {
        KatokMap::step(self, x)
    }
    fn dstep(&self, x: Point) -> Result<Mat2> {
        KatokMap::dstep(self, x)
    }
    fn splitting(&self, _x: Point) -> ([f64; 2], [f64; 2]) {
        (self.base.e_s, self.base.e_u)
    }
}

impl Diffeo for KatokMap {
    fn step_back(&self, y: Point) -> Result<Point> {
        self.step_inverse(y)
    }
}

/// ∫₀¹ du/ψ(u) in closed form for the installed power law.
pub fn psi_reciprocal_integral(r0: f64, alpha: f64) -> f64 {
    let c = r0 * r0;
    c / (1.0 - alpha) + (1.0 - c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub chi_plus: f64,
    pub chi_minus: f64,
    /// log ‖Df^T(x)‖ (operator 2-norm).
    pub log_norm: f64,
    /// log of the condition number of the accumulated triangular factor.
    pub log_cond: f64,
}

/// QR accumulation of the derivative cocycle over T steps.
pub fn finite_lyapunov(f: &dyn MapHandle, x: Point, steps: usize) -> Result<LyapunovReport> {
    if steps == 0 {
        return Err(Error::Invalid("T must be at least 1".into()));
    }
    let mut q: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
    let mut sums = [0.0f64; 2];
    let mut r_acc: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
    let mut log_scale = 0.0;
    let mut x = wrap(x);
    for _ in 0..steps {
        let d = f.dstep(x)?;
        let m = mmul(&d, &q);
        // Gram–Schmidt QR of a 2×2
        let c0 = [m[0][0], m[1][0]];
        let r11 = c0[0].hypot(c0[1]);
        let q0 = [c0[0] / r11, c0[1] / r11];
        let c1 = [m[0][1], m[1][1]];
        let r12 = q0[0] * c1[0] + q0[1] * c1[1];
        let w = [c1[0] - r12 * q0[0], c1[1] - r12 * q0[1]];
        let r22 = w[0].hypot(w[1]);
        let q1 = [w[0] / r22, w[1] / r22];
        q = [[q0[0], q1[0]], [q0[1], q1[1]]];
        sums[0] += r11.ln();
        sums[1] += r22.ln();
        r_acc = mmul(&[[r11, r12], [0.0, r22]], &r_acc);
        let big = r_acc.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        r_acc = r_acc.map(|row| row.map(|v| v / big));
        log_scale += big.ln();
        x = f.step(x)?;
    }
    let t = steps as f64;
    // σ₁ of the scaled factor; σ₁σ₂ = |det| is known from the diagonal sums
    let [[a, b], [_, d]] = r_acc;
    let fro2 = a * a + b * b + d * d;
    let det2 = (a * d) * (a * d);
    let s1 = ((fro2 + (fro2 * fro2 - 4.0 * det2).max(0.0).sqrt()) / 2.0).sqrt();
    let log_norm = s1.ln() + log_scale;
    let log_det = sums[0] + sums[1];
    let log_cond = 2.0 * log_norm - log_det;
    let (hi, lo) = (sums[0].max(sums[1]) / t, sums[0].min(sums[1]) / t);
    Ok(LyapunovReport { chi_plus: hi, chi_minus: lo, log_norm, log_cond })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockCheckReport {
    pub window: usize,
    /// Minimal k passing the stable contraction ('a'), unstable expansion ('b')
    /// and angle ('c') conditions over the window.
    pub k: u64,
    /// Condition, time t and length n attaining the maximum requirement.
    pub binding: (char, i64, usize),
    /// Largest sine of the angle between splitting estimates from two seeds.
    pub splitting_drift: f64,
}

pub const SPLITTING_TOL: f64 = 1e-6;

fn normalize(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

fn sin_between(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] * b[1] - a[1] * b[0]).abs()
}

/// Finite-window certificate for the hyperbolic block index of x: checks
/// the contraction, expansion and angle conditions for all n ≥ 1, |t| ≤ T with n + |t| ≤ T. The splitting is
/// estimated by pushing vectors forward from t = −T − margin (unstable) and
/// backward from t = T + margin (stable).
pub fn pesin_block_check(f: &dyn Diffeo, x: Point, window: usize, beta1: f64, beta2: f64, eps: f64, margin: usize) -> Result<BlockCheckReport> {
    if !(eps > 0.0) {
        return Err(Error::Invalid("ε must be positive".into()));
    }
    let w = window as i64;
    let reach = window + margin;
    // orbit[i] is f^{i − reach}(x)
    let mut back = vec![wrap(x)];
    for _ in 0..reach {
        back.push(f.step_back(*back.last().unwrap())?);
    }
    back.reverse();
    let mut orbit = back;
    for _ in 0..reach {
        orbit.push(f.step(*orbit.last().unwrap())?);
    }
    let ders: Vec<Mat2> = orbit.iter().map(|&p| f.dstep(p)).collect::<Result<_>>()?;
    let len = orbit.len();
    let push = |v0: [f64; 2]| {
        let mut out = vec![[0.0; 2]; len];
        out[0] = normalize(v0);
        for i in 1..len {
            out[i] = normalize(mvec(&ders[i - 1], out[i - 1]));
        }
        out
    };
    let pull = |v0: [f64; 2]| {
        let mut out = vec![[0.0; 2]; len];
        out[len - 1] = normalize(v0);
        for i in (0..len - 1).rev() {
            out[i] = normalize(mvec(&minv(&ders[i]), out[i + 1]));
        }
        out
    };
    let (eu, eu2) = (push([1.0, 0.3]), push([-0.2, 1.0]));
    let (es, es2) = (pull([1.0, 0.3]), pull([-0.2, 1.0]));
    let idx = |t: i64| (t + reach as i64) as usize;
    let mut drift: f64 = 0.0;
    for t in -w..=w {
        drift = drift.max(sin_between(eu[idx(t)], eu2[idx(t)])).max(sin_between(es[idx(t)], es2[idx(t)]));
    }
    if drift > SPLITTING_TOL {
        return Err(Error::SplittingNotResolved(drift));
    }
    // log stretch factors along E^s and E^u
    let la: Vec<f64> = (0..len).map(|i| { let v = mvec(&ders[i], es[i]); v[0].hypot(v[1]).ln() }).collect();
    let lb: Vec<f64> = (0..len).map(|i| { let v = mvec(&ders[i], eu[i]); v[0].hypot(v[1]).ln() }).collect();
    let mut need = f64::NEG_INFINITY;
    let mut binding = ('a', 0i64, 1usize);
    for t in -w..=w {
        let room = (w - t.abs()) as usize;
        let at = t.abs() as f64;
        let mut sa = 0.0;
        let mut sb = 0.0;
        for n in 1..=room {
            sa += la[idx(t) + n - 1];
            sb -= lb[idx(t) - n];
            let ka = (sa + (beta1 - eps) * n as f64 - eps * at) / eps;
            let kb = (sb + (beta2 - eps) * n as f64 - eps * at) / eps;
            if ka > need {
                need = ka;
                binding = ('a', t, n);
            }
            if kb > need {
                need = kb;
                binding = ('b', t, n);
            }
        }
        let (a, b) = (es[idx(t)], eu[idx(t)]);
        let cos = (a[0] * b[0] + a[1] * b[1]).abs();
        let sin = sin_between(a, b);
        let kc = if cos == 0.0 { f64::NEG_INFINITY } else { (-(sin / cos).ln() - eps * at) / eps };
        if kc > need {
            need = kc;
            binding = ('c', t, 0);
        }
    }
    let k = if need <= 1.0 + 1e-9 { 1 } else { (need - 1e-9).ceil() as u64 };
    Ok(BlockCheckReport { window, k, binding, splitting_drift: drift })
}

/// Exact rational value of the shortest decimal representation of x.
pub fn decimal_ratio(x: f64) -> Result<Ratio<i128>> {
    if !x.is_finite() {
        return Err(Error::Invalid(format!("{x} is not finite")));
    }
    let s = format!("{x:e}");
    let (mant, exp) = s.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let neg = mant.starts_with('-');
    let mant = mant.trim_start_matches('-');
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    let digits: i128 = format!("{int}{frac}").parse().unwrap();
    let e = exp - frac.len() as i32;
    if e.abs() > 30 {
        return Err(Error::Invalid(format!("{x} needs more than 30 decimal digits")));
    }
    let r = if e >= 0 { Ratio::from_integer(digits * 10i128.pow(e as u32)) } else { Ratio::new(digits, 10i128.pow((-e) as u32)) };
    Ok(if neg { -r } else { r })
}

fn frequency_pass(flags: &[bool], times: &[i64], n_bound: u64, q: Ratio<i128>, gamma: Ratio<i128>) -> bool {
    // h(m) = S(m)·den − m·num with S(m) = #visits among the first m entries;
    // for each start n: max_{m>n} h(m) − h(n) ≤ den·(N + |t_n|γ)
    let (qn, qd) = (*q.numer(), *q.denom());
    let (gn, gd) = (*gamma.numer(), *gamma.denom());
    let len = flags.len();
    let mut h = vec![0i128; len + 1];
    let mut s = 0i128;
    for m in 1..=len {
        s += flags[m - 1] as i128;
        h[m] = s * qd - m as i128 * qn;
    }
    let mut suffix = i128::MIN;
    for n in (0..len).rev() {
        suffix = suffix.max(h[n + 1]);
        // (suffix − h[n])/qd ≤ N + |t|·gn/gd
        let lhs = (suffix - h[n]) * gd;
        let rhs = n_bound as i128 * qd * gd + times[n].unsigned_abs() as i128 * gn * qd;
        if lhs > rhs {
            return false;
        }
    }
    true
}

/// Γ_N(i,γ) membership over a finite window: for every interval [n, n+k−1]
/// inside the window, #visits ≤ N + k(p_i+γ) + |n|γ, both along the orbit and
/// along the reversed orbit. `flags[j]` is the visit flag at time `j + t0`.
/// Inputs are read as the decimals they print as and compared exactly.
pub fn frequency_check(flags: &[bool], t0: i64, n_bound: u64, gamma: f64, p_i: f64) -> Result<bool> {
    let g = decimal_ratio(gamma)?;
    let q = decimal_ratio(p_i)? + g;
    let times: Vec<i64> = (0..flags.len() as i64).map(|j| j + t0).collect();
    if !frequency_pass(flags, &times, n_bound, q, g) {
        return Ok(false);
    }
    let rflags: Vec<bool> = flags.iter().rev().copied().collect();
    let rtimes: Vec<i64> = times.iter().rev().map(|t| -t).collect();
    Ok(frequency_pass(&rflags, &rtimes, n_bound, q, g))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "case")]
pub enum CaseBound {
    /// k ≤ (N + |n|γ)/p0, with the block index N₂ = ⌊βN/(γ p0)⌋ + 1 when β is known.
    #[serde(rename = "1")]
    One { k_bound: f64 },
    /// Contraction exponent β = (1 − p1 − p0 − γ) log λ, with λ the expansion
    /// rate away from the core.
    #[serde(rename = "2")]
    Two { beta: f64 },
}

pub fn case_bound_check(n_bound: u64, gamma: f64, p0: f64, p1: f64, k: u64, n: i64, lambda_v: f64) -> Result<CaseBound> {
    let (g, q0) = (decimal_ratio(gamma)?, decimal_ratio(p0)?);
    if q0 <= Ratio::from_integer(0) {
        return Err(Error::Invalid("p0 must be positive".into()));
    }
    // k(p1+γ+p0) ≤ N + k(p1+γ) + |n|γ  ⇔  k·p0 ≤ N + |n|γ
    let rhs = Ratio::from_integer(n_bound as i128) + Ratio::from_integer(n.unsigned_abs() as i128) * g;
    if Ratio::from_integer(k as i128) * q0 <= rhs {
        let b = rhs / q0;
        Ok(CaseBound::One { k_bound: *b.numer() as f64 / *b.denom() as f64 })
    } else {
        Ok(CaseBound::Two { beta: (1.0 - p1 - p0 - gamma) * lambda_v.ln() })
    }
}

/// N₂ = ⌊βN/(γ p0)⌋ + 1.
pub fn block_index_bound(beta: f64, n_bound: u64, gamma: f64, p0: f64) -> u64 {
    (beta * n_bound as f64 / (gamma * p0)).floor() as u64 + 1
}

/// p0 = ½ min_i (1 − p_i).
pub fn p0_from(p: &[f64]) -> f64 {
    0.5 * p.iter().map(|&x| 1.0 - x).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn km() -> KatokMap {
        KatokMap::default()
    }

    #[test]
    fn psi_values() {
        let m = km();
        assert_eq!(m.psi(m.r0 * m.r0), 1.0);
        assert_eq!(m.psi(0.0), 0.0);
        assert!(m.psi(1e-6) > 0.0);
        assert!(build_katok_map(ToralAutomorphism::cat(), 0.2, 0.1, 0.5).is_err());
        assert!(build_katok_map(ToralAutomorphism::cat(), 0.05, 0.15, 1.0).is_err());
    }

    #[test]
    fn reciprocal_integral_by_quadrature() {
        // u = w², du/ψ = 2w dw / ψ(w²); composite Simpson on the smooth integrand
        let m = km();
        let f = |w: f64| if w == 0.0 { 2.0 * m.r0 } else { 2.0 * w / m.psi(w * w) };
        let n = 20_000;
        let h = 1.0 / n as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        let quad = s * h / 3.0;
        assert!((quad - psi_reciprocal_integral(m.r0, m.alpha)).abs() < 1e-6);
    }

    #[test]
    fn fixed_point_and_outside() {
        let m = km();
        assert_eq!(m.step([0.0, 0.0]).unwrap(), [0.0, 0.0]);
        let x = [0.4, 0.3];
        assert!(!m.in_disk(x));
        assert_eq!(m.step(x).unwrap(), m.base.step(x));
        let d = m.dstep([0.0, 0.0]).unwrap();
        assert!((d[0][0] - 1.0).abs() < 1e-12 && d[0][1].abs() < 1e-12);
    }

    #[test]
    fn inverse_roundtrip() {
        let m = km();
        for x in [[0.01, 0.02], [0.1, 0.05], [0.95, 0.03], [0.3, 0.7]] {
            let y = m.step(x).unwrap();
            let back = m.step_inverse(y).unwrap();
            assert!(crate::toral::torus_dist(back, x) < 1e-9, "{x:?} -> {back:?}");
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let m = km();
        let h = 1e-5;
        for x in [[0.02, 0.01], [0.06, 0.04], [0.99, 0.97], [0.12, 0.02]] {
            let d = m.dstep(x).unwrap();
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let fd = torus_diff(m.step(xp).unwrap(), m.step(xm).unwrap()).map(|v| v / (2.0 * h));
                for i in 0..2 {
                    assert!((fd[i] - d[i][j]).abs() < 1e-6 * d[i][j].abs().max(1.0), "{x:?} {i}{j}: {} vs {}", fd[i], d[i][j]);
                }
            }
        }
    }

    #[test]
    fn lyapunov_linear_and_origin() {
        let t = ToralAutomorphism::cat();
        let r = finite_lyapunov(&t, [0.3, 0.2], 50).unwrap();
        assert!((r.chi_plus - t.lambda_u.ln()).abs() < 1e-2);
        assert!(r.chi_plus * 50.0 <= r.log_norm + 1e-9 && r.log_norm <= r.chi_plus * 50.0 + r.log_cond + 1e-9);
        let o = finite_lyapunov(&km(), [0.0, 0.0], 20).unwrap();
        assert!(o.chi_plus.abs() < 1e-6 && o.chi_minus.abs() < 1e-6);
    }

    #[test]
    fn pesin_linear_is_k1() {
        let t = ToralAutomorphism::cat();
        let b = t.lambda_u.ln();
        let r = pesin_block_check(&t, [0.3, 0.6], 20, b, b, 0.01, 30).unwrap();
        assert_eq!(r.k, 1);
    }

    #[test]
    fn lingering_raises_block_index() {
        let m = km();
        let b = 0.5 * m.log_lambda;
        let mut ks = Vec::new();
        for s1 in [1e-2, 1e-3, 1e-4] {
            let x = wrap(m.base.from_eigen([0.1, s1]));
            ks.push(pesin_block_check(&m, x, 30, b, b, 0.05, 200).unwrap().k);
        }
        assert!(ks[0] <= ks[1] && ks[1] <= ks[2] && ks[2] > 1, "{ks:?}");
    }

    #[test]
    fn frequency_basics() {
        assert!(frequency_check(&[false; 100], -50, 0, 0.05, 0.3).unwrap());
        let all = vec![true; 200];
        assert!(!frequency_check(&all, 0, 10, 0.1, 0.5).unwrap());
        assert!(frequency_check(&all[..20], 0, 10, 0.1, 0.5).unwrap());
    }

    #[test]
    fn case_examples() {
        assert_eq!(case_bound_check(10, 0.1, 0.2, 0.3, 49, 0, 2.0).unwrap(), CaseBound::One { k_bound: 50.0 });
        assert!(matches!(case_bound_check(10, 0.1, 0.2, 0.3, 51, 0, 2.0).unwrap(), CaseBound::Two { .. }));
        assert_eq!(case_bound_check(10, 0.1, 0.2, 0.3, 50, 0, 2.0).unwrap(), CaseBound::One { k_bound: 50.0 });
        for k in 1..20 {
            assert!(matches!(case_bound_check(0, 0.1, 0.2, 0.3, k, 0, 2.0).unwrap(), CaseBound::Two { .. }));
        }
        assert_eq!(decimal_ratio(0.05).unwrap(), Ratio::new(1, 20));
        assert_eq!(decimal_ratio(-2.5e-7).unwrap(), Ratio::new(-1, 4_000_000));
    }
}
