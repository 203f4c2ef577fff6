//! Representable triples.
//!
//! A triple `(a, b, c) >= 0` is representable when six edge values
//! `a1, a2, b1, b3, c2, c3` in `[0, 2]` exist with `a1·a2 = a`, `b1·b3 = b`,
//! `c2·c3 = c` and `a1 + b1 <= 2`, `a2 + c2 <= 2`, `b3 + c3 <= 2`. The set is
//! exactly `{a + b <= 4, c <= f(a, b)}` with
//!
//! ```text
//! f(a, b) = 4 + (ab - 2a - 2b - sqrt(ab(4-a)(4-b))) / 2
//! ```
//!
//! Membership is decided without the square root: with
//! `R = 8 + ab - 2a - 2b - 2c` and `D = ab(4-a)(4-b)`, `c <= f(a, b)` iff
//! `R >= 0` and `R² >= D`. The floating `f` is only used for diagnostics and
//! the numerical certificates.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rational::{ceil_dyadic, exact_sqrt, floor_dyadic, format_rational, from_f64, int, to_f64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReprError {
    #[error("f is undefined at ({a}, {b}): need a, b >= 0 and a + b <= 4")]
    DomainError { a: f64, b: f64 },
    #[error("triple {0} is not representable")]
    NotRepresentable(Triple),
    #[error("no split found for representable triple {0}")]
    SearchExhausted(Triple),
    #[error("certificate failed at {} grid point(s), first: {}", .0.len(), .0.first().map(|p| p.to_string()).unwrap_or_default())]
    CertificateFailure(Vec<CertificatePoint>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    pub a: BigRational,
    pub b: BigRational,
    pub c: BigRational,
}

impl Triple {
    pub fn new(a: BigRational, b: BigRational, c: BigRational) -> Self {
        Triple { a, b, c }
    }

    pub fn ones() -> Self {
        Triple::new(BigRational::one(), BigRational::one(), BigRational::one())
    }

    pub fn is_nonnegative(&self) -> bool {
        !self.a.is_negative() && !self.b.is_negative() && !self.c.is_negative()
    }

    /// Componentwise scaling.
    pub fn scaled(&self, sa: &BigRational, sb: &BigRational, sc: &BigRational) -> Triple {
        Triple::new(&self.a * sa, &self.b * sb, &self.c * sc)
    }

    /// `q·self + (1-q)·other`.
    pub fn lerp(&self, other: &Triple, q: &BigRational) -> Triple {
        let p = BigRational::one() - q;
        Triple::new(
            q * &self.a + &p * &other.a,
            q * &self.b + &p * &other.b,
            q * &self.c + &p * &other.c,
        )
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            format_rational(&self.a),
            format_rational(&self.b),
            format_rational(&self.c)
        )
    }
}

/// Six edge values. For a hyperedge `{u, v, w}` with edges `e = {u,v}`,
/// `e' = {u,w}`, `e'' = {v,w}`: `a1, b1` sit on `e`, `a2, c2` on `e'`,
/// `b3, c3` on `e''`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSplit {
    pub a1: BigRational,
    pub a2: BigRational,
    pub b1: BigRational,
    pub b3: BigRational,
    pub c2: BigRational,
    pub c3: BigRational,
}

impl EdgeSplit {
    fn from_values(v: [BigRational; 6]) -> Self {
        let [a1, a2, b1, b3, c2, c3] = v;
        EdgeSplit { a1, a2, b1, b3, c2, c3 }
    }

    pub fn values(&self) -> [&BigRational; 6] {
        [&self.a1, &self.a2, &self.b1, &self.b3, &self.c2, &self.c3]
    }

    /// Every value in `[0, 2]` and every edge sum at most 2.
    pub fn is_valid(&self) -> bool {
        let two = int(2);
        self.values().iter().all(|v| !v.is_negative() && **v <= two)
            && &self.a1 + &self.b1 <= two
            && &self.a2 + &self.c2 <= two
            && &self.b3 + &self.c3 <= two
    }

    pub fn products(&self) -> Triple {
        Triple::new(&self.a1 * &self.a2, &self.b1 * &self.b3, &self.c2 * &self.c3)
    }

    /// Valid, with products componentwise at least `t`.
    pub fn dominates(&self, t: &Triple) -> bool {
        let p = self.products();
        self.is_valid() && p.a >= t.a && p.b >= t.b && p.c >= t.c
    }
}

/// `f(a, b)` in double precision.
pub fn f_value(a: f64, b: f64) -> Result<f64, ReprError> {
    if !(a >= 0.0 && b >= 0.0 && a + b <= 4.0) {
        return Err(ReprError::DomainError { a, b });
    }
    // same function as 4(4-a-b)² / (sqrt((4-a)(4-b)) + sqrt(ab))², which
    // avoids the cancellation near a + b = 4
    let s = ((4.0 - a) * (4.0 - b)).sqrt() + (a * b).sqrt();
    if s == 0.0 {
        return Ok(0.0);
    }
    let m = 4.0 - a - b;
    Ok(4.0 * m * m / (s * s))
}

/// The slack `R = 8 + ab - 2a - 2b - 2c` when `t` is representable.
pub fn membership_slack(t: &Triple) -> Option<BigRational> {
    if !t.is_nonnegative() {
        return None;
    }
    let four = int(4);
    if t.a > four || t.b > four || t.c > four {
        return None;
    }
    // clear denominators: x = X / L
    let l = t.a.denom().lcm(t.b.denom()).lcm(t.c.denom());
    let scale = |r: &BigRational| -> BigInt { r.numer() * (&l / r.denom()) };
    let (x_a, x_b, x_c) = (scale(&t.a), scale(&t.b), scale(&t.c));
    let l4: BigInt = &l * 4u32;
    if &x_a + &x_b > l4 {
        return None;
    }
    let l2 = &l * &l;
    // R·L²
    let r: BigInt = &l2 * 8u32 + &x_a * &x_b - (&x_a + &x_b + &x_c) * &l * 2u32;
    if r.is_negative() {
        return None;
    }
    // D·L⁴
    let d = &x_a * &x_b * (&l4 - &x_a) * (&l4 - &x_b);
    if &r * &r >= d {
        Some(BigRational::new(r, l2))
    } else {
        None
    }
}

pub fn is_representable(t: &Triple) -> bool {
    membership_slack(t).is_some()
}

/// `c(x) = (2 - a/x)(2 - b/(2-x))`, the largest `c` reachable with `a1 = x`
/// and `b1 = 2 - x`. A zero numerator makes its quotient zero.
fn c_of_x(a: &BigRational, b: &BigRational, x: &BigRational) -> BigRational {
    let two = int(2);
    let a2 = if a.is_zero() { BigRational::zero() } else { a / x };
    let b3 = if b.is_zero() { BigRational::zero() } else { b / (&two - x) };
    (&two - a2) * (&two - b3)
}

fn c_of_x_f64(a: f64, b: f64, x: f64) -> f64 {
    let a2 = if a == 0.0 { 0.0 } else { a / x };
    let b3 = if b == 0.0 { 0.0 } else { b / (2.0 - x) };
    (2.0 - a2) * (2.0 - b3)
}

fn split_at(a: &BigRational, b: &BigRational, x: BigRational) -> EdgeSplit {
    let two = int(2);
    let a2 = a / &x;
    let b1 = &two - &x;
    let b3 = b / &b1;
    let c2 = &two - &a2;
    let c3 = &two - &b3;
    EdgeSplit::from_values([x, a2, b1, b3, c2, c3])
}

/// A rational `x` in `[a/2, 2 - b/2]` with `c(x) >= c`, for `a, b > 0`.
fn find_x(t: &Triple) -> Option<BigRational> {
    let (a, b, c) = (&t.a, &t.b, &t.c);
    let four = int(4);
    if a == b {
        return Some(BigRational::one());
    }
    // the maximiser x1 = 2a(4-b) / (a(4-b) + sqrt(D)) is rational iff D is a square
    let d = a * b * (&four - a) * (&four - b);
    let a4b = a * (&four - b);
    if let Some(s) = exact_sqrt(&d) {
        let x1 = int(2) * &a4b / (&a4b + s);
        if c_of_x(a, b, &x1) >= *c {
            return Some(x1);
        }
    }
    // c(x) rises while g(x) = (a-b)x² - a(4-b)x + a(4-b) > 0 and falls after
    let g = |x: &BigRational| (a - b) * x * x - &a4b * x + &a4b;
    let mut lo = a / int(2);
    let mut hi = int(2) - b / int(2);
    for _ in 0..10_000 {
        let mid = (&lo + &hi) / int(2);
        if c_of_x(a, b, &mid) >= *c {
            return Some(mid);
        }
        if g(&mid).is_positive() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lo = a / int(2);
    let width = int(2) - b / int(2) - &lo;
    (0..=1000)
        .map(|i| &lo + &width * BigRational::new(BigInt::from(i), BigInt::from(1000)))
        .find(|x| c_of_x(a, b, x) >= *c)
}

/// Splits a representable triple with `a1·a2 = a` and `b1·b3 = b` exactly;
/// `c2` is scaled down so that `c2·c3 = c` whenever `c > 0`.
pub fn decompose(t: &Triple) -> Result<EdgeSplit, ReprError> {
    if !is_representable(t) {
        return Err(ReprError::NotRepresentable(t.clone()));
    }
    let (a, b, c) = (&t.a, &t.b, &t.c);
    let zero = BigRational::zero;
    let two = || int(2);
    let mut split = match (a.is_zero(), b.is_zero()) {
        (true, true) => EdgeSplit::from_values([zero(), zero(), zero(), zero(), two(), two()]),
        (true, false) => {
            let b3 = b / two();
            EdgeSplit::from_values([zero(), zero(), two(), b3.clone(), two(), two() - b3])
        }
        (false, true) => {
            let a2 = a / two();
            EdgeSplit::from_values([two(), a2.clone(), zero(), zero(), two() - a2, two()])
        }
        (false, false) => {
            let x = find_x(t).ok_or_else(|| ReprError::SearchExhausted(t.clone()))?;
            split_at(a, b, x)
        }
    };
    if c.is_positive() {
        split.c2 = c / &split.c3;
    }
    debug_assert!(split.is_valid());
    Ok(split)
}

const COMPACT_BITS: [usize; 6] = [8, 16, 24, 32, 48, 64];

/// A split that dominates `t` (products at least `t`) using dyadic values of
/// at most 64 fractional bits when the triple leaves room for rounding, and
/// the exact [`decompose`] split otherwise.
pub fn decompose_compact(t: &Triple) -> Result<EdgeSplit, ReprError> {
    if !is_representable(t) {
        return Err(ReprError::NotRepresentable(t.clone()));
    }
    for bits in COMPACT_BITS {
        if let Some(s) = dyadic_split(t, bits) {
            debug_assert!(s.dominates(t));
            return Ok(s);
        }
    }
    decompose(t)
}

fn dyadic_split(t: &Triple, bits: usize) -> Option<EdgeSplit> {
    let (a, b, c) = (&t.a, &t.b, &t.c);
    let two = int(2);
    let zero = BigRational::zero;
    let candidate = match (a.is_zero(), b.is_zero()) {
        (true, true) => EdgeSplit::from_values([zero(), zero(), zero(), zero(), two.clone(), two.clone()]),
        (true, false) => {
            let b3 = ceil_dyadic(&(b / &two), bits);
            EdgeSplit::from_values([zero(), zero(), two.clone(), b3.clone(), two.clone(), &two - b3])
        }
        (false, true) => {
            let a2 = ceil_dyadic(&(a / &two), bits);
            EdgeSplit::from_values([two.clone(), a2.clone(), zero(), zero(), &two - a2, two.clone()])
        }
        (false, false) => {
            let (af, bf) = (to_f64(a), to_f64(b));
            let root = (af * bf * (4.0 - af) * (4.0 - bf)).max(0.0).sqrt();
            let x0 = from_f64(2.0 * af * (4.0 - bf) / (af * (4.0 - bf) + root));
            let mut found = None;
            for x in [floor_dyadic(&x0, bits), ceil_dyadic(&x0, bits)] {
                if !x.is_positive() || x >= two {
                    continue;
                }
                let a2 = ceil_dyadic(&(a / &x), bits);
                let b1 = &two - &x;
                let b3 = ceil_dyadic(&(b / &b1), bits);
                if a2 > two || b3 > two {
                    continue;
                }
                let (c2, c3) = (&two - &a2, &two - &b3);
                if &c2 * &c3 >= *c {
                    found = Some(EdgeSplit::from_values([x, a2, b1, b3, c2, c3]));
                    break;
                }
            }
            return found;
        }
    };
    (candidate.products().c >= *c).then_some(candidate)
}

/// One-sided grid oracle over the family `a1 = x, b1 = 2 - x`: true only if
/// some grid point `x` in `[a/2, 2 - b/2]` reaches `c(x) >= c` exactly.
/// The scan locates the best grid point in floating point and confirms it
/// (and its neighbours) with exact arithmetic.
pub fn brute_force_representable(t: &Triple, grid_n: usize) -> bool {
    assert!(grid_n >= 2, "grid needs at least two points");
    let four = int(4);
    if !t.is_nonnegative() || t.a > four || t.b > four || t.c > four || &t.a + &t.b > four {
        return false;
    }
    let lo = &t.a / int(2);
    let hi = int(2) - &t.b / int(2);
    let (af, bf) = (to_f64(&t.a), to_f64(&t.b));
    let (lof, hif) = (to_f64(&lo), to_f64(&hi));
    let last = (grid_n - 1) as f64;
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..grid_n {
        let x = lof + (hif - lof) * (i as f64) / last;
        let v = c_of_x_f64(af, bf, x);
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    let width = &hi - &lo;
    let den = BigInt::from(grid_n - 1);
    let lo_i = best.saturating_sub(1);
    let hi_i = (best + 1).min(grid_n - 1);
    (lo_i..=hi_i).any(|i| {
        let x = &lo + &width * BigRational::new(BigInt::from(i), den.clone());
        if t.a.is_positive() && !x.is_positive() {
            return false;
        }
        if t.b.is_positive() && x >= int(2) {
            return false;
        }
        c_of_x(&t.a, &t.b, &x) >= t.c
    })
}

/// Closed-form second derivatives of `f` on the open domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hessian {
    pub faa: f64,
    pub fbb: f64,
    pub fab: f64,
}

impl Hessian {
    pub fn det(&self) -> f64 {
        self.faa * self.fbb - self.fab * self.fab
    }
}

/// `∂²f/∂a² = 2/(a(4-a)) · sqrt(b(4-b) / (a(4-a)))`, symmetric for `b`, and
/// `∂²f/∂a∂b = 1/2 - (2-a)(2-b) / (2 sqrt(ab(4-a)(4-b)))`.
pub fn hessian_closed_form(a: f64, b: f64) -> Hessian {
    let pa = a * (4.0 - a);
    let pb = b * (4.0 - b);
    Hessian {
        faa: 2.0 / pa * (pb / pa).sqrt(),
        fbb: 2.0 / pb * (pa / pb).sqrt(),
        fab: 0.5 - (2.0 - a) * (2.0 - b) / (2.0 * (pa * pb).sqrt()),
    }
}

/// Numerator of the closed-form Hessian determinant,
/// `16 - ((sqrt((4-a)(4-b)) - sqrt(ab))² / 2 - 4)²`, evaluated as
/// `4f(4-f)` since the squared difference is `4f`.
pub fn det_numerator(a: f64, b: f64) -> f64 {
    let f = f_value(a, b).unwrap_or(f64::NAN);
    4.0 * f * (4.0 - f)
}

/// Closed-form Hessian determinant: the numerator over `4ab(4-a)(4-b)`.
pub fn det_closed_form(a: f64, b: f64) -> f64 {
    det_numerator(a, b) / (4.0 * a * b * (4.0 - a) * (4.0 - b))
}

fn in_open_domain(a: f64, b: f64) -> bool {
    a > 0.0 && b > 0.0 && a + b < 4.0
}

/// Second derivatives of `f_value` by central differences with three
/// Richardson extrapolation steps.
pub fn hessian_finite_difference(a: f64, b: f64) -> Hessian {
    let f = |x: f64, y: f64| f_value(x, y).expect("stencil inside the domain");
    let margin = a.min(b).min((4.0 - a - b) / 2.0);
    let h = (margin * 0.2).min(0.05);
    let daa = |h: f64| (f(a + h, b) - 2.0 * f(a, b) + f(a - h, b)) / (h * h);
    let dbb = |h: f64| (f(a, b + h) - 2.0 * f(a, b) + f(a, b - h)) / (h * h);
    let dab = |h: f64| (f(a + h, b + h) - f(a + h, b - h) - f(a - h, b + h) + f(a - h, b - h)) / (4.0 * h * h);
    // steps h, h/2, h/4, h/8; each column cancels the next even power of h
    let rich = |d: &dyn Fn(f64) -> f64| {
        let mut t: Vec<f64> = (0..4).map(|i| d(h / f64::from(1 << i))).collect();
        for j in 1..4 {
            let w = f64::from(1 << (2 * j));
            t = t.windows(2).map(|p| (w * p[1] - p[0]) / (w - 1.0)).collect();
        }
        t[0]
    };
    Hessian {
        faa: rich(&daa),
        fbb: rich(&dbb),
        fab: rich(&dab),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificatePoint {
    pub a: f64,
    pub b: f64,
    pub reason: String,
}

impl fmt::Display for CertificatePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6}): {}", self.a, self.b, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub grid_n: usize,
    pub points_checked: usize,
    pub points_skipped: usize,
    pub min_faa: f64,
    pub min_det: f64,
    pub max_rel_err_faa: f64,
    pub max_rel_err_det: f64,
}

/// Checks on an interior grid of `{a, b > 0, a + b < 4}` that both leading
/// principal minors of the closed-form Hessian are positive and that each
/// agrees with finite differences of `f_value` within relative error `tol`.
/// Grid coordinates are `4i/(grid_n+1)` for `i = 1..=grid_n`.
pub fn convexity_certificate(grid_n: usize, tol: f64) -> Result<ConvexityReport, ReprError> {
    let mut report = ConvexityReport {
        grid_n,
        points_checked: 0,
        points_skipped: 0,
        min_faa: f64::INFINITY,
        min_det: f64::INFINITY,
        max_rel_err_faa: 0.0,
        max_rel_err_det: 0.0,
    };
    let mut failures = Vec::new();
    let step = 4.0 / (grid_n as f64 + 1.0);
    for i in 1..=grid_n {
        for j in 1..=grid_n {
            let (a, b) = (step * i as f64, step * j as f64);
            if i + j >= grid_n + 1 || !in_open_domain(a, b) {
                report.points_skipped += 1;
                continue;
            }
            report.points_checked += 1;
            let cf = hessian_closed_form(a, b);
            let det = det_closed_form(a, b);
            let fd = hessian_finite_difference(a, b);
            let err_faa = ((fd.faa - cf.faa) / cf.faa).abs();
            let err_det = ((fd.det() - det) / det).abs();
            report.min_faa = report.min_faa.min(cf.faa);
            report.min_det = report.min_det.min(det);
            report.max_rel_err_faa = report.max_rel_err_faa.max(err_faa);
            report.max_rel_err_det = report.max_rel_err_det.max(err_det);
            let mut fail = |reason: String| failures.push(CertificatePoint { a, b, reason });
            if !(cf.faa > 0.0) {
                fail(format!("f_aa = {} is not positive", cf.faa));
            }
            if !(det > 0.0) {
                fail(format!("det = {det} is not positive"));
            }
            if !(err_faa <= tol) {
                fail(format!("f_aa finite-difference relative error {err_faa:e}"));
            }
            if !(err_det <= tol) {
                fail(format!("det finite-difference relative error {err_det:e}"));
            }
            // the closed-form determinant must equal the product form
            let direct = cf.det();
            if !(((direct - det) / det).abs() <= tol) {
                fail(format!("closed forms disagree: {direct} vs {det}"));
            }
        }
    }
    if failures.is_empty() {
        Ok(report)
    } else {
        Err(ReprError::CertificateFailure(failures))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncurvednessReport {
    pub pairs: usize,
    pub combinations_checked: usize,
    pub violations: Vec<(Triple, Triple, BigRational)>,
}

/// Number of `q` values in `[0, 1]` tried per pair.
pub const Q_STEPS: usize = 100;

/// Convex combinations `q·s + (1-q)·s'` over a `Q_STEPS`-point grid of `q`
/// that land in the representable set.
pub fn incurved_violations(s: &Triple, s_prime: &Triple) -> Vec<BigRational> {
    let den = BigInt::from(Q_STEPS - 1);
    (0..Q_STEPS)
        .map(|i| BigRational::new(BigInt::from(i), den.clone()))
        .filter(|q| is_representable(&s.lerp(s_prime, q)))
        .collect()
}

/// Draws `samples` pairs of non-representable triples with components in
/// `{k/1000 : 0 <= k <= 4000}` and checks that no convex combination on
/// the `q` grid is representable.
pub fn incurvedness_spotcheck(samples: usize, seed: u64) -> IncurvednessReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let den = BigInt::from(1000);
    let draw = |rng: &mut ChaCha8Rng| loop {
        let mut c = || BigRational::new(BigInt::from(rng.gen_range(0..=4000u32)), den.clone());
        let t = Triple::new(c(), c(), c());
        if !is_representable(&t) {
            return t;
        }
    };
    let mut report = IncurvednessReport {
        pairs: samples,
        combinations_checked: 0,
        violations: Vec::new(),
    };
    for _ in 0..samples {
        let s = draw(&mut rng);
        let s_prime = draw(&mut rng);
        report.combinations_checked += Q_STEPS;
        for q in incurved_violations(&s, &s_prime) {
            report.violations.push((s.clone(), s_prime.clone(), q));
        }
    }
    report
}

/// `(a, b, f(a, b))` on the grid `a, b ∈ {0, step, 2·step, …}` with
/// `a + b <= 4`.
pub fn surface_mesh(step: f64) -> Result<Vec<(f64, f64, f64)>, ReprError> {
    if !(step > 0.0 && step <= 4.0) {
        return Err(ReprError::DomainError { a: step, b: step });
    }
    let n = (4.0 / step + 1e-9).floor() as usize;
    let mut out = Vec::new();
    for i in 0..=n {
        for j in 0..=(n - i) {
            let (a, b) = (i as f64 * step, j as f64 * step);
            if a + b <= 4.0 {
                out.push((a, b, f_value(a, b)?));
            }
        }
    }
    Ok(out)
}
