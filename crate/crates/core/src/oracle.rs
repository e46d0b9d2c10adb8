//! Brute-force ground truth used to check certificates.
//!
//! Nothing here calls into the certificate, Fisher or divergence code: the
//! 1-D Wasserstein distance goes through quantile functions, the quadrature
//! posterior uses Gauss–Legendre panels on its own grid, and derivative checks
//! use plain central differences.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{check_dim, DiffLogDensity, GaussianMeasure, Univariate};

/// Anything with a usable inverse CDF.
pub trait InverseCdf: Sync {
    fn quantile(&self, u: f64) -> f64;
    /// `F^{-1}(1 - q)`, accurate for tiny `q`.
    fn upper_quantile(&self, q: f64) -> f64;
}

impl<T: Univariate + ?Sized> InverseCdf for T {
    fn quantile(&self, u: f64) -> f64 {
        Univariate::quantile(self, u)
    }
    fn upper_quantile(&self, q: f64) -> f64 {
        Univariate::upper_quantile(self, q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridScheme {
    /// `u_i = (i - ½)/m`, equal weights.
    Midpoint { m: usize },
    /// Trapezoid in `s = logit(u)` over `[-half_width, half_width]`.
    Logit { half_width: f64, step: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Node {
    u: f64,
    /// `1 - u`, computed without cancellation.
    q: f64,
    weight: f64,
}

/// Nodes and weights on `(0, 1)`, symmetric about ½.
#[derive(Debug, Clone)]
pub struct QuantileGrid {
    scheme: GridScheme,
    nodes: Vec<Node>,
}

impl Default for QuantileGrid {
    /// The logit grid: the midpoint rule loses the quantile tails and converges
    /// only like `log m / m` for `p = 2`.
    fn default() -> Self {
        Self::logit(80.0, 0.25)
    }
}

impl QuantileGrid {
    pub fn midpoint(m: usize) -> Self {
        assert!(m >= 2, "midpoint grid needs at least two nodes");
        let mf = m as f64;
        let nodes = (0..m)
            .map(|i| Node {
                u: (i as f64 + 0.5) / mf,
                q: ((m - i) as f64 - 0.5) / mf,
                weight: 1.0 / mf,
            })
            .collect();
        Self {
            scheme: GridScheme::Midpoint { m },
            nodes,
        }
    }

    pub fn logit(half_width: f64, step: f64) -> Self {
        assert!(half_width > 0.0 && step > 0.0);
        let n = (half_width / step).round() as i64;
        let nodes = (-n..=n)
            .map(|i| {
                let s = i as f64 * step;
                let u = 1.0 / (1.0 + (-s).exp());
                let q = 1.0 / (1.0 + s.exp());
                let end = if i.abs() == n { 0.5 } else { 1.0 };
                Node {
                    u,
                    q,
                    weight: end * step * u * q,
                }
            })
            .collect();
        Self {
            scheme: GridScheme::Logit { half_width, step },
            nodes,
        }
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn u_nodes(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.u).collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The next grid in the refinement sequence.
    pub fn refined(&self) -> Self {
        match self.scheme {
            GridScheme::Midpoint { m } => Self::midpoint(2 * m),
            GridScheme::Logit { half_width, step } => Self::logit(half_width, 0.5 * step),
        }
    }

    fn max_refinements(&self) -> usize {
        match self.scheme {
            GridScheme::Midpoint { .. } => 5,
            GridScheme::Logit { .. } => 8,
        }
    }
}

fn eval_quantiles<Q: InverseCdf + ?Sized>(f: &Q, nodes: &[Node]) -> Vec<f64> {
    nodes
        .par_iter()
        .map(|n| if n.u <= 0.5 { f.quantile(n.u) } else { f.upper_quantile(n.q) })
        .collect()
}

fn check_monotone(x: &[f64], nodes: &[Node]) -> Result<()> {
    for i in 1..x.len() {
        if !x[i].is_finite() || x[i] < x[i - 1] - 1e-12 * (1.0 + x[i - 1].abs()) {
            return Err(Error::NonMonotoneQuantile { u: nodes[i].u });
        }
    }
    Ok(())
}

fn wp_on_grid<F, G>(p: f64, f: &F, g: &G, grid: &QuantileGrid) -> Result<f64>
where
    F: InverseCdf + ?Sized,
    G: InverseCdf + ?Sized,
{
    let xf = eval_quantiles(f, &grid.nodes);
    let xg = eval_quantiles(g, &grid.nodes);
    check_monotone(&xf, &grid.nodes)?;
    check_monotone(&xg, &grid.nodes)?;
    let terms: Vec<f64> = (0..grid.nodes.len())
        .into_par_iter()
        .map(|i| grid.nodes[i].weight * (xf[i] - xg[i]).abs().powf(p))
        .collect();
    let total: f64 = terms.iter().sum();
    if let GridScheme::Logit { half_width, step } = grid.scheme {
        // For odd p, |F⁻¹ - G⁻¹|^p has a kink wherever the quantile functions
        // cross, and the trapezoid rule drops to second order. Split there
        // and integrate each smooth piece with Gauss–Legendre panels instead.
        if p as u64 % 2 == 1 {
            let roots = crossings(f, g, &xf, &xg, step, half_width);
            if !roots.is_empty() {
                let mut cuts = vec![-half_width];
                cuts.extend(roots);
                cuts.push(half_width);
                let pieces: Vec<f64> = cuts
                    .windows(2)
                    .flat_map(|w| {
                        let n = ((w[1] - w[0]) / step).ceil().max(1.0) as usize;
                        let h = (w[1] - w[0]) / n as f64;
                        (0..n).map(move |k| (w[0] + k as f64 * h, w[0] + (k + 1) as f64 * h))
                    })
                    .collect::<Vec<_>>()
                    .par_iter()
                    .map(|&(a, b)| gl_logit_panel(p, f, g, a, b))
                    .collect();
                return Ok(pieces.iter().sum::<f64>().powf(1.0 / p));
            }
        }
    }
    Ok(total.max(0.0).powf(1.0 / p))
}

fn logit_diff<F, G>(f: &F, g: &G, s: f64) -> (f64, f64)
where
    F: InverseCdf + ?Sized,
    G: InverseCdf + ?Sized,
{
    let u = 1.0 / (1.0 + (-s).exp());
    let q = 1.0 / (1.0 + s.exp());
    let d = if u <= 0.5 {
        f.quantile(u) - g.quantile(u)
    } else {
        f.upper_quantile(q) - g.upper_quantile(q)
    };
    (d, u * q)
}

/// Points in logit coordinates where `F⁻¹ - G⁻¹` changes sign.
fn crossings<F, G>(f: &F, g: &G, xf: &[f64], xg: &[f64], step: f64, half_width: f64) -> Vec<f64>
where
    F: InverseCdf + ?Sized,
    G: InverseCdf + ?Sized,
{
    let s_of = |i: usize| -half_width + i as f64 * step;
    let d: Vec<f64> = xf.iter().zip(xg).map(|(a, b)| a - b).collect();
    let mut roots = Vec::new();
    for i in 0..d.len() - 1 {
        if d[i] == 0.0 && i > 0 && d[i - 1] * d[i + 1] < 0.0 {
            roots.push(s_of(i));
        } else if d[i] * d[i + 1] < 0.0 {
            let (mut lo, mut hi) = (s_of(i), s_of(i + 1));
            let sign_lo = d[i].signum();
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if logit_diff(f, g, mid).0.signum() == sign_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    roots
}

fn gl_logit_panel<F, G>(p: f64, f: &F, g: &G, a: f64, b: f64) -> f64
where
    F: InverseCdf + ?Sized,
    G: InverseCdf + ?Sized,
{
    let (xs, ws) = gauss_legendre(GL_ORDER);
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * xs
        .iter()
        .zip(&ws)
        .map(|(z, w)| {
            let (d, uq) = logit_diff(f, g, m + h * z);
            w * d.abs().powf(p) * uq
        })
        .sum::<f64>()
}

/// `W_p(F, G) = (∫₀¹ |F⁻¹(u) - G⁻¹(u)|^p du)^{1/p}`, refining `grid` until two
/// successive values agree to `1e-9·max(1, W_p)`.
pub fn wasserstein_1d<F, G>(p: u8, f: &F, g: &G, grid: &QuantileGrid) -> Result<f64>
where
    F: InverseCdf + ?Sized,
    G: InverseCdf + ?Sized,
{
    if p == 0 {
        return Err(invalid("p must be at least 1"));
    }
    let p = p as f64;
    let mut grid = grid.clone();
    let mut prev = wp_on_grid(p, f, g, &grid)?;
    for _ in 0..grid.max_refinements() {
        grid = grid.refined();
        let next = wp_on_grid(p, f, g, &grid)?;
        if (next - prev).abs() <= 1e-9 * next.max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!(
        "quantile grid refinement did not settle (last value {prev})"
    )))
}

fn sqrtm_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(a.clone());
    let s = e.eigenvalues.map(|v| v.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&s) * e.eigenvectors.transpose()
}

/// `W₂` between Gaussians in any dimension (Bures–Wasserstein formula).
pub fn gaussian_w2_bures(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let (ca, cb) = (a.cov(), b.cov());
    let ra = sqrtm_psd(ca);
    let commutator = (ca * cb - cb * ca).norm();
    // commuting covariances give ‖A^½ - B^½‖_F², free of the cancellation in
    // the general trace formula
    let tr = if commutator <= 1e-14 * ca.norm() * cb.norm() {
        (&ra - sqrtm_psd(cb)).norm_squared()
    } else {
        let cross = sqrtm_psd(&(&ra * cb * &ra));
        (ca + cb - cross * 2.0).trace().max(0.0)
    };
    let dm = (a.mean() - b.mean()).norm_squared();
    Ok((dm + tr).sqrt())
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

const GL_ORDER: usize = 12;
const TAIL_FLOOR: f64 = 1e-17;
const T_CAP: f64 = 60.0;

/// A 1-D density known up to a constant, normalized by brute-force quadrature.
///
/// The grid lives in `t` with `x = c + s·sinh(t)`, split into equal panels
/// each integrated by 12-point Gauss–Legendre.
pub struct QuadraturePosterior1d<'a> {
    model: &'a dyn DiffLogDensity,
    center: f64,
    scale: f64,
    t_max: f64,
    dt: f64,
    log_shift: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
    mean: f64,
    variance: f64,
    mad: f64,
}

fn safe_log_density(model: &dyn DiffLogDensity, x: f64) -> f64 {
    let v = model.log_density(&[x]);
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn locate_mode(model: &dyn DiffLogDensity) -> Result<(f64, f64)> {
    let f = |x: f64| safe_log_density(model, x);
    let pts: Vec<f64> = (-200..=200).map(|k| (k as f64 / 8.0).sinh()).collect();
    let vals: Vec<f64> = pts.iter().map(|&x| f(x)).collect();
    let (best, _) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if best == 0 || best == pts.len() - 1 || !vals[best].is_finite() {
        return Err(Error::Quadrature("log density has no interior maximum".into()));
    }
    let (mut a, mut b) = (pts[best - 1], pts[best + 1]);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-12 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mode = 0.5 * (a + b);
    let h = 1e-3 * (1.0 + mode.abs());
    let curv = -(f(mode + h) - 2.0 * f(mode) + f(mode - h)) / (h * h);
    let scale = if curv > 0.0 && curv.is_finite() { 1.0 / curv.sqrt() } else { h.max(pts[best + 1] - pts[best]) };
    Ok((mode, scale))
}

impl<'a> QuadraturePosterior1d<'a> {
    /// Locates the mode and curvature scale by search, then normalizes.
    pub fn new(model: &'a dyn DiffLogDensity) -> Result<Self> {
        check_dim(1, model.dim())?;
        let (c, s) = locate_mode(model)?;
        Self::with_grid(model, c, s)
    }

    /// Normalizes with the grid centred at `center` with width `scale`.
    pub fn with_grid(model: &'a dyn DiffLogDensity, center: f64, scale: f64) -> Result<Self> {
        check_dim(1, model.dim())?;
        if !(scale > 0.0 && scale.is_finite() && center.is_finite()) {
            return Err(invalid("grid centre must be finite and scale positive"));
        }
        let fmax = safe_log_density(model, center);
        if !fmax.is_finite() {
            return Err(Error::Quadrature("log density is not finite at the grid centre".into()));
        }
        let mut post = Self {
            model,
            center,
            scale,
            t_max: 0.0,
            dt: 0.25,
            log_shift: fmax,
            lower: Vec::new(),
            upper: Vec::new(),
            gl: gauss_legendre(GL_ORDER),
            mean: f64::NAN,
            variance: f64::NAN,
            mad: f64::NAN,
        };
        post.t_max = post.find_half_width()?;

        let mut z = post.total_mass();
        let mut converged = false;
        for _ in 0..8 {
            post.dt *= 0.5;
            let next = post.total_mass();
            let done = (next - z).abs() <= 1e-14 * next;
            z = next;
            if done {
                converged = true;
                break;
            }
        }
        if !converged || !(z > 0.0 && z.is_finite()) {
            return Err(Error::Quadrature("panel refinement did not converge".into()));
        }
        post.log_shift = fmax + z.ln();

        let np = post.n_panels();
        let masses: Vec<f64> = (0..np)
            .map(|k| post.panel_integral(post.t_of(k), post.t_of(k + 1), |_| 1.0))
            .collect();
        post.lower = std::iter::once(0.0)
            .chain(masses.iter().scan(0.0, |acc, m| {
                *acc += m;
                Some(*acc)
            }))
            .collect();
        let mut upper = vec![0.0; np + 1];
        for k in (0..np).rev() {
            upper[k] = upper[k + 1] + masses[k];
        }
        post.upper = upper;

        let tm = post.t_max;
        post.mean = post.integrate_t(-tm, tm, |x| x);
        let m = post.mean;
        post.variance = post.integrate_t(-tm, tm, |x| (x - m) * (x - m));
        let t_m = post.t_at(m);
        post.mad = post.integrate_t(-tm, t_m, |x| m - x) + post.integrate_t(t_m, tm, |x| x - m);
        Ok(post)
    }

    fn x_at(&self, t: f64) -> f64 {
        self.center + self.scale * t.sinh()
    }

    fn t_at(&self, x: f64) -> f64 {
        ((x - self.center) / self.scale).asinh()
    }

    /// Density in `t`, relative to the current shift.
    fn mapped(&self, t: f64) -> f64 {
        let x = self.x_at(t);
        (safe_log_density(self.model, x) - self.log_shift).exp() * self.scale * t.cosh()
    }

    fn find_half_width(&self) -> Result<f64> {
        let peak = (-40..=40).map(|k| self.mapped(k as f64 / 10.0)).fold(0.0f64, f64::max);
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(Error::Quadrature("density vanishes or overflows near its mode".into()));
        }
        let mut t = 4.0;
        while t <= T_CAP {
            let ok = [-1.0, 1.0].iter().all(|&side| {
                let here = self.mapped(side * t);
                let before = self.mapped(side * (t - 1.0));
                let x = self.x_at(side * t) - self.center;
                here.is_finite()
                    && here * (1.0 + (x / self.scale).powi(2)) <= TAIL_FLOOR * peak
                    && here <= 0.5 * before
            });
            if ok {
                return Ok(t);
            }
            t += 1.0;
        }
        Err(Error::Quadrature("tails do not decay fast enough for the truncation check".into()))
    }

    fn n_panels(&self) -> usize {
        (2.0 * self.t_max / self.dt).round() as usize
    }

    fn t_of(&self, k: usize) -> f64 {
        -self.t_max + k as f64 * self.dt
    }

    fn panel_integral(&self, a: f64, b: f64, h: impl Fn(f64) -> f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let (xs, ws) = &self.gl;
        half * xs
            .iter()
            .zip(ws)
            .map(|(z, w)| {
                let t = mid + half * z;
                w * self.mapped(t) * h(self.x_at(t))
            })
            .sum::<f64>()
    }

    fn total_mass(&self) -> f64 {
        (0..self.n_panels())
            .map(|k| self.panel_integral(self.t_of(k), self.t_of(k + 1), |_| 1.0))
            .sum()
    }

    fn integrate_t(&self, a: f64, b: f64, h: impl Fn(f64) -> f64 + Copy) -> f64 {
        let np = self.n_panels();
        let mut sum = 0.0;
        for k in 0..np {
            let (lo, hi) = (self.t_of(k).max(a), self.t_of(k + 1).min(b));
            if hi > lo {
                sum += self.panel_integral(lo, hi, h);
            }
        }
        sum
    }

    fn panel_of(&self, t: f64) -> usize {
        (((t + self.t_max) / self.dt).floor() as usize).min(self.n_panels() - 1)
    }

    /// Normalized density.
    pub fn pdf(&self, x: f64) -> f64 {
        (safe_log_density(self.model, x) - self.log_shift).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let t = self.t_at(x);
        if t <= -self.t_max {
            return 0.0;
        }
        if t >= self.t_max {
            return 1.0;
        }
        let k = self.panel_of(t);
        (self.lower[k] + self.panel_integral(self.t_of(k), t, |_| 1.0)).min(1.0)
    }

    /// `1 - F(x)`, accurate in the right tail.
    pub fn sf(&self, x: f64) -> f64 {
        let t = self.t_at(x);
        if t <= -self.t_max {
            return 1.0;
        }
        if t >= self.t_max {
            return 0.0;
        }
        let k = self.panel_of(t);
        (self.upper[k + 1] + self.panel_integral(t, self.t_of(k + 1), |_| 1.0)).min(1.0)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn mad(&self) -> f64 {
        self.mad
    }

    /// Total mass of the panels, which is 1 up to rounding after normalization.
    pub fn total_probability(&self) -> f64 {
        *self.lower.last().expect("grid is nonempty")
    }

    fn bisect(&self, mut lo: f64, mut hi: f64, above: impl Fn(f64) -> bool) -> f64 {
        for _ in 0..200 {
            let (xl, xh) = (self.x_at(lo), self.x_at(hi));
            if xh - xl <= 1e-12 * (1.0 + xl.abs().max(xh.abs())) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if above(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        self.x_at(0.5 * (lo + hi))
    }
}

impl InverseCdf for QuadraturePosterior1d<'_> {
    fn quantile(&self, u: f64) -> f64 {
        if u > 0.5 {
            return self.upper_quantile(1.0 - u);
        }
        let np = self.n_panels();
        if u <= 0.0 {
            return self.x_at(-self.t_max);
        }
        let k = self.lower.partition_point(|&c| c <= u).saturating_sub(1).min(np - 1);
        let (a, b) = (self.t_of(k), self.t_of(k + 1));
        self.bisect(a, b, |t| self.lower[k] + self.panel_integral(a, t, |_| 1.0) >= u)
    }

    fn upper_quantile(&self, q: f64) -> f64 {
        if q >= 0.5 {
            return self.quantile(1.0 - q);
        }
        let np = self.n_panels();
        if q <= 0.0 {
            return self.x_at(self.t_max);
        }
        let j = self.upper.partition_point(|&c| c > q);
        let k = j.saturating_sub(1).min(np - 1);
        let (a, b) = (self.t_of(k), self.t_of(k + 1));
        self.bisect(a, b, |t| self.upper[k + 1] + self.panel_integral(t, b, |_| 1.0) <= q)
    }
}

fn fd_step(v: f64) -> f64 {
    1e-5 * (1.0 + v.abs())
}

/// Largest component-wise error of `grad` against central differences of `f`,
/// relative to `max(1, |grad|)`.
pub fn finite_diff_check(
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    points: &[Vec<f64>],
) -> f64 {
    let mut worst = 0.0f64;
    for x in points {
        let g = grad(x);
        let mut y = x.clone();
        for i in 0..x.len() {
            let h = fd_step(x[i]);
            y[i] = x[i] + h;
            let fp = f(&y);
            y[i] = x[i] - h;
            let fm = f(&y);
            y[i] = x[i];
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
        }
    }
    worst
}

/// The same check for a Hessian against differences of the gradient.
pub fn finite_diff_hessian_check(
    grad: impl Fn(&[f64]) -> Vec<f64>,
    hess: impl Fn(&[f64]) -> DMatrix<f64>,
    points: &[Vec<f64>],
) -> f64 {
    let mut worst = 0.0f64;
    for x in points {
        let hm = hess(x);
        let mut y = x.clone();
        for j in 0..x.len() {
            let h = fd_step(x[j]);
            y[j] = x[j] + h;
            let gp = grad(&y);
            y[j] = x[j] - h;
            let gm = grad(&y);
            y[j] = x[j];
            for i in 0..x.len() {
                let fd = (gp[i] - gm[i]) / (2.0 * h);
                worst = worst.max((fd - hm[(i, j)]).abs() / hm[(i, j)].abs().max(1.0));
            }
        }
    }
    worst
}
