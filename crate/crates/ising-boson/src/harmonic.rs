//! Green's function, its regular part and harmonic measures of circular
//! domains, with analytic first and second complex derivatives.
//!
//! Conventions: `G(z, w)` is harmonic in each variable off the diagonal,
//! vanishes on the boundary and behaves like `-log|z - w|`; the regular part
//! is `g(z, w) = G(z, w) + log|z - w|`, and `g(z, z)` denotes its diagonal.
//! Complex derivatives are Wirtinger derivatives `∂ = (∂x - i∂y)/2`.
//!
//! General circles are handled by reflecting the source point once in every
//! boundary circle (which makes the boundary data exact on that circle) and
//! solving for the smooth remainder by least-squares collocation with the
//! basis `{1} ∪ {log|z - c_m|} ∪ {Re, Im of (z - c_0)^p/R_0^p, (r_m/(z - c_m))^p}`.
//! Disks, concentric annuli and the upper half-plane use closed forms.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Circle, CircularDomain, DomainModel, FreeArc, Scene};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Candidate multipole orders of the adaptive collocation solver.
const ORDERS: [usize; 9] = [8, 12, 16, 24, 32, 48, 64, 96, 128];

/// Solver backend actually used for a scene.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    /// Image-charge closed form on a disk.
    Disk,
    /// Closed form on the upper half-plane.
    HalfPlaneModel,
    /// Product-formula closed form on a concentric annulus.
    Annulus,
    /// Least-squares boundary collocation.
    Collocation {
        /// Multipole order per circle.
        order: usize,
        /// Collocation nodes per circle.
        nodes_per_circle: usize,
        /// Largest boundary residual observed on the check set.
        residual: f64,
    },
}

/// Options controlling backend selection and collocation accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Boundary residual tolerance for the collocation backend.
    pub tolerance: f64,
    /// Use collocation even when a closed form exists.
    pub force_collocation: bool,
    /// Minimal separation between distinct evaluation points.
    pub separation: f64,
}

impl SolverOptions {
    pub fn from_scene(scene: &Scene) -> Self {
        SolverOptions {
            tolerance: scene.tolerances.boundary,
            force_collocation: false,
            separation: scene.tolerances.separation,
        }
    }
}

/// Green's function and its first/mixed derivatives at `(z, w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenDerivs {
    pub value: f64,
    /// `∂_z G(z, w)`.
    pub dz: Complex64,
    /// `∂_z ∂_w G(z, w)`.
    pub dz_dw: Complex64,
    /// `∂_z ∂_w̄ G(z, w)`.
    pub dz_dwbar: Complex64,
}

/// Diagonal regular part `g(z, z)` and derivatives along the diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularDerivs {
    pub value: f64,
    /// `∂_z [g(z, z)]`.
    pub dz: Complex64,
    /// `∂_z ∂_z̄ [g(z, z)]`.
    pub dz_dzbar: f64,
}

/// Value and `∂_z` of a real harmonic function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueGrad {
    pub value: f64,
    pub dz: Complex64,
}

// ---------------------------------------------------------------------------
// Collocation basis

#[derive(Debug, Clone)]
struct Basis {
    circles: Vec<Circle>,
    order: usize,
}

impl Basis {
    fn genus(&self) -> usize {
        self.circles.len() - 1
    }

    fn ncols(&self) -> usize {
        1 + self.genus() + 2 * self.order * self.circles.len()
    }

    /// Fill basis values and (optionally) `∂_z` of each basis function.
    fn eval(&self, z: Complex64, vals: &mut [f64], mut ders: Option<&mut [Complex64]>) {
        let g = self.genus();
        vals[0] = 1.0;
        if let Some(d) = ders.as_deref_mut() {
            d[0] = Complex64::new(0.0, 0.0);
        }
        for m in 1..=g {
            let dz = z - self.circles[m].center;
            vals[m] = dz.norm().ln();
            if let Some(d) = ders.as_deref_mut() {
                d[m] = 0.5 / dz;
            }
        }
        let mut col = 1 + g;
        for (q, c) in self.circles.iter().enumerate() {
            let (u, du_over_u) = if q == 0 {
                let u = (z - c.center) / c.radius;
                (u, 1.0 / (z - c.center))
            } else {
                let u = c.radius / (z - c.center);
                (u, -1.0 / (z - c.center))
            };
            let mut pw = Complex64::new(1.0, 0.0);
            for p in 1..=self.order {
                pw *= u;
                vals[col] = pw.re;
                vals[col + 1] = pw.im;
                if let Some(d) = ders.as_deref_mut() {
                    // F = u^p, F' = p u^p (u'/u).
                    let fp = pw * du_over_u * p as f64;
                    d[col] = 0.5 * fp;
                    d[col + 1] = -0.5 * I * fp;
                }
                col += 2;
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Collocation {
    basis: Basis,
    /// Collocation nodes `(circle index, point)`.
    nodes: Vec<(usize, Complex64)>,
    /// Off-grid check points `(circle index, point)`.
    checks: Vec<(usize, Complex64)>,
    pinv: DMatrix<f64>,
}

impl Collocation {
    fn build(circles: &[Circle], order: usize) -> Collocation {
        let basis = Basis { circles: circles.to_vec(), order };
        let n_per = if order == 0 { 1 } else { 4 * order + 8 };
        let mut nodes = Vec::new();
        let mut checks = Vec::new();
        for (q, c) in circles.iter().enumerate() {
            for t in 0..n_per {
                let th = 2.0 * PI * (t as f64 + 0.25) / n_per as f64;
                nodes.push((q, c.point(th)));
                let th2 = 2.0 * PI * (t as f64 + 0.75) / n_per as f64;
                checks.push((q, c.point(th2)));
            }
        }
        let ncols = basis.ncols();
        let mut a = DMatrix::<f64>::zeros(nodes.len(), ncols);
        let mut row = vec![0.0; ncols];
        for (r, &(_, z)) in nodes.iter().enumerate() {
            basis.eval(z, &mut row, None);
            for (c, v) in row.iter().enumerate() {
                a[(r, c)] = *v;
            }
        }
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let pinv = svd.pseudo_inverse(1e-13 * smax).expect("SVD computed with both factors");
        Collocation { basis, nodes, checks, pinv }
    }

    fn nodes_per_circle(&self) -> usize {
        self.nodes.len() / self.basis.circles.len()
    }

    fn solve(&self, data: &DVector<f64>) -> DVector<f64> {
        &self.pinv * data
    }

    fn eval(&self, coef: &DVector<f64>, z: Complex64) -> ValueGrad {
        let n = self.basis.ncols();
        let mut vals = vec![0.0; n];
        let mut ders = vec![Complex64::new(0.0, 0.0); n];
        self.basis.eval(z, &mut vals, Some(&mut ders));
        let mut value = 0.0;
        let mut dz = Complex64::new(0.0, 0.0);
        for b in 0..n {
            value += coef[b] * vals[b];
            dz += ders[b] * coef[b];
        }
        ValueGrad { value, dz }
    }

    /// Max deviation on check points between the expansion and `target`.
    fn residual(&self, coef: &DVector<f64>, target: impl Fn(usize, Complex64) -> f64) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for &(q, z) in &self.checks {
            let t = target(q, z);
            scale = scale.max(t.abs());
            worst = worst.max((self.eval(coef, z).value - t).abs());
        }
        worst / scale
    }
}

// ---------------------------------------------------------------------------
// Image terms T_m(z, w) = log|(z - c_m)(w̄ - c̄_m) - ρ_m²| - log ρ_m, which
// equal log|z - w| for z on circle m and are harmonic in the domain.

#[inline]
fn image_a(c: &Circle, z: Complex64, w: Complex64) -> Complex64 {
    (z - c.center) * (w - c.center).conj() - c.radius * c.radius
}

#[inline]
fn image_t(c: &Circle, z: Complex64, w: Complex64) -> f64 {
    image_a(c, z, w).norm().ln() - c.radius.ln()
}

/// `∂_z T(z, w)`.
#[inline]
fn image_dz(c: &Circle, z: Complex64, w: Complex64) -> Complex64 {
    0.5 * (w - c.center).conj() / image_a(c, z, w)
}

/// `∂_w T(z, w)`.
#[inline]
fn image_dw(c: &Circle, z: Complex64, w: Complex64) -> Complex64 {
    0.5 * (z - c.center).conj() / image_a(c, z, w).conj()
}

/// `∂_z ∂_w̄ T(z, w)` (the `∂_z ∂_w` derivative vanishes identically).
#[inline]
fn image_dz_dwbar(c: &Circle, z: Complex64, w: Complex64) -> Complex64 {
    let a = image_a(c, z, w);
    -0.5 * c.radius * c.radius / (a * a)
}

// ---------------------------------------------------------------------------
// Concentric annulus closed form: with p = ρ², the product
// P(x) = (1 - x) Π_n (1 - p^n x)(1 - p^n / x) gives
// G = log|P(ζ w̄)| - log|P(ζ/ω)| + log|ζ| log|ω| / log ρ - log|ω|.

#[derive(Debug, Clone)]
struct AnnulusForm {
    center: Complex64,
    outer: f64,
    rho: f64,
    terms: usize,
}

impl AnnulusForm {
    fn new(center: Complex64, outer: f64, inner: f64) -> Self {
        let rho = inner / outer;
        let p = rho * rho;
        // p^n / p < 1e-18 guarantees convergence for |x| in (p, 1/p).
        let terms = ((18.0 * std::f64::consts::LN_10) / (-p.ln())).ceil() as usize + 2;
        AnnulusForm { center, outer, rho, terms }
    }

    fn zeta(&self, z: Complex64) -> Complex64 {
        (z - self.center) / self.outer
    }

    fn log_rho(&self) -> f64 {
        self.rho.ln()
    }

    /// `log|P(x)|` with or without the singular factor `(1 - x)`.
    fn log_abs_p(&self, x: Complex64, singular: bool) -> f64 {
        let p = self.rho * self.rho;
        let one = Complex64::new(1.0, 0.0);
        let mut s = if singular { (one - x).norm().ln() } else { 0.0 };
        let mut pn = 1.0;
        for _ in 0..self.terms {
            pn *= p;
            s += (one - x * pn).norm().ln() + (one - pn / x).norm().ln();
        }
        s
    }

    /// `L(x) = x P'(x)/P(x)`, optionally without the singular term.
    fn l(&self, x: Complex64, singular: bool) -> Complex64 {
        let p = self.rho * self.rho;
        let one = Complex64::new(1.0, 0.0);
        let mut s = if singular { -x / (one - x) } else { Complex64::new(0.0, 0.0) };
        let mut pn = 1.0;
        for _ in 0..self.terms {
            pn *= p;
            s += -x * pn / (one - x * pn) + (pn / x) / (one - pn / x);
        }
        s
    }

    /// `L'(x)`, optionally without the singular term.
    fn lp(&self, x: Complex64, singular: bool) -> Complex64 {
        let p = self.rho * self.rho;
        let one = Complex64::new(1.0, 0.0);
        let mut s = if singular { -one / ((one - x) * (one - x)) } else { Complex64::new(0.0, 0.0) };
        let mut pn = 1.0;
        for _ in 0..self.terms {
            pn *= p;
            let a = one - x * pn;
            let b = x - pn;
            s += -pn / (a * a) - pn / (b * b);
        }
        s
    }

    /// Regular part `H = G + log|z - w|` with derivatives.
    fn regular(&self, z: Complex64, w: Complex64) -> GreenDerivs {
        let (zt, wt) = (self.zeta(z), self.zeta(w));
        let lr = self.log_rho();
        let x1 = zt * wt.conj();
        let x2 = zt / wt;
        let value = self.log_abs_p(x1, true) - self.log_abs_p(x2, false) - (Complex64::new(1.0, 0.0) - x2).norm().ln()
            + (zt - wt).norm().ln()
            + self.outer.ln()
            + zt.norm().ln() * wt.norm().ln() / lr
            - wt.norm().ln();
        let r = self.outer;
        let dz = (self.l(x1, true) / (2.0 * zt) - self.l(x2, false) / (2.0 * zt) + wt.norm().ln() / (2.0 * zt * lr)) / r;
        let dz_dw_reg = (self.lp(x2, false) / (2.0 * wt * wt) + 1.0 / (4.0 * zt * wt * lr)) / (r * r);
        let dz_dwbar = (0.5 * self.lp(x1, true) + 1.0 / (4.0 * zt * wt.conj() * lr)) / (r * r);
        GreenDerivs { value, dz, dz_dw: dz_dw_reg, dz_dwbar }
    }

    fn diagonal(&self, z: Complex64) -> RegularDerivs {
        let zt = self.zeta(z);
        let lr = self.log_rho();
        let m2 = zt.norm_sqr();
        let x = Complex64::new(m2, 0.0);
        let p = self.rho * self.rho;
        let mut ptilde = 0.0;
        let mut pn = 1.0;
        for _ in 0..self.terms {
            pn *= p;
            ptilde += 2.0 * (1.0 - pn).ln();
        }
        let lz = zt.norm().ln();
        let value = self.log_abs_p(x, true) - ptilde + lz * lz / lr + self.outer.ln();
        let dz = (self.l(x, true) + lz / lr) / (self.outer * zt);
        let dz_dzbar = (self.lp(x, true).re + 1.0 / (2.0 * m2 * lr)) / (self.outer * self.outer);
        RegularDerivs { value, dz, dz_dzbar }
    }

    fn hole_measure(&self, z: Complex64) -> ValueGrad {
        let zt = self.zeta(z);
        let lr = self.log_rho();
        ValueGrad { value: zt.norm().ln() / lr, dz: 1.0 / (2.0 * zt * lr * self.outer) }
    }
}

// ---------------------------------------------------------------------------
// Arc harmonic measures: singular part σ S(z) with
// S(z) = (1/π) arg((z - b₂)/(z - b₁)) on holes (cut along the chord inside the
// hole) and (1/π) arg(-(z - b₂)/(z - b₁)) on the outer circle (cut along the
// chord's outward extensions), plus a smooth correction.

#[derive(Debug, Clone)]
struct ArcMeasure {
    component: usize,
    b1: Complex64,
    b2: Complex64,
    outer: bool,
    sign: f64,
    /// Correction: collocation coefficients (or a constant for disks).
    correction: Correction,
}

#[derive(Debug, Clone)]
enum Correction {
    Constant(f64),
    Expansion(DVector<f64>),
}

impl ArcMeasure {
    fn singular(&self, z: Complex64) -> ValueGrad {
        let ratio = (z - self.b2) / (z - self.b1);
        let ratio = if self.outer { -ratio } else { ratio };
        let value = self.sign * ratio.arg() / PI;
        let dz = self.sign * (1.0 / (z - self.b2) - 1.0 / (z - self.b1)) / (2.0 * PI * I);
        ValueGrad { value, dz }
    }
}

#[derive(Debug, Clone)]
enum Measure {
    Constant(f64),
    Expansion(DVector<f64>),
    AnnulusHole,
    AnnulusOuter,
}

/// Solved harmonic data of a scene; immutable and thread-safe.
#[derive(Debug, Clone)]
pub struct HarmonicSolver {
    model: DomainModel,
    circles: Vec<Circle>,
    backend: Backend,
    colloc: Option<Collocation>,
    annulus: Option<AnnulusForm>,
    measures: Vec<Measure>,
    arcs: Vec<ArcMeasure>,
    separation: f64,
}

impl HarmonicSolver {
    /// Solve with the scene's tolerances, preferring closed forms.
    pub fn new(scene: &Scene) -> Result<Self> {
        Self::with_options(scene, &SolverOptions::from_scene(scene))
    }

    /// Solve with explicit options.
    pub fn with_options(scene: &Scene, opts: &SolverOptions) -> Result<Self> {
        let domain = match &scene.model {
            DomainModel::HalfPlane => {
                return Ok(HarmonicSolver {
                    model: DomainModel::HalfPlane,
                    circles: vec![],
                    backend: Backend::HalfPlaneModel,
                    colloc: None,
                    annulus: None,
                    measures: vec![Measure::Constant(1.0)],
                    arcs: vec![],
                    separation: opts.separation,
                })
            }
            DomainModel::Circular(d) => d,
        };
        let circles = domain.circles();
        let free_arcs = &scene.topology.free_arcs;
        let g = domain.genus();
        let concentric = g == 1
            && (domain.holes[0].center - domain.outer.center).norm() <= 1e-14 * domain.outer.radius
            && free_arcs.is_empty();
        let mut solver = HarmonicSolver {
            model: scene.model.clone(),
            circles: circles.clone(),
            backend: Backend::Disk,
            colloc: None,
            annulus: None,
            measures: vec![],
            arcs: vec![],
            separation: opts.separation,
        };
        if g == 0 && !opts.force_collocation {
            solver.backend = Backend::Disk;
            solver.measures = vec![Measure::Constant(1.0)];
            solver.arcs = free_arcs.iter().map(|a| solver.disk_arc(a)).collect();
            return Ok(solver);
        }
        if concentric && !opts.force_collocation {
            solver.backend = Backend::Annulus;
            solver.annulus = Some(AnnulusForm::new(domain.outer.center, domain.outer.radius, domain.holes[0].radius));
            solver.measures = vec![Measure::AnnulusOuter, Measure::AnnulusHole];
            return Ok(solver);
        }
        let mut last_residual = f64::INFINITY;
        for &order in ORDERS.iter() {
            let colloc = Collocation::build(&circles, order);
            solver.colloc = Some(colloc);
            let residual = solver.fill_collocation_data(domain, free_arcs)?;
            last_residual = residual;
            if residual < opts.tolerance {
                let colloc = solver.colloc.as_ref().expect("collocation set");
                solver.backend = Backend::Collocation { order, nodes_per_circle: colloc.nodes_per_circle(), residual };
                return Ok(solver);
            }
        }
        Err(Error::SolverNotConverged { residual: last_residual, tolerance: opts.tolerance })
    }

    fn disk_arc(&self, a: &FreeArc) -> ArcMeasure {
        let mut m = self.arc_singular(a);
        let c = &self.circles[a.component];
        let mid = c.point(a.start + 0.5 * a.span);
        m.correction = Correction::Constant(1.0 - m.singular(mid).value);
        m
    }

    /// Singular part of an arc measure with its sign fixed so that it jumps
    /// by +1 when entering the arc.
    fn arc_singular(&self, a: &FreeArc) -> ArcMeasure {
        let c = &self.circles[a.component];
        let mut m = ArcMeasure {
            component: a.component,
            b1: c.point(a.start),
            b2: c.point(a.end()),
            outer: a.component == 0,
            sign: 1.0,
            correction: Correction::Constant(0.0),
        };
        let inside = m.singular(c.point(a.start + 0.5 * a.span)).value;
        let outside = m.singular(c.point(a.end() + 0.5 * (2.0 * PI - a.span))).value;
        m.sign = if inside - outside >= 0.0 { 1.0 } else { -1.0 };
        m
    }

    /// Solve all boundary value problems on the current collocation grid and
    /// return the worst residual over component measures, arc corrections and
    /// probe Green's functions.
    fn fill_collocation_data(&mut self, domain: &CircularDomain, free_arcs: &[FreeArc]) -> Result<f64> {
        let colloc = self.colloc.as_ref().expect("collocation set");
        let n = colloc.nodes.len();
        let mut worst: f64 = 0.0;
        let mut measures = Vec::new();
        for comp in 0..self.circles.len() {
            let data = DVector::from_iterator(n, colloc.nodes.iter().map(|&(q, _)| if q == comp { 1.0 } else { 0.0 }));
            let coef = colloc.solve(&data);
            worst = worst.max(colloc.residual(&coef, |q, _| if q == comp { 1.0 } else { 0.0 }));
            measures.push(Measure::Expansion(coef));
        }
        let mut arcs = Vec::new();
        for a in free_arcs {
            let mut m = self.arc_singular(a);
            let c = &self.circles[a.component];
            let own = 1.0 - m.singular(c.point(a.start + 0.5 * a.span)).value;
            let target = |q: usize, z: Complex64| if q == m.component { own } else { -m.singular(z).value };
            let data = DVector::from_iterator(n, colloc.nodes.iter().map(|&(q, z)| target(q, z)));
            let coef = colloc.solve(&data);
            worst = worst.max(colloc.residual(&coef, target));
            m.correction = Correction::Expansion(coef);
            arcs.push(m);
        }
        // Probe Green's functions with sources close to each circle.
        for (q, c) in self.circles.iter().enumerate() {
            let gap = domain_gap(domain, q);
            let delta = (0.05 * c.radius).min(0.25 * gap);
            let dir = if q == 0 { -1.0 } else { 1.0 };
            for th in [0.3_f64, 2.9] {
                let w = c.center + Complex64::from_polar(c.radius + dir * delta, th);
                if !domain.contains(w) {
                    continue;
                }
                let data = self.green_data(w);
                let coef = colloc.solve(&data);
                let circles = &self.circles;
                worst = worst.max(colloc.residual(&coef, |qq, z| green_target(circles, qq, z, w)));
            }
        }
        self.measures = measures;
        self.arcs = arcs;
        Ok(worst)
    }

    /// Boundary data of the smooth remainder `K(·, w)` at the nodes.
    fn green_data(&self, w: Complex64) -> DVector<f64> {
        let colloc = self.colloc.as_ref().expect("collocation set");
        DVector::from_iterator(
            colloc.nodes.len(),
            colloc.nodes.iter().map(|&(q, z)| green_target(&self.circles, q, z, w)),
        )
    }

    fn green_data_dw(&self, w: Complex64) -> (DVector<f64>, DVector<f64>) {
        // K data is real; its ∂_w derivative is complex. Solve real and
        // imaginary parts separately (two real right-hand sides).
        let colloc = self.colloc.as_ref().expect("collocation set");
        let n = colloc.nodes.len();
        let mut re = DVector::zeros(n);
        let mut im = DVector::zeros(n);
        for (r, &(q, z)) in colloc.nodes.iter().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for (l, c) in self.circles.iter().enumerate() {
                if l != q {
                    s -= image_dw(c, z, w);
                }
            }
            re[r] = s.re;
            im[r] = s.im;
        }
        (re, im)
    }

    /// Backend in use.
    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    /// Domain model the solver was built for.
    pub fn model(&self) -> &DomainModel {
        &self.model
    }

    fn check_point(&self, z: Complex64) -> Result<()> {
        if !self.model.contains(z) {
            return Err(Error::OutsideDomain { re: z.re, im: z.im });
        }
        Ok(())
    }

    /// Regular part `H(z, w) = G(z, w) + log|z - w|` with `∂_z H`,
    /// `∂_z ∂_w H` and `∂_z ∂_w̄ H`; valid for `z` on the closed domain.
    fn regular_unchecked(&self, z: Complex64, w: Complex64) -> GreenDerivs {
        match self.backend {
            Backend::HalfPlaneModel => {
                let d = z - w.conj();
                GreenDerivs {
                    value: d.norm().ln(),
                    dz: 0.5 / d,
                    dz_dw: Complex64::new(0.0, 0.0),
                    dz_dwbar: 0.5 / (d * d),
                }
            }
            Backend::Annulus => self.annulus.as_ref().expect("annulus form").regular(z, w),
            Backend::Disk | Backend::Collocation { .. } => {
                let mut value = 0.0;
                let mut dz = Complex64::new(0.0, 0.0);
                let mut dz_dwbar = Complex64::new(0.0, 0.0);
                for c in &self.circles {
                    value += image_t(c, z, w);
                    dz += image_dz(c, z, w);
                    dz_dwbar += image_dz_dwbar(c, z, w);
                }
                let mut dz_dw = Complex64::new(0.0, 0.0);
                if let Some(colloc) = &self.colloc {
                    let k = colloc.eval(&colloc.solve(&self.green_data(w)), z);
                    value += k.value;
                    dz += k.dz;
                    let (dre, dim) = self.green_data_dw(w);
                    let kre = colloc.eval(&colloc.solve(&dre), z).dz;
                    let kim = colloc.eval(&colloc.solve(&dim), z).dz;
                    // ∂_w K = K_re + i K_im; ∂_w̄ K = K_re - i K_im (K real).
                    dz_dw += kre + I * kim;
                    dz_dwbar += kre - I * kim;
                }
                GreenDerivs { value, dz, dz_dw, dz_dwbar }
            }
        }
    }

    /// `G(z, w)`.
    pub fn green(&self, z: Complex64, w: Complex64) -> Result<f64> {
        Ok(self.green_derivs(z, w)?.value)
    }

    /// `G(z, w)` with `∂_z G`, `∂_z ∂_w G`, `∂_z ∂_w̄ G`.
    pub fn green_derivs(&self, z: Complex64, w: Complex64) -> Result<GreenDerivs> {
        self.check_point(z)?;
        self.check_point(w)?;
        let d = z - w;
        if d.norm() < self.separation {
            return Err(Error::CoincidentPoints { distance: d.norm() });
        }
        let h = self.regular_unchecked(z, w);
        Ok(GreenDerivs {
            value: h.value - d.norm().ln(),
            dz: h.dz - 0.5 / d,
            dz_dw: h.dz_dw - 0.5 / (d * d),
            dz_dwbar: h.dz_dwbar,
        })
    }

    /// `g(z, z)`.
    pub fn green_regular(&self, z: Complex64) -> Result<f64> {
        Ok(self.green_regular_derivs(z)?.value)
    }

    /// `g(z, z)` with `∂_z [g(z, z)]` and `∂_z ∂_z̄ [g(z, z)]`.
    pub fn green_regular_derivs(&self, z: Complex64) -> Result<RegularDerivs> {
        self.check_point(z)?;
        if let Backend::Annulus = self.backend {
            return Ok(self.annulus.as_ref().expect("annulus form").diagonal(z));
        }
        let h = self.regular_unchecked(z, z);
        // By symmetry of H, ∂_z[H(z,z)] = 2 ∂₁H and ∂∂̄[H(z,z)] = 2 Re ∂₁∂̄₂H.
        Ok(RegularDerivs { value: h.value, dz: 2.0 * h.dz, dz_dzbar: 2.0 * h.dz_dwbar.re })
    }

    /// Number of boundary components.
    pub fn components(&self) -> usize {
        self.measures.len()
    }

    /// Number of free arcs with two endpoints.
    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    /// Harmonic measure of boundary component `i` (0 = outer).
    pub fn harmonic_measure(&self, i: usize, z: Complex64) -> Result<f64> {
        Ok(self.harmonic_measure_derivs(i, z)?.value)
    }

    /// Harmonic measure of component `i` with its `∂_z` derivative.
    pub fn harmonic_measure_derivs(&self, i: usize, z: Complex64) -> Result<ValueGrad> {
        self.check_point(z)?;
        Ok(self.measure_unchecked(i, z))
    }

    pub(crate) fn measure_unchecked(&self, i: usize, z: Complex64) -> ValueGrad {
        match &self.measures[i] {
            Measure::Constant(c) => ValueGrad { value: *c, dz: Complex64::new(0.0, 0.0) },
            Measure::Expansion(coef) => self.colloc.as_ref().expect("collocation set").eval(coef, z),
            Measure::AnnulusHole => self.annulus.as_ref().expect("annulus form").hole_measure(z),
            Measure::AnnulusOuter => {
                let h = self.annulus.as_ref().expect("annulus form").hole_measure(z);
                ValueGrad { value: 1.0 - h.value, dz: -h.dz }
            }
        }
    }

    /// Harmonic measure of free arc `j`.
    pub fn harmonic_measure_arc(&self, j: usize, z: Complex64) -> Result<f64> {
        Ok(self.harmonic_measure_arc_derivs(j, z)?.value)
    }

    /// Harmonic measure of free arc `j` with its `∂_z` derivative.
    pub fn harmonic_measure_arc_derivs(&self, j: usize, z: Complex64) -> Result<ValueGrad> {
        self.check_point(z)?;
        Ok(self.arc_unchecked(j, z))
    }

    pub(crate) fn arc_unchecked(&self, j: usize, z: Complex64) -> ValueGrad {
        let m = &self.arcs[j];
        let s = m.singular(z);
        let c = match &m.correction {
            Correction::Constant(c) => ValueGrad { value: *c, dz: Complex64::new(0.0, 0.0) },
            Correction::Expansion(coef) => self.colloc.as_ref().expect("collocation set").eval(coef, z),
        };
        ValueGrad { value: s.value + c.value, dz: s.dz + c.dz }
    }

    /// Boundary circles (empty for the half-plane model).
    pub fn circles(&self) -> &[Circle] {
        &self.circles
    }

    /// `log crad` of the simply connected fill-in obtained by removing every
    /// boundary component except `component`, evaluated at `z`.
    pub fn fill_in_log_crad(&self, component: usize, z: Complex64) -> Result<f64> {
        match &self.model {
            DomainModel::HalfPlane => Ok((2.0 * z.im).ln()),
            DomainModel::Circular(_) => {
                let c = &self.circles[component];
                let d2 = (z - c.center).norm_sqr();
                let r2 = c.radius * c.radius;
                if component == 0 {
                    // Disk of radius R: crad = (R² - |z - c|²)/R.
                    Ok(((r2 - d2) / c.radius).ln())
                } else {
                    // Exterior of a circle: crad = (|z - c|² - r²)/r.
                    Ok(((d2 - r2) / c.radius).ln())
                }
            }
        }
    }
}

/// Boundary value of the remainder `K(·, w)` at `z` on circle `q`.
fn green_target(circles: &[Circle], q: usize, z: Complex64, w: Complex64) -> f64 {
    let mut s = 0.0;
    for (l, c) in circles.iter().enumerate() {
        if l != q {
            s -= image_t(c, z, w);
        }
    }
    s
}

/// Smallest distance from circle `q` to any other boundary circle.
fn domain_gap(domain: &CircularDomain, q: usize) -> f64 {
    let circles = domain.circles();
    let c = &circles[q];
    let mut gap = f64::INFINITY;
    for (l, o) in circles.iter().enumerate() {
        if l == q {
            continue;
        }
        let d = (c.center - o.center).norm();
        let sep = if q == 0 || l == 0 { c.radius.max(o.radius) - d - c.radius.min(o.radius) } else { d - c.radius - o.radius };
        gap = gap.min(sep);
    }
    if gap.is_finite() {
        gap
    } else {
        c.radius
    }
}
