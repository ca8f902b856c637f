//! Ising fields in terms of the compactified boson.
//!
//! Squared correlations of the critical Ising model's primary fields equal
//! bosonic correlations under the dictionary
//!
//! | Ising field | bosonic counterpart            |
//! |-------------|--------------------------------|
//! | `σ`         | `√2 :cos((√2/2)Φ):`            |
//! | `μ`         | `√2 :sin((√2/2)Φ):`            |
//! | `ε`         | `-½ :|∇Φ|²:`                   |
//! | `ψ`         | `2√2 i ∂Φ`                     |
//! | `ψ*`        | `-2√2 i ∂̄Φ`                    |
//! | boundary `σ`| `(-1)^{ξ(w)/√2π}` (wired arcs) |
//!
//! valid when both `#{σ, ψ, ψ*, boundary σ}` and `#{μ, ψ, ψ*}` are even;
//! otherwise the Ising correlation vanishes and
//! [`ising_correlation_squared`] returns exactly zero with
//! [`PARITY_DIAGNOSTIC`].

use std::f64::consts::SQRT_2;

use num_complex::Complex64;

use crate::boson::{Engine, FieldOperator, Insertion};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryArc, BoundaryData, Circle, CircularDomain, DomainModel, Scene};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Diagnostic attached to parity-violating requests.
pub const PARITY_DIAGNOSTIC: &str = "parity-violating; RHS corresponds to different boundary conditions";

/// Coefficient `κ` in `⟨ε_z O⟩⟨O⟩ = ⟨κ :cos(√2Φ(z)): Ô⟩`.
pub const ENERGY_PRODUCT_COEFF: f64 = 1.0;

/// Coefficient `κ'` in `⟨ψ_z O⟩⟨ψ*_z O⟩ = ⟨κ' :sin(√2Φ(z)): Ô⟩`.
pub const FERMION_PRODUCT_COEFF: f64 = 2.0;

/// Relative size below which a normalizing correlation counts as vanishing.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Ising primary fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IsingField {
    Sigma,
    Mu,
    Epsilon,
    Psi,
    PsiStar,
    /// Spin on a wired boundary arc.
    BoundarySigma,
}

/// Conformal weights `(Δ, Δ')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalWeights {
    pub delta: f64,
    pub delta_bar: f64,
}

impl IsingField {
    /// Parse the names used in scene files and on the command line.
    pub fn from_name(name: &str) -> Option<IsingField> {
        Some(match name {
            "sigma" => IsingField::Sigma,
            "mu" => IsingField::Mu,
            "epsilon" | "energy" => IsingField::Epsilon,
            "psi" => IsingField::Psi,
            "psi_star" | "psistar" => IsingField::PsiStar,
            "boundary_sigma" => IsingField::BoundarySigma,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            IsingField::Sigma => "sigma",
            IsingField::Mu => "mu",
            IsingField::Epsilon => "epsilon",
            IsingField::Psi => "psi",
            IsingField::PsiStar => "psi_star",
            IsingField::BoundarySigma => "boundary_sigma",
        }
    }

    /// Weights of the bulk fields; boundary spins carry none.
    pub fn weights(&self) -> ConformalWeights {
        let (delta, delta_bar) = match self {
            IsingField::Sigma | IsingField::Mu => (1.0 / 16.0, 1.0 / 16.0),
            IsingField::Epsilon => (0.5, 0.5),
            IsingField::Psi => (0.5, 0.0),
            IsingField::PsiStar => (0.0, 0.5),
            IsingField::BoundarySigma => (0.0, 0.0),
        };
        ConformalWeights { delta, delta_bar }
    }

    /// Bosonic counterpart as `(coefficient, operator)`.
    pub fn bosonic(&self) -> (Complex64, FieldOperator) {
        let g = Complex64::new(SQRT_2 / 2.0, 0.0);
        match self {
            IsingField::Sigma => (Complex64::new(SQRT_2, 0.0), FieldOperator::Cos(g)),
            IsingField::Mu => (Complex64::new(SQRT_2, 0.0), FieldOperator::Sin(g)),
            IsingField::Epsilon => (Complex64::new(-0.5, 0.0), FieldOperator::GradSquared),
            IsingField::Psi => (2.0 * SQRT_2 * I, FieldOperator::DPhi),
            IsingField::PsiStar => (-2.0 * SQRT_2 * I, FieldOperator::DBarPhi),
            IsingField::BoundarySigma => (Complex64::new(1.0, 0.0), FieldOperator::BoundarySign),
        }
    }
}

/// An Ising field at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingInsertion {
    pub z: Complex64,
    pub field: IsingField,
}

impl IsingInsertion {
    pub fn new(z: Complex64, field: IsingField) -> Self {
        IsingInsertion { z, field }
    }
}

/// Value of a squared Ising correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingResult {
    pub value: Complex64,
    /// Set when the request violates a parity condition.
    pub diagnostic: Option<String>,
    /// Estimated absolute error of the bosonic evaluation.
    pub error_estimate: f64,
}

/// `(#{σ, ψ, ψ*, boundary σ}, #{μ, ψ, ψ*})`.
pub fn parity_counts(fields: &[IsingInsertion]) -> (usize, usize) {
    let mut a = 0;
    let mut b = 0;
    for f in fields {
        match f.field {
            IsingField::Sigma | IsingField::BoundarySigma => a += 1,
            IsingField::Mu => b += 1,
            IsingField::Psi | IsingField::PsiStar => {
                a += 1;
                b += 1;
            }
            IsingField::Epsilon => {}
        }
    }
    (a, b)
}

/// Both parity conditions hold.
pub fn parity_ok(fields: &[IsingInsertion]) -> bool {
    let (a, b) = parity_counts(fields);
    a % 2 == 0 && b % 2 == 0
}

/// Bosonic image of a list of Ising fields: overall coefficient and insertions.
pub fn bosonize(fields: &[IsingInsertion]) -> (Complex64, Vec<Insertion>) {
    let mut coeff = Complex64::new(1.0, 0.0);
    let mut ins = Vec::with_capacity(fields.len());
    for f in fields {
        let (c, op) = f.field.bosonic();
        coeff *= c;
        ins.push(Insertion::new(f.z, op));
    }
    (coeff, ins)
}

/// `⟨Ô_1 … Ô_N⟩` without any parity check.
pub fn bosonic_correlation(engine: &Engine, fields: &[IsingInsertion]) -> Result<IsingResult> {
    let (coeff, ins) = bosonize(fields);
    let r = engine.correlate(&ins)?;
    Ok(IsingResult { value: crate::boson::snap(coeff * r.raw), diagnostic: None, error_estimate: coeff.norm() * r.error_estimate })
}

/// `⟨O_1 … O_N⟩²_Ω`, or exactly zero with a diagnostic when a parity
/// condition fails.
pub fn ising_correlation_squared(engine: &Engine, fields: &[IsingInsertion]) -> Result<IsingResult> {
    validate_points(engine, fields)?;
    if !parity_ok(fields) {
        return Ok(IsingResult { value: Complex64::new(0.0, 0.0), diagnostic: Some(PARITY_DIAGNOSTIC.to_string()), error_estimate: 0.0 });
    }
    bosonic_correlation(engine, fields)
}

fn validate_points(engine: &Engine, fields: &[IsingInsertion]) -> Result<()> {
    let bulk: Vec<Complex64> = fields.iter().filter(|f| f.field != IsingField::BoundarySigma).map(|f| f.z).collect();
    engine.scene().check_bulk_points(&bulk)?;
    for f in fields.iter().filter(|f| f.field == IsingField::BoundarySigma) {
        engine.scene().check_wired_boundary_point(f.z)?;
    }
    Ok(())
}

fn check_denominator(den: Complex64, scale: f64) -> Result<()> {
    if !(den.norm() > DEGENERACY_THRESHOLD * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::ParityDegenerate { magnitude: den.norm() });
    }
    Ok(())
}

/// Scale against which normalizations are judged: the correlation with
/// every cosine/sine replaced by its largest exponential magnitude is not
/// available cheaply, so the product of the one-point magnitudes is used.
fn normalization_scale(engine: &Engine, fields: &[IsingInsertion]) -> Result<f64> {
    let mut s = 1.0;
    for f in fields {
        if matches!(f.field, IsingField::Sigma | IsingField::Mu) {
            s *= SQRT_2 * (-0.25 * engine.solver().green_regular(f.z)?).exp();
        }
    }
    Ok(s)
}

/// `(⟨ψ_z ψ_w O⟩ / ⟨O⟩)² = -8 ⟨∂Φ(z)∂Φ(w) Ô⟩ / ⟨Ô⟩` for `O` a product of
/// spins and disorders.
pub fn fermion_pair_ratio(engine: &Engine, z: Complex64, w: Complex64, others: &[IsingInsertion]) -> Result<Complex64> {
    if others.iter().any(|f| !matches!(f.field, IsingField::Sigma | IsingField::Mu)) {
        return Err(Error::Unsupported("fermion pair ratio accepts only sigma and mu insertions".into()));
    }
    let mut all: Vec<IsingInsertion> = others.to_vec();
    all.push(IsingInsertion::new(z, IsingField::Psi));
    all.push(IsingInsertion::new(w, IsingField::Psi));
    validate_points(engine, &all)?;
    if !parity_ok(others) {
        return Err(Error::ParityDegenerate { magnitude: 0.0 });
    }
    let (coeff, ins) = bosonize(others);
    let den = coeff * engine.correlate(&ins)?.raw;
    check_denominator(den, normalization_scale(engine, others)?)?;
    let mut num_ins = ins.clone();
    num_ins.push(Insertion::new(z, FieldOperator::DPhi));
    num_ins.push(Insertion::new(w, FieldOperator::DPhi));
    let num = coeff * engine.correlate(&num_ins)?.raw;
    Ok(crate::boson::snap(-8.0 * num / den))
}

/// `⟨ε_z O⟩⟨O⟩` via `⟨κ :cos(√2Φ(z)): Ô⟩` (both parities of `O` even).
pub fn energy_product(engine: &Engine, z: Complex64, others: &[IsingInsertion]) -> Result<IsingResult> {
    product_prescription(engine, z, others, FieldOperator::Cos(Complex64::new(SQRT_2, 0.0)), ENERGY_PRODUCT_COEFF, true)
}

/// `⟨ψ_z O⟩⟨ψ*_z O⟩` via `⟨κ' :sin(√2Φ(z)): Ô⟩` (both parities of `O` odd).
pub fn fermion_product(engine: &Engine, z: Complex64, others: &[IsingInsertion]) -> Result<IsingResult> {
    product_prescription(engine, z, others, FieldOperator::Sin(Complex64::new(SQRT_2, 0.0)), FERMION_PRODUCT_COEFF, false)
}

fn product_prescription(engine: &Engine, z: Complex64, others: &[IsingInsertion], op: FieldOperator, kappa: f64, even: bool) -> Result<IsingResult> {
    let mut probe = others.to_vec();
    probe.push(IsingInsertion::new(z, IsingField::Epsilon));
    validate_points(engine, &probe)?;
    let (a, b) = parity_counts(others);
    let wanted = if even { 0 } else { 1 };
    if a % 2 != wanted || b % 2 != wanted {
        return Ok(IsingResult { value: Complex64::new(0.0, 0.0), diagnostic: Some(PARITY_DIAGNOSTIC.to_string()), error_estimate: 0.0 });
    }
    let (coeff, mut ins) = bosonize(others);
    ins.push(Insertion::new(z, op));
    let r = engine.correlate(&ins)?;
    Ok(IsingResult { value: crate::boson::snap(kappa * coeff * r.raw), diagnostic: None, error_estimate: kappa * coeff.norm() * r.error_estimate })
}

/// Positive square root of an all-spin squared correlation.
pub fn spin_correlation(engine: &Engine, points: &[Complex64]) -> Result<f64> {
    let fields: Vec<IsingInsertion> = points.iter().map(|&z| IsingInsertion::new(z, IsingField::Sigma)).collect();
    let r = ising_correlation_squared(engine, &fields)?;
    if r.diagnostic.is_some() {
        return Ok(0.0);
    }
    Ok(r.value.re.max(0.0).sqrt())
}

// ---------------------------------------------------------------------------
// Conformal transport

/// A Möbius transformation `Ψ(z) = (az + b)/(cz + d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusMap {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl MobiusMap {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det.norm() > 1e-14 * (a.norm() * d.norm() + b.norm() * c.norm()).max(f64::MIN_POSITIVE)) {
            return Err(Error::NotCircleMap("degenerate coefficients (ad - bc = 0)".into()));
        }
        Ok(MobiusMap { a, b, c, d })
    }

    /// `z ↦ r z` with `r > 0`.
    pub fn scaling(r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::NotCircleMap(format!("scaling factor {r} must be positive")));
        }
        Self::affine(Complex64::new(r, 0.0), Complex64::new(0.0, 0.0))
    }

    /// `z ↦ a z + b`.
    pub fn affine(a: Complex64, b: Complex64) -> Result<Self> {
        Self::new(a, b, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    }

    /// The Cayley map from the unit disk onto the upper half-plane,
    /// `z ↦ i(1 + z)/(1 - z)`.
    pub fn disk_to_half_plane() -> Self {
        MobiusMap { a: I, b: I, c: Complex64::new(-1.0, 0.0), d: Complex64::new(1.0, 0.0) }
    }

    pub fn is_affine(&self) -> bool {
        self.c == Complex64::new(0.0, 0.0)
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let den = self.c * z + self.d;
        (self.a * self.d - self.b * self.c) / (den * den)
    }

    /// `-d/c`, the point sent to infinity.
    fn pole(&self) -> Option<Complex64> {
        (!self.is_affine()).then(|| -self.d / self.c)
    }

    fn image_circle(&self, c: &Circle) -> Option<Circle> {
        // Map three points and take their circumcircle.
        let p: Vec<Complex64> = [0.0, 2.0, 4.0].iter().map(|&t| self.apply(c.point(t))).collect();
        circumcircle(p[0], p[1], p[2])
    }

    /// The image scene `Ψ(Ω)` with transported boundary data.
    pub fn image_scene(&self, scene: &Scene) -> Result<Scene> {
        if self.is_affine() {
            return scene.affine_image(self.a / self.d, self.b / self.d);
        }
        let pole = self.pole().expect("non-affine map has a finite pole");
        match &scene.model {
            DomainModel::HalfPlane => {
                if pole.im >= 0.0 {
                    return Err(Error::NotCircleMap("pole must lie in the lower half-plane".into()));
                }
                let circ = self
                    .image_circle_of_line()
                    .ok_or_else(|| Error::NotCircleMap("real axis does not map to a circle".into()))?;
                let domain = CircularDomain::new(circ, vec![]);
                Scene::circular(domain, BoundaryData::all_wired(1), scene.tolerances)
            }
            DomainModel::Circular(d) => {
                let circles = d.circles();
                // Pole on a boundary circle: only the disk onto the upper half-plane.
                let on_circle = circles.iter().position(|c| ((pole - c.center).norm() - c.radius).abs() < 1e-12 * c.radius);
                if let Some(q) = on_circle {
                    let hp = q == 0 && d.genus() == 0 && scene.topology.free_arcs.is_empty() && !scene.topology.all_free;
                    let img_center = self.apply(d.outer.center);
                    let axis_ok = [0.3, 1.7, 4.1].iter().all(|&t| {
                        let w = self.apply(d.outer.point(d.outer.angle_of(pole) + t));
                        w.im.abs() < 1e-10 * w.norm().max(1.0)
                    });
                    if hp && axis_ok && img_center.im > 0.0 {
                        return Ok(Scene::half_plane(scene.tolerances));
                    }
                    return Err(Error::NotCircleMap("image is not a supported circular domain or the upper half-plane".into()));
                }
                // The new outer circle is the image of the circle bounding
                // the complementary region that contains the pole.
                let new_outer = if d.outer.radius < (pole - d.outer.center).norm() {
                    0
                } else if let Some(h) = d.holes.iter().position(|c| (pole - c.center).norm() < c.radius) {
                    h + 1
                } else {
                    return Err(Error::NotCircleMap("pole lies inside the domain".into()));
                };
                let mut order: Vec<usize> = vec![new_outer];
                order.extend((0..circles.len()).filter(|&q| q != new_outer));
                let images: Vec<Circle> = order
                    .iter()
                    .map(|&q| self.image_circle(&circles[q]).ok_or_else(|| Error::NotCircleMap(format!("circle {q} maps to a line"))))
                    .collect::<Result<_>>()?;
                let domain = CircularDomain::new(images[0], images[1..].to_vec());
                let mut arcs = Vec::new();
                for a in &scene.bc.arcs {
                    let new_index = order.iter().position(|&q| q == a.component).expect("every component reordered");
                    let old_is_outer = a.component == 0;
                    let new_is_outer = new_index == 0;
                    let img = &images[new_index];
                    let p1 = img.angle_of(self.apply(circles[a.component].point(a.start)));
                    let p2 = img.angle_of(self.apply(circles[a.component].point(a.start + a.span())));
                    let (s, mut e) = if old_is_outer == new_is_outer { (p1, p2) } else { (p2, p1) };
                    while e <= s {
                        e += 2.0 * std::f64::consts::PI;
                    }
                    if a.span() >= 2.0 * std::f64::consts::PI - 1e-9 {
                        arcs.push(BoundaryArc::full(new_index, a.condition));
                    } else {
                        arcs.push(BoundaryArc::new(new_index, s, e, a.condition));
                    }
                }
                let bc = BoundaryData { arcs, marked_arc: scene.bc.marked_arc };
                Scene::circular(domain, bc, scene.tolerances)
            }
        }
    }

    fn image_circle_of_line(&self) -> Option<Circle> {
        let p: Vec<Complex64> = [-1.0, 0.0, 1.0].iter().map(|&x| self.apply(Complex64::new(x, 0.0))).collect();
        circumcircle(p[0], p[1], p[2])
    }
}

/// Circle through three points, `None` when they are (nearly) collinear.
fn circumcircle(a: Complex64, b: Complex64, c: Complex64) -> Option<Circle> {
    let d = 2.0 * (a.re * (b.im - c.im) + b.re * (c.im - a.im) + c.re * (a.im - b.im));
    if !(d.abs() > 1e-14 * (a.norm() + b.norm() + c.norm()).powi(2)) {
        return None;
    }
    let (a2, b2, c2) = (a.norm_sqr(), b.norm_sqr(), c.norm_sqr());
    let ux = (a2 * (b.im - c.im) + b2 * (c.im - a.im) + c2 * (a.im - b.im)) / d;
    let uy = (a2 * (c.re - b.re) + b2 * (a.re - c.re) + c2 * (b.re - a.re)) / d;
    let center = Complex64::new(ux, uy);
    Some(Circle::new(center, (a - center).norm()))
}

/// Transport a squared correlation from `Ψ(Ω)` back to `Ω`:
/// `⟨O…⟩²_Ω = Π Ψ'(zᵢ)^{2Δᵢ} conj(Ψ'(zᵢ))^{2Δ'ᵢ} ⟨O…⟩²_{Ψ(Ω)}`,
/// where `fields` are the points in `Ω`.
pub fn conformal_transport(map: &MobiusMap, fields: &[IsingInsertion], image_value: Complex64) -> Complex64 {
    let mut factor = Complex64::new(1.0, 0.0);
    for f in fields {
        let w = f.field.weights();
        let d = map.derivative(f.z);
        factor *= d.powf(2.0 * w.delta) * d.conj().powf(2.0 * w.delta_bar);
    }
    factor * image_value
}

/// Squared correlation in `Ω` computed in the image domain and transported.
pub fn transported_correlation_squared(scene: &Scene, map: &MobiusMap, fields: &[IsingInsertion]) -> Result<IsingResult> {
    let image = map.image_scene(scene)?;
    let engine = Engine::new(&image)?;
    let mapped: Vec<IsingInsertion> = fields.iter().map(|f| IsingInsertion::new(map.apply(f.z), f.field)).collect();
    let r = ising_correlation_squared(&engine, &mapped)?;
    Ok(IsingResult { value: crate::boson::snap(conformal_transport(map, fields, r.value)), ..r })
}
