//! Correlations of the compactified free field `Φ = φ + ξ`.
//!
//! Exponentials are evaluated from the Gaussian generating function
//!
//! `⟨Π :e^{γᵢΦ(zᵢ)}:⟩ = exp(Σ_{i<j} γᵢγⱼ G(zᵢ,zⱼ) + Σᵢ ½γᵢ² g(zᵢ,zᵢ)) · E[Π e^{γᵢξ(zᵢ)}]`,
//!
//! and cosines/sines by linearity. Derivative fields are derivatives of this
//! generating function in auxiliary charges and positions: `∂Φ = ∂_γ∂_z`,
//! `∂̄Φ = ∂_γ∂̄_z`, `:|∇Φ|²: = 2∂_γ²∂_z∂̄_z`, all at `γ = 0`. Since the
//! generating function is Gaussian in the auxiliary charges, every derivative
//! field contributes "legs" (`∂` or `∂̄` at its point) whose joint moment is an
//! Isserlis sum: each leg either carries its mean
//! `Σᵢ γᵢ ∂G(v, zᵢ) + ∂ξ(v)` or pairs with another leg through `∂∂G`,
//! `∂∂̄G`, or (for the two legs of `:|∇Φ|²:`) `½∂∂̄[g(v,v)]`. The instanton
//! enters only through the means, so the full correlation is one weighted
//! lattice sum per exponential term.
//!
//! [`Engine::correlate_fd_oracle`] evaluates the same definitions literally,
//! by Richardson-extrapolated finite differences of exponential correlations.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::harmonic::{Backend, HarmonicSolver, SolverOptions};
use crate::instanton::{BoundarySite, ExpCoefficients, InstantonEnsemble, PointData};
use crate::period::PeriodData;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Default relative tolerance of instanton lattice sums.
pub const DEFAULT_LATTICE_TOL: f64 = 1e-14;

/// Largest number of derivative legs in one correlation.
pub const MAX_LEGS: usize = 20;

/// A local field of the compactified boson.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldOperator {
    /// `:e^{γΦ}:`.
    NormalExp(Complex64),
    /// `:cos(γΦ):`.
    Cos(Complex64),
    /// `:sin(γΦ):`.
    Sin(Complex64),
    /// `∂Φ`.
    DPhi,
    /// `∂̄Φ`.
    DBarPhi,
    /// `:|∇Φ|²:`.
    GradSquared,
    /// `(-1)^{ξ(w)/α}` at a point of a wired arc.
    BoundarySign,
}

impl FieldOperator {
    fn is_derivative(&self) -> bool {
        matches!(self, FieldOperator::DPhi | FieldOperator::DBarPhi | FieldOperator::GradSquared)
    }
}

/// A field placed at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Insertion {
    pub z: Complex64,
    pub op: FieldOperator,
}

impl Insertion {
    pub fn new(z: Complex64, op: FieldOperator) -> Self {
        Insertion { z, op }
    }
}

/// Correlation value with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    /// Value, snapped to the real axis when `|Im| < 10⁻¹⁰|Re|`.
    pub value: Complex64,
    /// Unsnapped value.
    pub raw: Complex64,
    /// Harmonic backend used.
    pub backend: Backend,
    /// Largest instanton truncation radius used.
    pub truncation_radius: usize,
    /// Estimated absolute error from truncated lattice sums.
    pub error_estimate: f64,
}

/// Finite-difference oracle settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    /// Base step; spatial steps are `step · ℓ` with `ℓ` half the distance to
    /// the nearest other point or boundary.
    pub step: f64,
    /// Number of step halvings used for Richardson extrapolation.
    pub levels: usize,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions { step: 0.5, levels: 4 }
    }
}

/// Finite-difference oracle value with its extrapolation error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdResult {
    pub value: Complex64,
    pub error_estimate: f64,
}

/// Snap to the real axis when the imaginary part is negligible.
pub fn snap(v: Complex64) -> Complex64 {
    if v.im.abs() < 1e-10 * v.re.abs() {
        Complex64::new(v.re, 0.0)
    } else {
        v
    }
}

/// Derivative direction of a leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Leg {
    Holo,
    Anti,
}

/// Exponential insertion after trigonometric expansion.
#[derive(Debug, Clone, Copy)]
struct ExpTerm {
    coeff: Complex64,
    gammas_index: usize,
}

/// Solved scene ready for correlation queries.
#[derive(Debug, Clone)]
pub struct Engine {
    scene: Scene,
    solver: HarmonicSolver,
    ensemble: InstantonEnsemble,
}

impl Engine {
    /// Solve a scene with its own tolerances.
    pub fn new(scene: &Scene) -> Result<Engine> {
        Self::with_options(scene, &SolverOptions::from_scene(scene))
    }

    /// Solve a scene with explicit harmonic solver options.
    pub fn with_options(scene: &Scene, opts: &SolverOptions) -> Result<Engine> {
        let solver = HarmonicSolver::with_options(scene, opts)?;
        let period = PeriodData::assemble(&solver, &scene.topology)?;
        let tol = scene.tolerances.lattice.max(f64::EPSILON);
        let theta_tol = scene.tolerances.theta.max(f64::EPSILON);
        let ensemble = InstantonEnsemble::new(period, &scene.topology, tol)?.with_theta_tol(theta_tol);
        Ok(Engine { scene: scene.clone(), solver, ensemble })
    }

    /// The same engine with the instanton pin shifted by `shift`.
    pub fn with_pin_shift(&self, shift: f64) -> Engine {
        Engine { scene: self.scene.clone(), solver: self.solver.clone(), ensemble: self.ensemble.with_pin_shift(shift) }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn solver(&self) -> &HarmonicSolver {
        &self.solver
    }

    pub fn ensemble(&self) -> &InstantonEnsemble {
        &self.ensemble
    }

    fn point_data(&self, z: Complex64) -> Result<PointData> {
        PointData::new(&self.solver, &self.scene.topology, z)
    }

    fn sites(&self, ws: &[Complex64]) -> Result<Vec<BoundarySite>> {
        ws.iter().map(|&w| BoundarySite::new(&self.scene, w)).collect()
    }

    /// Gaussian free field factor `exp(Σ_{i<j}γᵢγⱼG + Σ½γᵢ²g)`.
    fn gff_factor(&self, gammas: &[Complex64], zs: &[Complex64]) -> Result<Complex64> {
        let mut e = Complex64::new(0.0, 0.0);
        for i in 0..zs.len() {
            if gammas[i] == Complex64::new(0.0, 0.0) {
                continue;
            }
            e += 0.5 * gammas[i] * gammas[i] * self.solver.green_regular(zs[i])?;
            for j in (i + 1)..zs.len() {
                if gammas[j] != Complex64::new(0.0, 0.0) {
                    e += gammas[i] * gammas[j] * self.solver.green(zs[i], zs[j])?;
                }
            }
        }
        Ok(e.exp())
    }

    /// `⟨Π :e^{γᵢΦ(zᵢ)}:⟩`.
    pub fn exp_correlation(&self, gammas: &[Complex64], zs: &[Complex64]) -> Result<Complex64> {
        self.exp_correlation_with_boundary(gammas, zs, &[])
    }

    /// `⟨Π :e^{γᵢΦ(zᵢ)}: Π (-1)^{ξ(w)/α}⟩` with boundary signs at `ws`.
    pub fn exp_correlation_with_boundary(&self, gammas: &[Complex64], zs: &[Complex64], ws: &[Complex64]) -> Result<Complex64> {
        if gammas.len() != zs.len() {
            return Err(Error::Unsupported("charges and points must have equal length".into()));
        }
        self.scene.check_bulk_points(zs)?;
        let sites = self.sites(ws)?;
        let points = zs.iter().map(|&z| self.point_data(z)).collect::<Result<Vec<_>>>()?;
        let coeff = ExpCoefficients::new(gammas, &points, self.ensemble.genus(), self.ensemble.arcs());
        let inst = self.ensemble.expectation_with(&coeff, &sites, 0, |_| Complex64::new(1.0, 0.0))?;
        Ok(self.gff_factor(gammas, zs)? * inst.value)
    }

    /// Closed-form correlation of arbitrary insertions.
    pub fn correlate(&self, insertions: &[Insertion]) -> Result<CorrelationResult> {
        let (bulk, ws) = split(insertions);
        let bulk_z: Vec<Complex64> = bulk.iter().map(|i| i.z).collect();
        self.scene.check_bulk_points(&bulk_z)?;
        let sites = self.sites(&ws)?;
        let exps: Vec<Insertion> = bulk.iter().copied().filter(|i| !i.op.is_derivative()).collect();
        let ders: Vec<Insertion> = bulk.iter().copied().filter(|i| i.op.is_derivative()).collect();

        // Legs of the derivative fields and their overall multiplier.
        let mut legs: Vec<(usize, Leg)> = Vec::new();
        let mut multiplier = Complex64::new(1.0, 0.0);
        for (d, ins) in ders.iter().enumerate() {
            match ins.op {
                FieldOperator::DPhi => legs.push((d, Leg::Holo)),
                FieldOperator::DBarPhi => legs.push((d, Leg::Anti)),
                FieldOperator::GradSquared => {
                    legs.push((d, Leg::Holo));
                    legs.push((d, Leg::Anti));
                    multiplier *= 4.0;
                }
                _ => unreachable!("filtered to derivative operators"),
            }
        }
        if legs.len() > MAX_LEGS {
            return Err(Error::TruncationExceeded(format!("{} derivative legs exceed the limit {MAX_LEGS}", legs.len())));
        }
        let nl = legs.len();
        let der_points = ders.iter().map(|i| self.point_data(i.z)).collect::<Result<Vec<_>>>()?;
        let exp_points = exps.iter().map(|i| self.point_data(i.z)).collect::<Result<Vec<_>>>()?;

        // Leg covariances.
        let mut cov = vec![vec![Complex64::new(0.0, 0.0); nl]; nl];
        for a in 0..nl {
            for b in (a + 1)..nl {
                let (pa, ka) = legs[a];
                let (pb, kb) = legs[b];
                let c = if pa == pb {
                    Complex64::new(0.5 * self.solver.green_regular_derivs(ders[pa].z)?.dz_dzbar, 0.0)
                } else {
                    let g = self.solver.green_derivs(ders[pa].z, ders[pb].z)?;
                    match (ka, kb) {
                        (Leg::Holo, Leg::Holo) => g.dz_dw,
                        (Leg::Holo, Leg::Anti) => g.dz_dwbar,
                        (Leg::Anti, Leg::Anti) => g.dz_dw.conj(),
                        (Leg::Anti, Leg::Holo) => g.dz_dwbar.conj(),
                    }
                };
                cov[a][b] = c;
                cov[b][a] = c;
            }
        }
        // ∂_v G(v, zᵢ) for every leg and exponential point.
        let mut leg_green = vec![vec![Complex64::new(0.0, 0.0); exps.len()]; nl];
        for (l, &(p, k)) in legs.iter().enumerate() {
            for (i, e) in exps.iter().enumerate() {
                let dz = self.solver.green_derivs(ders[p].z, e.z)?.dz;
                leg_green[l][i] = if k == Leg::Holo { dz } else { dz.conj() };
            }
        }

        // Expand trigonometric insertions into exponential terms.
        let (terms, gamma_sets) = expand_exponentials(&exps);
        let exp_z: Vec<Complex64> = exps.iter().map(|e| e.z).collect();
        let mut total = Complex64::new(0.0, 0.0);
        let mut radius = 0;
        let mut err = 0.0;
        for term in terms {
            let gammas = &gamma_sets[term.gammas_index];
            let gff = self.gff_factor(gammas, &exp_z)?;
            let mean0: Vec<Complex64> = (0..nl).map(|l| (0..exps.len()).map(|i| gammas[i] * leg_green[l][i]).sum()).collect();
            let coeff = ExpCoefficients::new(gammas, &exp_points, self.ensemble.genus(), self.ensemble.arcs());
            let mut means = vec![Complex64::new(0.0, 0.0); nl];
            let mut table = vec![Complex64::new(0.0, 0.0); 1 << nl];
            let e = self.ensemble.expectation_with(&coeff, &sites, nl as u32, |cfg| {
                if nl == 0 {
                    return Complex64::new(1.0, 0.0);
                }
                for (l, &(p, k)) in legs.iter().enumerate() {
                    let d = cfg.dxi(&der_points[p]);
                    means[l] = mean0[l] + if k == Leg::Holo { d } else { d.conj() };
                }
                isserlis(&means, &cov, &mut table)
            })?;
            let scale = (term.coeff * gff * multiplier).norm();
            total += term.coeff * gff * e.value;
            radius = radius.max(e.truncation.radius);
            err += scale * e.truncation.tail_bound / self.ensemble.partition_function()?.norm();
        }
        let raw = total * multiplier;
        Ok(CorrelationResult { value: snap(raw), raw, backend: self.solver.backend().clone(), truncation_radius: radius, error_estimate: err })
    }

    /// Literal evaluation of the derivative fields by differentiating
    /// exponential correlations numerically (test oracle): a symmetric
    /// stencil in each auxiliary γ and Richardson-extrapolated central
    /// differences in position.
    pub fn correlate_fd_oracle(&self, insertions: &[Insertion]) -> Result<FdResult> {
        self.correlate_fd_oracle_with(insertions, &FdOptions::default())
    }

    /// Finite-difference oracle with explicit step control.
    pub fn correlate_fd_oracle_with(&self, insertions: &[Insertion], opts: &FdOptions) -> Result<FdResult> {
        let (bulk, ws) = split(insertions);
        let bulk_z: Vec<Complex64> = bulk.iter().map(|i| i.z).collect();
        self.scene.check_bulk_points(&bulk_z)?;
        let exps: Vec<Insertion> = bulk.iter().copied().filter(|i| !i.op.is_derivative()).collect();
        let ders: Vec<Insertion> = bulk.iter().copied().filter(|i| i.op.is_derivative()).collect();
        let (terms, gamma_sets) = expand_exponentials(&exps);
        // Local length scale of each derivative point.
        let scales: Vec<f64> = ders
            .iter()
            .map(|d| {
                let mut l = self.scene.model.boundary_distance(d.z);
                for o in &bulk {
                    if o.z != d.z {
                        l = l.min((o.z - d.z).norm());
                    }
                }
                0.5 * l
            })
            .collect();
        // f(γ_aux, shifts) = Σ_terms coeff · ⟨Π exps · Π :e^{γ_a Φ(v_a + δ_a)}:⟩.
        let eval = |aux: &[(Complex64, Complex64)]| -> Result<Complex64> {
            let mut zs: Vec<Complex64> = exps.iter().map(|e| e.z).collect();
            zs.extend(aux.iter().map(|a| a.1));
            let mut total = Complex64::new(0.0, 0.0);
            for t in &terms {
                let mut gs = gamma_sets[t.gammas_index].clone();
                gs.extend(aux.iter().map(|a| a.0));
                total += t.coeff * self.exp_correlation_with_boundary(&gs, &zs, &ws)?;
            }
            Ok(total)
        };
        let levels = opts.levels.max(1);
        let mut estimates = Vec::with_capacity(levels);
        for level in 0..levels {
            let h = opts.step / (1u64 << level) as f64;
            let steps: Vec<f64> = scales.iter().map(|l| h * l).collect();
            if h < 1e-8 || steps.iter().any(|&s| s < 1e-12) {
                return Err(Error::StepUnderflow);
            }
            estimates.push(nested_difference(&ders, &steps, &mut Vec::new(), &eval)?);
        }
        // Richardson extrapolation in powers of h².
        let mut table = estimates.clone();
        let mut err = f64::INFINITY;
        for j in 1..levels {
            let prev_last = *table.last().expect("non-empty");
            for i in (j..levels).rev() {
                let f = 4f64.powi(j as i32);
                table[i] = table[i] + (table[i] - table[i - 1]) / (f - 1.0);
            }
            err = (table[levels - 1] - prev_last).norm();
        }
        if levels == 1 {
            err = f64::NAN;
        }
        Ok(FdResult { value: table[levels - 1], error_estimate: err })
    }
}

/// Separate bulk insertions from boundary signs.
fn split(insertions: &[Insertion]) -> (Vec<Insertion>, Vec<Complex64>) {
    let mut bulk = Vec::new();
    let mut ws = Vec::new();
    for ins in insertions {
        if ins.op == FieldOperator::BoundarySign {
            ws.push(ins.z);
        } else {
            bulk.push(*ins);
        }
    }
    (bulk, ws)
}

/// Expand cosines and sines into `2^n` exponential terms.
fn expand_exponentials(exps: &[Insertion]) -> (Vec<ExpTerm>, Vec<Vec<Complex64>>) {
    let mut sets: Vec<(Complex64, Vec<Complex64>)> = vec![(Complex64::new(1.0, 0.0), Vec::new())];
    for e in exps {
        let options: Vec<(Complex64, Complex64)> = match e.op {
            FieldOperator::NormalExp(g) => vec![(Complex64::new(1.0, 0.0), g)],
            FieldOperator::Cos(g) => vec![(Complex64::new(0.5, 0.0), I * g), (Complex64::new(0.5, 0.0), -I * g)],
            FieldOperator::Sin(g) => vec![(-0.5 * I, I * g), (0.5 * I, -I * g)],
            _ => unreachable!("exponential-type operators only"),
        };
        let mut next = Vec::with_capacity(sets.len() * options.len());
        for (c, gs) in &sets {
            for (oc, og) in &options {
                let mut g2 = gs.clone();
                g2.push(*og);
                next.push((c * oc, g2));
            }
        }
        sets = next;
    }
    let terms = (0..sets.len()).map(|i| ExpTerm { coeff: sets[i].0, gammas_index: i }).collect();
    (terms, sets.into_iter().map(|s| s.1).collect())
}

/// Isserlis moment `E[Π (mᵢ + Xᵢ)]` for centered Gaussian `X` with covariance
/// `cov` (diagonal unused), by dynamic programming over subsets.
fn isserlis(means: &[Complex64], cov: &[Vec<Complex64>], table: &mut [Complex64]) -> Complex64 {
    let n = means.len();
    table[0] = Complex64::new(1.0, 0.0);
    for mask in 1usize..(1 << n) {
        let first = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << first);
        let mut v = means[first] * table[rest];
        let mut r = rest;
        while r != 0 {
            let j = r.trailing_zeros() as usize;
            v += cov[first][j] * table[rest & !(1 << j)];
            r &= r - 1;
        }
        table[mask] = v;
    }
    table[(1 << n) - 1]
}

/// Nodes of the symmetric stencil used for auxiliary-γ derivatives.
const GAMMA_NODES: usize = 10;
/// Radius of that stencil in the complex γ plane.
const GAMMA_RADIUS: f64 = 0.35;

/// `∂_γ^m f(0)` from samples on the circle `|γ| = GAMMA_RADIUS`.
///
/// The generating function is entire in each auxiliary γ, so the symmetric
/// `N`-point formula lacks the `h^{-m}` cancellation of shrinking real
/// differences; its error is the aliased Taylor coefficient of order `m + N`.
fn gamma_derivative(m: u32, mut f: impl FnMut(Complex64) -> Result<Complex64>) -> Result<Complex64> {
    let n = GAMMA_NODES;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
        acc += f(GAMMA_RADIUS * w)? * w.powi(-(m as i32));
    }
    let factorial = (1..=m).product::<u32>() as f64;
    Ok(acc * factorial / (n as f64 * GAMMA_RADIUS.powi(m as i32)))
}

/// Nested differences over the derivative insertions `ders[k..]`: the
/// symmetric γ stencil, then central differences in x and y at step `steps[k]`.
fn nested_difference(
    ders: &[Insertion],
    steps: &[f64],
    aux: &mut Vec<(Complex64, Complex64)>,
    eval: &dyn Fn(&[(Complex64, Complex64)]) -> Result<Complex64>,
) -> Result<Complex64> {
    let k = aux.len();
    if k == ders.len() {
        return eval(aux);
    }
    let z = ders[k].z;
    let hs = steps[k];
    let mut at = |m: u32, dz: Complex64| -> Result<Complex64> {
        gamma_derivative(m, |g| {
            aux.push((g, z + dz));
            let v = nested_difference(ders, steps, aux, eval);
            aux.pop();
            v
        })
    };
    let ex = Complex64::new(hs, 0.0);
    let ey = Complex64::new(0.0, hs);
    match ders[k].op {
        FieldOperator::DPhi | FieldOperator::DBarPhi => {
            // ∂ = ½(∂x ∓ i∂y) of ∂_γ.
            let dx = (at(1, ex)? - at(1, -ex)?) / (2.0 * hs);
            let dy = (at(1, ey)? - at(1, -ey)?) / (2.0 * hs);
            let sign = if ders[k].op == FieldOperator::DPhi { -1.0 } else { 1.0 };
            Ok(0.5 * (dx + sign * I * dy))
        }
        FieldOperator::GradSquared => {
            // 2 ∂_γ² · ¼ Δ.
            let c = at(2, Complex64::new(0.0, 0.0))?;
            let lap = (at(2, ex)? + at(2, -ex)? + at(2, ey)? + at(2, -ey)? - 4.0 * c) / (hs * hs);
            Ok(2.0 * 0.25 * lap)
        }
        _ => unreachable!("derivative operators only"),
    }
}
