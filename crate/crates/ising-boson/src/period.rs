//! Dirichlet pairings of harmonic measures and the quadratic forms of the
//! instanton weight.
//!
//! With `ξ = (α/2)(Σ sᵢhᵢ + Σ ŝⱼĥⱼ)` and `α² = 2π²`, the Gibbs weight
//! `exp(-(1/4π)⟨∇ξ,∇ξ⟩)` expands as `exp(Q(s) + B(s,ŝ) + Q̂(ŝ))` with
//!
//! * `Q_ab = -(π/8) ⟨∇h_a, ∇h_b⟩`, so `Q(s) = Σ_ab Q_ab s_a s_b`;
//! * `B_aj = -(π/4) ⟨∇h_a, ∇ĥ_j⟩` (the cross term appears twice);
//! * `Q̂_ij = -(π/8) ⟨∇ĥ_i, ∇ĥ_j⟩` for `i ≠ j`, summed over ordered pairs.
//!
//! The diagonal of `Q̂` is divergent but multiplies `ŝⱼ² = 1`, so it is a
//! configuration-independent constant that cancels against the partition
//! function; it is set to zero. The period matrix of the Schottky double is
//! `τ = 4Q = -(π/2)⟨∇h_a, ∇h_b⟩`.
//!
//! Pairings reduce to boundary fluxes `⟨∇u, ∇v⟩ = ∮ u ∂_n v ds`; since every
//! function involved has piecewise-constant boundary values, each pairing is
//! an integral of a normal derivative over one circle or one arc, choosing the
//! smooth integrand whenever there is a choice.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Circle, Topology};
use crate::harmonic::{HarmonicSolver, ValueGrad};

/// Quadratic forms of the instanton weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodData {
    /// `g × g` form on wired winding numbers (measured components order).
    pub q: DMatrix<f64>,
    /// `g × k` cross form between windings and free-arc signs.
    pub b: DMatrix<f64>,
    /// `k × k` symmetric off-diagonal form on free-arc signs (zero diagonal).
    pub qhat_off: DMatrix<f64>,
    /// `g × g` period matrix `τ = 4Q`.
    pub tau: DMatrix<Complex64>,
    /// Raw pairings `⟨∇h_a, ∇h_b⟩`.
    pub pair_hh: DMatrix<f64>,
    /// Raw pairings `⟨∇h_a, ∇ĥ_j⟩`.
    pub pair_ha: DMatrix<f64>,
    /// Raw off-diagonal pairings `⟨∇ĥ_i, ∇ĥ_j⟩`.
    pub pair_aa: DMatrix<f64>,
}

impl PeriodData {
    /// Assemble all forms for a solved scene.
    pub fn assemble(solver: &HarmonicSolver, topology: &Topology) -> Result<PeriodData> {
        let comps = &topology.measured_components;
        let g = comps.len();
        let k = topology.free_arcs.len();
        let mut pair_hh = DMatrix::zeros(g, g);
        for a in 0..g {
            for b in a..g {
                let v = pairing_components(solver, comps[a], comps[b])?;
                pair_hh[(a, b)] = v;
                pair_hh[(b, a)] = v;
            }
        }
        let mut pair_ha = DMatrix::zeros(g, k);
        for a in 0..g {
            for j in 0..k {
                pair_ha[(a, j)] = pairing_component_arc(solver, topology, comps[a], j)?;
            }
        }
        let mut pair_aa = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in (i + 1)..k {
                let v = pairing_arcs(solver, topology, i, j)?;
                pair_aa[(i, j)] = v;
                pair_aa[(j, i)] = v;
            }
        }
        let q = pair_hh.map(|v| -PI / 8.0 * v);
        let b = pair_ha.map(|v| -PI / 4.0 * v);
        let qhat_off = pair_aa.map(|v| -PI / 8.0 * v);
        let tau = q.map(|v| Complex64::new(4.0 * v, 0.0));
        if g > 0 {
            let lmax = SymmetricEigen::new(q.clone()).eigenvalues.max();
            if lmax >= 0.0 {
                return Err(Error::NotNegativeDefinite { max_eigenvalue: lmax });
            }
        }
        Ok(PeriodData { q, b, qhat_off, tau, pair_hh, pair_ha, pair_aa })
    }

    /// Number of wired winding coordinates.
    pub fn genus(&self) -> usize {
        self.q.nrows()
    }

    /// Number of free arcs.
    pub fn arcs(&self) -> usize {
        self.qhat_off.nrows()
    }

    /// Exponent `Q(s) + B(s,ŝ) + Q̂_off(ŝ)` of a configuration.
    pub fn exponent(&self, s: &[i64], shat: &[f64]) -> f64 {
        let mut e = 0.0;
        for a in 0..s.len() {
            for b in 0..s.len() {
                e += self.q[(a, b)] * (s[a] * s[b]) as f64;
            }
            for j in 0..shat.len() {
                e += self.b[(a, j)] * s[a] as f64 * shat[j];
            }
        }
        for i in 0..shat.len() {
            for j in 0..shat.len() {
                e += self.qhat_off[(i, j)] * shat[i] * shat[j];
            }
        }
        e
    }
}

/// Outward unit normal of the domain on boundary circle `q` at `z`.
fn outward_normal(circles: &[Circle], q: usize, z: Complex64) -> Complex64 {
    let c = &circles[q];
    let n = (z - c.center) / c.radius;
    if q == 0 {
        n
    } else {
        -n
    }
}

/// `∂_n u = 2 Re(∂_z u · n)`.
fn normal_derivative(vg: ValueGrad, n: Complex64) -> f64 {
    2.0 * (vg.dz * n).re
}

/// `∫_{C_q} f(θ) ds` for smooth periodic `f` by trapezoid doubling.
fn circle_integral(circle: &Circle, f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut n = 64usize;
    let trap = |n: usize| -> f64 { (0..n).map(|t| f(2.0 * PI * t as f64 / n as f64)).sum::<f64>() * 2.0 * PI / n as f64 };
    let mut prev = trap(n);
    while n < 1 << 16 {
        n *= 2;
        let cur = trap(n);
        if (cur - prev).abs() <= 1e-13 * cur.abs().max(1.0) {
            return Ok(cur * circle.radius);
        }
        prev = cur;
    }
    Err(Error::QuadratureNotConverged { estimate: (trap(n) - prev).abs() })
}

/// 20-point Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = 20;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        out
    })
}

fn gl_panel(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    gauss_legendre().iter().map(|&(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

/// Adaptive Gauss–Legendre quadrature of `f` over `[a, b]`.
pub(crate) fn adaptive_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: usize, worst: &mut f64) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (gl_panel(f, a, m), gl_panel(f, m, b));
        let err = (l + r - whole).abs();
        if err <= tol || depth == 0 {
            if depth == 0 {
                *worst = worst.max(err);
            }
            return l + r;
        }
        rec(f, a, m, l, 0.5 * tol, depth - 1, worst) + rec(f, m, b, r, 0.5 * tol, depth - 1, worst)
    }
    let mut worst: f64 = 0.0;
    let whole = gl_panel(&f, a, b);
    let v = rec(&f, a, b, whole, tol, 40, &mut worst);
    if worst > 1e3 * tol {
        return Err(Error::QuadratureNotConverged { estimate: worst });
    }
    Ok(v)
}

/// `⟨∇h_a, ∇h_b⟩ = ∫_{C_a} ∂_n h_b ds`.
pub fn pairing_components(solver: &HarmonicSolver, a: usize, b: usize) -> Result<f64> {
    let circles = solver.circles();
    if circles.is_empty() {
        return Ok(0.0);
    }
    let c = circles[a];
    circle_integral(&c, |th| {
        let z = c.point(th);
        normal_derivative(solver.measure_unchecked(b, z), outward_normal(circles, a, z))
    })
}

/// `⟨∇h_a, ∇ĥ_j⟩ = ∫_{arc j} ∂_n h_a ds`.
pub fn pairing_component_arc(solver: &HarmonicSolver, topology: &Topology, a: usize, j: usize) -> Result<f64> {
    let circles = solver.circles();
    let arc = &topology.free_arcs[j];
    let c = circles[arc.component];
    let v = adaptive_gl(
        |th| {
            let z = c.point(th);
            normal_derivative(solver.measure_unchecked(a, z), outward_normal(circles, arc.component, z))
        },
        arc.start,
        arc.end(),
        1e-14,
    )?;
    Ok(v * c.radius)
}

/// `⟨∇ĥ_i, ∇ĥ_j⟩ = ∫_{arc i} ∂_n ĥ_j ds` for `i ≠ j`.
pub fn pairing_arcs(solver: &HarmonicSolver, topology: &Topology, i: usize, j: usize) -> Result<f64> {
    let circles = solver.circles();
    let arc = &topology.free_arcs[i];
    let c = circles[arc.component];
    let v = adaptive_gl(
        |th| {
            let z = c.point(th);
            normal_derivative(solver.arc_unchecked(j, z), outward_normal(circles, arc.component, z))
        },
        arc.start,
        arc.end(),
        1e-14,
    )?;
    Ok(v * c.radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundaryArc, BoundaryData, CircularDomain, Condition, Scene, Tolerances};
    use crate::harmonic::SolverOptions;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_arc_disk(a: (f64, f64), b: (f64, f64)) -> Scene {
        let arcs = vec![
            BoundaryArc::new(0, a.0, a.1, Condition::Free),
            BoundaryArc::new(0, a.1, b.0, Condition::Wired),
            BoundaryArc::new(0, b.0, b.1, Condition::Free),
            BoundaryArc::new(0, b.1, a.0 + 2.0 * PI, Condition::Wired),
        ];
        Scene::circular(CircularDomain::unit_disk(), BoundaryData::new(arcs), Tolerances::default()).unwrap()
    }

    /// `⟨∇u, ∇v⟩ = π Σ n (aₙcₙ + bₙdₙ)` for harmonic extensions of the
    /// indicators of two arcs of the unit circle.
    fn fourier_arc_pairing(a: (f64, f64), b: (f64, f64), terms: usize) -> f64 {
        let coef = |(s, e): (f64, f64), n: f64| ((n * e).sin() - (n * s).sin(), (n * s).cos() - (n * e).cos());
        let mut sum = 0.0;
        let mut prev = 0.0;
        let mut avg = 0.0;
        for n in 1..=terms {
            let nf = n as f64;
            let (a1, b1) = coef(a, nf);
            let (a2, b2) = coef(b, nf);
            // aₙ = (1/πn)(sin ne - sin ns), bₙ = (1/πn)(cos ns - cos ne).
            sum += (a1 * a2 + b1 * b2) / (PI * nf);
            // Averaging consecutive partial sums damps the oscillating tail.
            avg = 0.5 * (sum + prev);
            prev = sum;
        }
        avg
    }

    #[test]
    fn annulus_pairing_and_tau() {
        let scene = Scene::wired(CircularDomain::annulus(0.5)).unwrap();
        let s = HarmonicSolver::new(&scene).unwrap();
        let p = PeriodData::assemble(&s, &scene.topology).unwrap();
        assert!((p.pair_hh[(0, 0)] - 2.0 * PI / 2f64.ln()).abs() < 1e-10);
        assert!((p.tau[(0, 0)].re + PI * PI / 2f64.ln()).abs() < 1e-9);
        assert!((p.tau[(0, 0)].re + 14.238829).abs() < 1e-6);
    }

    #[test]
    fn simply_connected_wired_is_empty() {
        let scene = Scene::wired(CircularDomain::unit_disk()).unwrap();
        let s = HarmonicSolver::new(&scene).unwrap();
        let p = PeriodData::assemble(&s, &scene.topology).unwrap();
        assert_eq!((p.genus(), p.arcs()), (0, 0));
        assert_eq!(p.exponent(&[], &[]), 0.0);
    }

    #[test]
    fn two_arc_disk_matches_fourier_oracle() {
        let (a, b) = ((0.3, 1.4), (2.5, 4.0));
        let scene = two_arc_disk(a, b);
        let s = HarmonicSolver::new(&scene).unwrap();
        let p = PeriodData::assemble(&s, &scene.topology).unwrap();
        let oracle = fourier_arc_pairing(a, b, 2_000_000);
        assert!((p.pair_aa[(0, 1)] - oracle).abs() < 1e-6, "{} vs {oracle}", p.pair_aa[(0, 1)]);
        assert!((p.qhat_off[(0, 1)] + PI / 8.0 * oracle).abs() < 1e-6);
        assert_eq!(p.qhat_off[(0, 0)], 0.0);
        // Pairings of disjoint arcs are negative (the measures repel).
        assert!(p.pair_aa[(0, 1)] < 0.0);
        // Route independence: ∫_{arc i} ∂_n ĥ_j = ∫_{arc j} ∂_n ĥ_i.
        let rev = pairing_arcs(&s, &scene.topology, 1, 0).unwrap();
        assert!((rev - p.pair_aa[(0, 1)]).abs() < 1e-10);
    }

    #[test]
    fn general_domain_forms_are_symmetric_and_definite() {
        let d = CircularDomain::new(
            Circle::new(c(0.0, 0.0), 1.0),
            vec![Circle::new(c(0.4, 0.1), 0.2), Circle::new(c(-0.35, -0.2), 0.25)],
        );
        let arcs = vec![
            BoundaryArc::new(0, 0.2, 1.2, Condition::Free),
            BoundaryArc::new(0, 1.2, 0.2 + 2.0 * PI, Condition::Wired),
            BoundaryArc::new(1, 1.0, 3.0, Condition::Free),
            BoundaryArc::new(1, 3.0, 1.0 + 2.0 * PI, Condition::Wired),
        ];
        let scene = Scene::circular(d, BoundaryData::new(arcs), Tolerances::default()).unwrap();
        let s = HarmonicSolver::new(&scene).unwrap();
        let p = PeriodData::assemble(&s, &scene.topology).unwrap();
        assert_eq!((p.genus(), p.arcs()), (2, 2));
        let (a, b) = (scene.topology.measured_components[0], scene.topology.measured_components[1]);
        let ab = pairing_components(&s, a, b).unwrap();
        let ba = pairing_components(&s, b, a).unwrap();
        assert!((ab - ba).abs() < 1e-10);
        let lmax = SymmetricEigen::new(p.q.clone()).eigenvalues.max();
        assert!(lmax < 0.0);
        // Sum rule: Σ over all components of ⟨∇h_a, ∇ĥ_j⟩ vanishes, so the
        // outer-circle pairing is minus the sum over holes.
        for j in 0..2 {
            let total: f64 = (0..3).map(|m| pairing_component_arc(&s, &scene.topology, m, j).unwrap()).sum();
            assert!(total.abs() < 1e-9);
        }
        // Collocation backend reproduces the forms after a solver refinement.
        let opts = SolverOptions { tolerance: 1e-11, ..SolverOptions::from_scene(&scene) };
        let s2 = HarmonicSolver::with_options(&scene, &opts).unwrap();
        let p2 = PeriodData::assemble(&s2, &scene.topology).unwrap();
        assert!((&p.q - &p2.q).abs().max() < 1e-8);
        assert!((&p.b - &p2.b).abs().max() < 1e-8);
    }

    #[test]
    fn weight_prefactor_matches_energy() {
        // exp(-(1/4π)⟨∇ξ,∇ξ⟩) with ξ = (α/2) s h on the annulus.
        let scene = Scene::wired(CircularDomain::annulus(0.3)).unwrap();
        let s = HarmonicSolver::new(&scene).unwrap();
        let p = PeriodData::assemble(&s, &scene.topology).unwrap();
        let alpha = crate::ALPHA;
        for sv in [1i64, 2, 3] {
            let energy = (alpha / 2.0 * sv as f64).powi(2) * p.pair_hh[(0, 0)];
            assert!((p.exponent(&[sv], &[]) + energy / (4.0 * PI)).abs() < 1e-10);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let v = adaptive_gl(|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, 1e-14).unwrap();
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-12);
    }
}
