//! The instanton component `ξ` of the compactified field.
//!
//! Every realization is `ξ = pin + (α/2)(Σᵢ sᵢhᵢ + Σⱼ ŝⱼĥⱼ)` where `hᵢ` runs
//! over the harmonic measures of the measured components (all components but
//! the one carrying the marked arc), `ĥⱼ` over the free-arc measures, `ŝⱼ = ±1`
//! and `sᵢ ≡ Nᵢ (mod 2)`. The Gibbs weight is `exp(Q(s) + B(s,ŝ) + Q̂(ŝ))`
//! from [`PeriodData`]. Expectations are evaluated as exact sums over `ŝ`
//! and truncated lattice sums over `s` with a rigorous Gaussian tail bound.

use std::sync::OnceLock;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Scene, Topology};
use crate::harmonic::HarmonicSolver;
use crate::period::PeriodData;
use crate::theta::{CompensatedSum, ShellEnumerator, Truncation, DEFAULT_MAX_POINTS, DEFAULT_RADIUS_CAP};
use crate::ALPHA;

/// Largest number of free arcs whose sign configurations are enumerated.
pub const MAX_FREE_ARCS: usize = 20;

/// One instanton configuration.
#[derive(Debug, Clone, Copy)]
pub struct Config<'a> {
    /// Winding numbers on measured components.
    pub s: &'a [i64],
    /// Free-arc signs.
    pub shat: &'a [f64],
}

/// Harmonic-measure data of one bulk point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointData {
    pub z: Complex64,
    pub h: Vec<f64>,
    pub hhat: Vec<f64>,
    pub dh: Vec<Complex64>,
    pub dhhat: Vec<Complex64>,
}

impl PointData {
    /// Evaluate the measures entering `ξ` at `z`.
    pub fn new(solver: &HarmonicSolver, topology: &Topology, z: Complex64) -> Result<PointData> {
        let mut p = PointData { z, h: vec![], hhat: vec![], dh: vec![], dhhat: vec![] };
        for &c in &topology.measured_components {
            let v = solver.harmonic_measure_derivs(c, z)?;
            p.h.push(v.value);
            p.dh.push(v.dz);
        }
        for j in 0..topology.free_arcs.len() {
            let v = solver.harmonic_measure_arc_derivs(j, z)?;
            p.hhat.push(v.value);
            p.dhhat.push(v.dz);
        }
        Ok(p)
    }
}

/// A wired boundary point carrying the sign `(-1)^{ξ(w)/α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySite {
    /// Index into the measured components, or `None` on the reference component.
    pub measured: Option<usize>,
}

impl BoundarySite {
    /// Locate a wired boundary point of the scene.
    pub fn new(scene: &Scene, w: Complex64) -> Result<BoundarySite> {
        let (component, _) = scene.check_wired_boundary_point(w)?;
        Ok(BoundarySite { measured: scene.topology.measured_components.iter().position(|&c| c == component) })
    }
}

impl Config<'_> {
    /// `ξ(z)` for a configuration and pin.
    pub fn xi(&self, pin: f64, p: &PointData) -> f64 {
        let mut acc = 0.0;
        for (s, h) in self.s.iter().zip(&p.h) {
            acc += *s as f64 * h;
        }
        for (s, h) in self.shat.iter().zip(&p.hhat) {
            acc += s * h;
        }
        pin + 0.5 * ALPHA * acc
    }

    /// `∂ξ(z)`; `∂̄ξ` is its conjugate since `ξ` is real.
    pub fn dxi(&self, p: &PointData) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (s, h) in self.s.iter().zip(&p.dh) {
            acc += *h * *s as f64;
        }
        for (s, h) in self.shat.iter().zip(&p.dhhat) {
            acc += *h * *s;
        }
        0.5 * ALPHA * acc
    }

    /// `(-1)^{ξ(w)/α}` at a wired boundary point, computed from the exact
    /// piecewise-constant boundary values.
    pub fn boundary_sign(&self, pin: f64, site: &BoundarySite) -> f64 {
        let twice = match site.measured {
            None => 0,
            Some(i) => self.s[i],
        };
        let n = (pin / ALPHA * 2.0).round() as i64 + twice;
        // ξ/α = n/2 with n even on wired arcs.
        if (n / 2).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Coefficients of the linear exponent `Σᵢ γᵢ ξ(zᵢ)` in the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpCoefficients {
    /// `Σᵢ γᵢ` (multiplies the pin).
    pub total: Complex64,
    /// `(α/2) Σᵢ γᵢ h(zᵢ)`.
    pub a: Vec<Complex64>,
    /// `(α/2) Σᵢ γᵢ ĥ(zᵢ)`.
    pub ahat: Vec<Complex64>,
}

impl ExpCoefficients {
    pub fn new(gammas: &[Complex64], points: &[PointData], g: usize, k: usize) -> Self {
        let mut c = ExpCoefficients { total: Complex64::new(0.0, 0.0), a: vec![Complex64::new(0.0, 0.0); g], ahat: vec![Complex64::new(0.0, 0.0); k] };
        for (gm, p) in gammas.iter().zip(points) {
            c.total += gm;
            for i in 0..g {
                c.a[i] += 0.5 * ALPHA * gm * p.h[i];
            }
            for j in 0..k {
                c.ahat[j] += 0.5 * ALPHA * gm * p.hhat[j];
            }
        }
        c
    }
}

/// Expectation value with truncation report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: Complex64,
    pub truncation: Truncation,
}

/// The instanton ensemble of a scene.
#[derive(Debug)]
pub struct InstantonEnsemble {
    pub period: PeriodData,
    pub parity: Vec<u8>,
    pub pin: f64,
    /// Relative tolerance on discarded lattice mass.
    pub tol: f64,
    /// Relative tolerance for the partition function, a theta constant.
    pub theta_tol: f64,
    pub radius_cap: usize,
    lambda: f64,
    z: OnceLock<Result<Complex64>>,
}

impl Clone for InstantonEnsemble {
    fn clone(&self) -> Self {
        let z = OnceLock::new();
        if let Some(v) = self.z.get() {
            let _ = z.set(v.clone());
        }
        InstantonEnsemble { period: self.period.clone(), parity: self.parity.clone(), pin: self.pin, tol: self.tol, theta_tol: self.theta_tol, radius_cap: self.radius_cap, lambda: self.lambda, z }
    }
}

impl InstantonEnsemble {
    /// Ensemble for a scene's topology with its quadratic forms.
    pub fn new(period: PeriodData, topology: &Topology, tol: f64) -> Result<Self> {
        if period.arcs() > MAX_FREE_ARCS {
            return Err(Error::TruncationExceeded(format!("{} free arcs exceed the enumeration limit {MAX_FREE_ARCS}", period.arcs())));
        }
        let lambda = if period.genus() == 0 { -1.0 } else { SymmetricEigen::new(period.q.clone()).eigenvalues.max() };
        if lambda >= 0.0 {
            return Err(Error::NotNegativeDefinite { max_eigenvalue: lambda });
        }
        Ok(InstantonEnsemble { period, parity: topology.parity.clone(), pin: topology.pin, tol, theta_tol: tol, radius_cap: DEFAULT_RADIUS_CAP, lambda, z: OnceLock::new() })
    }

    /// The same ensemble with a separate partition-function tolerance.
    pub fn with_theta_tol(mut self, theta_tol: f64) -> Self {
        self.theta_tol = theta_tol;
        self.z = OnceLock::new();
        self
    }

    /// The same ensemble with the pin shifted by `shift`.
    pub fn with_pin_shift(&self, shift: f64) -> Self {
        let mut e = self.clone();
        e.pin += shift;
        e
    }

    pub fn genus(&self) -> usize {
        self.period.genus()
    }

    pub fn arcs(&self) -> usize {
        self.period.arcs()
    }

    /// All `2^k` sign vectors.
    fn sign_configs(&self) -> Vec<Vec<f64>> {
        let k = self.arcs();
        (0..1usize << k).map(|bits| (0..k).map(|j| if bits >> j & 1 == 1 { -1.0 } else { 1.0 }).collect()).collect()
    }

    /// Unnormalized sum `Σ W(s,ŝ) e^{c·ξ} Π signs · f(s,ŝ)`.
    fn raw_sum(
        &self,
        coeff: &ExpCoefficients,
        sites: &[BoundarySite],
        degree: u32,
        tol: f64,
        mut f: impl FnMut(&Config) -> Complex64,
    ) -> Result<(Complex64, Truncation)> {
        let g = self.genus();
        let shats = self.sign_configs();
        let p = &self.period;
        // Per-sign constant exponent and linear coefficient on s.
        let mut consts = Vec::with_capacity(shats.len());
        let mut lin = Vec::with_capacity(shats.len());
        let mut linear_bound: f64 = 0.0;
        for sh in &shats {
            let mut c = coeff.total * self.pin;
            for i in 0..sh.len() {
                for j in 0..sh.len() {
                    c += p.qhat_off[(i, j)] * sh[i] * sh[j];
                }
                c += coeff.ahat[i] * sh[i];
            }
            let l: Vec<Complex64> = (0..g).map(|a| coeff.a[a] + (0..sh.len()).map(|j| p.b[(a, j)] * sh[j]).sum::<f64>()).collect();
            linear_bound = linear_bound.max(l.iter().map(|v| v.re * v.re).sum::<f64>().sqrt());
            consts.push(c);
            lin.push(l);
        }
        let en = ShellEnumerator { parity: self.parity.clone(), lambda: self.lambda, linear: linear_bound, degree, radius_cap: self.radius_cap, max_points: DEFAULT_MAX_POINTS };
        let mut acc = CompensatedSum::default();
        let reference = std::cell::Cell::new(0.0f64);
        let mut biggest: f64 = 0.0;
        let truncation = en.run(
            tol,
            None,
            |s| {
                let mut quad = 0.0;
                for a in 0..g {
                    for b in 0..g {
                        quad += p.q[(a, b)] * (s[a] * s[b]) as f64;
                    }
                }
                for (idx, sh) in shats.iter().enumerate() {
                    let mut e = consts[idx] + quad;
                    for a in 0..g {
                        e += lin[idx][a] * s[a] as f64;
                    }
                    let cfg = Config { s, shat: sh };
                    let mut sign = 1.0;
                    for site in sites {
                        sign *= cfg.boundary_sign(self.pin, site);
                    }
                    let m = f(&cfg);
                    let t = e.exp() * m * sign;
                    biggest = biggest.max(e.re.exp() * m.norm().max(1.0));
                    acc.add(t);
                }
                reference.set(acc.value().norm().max(1e-3 * biggest));
            },
            || reference.get(),
        )?;
        Ok((acc.value(), truncation))
    }

    /// Partition function `Z = Σ exp(Q + B + Q̂)`.
    pub fn partition_function(&self) -> Result<Complex64> {
        self.z
            .get_or_init(|| {
                let zero = ExpCoefficients { total: Complex64::new(0.0, 0.0), a: vec![Complex64::new(0.0, 0.0); self.genus()], ahat: vec![Complex64::new(0.0, 0.0); self.arcs()] };
                self.raw_sum(&zero, &[], 0, self.theta_tol, |_| Complex64::new(1.0, 0.0)).map(|v| v.0)
            })
            .clone()
    }

    /// `E[e^{Σγᵢξ(zᵢ)} Π (-1)^{ξ(w)/α} f(config)]`, where `f` is a polynomial
    /// of degree at most `degree` in the configuration.
    pub fn expectation_with(
        &self,
        coeff: &ExpCoefficients,
        sites: &[BoundarySite],
        degree: u32,
        f: impl FnMut(&Config) -> Complex64,
    ) -> Result<Expectation> {
        let z = self.partition_function()?;
        let (num, truncation) = self.raw_sum(coeff, sites, degree, self.tol, f)?;
        Ok(Expectation { value: num / z, truncation })
    }

    /// `E[Π e^{γᵢξ(zᵢ)} Π (∂ξ or ∂̄ξ)(v)]` for moment factors `(point, anti)`
    /// referencing `points` (`anti = true` selects `∂̄ξ`).
    pub fn expectation(&self, gammas: &[Complex64], points: &[PointData], moments: &[(usize, bool)]) -> Result<Complex64> {
        let coeff = ExpCoefficients::new(gammas, points, self.genus(), self.arcs());
        let e = self.expectation_with(&coeff, &[], moments.len() as u32, |cfg| {
            let mut m = Complex64::new(1.0, 0.0);
            for &(i, anti) in moments {
                let d = cfg.dxi(&points[i]);
                m *= if anti { d.conj() } else { d };
            }
            m
        })?;
        Ok(e.value)
    }
}
