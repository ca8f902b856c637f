//! Circular multiply connected domains, wired/free boundary data and scene
//! validation.
//!
//! A scene is an open domain bounded by disjoint circles (component 0 is the
//! outer circle, components `1..=g` are the holes in the order given) together
//! with a partition of every boundary circle into wired and free arcs. Arcs
//! are parametrized by counterclockwise angles on their circle; jump points
//! are always derived from the arcs, never stored separately.
//!
//! The upper half-plane is supported as a closed-form model domain with a
//! single, entirely wired boundary component (the real axis).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ALPHA;

const TWO_PI: f64 = 2.0 * PI;
/// Angular tolerance used when checking that arcs tile a circle.
const ANGLE_TOL: f64 = 1e-9;

/// A circle in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Complex64,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Complex64, radius: f64) -> Self {
        Circle { center, radius }
    }

    /// Point at counterclockwise angle `theta`.
    pub fn point(&self, theta: f64) -> Complex64 {
        self.center + Complex64::from_polar(self.radius, theta)
    }

    /// Angle of `z` as seen from the center, in `[0, 2π)`.
    pub fn angle_of(&self, z: Complex64) -> f64 {
        (z - self.center).arg().rem_euclid(TWO_PI)
    }
}

/// Outer circle plus an ordered list of disjoint holes.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularDomain {
    pub outer: Circle,
    pub holes: Vec<Circle>,
}

impl CircularDomain {
    pub fn new(outer: Circle, holes: Vec<Circle>) -> Self {
        CircularDomain { outer, holes }
    }

    /// Unit disk.
    pub fn unit_disk() -> Self {
        CircularDomain::new(Circle::new(Complex64::new(0.0, 0.0), 1.0), vec![])
    }

    /// Concentric annulus `r < |z| < 1`.
    pub fn annulus(r: f64) -> Self {
        let o = Complex64::new(0.0, 0.0);
        CircularDomain::new(Circle::new(o, 1.0), vec![Circle::new(o, r)])
    }

    /// Number of holes.
    pub fn genus(&self) -> usize {
        self.holes.len()
    }

    /// Number of boundary components (`g + 1`).
    pub fn connectivity(&self) -> usize {
        self.holes.len() + 1
    }

    /// Boundary circle of component `i` (0 = outer).
    pub fn circle(&self, i: usize) -> &Circle {
        if i == 0 {
            &self.outer
        } else {
            &self.holes[i - 1]
        }
    }

    /// All boundary circles in component order.
    pub fn circles(&self) -> Vec<Circle> {
        std::iter::once(self.outer).chain(self.holes.iter().copied()).collect()
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        let mut d = self.outer.radius - (z - self.outer.center).norm();
        for h in &self.holes {
            d = d.min((z - h.center).norm() - h.radius);
        }
        d
    }

    /// True iff `z` lies in the open domain.
    pub fn contains(&self, z: Complex64) -> bool {
        if (z - self.outer.center).norm() >= self.outer.radius {
            return false;
        }
        self.holes.iter().all(|h| (z - h.center).norm() > h.radius)
    }

    /// Violated geometric invariants (empty iff admissible).
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let circles = self.circles();
        for (i, c) in circles.iter().enumerate() {
            if !(c.radius > 0.0 && c.radius.is_finite()) {
                out.push(format!("component {i}: radius must be positive and finite"));
            }
            if !(c.center.re.is_finite() && c.center.im.is_finite()) {
                out.push(format!("component {i}: center must be finite"));
            }
        }
        for (m, h) in self.holes.iter().enumerate() {
            if (h.center - self.outer.center).norm() + h.radius >= self.outer.radius {
                out.push(format!("hole {} not strictly inside outer circle", m + 1));
            }
        }
        for a in 0..self.holes.len() {
            for b in (a + 1)..self.holes.len() {
                let (ha, hb) = (&self.holes[a], &self.holes[b]);
                if (ha.center - hb.center).norm() <= ha.radius + hb.radius {
                    out.push(format!("holes {} and {} overlap", a + 1, b + 1));
                }
            }
        }
        out
    }

    /// Image under the similarity `z ↦ a z + b` (`a ≠ 0`).
    pub fn affine_image(&self, a: Complex64, b: Complex64) -> Self {
        let map = |c: &Circle| Circle::new(a * c.center + b, a.norm() * c.radius);
        CircularDomain::new(map(&self.outer), self.holes.iter().map(map).collect())
    }
}

/// Geometry of a scene: a circular domain or the upper half-plane model.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainModel {
    Circular(CircularDomain),
    HalfPlane,
}

impl DomainModel {
    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            DomainModel::Circular(d) => d.contains(z),
            DomainModel::HalfPlane => z.im > 0.0 && z.re.is_finite() && z.im.is_finite(),
        }
    }

    /// Signed distance to the boundary (positive inside).
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        match self {
            DomainModel::Circular(d) => d.boundary_distance(z),
            DomainModel::HalfPlane => z.im,
        }
    }

    pub fn genus(&self) -> usize {
        match self {
            DomainModel::Circular(d) => d.genus(),
            DomainModel::HalfPlane => 0,
        }
    }

    pub fn connectivity(&self) -> usize {
        self.genus() + 1
    }
}

/// Boundary condition on an arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    Wired,
    Free,
}

/// Counterclockwise arc `[start, end]` of boundary component `component`.
///
/// The angular span is `end - start` when that lies in `(0, 2π]`, and is
/// otherwise reduced modulo `2π`; a single arc with span `2π` covers its
/// whole circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryArc {
    pub component: usize,
    pub start: f64,
    pub end: f64,
    pub condition: Condition,
}

impl BoundaryArc {
    pub fn new(component: usize, start: f64, end: f64, condition: Condition) -> Self {
        BoundaryArc { component, start, end, condition }
    }

    /// Arc covering the whole circle of `component`.
    pub fn full(component: usize, condition: Condition) -> Self {
        BoundaryArc::new(component, 0.0, TWO_PI, condition)
    }

    /// Start angle reduced to `[0, 2π)`.
    pub fn start_normalized(&self) -> f64 {
        self.start.rem_euclid(TWO_PI)
    }

    /// Angular span in `(0, 2π]`.
    pub fn span(&self) -> f64 {
        let raw = self.end - self.start;
        if raw > 0.0 && raw <= TWO_PI + ANGLE_TOL {
            raw.min(TWO_PI)
        } else {
            let r = raw.rem_euclid(TWO_PI);
            if r < ANGLE_TOL {
                TWO_PI
            } else {
                r
            }
        }
    }

    /// True iff `theta` lies strictly inside the arc.
    pub fn contains_angle(&self, theta: f64) -> bool {
        let rel = (theta - self.start_normalized()).rem_euclid(TWO_PI);
        let span = self.span();
        if span >= TWO_PI - ANGLE_TOL {
            return true;
        }
        rel > 0.0 && rel < span
    }
}

/// Raw boundary data as supplied by the user.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryData {
    pub arcs: Vec<BoundaryArc>,
    /// Index into `arcs` of the arc where the instanton component is pinned;
    /// `None` selects the first wired arc (or the first arc if all are free).
    pub marked_arc: Option<usize>,
}

impl BoundaryData {
    pub fn new(arcs: Vec<BoundaryArc>) -> Self {
        BoundaryData { arcs, marked_arc: None }
    }

    /// Every component entirely wired.
    pub fn all_wired(connectivity: usize) -> Self {
        BoundaryData::new((0..connectivity).map(|i| BoundaryArc::full(i, Condition::Wired)).collect())
    }
}

/// A free arc with two endpoints, i.e. one carrying an arc harmonic measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeArc {
    pub component: usize,
    /// Start angle in `[0, 2π)`.
    pub start: f64,
    /// Span in `(0, 2π)`.
    pub span: f64,
    /// Index of the arc in the user's arc list.
    pub source: usize,
}

impl FreeArc {
    pub fn end(&self) -> f64 {
        self.start + self.span
    }

    /// True iff `theta` is strictly inside the arc.
    pub fn contains_angle(&self, theta: f64) -> bool {
        let rel = (theta - self.start).rem_euclid(TWO_PI);
        rel > 0.0 && rel < self.span
    }
}

/// Boundary data with all derived quantities resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    /// Arcs grouped by component, each sorted by normalized start angle.
    pub component_arcs: Vec<Vec<BoundaryArc>>,
    /// Free arcs with two endpoints, ordered by (component, start angle).
    pub free_arcs: Vec<FreeArc>,
    /// `N_i = 1` iff component `i` is entirely free (indexed by component).
    pub entirely_free: Vec<bool>,
    /// Index of the marked arc in the user's arc list (`None` when it is
    /// an implicit entirely wired component).
    pub marked_arc: Option<usize>,
    /// Component containing the marked arc.
    pub reference_component: usize,
    /// Components carrying an integer coordinate `s_i`, in increasing order.
    pub measured_components: Vec<usize>,
    /// Required parity of each `s_i` (aligned with `measured_components`).
    pub parity: Vec<u8>,
    /// Value of the instanton component on the marked arc.
    pub pin: f64,
    /// True iff no wired arc exists.
    pub all_free: bool,
}

impl Topology {
    /// Number of free arcs with two endpoints.
    pub fn k(&self) -> usize {
        self.free_arcs.len()
    }

    /// Number of integer instanton coordinates.
    pub fn g(&self) -> usize {
        self.measured_components.len()
    }

    /// Jump points `b_1, …, b_2k` as `(component, angle)`; free arc `j`
    /// is bounded by entries `2j` and `2j + 1`.
    pub fn jump_points(&self) -> Vec<(usize, f64)> {
        self.free_arcs
            .iter()
            .flat_map(|a| [(a.component, a.start), (a.component, a.end().rem_euclid(TWO_PI))])
            .collect()
    }

    /// Condition at angle `theta` of component `c` (`None` at a jump point).
    pub fn condition_at(&self, c: usize, theta: f64) -> Option<Condition> {
        let arcs = &self.component_arcs[c];
        if arcs.len() == 1 {
            return Some(arcs[0].condition);
        }
        arcs.iter().find(|a| a.contains_angle(theta)).map(|a| a.condition)
    }
}

/// Numerical tolerances of a scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Minimal separation between insertions and from the boundary.
    pub separation: f64,
    /// Boundary residual target of the collocation solver.
    pub boundary: f64,
    /// Relative truncation target of instanton lattice sums.
    pub lattice: f64,
    /// Relative truncation target of theta lattice sums.
    pub theta: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { separation: 1e-6, boundary: 1e-9, lattice: 1e-14, theta: 1e-14 }
    }
}

/// Validated domain, boundary data and tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub model: DomainModel,
    pub bc: BoundaryData,
    pub topology: Topology,
    pub tolerances: Tolerances,
}

/// Validate a circular domain with boundary data; empty iff admissible.
pub fn validate(domain: &CircularDomain, bc: &BoundaryData) -> Vec<String> {
    let mut out = domain.diagnostics();
    out.extend(resolve_topology(domain.connectivity(), bc).err().unwrap_or_default());
    out
}

/// True iff `z` lies in the open domain.
pub fn contains(domain: &CircularDomain, z: Complex64) -> bool {
    domain.contains(z)
}

fn resolve_topology(connectivity: usize, bc: &BoundaryData) -> std::result::Result<Topology, Vec<String>> {
    let mut diags = Vec::new();
    let mut component_arcs: Vec<Vec<(usize, BoundaryArc)>> = vec![Vec::new(); connectivity];
    for (idx, arc) in bc.arcs.iter().enumerate() {
        if arc.component >= connectivity {
            diags.push(format!("arc {idx}: component {} does not exist", arc.component));
            continue;
        }
        if !(arc.start.is_finite() && arc.end.is_finite()) {
            diags.push(format!("arc {idx}: non-finite angle"));
            continue;
        }
        component_arcs[arc.component].push((idx, *arc));
    }
    // Components without arcs default to entirely wired.
    for (c, arcs) in component_arcs.iter_mut().enumerate() {
        if arcs.is_empty() {
            arcs.push((usize::MAX, BoundaryArc::full(c, Condition::Wired)));
        }
        arcs.sort_by(|a, b| a.1.start_normalized().total_cmp(&b.1.start_normalized()));
    }
    let mut free_arcs = Vec::new();
    let mut entirely_free = vec![false; connectivity];
    for (c, arcs) in component_arcs.iter().enumerate() {
        if arcs.len() == 1 {
            let a = arcs[0].1;
            if a.span() < TWO_PI - ANGLE_TOL {
                diags.push(format!("component {c}: arcs do not cover the circle"));
            }
            entirely_free[c] = a.condition == Condition::Free;
            continue;
        }
        let total: f64 = arcs.iter().map(|a| a.1.span()).sum();
        if (total - TWO_PI).abs() > 1e-7 {
            diags.push(format!("component {c}: arcs do not partition the circle"));
        }
        for w in 0..arcs.len() {
            let a = arcs[w].1;
            let b = arcs[(w + 1) % arcs.len()].1;
            let gap = (b.start_normalized() - (a.start_normalized() + a.span())).rem_euclid(TWO_PI);
            if gap.min(TWO_PI - gap) > 1e-7 {
                diags.push(format!("component {c}: arcs do not partition the circle"));
                break;
            }
        }
        if arcs.len() % 2 == 1 {
            diags.push(format!("component {c}: odd jump count ({})", arcs.len()));
        }
        for w in 0..arcs.len() {
            if arcs[w].1.condition == arcs[(w + 1) % arcs.len()].1.condition {
                diags.push(format!("component {c}: adjacent arcs share a boundary condition"));
                break;
            }
        }
        for (idx, a) in arcs {
            if a.condition == Condition::Free {
                free_arcs.push(FreeArc { component: c, start: a.start_normalized(), span: a.span(), source: *idx });
            }
        }
    }
    diags.dedup();
    let all_free = component_arcs.iter().flatten().all(|(_, a)| a.condition == Condition::Free);
    let (marked_arc, reference_component) = match bc.marked_arc {
        Some(m) => {
            if m >= bc.arcs.len() {
                diags.push(format!("marked arc {m} does not exist"));
                (None, 0)
            } else {
                if !all_free && bc.arcs[m].condition != Condition::Wired {
                    diags.push("marked arc must be wired when a wired arc exists".to_string());
                }
                (Some(m), bc.arcs[m].component)
            }
        }
        None => component_arcs
            .iter()
            .flatten()
            .find(|(_, a)| all_free || a.condition == Condition::Wired)
            .map(|(i, a)| ((*i != usize::MAX).then_some(*i), a.component))
            .unwrap_or((None, 0)),
    };
    if !diags.is_empty() {
        return Err(diags);
    }
    let measured_components: Vec<usize> = (0..connectivity).filter(|&c| c != reference_component).collect();
    let parity = measured_components
        .iter()
        .map(|&c| ((entirely_free[c] as u8) + (all_free as u8)) % 2)
        .collect();
    Ok(Topology {
        component_arcs: component_arcs.into_iter().map(|v| v.into_iter().map(|(_, a)| a).collect()).collect(),
        free_arcs,
        entirely_free,
        marked_arc,
        reference_component,
        measured_components,
        parity,
        pin: if all_free { 0.5 * ALPHA } else { 0.0 },
        all_free,
    })
}

impl Scene {
    /// Validate and resolve a circular scene.
    pub fn circular(domain: CircularDomain, bc: BoundaryData, tolerances: Tolerances) -> Result<Scene> {
        let diags = domain.diagnostics();
        let topo = resolve_topology(domain.connectivity(), &bc);
        match (diags.is_empty(), topo) {
            (true, Ok(topology)) => Ok(Scene { model: DomainModel::Circular(domain), bc, topology, tolerances }),
            (_, topo) => {
                let mut all = diags;
                all.extend(topo.err().unwrap_or_default());
                Err(Error::InvalidScene(all))
            }
        }
    }

    /// Circular scene with every component wired and default tolerances.
    pub fn wired(domain: CircularDomain) -> Result<Scene> {
        let bc = BoundaryData::all_wired(domain.connectivity());
        Scene::circular(domain, bc, Tolerances::default())
    }

    /// Upper half-plane with wired boundary.
    pub fn half_plane(tolerances: Tolerances) -> Scene {
        let bc = BoundaryData::all_wired(1);
        let topology = resolve_topology(1, &bc).expect("wired half-plane is admissible");
        Scene { model: DomainModel::HalfPlane, bc, topology, tolerances }
    }

    /// The circular domain, if any.
    pub fn domain(&self) -> Option<&CircularDomain> {
        match &self.model {
            DomainModel::Circular(d) => Some(d),
            DomainModel::HalfPlane => None,
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.model.contains(z)
    }

    /// Check that `z` is an interior point at least `separation` from the
    /// boundary.
    pub fn check_interior(&self, z: Complex64) -> Result<()> {
        if !self.contains(z) || self.model.boundary_distance(z) < self.tolerances.separation {
            return Err(Error::OutsideDomain { re: z.re, im: z.im });
        }
        Ok(())
    }

    /// Check a list of bulk points: interior and pairwise separated.
    pub fn check_bulk_points(&self, zs: &[Complex64]) -> Result<()> {
        for &z in zs {
            self.check_interior(z)?;
        }
        for i in 0..zs.len() {
            for j in (i + 1)..zs.len() {
                let d = (zs[i] - zs[j]).norm();
                if d < self.tolerances.separation {
                    return Err(Error::CoincidentPoints { distance: d });
                }
            }
        }
        Ok(())
    }

    /// Locate a boundary point: returns `(component, angle)` when `w` lies on
    /// a boundary circle (relative tolerance `1e-9`).
    pub fn locate_boundary(&self, w: Complex64) -> Option<(usize, f64)> {
        match &self.model {
            DomainModel::HalfPlane => (w.im.abs() <= 1e-9 * (1.0 + w.re.abs())).then_some((0, w.re)),
            DomainModel::Circular(d) => d.circles().iter().enumerate().find_map(|(i, c)| {
                let r = (w - c.center).norm();
                ((r - c.radius).abs() <= 1e-9 * c.radius).then(|| (i, c.angle_of(w)))
            }),
        }
    }

    /// Check that `w` lies on a wired arc at least `separation` (in arc
    /// length) away from every jump point; returns `(component, angle)`.
    pub fn check_wired_boundary_point(&self, w: Complex64) -> Result<(usize, f64)> {
        let (c, theta) = self.locate_boundary(w).ok_or(Error::OutsideDomain { re: w.re, im: w.im })?;
        if let DomainModel::Circular(d) = &self.model {
            let r = d.circle(c).radius;
            for (jc, b) in self.topology.jump_points() {
                if jc == c {
                    let da = (theta - b).rem_euclid(TWO_PI);
                    if da.min(TWO_PI - da) * r < self.tolerances.separation {
                        return Err(Error::InvalidScene(vec!["boundary point too close to a jump point".into()]));
                    }
                }
            }
        }
        match self.topology.condition_at(c, theta) {
            Some(Condition::Wired) => Ok((c, theta)),
            _ => Err(Error::InvalidScene(vec!["boundary spin must lie on a wired arc".into()])),
        }
    }

    /// Image of a circular scene under `z ↦ a z + b`, with arcs rotated by
    /// `arg a`. Fails for the half-plane model unless `a` is real positive.
    pub fn affine_image(&self, a: Complex64, b: Complex64) -> Result<Scene> {
        if a.norm() == 0.0 || !a.norm().is_finite() {
            return Err(Error::NotCircleMap("degenerate similarity".into()));
        }
        match &self.model {
            DomainModel::HalfPlane => {
                if a.im != 0.0 || a.re <= 0.0 || b.im != 0.0 {
                    return Err(Error::NotCircleMap("half-plane model admits only real dilations and translations".into()));
                }
                Ok(self.clone())
            }
            DomainModel::Circular(d) => {
                let rot = a.arg();
                let arcs = self
                    .bc
                    .arcs
                    .iter()
                    .map(|arc| BoundaryArc { start: arc.start + rot, end: arc.end + rot, ..*arc })
                    .collect();
                let bc = BoundaryData { arcs, marked_arc: self.bc.marked_arc };
                Scene::circular(d.affine_image(a, b), bc, self.tolerances)
            }
        }
    }
}

/// One insertion as read from a scene file.
#[derive(Debug, Clone, PartialEq)]
pub struct InsertionSpec {
    pub z: Complex64,
    pub field: String,
    pub gamma: Option<Complex64>,
}

/// A parsed scene file: validated scene plus its insertion list.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFile {
    pub scene: Scene,
    pub insertions: Vec<InsertionSpec>,
}

/// Scene-file schema (TOML). See the crate README for the documented format.
mod file_schema {
    use serde::Deserialize;

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Root {
        pub schema: i64,
        pub domain: Domain,
        #[serde(default)]
        pub bc: Option<Bc>,
        #[serde(default)]
        pub insertions: Vec<Insertion>,
        #[serde(default)]
        pub tolerances: Option<Tols>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Domain {
        #[serde(default)]
        pub model: Option<String>,
        #[serde(default)]
        pub outer: Option<CircleSpec>,
        #[serde(default)]
        pub holes: Vec<CircleSpec>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct CircleSpec {
        pub center: super::ComplexSpec,
        pub radius: f64,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Bc {
        #[serde(default)]
        pub arcs: Vec<Arc>,
        #[serde(default)]
        pub marked_arc: Option<usize>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Arc {
        pub component: usize,
        pub start: f64,
        pub end: f64,
        pub condition: String,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Insertion {
        pub x: f64,
        pub y: f64,
        pub field: String,
        #[serde(default)]
        pub gamma: Option<super::ComplexSpec>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Tols {
        pub separation: Option<f64>,
        pub boundary: Option<f64>,
        pub lattice: Option<f64>,
        pub theta: Option<f64>,
    }
}

/// A complex number written either as a bare real or as `{ re, im }`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Real(f64),
    Parts {
        re: f64,
        #[serde(default)]
        im: f64,
    },
}

impl From<ComplexSpec> for Complex64 {
    fn from(c: ComplexSpec) -> Self {
        match c {
            ComplexSpec::Real(r) => Complex64::new(r, 0.0),
            ComplexSpec::Parts { re, im } => Complex64::new(re, im),
        }
    }
}

impl SceneFile {
    /// Parse and validate a scene file.
    pub fn parse(text: &str) -> Result<SceneFile> {
        let root: file_schema::Root = toml::from_str(text).map_err(|e| Error::SceneFormat(e.to_string()))?;
        if root.schema != 1 {
            return Err(Error::SceneFormat(format!("unsupported schema version {}", root.schema)));
        }
        let mut tolerances = Tolerances::default();
        if let Some(t) = root.tolerances {
            tolerances.separation = t.separation.unwrap_or(tolerances.separation);
            tolerances.boundary = t.boundary.unwrap_or(tolerances.boundary);
            tolerances.lattice = t.lattice.unwrap_or(tolerances.lattice);
            tolerances.theta = t.theta.unwrap_or(tolerances.theta);
        }
        let model = root.domain.model.as_deref().unwrap_or("circular");
        let scene = match model {
            "half_plane" => {
                if root.domain.outer.is_some() || !root.domain.holes.is_empty() {
                    return Err(Error::SceneFormat("half_plane model takes no circles".into()));
                }
                if let Some(bc) = &root.bc {
                    if bc.arcs.iter().any(|a| a.condition != "wired") {
                        return Err(Error::InvalidScene(vec!["half-plane model supports only wired boundary".into()]));
                    }
                }
                Scene::half_plane(tolerances)
            }
            "circular" => {
                let outer = root
                    .domain
                    .outer
                    .ok_or_else(|| Error::SceneFormat("missing domain.outer".into()))?;
                let circle = |c: file_schema::CircleSpec| Circle::new(c.center.into(), c.radius);
                let domain = CircularDomain::new(circle(outer), root.domain.holes.into_iter().map(circle).collect());
                let (arcs, marked_arc) = match root.bc {
                    Some(bc) => {
                        let arcs = bc
                            .arcs
                            .into_iter()
                            .map(|a| {
                                let condition = match a.condition.as_str() {
                                    "wired" => Ok(Condition::Wired),
                                    "free" => Ok(Condition::Free),
                                    other => Err(Error::SceneFormat(format!("unknown condition '{other}'"))),
                                }?;
                                Ok(BoundaryArc::new(a.component, a.start, a.end, condition))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        (arcs, bc.marked_arc)
                    }
                    None => (Vec::new(), None),
                };
                Scene::circular(domain, BoundaryData { arcs, marked_arc }, tolerances)?
            }
            other => return Err(Error::SceneFormat(format!("unknown domain model '{other}'"))),
        };
        let insertions = root
            .insertions
            .into_iter()
            .map(|i| InsertionSpec { z: Complex64::new(i.x, i.y), field: i.field, gamma: i.gamma.map(Into::into) })
            .collect();
        Ok(SceneFile { scene, insertions })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn unit_disk_single_wired_arc_is_admissible() {
        let d = CircularDomain::unit_disk();
        let bc = BoundaryData::new(vec![BoundaryArc::full(0, Condition::Wired)]);
        assert!(validate(&d, &bc).is_empty());
    }

    #[test]
    fn overlapping_hole_is_reported() {
        let d = CircularDomain::new(Circle::new(c(0.0, 0.0), 1.0), vec![Circle::new(c(0.8, 0.0), 0.3)]);
        let diags = validate(&d, &BoundaryData::all_wired(2));
        assert!(diags.iter().any(|m| m.contains("hole not strictly inside") || m.contains("not strictly inside")));
    }

    #[test]
    fn odd_jump_count_is_reported() {
        let d = CircularDomain::unit_disk();
        let t = 2.0 * PI / 3.0;
        let bc = BoundaryData::new(vec![
            BoundaryArc::new(0, 0.0, t, Condition::Wired),
            BoundaryArc::new(0, t, 2.0 * t, Condition::Free),
            BoundaryArc::new(0, 2.0 * t, 3.0 * t, Condition::Wired),
        ]);
        let diags = validate(&d, &bc);
        assert!(diags.iter().any(|m| m.contains("odd jump count")), "{diags:?}");
    }

    #[test]
    fn contains_examples() {
        let disk = CircularDomain::unit_disk();
        assert!(contains(&disk, c(0.0, 0.0)));
        assert!(!contains(&disk, c(1.0, 0.0)));
        let ann = CircularDomain::annulus(0.5);
        assert!(!contains(&ann, c(0.25, 0.0)));
        assert!(contains(&ann, c(0.75, 0.0)));
    }

    #[test]
    fn topology_of_disk_with_two_free_arcs() {
        let d = CircularDomain::unit_disk();
        let q = PI / 2.0;
        let bc = BoundaryData::new(vec![
            BoundaryArc::new(0, 0.0, q, Condition::Wired),
            BoundaryArc::new(0, q, 2.0 * q, Condition::Free),
            BoundaryArc::new(0, 2.0 * q, 3.0 * q, Condition::Wired),
            BoundaryArc::new(0, 3.0 * q, 4.0 * q, Condition::Free),
        ]);
        let s = Scene::circular(d, bc, Tolerances::default()).unwrap();
        assert_eq!(s.topology.k(), 2);
        assert_eq!(s.topology.jump_points().len(), 4);
        assert_eq!(s.topology.reference_component, 0);
        assert_eq!(s.topology.pin, 0.0);
    }

    #[test]
    fn all_free_annulus_pins_half_alpha_and_even_parity() {
        let bc = BoundaryData::new(vec![BoundaryArc::full(0, Condition::Free), BoundaryArc::full(1, Condition::Free)]);
        let s = Scene::circular(CircularDomain::annulus(0.5), bc, Tolerances::default()).unwrap();
        assert!(s.topology.all_free);
        assert_eq!(s.topology.pin, 0.5 * ALPHA);
        assert_eq!(s.topology.parity, vec![0]);
        // Wired outer, free hole: odd coordinate.
        let bc = BoundaryData::new(vec![BoundaryArc::full(0, Condition::Wired), BoundaryArc::full(1, Condition::Free)]);
        let s = Scene::circular(CircularDomain::annulus(0.5), bc, Tolerances::default()).unwrap();
        assert_eq!(s.topology.parity, vec![1]);
    }

    #[test]
    fn marking_a_free_arc_is_rejected_when_wired_exists() {
        let q = PI;
        let mut bc = BoundaryData::new(vec![
            BoundaryArc::new(0, 0.0, q, Condition::Wired),
            BoundaryArc::new(0, q, 2.0 * q, Condition::Free),
        ]);
        bc.marked_arc = Some(1);
        assert!(!validate(&CircularDomain::unit_disk(), &bc).is_empty());
    }

    #[test]
    fn scene_file_round_trip() {
        let text = r#"
schema = 1
[domain]
outer = { center = { re = 0.0, im = 0.0 }, radius = 1.0 }
holes = [ { center = { re = 0.1, im = 0.0 }, radius = 0.3 } ]
[[bc.arcs]]
component = 0
start = 0.0
end = 6.283185307179586
condition = "wired"
[[insertions]]
x = 0.6
y = 0.1
field = "sigma"
[[insertions]]
x = -0.6
y = 0.0
field = "exp"
gamma = { re = 0.0, im = 0.5 }
[tolerances]
separation = 1e-7
"#;
        let f = SceneFile::parse(text).unwrap();
        assert_eq!(f.insertions.len(), 2);
        assert_eq!(f.insertions[1].gamma, Some(c(0.0, 0.5)));
        assert_eq!(f.scene.tolerances.separation, 1e-7);
        assert_eq!(f.scene.topology.measured_components, vec![1]);
        assert!(SceneFile::parse("schema = 2\n[domain]\nmodel = \"half_plane\"\n").is_err());
        assert!(SceneFile::parse("schema = 1\n[domain]\nmodel = \"half_plane\"\n").is_ok());
    }

    proptest! {
        #[test]
        fn contains_agrees_with_distance_sign(x in -1.2f64..1.2, y in -1.2f64..1.2) {
            let d = CircularDomain::new(
                Circle::new(c(0.0, 0.0), 1.0),
                vec![Circle::new(c(0.3, 0.2), 0.2), Circle::new(c(-0.4, -0.3), 0.25)],
            );
            let z = c(x, y);
            let dist = d.boundary_distance(z);
            if dist.abs() > 1e-12 {
                prop_assert_eq!(d.contains(z), dist > 0.0);
            }
        }

        #[test]
        fn validate_is_idempotent(split in 0.1f64..6.0) {
            let d = CircularDomain::unit_disk();
            let bc = BoundaryData::new(vec![
                BoundaryArc::new(0, 0.0, split, Condition::Wired),
                BoundaryArc::new(0, split, 2.0 * PI, Condition::Free),
            ]);
            prop_assert_eq!(validate(&d, &bc), validate(&d, &bc));
            prop_assert!(validate(&d, &bc).is_empty());
        }
    }
}
