//! Parsing of command-line arguments: field names, sweep grids and
//! conformal maps.

use ising_boson::boson::FieldOperator;
use ising_boson::geometry::InsertionSpec;
use ising_boson::ising::{IsingField, IsingInsertion, MobiusMap};
use ising_boson::{Error, Result};
use num_complex::Complex64;

/// Insertions of a scene file, all on the Ising side or all bosonic.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldList {
    Ising(Vec<IsingInsertion>),
    Bosonic(Vec<ising_boson::boson::Insertion>),
}

impl FieldList {
    pub fn len(&self) -> usize {
        match self {
            FieldList::Ising(v) => v.len(),
            FieldList::Bosonic(v) => v.len(),
        }
    }

    /// A copy with insertion `index` moved to `z`.
    pub fn moved(&self, index: usize, z: Complex64) -> FieldList {
        let mut out = self.clone();
        match &mut out {
            FieldList::Ising(v) => v[index].z = z,
            FieldList::Bosonic(v) => v[index].z = z,
        }
        out
    }
}

fn bosonic_operator(spec: &InsertionSpec) -> Result<Option<FieldOperator>> {
    let gamma = || spec.gamma.ok_or_else(|| Error::SceneFormat(format!("field '{}' requires gamma", spec.field)));
    Ok(Some(match spec.field.as_str() {
        "exp" => FieldOperator::NormalExp(gamma()?),
        "cos" => FieldOperator::Cos(gamma()?),
        "sin" => FieldOperator::Sin(gamma()?),
        "dphi" => FieldOperator::DPhi,
        "dbarphi" => FieldOperator::DBarPhi,
        "grad_squared" => FieldOperator::GradSquared,
        "boundary_sign" => FieldOperator::BoundarySign,
        _ => return Ok(None),
    }))
}

/// Classify scene-file insertions.
pub fn field_list(specs: &[InsertionSpec]) -> Result<FieldList> {
    let mut ising = Vec::new();
    let mut bosonic = Vec::new();
    for s in specs {
        if let Some(f) = IsingField::from_name(&s.field) {
            if s.gamma.is_some() {
                return Err(Error::SceneFormat(format!("Ising field '{}' takes no gamma", s.field)));
            }
            ising.push(IsingInsertion::new(s.z, f));
        } else if let Some(op) = bosonic_operator(s)? {
            bosonic.push(ising_boson::boson::Insertion::new(s.z, op));
        } else {
            return Err(Error::SceneFormat(format!("unknown field '{}'", s.field)));
        }
    }
    match (ising.is_empty(), bosonic.is_empty()) {
        (_, true) => Ok(FieldList::Ising(ising)),
        (true, false) => Ok(FieldList::Bosonic(bosonic)),
        (false, false) => Err(Error::SceneFormat("Ising and bosonic fields cannot be mixed in one request".into())),
    }
}

fn parse_numbers(text: &str, count: usize, what: &str) -> Result<Vec<f64>> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::SceneFormat(format!("bad number '{t}' in {what}"))))
        .collect::<Result<_>>()?;
    if vals.len() != count {
        return Err(Error::SceneFormat(format!("{what} needs {count} comma-separated numbers, got {}", vals.len())));
    }
    Ok(vals)
}

/// Sweep grid: `segment:RE0,IM0:RE1,IM1:N` or `rect:RE0,IM0:RE1,IM1:NX,NY`
/// (rectangle rows of constant imaginary part, real part fastest).
pub fn grid_points(spec: &str) -> Result<Vec<Complex64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::SceneFormat(format!("grid spec '{spec}' must be segment:RE0,IM0:RE1,IM1:N or rect:RE0,IM0:RE1,IM1:NX,NY"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let a = parse_numbers(parts[1], 2, "grid start")?;
    let b = parse_numbers(parts[2], 2, "grid end")?;
    let (a, b) = (Complex64::new(a[0], a[1]), Complex64::new(b[0], b[1]));
    let count = |t: &str| -> Result<usize> {
        let n: usize = t.trim().parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(Error::SceneFormat("grid counts must be positive".into()));
        }
        Ok(n)
    };
    let frac = |i: usize, n: usize| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
    match parts[0] {
        "segment" => {
            let n = count(parts[3])?;
            Ok((0..n).map(|i| a + (b - a) * frac(i, n)).collect())
        }
        "rect" => {
            let ns: Vec<&str> = parts[3].split(',').collect();
            if ns.len() != 2 {
                return Err(bad());
            }
            let (nx, ny) = (count(ns[0])?, count(ns[1])?);
            let mut out = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    out.push(Complex64::new(a.re + (b.re - a.re) * frac(i, nx), a.im + (b.im - a.im) * frac(j, ny)));
                }
            }
            Ok(out)
        }
        _ => Err(bad()),
    }
}

/// Conformal map: `scale:R`, `affine:A_RE,A_IM,B_RE,B_IM`,
/// `mobius:A_RE,A_IM,B_RE,B_IM,C_RE,C_IM,D_RE,D_IM` or `cayley`.
pub fn conformal_map(spec: &str) -> Result<MobiusMap> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let cplx = |v: &[f64], i: usize| Complex64::new(v[2 * i], v[2 * i + 1]);
    match kind {
        "scale" => MobiusMap::scaling(parse_numbers(rest, 1, "scale map")?[0]),
        "affine" => {
            let v = parse_numbers(rest, 4, "affine map")?;
            MobiusMap::affine(cplx(&v, 0), cplx(&v, 1))
        }
        "mobius" => {
            let v = parse_numbers(rest, 8, "mobius map")?;
            MobiusMap::new(cplx(&v, 0), cplx(&v, 1), cplx(&v, 2), cplx(&v, 3))
        }
        "cayley" if rest.is_empty() => Ok(MobiusMap::disk_to_half_plane()),
        _ => Err(Error::NotCircleMap(format!("unknown map spec '{spec}'"))),
    }
}
