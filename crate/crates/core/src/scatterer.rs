//! Susceptibility models `ε̄_ij(r)` and their transforms
//! `ε̄_ij[q] = ∫ d³r e^{iq·r} ε̄_ij(r)`.

use std::f64::consts::PI;
use std::io::{BufRead, Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{CMat3, Complex64, Error, Mat3, Result, Vec3};

const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Below this value of `qa` the sphere form factor switches to its series.
pub const SPHERE_SERIES_THRESHOLD: f64 = 1e-3;

/// Symmetric real susceptibility strength `λ_ij`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Lambda(Mat3);

impl Lambda {
    pub fn new(m: Mat3) -> Result<Self> {
        let scale = m.abs().max().max(f64::MIN_POSITIVE);
        let asym = (m - m.transpose()).abs().max();
        if !m.iter().all(|v| v.is_finite()) || asym > SYMMETRY_TOLERANCE * scale {
            return Err(Error::invalid(
                "lambda",
                format!("must be finite and symmetric (asymmetry {asym:.3e})"),
            ));
        }
        Ok(Lambda((m + m.transpose()) * 0.5))
    }

    /// `λ_ij = λ δ_ij`.
    pub fn isotropic(lambda: f64) -> Self {
        Lambda(Mat3::identity() * lambda)
    }

    /// Builds `λ` from its upper triangle `(xx, yy, zz, xy, xz, yz)`.
    pub fn from_upper(xx: f64, yy: f64, zz: f64, xy: f64, xz: f64, yz: f64) -> Self {
        Lambda(Mat3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz))
    }

    pub fn zero() -> Self {
        Lambda(Mat3::zeros())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Lambda(self.0 * c)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }
}

impl From<Lambda> for [[f64; 3]; 3] {
    fn from(l: Lambda) -> Self {
        let m = l.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }
}

impl TryFrom<[[f64; 3]; 3]> for Lambda {
    type Error = Error;
    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self> {
        Lambda::new(Mat3::from_fn(|i, j| rows[i][j]))
    }
}

/// `ε̄_ij[q]`, a complex 3×3 matrix with units of volume.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SusceptibilityFt(pub CMat3);

impl SusceptibilityFt {
    pub fn matrix(&self) -> &CMat3 {
        &self.0
    }

    fn real(m: Mat3) -> Self {
        SusceptibilityFt(m.map(Complex64::from))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `ε̄_ij(r) = λ_ij (δ(r − a) + δ(r + a))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPointCenters {
    pub lambda: Lambda,
    pub a: [f64; 3],
}

impl TwoPointCenters {
    pub fn new(lambda: Lambda, a: Vec3) -> Self {
        TwoPointCenters {
            lambda,
            a: [a.x, a.y, a.z],
        }
    }

    pub fn separation(&self) -> Vec3 {
        Vec3::from(self.a)
    }
}

/// Uniform ball of radius `radius` with strength `λ_ij`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub lambda: Lambda,
    pub radius: f64,
}

impl Sphere {
    pub fn new(lambda: Lambda, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(
                "radius",
                format!("{radius} must be positive"),
            ));
        }
        Ok(Sphere { lambda, radius })
    }
}

/// `ε̄_ij` sampled on a regular grid. Voxel `(ix, iy, iz)` sits at
/// `origin + spacing·(ix, iy, iz)`; samples are stored x-fastest with the 9
/// components in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericGrid {
    dims: [usize; 3],
    spacing: f64,
    origin: [f64; 3],
    samples: Vec<[f64; 9]>,
}

impl NumericGrid {
    pub fn new(
        dims: [usize; 3],
        spacing: f64,
        origin: Vec3,
        samples: Vec<[f64; 9]>,
    ) -> Result<Self> {
        if dims.contains(&0) || samples.is_empty() {
            return Err(Error::Empty("numeric grid has no voxels"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(
                "spacing",
                format!("{spacing} must be positive"),
            ));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if samples.len() != expected {
            return Err(Error::invalid(
                "samples",
                format!("expected {expected} voxels, got {}", samples.len()),
            ));
        }
        Ok(NumericGrid {
            dims,
            spacing,
            origin: [origin.x, origin.y, origin.z],
            samples,
        })
    }

    /// Samples `f(r)` at every voxel centre.
    pub fn sample<F>(dims: [usize; 3], spacing: f64, origin: Vec3, f: F) -> Result<Self>
    where
        F: Fn(Vec3) -> Mat3 + Sync,
    {
        let n = dims[0] * dims[1] * dims[2];
        let samples: Vec<[f64; 9]> = (0..n)
            .into_par_iter()
            .map(|k| {
                let ix = k % dims[0];
                let iy = (k / dims[0]) % dims[1];
                let iz = k / (dims[0] * dims[1]);
                let r = origin + Vec3::new(ix as f64, iy as f64, iz as f64) * spacing;
                mat_to_row_major(&f(r))
            })
            .collect();
        NumericGrid::new(dims, spacing, origin, samples)
    }

    /// Two point centres smoothed by normalized Gaussians of standard
    /// deviation `width`, on a box padded by `8·width`.
    pub fn from_two_points(model: &TwoPointCenters, width: f64, spacing: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::invalid("width", "Gaussian width must be positive"));
        }
        let a = model.separation();
        let pad = 8.0 * width;
        let lo = -a.abs() - Vec3::repeat(pad);
        let hi = a.abs() + Vec3::repeat(pad);
        let dims = box_dims(&lo, &hi, spacing);
        let norm = (2.0 * PI * width * width).powf(-1.5);
        let lambda = *model.lambda.matrix();
        Self::sample(dims, spacing, lo, |r| {
            let g = |c: Vec3| (-(r - c).norm_squared() / (2.0 * width * width)).exp();
            lambda * (norm * (g(a) + g(-a)))
        })
    }

    /// Voxelized ball; each voxel holds its occupied volume fraction estimated
    /// with `supersample³` sub-samples.
    pub fn from_sphere(model: &Sphere, spacing: f64, supersample: usize) -> Result<Self> {
        let r0 = model.radius;
        let lo = Vec3::repeat(-r0 - spacing);
        let hi = Vec3::repeat(r0 + spacing);
        let dims = box_dims(&lo, &hi, spacing);
        let m = supersample.max(1);
        let lambda = *model.lambda.matrix();
        Self::sample(dims, spacing, lo, |r| {
            let mut inside = 0usize;
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        let off = Vec3::new(
                            (i as f64 + 0.5) / m as f64 - 0.5,
                            (j as f64 + 0.5) / m as f64 - 0.5,
                            (k as f64 + 0.5) / m as f64 - 0.5,
                        ) * spacing;
                        if (r + off).norm() <= r0 {
                            inside += 1;
                        }
                    }
                }
            }
            lambda * (inside as f64 / (m * m * m) as f64)
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> Vec3 {
        Vec3::from(self.origin)
    }

    pub fn samples(&self) -> &[[f64; 9]] {
        &self.samples
    }

    fn half_diagonal(&self) -> f64 {
        let span = Vec3::new(
            (self.dims[0] - 1) as f64,
            (self.dims[1] - 1) as f64,
            (self.dims[2] - 1) as f64,
        ) * self.spacing;
        0.5 * span.norm()
    }

    /// Trapezoidal sum of `e^{iq·r} ε̄(r)` over the grid.
    pub fn ft(&self, q: &Vec3) -> SusceptibilityFt {
        let [nx, ny, nz] = self.dims;
        let h = self.spacing;
        let origin = self.origin();
        let phase = |n: usize, o: f64, qc: f64| -> Vec<Complex64> {
            (0..n)
                .map(|i| {
                    let w = if n > 1 && (i == 0 || i == n - 1) {
                        0.5
                    } else {
                        1.0
                    };
                    Complex64::from_polar(w, qc * (o + i as f64 * h))
                })
                .collect()
        };
        let px = phase(nx, origin.x, q.x);
        let py = phase(ny, origin.y, q.y);
        let pz = phase(nz, origin.z, q.z);
        let slices: Vec<[Complex64; 9]> = (0..nz)
            .into_par_iter()
            .map(|iz| {
                let mut acc = [Complex64::new(0.0, 0.0); 9];
                for (iy, &pyv) in py.iter().enumerate() {
                    let pyz = pyv * pz[iz];
                    let row = (iz * ny + iy) * nx;
                    for (ix, p) in px.iter().enumerate() {
                        let s = &self.samples[row + ix];
                        if s.iter().all(|v| *v == 0.0) {
                            continue;
                        }
                        let ph = p * pyz;
                        for (a, v) in acc.iter_mut().zip(s) {
                            *a += ph * *v;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut total = [Complex64::new(0.0, 0.0); 9];
        for s in &slices {
            for (t, v) in total.iter_mut().zip(s) {
                *t += v;
            }
        }
        let vol = h * h * h;
        SusceptibilityFt(CMat3::from_fn(|i, j| total[3 * i + j] * vol))
    }

    /// Reads the CSV voxel format:
    ///
    /// ```text
    /// # optional comment lines
    /// nx,ny,nz,spacing,origin_x,origin_y,origin_z
    /// <nx>,<ny>,<nz>,<spacing>,<ox>,<oy>,<oz>
    /// xx,xy,xz,yx,yy,yz,zx,zy,zz
    /// <9 values per voxel, x index fastest, then y, then z>
    /// ```
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate().filter(|(_, l)| {
            l.as_ref().map_or(true, |s| {
                let t = s.trim();
                !t.is_empty() && !t.starts_with('#')
            })
        });
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(Error::Format(format!("voxel csv: missing {what}"))),
            }
        };
        let (_, header) = next("header")?;
        let expected = "nx,ny,nz,spacing,origin_x,origin_y,origin_z";
        if header.replace(' ', "") != expected {
            return Err(Error::Format(format!(
                "voxel csv: expected header `{expected}`"
            )));
        }
        let (line_no, meta) = next("grid description")?;
        let fields = parse_floats(&meta, line_no)?;
        if fields.len() != 7 {
            return Err(Error::Format(format!(
                "voxel csv line {line_no}: expected 7 fields, got {}",
                fields.len()
            )));
        }
        let dims = [
            to_dim(fields[0], line_no)?,
            to_dim(fields[1], line_no)?,
            to_dim(fields[2], line_no)?,
        ];
        let (_, comp_header) = next("component header")?;
        if comp_header.replace(' ', "") != "xx,xy,xz,yx,yy,yz,zx,zy,zz" {
            return Err(Error::Format(
                "voxel csv: expected component header `xx,xy,xz,yx,yy,yz,zx,zy,zz`".into(),
            ));
        }
        let mut samples = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        while let Ok((line_no, line)) = next("voxel") {
            let v = parse_floats(&line, line_no)?;
            let row: [f64; 9] = v.try_into().map_err(|v: Vec<f64>| {
                Error::Format(format!(
                    "voxel csv line {line_no}: expected 9 values, got {}",
                    v.len()
                ))
            })?;
            samples.push(row);
        }
        NumericGrid::new(
            dims,
            fields[3],
            Vec3::new(fields[4], fields[5], fields[6]),
            samples,
        )
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# qscatter voxel grid v1 (units: c = hbar = eps0 = 1)")?;
        writeln!(w, "nx,ny,nz,spacing,origin_x,origin_y,origin_z")?;
        let o = self.origin;
        writeln!(
            w,
            "{},{},{},{:e},{:e},{:e},{:e}",
            self.dims[0], self.dims[1], self.dims[2], self.spacing, o[0], o[1], o[2]
        )?;
        writeln!(w, "xx,xy,xz,yx,yy,yz,zx,zy,zz")?;
        for s in &self.samples {
            let row: Vec<String> = s.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Binary voxel format, little-endian: magic `QSVG`, `u32` version (1),
    /// `u32` nx, ny, nz, `f64` spacing, `f64` origin x, y, z, then
    /// `nx·ny·nz·9` `f64` samples in the CSV order.
    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(Error::Format("voxel binary: bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != 1 {
            return Err(Error::Format(format!(
                "voxel binary: unsupported version {version}"
            )));
        }
        let dims = [
            read_u32(&mut r)? as usize,
            read_u32(&mut r)? as usize,
            read_u32(&mut r)? as usize,
        ];
        let spacing = read_f64(&mut r)?;
        let origin = Vec3::new(read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?);
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or_else(|| Error::Format("voxel binary: dims overflow".into()))?;
        let mut samples = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let mut s = [0.0; 9];
            for v in &mut s {
                *v = read_f64(&mut r)?;
            }
            samples.push(s);
        }
        NumericGrid::new(dims, spacing, origin, samples)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(GRID_MAGIC)?;
        w.write_all(&1u32.to_le_bytes())?;
        for d in self.dims {
            let d = u32::try_from(d)
                .map_err(|_| Error::Format("voxel binary: dimension exceeds u32".into()))?;
            w.write_all(&d.to_le_bytes())?;
        }
        w.write_all(&self.spacing.to_le_bytes())?;
        for o in self.origin {
            w.write_all(&o.to_le_bytes())?;
        }
        for s in &self.samples {
            for v in s {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

const GRID_MAGIC: &[u8; 4] = b"QSVG";

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn parse_floats(line: &str, line_no: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|f| {
            f.trim().parse::<f64>().map_err(|e| {
                Error::Format(format!("voxel csv line {line_no}: `{}`: {e}", f.trim()))
            })
        })
        .collect()
}

fn to_dim(v: f64, line_no: usize) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as usize)
    } else {
        Err(Error::Format(format!(
            "voxel csv line {line_no}: bad dimension {v}"
        )))
    }
}

fn box_dims(lo: &Vec3, hi: &Vec3, spacing: f64) -> [usize; 3] {
    let n = |l: f64, h: f64| ((h - l) / spacing).ceil() as usize + 1;
    [n(lo.x, hi.x), n(lo.y, hi.y), n(lo.z, hi.z)]
}

fn mat_to_row_major(m: &Mat3) -> [f64; 9] {
    [
        m[(0, 0)],
        m[(0, 1)],
        m[(0, 2)],
        m[(1, 0)],
        m[(1, 1)],
        m[(1, 2)],
        m[(2, 0)],
        m[(2, 1)],
        m[(2, 2)],
    ]
}

/// `2 λ_ij cos(q·a)`.
pub fn ft_two_points(model: &TwoPointCenters, q: &Vec3) -> SusceptibilityFt {
    let c = 2.0 * q.dot(&model.separation()).cos();
    SusceptibilityFt::real(model.lambda.matrix() * c)
}

/// `4π λ_ij q⁻³ (sin qa − qa cos qa)`, by series for `qa < 1e-3`.
pub fn ft_sphere(model: &Sphere, q: &Vec3) -> SusceptibilityFt {
    let a = model.radius;
    let x = q.norm() * a;
    let shape = if x < SPHERE_SERIES_THRESHOLD {
        let x2 = x * x;
        1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0 - x2 * x2 * x2 / 45_360.0
            + x2 * x2 * x2 * x2 / 3_991_680.0
    } else {
        (x.sin() - x * x.cos()) / (x * x * x)
    };
    SusceptibilityFt::real(model.lambda.matrix() * (4.0 * PI * a * a * a * shape))
}

pub fn ft_numeric(model: &NumericGrid, q: &Vec3) -> SusceptibilityFt {
    model.ft(q)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScattererModel {
    TwoPoint(TwoPointCenters),
    Sphere(Sphere),
    NumericGrid(NumericGrid),
}

impl ScattererModel {
    pub fn ft(&self, q: &Vec3) -> SusceptibilityFt {
        match self {
            ScattererModel::TwoPoint(m) => ft_two_points(m, q),
            ScattererModel::Sphere(m) => ft_sphere(m, q),
            ScattererModel::NumericGrid(m) => ft_numeric(m, q),
        }
    }

    fn extent(&self) -> f64 {
        match self {
            ScattererModel::TwoPoint(m) => m.separation().norm(),
            ScattererModel::Sphere(m) => m.radius,
            ScattererModel::NumericGrid(m) => m.half_diagonal(),
        }
    }

    /// Rough ratio of scattered to incident field inside the object,
    /// `ω² max|ε̄_ij[0]| / (4π L)` with `L` the model's linear size. First-order
    /// Born results are only meaningful when this is small; no threshold is
    /// enforced.
    pub fn born_parameter(&self, omega: f64) -> f64 {
        let l = self.extent().max(f64::MIN_POSITIVE);
        omega * omega * self.ft(&Vec3::zeros()).max_abs() / (4.0 * PI * l)
    }
}

impl From<TwoPointCenters> for ScattererModel {
    fn from(m: TwoPointCenters) -> Self {
        ScattererModel::TwoPoint(m)
    }
}

impl From<Sphere> for ScattererModel {
    fn from(m: Sphere) -> Self {
        ScattererModel::Sphere(m)
    }
}

impl From<NumericGrid> for ScattererModel {
    fn from(m: NumericGrid) -> Self {
        ScattererModel::NumericGrid(m)
    }
}
