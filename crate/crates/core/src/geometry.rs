//! Flat pseudo-Euclidean background, seeded sample grids and a
//! finite-difference curvature oracle.
//!
//! The oracle works from a bare metric sampler `x ↦ g(x)` and knows nothing
//! about conformal factors, so it can be used to check the closed-form
//! curvature in [`crate::conformal`].

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{QemError, Result};

/// Default central-difference step in coordinate units.
pub const DEFAULT_FD_STEP: f64 = 1e-4;
/// Pivots below this magnitude make a metric matrix singular.
pub const PIVOT_FLOOR: f64 = 1e-12;
/// Default seed for sample grids.
pub const DEFAULT_SEED: u64 = 42;

/// Diagonal signature ε of the background metric `g_ij = δ_ij ε_i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct Signature(Vec<i8>);

impl Signature {
    pub fn new(eps: Vec<i8>) -> Result<Self> {
        if eps.len() < 2 {
            return Err(QemError::DimensionTooSmall(eps.len()));
        }
        if let Some((index, &value)) = eps.iter().enumerate().find(|(_, e)| e.abs() != 1) {
            return Err(QemError::InvalidSignatureEntry {
                index,
                value: value as f64,
            });
        }
        Ok(Self(eps))
    }

    /// Builds a signature from real entries, which must be exactly ±1.
    pub fn from_reals(eps: &[f64]) -> Result<Self> {
        let mut out = Vec::with_capacity(eps.len());
        for (index, &value) in eps.iter().enumerate() {
            if value == 1.0 {
                out.push(1);
            } else if value == -1.0 {
                out.push(-1);
            } else {
                return Err(QemError::InvalidSignatureEntry { index, value });
            }
        }
        Self::new(out)
    }

    pub fn euclidean(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    /// `(-, +, ..., +)`.
    pub fn lorentz(n: usize) -> Result<Self> {
        let mut eps = vec![1; n];
        if let Some(first) = eps.first_mut() {
            *first = -1;
        }
        Self::new(eps)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn eps(&self, k: usize) -> f64 {
        self.0[k] as f64
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    /// Flat inner product `Σ ε_k u_k v_k`.
    pub fn dot(&self, u: &[f64], v: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(u.iter().zip(v))
            .map(|(&e, (a, b))| e as f64 * a * b)
            .sum()
    }
}

impl TryFrom<Vec<i8>> for Signature {
    type Error = QemError;
    fn try_from(value: Vec<i8>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Signature> for Vec<i8> {
    fn from(value: Signature) -> Self {
        value.0
    }
}

/// The background metric `diag(ε)`.
pub fn flat_metric(sig: &Signature) -> DMatrix<f64> {
    DMatrix::from_fn(sig.dim(), sig.dim(), |i, j| if i == j { sig.eps(i) } else { 0.0 })
}

/// Axis-aligned closed box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub bounds: Vec<[f64; 2]>,
}

impl DomainBox {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.iter().any(|[lo, hi]| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(QemError::InvalidRegion("box bounds must satisfy lo <= hi".into()));
        }
        Ok(Self { bounds })
    }

    pub fn cube(n: usize, half_width: f64) -> Self {
        Self {
            bounds: vec![[-half_width, half_width]; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p
                .iter()
                .zip(&self.bounds)
                .all(|(x, [lo, hi])| *x >= *lo && *x <= *hi)
    }
}

/// Sampling region. Balls and shells are measured with the Euclidean norm of
/// the coordinates, independent of the signature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Region {
    Box { bounds: Vec<[f64; 2]> },
    Ball { center: Vec<f64>, radius: f64 },
    Shell { center: Vec<f64>, inner: f64, outer: f64 },
}

impl Region {
    pub fn unit_ball(n: usize) -> Self {
        Region::Ball {
            center: vec![0.0; n],
            radius: 1.0,
        }
    }

    /// Shell `r_min ≤ |x|² ≤ r_max` around the origin.
    pub fn squared_radius_shell(n: usize, r_min: f64, r_max: f64) -> Self {
        Region::Shell {
            center: vec![0.0; n],
            inner: r_min.max(0.0).sqrt(),
            outer: r_max.sqrt(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Box { bounds } => bounds.len(),
            Region::Ball { center, .. } | Region::Shell { center, .. } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Region::Box { bounds } => DomainBox::new(bounds.clone()).map(|_| ()),
            Region::Ball { radius, .. } if !(*radius > 0.0) => {
                Err(QemError::InvalidRegion("ball radius must be positive".into()))
            }
            Region::Shell { inner, outer, .. } if !(*inner >= 0.0 && outer > inner) => Err(
                QemError::InvalidRegion("shell needs 0 <= inner < outer".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn bounding_box(&self) -> DomainBox {
        match self {
            Region::Box { bounds } => DomainBox {
                bounds: bounds.clone(),
            },
            Region::Ball { center, radius } | Region::Shell { center, outer: radius, .. } => {
                DomainBox {
                    bounds: center.iter().map(|c| [c - radius, c + radius]).collect(),
                }
            }
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        if p.len() != self.dim() {
            return false;
        }
        match self {
            Region::Box { .. } => self.bounding_box().contains(p),
            Region::Ball { center, radius } => distance(p, center) <= *radius,
            Region::Shell {
                center,
                inner,
                outer,
            } => {
                let d = distance(p, center);
                d >= *inner && d <= *outer
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Region::Box { bounds } => bounds
                .iter()
                .map(|[lo, hi]| lo + (hi - lo) * rng.random::<f64>())
                .collect(),
            Region::Ball { center, radius } => sample_annulus(rng, center, 0.0, *radius),
            Region::Shell {
                center,
                inner,
                outer,
            } => sample_annulus(rng, center, *inner, *outer),
        }
    }
}

fn distance(p: &[f64], c: &[f64]) -> f64 {
    p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

// Uniform in volume: direction from a Gaussian, radius by inverse CDF.
fn sample_annulus(rng: &mut ChaCha8Rng, center: &[f64], inner: f64, outer: f64) -> Vec<f64> {
    let n = center.len();
    let dir: Vec<f64> = loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            break v.into_iter().map(|x| x / norm).collect();
        }
    };
    let nf = n as f64;
    let u: f64 = rng.random();
    let r = (inner.powf(nf) + u * (outer.powf(nf) - inner.powf(nf))).powf(1.0 / nf);
    // Clamp against rounding so the point stays inside the region.
    let r = r.clamp(inner, outer);
    dir.iter().zip(center).map(|(d, c)| c + r * d).collect()
}

/// Deterministic pseudo-random evaluation points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
    pub region: Region,
}

impl SampleGrid {
    /// Draws `count` points from `region`, keeping only those accepted by
    /// `accept`. The same seed, region and predicate give the same points.
    pub fn generate(
        region: &Region,
        count: usize,
        seed: u64,
        accept: impl Fn(&[f64]) -> bool,
    ) -> Result<Self> {
        region.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let max_attempts = count.saturating_mul(10_000).max(10_000);
        let mut points = Vec::with_capacity(count);
        let mut attempts = 0;
        while points.len() < count {
            if attempts >= max_attempts {
                return Err(QemError::GridExhausted {
                    attempts,
                    accepted: points.len(),
                    requested: count,
                });
            }
            attempts += 1;
            let p = region.sample(&mut rng);
            if region.contains(&p) && accept(&p) {
                points.push(p);
            }
        }
        Ok(Self {
            points,
            seed,
            region: region.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Inverts a small square matrix by LU with partial pivoting.
pub fn invert_metric(g: &DMatrix<f64>, p: &[f64]) -> Result<DMatrix<f64>> {
    let lu = g.clone().lu();
    let pivot = lu
        .u()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |acc, d| acc.min(d.abs()));
    if !(pivot >= PIVOT_FLOOR) {
        return Err(QemError::SingularMetric {
            point: p.to_vec(),
            pivot,
        });
    }
    lu.try_inverse().ok_or(QemError::SingularMetric {
        point: p.to_vec(),
        pivot,
    })
}

/// Christoffel symbols of the second kind, indexed `(k, i, j)` for `Γ^k_{ij}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    #[inline]
    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.data[(k * self.n + i) * self.n + j] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

fn shifted(p: &[f64], axis: usize, delta: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    q[axis] += delta;
    q
}

fn check_stencil(p: &[f64], step: f64, domain: Option<&DomainBox>) -> Result<()> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(QemError::InvalidStep { step });
    }
    if let Some(domain) = domain {
        if domain.dim() != p.len() {
            return Err(QemError::LengthMismatch {
                what: "domain box",
                expected: p.len(),
                got: domain.dim(),
            });
        }
        let inside = p
            .iter()
            .zip(&domain.bounds)
            .all(|(x, [lo, hi])| x - step >= *lo && x + step <= *hi);
        if !inside {
            return Err(QemError::InvalidStep { step });
        }
    }
    Ok(())
}

/// `Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})` with central
/// differences of width `step`.
pub fn fd_christoffel<M>(
    metric: &M,
    p: &[f64],
    step: f64,
    domain: Option<&DomainBox>,
) -> Result<Christoffel>
where
    M: Fn(&[f64]) -> DMatrix<f64>,
{
    check_stencil(p, step, domain)?;
    let n = p.len();
    let g = metric(p);
    if g.nrows() != n || g.ncols() != n {
        return Err(QemError::LengthMismatch {
            what: "metric matrix",
            expected: n,
            got: g.nrows(),
        });
    }
    let ginv = invert_metric(&g, p)?;
    let dg: Vec<DMatrix<f64>> = (0..n)
        .map(|l| (metric(&shifted(p, l, step)) - metric(&shifted(p, l, -step))) / (2.0 * step))
        .collect();

    let mut gamma = Christoffel::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                gamma.set(k, i, j, 0.5 * acc);
                gamma.set(k, j, i, 0.5 * acc);
            }
        }
    }
    Ok(gamma)
}

/// Ricci tensor `R_ij = ∂_k Γ^k_ij − ∂_j Γ^k_ik + Γ^k_kl Γ^l_ij − Γ^k_jl Γ^l_ik`
/// with the Γ derivatives taken by a second, nested central difference.
pub fn fd_ricci<M>(
    metric: &M,
    p: &[f64],
    step: f64,
    domain: Option<&DomainBox>,
) -> Result<DMatrix<f64>>
where
    M: Fn(&[f64]) -> DMatrix<f64>,
{
    check_stencil(p, step, domain)?;
    let n = p.len();
    let center = fd_christoffel(metric, p, step, domain)?;
    let mut dgamma = Vec::with_capacity(n);
    for axis in 0..n {
        let plus = fd_christoffel(metric, &shifted(p, axis, step), step, domain)?;
        let minus = fd_christoffel(metric, &shifted(p, axis, -step), step, domain)?;
        let mut d = Christoffel::zeros(n);
        for (slot, (a, b)) in d.data.iter_mut().zip(plus.data.iter().zip(&minus.data)) {
            *slot = (a - b) / (2.0 * step);
        }
        dgamma.push(d);
    }

    let mut ric = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += dgamma[k].get(k, i, j) - dgamma[j].get(k, i, k);
                for l in 0..n {
                    acc += center.get(k, k, l) * center.get(l, i, j)
                        - center.get(k, j, l) * center.get(l, i, k);
                }
            }
            ric[(i, j)] = acc;
        }
    }
    Ok(ric)
}

/// Central-difference gradient of a scalar field.
pub fn fd_gradient<F>(f: &F, p: &[f64], step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    (0..p.len())
        .map(|k| (f(&shifted(p, k, step)) - f(&shifted(p, k, -step))) / (2.0 * step))
        .collect()
}

/// Central-difference Hessian (nested first differences).
pub fn fd_hessian<F>(f: &F, p: &[f64], step: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let n = p.len();
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                (f(&shifted(p, i, step)) - 2.0 * f(p) + f(&shifted(p, i, -step))) / (step * step)
            } else {
                let pp = shifted(&shifted(p, i, step), j, step);
                let pm = shifted(&shifted(p, i, step), j, -step);
                let mp = shifted(&shifted(p, i, -step), j, step);
                let mm = shifted(&shifted(p, i, -step), j, -step);
                (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * step * step)
            };
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}
