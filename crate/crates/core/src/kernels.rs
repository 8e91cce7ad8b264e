//! Kernel families, Gram assembly and sup-bounds.
//!
//! Every kernel carries the axis-aligned box it is defined on. Evaluation
//! outside the box is an error, which keeps partition-local kernels honest
//! about their support.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::Points;

/// Axis-aligned box `[lo_1, hi_1] × … × [lo_d, hi_d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Deserialize)]
struct RawBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<RawBox> for BoxDomain {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        BoxDomain::new(raw.lo, raw.hi)
    }
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::contract(
                "box bounds must be nonempty and of equal length",
            ));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(Error::contract(format!("degenerate box [{lo:?}, {hi:?}]")));
        }
        Ok(Self { lo, hi })
    }

    /// `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self {
            lo: vec![0.0; dim.max(1)],
            hi: vec![1.0; dim.max(1)],
        }
    }

    /// The interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn is_within(&self, outer: &BoxDomain) -> bool {
        self.dim() == outer.dim()
            && self
                .lo
                .iter()
                .zip(&self.hi)
                .zip(outer.lo.iter().zip(&outer.hi))
                .all(|((a, b), (oa, ob))| oa <= a && b <= ob)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::DomainViolation {
                point: x.to_vec(),
                lo: self.lo.clone(),
                hi: self.hi.clone(),
            })
        }
    }
}

/// Kernel families with closed-form sup-bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(-|x - x'|² / (2h²))`
    Gaussian { bandwidth: f64 },
    /// `exp(-|x - x'| / h)`
    Laplacian { bandwidth: f64 },
    /// `Π_d min(x_d - lo_d, x'_d - lo_d)`, anchored at the lower corner of
    /// the domain. On `[0, 1]` this is the plain min-kernel.
    Brownian,
    /// `(⟨x, x'⟩ + c)^degree`
    Polynomial { degree: u32, offset: f64 },
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    /// Parses `gaussian:H`, `laplacian:H`, `brownian` or `polynomial:D:C`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::contract(format!("kernel '{s}' is missing a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::contract(format!("kernel '{s}': {e}")))
        };
        match parts[0] {
            "gaussian" => Ok(KernelFamily::Gaussian { bandwidth: num(1)? }),
            "laplacian" => Ok(KernelFamily::Laplacian { bandwidth: num(1)? }),
            "brownian" => Ok(KernelFamily::Brownian),
            "polynomial" => {
                let degree = num(1)?;
                if degree.fract() != 0.0 || degree < 1.0 {
                    return Err(Error::contract(
                        "polynomial degree must be a positive integer",
                    ));
                }
                Ok(KernelFamily::Polynomial {
                    degree: degree as u32,
                    offset: num(2)?,
                })
            }
            other => Err(Error::contract(format!("unknown kernel family '{other}'"))),
        }
    }
}

/// A kernel family together with the box it is defined on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec")]
pub struct KernelSpec {
    #[serde(flatten)]
    family: KernelFamily,
    domain: BoxDomain,
}

#[derive(Deserialize)]
struct RawKernelSpec {
    #[serde(flatten)]
    family: KernelFamily,
    domain: BoxDomain,
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = Error;

    fn try_from(raw: RawKernelSpec) -> Result<Self> {
        KernelSpec::new(raw.family, raw.domain)
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, domain: BoxDomain) -> Result<Self> {
        match &family {
            KernelFamily::Gaussian { bandwidth } | KernelFamily::Laplacian { bandwidth } => {
                if !(bandwidth.is_finite() && *bandwidth > 0.0) {
                    return Err(Error::contract(format!(
                        "bandwidth must be positive, got {bandwidth}"
                    )));
                }
            }
            KernelFamily::Brownian => {
                if !domain.is_within(&BoxDomain::unit(domain.dim())) {
                    return Err(Error::contract(
                        "brownian kernel requires a domain inside [0, 1]^d",
                    ));
                }
            }
            KernelFamily::Polynomial { degree, offset } => {
                if *degree < 1 || !(offset.is_finite() && *offset >= 0.0) {
                    return Err(Error::contract(
                        "polynomial kernel needs degree ≥ 1 and offset ≥ 0",
                    ));
                }
            }
        }
        Ok(Self { family, domain })
    }

    pub fn gaussian(bandwidth: f64, domain: BoxDomain) -> Result<Self> {
        Self::new(KernelFamily::Gaussian { bandwidth }, domain)
    }

    pub fn laplacian(bandwidth: f64, domain: BoxDomain) -> Result<Self> {
        Self::new(KernelFamily::Laplacian { bandwidth }, domain)
    }

    /// Min-kernel on `[0, 1]`.
    pub fn brownian() -> Self {
        Self {
            family: KernelFamily::Brownian,
            domain: BoxDomain::unit(1),
        }
    }

    pub fn polynomial(degree: u32, offset: f64, domain: BoxDomain) -> Result<Self> {
        Self::new(KernelFamily::Polynomial { degree, offset }, domain)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Same family on another box.
    pub fn with_domain(&self, domain: BoxDomain) -> Result<Self> {
        Self::new(self.family.clone(), domain)
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        self.domain.check(x)
    }

    pub fn check_points(&self, xs: &Points) -> Result<()> {
        if xs.dim() != self.domain.dim() {
            return Err(Error::contract(format!(
                "points of dimension {} for a {}-dimensional kernel",
                xs.dim(),
                self.domain.dim()
            )));
        }
        xs.iter().try_for_each(|x| self.check_point(x))
    }

    /// `K(x, x')`, with both arguments checked against the domain.
    pub fn eval(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(x_prime)?;
        Ok(self.eval_unchecked(x, x_prime))
    }

    /// `K(x, x')` for points already known to lie in the domain.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], x_prime: &[f64]) -> f64 {
        match &self.family {
            KernelFamily::Gaussian { bandwidth } => {
                let sq: f64 = x.iter().zip(x_prime).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelFamily::Laplacian { bandwidth } => {
                let sq: f64 = x.iter().zip(x_prime).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq.sqrt() / bandwidth).exp()
            }
            KernelFamily::Brownian => x
                .iter()
                .zip(x_prime)
                .zip(&self.domain.lo)
                .map(|((a, b), lo)| (a - lo).min(b - lo))
                .product(),
            KernelFamily::Polynomial { degree, offset } => {
                let dot: f64 = x.iter().zip(x_prime).map(|(a, b)| a * b).sum();
                (dot + offset).powi(*degree as i32)
            }
        }
    }

    /// `κ² = sup_{x,x'} |K(x, x')|` over the domain.
    pub fn bound(&self) -> f64 {
        match &self.family {
            KernelFamily::Gaussian { .. } | KernelFamily::Laplacian { .. } => 1.0,
            KernelFamily::Brownian => self.domain.volume(),
            KernelFamily::Polynomial { degree, offset } => {
                // ⟨x, x'⟩ is bilinear, so its extremes over the box sit at
                // vertex pairs and separate across coordinates.
                let (mut max_dot, mut min_dot) = (0.0, 0.0);
                for (a, b) in self.domain.lo.iter().zip(&self.domain.hi) {
                    let products = [a * a, a * b, b * b];
                    max_dot += products.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    min_dot += products.iter().cloned().fold(f64::INFINITY, f64::min);
                }
                let base = (max_dot + offset).abs().max((min_dot + offset).abs());
                base.powi(*degree as i32)
            }
        }
    }
}

pub fn eval_kernel(spec: &KernelSpec, x: &[f64], x_prime: &[f64]) -> Result<f64> {
    spec.eval(x, x_prime)
}

pub fn kernel_bound(spec: &KernelSpec) -> f64 {
    spec.bound()
}

/// Symmetric kernel matrix of a point set.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    entries: Mat<f64>,
}

impl GramMatrix {
    /// Wraps an exactly symmetric square matrix.
    pub fn from_entries(entries: Mat<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::contract("a Gram matrix must be square and nonempty"));
        }
        for j in 0..n {
            for i in 0..j {
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(Error::NotSymmetric {
                        asymmetry: (entries[(i, j)] - entries[(j, i)]).abs(),
                    });
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &Mat<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> Mat<f64> {
        self.entries
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.size())
            .map(|i| self.entries[(i, i)])
            .fold(0.0, f64::max)
    }

    /// Eigenvalue floor `-1e-8 · max diagonal` below which the matrix is not
    /// considered positive semi-definite.
    pub fn psd_tolerance(&self) -> f64 {
        1e-8 * self.max_diagonal()
    }
}

/// Gram matrix of `xs`. The upper triangle is evaluated and mirrored.
pub fn gram(spec: &KernelSpec, xs: &Points) -> Result<GramMatrix> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("gram: no points"));
    }
    spec.check_points(xs)?;
    Ok(GramMatrix {
        entries: gram_unchecked(spec, xs),
    })
}

pub(crate) fn gram_unchecked(spec: &KernelSpec, xs: &Points) -> Mat<f64> {
    let n = xs.len();
    let mut k = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        let xj = xs.point(j);
        for i in 0..=j {
            k[(i, j)] = spec.eval_unchecked(xs.point(i), xj);
        }
    }
    for j in 0..n {
        for i in (j + 1)..n {
            k[(i, j)] = k[(j, i)];
        }
    }
    k
}

/// `|X| × |Z|` matrix with entries `K(x_i, z_j)`.
pub fn cross_gram(spec: &KernelSpec, xs: &Points, zs: &Points) -> Result<Mat<f64>> {
    if xs.is_empty() || zs.is_empty() {
        return Err(Error::EmptyInput("cross_gram: no points"));
    }
    spec.check_points(xs)?;
    spec.check_points(zs)?;
    Ok(cross_gram_unchecked(spec, xs, zs))
}

pub(crate) fn cross_gram_unchecked(spec: &KernelSpec, xs: &Points, zs: &Points) -> Mat<f64> {
    Mat::from_fn(xs.len(), zs.len(), |i, j| {
        spec.eval_unchecked(xs.point(i), zs.point(j))
    })
}
