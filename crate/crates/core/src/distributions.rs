//! Synthetic heavy-tailed distributions with exactly known ground truth.
//!
//! Every family is built as `X = mu + T W` with `W` spherically symmetric
//! and of identity covariance, so `Cov(X) = T T^T` and the directional
//! standard deviation is `||T^T u||`. The contaminated family replaces an
//! exact `floor(fraction * N)` rows by the point `mean + offset`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::matrix::{canonical, check_unit, dot, random_unit, Dataset, Matrix, Provenance};
use crate::numeric::compensated_sum;
use crate::rng;

/// Rows generated per independent random stream.
const ROW_BLOCK: usize = 1024;

/// Covariance eigenvalues (nonincreasing) and an optional random rotation
/// of the eigenbasis. `rotation_seed = None` keeps the canonical basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_seed: Option<u64>,
}

impl SpectrumSpec {
    pub fn identity(d: usize) -> Self {
        SpectrumSpec {
            eigenvalues: vec![1.0; d],
            rotation_seed: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.eigenvalues.is_empty() {
            return Err(Error::invalid("spectrum must have at least one eigenvalue"));
        }
        if self.eigenvalues.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::invalid("eigenvalues must be finite and nonnegative"));
        }
        if self.eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("eigenvalues must be nonincreasing"));
        }
        Ok(())
    }

    /// `sum_{i > k} lambda_i` (1-based `i`).
    pub fn tail_sum(&self, k: usize) -> f64 {
        compensated_sum(self.eigenvalues.iter().skip(k).copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contamination {
    pub fraction: f64,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Gaussian,
    /// Multivariate Student t with `dof > 2`, rescaled to identity covariance.
    EllipticalStudent {
        dof: f64,
    },
    /// Gaussian scale mixture `G * exp(shape * xi - shape^2)`, unit covariance.
    EllipticalLognormal {
        shape: f64,
    },
    ContaminatedGaussian {
        contamination: Contamination,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::EllipticalStudent { .. } => "elliptical-student",
            Family::EllipticalLognormal { .. } => "elliptical-lognormal",
            Family::ContaminatedGaussian { .. } => "contaminated-gaussian",
        }
    }
}

/// JSON-facing description of a synthetic distribution.
///
/// ```json
/// {"family": "elliptical-student", "dof": 3, "eigenvalues": [1, 1],
///  "rotation_seed": 5, "mean": [0, 0]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(flatten)]
    pub spectrum: SpectrumSpec,
    /// Defaults to the origin. For the contaminated family this is the
    /// center of the clean component.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    /// Moment order used for the norm-equivalence constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_moment: Option<f64>,
}

impl DistributionSpec {
    pub fn gaussian(eigenvalues: Vec<f64>) -> Self {
        DistributionSpec {
            family: Family::Gaussian,
            spectrum: SpectrumSpec {
                eigenvalues,
                rotation_seed: None,
            },
            mean: None,
            q_moment: None,
        }
    }

    pub fn student(dof: f64, eigenvalues: Vec<f64>) -> Self {
        DistributionSpec {
            family: Family::EllipticalStudent { dof },
            ..Self::gaussian(eigenvalues)
        }
    }

    pub fn with_mean(mut self, mean: Vec<f64>) -> Self {
        self.mean = Some(mean);
        self
    }

    pub fn with_rotation(mut self, seed: u64) -> Self {
        self.spectrum.rotation_seed = Some(seed);
        self
    }

    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("distribution spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

/// Exact population quantities of a [`DistributionSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: DistributionSpec,
    /// `E X`.
    pub mu: Vec<f64>,
    /// `Cov X`.
    pub covariance: Matrix,
    /// Sampling factor of the (clean) elliptical component; equals a square
    /// root of `covariance` for every family except contamination.
    pub factor: Matrix,
    factor_diagonal: bool,
    /// Eigenvalues of `covariance`, nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// Norm-equivalence constant for `q_moment` (supremum over a probe set
    /// for the contaminated family, where it depends on the direction).
    pub kappa: f64,
    pub q_moment: f64,
    center: Vec<f64>,
}

pub fn make_ground_truth(spec: &DistributionSpec) -> Result<GroundTruth> {
    spec.spectrum.validate()?;
    let d = spec.dim();
    let center = match &spec.mean {
        Some(m) if m.len() != d => {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: m.len(),
            })
        }
        Some(m) if m.iter().any(|v| !v.is_finite()) => return Err(Error::invalid("mean must be finite")),
        Some(m) => m.clone(),
        None => vec![0.0; d],
    };

    let (factor, factor_diagonal) = build_factor(&spec.spectrum);
    let clean_cov = gram(&factor);

    let q_override = spec.q_moment;
    if let Some(q) = q_override {
        if !(q > 2.0 && q.is_finite()) {
            return Err(Error::invalid(format!("q_moment must exceed 2, got {q}")));
        }
    }

    let gt = match &spec.family {
        Family::Gaussian => {
            let q = q_override.unwrap_or(4.0);
            GroundTruth {
                spec: spec.clone(),
                mu: center.clone(),
                covariance: clean_cov,
                factor,
                factor_diagonal,
                eigenvalues: spec.spectrum.eigenvalues.clone(),
                kappa: gaussian_abs_moment(q).powf(1.0 / q),
                q_moment: q,
                center,
            }
        }
        Family::EllipticalStudent { dof } => {
            let nu = *dof;
            if !(nu > 2.0 && nu.is_finite()) {
                return Err(Error::invalid(format!(
                    "student dof must exceed 2 for a finite covariance, got {nu}"
                )));
            }
            let q = q_override.unwrap_or_else(|| (1.0 + nu / 2.0).min(4.0));
            if q >= nu {
                return Err(Error::invalid(format!("q_moment {q} must be below the dof {nu}")));
            }
            let kappa = student_abs_moment(nu, q).powf(1.0 / q) * ((nu - 2.0) / nu).sqrt();
            GroundTruth {
                spec: spec.clone(),
                mu: center.clone(),
                covariance: clean_cov,
                factor,
                factor_diagonal,
                eigenvalues: spec.spectrum.eigenvalues.clone(),
                kappa,
                q_moment: q,
                center,
            }
        }
        Family::EllipticalLognormal { shape } => {
            let s = *shape;
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("lognormal shape must be >= 0, got {s}")));
            }
            let q = q_override.unwrap_or(4.0);
            // E V^q for V = exp(s xi - s^2).
            let scale_moment = (0.5 * q * q * s * s - q * s * s).exp();
            GroundTruth {
                spec: spec.clone(),
                mu: center.clone(),
                covariance: clean_cov,
                factor,
                factor_diagonal,
                eigenvalues: spec.spectrum.eigenvalues.clone(),
                kappa: (gaussian_abs_moment(q) * scale_moment).powf(1.0 / q),
                q_moment: q,
                center,
            }
        }
        Family::ContaminatedGaussian { contamination } => {
            let f = contamination.fraction;
            if !(0.0..0.5).contains(&f) {
                return Err(Error::invalid(format!(
                    "contamination fraction must lie in [0, 1/2), got {f}"
                )));
            }
            if contamination.offset.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: contamination.offset.len(),
                });
            }
            if q_override.is_some_and(|q| q != 4.0) {
                return Err(Error::invalid("contaminated family supports q_moment = 4 only"));
            }
            let o = &contamination.offset;
            let mu: Vec<f64> = center.iter().zip(o).map(|(c, oi)| c + f * oi).collect();
            let mut cov = clean_cov.clone();
            for a in 0..d {
                for b in 0..d {
                    let v = (1.0 - f) * clean_cov.row(a)[b] + f * (1.0 - f) * o[a] * o[b];
                    cov.row_mut(a)[b] = v;
                }
            }
            let eigenvalues = sorted_eigenvalues(&cov);
            let mut gt = GroundTruth {
                spec: spec.clone(),
                mu,
                covariance: cov,
                factor,
                factor_diagonal,
                eigenvalues,
                kappa: 1.0,
                q_moment: 4.0,
                center,
            };
            gt.kappa = contaminated_kappa_sup(&gt);
            gt
        }
    };
    Ok(gt)
}

fn build_factor(spectrum: &SpectrumSpec) -> (Matrix, bool) {
    let d = spectrum.dim();
    let roots: Vec<f64> = spectrum.eigenvalues.iter().map(|l| l.sqrt()).collect();
    let mut t = Matrix::zeros(d, d);
    match spectrum.rotation_seed {
        None => {
            for (k, r) in roots.iter().enumerate() {
                t.row_mut(k)[k] = *r;
            }
            (t, true)
        }
        Some(seed) => {
            let q = random_orthogonal(d, seed);
            for a in 0..d {
                for b in 0..d {
                    t.row_mut(a)[b] = q[(a, b)] * roots[b];
                }
            }
            (t, false)
        }
    }
}

/// Haar-distributed orthogonal matrix from the QR factorization of a
/// Gaussian matrix, with the sign convention `diag(R) > 0`.
fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::stream(seed, "rotation", 0);
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| r.sample(StandardNormal));
    let qr = g.qr();
    let (mut q, rmat) = (qr.q(), qr.r());
    for k in 0..d {
        if rmat[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

fn gram(t: &Matrix) -> Matrix {
    let d = t.rows();
    let mut s = Matrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = dot(t.row(a), t.row(b));
            s.row_mut(a)[b] = v;
            s.row_mut(b)[a] = v;
        }
    }
    s
}

fn sorted_eigenvalues(cov: &Matrix) -> Vec<f64> {
    let d = cov.rows();
    let m = DMatrix::<f64>::from_row_slice(d, d, cov.as_slice());
    let mut ev: Vec<f64> = SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0))
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// `E|g|^q` for a standard normal `g`.
pub fn gaussian_abs_moment(q: f64) -> f64 {
    (0.5 * q * std::f64::consts::LN_2 + ln_gamma(0.5 * (q + 1.0))).exp() / std::f64::consts::PI.sqrt()
}

/// `E|t|^q` for a standard Student t with `nu` degrees of freedom, by
/// quadrature of `2 x^q f(x)` over `x = e^y`. Requires `q < nu`.
pub fn student_abs_moment(nu: f64, q: f64) -> f64 {
    assert!(q < nu && q >= 0.0);
    let log_norm = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln();
    let log_density = |y: f64| -> f64 {
        let x2_over_nu_ln = 2.0 * y - nu.ln();
        let l1p = if x2_over_nu_ln > 0.0 {
            x2_over_nu_ln + (-x2_over_nu_ln).exp().ln_1p()
        } else {
            x2_over_nu_ln.exp().ln_1p()
        };
        log_norm - 0.5 * (nu + 1.0) * l1p
    };
    let integrand = |y: f64| 2.0 * ((q + 1.0) * y + log_density(y)).exp();

    // Beyond y_hi the integrand is C e^{(q - nu) y} to high relative accuracy;
    // that remainder is added in closed form.
    let decay = nu - q;
    let y_lo = -40.0 / (q + 1.0).max(1.0) - 10.0;
    let y_hi = (0.5 * nu.ln() + 20.0)
        .max(40.0 / decay.max(0.1))
        .min(700.0 / (q + 1.0));
    let steps = (((y_hi - y_lo) / 0.004).ceil() as usize + 1) & !1;
    let h = (y_hi - y_lo) / steps as f64;
    let mut acc = crate::numeric::CompensatedSum::default();
    for i in 0..=steps {
        let w = if i == 0 || i == steps {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc.add(w * integrand(y_lo + i as f64 * h));
    }
    let body = acc.value() * h / 3.0;
    body + integrand(y_hi) / decay
}

fn contaminated_kappa_sup(gt: &GroundTruth) -> f64 {
    let d = gt.mu.len();
    let mut r = rng::stream(0, "kappa-probe", 0);
    let mut dirs: Vec<Vec<f64>> = (0..d).map(|k| canonical(d, k)).collect();
    dirs.extend((0..64).map(|_| random_unit(&mut r, d)));
    dirs.iter()
        .filter_map(|u| contaminated_kappa(gt, u))
        .fold(1.0_f64, f64::max)
}

/// `(E Y^4)^{1/4} / (E Y^2)^{1/2}` for `Y = <X - mu, u>` under contamination.
fn contaminated_kappa(gt: &GroundTruth, u: &[f64]) -> Option<f64> {
    let Family::ContaminatedGaussian { contamination } = &gt.spec.family else {
        return None;
    };
    let f = contamination.fraction;
    let ou = dot(&contamination.offset, u);
    let s2 = clean_sigma2(gt, u);
    let a0 = -f * ou;
    let a1 = (1.0 - f) * ou;
    let m2 = (1.0 - f) * (a0 * a0 + s2) + f * a1 * a1;
    let m4 = (1.0 - f) * (a0.powi(4) + 6.0 * a0 * a0 * s2 + 3.0 * s2 * s2) + f * a1.powi(4);
    (m2 > 0.0).then(|| m4.powf(0.25) / m2.sqrt())
}

fn clean_sigma2(gt: &GroundTruth, u: &[f64]) -> f64 {
    let d = u.len();
    (0..d)
        .map(|b| {
            let c: f64 = (0..d).map(|a| gt.factor.row(a)[b] * u[a]).sum();
            c * c
        })
        .sum()
}

impl GroundTruth {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn family(&self) -> &Family {
        &self.spec.family
    }

    /// `T W` added to the clean center.
    fn fill_row<R: Rng + ?Sized>(&self, r: &mut R, w: &mut [f64], out: &mut [f64]) {
        let d = self.dim();
        for x in w.iter_mut() {
            *x = r.sample(StandardNormal);
        }
        let radial = match &self.spec.family {
            Family::Gaussian | Family::ContaminatedGaussian { .. } => 1.0,
            Family::EllipticalStudent { dof } => {
                let chi2: f64 = ChiSquared::new(*dof).expect("dof validated").sample(r);
                ((dof - 2.0) / chi2).sqrt()
            }
            Family::EllipticalLognormal { shape } => {
                let xi: f64 = r.sample(StandardNormal);
                (shape * xi - shape * shape).exp()
            }
        };
        if self.factor_diagonal {
            for k in 0..d {
                out[k] = self.center[k] + self.factor.row(k)[k] * w[k] * radial;
            }
        } else {
            for (k, o) in out.iter_mut().enumerate() {
                *o = self.center[k] + radial * dot(self.factor.row(k), w);
            }
        }
    }

    /// One exact draw of the scalar `<X - mu, u>`.
    pub fn sample_marginal<R: Rng + ?Sized>(&self, u: &[f64], r: &mut R) -> f64 {
        let g: f64 = r.sample(StandardNormal);
        match &self.spec.family {
            Family::Gaussian => directional_sigma_unchecked(self, u) * g,
            Family::EllipticalStudent { dof } => {
                let chi2: f64 = ChiSquared::new(*dof).expect("dof validated").sample(r);
                directional_sigma_unchecked(self, u) * ((dof - 2.0) / chi2).sqrt() * g
            }
            Family::EllipticalLognormal { shape } => {
                let xi: f64 = r.sample(StandardNormal);
                directional_sigma_unchecked(self, u) * g * (shape * xi - shape * shape).exp()
            }
            Family::ContaminatedGaussian { contamination } => {
                let f = contamination.fraction;
                let ou = dot(&contamination.offset, u);
                if r.random::<f64>() < f {
                    (1.0 - f) * ou
                } else {
                    -f * ou + clean_sigma2(self, u).sqrt() * g
                }
            }
        }
    }

    /// Law of `<X - mu, u>` when it has a closed-form CDF.
    pub fn marginal_law(&self, u: &[f64]) -> Result<MarginalLaw> {
        check_unit(u)?;
        let sigma = directional_sigma_unchecked(self, u);
        match &self.spec.family {
            Family::Gaussian => Ok(MarginalLaw::Normal { sd: sigma }),
            Family::EllipticalStudent { dof } => Ok(MarginalLaw::Student {
                scale: sigma * ((dof - 2.0) / dof).sqrt(),
                dof: *dof,
            }),
            other => Err(Error::NoAnalyticOracle(other.name().to_string())),
        }
    }
}

fn directional_sigma_unchecked(gt: &GroundTruth, u: &[f64]) -> f64 {
    let d = u.len();
    let mut q = 0.0;
    for a in 0..d {
        q += u[a] * dot(gt.covariance.row(a), u);
    }
    q.max(0.0).sqrt()
}

/// `sqrt(u^T Sigma u)`.
pub fn directional_sigma(gt: &GroundTruth, u: &[f64]) -> Result<f64> {
    if u.len() != gt.dim() {
        return Err(Error::DimensionMismatch {
            expected: gt.dim(),
            got: u.len(),
        });
    }
    check_unit(u)?;
    Ok(directional_sigma_unchecked(gt, u))
}

/// `sum_{i > k} lambda_i`; `k = 0` is the trace, `k = d` is zero.
pub fn tail_eigensum(gt: &GroundTruth, k: usize) -> Result<f64> {
    if k > gt.eigenvalues.len() {
        return Err(Error::invalid(format!(
            "tail index {k} exceeds dimension {}",
            gt.eigenvalues.len()
        )));
    }
    Ok(compensated_sum(gt.eigenvalues.iter().skip(k).copied()))
}

/// `P{<X - mu, u> > t}` from the closed-form marginal CDF.
pub fn marginal_tail_prob(gt: &GroundTruth, u: &[f64], t: f64) -> Result<f64> {
    Ok(gt.marginal_law(u)?.sf(t))
}

/// Centered one-dimensional law with a closed-form CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginalLaw {
    Normal {
        sd: f64,
    },
    /// `scale * t_dof`.
    Student {
        scale: f64,
        dof: f64,
    },
}

impl MarginalLaw {
    fn scale(&self) -> f64 {
        match *self {
            MarginalLaw::Normal { sd } => sd,
            MarginalLaw::Student { scale, .. } => scale,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if self.scale() == 0.0 {
            return if x >= 0.0 { 1.0 } else { 0.0 };
        }
        match *self {
            MarginalLaw::Normal { sd } => Normal::new(0.0, sd).expect("sd > 0").cdf(x),
            MarginalLaw::Student { scale, dof } => StudentsT::new(0.0, scale, dof).expect("valid t").cdf(x),
        }
    }

    /// `P{Z > x}`, accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        if self.scale() == 0.0 {
            return if x < 0.0 { 1.0 } else { 0.0 };
        }
        match *self {
            MarginalLaw::Normal { sd } => Normal::new(0.0, sd).expect("sd > 0").sf(x),
            MarginalLaw::Student { scale, dof } => StudentsT::new(0.0, scale, dof).expect("valid t").sf(x),
        }
    }

    /// `Q_p` with `P{Z <= Q_p} = p`.
    pub fn quantile(&self, p: f64) -> f64 {
        if self.scale() == 0.0 {
            return 0.0;
        }
        match *self {
            MarginalLaw::Normal { sd } => Normal::new(0.0, sd).expect("sd > 0").inverse_cdf(p),
            MarginalLaw::Student { scale, dof } => {
                StudentsT::new(0.0, scale, dof).expect("valid t").inverse_cdf(p)
            }
        }
    }

    /// Law of `Z` scaled by `c > 0`.
    pub fn scaled(&self, c: f64) -> MarginalLaw {
        match *self {
            MarginalLaw::Normal { sd } => MarginalLaw::Normal { sd: sd * c },
            MarginalLaw::Student { scale, dof } => MarginalLaw::Student {
                scale: scale * c,
                dof,
            },
        }
    }
}

/// Draws `n` rows. A pure function of `(gt, n, seed)`; rows are generated in
/// fixed-size blocks with one stream per block, so the output does not
/// depend on the thread count.
pub fn sample_dataset(gt: &GroundTruth, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let d = gt.dim();
    let mut data = vec![0.0; n * d];
    data.par_chunks_mut(ROW_BLOCK * d)
        .enumerate()
        .for_each(|(b, chunk)| {
            let mut r = rng::stream(seed, "rows", b as u64);
            let mut w = vec![0.0; d];
            for row in chunk.chunks_exact_mut(d) {
                gt.fill_row(&mut r, &mut w, row);
            }
        });
    if let Family::ContaminatedGaussian { contamination } = &gt.spec.family {
        let count = (contamination.fraction * n as f64).floor() as usize;
        let mut r = rng::stream(seed, "contamination", 0);
        let point: Vec<f64> = gt
            .center
            .iter()
            .zip(&contamination.offset)
            .map(|(c, o)| c + o)
            .collect();
        for i in index::sample(&mut r, n, count).into_iter() {
            data[i * d..(i + 1) * d].copy_from_slice(&point);
        }
    }
    Ok(Dataset {
        x: Matrix::from_vec(n, d, data)?,
        provenance: Provenance {
            seed: Some(seed),
            spec: Some(gt.spec.clone()),
            source: None,
        },
    })
}

/// Adds i.i.d. `Uniform(-scale, scale)` noise to every entry; `scale = 0`
/// returns an exact copy.
pub fn jitter(x: &Matrix, scale: f64, seed: u64) -> Result<Matrix> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("jitter scale must be >= 0, got {scale}")));
    }
    let mut out = x.clone();
    if scale == 0.0 {
        return Ok(out);
    }
    let d = x.cols().max(1);
    out.as_mut_slice()
        .par_chunks_mut(ROW_BLOCK * d)
        .enumerate()
        .for_each(|(b, chunk)| {
            let mut r = rng::stream(seed, "jitter", b as u64);
            for v in chunk {
                *v += scale * (2.0 * r.random::<f64>() - 1.0);
            }
        });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(l: &[f64]) -> GroundTruth {
        make_ground_truth(&DistributionSpec::gaussian(l.to_vec())).unwrap()
    }

    #[test]
    fn identity_gaussian() {
        let gt = diag(&[1.0, 1.0]);
        assert_eq!(
            gt.covariance,
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
        );
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((directional_sigma(&gt, &[s, s]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_kappa_q4() {
        let gt = diag(&[1.0]);
        assert_eq!(gt.q_moment, 4.0);
        assert!((gt.kappa - 3f64.powf(0.25)).abs() < 1e-12);
        assert!((gt.kappa - 1.3161).abs() < 1e-4);
    }

    #[test]
    fn directional_sigma_examples() {
        let gt = diag(&[4.0, 1.0]);
        assert_eq!(directional_sigma(&gt, &[1.0, 0.0]).unwrap(), 2.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((directional_sigma(&gt, &[s, s]).unwrap() - 2.5f64.sqrt()).abs() < 1e-14);
        assert!(matches!(
            directional_sigma(&gt, &[1.0, 1.0]),
            Err(Error::NonUnitDirection { .. })
        ));
    }

    #[test]
    fn tail_eigensum_examples() {
        let gt = diag(&[4.0, 1.0, 1.0]);
        assert_eq!(tail_eigensum(&gt, 1).unwrap(), 2.0);
        assert_eq!(tail_eigensum(&gt, 0).unwrap(), 6.0);
        assert_eq!(tail_eigensum(&gt, 3).unwrap(), 0.0);
        assert!(tail_eigensum(&gt, 4).is_err());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(make_ground_truth(&DistributionSpec::student(2.0, vec![1.0])).is_err());
        assert!(make_ground_truth(&DistributionSpec::gaussian(vec![1.0, 2.0])).is_err());
        assert!(make_ground_truth(&DistributionSpec::gaussian(vec![])).is_err());
        let bad = DistributionSpec {
            family: Family::ContaminatedGaussian {
                contamination: Contamination {
                    fraction: 0.5,
                    offset: vec![1.0],
                },
            },
            ..DistributionSpec::gaussian(vec![1.0])
        };
        assert!(make_ground_truth(&bad).is_err());
    }

    #[test]
    fn rotation_preserves_spectrum() {
        let spec = DistributionSpec::gaussian(vec![5.0, 2.0, 1.0, 0.5]).with_rotation(11);
        let gt = make_ground_truth(&spec).unwrap();
        let ev = sorted_eigenvalues(&gt.covariance);
        for (a, b) in ev.iter().zip(&spec.spectrum.eigenvalues) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let tr: f64 = (0..4).map(|k| gt.covariance.row(k)[k]).sum();
        assert!((tr - 8.5).abs() < 1e-12);
    }

    #[test]
    fn tail_probabilities() {
        let gt = diag(&[1.0, 1.0]);
        let e1 = [1.0, 0.0];
        assert_eq!(marginal_tail_prob(&gt, &e1, 0.0).unwrap(), 0.5);
        assert!((marginal_tail_prob(&gt, &e1, 1.959964).unwrap() - 0.025).abs() < 1e-7);
        let st = make_ground_truth(&DistributionSpec::student(3.0, vec![1.0, 1.0])).unwrap();
        assert!((marginal_tail_prob(&st, &e1, 0.0).unwrap() - 0.5).abs() < 1e-12);
        let ln = make_ground_truth(&DistributionSpec {
            family: Family::EllipticalLognormal { shape: 0.5 },
            ..DistributionSpec::gaussian(vec![1.0])
        })
        .unwrap();
        assert!(matches!(
            marginal_tail_prob(&ln, &[1.0], 0.0),
            Err(Error::NoAnalyticOracle(_))
        ));
    }

    #[test]
    fn tail_complement_identity_on_grid() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for spec in [
            DistributionSpec::gaussian(vec![4.0, 1.0]),
            DistributionSpec::student(3.0, vec![4.0, 1.0]).with_rotation(3),
        ] {
            let gt = make_ground_truth(&spec).unwrap();
            let u = [s, s];
            let v = [-s, -s];
            for k in -40..=40 {
                let t = k as f64 * 0.25;
                let sum = marginal_tail_prob(&gt, &u, t).unwrap() + marginal_tail_prob(&gt, &v, -t).unwrap();
                assert!((sum - 1.0).abs() < 1e-12, "t={t}: {sum}");
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let gt = diag(&[1.0, 1.0]);
        let a = sample_dataset(&gt, 4, 7).unwrap();
        let b = sample_dataset(&gt, 4, 7).unwrap();
        assert_eq!(a.x, b.x);
        let c = sample_dataset(&gt, 4, 8).unwrap();
        assert_ne!(a.x, c.x);
        assert!(sample_dataset(&gt, 0, 7).is_err());
    }

    #[test]
    fn contamination_is_stratified() {
        let spec = DistributionSpec {
            family: Family::ContaminatedGaussian {
                contamination: Contamination {
                    fraction: 0.1,
                    offset: vec![1000.0, 0.0],
                },
            },
            ..DistributionSpec::gaussian(vec![1.0, 1.0])
        };
        let gt = make_ground_truth(&spec).unwrap();
        for n in [10, 95, 1000, 4097] {
            let ds = sample_dataset(&gt, n, 3).unwrap();
            let hits = ds.x.iter_rows().filter(|r| r[0] == 1000.0).count();
            assert_eq!(hits, n / 10);
        }
        assert!((gt.mu[0] - 100.0).abs() < 1e-12);
        assert!(gt.kappa >= 1.0);
    }

    #[test]
    fn jitter_identity_and_determinism() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![3.0, 3.0]]).unwrap();
        assert_eq!(jitter(&x, 0.0, 1).unwrap(), x);
        let a = jitter(&x, 1e-9, 5).unwrap();
        assert_eq!(a, jitter(&x, 1e-9, 5).unwrap());
        let mut r = rng::stream(9, "u", 0);
        let u = random_unit(&mut r, 2);
        let mut p = a.project(&u);
        p.sort_by(f64::total_cmp);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        assert!(jitter(&x, -1.0, 1).is_err());
    }

    #[test]
    fn spec_json_keys() {
        let spec = DistributionSpec::student(3.0, vec![2.0, 1.0])
            .with_rotation(4)
            .with_mean(vec![1.0, -1.0]);
        let v: serde_json::Value = serde_json::from_str(&spec.to_json()).unwrap();
        assert_eq!(v["family"], "elliptical-student");
        assert_eq!(v["dof"], 3.0);
        assert_eq!(v["rotation_seed"], 4);
        let back = DistributionSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
        let c = DistributionSpec::from_json(
            r#"{"family":"contaminated-gaussian","eigenvalues":[1],"contamination":{"fraction":0.1,"offset":[5]}}"#,
        )
        .unwrap();
        assert!(matches!(c.family, Family::ContaminatedGaussian { .. }));
    }
}
