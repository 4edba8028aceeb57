//! Morse-Sturm systems `J'' = R(t) J` and their symplectic flow.
//!
//! The metric `g` is a fixed diagonal form with entries +-1 (the parallel
//! g-orthonormal trivialization), `R` is a curve of g-symmetric
//! endomorphisms on the normalized interval `[0, 1]`. The flow `Phi` solves
//!
//! ```text
//! Phi'(t) = X(t) Phi(t),   X(t) = [ 0       g^{-1} ]
//!                                 [ g R(t)  0      ],   Phi(0) = Id,
//! ```
//!
//! and is a curve in `Sp(2n, R)`; its columns transport Cauchy data
//! `(J(0), g J'(0))` to `(J(t), g J'(t))`. Conjugate instants are the
//! `t0 > 0` where the matrix solution with `J(0) = 0`, `J'(0) = g^{-1}`
//! drops rank; they are localized from sign changes of `det J` and from
//! near-zero dips of the smallest singular value (which catches
//! even-multiplicity tangencies where the determinant does not change sign),
//! then refined by bisection. The signature of an instant is the signature
//! of `g` restricted to the image of the kernel under `J'(t0)`, which
//! realizes the g-orthogonal complement of the range of `J(t0)`.

use thiserror::Error;

use crate::linalg::{self, Mat};
use crate::{cast, tol, Scalar};

#[derive(Debug, Error)]
pub enum MorseSturmError {
    #[error("metric entries must be exactly +1 or -1")]
    BadMetricEntry,
    #[error("curvature dimension {curvature} does not match metric dimension {metric}")]
    DimensionMismatch { curvature: usize, metric: usize },
    #[error("sample grid of the curvature curve must be strictly increasing")]
    BadSampleGrid,
    #[error("curvature is not g-symmetric: defect {defect:e} at t = {t} exceeds {limit:e}")]
    NotGSymmetric { t: f64, defect: f64, limit: f64 },
    #[error("flow integration needs at least 64 steps (got {0})")]
    TooFewSteps(usize),
    #[error("symplectic defect {defect:e} at t = {t} exceeds {limit:e}; use a smaller step")]
    SymplecticDefect { t: f64, defect: f64, limit: f64 },
    #[error("internal consistency failure: {0}")]
    InternalConsistency(String),
}

/// Nondegenerate diagonal metric with entries +-1; `index` counts the -1s.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricForm<S> {
    diag: Vec<S>,
}

impl<S: Scalar> MetricForm<S> {
    pub fn new(diag: Vec<S>) -> Result<Self, MorseSturmError> {
        if diag.is_empty() || diag.iter().any(|&d| d != S::one() && d != -S::one()) {
            return Err(MorseSturmError::BadMetricEntry);
        }
        Ok(MetricForm { diag })
    }

    /// Riemannian metric (all entries +1).
    pub fn euclidean(dim: usize) -> Self {
        MetricForm { diag: vec![S::one(); dim] }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of negative entries, `n_-(g)`.
    pub fn index(&self) -> usize {
        self.diag.iter().filter(|&&d| d < S::zero()).count()
    }

    pub fn diag(&self) -> &[S] {
        &self.diag
    }

    pub fn matrix(&self) -> Mat<S> {
        Mat::from_diag(&self.diag)
    }

    /// `g v` (same as `g^{-1} v` for a +-1 diagonal form).
    pub fn apply(&self, v: &[S]) -> Vec<S> {
        v.iter().zip(&self.diag).map(|(&x, &d)| x * d).collect()
    }

    /// `g(x, y)`.
    pub fn pair(&self, x: &[S], y: &[S]) -> S {
        x.iter().zip(y).zip(&self.diag).map(|((&a, &b), &d)| a * b * d).collect::<Vec<S>>().into_iter().sum()
    }

    /// `g M` with the rows of `M` scaled by the diagonal.
    pub fn scale_rows(&self, m: &Mat<S>) -> Mat<S> {
        Mat::from_fn(m.rows(), m.cols(), |i, j| self.diag[i] * m.at(i, j))
    }

    /// Gram matrix `W^T g W` of a set of column vectors.
    pub fn gram(&self, w: &Mat<S>) -> Mat<S> {
        w.transpose().mul(&self.scale_rows(w)).symmetrized()
    }
}

/// Curve `t -> R(t)` of endomorphisms on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub enum CurvatureCurve<S> {
    /// Constant matrix.
    Constant(Mat<S>),
    /// Diagonal with polynomial entries; coefficient lists in ascending
    /// powers of `t`, one per coordinate direction.
    DiagonalPolynomial(Vec<Vec<S>>),
    /// Piecewise-linear interpolation of full-matrix samples.
    Sampled { ts: Vec<S>, values: Vec<Mat<S>> },
}

impl<S: Scalar> CurvatureCurve<S> {
    pub fn constant_diag(diag: &[S]) -> Self {
        CurvatureCurve::Constant(Mat::from_diag(diag))
    }

    pub fn dim(&self) -> usize {
        match self {
            CurvatureCurve::Constant(m) => m.rows(),
            CurvatureCurve::DiagonalPolynomial(polys) => polys.len(),
            CurvatureCurve::Sampled { values, .. } => values.first().map_or(0, Mat::rows),
        }
    }

    pub fn eval(&self, t: S) -> Mat<S> {
        match self {
            CurvatureCurve::Constant(m) => m.clone(),
            CurvatureCurve::DiagonalPolynomial(polys) => {
                let diag: Vec<S> = polys
                    .iter()
                    .map(|c| c.iter().rev().fold(S::zero(), |acc, &coef| acc * t + coef))
                    .collect();
                Mat::from_diag(&diag)
            }
            CurvatureCurve::Sampled { ts, values } => {
                let n = ts.len();
                if t <= ts[0] {
                    return values[0].clone();
                }
                if t >= ts[n - 1] {
                    return values[n - 1].clone();
                }
                let mut i = 0;
                while ts[i + 1] < t {
                    i += 1;
                }
                let f = (t - ts[i]) / (ts[i + 1] - ts[i]);
                values[i].scaled(S::one() - f).add(&values[i + 1].scaled(f))
            }
        }
    }

    /// Breakpoints where the curve is only C^0 (sample nodes); quadrature
    /// panels are aligned on these.
    pub fn breakpoints(&self) -> Vec<S> {
        match self {
            CurvatureCurve::Sampled { ts, .. } => ts.clone(),
            _ => Vec::new(),
        }
    }
}

/// A Morse-Sturm system on the normalized interval `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MorseSturmSystem<S> {
    metric: MetricForm<S>,
    curvature: CurvatureCurve<S>,
}

const VALIDATION_PROBES: usize = 256;

impl<S: Scalar> MorseSturmSystem<S> {
    pub fn new(
        metric: MetricForm<S>,
        curvature: CurvatureCurve<S>,
    ) -> Result<Self, MorseSturmError> {
        if curvature.dim() != metric.dim() {
            return Err(MorseSturmError::DimensionMismatch {
                curvature: curvature.dim(),
                metric: metric.dim(),
            });
        }
        if let CurvatureCurve::Sampled { ts, values } = &curvature {
            if ts.len() < 2 || ts.len() != values.len() {
                return Err(MorseSturmError::BadSampleGrid);
            }
            if ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(MorseSturmError::BadSampleGrid);
            }
            if values.iter().any(|m| m.rows() != metric.dim() || m.cols() != metric.dim()) {
                return Err(MorseSturmError::DimensionMismatch {
                    curvature: values[0].rows(),
                    metric: metric.dim(),
                });
            }
        }
        Ok(MorseSturmSystem { metric, curvature })
    }

    pub fn metric(&self) -> &MetricForm<S> {
        &self.metric
    }

    pub fn curvature(&self) -> &CurvatureCurve<S> {
        &self.curvature
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// Confirms the g-symmetry of `R` on a probe grid; the worst instant is
    /// named on rejection.
    pub fn validate(&self) -> Result<(), MorseSturmError> {
        let limit = cast::<S>(tol::G_SYMMETRY);
        let mut worst = (S::zero(), S::zero());
        for k in 0..VALIDATION_PROBES {
            let t = cast::<S>(k as f64 / (VALIDATION_PROBES - 1) as f64);
            let gr = self.metric.scale_rows(&self.curvature.eval(t));
            let defect = gr.sub(&gr.transpose()).max_abs();
            let scale = gr.max_abs().max(S::one());
            let rel = defect / scale;
            if rel > worst.1 {
                worst = (t, rel);
            }
        }
        if worst.1 > limit {
            return Err(MorseSturmError::NotGSymmetric {
                t: worst.0.to_f64().unwrap_or(f64::NAN),
                defect: worst.1.to_f64().unwrap_or(f64::NAN),
                limit: tol::G_SYMMETRY,
            });
        }
        Ok(())
    }

    /// Flow matrix `X(t)` on the doubled space.
    pub fn x_matrix(&self, t: S) -> Mat<S> {
        let n = self.dim();
        let mut x = Mat::zeros(2 * n, 2 * n);
        // top-right block g^{-1} (= g for a +-1 diagonal metric)
        for i in 0..n {
            x[(i, n + i)] = self.metric.diag()[i];
        }
        let gr = self.metric.scale_rows(&self.curvature.eval(t));
        x.set_block(n, 0, &gr);
        x
    }
}

/// Matrix `Omega` of the canonical symplectic form on `R^n + R^n*`:
/// `omega(z1, z2) = z1^T Omega z2`.
pub fn omega_matrix<S: Scalar>(n: usize) -> Mat<S> {
    let mut o = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        o[(i, n + i)] = S::one();
        o[(n + i, i)] = -S::one();
    }
    o
}

/// One integrated sample of the flow.
#[derive(Clone, Debug)]
pub struct FlowSample<S> {
    pub t: S,
    /// `Phi(t)`, a symplectic `2n x 2n` matrix.
    pub phi: Mat<S>,
    /// `J(t)` for the matrix solution with `J(0) = 0`, `J'(0) = g^{-1}`.
    pub jacobi: Mat<S>,
    /// `J'(t)` of the same solution.
    pub jacobi_deriv: Mat<S>,
    /// `max |Phi^T Omega Phi - Omega|`.
    pub symplectic_defect: S,
}

/// The integrated flow of a system on a uniform grid.
#[derive(Clone, Debug)]
pub struct Flow<S> {
    system: MorseSturmSystem<S>,
    samples: Vec<FlowSample<S>>,
}

fn rk4_step<S: Scalar>(system: &MorseSturmSystem<S>, phi: &Mat<S>, t: S, h: S) -> Mat<S> {
    let half = cast::<S>(0.5);
    let sixth = cast::<S>(1.0 / 6.0);
    let two = cast::<S>(2.0);
    let x0 = system.x_matrix(t);
    let x1 = system.x_matrix(t + h * half);
    let x2 = system.x_matrix(t + h);
    let k1 = x0.mul(phi);
    let k2 = x1.mul(&phi.add(&k1.scaled(h * half)));
    let k3 = x1.mul(&phi.add(&k2.scaled(h * half)));
    let k4 = x2.mul(&phi.add(&k3.scaled(h)));
    phi.add(&k1.add(&k2.scaled(two)).add(&k3.scaled(two)).add(&k4).scaled(h * sixth))
}

/// Fixed-step classical 4th-order integration of `Phi' = X Phi` with
/// `Phi(0) = Id`. The symplectic defect is monitored per sample and the
/// integration fails when it exceeds `tol::SYMPLECTIC_DEFECT`.
pub fn integrate_flow<S: Scalar>(
    system: &MorseSturmSystem<S>,
    steps: usize,
) -> Result<Flow<S>, MorseSturmError> {
    if steps < 64 {
        return Err(MorseSturmError::TooFewSteps(steps));
    }
    let n = system.dim();
    let omega = omega_matrix::<S>(n);
    let limit = cast::<S>(tol::SYMPLECTIC_DEFECT);
    let h = S::one() / cast::<S>(steps as f64);
    let mut phi = Mat::identity(2 * n);
    let mut samples = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = cast::<S>(k as f64) * h;
        let defect = phi.transpose().mul(&omega).mul(&phi).sub(&omega).max_abs();
        if defect > limit {
            return Err(MorseSturmError::SymplecticDefect {
                t: t.to_f64().unwrap_or(f64::NAN),
                defect: defect.to_f64().unwrap_or(f64::NAN),
                limit: tol::SYMPLECTIC_DEFECT,
            });
        }
        let jacobi = phi.block(0, n, n, n);
        let jacobi_deriv = system.metric().scale_rows(&phi.block(n, n, n, n));
        samples.push(FlowSample { t, phi: phi.clone(), jacobi, jacobi_deriv, symplectic_defect: defect });
        if k < steps {
            phi = rk4_step(system, &phi, t, h);
        }
    }
    Ok(Flow { system: system.clone(), samples })
}

const SUBSTEPS: usize = 8;

impl<S: Scalar> Flow<S> {
    pub fn system(&self) -> &MorseSturmSystem<S> {
        &self.system
    }

    pub fn samples(&self) -> &[FlowSample<S>] {
        &self.samples
    }

    pub fn steps(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn max_symplectic_defect(&self) -> S {
        self.samples.iter().fold(S::zero(), |m, s| m.max(s.symplectic_defect))
    }

    /// `Phi(t)` at an arbitrary instant: a fixed number of RK4 substeps from
    /// the nearest grid sample on the left. Deterministic for a given flow.
    pub fn phi_at(&self, t: S) -> Mat<S> {
        let steps = self.steps();
        let pos = (t * cast::<S>(steps as f64)).floor();
        let i = pos.to_usize().unwrap_or(0).min(steps);
        let ti = self.samples[i].t;
        let dt = t - ti;
        let mut phi = self.samples[i].phi.clone();
        if dt <= S::zero() {
            return phi;
        }
        let h = dt / cast::<S>(SUBSTEPS as f64);
        let mut tc = ti;
        for _ in 0..SUBSTEPS {
            phi = rk4_step(&self.system, &phi, tc, h);
            tc += h;
        }
        phi
    }
}

/// Jacobi blocks of the flow applied to a seed frame of Cauchy data.
///
/// The frame is a `2n x n` matrix of columns `(J(0), g J'(0))`; the standard
/// seed `[[0], [I]]` yields the conjugate-point problem, a frame built from
/// submanifold data yields the focal problem. The track stores `det J` and
/// the extreme singular values per flow sample, which drive the instant
/// search.
#[derive(Clone, Debug)]
pub struct JacobiTrack<S> {
    frame: Mat<S>,
    ts: Vec<S>,
    dets: Vec<S>,
    sigma_min: Vec<S>,
    /// Largest singular value of `J` over all samples; rank thresholds are
    /// taken relative to this scale.
    scale: S,
}

impl<S: Scalar> JacobiTrack<S> {
    /// Track of the standard seed `L_0 = {0} + R^n*`.
    pub fn standard(flow: &Flow<S>) -> Self {
        let n = flow.system.dim();
        let mut frame = Mat::zeros(2 * n, n);
        for i in 0..n {
            frame[(n + i, i)] = S::one();
        }
        Self::seeded(flow, frame)
    }

    /// Track of an arbitrary seed frame.
    pub fn seeded(flow: &Flow<S>, frame: Mat<S>) -> Self {
        let n = flow.system.dim();
        assert_eq!((frame.rows(), frame.cols()), (2 * n, n), "seed frame must be 2n x n");
        let mut ts = Vec::with_capacity(flow.samples.len());
        let mut dets = Vec::with_capacity(flow.samples.len());
        let mut sigma_min = Vec::with_capacity(flow.samples.len());
        let mut scale = S::zero();
        for s in &flow.samples {
            let j = jacobi_of(&frame, &s.phi, n);
            let sig = linalg::svd(&j).sigma;
            let top = sig.first().copied().unwrap_or(S::zero());
            let bottom = sig.last().copied().unwrap_or(S::zero());
            scale = scale.max(top);
            ts.push(s.t);
            dets.push(linalg::det(&j));
            sigma_min.push(bottom);
        }
        JacobiTrack { frame, ts, dets, sigma_min, scale: scale.max(S::min_positive_value()) }
    }

    pub fn frame(&self) -> &Mat<S> {
        &self.frame
    }

    pub fn scale(&self) -> S {
        self.scale
    }

    /// Per-sample rows `(t, det J, sigma_min)`.
    pub fn curve(&self) -> impl Iterator<Item = (S, S, S)> + '_ {
        (0..self.ts.len()).map(move |i| (self.ts[i], self.dets[i], self.sigma_min[i]))
    }

    /// `(J(t), J'(t))` for the seeded matrix solution.
    pub fn jacobi_at(&self, flow: &Flow<S>, t: S) -> (Mat<S>, Mat<S>) {
        let n = flow.system.dim();
        let phi = flow.phi_at(t);
        let y = phi.mul(&self.frame);
        let j = y.block(0, 0, n, n);
        let jd = flow.system.metric().scale_rows(&y.block(n, 0, n, n));
        (j, jd)
    }

    fn det_at(&self, flow: &Flow<S>, t: S) -> S {
        linalg::det(&self.jacobi_at(flow, t).0)
    }

    fn sigma_min_at(&self, flow: &Flow<S>, t: S) -> S {
        let sig = linalg::svd(&self.jacobi_at(flow, t).0).sigma;
        sig.last().copied().unwrap_or(S::zero())
    }
}

fn jacobi_of<S: Scalar>(frame: &Mat<S>, phi: &Mat<S>, n: usize) -> Mat<S> {
    phi.mul(frame).block(0, 0, n, n)
}

/// A localized instant where the seeded solution drops rank.
#[derive(Clone, Debug)]
pub struct KernelInstant<S> {
    pub t0: S,
    /// `dim ker J(t0) = n - rank J(t0)`.
    pub multiplicity: usize,
    /// Orthonormal kernel basis, `n x multiplicity`.
    pub kernel: Mat<S>,
    /// Rank decision sat inside the tolerance band; downstream consumers
    /// must not trust the multiplicity.
    pub uncertain: bool,
    /// Within refinement width of `t = 1`.
    pub at_endpoint: bool,
}

/// Classified instant: multiplicity plus signature data.
#[derive(Clone, Debug)]
pub struct ConjugateInstant<S> {
    pub t0: S,
    pub multiplicity: usize,
    pub kernel: Mat<S>,
    /// Signature of `g` on the g-orthogonal complement of the range of
    /// `J(t0)`.
    pub signature: i64,
    pub nondegenerate: bool,
    pub uncertain: bool,
    pub at_endpoint: bool,
}

/// Fraction of the track scale under which a sigma_min dip is worth
/// refining.
const DIP_FILTER: f64 = 0.05;
/// Band (as a multiplicative factor around the rank threshold) in which a
/// singular value makes the rank decision ambiguous.
const UNCERTAIN_BAND: f64 = 32.0;
const ENDPOINT_EPS: f64 = 1e-9;
const MERGE_EPS: f64 = 1e-8;

/// Locates conjugate instants of the standard seed in `(startup, 1]`.
pub fn find_conjugate_instants<S: Scalar>(
    flow: &Flow<S>,
    tol_rank: S,
) -> Result<Vec<KernelInstant<S>>, MorseSturmError> {
    let track = JacobiTrack::standard(flow);
    find_instants_on_track(flow, &track, tol_rank)
}

/// Instant search on an arbitrary seeded track.
///
/// Sign changes of `det J` are refined by bisection; interior local minima of
/// `sigma_min` below `DIP_FILTER * scale` are refined by golden-section
/// search, which catches even-multiplicity instants without a determinant
/// sign change. Instants inside the startup zone are discarded: the curve of
/// Lagrangian subspaces starts on the singular variety and has no genuine
/// crossing immediately after `t = 0`.
pub fn find_instants_on_track<S: Scalar>(
    flow: &Flow<S>,
    track: &JacobiTrack<S>,
    tol_rank: S,
) -> Result<Vec<KernelInstant<S>>, MorseSturmError> {
    let m = track.ts.len();
    let refine = cast::<S>(tol::INSTANT_REFINE);
    let mut candidates: Vec<S> = Vec::new();
    let mut det_brackets: Vec<(S, S)> = Vec::new();

    // determinant sign changes (skip the first interval; it lies inside the
    // startup zone for any realistic step count)
    for i in 1..m - 1 {
        let da = track.dets[i];
        let db = track.dets[i + 1];
        if da == S::zero() {
            candidates.push(track.ts[i]);
            continue;
        }
        if da * db < S::zero() {
            let t = bisect_det(track, flow, track.ts[i], track.ts[i + 1], refine);
            det_brackets.push((track.ts[i], track.ts[i + 1]));
            candidates.push(t);
        }
    }
    if m >= 2 && track.dets[m - 1] == S::zero() {
        candidates.push(track.ts[m - 1]);
    }

    // sigma_min dips without a sign change
    let dip = cast::<S>(DIP_FILTER) * track.scale;
    for i in 1..m - 1 {
        let s = track.sigma_min[i];
        if s > dip || s > track.sigma_min[i - 1] || s > track.sigma_min[i + 1] {
            continue;
        }
        let (lo, hi) = (track.ts[i - 1], track.ts[i + 1]);
        if det_brackets.iter().any(|&(a, b)| a < hi && lo < b) {
            continue; // already handled as a sign change
        }
        let t = golden_min(|t| track.sigma_min_at(flow, t), lo, hi, refine);
        if track.sigma_min_at(flow, t) <= tol_rank * track.scale * cast(4.0) {
            candidates.push(t);
        }
    }

    candidates.sort_by(|a, b| a.partial_cmp(b).expect("NaN instant"));
    let merge = cast::<S>(MERGE_EPS);
    let mut merged: Vec<S> = Vec::new();
    for t in candidates {
        if merged.last().map_or(true, |&last| t - last > merge) {
            merged.push(t);
        }
    }

    let startup = cast::<S>(tol::STARTUP_ZONE);
    let mut out = Vec::new();
    for t0 in merged {
        if t0 <= startup {
            continue;
        }
        let (j, _) = track.jacobi_at(flow, t0);
        let dec = linalg::svd(&j);
        let cutoff = tol_rank * track.scale;
        let mult = dec.sigma.iter().filter(|&&s| s <= cutoff).count();
        if mult == 0 {
            continue; // near-miss dip, not an instant
        }
        let band = cast::<S>(UNCERTAIN_BAND);
        let uncertain = dec
            .sigma
            .iter()
            .any(|&s| s >= cutoff / band && s <= cutoff * band);
        let n = j.rows();
        let kernel = Mat::from_fn(n, mult, |r, c| dec.v.at(r, n - mult + c));
        out.push(KernelInstant {
            t0,
            multiplicity: mult,
            kernel,
            uncertain,
            at_endpoint: (S::one() - t0).abs() <= cast(ENDPOINT_EPS),
        });
    }
    Ok(out)
}

fn bisect_det<S: Scalar>(
    track: &JacobiTrack<S>,
    flow: &Flow<S>,
    mut a: S,
    mut b: S,
    width: S,
) -> S {
    let mut fa = track.det_at(flow, a);
    let half = cast::<S>(0.5);
    for _ in 0..200 {
        if b - a <= width {
            break;
        }
        let m = (a + b) * half;
        let fm = track.det_at(flow, m);
        if fm == S::zero() {
            return m;
        }
        if fa * fm < S::zero() {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    (a + b) * half
}

fn golden_min<S: Scalar>(f: impl Fn(S) -> S, mut a: S, mut b: S, width: S) -> S {
    let inv_phi = cast::<S>(0.618_033_988_749_894_9);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if b - a <= width {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    (a + b) * cast::<S>(0.5)
}

const ORTHO_CHECK: f64 = 1e-6;
const SIGNATURE_EIG_TOL: f64 = 1e-8;

/// Classifies a located instant of the standard seed.
pub fn classify_instant<S: Scalar>(
    flow: &Flow<S>,
    instant: &KernelInstant<S>,
    tol_rank: S,
) -> Result<ConjugateInstant<S>, MorseSturmError> {
    let track = JacobiTrack::standard(flow);
    classify_on_track(flow, &track, instant, tol_rank)
}

/// Classification on an arbitrary track.
///
/// The space `{ J'(t0) c : c in ker J(t0) }` realizes the g-orthogonal
/// complement of the range of `J(t0)`; this is asserted numerically before
/// `g` is restricted to it. The signature is `n_+ - n_-` of the restriction,
/// nondegeneracy means the restriction has no kernel.
pub fn classify_on_track<S: Scalar>(
    flow: &Flow<S>,
    track: &JacobiTrack<S>,
    instant: &KernelInstant<S>,
    tol_rank: S,
) -> Result<ConjugateInstant<S>, MorseSturmError> {
    let metric = flow.system().metric().clone();
    let (j, jd) = track.jacobi_at(flow, instant.t0);
    let w = jd.mul(&instant.kernel);

    // range of J(t0), with the rank cut taken on the track scale
    let dec = linalg::svd(&j);
    let cutoff = tol_rank * track.scale;
    let rank = dec.sigma.iter().filter(|&&s| s > cutoff).count();
    let range = dec.u.block(0, 0, j.rows(), rank);

    // the candidate complement must be g-orthogonal to the range
    let cross = range.transpose().mul(&metric.scale_rows(&w));
    let w_scale = w.max_abs().max(S::min_positive_value());
    if cross.max_abs() / w_scale > cast(ORTHO_CHECK) {
        return Err(MorseSturmError::InternalConsistency(format!(
            "J'(t0) kernel image is not g-orthogonal to range J(t0) at t0 = {} (defect {:e})",
            instant.t0,
            (cross.max_abs() / w_scale).to_f64().unwrap_or(f64::NAN)
        )));
    }

    // orthonormalize the space and restrict g to it
    let basis = linalg::range_basis(&w, cast(tol::RANK));
    if basis.cols() != instant.multiplicity {
        return Err(MorseSturmError::InternalConsistency(format!(
            "complement dimension {} does not match multiplicity {} at t0 = {}",
            basis.cols(),
            instant.multiplicity,
            instant.t0
        )));
    }
    let restricted = metric.gram(&basis);
    let counts = crate::bilinear::inertia_of(&restricted, cast(SIGNATURE_EIG_TOL));
    Ok(ConjugateInstant {
        t0: instant.t0,
        multiplicity: instant.multiplicity,
        kernel: instant.kernel.clone(),
        signature: counts.signature(),
        nondegenerate: counts.n_zero == 0,
        uncertain: instant.uncertain,
        at_endpoint: instant.at_endpoint,
    })
}
