//! Galerkin discretization of the rescaled second-variation path.
//!
//! For `s` in `[0, 1]` the path of bilinear forms is
//!
//! ```text
//! I_s(V, W) = int_0^1 [ g(V', W') + s^2 g(R(st) V, W) ] dt  - s S(V(0), W(0)),
//! ```
//!
//! on fields vanishing at `t = 1` and, at `t = 0`, either vanishing (the
//! conjugate case) or free along the initial subspace `P` (the focal case;
//! `S` is the second fundamental form, absent in the conjugate case). At
//! `s = 0` the matrix is the pure derivative form, block diagonal in the
//! splitting by g-negative and g-positive directions with definite blocks of
//! both signs; the curvature term is a finite-rank correction, so the path
//! is a perturbation of a fixed symmetry and its spectral flow is readable
//! off the endpoint inertias: `sf = n_-(I_0) - n_-(I_1)`. The number
//! `n_-(I_1) - dim H^-` equals the Maslov index of the system (the focal
//! variant produces the P-Maslov index, and the relative index with respect
//! to the endpoint-vanishing negative block exceeds it by `n_-(g|_P)`).
//!
//! Two bases are provided, spectral sines and piecewise-linear nodal hats;
//! every reported integer must agree between them. Entries are integrated by
//! composite Gauss-Legendre rules with 32 points per panel, panels aligned
//! to basis elements and to curvature sample breakpoints; each assembly is
//! cross-checked against the doubled 64-point rule.

use std::sync::OnceLock;

use thiserror::Error;

use crate::bilinear::{self, inertia_of, CrossingEvent, Inertia, RelativeIndex, SymForm, Subspace};
use crate::focal::FocalBoundary;
use crate::linalg::{self, Mat};
use crate::morse_sturm::{CurvatureCurve, MetricForm, MorseSturmSystem};
use crate::{cast, tol, Scalar};

#[derive(Debug, Error)]
pub enum GalerkinError {
    #[error("basis size must be at least 1")]
    EmptyBasis,
    #[error("quadrature did not converge: entry change {defect:e} on doubling exceeds {limit:e}")]
    QuadratureNonconvergence { defect: f64, limit: f64 },
    #[error("s must lie in [0, 1] (got {0})")]
    ParameterOutOfRange(f64),
    #[error("endpoint form at s = {s} is degenerate ({n_zero} eigenvalues in the tolerance band); t = 1 is conjugate or the basis is too coarse")]
    EndpointDegenerate { s: f64, n_zero: usize },
    #[error("form at s = 0 is not block definite in the splitting (defect {0:e}); assembly is inconsistent")]
    SplitStructure(f64),
    #[error("endpoint identity n_-(I_1) - dim H^- = -sf failed: {lhs} vs {rhs}; the discretization is too coarse, increase the basis size")]
    IdentityFailure { lhs: i64, rhs: i64 },
    #[error("focal frame construction failed: {0}")]
    FocalFrame(String),
    #[error(transparent)]
    Bilinear(#[from] bilinear::BilinearError),
}

/// Galerkin basis family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisKind {
    /// `sin(m pi t)`, `m = 1..N`; release function `1 - t`.
    Sine,
    /// Nodal hat functions on a uniform mesh with `N` interior nodes;
    /// release function is the hat at the left boundary node.
    PiecewiseLinear,
}

/// Basis family and per-direction size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub size: usize,
}

impl BasisSpec {
    pub fn sine(size: usize) -> Self {
        BasisSpec { kind: BasisKind::Sine, size }
    }

    pub fn fem(size: usize) -> Self {
        BasisSpec { kind: BasisKind::PiecewiseLinear, size }
    }
}

/// One-dimensional basis function on `[0, 1]`.
#[derive(Clone, Copy, Debug)]
enum Fun1D {
    Sine { m: usize },
    Hat { node: usize, elems: usize },
    ReleaseLinear,
}

impl Fun1D {
    fn eval<S: Scalar>(&self, t: S) -> S {
        match *self {
            Fun1D::Sine { m } => (cast::<S>(m as f64 * std::f64::consts::PI) * t).sin(),
            Fun1D::Hat { node, elems } => {
                let h = S::one() / cast::<S>(elems as f64);
                let x = (t - cast::<S>(node as f64) * h).abs() / h;
                (S::one() - x).max(S::zero())
            }
            Fun1D::ReleaseLinear => S::one() - t,
        }
    }

    fn deriv<S: Scalar>(&self, t: S) -> S {
        match *self {
            Fun1D::Sine { m } => {
                let w = cast::<S>(m as f64 * std::f64::consts::PI);
                w * (w * t).cos()
            }
            Fun1D::Hat { node, elems } => {
                let h = S::one() / cast::<S>(elems as f64);
                let c = cast::<S>(node as f64) * h;
                if t < c - h || t > c + h {
                    S::zero()
                } else if t < c {
                    S::one() / h
                } else {
                    -S::one() / h
                }
            }
            Fun1D::ReleaseLinear => -S::one(),
        }
    }

    fn at_zero<S: Scalar>(&self) -> S {
        match *self {
            Fun1D::Sine { .. } => S::zero(),
            Fun1D::Hat { node, .. } => {
                if node == 0 {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Fun1D::ReleaseLinear => S::one(),
        }
    }
}

static GL32: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
static GL64: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0f64; k];
    let mut ws = vec![0.0f64; k];
    for i in 0..(k + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_k(x) and P_k'(x) by the three-term recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=k {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = k as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[k - 1 - i] = x;
        ws[i] = w;
        ws[k - 1 - i] = w;
    }
    (xs, ws)
}

fn gl_rule(points: usize) -> &'static (Vec<f64>, Vec<f64>) {
    match points {
        32 => GL32.get_or_init(|| gauss_legendre(32)),
        64 => GL64.get_or_init(|| gauss_legendre(64)),
        _ => unreachable!("only 32 and 64 point rules are used"),
    }
}

/// Direction frame adapted to the boundary data: g-orthogonal columns with
/// `g(d, d) = +-1`, released directions spanning `P`.
#[derive(Clone, Debug)]
struct DirectionFrame<S> {
    columns: Mat<S>,
    negative: Vec<bool>,
    released: Vec<bool>,
    /// Second fundamental form evaluated on pairs of released directions
    /// (zero rows/columns elsewhere).
    s_tilde: Mat<S>,
}

impl<S: Scalar> DirectionFrame<S> {
    fn conjugate(metric: &MetricForm<S>) -> Self {
        let n = metric.dim();
        DirectionFrame {
            columns: Mat::identity(n),
            negative: metric.diag().iter().map(|&d| d < S::zero()).collect(),
            released: vec![false; n],
            s_tilde: Mat::zeros(n, n),
        }
    }

    fn focal(metric: &MetricForm<S>, focal: &FocalBoundary<S>) -> Result<Self, GalerkinError> {
        let n = metric.dim();
        let p = focal.p_dim();
        if p == 0 {
            return Ok(Self::conjugate(metric));
        }
        let rank_tol = cast::<S>(tol::RANK);
        let qp = linalg::range_basis(focal.p_basis(), rank_tol);
        let (dp, neg_p) = g_orthonormalize(metric, &qp)
            .map_err(|e| GalerkinError::FocalFrame(format!("subspace block: {e}")))?;
        // g-orthogonal complement of P: kernel of Q_p^T g
        let qc = linalg::kernel_basis(&qp.transpose().mul(&metric.matrix()), rank_tol);
        let (dc, neg_c) = g_orthonormalize(metric, &qc)
            .map_err(|e| GalerkinError::FocalFrame(format!("complement block: {e}")))?;

        let columns = dp.hstack(&dc);
        let negative: Vec<bool> = neg_p.iter().chain(neg_c.iter()).copied().collect();
        let released: Vec<bool> = (0..n).map(|i| i < p).collect();

        // express released directions in the P basis and pull back S
        let coords = linalg::solve_least_squares(focal.p_basis(), &dp, rank_tol);
        let s_small = coords.transpose().mul(focal.second_fundamental()).mul(&coords);
        let mut s_tilde = Mat::zeros(n, n);
        s_tilde.set_block(0, 0, &s_small.symmetrized());

        // cross-check: columns must be g-orthonormal up to signs
        let gram = metric.gram(&columns);
        let mut defect = S::zero();
        for i in 0..n {
            for j in 0..n {
                let want = if i != j {
                    S::zero()
                } else if negative[i] {
                    -S::one()
                } else {
                    S::one()
                };
                defect = defect.max((gram.at(i, j) - want).abs());
            }
        }
        if defect > cast(1e-9) {
            return Err(GalerkinError::FocalFrame(format!(
                "adapted frame is not g-orthonormal (defect {:e})",
                defect.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(DirectionFrame { columns, negative, released, s_tilde })
    }
}

/// Rotates the columns of `q` into a g-orthogonal set normalized to
/// `g(d, d) = +-1`. Keeps the input order when the Gram matrix is already
/// +-1 diagonal (coordinate-aligned data stays coordinate-aligned).
fn g_orthonormalize<S: Scalar>(
    metric: &MetricForm<S>,
    q: &Mat<S>,
) -> Result<(Mat<S>, Vec<bool>), String> {
    let k = q.cols();
    if k == 0 {
        return Ok((q.clone(), Vec::new()));
    }
    let gram = metric.gram(q);
    let mut already = true;
    for i in 0..k {
        for j in 0..k {
            let want = if i == j { gram.at(i, i).signum() } else { S::zero() };
            if (gram.at(i, j) - want).abs() > cast(1e-12) {
                already = false;
            }
        }
    }
    if already {
        let negative = (0..k).map(|i| gram.at(i, i) < S::zero()).collect();
        return Ok((q.clone(), negative));
    }
    let eig = linalg::eigen_sym(&gram);
    if eig.values.iter().any(|&v| v.abs() < cast(1e-10)) {
        return Err("restricted metric is degenerate".to_string());
    }
    let mut cols = Vec::with_capacity(k);
    let mut negative = Vec::with_capacity(k);
    let rotated = q.mul(&eig.vectors);
    for j in 0..k {
        let lam = eig.values[j];
        let scale = S::one() / lam.abs().sqrt();
        cols.push(rotated.col(j).iter().map(|&x| x * scale).collect::<Vec<S>>());
        negative.push(lam < S::zero());
    }
    Ok((Mat::from_cols(q.rows(), &cols), negative))
}

/// Quadrature tables for one composite rule over a fixed panel set.
struct RuleTables<S> {
    ts: Vec<S>,
    ws: Vec<S>,
    /// values[f][node]
    fval: Vec<Vec<S>>,
    fder: Vec<Vec<S>>,
}

impl<S: Scalar> RuleTables<S> {
    fn build(edges: &[S], points: usize, pool: &[Fun1D]) -> Self {
        let (xs, ws) = gl_rule(points);
        let mut t_nodes = Vec::new();
        let mut w_nodes = Vec::new();
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = (b - a) * cast::<S>(0.5);
            let mid = (a + b) * cast::<S>(0.5);
            for i in 0..points {
                t_nodes.push(mid + half * cast::<S>(xs[i]));
                w_nodes.push(half * cast::<S>(ws[i]));
            }
        }
        let fval = pool
            .iter()
            .map(|f| t_nodes.iter().map(|&t| f.eval(t)).collect())
            .collect();
        let fder = pool
            .iter()
            .map(|f| t_nodes.iter().map(|&t| f.deriv(t)).collect())
            .collect();
        RuleTables { ts: t_nodes, ws: w_nodes, fval, fder }
    }

    /// `int f_a' f_b'` for all pool pairs.
    fn stiffness(&self) -> Mat<S> {
        let f = self.fval.len();
        Mat::from_fn(f, f, |a, b| {
            self.ws
                .iter()
                .zip(self.fder[a].iter().zip(self.fder[b].iter()))
                .map(|(&w, (&da, &db))| w * da * db)
                .sum()
        })
    }
}

/// Reusable assembler for the Galerkin matrices of one system (and optional
/// focal data) in one basis.
pub struct GalerkinAssembler<S> {
    metric: MetricForm<S>,
    curvature: CurvatureCurve<S>,
    frame: DirectionFrame<S>,
    basis: BasisSpec,
    /// Unique 1-D functions; per-direction lists index into this pool.
    pool: Vec<Fun1D>,
    /// pool indices per direction
    per_dir: Vec<Vec<usize>>,
    /// global offsets per direction
    offsets: Vec<usize>,
    dim: usize,
    edges: Vec<S>,
    /// base and doubled tables; rebuilt per call when the curvature has
    /// sample breakpoints (their images depend on `s`)
    cached: Option<(RuleTables<S>, RuleTables<S>, Mat<S>)>,
    h_minus: Vec<usize>,
    h_plus: Vec<usize>,
    s_delta: Vec<usize>,
}

impl<S: Scalar> GalerkinAssembler<S> {
    pub fn new(
        system: &MorseSturmSystem<S>,
        focal: Option<&FocalBoundary<S>>,
        basis: BasisSpec,
    ) -> Result<Self, GalerkinError> {
        if basis.size == 0 {
            return Err(GalerkinError::EmptyBasis);
        }
        let metric = system.metric().clone();
        let frame = match focal {
            Some(f) => DirectionFrame::focal(&metric, f)?,
            None => DirectionFrame::conjugate(&metric),
        };
        let n = metric.dim();
        let nsize = basis.size;

        let mut pool: Vec<Fun1D> = Vec::new();
        match basis.kind {
            BasisKind::Sine => {
                for m in 1..=nsize {
                    pool.push(Fun1D::Sine { m });
                }
                pool.push(Fun1D::ReleaseLinear);
            }
            BasisKind::PiecewiseLinear => {
                let elems = nsize + 1;
                for node in 1..=nsize {
                    pool.push(Fun1D::Hat { node, elems });
                }
                pool.push(Fun1D::Hat { node: 0, elems });
            }
        }
        let release_idx = pool.len() - 1;

        let mut per_dir = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        let mut dim = 0usize;
        for d in 0..n {
            let mut list: Vec<usize> = (0..nsize).collect();
            if frame.released[d] {
                list.push(release_idx);
            }
            offsets.push(dim);
            dim += list.len();
            per_dir.push(list);
        }

        let mut h_minus = Vec::new();
        let mut h_plus = Vec::new();
        let mut s_delta = Vec::new();
        for d in 0..n {
            for (k, &fi) in per_dir[d].iter().enumerate() {
                let g = offsets[d] + k;
                if frame.negative[d] {
                    h_minus.push(g);
                    if fi != release_idx {
                        s_delta.push(g);
                    }
                } else {
                    h_plus.push(g);
                }
            }
        }

        // panel edges: basis-aligned
        let mut edges: Vec<S> = match basis.kind {
            BasisKind::Sine => {
                let p = (nsize + 3) / 4;
                let p = p.max(2);
                (0..=p).map(|i| cast::<S>(i as f64 / p as f64)).collect()
            }
            BasisKind::PiecewiseLinear => {
                let elems = nsize + 1;
                (0..=elems).map(|i| cast::<S>(i as f64 / elems as f64)).collect()
            }
        };
        edges.dedup();

        let curvature = system.curvature().clone();
        let mut assembler = GalerkinAssembler {
            metric,
            curvature,
            frame,
            basis,
            pool,
            per_dir,
            offsets,
            dim,
            edges,
            cached: None,
            h_minus,
            h_plus,
            s_delta,
        };
        if assembler.curvature.breakpoints().is_empty() {
            let base = RuleTables::build(&assembler.edges, 32, &assembler.pool);
            let doubled = RuleTables::build(&assembler.edges, 64, &assembler.pool);
            let stiff = doubled.stiffness();
            assembler.cached = Some((base, doubled, stiff));
        }
        Ok(assembler)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Indices of the basis functions valued in g-negative directions.
    pub fn h_minus(&self) -> &[usize] {
        &self.h_minus
    }

    pub fn h_plus(&self) -> &[usize] {
        &self.h_plus
    }

    /// The endpoint-vanishing part of the negative block (release functions
    /// excluded); the discretization of the negative-distribution subspace.
    pub fn s_delta(&self) -> &[usize] {
        &self.s_delta
    }

    /// `n_-(g|_P)`: the number of released g-negative directions.
    pub fn metric_correction(&self) -> usize {
        self.frame
            .negative
            .iter()
            .zip(&self.frame.released)
            .filter(|&(&n, &r)| n && r)
            .count()
    }

    fn tables_for(&self, s: S) -> (RuleTables<S>, RuleTables<S>, Mat<S>) {
        // map curvature breakpoints through t -> tau / s and align panels
        let mut edges = self.edges.clone();
        if s > S::zero() {
            for tau in self.curvature.breakpoints() {
                let t = tau / s;
                if t > S::zero() && t < S::one() {
                    edges.push(t);
                }
            }
            edges.sort_by(|a, b| a.partial_cmp(b).expect("NaN edge"));
            edges.dedup_by(|a, b| (*a - *b).abs() < cast(1e-12));
        }
        let base = RuleTables::build(&edges, 32, &self.pool);
        let doubled = RuleTables::build(&edges, 64, &self.pool);
        let stiff = doubled.stiffness();
        (base, doubled, stiff)
    }

    /// Curvature matrices in the adapted frame at the rule nodes:
    /// `q_ab(node) = d_a^T (g R)(s * t_node) d_b`.
    fn q_at_nodes(&self, rule: &RuleTables<S>, s: S) -> Vec<Mat<S>> {
        rule.ts
            .iter()
            .map(|&t| {
                let gr = self.metric.scale_rows(&self.curvature.eval(s * t));
                self.frame.columns.transpose().mul(&gr).mul(&self.frame.columns)
            })
            .collect()
    }

    fn curvature_block(
        &self,
        rule: &RuleTables<S>,
        q: &[Mat<S>],
        da: usize,
        db: usize,
    ) -> Mat<S> {
        let fa = &self.per_dir[da];
        let fb = &self.per_dir[db];
        let mut out = Mat::zeros(fa.len(), fb.len());
        // skip identically vanishing couplings (diagonal curvature)
        let coupled = q.iter().any(|m| m.at(da, db) != S::zero());
        if !coupled {
            return out;
        }
        for (ia, &pa) in fa.iter().enumerate() {
            for (ib, &pb) in fb.iter().enumerate() {
                let mut acc = S::zero();
                for k in 0..rule.ts.len() {
                    acc += rule.ws[k] * q[k].at(da, db) * rule.fval[pa][k] * rule.fval[pb][k];
                }
                out[(ia, ib)] = acc;
            }
        }
        out
    }

    fn assemble_with(
        &self,
        s: S,
        check_quadrature: bool,
    ) -> Result<SymForm<S>, GalerkinError> {
        if s < S::zero() || s > S::one() {
            return Err(GalerkinError::ParameterOutOfRange(s.to_f64().unwrap_or(f64::NAN)));
        }
        let n = self.metric.dim();
        let owned;
        let (base, doubled, stiff) = match &self.cached {
            Some((b, d, st)) => (b, d, st),
            None => {
                owned = self.tables_for(s);
                (&owned.0, &owned.1, &owned.2)
            }
        };

        let mut matrix = Mat::zeros(self.dim, self.dim);
        // stiffness: g(d_a, d_a) * int f' g'  (directions are g-orthogonal)
        for d in 0..n {
            let sign = if self.frame.negative[d] { -S::one() } else { S::one() };
            let funcs = &self.per_dir[d];
            let off = self.offsets[d];
            for (i, &pi) in funcs.iter().enumerate() {
                for (j, &pj) in funcs.iter().enumerate() {
                    matrix[(off + i, off + j)] = sign * stiff.at(pi, pj);
                }
            }
        }

        // curvature term, with the doubled rule as the reference value
        if s > S::zero() {
            let s2 = s * s;
            let q64 = self.q_at_nodes(doubled, s);
            let q32 = if check_quadrature { Some(self.q_at_nodes(base, s)) } else { None };
            let mut defect = S::zero();
            for da in 0..n {
                for db in da..n {
                    let c64 = self.curvature_block(doubled, &q64, da, db);
                    if let Some(q32) = &q32 {
                        let c32 = self.curvature_block(base, q32, da, db);
                        defect = defect.max(c64.sub(&c32).scaled(s2).max_abs());
                    }
                    let (offa, offb) = (self.offsets[da], self.offsets[db]);
                    for i in 0..c64.rows() {
                        for j in 0..c64.cols() {
                            let v = s2 * c64.at(i, j);
                            matrix[(offa + i, offb + j)] += v;
                            if da != db {
                                matrix[(offb + j, offa + i)] += v;
                            }
                        }
                    }
                }
            }
            if defect > cast(tol::QUADRATURE) {
                return Err(GalerkinError::QuadratureNonconvergence {
                    defect: defect.to_f64().unwrap_or(f64::NAN),
                    limit: tol::QUADRATURE,
                });
            }

            // boundary term -s S(V(0), W(0)) on released pairs
            for da in 0..n {
                if !self.frame.released[da] {
                    continue;
                }
                for db in 0..n {
                    if !self.frame.released[db] {
                        continue;
                    }
                    let sab = self.frame.s_tilde.at(da, db);
                    if sab == S::zero() {
                        continue;
                    }
                    for (i, &pa) in self.per_dir[da].iter().enumerate() {
                        for (j, &pb) in self.per_dir[db].iter().enumerate() {
                            let va = self.pool[pa].at_zero::<S>();
                            let vb = self.pool[pb].at_zero::<S>();
                            if va != S::zero() && vb != S::zero() {
                                matrix[(self.offsets[da] + i, self.offsets[db] + j)] -=
                                    s * sab * va * vb;
                            }
                        }
                    }
                }
            }
        }

        Ok(SymForm::new(matrix)?)
    }

    /// Assembled matrix with the quadrature doubling check.
    pub fn assemble(&self, s: S) -> Result<SymForm<S>, GalerkinError> {
        self.assemble_with(s, true)
    }

    /// Assembly without the doubling comparison; used for refinement samples
    /// after the base grid has been validated.
    pub fn assemble_fast(&self, s: S) -> SymForm<S> {
        self.assemble_with(s, false).expect("assembly cannot fail after grid validation")
    }
}

/// One-shot assembly of the conjugate-case matrix at parameter `s`.
pub fn assemble<S: Scalar>(
    system: &MorseSturmSystem<S>,
    basis: BasisSpec,
    s: S,
) -> Result<SymForm<S>, GalerkinError> {
    GalerkinAssembler::new(system, None, basis)?.assemble(s)
}

/// One-shot assembly of the focal matrix at parameter `s`, including the
/// boundary term `-s S(V(0), W(0))` and the released directions.
pub fn assemble_focal<S: Scalar>(
    system: &MorseSturmSystem<S>,
    focal: &FocalBoundary<S>,
    basis: BasisSpec,
    s: S,
) -> Result<SymForm<S>, GalerkinError> {
    GalerkinAssembler::new(system, Some(focal), basis)?.assemble(s)
}

/// Sampled path of Galerkin matrices with splitting bookkeeping.
#[derive(Clone, Debug)]
pub struct GalerkinPath<S> {
    pub basis: BasisSpec,
    pub s_grid: Vec<S>,
    pub matrices: Vec<SymForm<S>>,
    /// Eigenvalues per sample, ascending; suitable for trajectory tables.
    pub eigenvalues: Vec<Vec<S>>,
    pub h_minus: Vec<usize>,
    pub h_plus: Vec<usize>,
    pub s_delta: Vec<usize>,
    pub dim: usize,
}

const SPLIT_CHECK: f64 = 1e-12;

/// Builds the matrix path on a uniform grid of `intervals + 1` samples,
/// validating the block structure of the `s = 0` form.
pub fn build_path<S: Scalar>(
    system: &MorseSturmSystem<S>,
    focal: Option<&FocalBoundary<S>>,
    basis: BasisSpec,
    intervals: usize,
) -> Result<GalerkinPath<S>, GalerkinError> {
    let assembler = GalerkinAssembler::new(system, focal, basis)?;
    build_path_with(&assembler, intervals)
}

/// Path construction from an existing assembler.
pub fn build_path_with<S: Scalar>(
    assembler: &GalerkinAssembler<S>,
    intervals: usize,
) -> Result<GalerkinPath<S>, GalerkinError> {
    let intervals = intervals.max(2);
    let s_grid: Vec<S> =
        (0..=intervals).map(|i| cast::<S>(i as f64 / intervals as f64)).collect();
    let mut matrices = Vec::with_capacity(s_grid.len());
    let mut eigenvalues = Vec::with_capacity(s_grid.len());
    for &s in &s_grid {
        let m = assembler.assemble(s)?;
        eigenvalues.push(linalg::eigen_sym(m.matrix()).values);
        matrices.push(m);
    }

    // s = 0: block diagonal with negative-definite H^- and positive-definite
    // H^+ blocks
    let m0 = &matrices[0];
    let scale = m0.matrix().max_abs().max(S::min_positive_value());
    let mut cross = S::zero();
    for &i in &assembler.h_minus {
        for &j in &assembler.h_plus {
            cross = cross.max(m0.matrix().at(i, j).abs());
        }
    }
    if cross / scale > cast(SPLIT_CHECK) {
        return Err(GalerkinError::SplitStructure((cross / scale).to_f64().unwrap_or(f64::NAN)));
    }
    let check_block = |idx: &[usize], want_negative: bool| -> bool {
        if idx.is_empty() {
            return true;
        }
        let sub = Mat::from_fn(idx.len(), idx.len(), |i, j| m0.matrix().at(idx[i], idx[j]));
        let counts = inertia_of(&sub, cast::<S>(tol::RANK) * scale);
        if want_negative {
            counts.n_minus == idx.len()
        } else {
            counts.n_plus == idx.len()
        }
    };
    if !check_block(&assembler.h_minus, true) || !check_block(&assembler.h_plus, false) {
        return Err(GalerkinError::SplitStructure(f64::NAN));
    }

    Ok(GalerkinPath {
        basis: assembler.basis,
        s_grid,
        matrices,
        eigenvalues,
        h_minus: assembler.h_minus.clone(),
        h_plus: assembler.h_plus.clone(),
        s_delta: assembler.s_delta.clone(),
        dim: assembler.dim,
    })
}

/// Spectral flow of the path plus the endpoint-inertia bookkeeping.
#[derive(Clone, Debug)]
pub struct PathFlowReport<S> {
    pub spectral_flow: i64,
    pub n_minus_start: usize,
    pub n_minus_end: usize,
    /// Dimension of the full negative block `H^-` (released functions
    /// included in the focal case).
    pub dim_h_minus: usize,
    /// `n_-(I_1) - dim H^-`; equals the (P-)Maslov index of the system.
    pub galerkin_maslov: i64,
    pub crossings: Vec<CrossingEvent<S>>,
}

/// Spectral flow of the conjugate-case path `s -> I_s` over `[0, 1]`.
pub fn path_spectral_flow<S: Scalar>(
    system: &MorseSturmSystem<S>,
    basis: BasisSpec,
    intervals: usize,
    tol_rank: S,
) -> Result<PathFlowReport<S>, GalerkinError> {
    let assembler = GalerkinAssembler::new(system, None, basis)?;
    let path = build_path_with(&assembler, intervals)?;
    path_flow_report(&assembler, &path, tol_rank)
}

/// Focal variant; the boundary term and released directions are included.
pub fn focal_path_spectral_flow<S: Scalar>(
    system: &MorseSturmSystem<S>,
    focal: &FocalBoundary<S>,
    basis: BasisSpec,
    intervals: usize,
    tol_rank: S,
) -> Result<PathFlowReport<S>, GalerkinError> {
    let assembler = GalerkinAssembler::new(system, Some(focal), basis)?;
    let path = build_path_with(&assembler, intervals)?;
    path_flow_report(&assembler, &path, tol_rank)
}

/// Shared spectral-flow driver over a prebuilt path: grid samples reuse the
/// stored eigenvalues, refinement samples assemble on demand.
pub fn path_flow_report<S: Scalar>(
    assembler: &GalerkinAssembler<S>,
    path: &GalerkinPath<S>,
    tol_rank: S,
) -> Result<PathFlowReport<S>, GalerkinError> {
    let last = path.eigenvalues.len() - 1;
    let scale = [0, last]
        .iter()
        .flat_map(|&i| path.eigenvalues[i].iter())
        .fold(S::zero(), |m, &v| m.max(v.abs()))
        .max(S::min_positive_value());
    let cut = tol_rank * scale;

    let count = |values: &[S]| -> Inertia {
        let mut n = Inertia { n_minus: 0, n_zero: 0, n_plus: 0 };
        for &v in values {
            if v < -cut {
                n.n_minus += 1;
            } else if v > cut {
                n.n_plus += 1;
            } else {
                n.n_zero += 1;
            }
        }
        n
    };
    for (which, idx) in [("start", 0usize), ("end", last)] {
        let c = count(&path.eigenvalues[idx]);
        if c.n_zero > 0 {
            return Err(GalerkinError::EndpointDegenerate {
                s: path.s_grid[idx].to_f64().unwrap_or(f64::NAN),
                n_zero: c.n_zero,
            });
        }
        let _ = which;
    }

    let classify = |s: S| -> Inertia {
        // exact grid hits reuse the precomputed spectra
        if let Some(i) = path.s_grid.iter().position(|&g| g == s) {
            return count(&path.eigenvalues[i]);
        }
        let m = assembler.assemble_fast(s);
        let eig = linalg::eigen_sym(m.matrix());
        count(&eig.values)
    };
    let sf = bilinear::spectral_flow_counts(classify, &path.s_grid)?;

    let n_minus_start = sf.start.n_minus;
    let n_minus_end = sf.end.n_minus;
    let dim_h_minus = path.h_minus.len();
    let galerkin_maslov = n_minus_end as i64 - dim_h_minus as i64;
    if galerkin_maslov != -sf.flow {
        return Err(GalerkinError::IdentityFailure { lhs: galerkin_maslov, rhs: -sf.flow });
    }
    Ok(PathFlowReport {
        spectral_flow: sf.flow,
        n_minus_start,
        n_minus_end,
        dim_h_minus,
        galerkin_maslov,
        crossings: sf.crossings,
    })
}

/// Relative index of the endpoint form `I_1` with respect to the negative
/// coordinate block; equals the Maslov index in the conjugate case.
pub fn relative_index_numeric<S: Scalar>(
    system: &MorseSturmSystem<S>,
    basis: BasisSpec,
    tol_rank: S,
) -> Result<RelativeIndex, GalerkinError> {
    let assembler = GalerkinAssembler::new(system, None, basis)?;
    relative_index_of_endpoint(&assembler, assembler.h_minus(), tol_rank)
}

/// Focal relative index, taken with respect to the endpoint-vanishing
/// negative block (the released boundary functions are not part of the
/// distribution subspace); equals P-Maslov plus `n_-(g|_P)`.
pub fn focal_relative_index<S: Scalar>(
    system: &MorseSturmSystem<S>,
    focal: &FocalBoundary<S>,
    basis: BasisSpec,
    tol_rank: S,
) -> Result<RelativeIndex, GalerkinError> {
    let assembler = GalerkinAssembler::new(system, Some(focal), basis)?;
    let delta = assembler.s_delta().to_vec();
    relative_index_of_endpoint(&assembler, &delta, tol_rank)
}

fn relative_index_of_endpoint<S: Scalar>(
    assembler: &GalerkinAssembler<S>,
    block: &[usize],
    tol_rank: S,
) -> Result<RelativeIndex, GalerkinError> {
    let form = assembler.assemble(S::one())?;
    let eig = linalg::eigen_sym(form.matrix());
    let scale = eig.values.iter().fold(S::zero(), |m, &v| m.max(v.abs())).max(S::min_positive_value());
    let degenerate = eig.values.iter().filter(|&&v| v.abs() <= tol_rank * scale).count();
    if degenerate > 0 {
        return Err(GalerkinError::EndpointDegenerate { s: 1.0, n_zero: degenerate });
    }
    let w = Subspace::coordinate(assembler.dim(), block);
    Ok(bilinear::relative_index(&form, &w, tol_rank)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morse_sturm::MetricForm;

    const PI: f64 = std::f64::consts::PI;
    const L15: f64 = 1.5 * PI;
    const L25: f64 = 2.5 * PI;

    fn system(diag: &[f64], r: &[f64]) -> MorseSturmSystem<f64> {
        MorseSturmSystem::new(
            MetricForm::new(diag.to_vec()).unwrap(),
            CurvatureCurve::constant_diag(r),
        )
        .unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (xs, ws) = gauss_legendre(32);
        // int_{-1}^{1} x^10 dx = 2/11
        let val: f64 = xs.iter().zip(&ws).map(|(&x, &w)| w * x.powi(10)).sum();
        assert!((val - 2.0 / 11.0).abs() < 1e-14);
        let total: f64 = ws.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_form_is_diagonal_for_sines() {
        // s = 0, n = 1, g = 1: diagonal entries (m pi)^2 / 2
        let sys = system(&[1.0], &[-(L15 * L15)]);
        let a = GalerkinAssembler::new(&sys, None, BasisSpec::sine(8)).unwrap();
        let m = a.assemble(0.0).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { ((i + 1) as f64 * PI).powi(2) / 2.0 } else { 0.0 };
                assert!((m.matrix().at(i, j) - want).abs() < 1e-10, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn sphere_endpoint_entries_are_mode_eigenvalues() {
        // s = 1: diagonal entries ((m pi)^2 - (1.5 pi)^2) / 2, one negative
        let sys = system(&[1.0], &[-(L15 * L15)]);
        let a = GalerkinAssembler::new(&sys, None, BasisSpec::sine(8)).unwrap();
        let m = a.assemble(1.0).unwrap();
        let mut negatives = 0;
        for i in 0..8 {
            let want = (((i + 1) as f64 * PI).powi(2) - L15 * L15) / 2.0;
            assert!((m.matrix().at(i, i) - want).abs() < 1e-9);
            if want < 0.0 {
                negatives += 1;
            }
        }
        assert_eq!(negatives, 1);
    }

    #[test]
    fn negative_direction_block_is_sign_flipped() {
        let sys2 = system(&[-1.0, 1.0], &[-(L15 * L15), -(L15 * L15)]);
        let sys1 = system(&[1.0], &[-(L15 * L15)]);
        let a2 = GalerkinAssembler::new(&sys2, None, BasisSpec::sine(6)).unwrap();
        let a1 = GalerkinAssembler::new(&sys1, None, BasisSpec::sine(6)).unwrap();
        let m2 = a2.assemble(1.0).unwrap();
        let m1 = a1.assemble(1.0).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert!((m2.matrix().at(i, j) + m1.matrix().at(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sphere_path_flow_across_sizes() {
        let sys = system(&[1.0], &[-(L15 * L15)]);
        for n in [16, 32, 64] {
            let r = path_spectral_flow(&sys, BasisSpec::sine(n), 64, 1e-8).unwrap();
            assert_eq!(r.spectral_flow, -1, "N = {n}");
            assert_eq!(r.n_minus_end, 1);
            assert_eq!(r.dim_h_minus, 0);
            assert_eq!(r.galerkin_maslov, 1);
        }
    }

    #[test]
    fn split_lorentzian_path_flow() {
        let sys = system(&[-1.0, 1.0], &[-(L15 * L15), -(L25 * L25)]);
        let r = path_spectral_flow(&sys, BasisSpec::sine(32), 128, 1e-8).unwrap();
        assert_eq!(r.spectral_flow, -1);
        assert_eq!(r.n_minus_end, 33);
        assert_eq!(r.dim_h_minus, 32);
        assert_eq!(r.galerkin_maslov, 1);
    }

    #[test]
    fn flat_path_flow_is_zero() {
        let sys = system(&[-1.0, 1.0], &[0.0, 0.0]);
        let r = path_spectral_flow(&sys, BasisSpec::sine(16), 64, 1e-8).unwrap();
        assert_eq!(r.spectral_flow, 0);
        assert!(r.crossings.is_empty());
    }

    #[test]
    fn relative_index_matches_maslov() {
        let sphere = system(&[1.0], &[-(L15 * L15)]);
        assert_eq!(relative_index_numeric(&sphere, BasisSpec::sine(32), 1e-8).unwrap().value, 1);
        let split = system(&[-1.0, 1.0], &[-(L15 * L15), -(L25 * L25)]);
        assert_eq!(relative_index_numeric(&split, BasisSpec::sine(32), 1e-8).unwrap().value, 1);
        let flat = system(&[-1.0, 1.0], &[0.0, 0.0]);
        assert_eq!(relative_index_numeric(&flat, BasisSpec::sine(16), 1e-8).unwrap().value, 0);
    }

    #[test]
    fn fem_basis_reports_the_same_integers() {
        let sys = system(&[-1.0, 1.0], &[-(L15 * L15), -(L25 * L25)]);
        let sine = path_spectral_flow(&sys, BasisSpec::sine(32), 64, 1e-8).unwrap();
        let fem = path_spectral_flow(&sys, BasisSpec::fem(32), 64, 1e-8).unwrap();
        assert_eq!(sine.spectral_flow, fem.spectral_flow);
        assert_eq!(sine.galerkin_maslov, fem.galerkin_maslov);
    }

    #[test]
    fn degenerate_endpoint_is_an_error() {
        // R = -pi^2 makes t = 1 conjugate: I_1 is singular in the sine basis
        let sys = system(&[1.0], &[-(PI * PI)]);
        assert!(matches!(
            path_spectral_flow(&sys, BasisSpec::sine(16), 64, 1e-8),
            Err(GalerkinError::EndpointDegenerate { .. })
        ));
    }

    #[test]
    fn time_dependent_curvature_assembles() {
        let sys = MorseSturmSystem::new(
            MetricForm::new(vec![1.0]).unwrap(),
            CurvatureCurve::DiagonalPolynomial(vec![vec![-10.0, -5.0, 2.0]]),
        )
        .unwrap();
        let r16 = path_spectral_flow(&sys, BasisSpec::sine(16), 64, 1e-8).unwrap();
        let r32 = path_spectral_flow(&sys, BasisSpec::sine(32), 64, 1e-8).unwrap();
        assert_eq!(r16.spectral_flow, r32.spectral_flow);
        let fem = path_spectral_flow(&sys, BasisSpec::fem(24), 64, 1e-8).unwrap();
        assert_eq!(fem.spectral_flow, r32.spectral_flow);
    }

    #[test]
    fn eigenvalue_trajectories_are_sorted() {
        let sys = system(&[1.0], &[-(L15 * L15)]);
        let path = build_path(&sys, None, BasisSpec::sine(8), 16).unwrap();
        for row in &path.eigenvalues {
            for w in row.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
        assert_eq!(path.s_grid.len(), 17);
    }
}
