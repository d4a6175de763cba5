//! Phase-I feasibility oracle for the lifted problem.
//!
//! Every scalar constraint touches only `X_i` and `Y_ii`, so the sparsity graph of `Z`
//! is a star of 4×4 cliques `[[I₃, X_i], [X_iᵀ, Y_ii]]` around the fixed block. By
//! chordal completion `Z ⪰ 0` is equivalent to each clique being PSD, which makes the
//! cone projection a handful of 4×4 eigendecompositions. `PsdSplitting::Dense` keeps the
//! full `(3+n)` matrix instead and exists mainly to cross-check the split form.
//!
//! The solver is an OSQP-style ADMM on `min t` subject to every inequality relaxed by
//! `t`. Feasibility and infeasibility are both certified rather than inferred from
//! residuals: a PSD-consistent candidate is scored exactly, and the linear duals give a
//! Lagrangian lower bound on the optimal slack.

use nalgebra::{DMatrix, Matrix4, SymmetricEigen, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::problem::{FeasibilityProblem, LiftedMatrix, Sense};
use crate::error::{invalid, Result};
use crate::swarm::Position3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PsdSplitting {
    #[default]
    Chordal,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleOptions {
    pub max_iterations: usize,
    /// Feasible once a PSD candidate violates nothing by more than this.
    pub tol_feas: f64,
    /// Infeasible once the dual bound on the phase-I slack reaches this.
    pub tol_infeas: f64,
    /// Give up when primal and dual residuals both fall below this without a certificate.
    pub tol_res: f64,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub check_every: usize,
    pub adapt_every: usize,
    /// Lower bound on the phase-I slack, keeps the dual bounded.
    pub t_cap: f64,
    pub splitting: PsdSplitting,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            max_iterations: 20_000,
            tol_feas: 1e-6,
            tol_infeas: 1e-4,
            tol_res: 1e-7,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            check_every: 10,
            adapt_every: 50,
            t_cap: 1.0,
            splitting: PsdSplitting::Chordal,
        }
    }
}

impl OracleOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.check_every == 0 || self.adapt_every == 0 {
            return Err(invalid("oracle", "iteration counts must be positive"));
        }
        if !(self.tol_feas > 0.0 && self.tol_infeas > self.tol_feas) {
            return Err(invalid("oracle", "need 0 < tol_feas < tol_infeas"));
        }
        if !(self.rho > 0.0 && self.sigma > 0.0 && self.t_cap > 0.0) {
            return Err(invalid("oracle", "rho, sigma and t_cap must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(invalid("oracle", "alpha must lie in (0, 2)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub status: FeasibilityStatus,
    /// Optimal phase-I slack estimate; `≤ 0` means feasible.
    pub phase1_slack: f64,
    /// Best certified upper bound on the slack (from a PSD candidate).
    pub upper_bound: f64,
    /// Best certified lower bound on the slack (from the duals); `None` before any
    /// dual candidate gave a finite bound.
    pub lower_bound: Option<f64>,
    pub iterations: usize,
    pub max_residual: f64,
    pub recovered_positions: Option<Vec<Position3>>,
    pub rank_gap: Option<f64>,
}

struct Row {
    node: usize,
    p: Vector3<f64>,
    /// `bound − ‖p‖²`
    rhs: f64,
    sense: Sense,
}

impl Row {
    fn tau(&self) -> f64 {
        match self.sense {
            Sense::Le => -1.0,
            Sense::Ge => 1.0,
        }
    }

    fn coeffs(&self) -> Vector4<f64> {
        Vector4::new(-2.0 * self.p[0], -2.0 * self.p[1], -2.0 * self.p[2], 1.0)
    }

    fn lo_hi(&self) -> (f64, f64) {
        match self.sense {
            Sense::Le => (f64::NEG_INFINITY, self.rhs),
            Sense::Ge => (self.rhs, f64::INFINITY),
        }
    }

    /// Violation at `(x, y)` without the slack column.
    fn violation(&self, x: &Vector3<f64>, y: f64) -> f64 {
        let v = -2.0 * self.p.dot(x) + y;
        match self.sense {
            Sense::Le => v - self.rhs,
            Sense::Ge => self.rhs - v,
        }
    }
}

/// Factorisation of `σI + ρ(D + AᵀA)`: block-arrow with 4×4 node blocks and a `t` corner.
struct KktFactor {
    inv: Vec<Matrix4<f64>>,
    w: Vec<Vector4<f64>>,
    c: Vec<Vector4<f64>>,
    schur: f64,
}

impl KktFactor {
    fn new(rows: &[Row], n: usize, rho: f64, sigma: f64) -> Self {
        let diag = Matrix4::from_diagonal(&Vector4::new(2.0, 2.0, 2.0, 1.0));
        let mut blocks = vec![Matrix4::identity() * sigma + diag * rho; n];
        let mut c = vec![Vector4::zeros(); n];
        let mut h_tt = sigma + rho;
        for r in rows {
            let a = r.coeffs();
            blocks[r.node] += a * a.transpose() * rho;
            c[r.node] += a * (rho * r.tau());
            h_tt += rho;
        }
        let inv: Vec<Matrix4<f64>> = blocks
            .iter()
            .map(|b| b.cholesky().expect("node block is positive definite").inverse())
            .collect();
        let w: Vec<Vector4<f64>> = inv.iter().zip(&c).map(|(bi, ci)| bi * ci).collect();
        let schur = h_tt - c.iter().zip(&w).map(|(ci, wi)| ci.dot(wi)).sum::<f64>();
        KktFactor { inv, w, c, schur }
    }

    fn solve(&self, rhs_nodes: &[Vector4<f64>], rhs_t: f64, out: &mut [Vector4<f64>]) -> f64 {
        let t = (rhs_t - self.w.iter().zip(rhs_nodes).map(|(w, r)| w.dot(r)).sum::<f64>()) / self.schur;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.inv[i] * (rhs_nodes[i] - self.c[i] * t);
        }
        t
    }
}

fn node_block(v: &Vector4<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for a in 0..3 {
        m[(a, 3)] = v[a];
        m[(3, a)] = v[a];
    }
    m[(3, 3)] = v[3];
    m
}

fn node_adjoint(m: &Matrix4<f64>) -> Vector4<f64> {
    Vector4::new(m[(0, 3)] + m[(3, 0)], m[(1, 3)] + m[(3, 1)], m[(2, 3)] + m[(3, 2)], m[(3, 3)])
}

fn z0_4() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0, 0.0))
}

fn project_psd4(m: &Matrix4<f64>) -> Matrix4<f64> {
    let eig = SymmetricEigen::new(*m);
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    eig.eigenvectors * Matrix4::from_diagonal(&clipped) * eig.eigenvectors.transpose()
}

fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose()
}

/// `A^{-1/2}` for a symmetric 3×3 block, if it is safely positive definite.
fn inv_sqrt3(a: &nalgebra::Matrix3<f64>) -> Option<nalgebra::Matrix3<f64>> {
    let eig = SymmetricEigen::new(*a);
    if eig.eigenvalues.min() <= 1e-10 {
        return None;
    }
    let d = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    Some(eig.eigenvectors * nalgebra::Matrix3::from_diagonal(&d) * eig.eigenvectors.transpose())
}

/// Restores the identity block of a PSD 4×4 clique by congruence; returns `(X_i, Y_ii)`.
fn normalize_clique(c: &Matrix4<f64>) -> Option<(Vector3<f64>, f64)> {
    let a = c.fixed_view::<3, 3>(0, 0).into_owned();
    let s = inv_sqrt3(&a)?;
    let b = c.fixed_view::<3, 1>(0, 3).into_owned();
    Some((s * b, c[(3, 3)]))
}

enum Cone {
    Chordal {
        z: Vec<Matrix4<f64>>,
        y: Vec<Matrix4<f64>>,
    },
    /// `w` holds the free off-diagonal `Y_ij`; its diagonal is unused.
    Dense {
        z: DMatrix<f64>,
        y: DMatrix<f64>,
        w: DMatrix<f64>,
    },
}

fn dense_lift(u: &[Vector4<f64>], w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = u.len();
    let mut m = DMatrix::zeros(3 + n, 3 + n);
    for i in 0..n {
        for a in 0..3 {
            m[(a, 3 + i)] = u[i][a];
            m[(3 + i, a)] = u[i][a];
        }
        for j in 0..n {
            m[(3 + i, 3 + j)] = if i == j { u[i][3] } else { w[(i, j)] };
        }
    }
    m
}

fn dense_z0(n: usize) -> DMatrix<f64> {
    let mut z0 = DMatrix::zeros(3 + n, 3 + n);
    z0.view_mut((0, 0), (3, 3)).fill_with_identity();
    z0
}

struct Candidate {
    x: Vec<Vector3<f64>>,
    y: Vec<f64>,
    t_up: f64,
}

/// ADMM state for one problem instance.
struct Phase1<'a> {
    opts: &'a OracleOptions,
    n: usize,
    rows: Vec<Row>,
    u: Vec<Vector4<f64>>,
    t: f64,
    z_lin: Vec<f64>,
    y_lin: Vec<f64>,
    /// Slack lower-bound row `t ≥ −t_cap`.
    z_cap: f64,
    y_cap: f64,
    cone: Cone,
    rho: f64,
    kkt: KktFactor,
}

impl<'a> Phase1<'a> {
    fn new(problem: &FeasibilityProblem, opts: &'a OracleOptions) -> Self {
        let n = problem.n_sub();
        let rows: Vec<Row> = problem
            .trace_constraints()
            .into_iter()
            .map(|c| Row {
                node: c.local_i,
                p: Vector3::from(c.anchor.0),
                rhs: c.bound - c.anchor.norm_squared(),
                sense: c.sense,
            })
            .collect();
        // warm start at the reported positions, rank three
        let u: Vec<Vector4<f64>> = problem
            .node_order
            .iter()
            .map(|id| {
                let p = Vector3::from(problem.reported_positions[id].0);
                Vector4::new(p[0], p[1], p[2], p.norm_squared())
            })
            .collect();
        let t = rows
            .iter()
            .map(|r| r.violation(&u[r.node].xyz(), u[r.node][3]))
            .fold(-opts.t_cap, f64::max);
        let z_lin = rows
            .iter()
            .map(|r| {
                let (lo, hi) = r.lo_hi();
                (r.coeffs().dot(&u[r.node]) + r.tau() * t).clamp(lo, hi)
            })
            .collect();
        let cone = match opts.splitting {
            PsdSplitting::Chordal => Cone::Chordal {
                z: u.iter().map(node_block).collect(),
                y: vec![Matrix4::zeros(); n],
            },
            PsdSplitting::Dense => {
                let mut w = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            w[(i, j)] = u[i].xyz().dot(&u[j].xyz());
                        }
                    }
                }
                Cone::Dense {
                    z: dense_lift(&u, &w),
                    y: DMatrix::zeros(3 + n, 3 + n),
                    w,
                }
            }
        };
        let kkt = KktFactor::new(&rows, n, opts.rho, opts.sigma);
        let nrows = rows.len();
        Phase1 {
            opts,
            n,
            rows,
            u,
            t,
            z_lin,
            y_lin: vec![0.0; nrows],
            z_cap: t,
            y_cap: 0.0,
            cone,
            rho: opts.rho,
            kkt,
        }
    }

    /// One relaxed ADMM sweep; returns `(primal residual, dual residual, scale terms)`.
    fn step(&mut self) -> (f64, f64, f64, f64) {
        let (rho, sigma, alpha) = (self.rho, self.opts.sigma, self.opts.alpha);
        let n = self.n;

        // right-hand side: σu − q + Lᵀ(ρ z − y) + Aᵀ(ρ z − y)
        let mut rhs: Vec<Vector4<f64>> = self.u.iter().map(|v| v * sigma).collect();
        let mut rhs_t = sigma * self.t - 1.0 + (rho * self.z_cap - self.y_cap);
        match &self.cone {
            Cone::Chordal { z, y } => {
                for i in 0..n {
                    rhs[i] += node_adjoint(&(z[i] * rho - y[i]));
                }
            }
            Cone::Dense { z, y, .. } => {
                for i in 0..n {
                    let mut v = Vector4::zeros();
                    for a in 0..3 {
                        v[a] = rho * (z[(a, 3 + i)] + z[(3 + i, a)]) - (y[(a, 3 + i)] + y[(3 + i, a)]);
                    }
                    v[3] = rho * z[(3 + i, 3 + i)] - y[(3 + i, 3 + i)];
                    rhs[i] += v;
                }
            }
        }
        for (k, r) in self.rows.iter().enumerate() {
            let s = rho * self.z_lin[k] - self.y_lin[k];
            rhs[r.node] += r.coeffs() * s;
            rhs_t += r.tau() * s;
        }
        let mut u_tilde = vec![Vector4::zeros(); n];
        let t_tilde = self.kkt.solve(&rhs, rhs_t, &mut u_tilde);

        let mut r_prim: f64 = 0.0;
        let mut ax_norm: f64 = 0.0;
        let mut aty_norm: f64 = 0.0;
        let mut dual = vec![Vector4::<f64>::zeros(); n];
        let mut dual_t = 1.0;

        // linear rows
        for (k, r) in self.rows.iter().enumerate() {
            let a_tilde = r.coeffs().dot(&u_tilde[r.node]) + r.tau() * t_tilde;
            let relaxed = alpha * a_tilde + (1.0 - alpha) * self.z_lin[k];
            let (lo, hi) = r.lo_hi();
            let z_new = (relaxed + self.y_lin[k] / rho).clamp(lo, hi);
            self.y_lin[k] += rho * (relaxed - z_new);
            self.z_lin[k] = z_new;
        }
        {
            let relaxed = alpha * t_tilde + (1.0 - alpha) * self.z_cap;
            let z_new = (relaxed + self.y_cap / rho).max(-self.opts.t_cap);
            self.y_cap += rho * (relaxed - z_new);
            self.z_cap = z_new;
        }

        // cone
        match &mut self.cone {
            Cone::Chordal { z, y } => {
                let z0 = z0_4();
                for i in 0..n {
                    let relaxed = node_block(&u_tilde[i]) * alpha + z[i] * (1.0 - alpha);
                    let z_new = project_psd4(&(relaxed + y[i] / rho + z0)) - z0;
                    y[i] += (relaxed - z_new) * rho;
                    z[i] = z_new;
                }
            }
            Cone::Dense { z, y, w } => {
                // off-diagonal Y entries only see the cone: (σ + 2ρ) w̃ = σw + 2(ρz − y)
                let mut w_tilde = w.clone();
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            let zz = rho * z[(3 + i, 3 + j)] - y[(3 + i, 3 + j)];
                            w_tilde[(i, j)] = (sigma * w[(i, j)] + 2.0 * zz) / (sigma + 2.0 * rho);
                        }
                    }
                }
                let relaxed = dense_lift(&u_tilde, &w_tilde) * alpha + &*z * (1.0 - alpha);
                let z0 = dense_z0(n);
                let z_new = project_psd(&(&relaxed + &*y / rho + &z0)) - &z0;
                *y += (&relaxed - &z_new) * rho;
                *z = z_new;
                *w = &w_tilde * alpha + &*w * (1.0 - alpha);
            }
        }

        for (u, ut) in self.u.iter_mut().zip(&u_tilde) {
            *u = *ut * alpha + *u * (1.0 - alpha);
        }
        self.t = alpha * t_tilde + (1.0 - alpha) * self.t;

        // residuals at the new iterate
        for (k, r) in self.rows.iter().enumerate() {
            let a = r.coeffs().dot(&self.u[r.node]) + r.tau() * self.t;
            r_prim = r_prim.max((a - self.z_lin[k]).abs());
            ax_norm = ax_norm.max(a.abs()).max(self.z_lin[k].abs());
            dual[r.node] += r.coeffs() * self.y_lin[k];
            dual_t += r.tau() * self.y_lin[k];
        }
        r_prim = r_prim.max((self.t - self.z_cap).abs());
        dual_t += self.y_cap;
        match &self.cone {
            Cone::Chordal { z, y } => {
                for i in 0..n {
                    let diff = node_block(&self.u[i]) - z[i];
                    r_prim = r_prim.max(diff.amax());
                    let adj = node_adjoint(&y[i]);
                    aty_norm = aty_norm.max(adj.amax());
                    dual[i] += adj;
                }
            }
            Cone::Dense { z, y, w } => {
                let diff = dense_lift(&self.u, w) - z;
                r_prim = r_prim.max(diff.amax());
                for i in 0..n {
                    let mut adj = Vector4::zeros();
                    for a in 0..3 {
                        adj[a] = y[(a, 3 + i)] + y[(3 + i, a)];
                    }
                    adj[3] = y[(3 + i, 3 + i)];
                    aty_norm = aty_norm.max(adj.amax());
                    dual[i] += adj;
                }
            }
        }
        let r_dual = dual.iter().map(|v| v.amax()).fold(dual_t.abs(), f64::max);
        (r_prim, r_dual, ax_norm.max(1e-12), aty_norm.max(1.0))
    }

    fn refactor(&mut self, rho: f64) {
        self.rho = rho;
        self.kkt = KktFactor::new(&self.rows, self.n, rho, self.opts.sigma);
    }

    fn max_violation(&self, x: &[Vector3<f64>], y: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.violation(&x[r.node], y[r.node]))
            .fold(-self.opts.t_cap, f64::max)
    }

    /// Best PSD-consistent candidate from the current iterate.
    fn candidate(&self) -> Candidate {
        // (a) primal iterate with Y_ii lifted onto the cone boundary if needed
        let xa: Vec<Vector3<f64>> = self.u.iter().map(|v| v.xyz()).collect();
        let ya: Vec<f64> = self.u.iter().zip(&xa).map(|(v, x)| v[3].max(x.norm_squared())).collect();
        let ta = self.max_violation(&xa, &ya);
        let mut best = Candidate { x: xa, y: ya, t_up: ta };

        // (b) projected cone variable, normalised back onto Z[0..3, 0..3] = I
        let z0 = z0_4();
        let cliques: Vec<Matrix4<f64>> = match &self.cone {
            Cone::Chordal { z, .. } => z.iter().map(|m| m + z0).collect(),
            Cone::Dense { z, .. } => (0..self.n)
                .map(|i| {
                    let mut c = Matrix4::zeros();
                    let idx = [0, 1, 2, 3 + i];
                    for (a, &ra) in idx.iter().enumerate() {
                        for (b, &rb) in idx.iter().enumerate() {
                            c[(a, b)] = z[(ra, rb)];
                        }
                    }
                    c + z0
                })
                .collect(),
        };
        let normalized: Option<Vec<(Vector3<f64>, f64)>> = cliques.iter().map(normalize_clique).collect();
        if let Some(parts) = normalized {
            let (xb, yb): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
            let yb: Vec<f64> = yb.iter().zip(&xb).map(|(y, x)| y.max(x.norm_squared())).collect();
            let tb = self.max_violation(&xb, &yb);
            if tb < best.t_up {
                best = Candidate { x: xb, y: yb, t_up: tb };
            }
        }
        best
    }

    /// Lagrangian lower bound on the optimal slack from the current linear duals.
    fn dual_bound(&self) -> f64 {
        let lam: Vec<f64> = self
            .rows
            .iter()
            .zip(&self.y_lin)
            .map(|(r, &y)| match r.sense {
                Sense::Le => y.max(0.0),
                Sense::Ge => (-y).max(0.0),
            })
            .collect();
        let lam = self.repair(lam);
        let total: f64 = lam.iter().sum();
        if total <= 0.0 {
            return -self.opts.t_cap;
        }
        let raw = self.dual_value(&lam, 1.0);
        let normalized = self.dual_value(&lam, 1.0 / total);
        raw.max(normalized)
    }

    /// Scales lower-sense multipliers so no node ends up with a negative `Y_ii` weight.
    fn repair(&self, mut lam: Vec<f64>) -> Vec<f64> {
        let mut upper = vec![0.0; self.n];
        let mut lower = vec![0.0; self.n];
        for (r, l) in self.rows.iter().zip(&lam) {
            match r.sense {
                Sense::Le => upper[r.node] += l,
                Sense::Ge => lower[r.node] += l,
            }
        }
        for (r, l) in self.rows.iter().zip(lam.iter_mut()) {
            if r.sense == Sense::Ge && lower[r.node] > upper[r.node] {
                *l *= (1.0 - 1e-9) * upper[r.node] / lower[r.node];
            }
        }
        lam
    }

    fn dual_value(&self, lam: &[f64], scale: f64) -> f64 {
        let total: f64 = lam.iter().sum::<f64>() * scale;
        if total > 1.0 + 1e-12 {
            return f64::NEG_INFINITY;
        }
        let mu = (1.0 - total).max(0.0);
        let mut weight = vec![0.0; self.n];
        let mut pull = vec![Vector3::zeros(); self.n];
        let mut constant = -mu * self.opts.t_cap;
        for (r, &l) in self.rows.iter().zip(lam) {
            let l = l * scale;
            if l == 0.0 {
                continue;
            }
            let s = match r.sense {
                Sense::Le => 1.0,
                Sense::Ge => -1.0,
            };
            // σλ(‖p‖² − 2pᵀx + y − bound) with rhs = bound − ‖p‖²
            constant -= s * l * r.rhs;
            weight[r.node] += s * l;
            pull[r.node] += r.p * (s * l);
        }
        for i in 0..self.n {
            let m2 = pull[i].norm_squared();
            if weight[i] > 0.0 {
                constant -= m2 / weight[i];
            } else if m2 > 0.0 {
                return f64::NEG_INFINITY;
            }
        }
        constant
    }
}

/// Decides feasibility of the lifted problem; see the module docs.
pub fn check_feasibility(problem: &FeasibilityProblem, opts: &OracleOptions) -> Result<OracleResult> {
    problem.validate()?;
    opts.validate()?;
    let mut st = Phase1::new(problem, opts);
    let mut lower = f64::NEG_INFINITY;
    let mut best = st.candidate();
    let mut iterations = 0;
    let mut residual = 0.0;

    let status = loop {
        if iterations % opts.check_every == 0 {
            let cand = st.candidate();
            if cand.t_up < best.t_up {
                best = cand;
            }
            if best.t_up <= opts.tol_feas {
                break FeasibilityStatus::Feasible;
            }
            lower = lower.max(st.dual_bound());
            if lower >= opts.tol_infeas {
                break FeasibilityStatus::Infeasible;
            }
            // optimum pinned inside the undecided band
            if best.t_up - lower <= 1e-3 * opts.tol_feas {
                break FeasibilityStatus::Unknown;
            }
        }
        if iterations >= opts.max_iterations {
            break FeasibilityStatus::Unknown;
        }
        let (r_prim, r_dual, ax, aty) = st.step();
        iterations += 1;
        residual = r_prim;
        if r_prim < opts.tol_res && r_dual < opts.tol_res && iterations % opts.check_every != 0 {
            // converged without a certificate: one last look, then stop
            let cand = st.candidate();
            if cand.t_up < best.t_up {
                best = cand;
            }
            lower = lower.max(st.dual_bound());
            break if best.t_up <= opts.tol_feas {
                FeasibilityStatus::Feasible
            } else if lower >= opts.tol_infeas {
                FeasibilityStatus::Infeasible
            } else {
                FeasibilityStatus::Unknown
            };
        }
        if iterations % opts.adapt_every == 0 {
            let ratio = ((r_prim / ax) / (r_dual / aty).max(1e-30)).sqrt();
            if !(0.2..=5.0).contains(&ratio) {
                st.refactor((st.rho * ratio).clamp(1e-6, 1e6));
            }
        }
    };

    let (recovered_positions, rank_gap, max_residual, slack) = match status {
        FeasibilityStatus::Feasible => {
            let positions: Vec<Position3> = best.x.iter().map(|x| Position3([x[0], x[1], x[2]])).collect();
            let slack: Vec<f64> = best
                .y
                .iter()
                .zip(&positions)
                .map(|(y, p)| (y - p.norm_squared()).max(0.0))
                .collect();
            let z = LiftedMatrix::from_positions_with_slack(&positions, &slack);
            let gap = z.rank_gap();
            let res = z.structural_residual();
            (Some(positions), gap, res, best.t_up)
        }
        FeasibilityStatus::Infeasible => (None, None, residual, lower),
        FeasibilityStatus::Unknown => (None, None, residual, st.t.clamp(lower, best.t_up)),
    };
    Ok(OracleResult {
        status,
        phase1_slack: slack,
        upper_bound: best.t_up,
        lower_bound: lower.is_finite().then_some(lower),
        iterations,
        max_residual,
        recovered_positions,
        rank_gap,
    })
}
