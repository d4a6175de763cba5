use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::attack::AttackedScenario;
use crate::error::{invalid, Error, Result};
use crate::suspect::default_pair_tolerance;
use crate::swarm::Position3;

/// Base bound ε on the squared displacement of a UAV from its report.
pub const BASE_EPSILON: f64 = 1e-6;
/// Default multiplier on ε, leaving room for position noise.
pub const DEFAULT_EPSILON_SCALE: f64 = 10.0;
pub const DEFAULT_STRICTNESS_MARGIN: f64 = 1e-9;

/// Knobs that turn a sub-network into a feasibility problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemParams {
    pub epsilon: f64,
    pub epsilon_scale: f64,
    pub strictness_margin: f64,
    /// Right-hand side of the distance-consistency constraint; `(d/2)²` when absent.
    #[serde(default)]
    pub pair_tolerance: Option<f64>,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            epsilon: BASE_EPSILON,
            epsilon_scale: DEFAULT_EPSILON_SCALE,
            strictness_margin: DEFAULT_STRICTNESS_MARGIN,
            pair_tolerance: None,
        }
    }
}

impl ProblemParams {
    /// `BASE_EPSILON` without the multiplier.
    pub fn unscaled() -> Self {
        ProblemParams {
            epsilon_scale: 1.0,
            ..Self::default()
        }
    }

    pub fn effective_epsilon(&self) -> f64 {
        self.epsilon * self.epsilon_scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintPair {
    pub i: usize,
    pub j: usize,
    pub r_hat: f64,
}

/// The relaxed localization feasibility problem over one sub-network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityProblem {
    pub node_order: Vec<usize>,
    pub reported_positions: BTreeMap<usize, Position3>,
    pub constraint_pairs: Vec<ConstraintPair>,
    pub comm_range: f64,
    pub epsilon: f64,
    pub strictness_margin: f64,
    pub pair_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `Tr(Ĝ_ij Z) ≤ d² − δ`
    Range,
    /// `Tr(Ĝ_ij Z) ≤ r̂_ij² + τ − δ`
    DeviationUpper,
    /// `Tr(Ĝ_ij Z) ≥ r̂_ij² − τ + δ`
    DeviationLower,
    /// `Tr(Ĝ_ii Z) ≤ ε`
    SelfAnchor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Le,
    Ge,
}

/// One scalar constraint `Tr(Ĝ_ij Z) {≤,≥} bound`, with `i`/`j` as local column indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConstraint {
    pub kind: ConstraintKind,
    pub sense: Sense,
    pub local_i: usize,
    pub anchor: Position3,
    pub bound: f64,
    pub global: (usize, usize),
}

impl TraceConstraint {
    /// `‖x − anchor‖² + s` where `s = Y_ii − ‖x‖²`, i.e. `Tr(Ĝ Z)` written on `(X_i, Y_ii)`.
    pub fn value(&self, x: &Position3, y_ii: f64) -> f64 {
        self.anchor.norm_squared() - 2.0 * self.anchor.dot(x) + y_ii
    }

    /// Positive when violated.
    pub fn violation(&self, x: &Position3, y_ii: f64) -> f64 {
        match self.sense {
            Sense::Le => self.value(x, y_ii) - self.bound,
            Sense::Ge => self.bound - self.value(x, y_ii),
        }
    }
}

impl FeasibilityProblem {
    pub fn n_sub(&self) -> usize {
        self.node_order.len()
    }

    pub fn dimension(&self) -> usize {
        3 + self.n_sub()
    }

    pub fn local_index(&self, id: usize) -> Option<usize> {
        self.node_order.binary_search(&id).ok()
    }

    /// Scalar constraints plus the identity block: `3·|pairs| + n_sub + 1`.
    pub fn constraint_count(&self) -> usize {
        3 * self.constraint_pairs.len() + self.n_sub() + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_order.is_empty() {
            return Err(Error::EmptySubNetwork);
        }
        if self.node_order.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("node_order", "must be strictly ascending"));
        }
        for id in &self.node_order {
            let p = self
                .reported_positions
                .get(id)
                .ok_or_else(|| invalid("reported_positions", format!("missing uav {id}")))?;
            if !p.is_finite() {
                return Err(invalid("reported_positions", format!("non-finite position for {id}")));
            }
        }
        for c in &self.constraint_pairs {
            if self.local_index(c.i).is_none() || self.local_index(c.j).is_none() {
                return Err(invalid("constraint_pairs", format!("({}, {}) leaves the sub-network", c.i, c.j)));
            }
            if c.i == c.j || !(c.r_hat > 0.0 && c.r_hat.is_finite()) {
                return Err(invalid("constraint_pairs", format!("bad pair ({}, {})", c.i, c.j)));
            }
        }
        if !(self.epsilon >= 0.0) {
            return Err(invalid("epsilon", "must be nonnegative"));
        }
        if !(self.strictness_margin > 0.0) {
            return Err(invalid("strictness_margin", "must be positive"));
        }
        if !(self.comm_range > 0.0) {
            return Err(invalid("comm_range", "must be positive"));
        }
        if !(self.pair_tolerance > 0.0) {
            return Err(invalid("pair_tolerance", "must be positive"));
        }
        Ok(())
    }

    /// The scalar constraint list, with `α_ij` already substituted by `Tr(Ĝ_ij Z)`.
    pub fn trace_constraints(&self) -> Vec<TraceConstraint> {
        let d2 = self.comm_range * self.comm_range;
        let delta = self.strictness_margin;
        let tau = self.pair_tolerance;
        let mut out = Vec::with_capacity(3 * self.constraint_pairs.len() + self.n_sub());
        for c in &self.constraint_pairs {
            let local_i = self.local_index(c.i).expect("validated pair");
            let anchor = self.reported_positions[&c.j];
            let r2 = c.r_hat * c.r_hat;
            for (kind, sense, bound) in [
                (ConstraintKind::Range, Sense::Le, d2 - delta),
                (ConstraintKind::DeviationUpper, Sense::Le, r2 + tau - delta),
                (ConstraintKind::DeviationLower, Sense::Ge, r2 - tau + delta),
            ] {
                out.push(TraceConstraint {
                    kind,
                    sense,
                    local_i,
                    anchor,
                    bound,
                    global: (c.i, c.j),
                });
            }
        }
        for (local_i, id) in self.node_order.iter().enumerate() {
            out.push(TraceConstraint {
                kind: ConstraintKind::SelfAnchor,
                sense: Sense::Le,
                local_i,
                anchor: self.reported_positions[id],
                bound: self.epsilon,
                global: (*id, *id),
            });
        }
        out
    }

    /// Largest violation of a candidate given as per-node `(x_i, Y_ii)`; negative means slack.
    pub fn max_violation(&self, x: &[Position3], y_diag: &[f64]) -> f64 {
        self.trace_constraints()
            .iter()
            .map(|c| c.violation(&x[c.local_i], y_diag[c.local_i]))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Dense export for cross-checking with an external SDP solver.
    pub fn dump(&self) -> ProblemDump {
        let n = self.n_sub();
        let constraints = self
            .trace_constraints()
            .into_iter()
            .map(|c| DumpConstraint {
                kind: c.kind,
                sense: c.sense,
                i: c.global.0,
                j: c.global.1,
                bound: c.bound,
                matrix: ghat(&c.anchor, c.local_i, n)
                    .expect("local index in range")
                    .0
                    .transpose()
                    .as_slice()
                    .to_vec(),
            })
            .collect();
        ProblemDump {
            dimension: self.dimension(),
            node_order: self.node_order.clone(),
            fixed_block: DMatrix::<f64>::identity(3, 3).as_slice().to_vec(),
            constraints,
        }
    }
}

/// `find Z ⪰ 0` with `Z[0..3, 0..3] = I` and every record `⟨G, Z⟩ {le,ge} bound`.
/// Matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDump {
    pub dimension: usize,
    pub node_order: Vec<usize>,
    pub fixed_block: Vec<f64>,
    pub constraints: Vec<DumpConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpConstraint {
    pub kind: ConstraintKind,
    pub sense: Sense,
    pub i: usize,
    pub j: usize,
    pub bound: f64,
    pub matrix: Vec<f64>,
}

/// Builds the problem for `sub_ids`: every directed measurement with both ends inside.
pub fn assemble(
    sub_ids: &BTreeSet<usize>,
    scenario: &AttackedScenario,
    params: &ProblemParams,
) -> Result<FeasibilityProblem> {
    if sub_ids.is_empty() {
        return Err(Error::EmptySubNetwork);
    }
    let n = scenario.n();
    if let Some(&id) = sub_ids.iter().find(|&&id| id >= n) {
        return Err(Error::IdOutOfRange { id, n });
    }
    let d = scenario.comm_range();
    let node_order: Vec<usize> = sub_ids.iter().copied().collect();
    let reported_positions = node_order
        .iter()
        .map(|&id| (id, scenario.swarm.reported(id)))
        .collect();
    let constraint_pairs = sub_ids
        .iter()
        .flat_map(|&i| {
            scenario
                .measurements
                .outgoing(i)
                .filter(|(j, _)| sub_ids.contains(j))
                .map(move |(j, r_hat)| ConstraintPair { i, j, r_hat })
        })
        .collect();
    let problem = FeasibilityProblem {
        node_order,
        reported_positions,
        constraint_pairs,
        comm_range: d,
        epsilon: params.effective_epsilon(),
        strictness_margin: params.strictness_margin,
        pair_tolerance: params.pair_tolerance.unwrap_or_else(|| default_pair_tolerance(d)),
    };
    problem.validate()?;
    Ok(problem)
}

/// `Ĝ_ij = [x̂_j; −e_i][x̂_jᵀ  −e_iᵀ]`, of size `3 + n_sub`.
#[derive(Debug, Clone, PartialEq)]
pub struct GhatMatrix(pub DMatrix<f64>);

pub fn ghat(x_hat_j: &Position3, i: usize, n_sub: usize) -> Result<GhatMatrix> {
    if i >= n_sub {
        return Err(Error::IdOutOfRange { id: i, n: n_sub });
    }
    let mut v = DVector::zeros(3 + n_sub);
    v.fixed_rows_mut::<3>(0).copy_from_slice(&x_hat_j.0);
    v[3 + i] = -1.0;
    Ok(GhatMatrix(&v * v.transpose()))
}

impl GhatMatrix {
    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn rank(&self) -> usize {
        self.0.rank(1e-12)
    }
}

/// `Z = [[I₃, X], [Xᵀ, Y]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedMatrix(pub DMatrix<f64>);

impl LiftedMatrix {
    /// The rank-three lifting of explicit positions, `Y = XᵀX`.
    pub fn from_positions(positions: &[Position3]) -> Self {
        let slack = vec![0.0; positions.len()];
        Self::from_positions_with_slack(positions, &slack)
    }

    /// `Y = XᵀX + diag(slack)`; PSD whenever every slack is nonnegative.
    pub fn from_positions_with_slack(positions: &[Position3], slack: &[f64]) -> Self {
        let n = positions.len();
        let mut z = DMatrix::zeros(3 + n, 3 + n);
        z.view_mut((0, 0), (3, 3)).fill_with_identity();
        for (i, p) in positions.iter().enumerate() {
            for a in 0..3 {
                z[(a, 3 + i)] = p.0[a];
                z[(3 + i, a)] = p.0[a];
            }
            for (j, q) in positions.iter().enumerate() {
                z[(3 + i, 3 + j)] = p.dot(q);
            }
            z[(3 + i, 3 + i)] += slack[i];
        }
        LiftedMatrix(z)
    }

    pub fn dimension(&self) -> usize {
        self.0.nrows()
    }

    /// `Tr(Ĝ Z)`.
    pub fn trace_with(&self, g: &GhatMatrix) -> f64 {
        g.0.component_mul(&self.0).sum()
    }

    pub fn positions(&self) -> Vec<Position3> {
        (3..self.dimension())
            .map(|c| Position3([self.0[(0, c)], self.0[(1, c)], self.0[(2, c)]]))
            .collect()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// `λ₄ / λ₃`; zero means the relaxation is tight (rank three).
    pub fn rank_gap(&self) -> Option<f64> {
        let ev = self.eigenvalues();
        (ev.len() >= 4 && ev[2] > 0.0).then(|| ev[3].max(0.0) / ev[2])
    }

    /// `max(−λ_min, asymmetry, identity-block error)`.
    pub fn structural_residual(&self) -> f64 {
        let z = &self.0;
        let asym = (z - z.transpose()).abs().max();
        let block = (z.view((0, 0), (3, 3)) - DMatrix::<f64>::identity(3, 3)).abs().max();
        let min_eig = self.eigenvalues().last().copied().unwrap_or(0.0);
        asym.max(block).max(-min_eig).max(0.0)
    }
}
