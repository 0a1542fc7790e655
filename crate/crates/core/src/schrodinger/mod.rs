//! Crank–Nicolson solver for `i∂_t u + Δ_A u + V u = F` on a Cartesian grid,
//! with Dirichlet data on the boundary rows.
//!
//! The covariant Laplacian uses link variables: the edge from `p` to
//! `q = p + h e_j` carries `exp(h A_j)` evaluated at the edge midpoint, so
//! `(Δ_A u)_p = c⁻² Σ_q (L_{pq} u_q − u_p) / h²`. Links in opposite directions
//! are adjoint, which makes the operator self-adjoint in the `c²`-weighted
//! inner product whenever `A` is skew-Hermitian and `V` Hermitian.

mod banded;
mod dtn;
mod energy;

pub use banded::{BandLu, BandMatrix};
pub use dtn::{dtn_from_solution, dtn_map, DtNRecord};
pub use energy::{energy_report, EnergyReport, Ratio};

use crate::bundle::{ConnectionForm, Potential};
use crate::geometry::Metric;
use crate::linalg::{expm, identity, random_unit_vector};
use crate::{CMat, CVec, Error, Point, Result, C64, I};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Space-time field `(t, x) ↦ u`.
pub type Field<'a> = &'a (dyn Fn(f64, Point) -> CVec + Sync);

/// Computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// `[0,1]²`.
    Square,
    /// Unit disk, embedded in `[−1,1]²` with a staircase boundary.
    Disk,
}

/// Grid and time stepping.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub domain: Domain,
    /// Cells per side of the bounding square.
    pub cells: usize,
    pub horizon: f64,
    pub steps: usize,
    pub metric: Metric,
}

impl Discretization {
    pub fn square(cells: usize, horizon: f64, steps: usize) -> Self {
        Self { domain: Domain::Square, cells, horizon, steps, metric: Metric::flat() }
    }

    pub fn disk(cells: usize, horizon: f64, steps: usize) -> Self {
        Self { domain: Domain::Disk, cells, horizon, steps, metric: Metric::flat() }
    }

    /// Time steps tied to the spacing: `Δt ≈ ratio · h`.
    pub fn with_proportional_steps(mut self, ratio: f64) -> Self {
        self.steps = ((self.horizon / (ratio * self.spacing())).ceil() as usize).max(1);
        self
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn spacing(&self) -> f64 {
        match self.domain {
            Domain::Square => 1.0 / self.cells as f64,
            Domain::Disk => 2.0 / self.cells as f64,
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    fn validate(&self) -> Result<()> {
        if self.cells < 4 {
            return Err(Error::Invalid(format!("need at least 4 cells per side, got {}", self.cells)));
        }
        if self.steps == 0 || !(self.horizon > 0.0) {
            return Err(Error::Invalid("horizon and step count must be positive".into()));
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<Mesh> {
        self.validate()?;
        Ok(Mesh::new(self.domain, self.cells))
    }
}

/// Role of a grid node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Unknown, with its index among interior nodes.
    Interior(usize),
    /// Dirichlet node adjacent to the interior.
    Boundary,
    Exterior,
}

/// Node layout of the bounding square; nodes are numbered row by row.
#[derive(Debug, Clone)]
pub struct Mesh {
    domain: Domain,
    cells: usize,
    spacing: f64,
    origin: Point,
    kinds: Vec<NodeKind>,
    interior: Vec<usize>,
}

impl Mesh {
    fn new(domain: Domain, cells: usize) -> Self {
        let side = cells + 1;
        let (spacing, origin) = match domain {
            Domain::Square => (1.0 / cells as f64, Point::zeros()),
            Domain::Disk => (2.0 / cells as f64, Point::new(-1.0, -1.0)),
        };
        let mut mesh = Self { domain, cells, spacing, origin, kinds: vec![NodeKind::Exterior; side * side], interior: Vec::new() };
        for node in 0..side * side {
            let (i, j) = mesh.coords(node);
            let inside = match domain {
                Domain::Square => i > 0 && j > 0 && i < cells && j < cells,
                Domain::Disk => mesh.position(node).norm() < 1.0 - 1e-12,
            };
            if inside {
                mesh.kinds[node] = NodeKind::Interior(mesh.interior.len());
                mesh.interior.push(node);
            }
        }
        for k in 0..mesh.interior.len() {
            for q in mesh.neighbours(mesh.interior[k]) {
                if mesh.kinds[q] == NodeKind::Exterior {
                    mesh.kinds[q] = NodeKind::Boundary;
                }
            }
        }
        mesh
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn side(&self) -> usize {
        self.cells + 1
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.side() + i
    }

    pub fn coords(&self, node: usize) -> (usize, usize) {
        (node % self.side(), node / self.side())
    }

    pub fn position(&self, node: usize) -> Point {
        let (i, j) = self.coords(node);
        self.origin + Point::new(i as f64, j as f64) * self.spacing
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&n| self.kinds[n] == NodeKind::Boundary)
    }

    /// Neighbours of an interior node in the order `+x, −x, +y, −y`.
    fn neighbours(&self, node: usize) -> [usize; 4] {
        let s = self.side();
        [node + 1, node - 1, node + s, node - s]
    }
}

/// Closed-form Dirichlet data `f = φ(t) b(x) e^{i(k·x − ωt)} w` with
/// `φ(t) = sin⁴(πt / 2T)`, so `f` and its first three time derivatives
/// vanish at `t = 0`.
///
/// On the square `b = 64[(x(1−x))³ + (y(1−y))³]` vanishes to third order at
/// the corners; on the disk `b ≡ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub vector: CVec,
    pub wave: Point,
    pub frequency: f64,
    pub horizon: f64,
    pub domain: Domain,
}

impl BoundaryData {
    pub fn zero(rank: usize, domain: Domain, horizon: f64) -> Self {
        Self { vector: CVec::zeros(rank), wave: Point::zeros(), frequency: 0.0, horizon, domain }
    }

    pub fn random<R: Rng>(rng: &mut R, rank: usize, domain: Domain, horizon: f64) -> Self {
        Self {
            vector: random_unit_vector(rng, rank),
            wave: Point::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
            frequency: rng.gen_range(1.0..4.0),
            horizon,
            domain,
        }
    }

    pub fn rank(&self) -> usize {
        self.vector.len()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { vector: &self.vector * C64::from(s), ..self.clone() }
    }

    pub fn eval(&self, t: f64, x: Point) -> CVec {
        let ramp = (std::f64::consts::FRAC_PI_2 * t / self.horizon).sin().powi(4);
        let shape = match self.domain {
            Domain::Square => 64.0 * ((x.x * (1.0 - x.x)).powi(3) + (x.y * (1.0 - x.y)).powi(3)),
            Domain::Disk => 1.0,
        };
        let phase = C64::from_polar(ramp * shape, self.wave.dot(&x) - self.frequency * t);
        &self.vector * phase
    }
}

/// Inputs of one solve; absent entries are zero.
#[derive(Clone, Copy, Default)]
pub struct Sources<'a> {
    pub boundary: Option<Field<'a>>,
    pub source: Option<Field<'a>>,
    pub initial: Option<&'a (dyn Fn(Point) -> CVec + Sync)>,
}

/// Discrete operator `L = Δ_A + V` on a fixed mesh.
pub struct Scheme<'a> {
    disc: Discretization,
    mesh: Mesh,
    weights: Vec<f64>,
    a: &'a dyn ConnectionForm,
    v: &'a dyn Potential,
    rank: usize,
}

/// `V_p` and the four links of every interior node at one time.
struct Frozen {
    potential: Vec<CMat>,
    links: Vec<[CMat; 4]>,
}

impl<'a> Scheme<'a> {
    pub fn new(disc: &Discretization, a: &'a dyn ConnectionForm, v: &'a dyn Potential) -> Result<Self> {
        if a.rank() != v.rank() {
            return Err(Error::Invalid("connection and potential ranks differ".into()));
        }
        let mesh = disc.mesh()?;
        let weights = (0..mesh.len()).map(|n| disc.metric.factor_at(mesh.position(n)).powi(2)).collect();
        Ok(Self { disc: disc.clone(), mesh, weights, a, v, rank: a.rank() })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    fn freeze(&self, t: f64) -> Frozen {
        let h = self.mesh.spacing;
        let mut potential = Vec::with_capacity(self.mesh.interior.len());
        let mut links = Vec::with_capacity(self.mesh.interior.len());
        for &p in &self.mesh.interior {
            let x = self.mesh.position(p);
            potential.push(self.v.value(t, x));
            links.push(std::array::from_fn(|d| {
                let (j, s) = (d / 2, if d % 2 == 0 { 1.0 } else { -1.0 });
                let mut mid = x;
                mid[j] += 0.5 * s * h;
                expm(&(&self.a.components(t, mid)[j] * C64::from(s * h)))
            }));
        }
        Frozen { potential, links }
    }

    fn block(&self, u: &[C64], node: usize) -> CVec {
        CVec::from_column_slice(&u[node * self.rank..(node + 1) * self.rank])
    }

    fn apply_frozen(&self, op: &Frozen, u: &[C64]) -> Vec<C64> {
        let n = self.rank;
        let inv_h2 = self.mesh.spacing.powi(-2);
        let mut out = vec![C64::from(0.0); u.len()];
        for (k, &p) in self.mesh.interior.iter().enumerate() {
            let up = self.block(u, p);
            let mut acc = CVec::zeros(n);
            for (d, q) in self.mesh.neighbours(p).into_iter().enumerate() {
                acc += &op.links[k][d] * self.block(u, q) - &up;
            }
            let lp = acc * C64::from(inv_h2 / self.weights[p]) + &op.potential[k] * &up;
            out[p * n..(p + 1) * n].copy_from_slice(lp.as_slice());
        }
        out
    }

    /// `L u` at time `t` on interior nodes; boundary values of `u` enter as data.
    pub fn apply(&self, t: f64, u: &[C64]) -> Result<Vec<C64>> {
        self.check_len(u)?;
        Ok(self.apply_frozen(&self.freeze(t), u))
    }

    fn check_len(&self, u: &[C64]) -> Result<()> {
        if u.len() != self.mesh.len() * self.rank {
            return Err(Error::Invalid(format!("state has length {}, expected {}", u.len(), self.mesh.len() * self.rank)));
        }
        Ok(())
    }

    /// `Σ_p h² c_p² v_p* u_p` over interior nodes.
    pub fn inner(&self, u: &[C64], v: &[C64]) -> C64 {
        let n = self.rank;
        let h2 = self.mesh.spacing.powi(2);
        self.mesh
            .interior
            .iter()
            .map(|&p| {
                let s: C64 = (0..n).map(|c| v[p * n + c].conj() * u[p * n + c]).sum();
                s * (h2 * self.weights[p])
            })
            .sum()
    }

    pub fn norm(&self, u: &[C64]) -> f64 {
        self.inner(u, u).re.max(0.0).sqrt()
    }

    fn sample(&self, f: impl Fn(usize, Point) -> Option<CVec>) -> Result<Vec<C64>> {
        let n = self.rank;
        let mut out = vec![C64::from(0.0); self.mesh.len() * n];
        for node in 0..self.mesh.len() {
            if let Some(val) = f(node, self.mesh.position(node)) {
                if val.len() != n {
                    return Err(Error::Invalid(format!("field has rank {}, expected {n}", val.len())));
                }
                out[node * n..(node + 1) * n].copy_from_slice(val.as_slice());
            }
        }
        Ok(out)
    }

    fn half_bandwidth(&self) -> usize {
        let n = self.rank;
        let mut span = 0;
        for (k, &p) in self.mesh.interior.iter().enumerate() {
            for q in self.mesh.neighbours(p) {
                if let NodeKind::Interior(l) = self.mesh.kinds[q] {
                    span = span.max(k.abs_diff(l));
                }
            }
        }
        span * n + n - 1
    }

    fn system(&self, op: &Frozen, alpha: f64, half: usize) -> BandMatrix {
        let n = self.rank;
        let inv_h2 = self.mesh.spacing.powi(-2);
        let mut m = BandMatrix::zeros(self.mesh.interior.len() * n, half);
        for (k, &p) in self.mesh.interior.iter().enumerate() {
            let w = inv_h2 / self.weights[p];
            let diag = identity(n) * C64::from(1.0) + identity(n) * (I * alpha * 4.0 * w) - &op.potential[k] * (I * alpha);
            for r in 0..n {
                for c in 0..n {
                    m.add(k * n + r, k * n + c, diag[(r, c)]);
                }
            }
            for (d, q) in self.mesh.neighbours(p).into_iter().enumerate() {
                if let NodeKind::Interior(l) = self.mesh.kinds[q] {
                    let blk = &op.links[k][d] * (-I * alpha * w);
                    for r in 0..n {
                        for c in 0..n {
                            m.add(k * n + r, l * n + c, blk[(r, c)]);
                        }
                    }
                }
            }
        }
        m
    }

    /// Crank–Nicolson march from `t = 0` to the horizon. The operator is
    /// frozen at each half step; the factorisation is reused while the
    /// assembled system is unchanged.
    pub fn solve(&self, sources: &Sources<'_>) -> Result<Solution> {
        let n = self.rank;
        let dt = self.disc.dt();
        let alpha = 0.5 * dt;
        let inv_h2 = self.mesh.spacing.powi(-2);
        let half = self.half_bandwidth();
        let boundary_at = |t: f64| {
            self.sample(|node, x| match (self.mesh.kinds[node], sources.boundary) {
                (NodeKind::Boundary, Some(f)) => Some(f(t, x)),
                _ => None,
            })
        };
        let mut u = boundary_at(0.0)?;
        if let Some(u0) = sources.initial {
            let interior = self.sample(|node, x| matches!(self.mesh.kinds[node], NodeKind::Interior(_)).then(|| u0(x)))?;
            for (a, b) in u.iter_mut().zip(interior) {
                *a += b;
            }
        }
        let mut states = vec![u.clone()];
        let mut cached: Option<(BandMatrix, BandLu)> = None;
        for step in 0..self.disc.steps {
            let t1 = (step + 1) as f64 * dt;
            let tm = (step as f64 + 0.5) * dt;
            let op = self.freeze(tm);
            let m = self.system(&op, alpha, half);
            if cached.as_ref().map_or(true, |(prev, _)| *prev != m) {
                let lu = m.clone().factor()?;
                cached = Some((m, lu));
            }
            let lu = &cached.as_ref().expect("factorisation present").1;
            let lu_n = self.apply_frozen(&op, &u);
            let mut next = boundary_at(t1)?;
            let mut rhs = vec![C64::from(0.0); self.mesh.interior.len() * n];
            for (k, &p) in self.mesh.interior.iter().enumerate() {
                let x = self.mesh.position(p);
                let mut r = self.block(&u, p) + self.block(&lu_n, p) * (I * alpha);
                for (d, q) in self.mesh.neighbours(p).into_iter().enumerate() {
                    if self.mesh.kinds[q] == NodeKind::Boundary {
                        r += &op.links[k][d] * self.block(&next, q) * (I * alpha * inv_h2 / self.weights[p]);
                    }
                }
                if let Some(f) = sources.source {
                    r -= f(tm, x) * (I * dt);
                }
                rhs[k * n..(k + 1) * n].copy_from_slice(r.as_slice());
            }
            lu.solve(&mut rhs);
            for (k, &p) in self.mesh.interior.iter().enumerate() {
                next[p * n..(p + 1) * n].copy_from_slice(&rhs[k * n..(k + 1) * n]);
            }
            if next.iter().any(|z| !z.is_finite()) {
                return Err(Error::LinearSolve(format!("non-finite state after step {}", step + 1)));
            }
            u = next;
            states.push(u.clone());
        }
        Ok(Solution {
            mesh: self.mesh.clone(),
            rank: n,
            dt,
            times: (0..=self.disc.steps).map(|k| k as f64 * dt).collect(),
            weights: self.weights.clone(),
            states,
        })
    }
}

/// Discrete solution on the space-time grid; `states[k]` holds every node
/// (boundary rows included) at `times[k]`.
#[derive(Debug, Clone)]
pub struct Solution {
    pub mesh: Mesh,
    pub rank: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    weights: Vec<f64>,
}

impl Solution {
    pub fn value(&self, k: usize, node: usize) -> CVec {
        CVec::from_column_slice(&self.states[k][node * self.rank..(node + 1) * self.rank])
    }

    /// `c²`-weighted `L²` norm over interior nodes.
    pub fn norm(&self, k: usize) -> f64 {
        self.weighted_sum(|p| self.value(k, p).norm_squared()).sqrt()
    }

    pub(crate) fn weight(&self, node: usize) -> f64 {
        self.weights[node]
    }

    pub(crate) fn weighted_sum(&self, f: impl Fn(usize) -> f64) -> f64 {
        let h2 = self.mesh.spacing.powi(2);
        self.mesh.interior.iter().map(|&p| h2 * self.weights[p] * f(p)).sum()
    }

    /// Weighted `L²` distance to a closed-form field at `times[k]`.
    pub fn error(&self, k: usize, exact: Field<'_>) -> f64 {
        let t = self.times[k];
        self.weighted_sum(|p| (self.value(k, p) - exact(t, self.mesh.position(p))).norm_squared()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.states.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// CSV `t,x,y,component,re,im` of interior and boundary nodes at `times[k]`.
    pub fn write_state_csv<W: Write>(&self, k: usize, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,y,component,re,im")?;
        for node in 0..self.mesh.len() {
            if self.mesh.kinds[node] == NodeKind::Exterior {
                continue;
            }
            let x = self.mesh.position(node);
            for c in 0..self.rank {
                let z = self.states[k][node * self.rank + c];
                writeln!(w, "{},{},{},{},{:.12e},{:.12e}", self.times[k], x.x, x.y, c, z.re, z.im)?;
            }
        }
        Ok(())
    }
}

/// Dirichlet problem with zero initial state and no source.
pub fn solve_ibvp(a: &dyn ConnectionForm, v: &dyn Potential, f: &BoundaryData, disc: &Discretization) -> Result<Solution> {
    if f.rank() != a.rank() {
        return Err(Error::Invalid("boundary data rank differs from the bundle rank".into()));
    }
    let data = |t: f64, x: Point| f.eval(t, x);
    Scheme::new(disc, a, v)?.solve(&Sources { boundary: Some(&data), ..Default::default() })
}

/// Source problem with zero initial and boundary values.
pub fn source_solve(a: &dyn ConnectionForm, v: &dyn Potential, source: Field<'_>, disc: &Discretization) -> Result<Solution> {
    Scheme::new(disc, a, v)?.solve(&Sources { source: Some(source), ..Default::default() })
}

/// Homogeneous Dirichlet evolution of an initial state.
pub fn evolve(
    a: &dyn ConnectionForm,
    v: &dyn Potential,
    initial: &(dyn Fn(Point) -> CVec + Sync),
    disc: &Discretization,
) -> Result<Solution> {
    Scheme::new(disc, a, v)?.solve(&Sources { initial: Some(initial), ..Default::default() })
}

/// One mode `sin(ωt) cos(k·x + φ) w` of a manufactured solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub frequency: f64,
    pub wave: Point,
    pub phase: f64,
    pub vector: CVec,
}

/// Smooth closed-form field vanishing at `t = 0`, with the source that makes
/// it an exact solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Manufactured {
    pub modes: Vec<Mode>,
}

impl Manufactured {
    pub fn random<R: Rng>(rng: &mut R, rank: usize, count: usize) -> Self {
        let modes = (0..count)
            .map(|_| Mode {
                frequency: rng.gen_range(1.0..3.0),
                wave: Point::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
                vector: random_unit_vector(rng, rank),
            })
            .collect();
        Self { modes }
    }

    /// `(u, ∂_t u, ∇u, (∂_x²u, ∂_y²u))`.
    fn jet(&self, t: f64, x: Point) -> (CVec, CVec, [CVec; 2], [CVec; 2]) {
        let n = self.modes[0].vector.len();
        let (mut u, mut ut) = (CVec::zeros(n), CVec::zeros(n));
        let mut grad = [CVec::zeros(n), CVec::zeros(n)];
        let mut second = [CVec::zeros(n), CVec::zeros(n)];
        for m in &self.modes {
            let (s, c) = (m.frequency * t).sin_cos();
            let arg = m.wave.dot(&x) + m.phase;
            let (sa, ca) = arg.sin_cos();
            u += &m.vector * C64::from(s * ca);
            ut += &m.vector * C64::from(m.frequency * c * ca);
            for j in 0..2 {
                grad[j] += &m.vector * C64::from(-s * sa * m.wave[j]);
                second[j] += &m.vector * C64::from(-s * ca * m.wave[j] * m.wave[j]);
            }
        }
        (u, ut, grad, second)
    }

    pub fn value(&self, t: f64, x: Point) -> CVec {
        self.jet(t, x).0
    }

    /// `F = i∂_t u + c⁻² Σ_j (∂_j + A_j)² u + V u`.
    pub fn source(&self, a: &dyn ConnectionForm, v: &dyn Potential, metric: &Metric, t: f64, x: Point) -> CVec {
        let (u, ut, grad, second) = self.jet(t, x);
        let comps = a.components(t, x);
        let d = a.spatial_derivatives(t, x);
        let mut lap = CVec::zeros(u.len());
        for j in 0..2 {
            lap += &second[j] + &d[j][j] * &u + &comps[j] * &grad[j] * C64::from(2.0) + &comps[j] * (&comps[j] * &u);
        }
        ut * I + lap / C64::from(metric.factor_at(x).powi(2)) + v.value(t, x) * u
    }
}
