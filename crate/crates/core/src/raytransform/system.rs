use super::{AttenuationField, IntegrandField};
use crate::geometry::GeodesicPath;
use crate::linalg::{fro, kron};
use crate::quadrature::fourth_order_weights;
use crate::{CMat, Error, Point, Result, C64};
use rayon::prelude::*;
use std::collections::HashMap;
use std::io::Write;

/// Bilinear hat functions on a `size × size` grid over `[−R, R]²`; only the
/// nodes whose support meets the open disk carry unknowns.
#[derive(Debug, Clone)]
pub struct PixelGrid {
    size: usize,
    radius: f64,
    spacing: f64,
    nodes: Vec<usize>,
    slot: Vec<Option<usize>>,
}

impl PixelGrid {
    pub fn new(size: usize, radius: f64) -> Result<Self> {
        if size < 2 || !(radius > 0.0) {
            return Err(Error::Invalid(format!("pixel grid needs size ≥ 2 and a positive radius (got {size}, {radius})")));
        }
        let spacing = 2.0 * radius / (size - 1) as f64;
        let mut nodes = Vec::new();
        let mut slot = vec![None; size * size];
        for j in 0..size {
            for i in 0..size {
                let p = Point::new(-radius + i as f64 * spacing, -radius + j as f64 * spacing);
                let gap = Point::new((p[0].abs() - spacing).max(0.0), (p[1].abs() - spacing).max(0.0));
                if gap.norm() < radius {
                    slot[j * size + i] = Some(nodes.len());
                    nodes.push(j * size + i);
                }
            }
        }
        Ok(Self { size, radius, spacing, nodes, slot })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of active nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Position of active node `k`.
    pub fn position(&self, k: usize) -> Point {
        let g = self.nodes[k];
        Point::new(-self.radius + (g % self.size) as f64 * self.spacing, -self.radius + (g / self.size) as f64 * self.spacing)
    }

    /// Whether active node `k` lies in the open disk.
    pub fn inside(&self, k: usize) -> bool {
        self.position(k).norm() < self.radius
    }

    /// Calls `f(node, φ_node(x))` for every active hat function that is nonzero at `x`.
    pub fn for_each_hat(&self, x: Point, mut f: impl FnMut(usize, f64)) {
        let top = (self.size - 1) as f64;
        let (u, v) = ((x[0] + self.radius) / self.spacing, (x[1] + self.radius) / self.spacing);
        if !(0.0..=top).contains(&u) || !(0.0..=top).contains(&v) {
            return;
        }
        let (i, j) = ((u.floor() as usize).min(self.size - 2), (v.floor() as usize).min(self.size - 2));
        let (fx, fy) = (u - i as f64, v - j as f64);
        let corners = [(0, 0, (1.0 - fx) * (1.0 - fy)), (1, 0, fx * (1.0 - fy)), (0, 1, (1.0 - fx) * fy), (1, 1, fx * fy)];
        for (di, dj, w) in corners {
            if w != 0.0 {
                if let Some(k) = self.slot[(j + dj) * self.size + i + di] {
                    f(k, w);
                }
            }
        }
    }
}

/// Whether the unknown is a matrix function or a matrix one-form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Function,
    OneForm,
}

impl FieldKind {
    fn components(self) -> usize {
        match self {
            Self::Function => 1,
            Self::OneForm => 2,
        }
    }
}

/// Pixel field: one `n × m` coefficient per active node (two for one-forms,
/// stored as `coeffs[2k + j]`).
#[derive(Debug, Clone, PartialEq)]
pub struct PixelField {
    pub kind: FieldKind,
    pub shape: (usize, usize),
    pub coeffs: Vec<CMat>,
}

impl PixelField {
    pub fn zeros(grid: &PixelGrid, kind: FieldKind, shape: (usize, usize)) -> Self {
        Self { kind, shape, coeffs: vec![CMat::zeros(shape.0, shape.1); grid.len() * kind.components()] }
    }

    /// Nodal samples of a matrix function.
    pub fn sample(grid: &PixelGrid, f: impl Fn(Point) -> CMat) -> Self {
        let coeffs: Vec<CMat> = (0..grid.len()).map(|k| f(grid.position(k))).collect();
        let shape = coeffs.first().map_or((0, 0), |c| c.shape());
        Self { kind: FieldKind::Function, shape, coeffs }
    }

    pub fn eval(&self, grid: &PixelGrid, x: Point, theta: Point) -> CMat {
        let mut out = CMat::zeros(self.shape.0, self.shape.1);
        grid.for_each_hat(x, |k, w| match self.kind {
            FieldKind::Function => out += &self.coeffs[k] * C64::from(w),
            FieldKind::OneForm => {
                out += &self.coeffs[2 * k] * C64::from(w * theta[0]) + &self.coeffs[2 * k + 1] * C64::from(w * theta[1]);
            }
        });
        out
    }

    pub fn into_integrand(self, grid: PixelGrid) -> IntegrandField {
        match self.kind {
            FieldKind::Function => IntegrandField::function(move |x| self.eval(&grid, x, Point::zeros())),
            FieldKind::OneForm => IntegrandField::one_form(move |x| {
                [Point::new(1.0, 0.0), Point::new(0.0, 1.0)].map(|e| self.eval(&grid, x, e))
            }),
        }
    }

    /// `sqrt(Σ ‖c_k‖_F²)` over all coefficients.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| fro(c).powi(2)).sum::<f64>().sqrt()
    }

    /// Relative discrete `L²` distance to `reference` over the nodes inside the disk.
    pub fn relative_error(&self, reference: &PixelField, grid: &PixelGrid) -> f64 {
        let comps = self.kind.components();
        let (mut num, mut den) = (0.0, 0.0);
        for k in (0..grid.len()).filter(|k| grid.inside(*k)) {
            for j in 0..comps {
                let i = comps * k + j;
                num += fro(&(&self.coeffs[i] - &reference.coeffs[i])).powi(2);
                den += fro(&reference.coeffs[i]).powi(2);
            }
        }
        (num / den).sqrt()
    }

    fn to_vector(&self) -> Vec<C64> {
        self.coeffs.iter().flat_map(|c| c.iter().copied()).collect()
    }

    fn from_vector(kind: FieldKind, shape: (usize, usize), v: &[C64]) -> Self {
        let d = shape.0 * shape.1;
        Self { kind, shape, coeffs: v.chunks(d).map(|c| CMat::from_column_slice(shape.0, shape.1, c)).collect() }
    }
}

/// Sampling and memory limits for [`assemble_system`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    pub step: f64,
    /// Upper bound on the stored blocks, in bytes.
    pub memory_limit: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { step: 1e-3, memory_limit: 2 << 30 }
    }
}

/// Sparse forward operator: per ray, a list of `(slot, block)` with
/// `data = Σ block · vec(coefficient)` (column-major `vec`).
#[derive(Debug, Clone)]
pub struct RayTransformSystem {
    pub grid: PixelGrid,
    pub kind: FieldKind,
    pub shape: (usize, usize),
    pub time: f64,
    rows: Vec<Vec<(usize, CMat)>>,
}

impl RayTransformSystem {
    fn block_dim(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    pub fn rays(&self) -> usize {
        self.rows.len()
    }

    /// Scalar rows: rays × (n·m).
    pub fn row_count(&self) -> usize {
        self.rays() * self.block_dim()
    }

    /// Scalar unknowns: active nodes × components × (n·m).
    pub fn unknown_count(&self) -> usize {
        self.grid.len() * self.kind.components() * self.block_dim()
    }

    pub fn memory_bytes(&self) -> usize {
        let d = self.block_dim();
        self.rows.iter().map(|r| r.len() * (d * d * 16 + 8)).sum()
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let d = self.block_dim();
        self.rows
            .par_iter()
            .flat_map_iter(|row| {
                let mut y = vec![C64::from(0.0); d];
                for (slot, k) in row {
                    let xs = &x[slot * d..(slot + 1) * d];
                    for b in 0..d {
                        let xb = xs[b];
                        for a in 0..d {
                            y[a] += k[(a, b)] * xb;
                        }
                    }
                }
                y
            })
            .collect()
    }

    /// `A* y`, summed over fixed row chunks so the result does not depend on
    /// the thread count.
    pub fn adjoint(&self, y: &[C64]) -> Vec<C64> {
        let d = self.block_dim();
        let n = self.unknown_count();
        let chunk = self.rows.len().div_ceil(32).max(1);
        let partials: Vec<Vec<C64>> = self
            .rows
            .par_chunks(chunk)
            .enumerate()
            .map(|(c, rows)| {
                let mut acc = vec![C64::from(0.0); n];
                for (i, row) in rows.iter().enumerate() {
                    let r = c * chunk + i;
                    let ys = &y[r * d..(r + 1) * d];
                    for (slot, k) in row {
                        for b in 0..d {
                            let mut s = C64::from(0.0);
                            for a in 0..d {
                                s += k[(a, b)].conj() * ys[a];
                            }
                            acc[slot * d + b] += s;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![C64::from(0.0); n];
        for p in partials {
            for (x, y) in out.iter_mut().zip(&p) {
                *x += y;
            }
        }
        out
    }

    /// Forward data of a pixel field, one matrix per ray.
    pub fn forward(&self, field: &PixelField) -> Result<Vec<CMat>> {
        if field.kind != self.kind || field.shape != self.shape || field.coeffs.len() != self.grid.len() * self.kind.components() {
            return Err(Error::Invalid("field does not match the system layout".into()));
        }
        let y = self.apply(&field.to_vector());
        Ok(y.chunks(self.block_dim()).map(|c| CMat::from_column_slice(self.shape.0, self.shape.1, c)).collect())
    }

    fn data_vector(&self, data: &[CMat]) -> Result<Vec<C64>> {
        if data.len() != self.rays() || data.iter().any(|d| d.shape() != self.shape) {
            return Err(Error::Invalid("data do not match the system layout".into()));
        }
        Ok(data.iter().flat_map(|c| c.iter().copied()).collect())
    }

    /// JSON header line, then `ray,slot,a,b,re,im` rows of every stored block entry.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header = serde_json::json!({
            "grid": self.grid.size(),
            "radius": self.grid.radius(),
            "kind": format!("{:?}", self.kind),
            "shape": [self.shape.0, self.shape.1],
            "time": self.time,
            "rays": self.rays(),
            "rows": self.row_count(),
            "unknowns": self.unknown_count(),
            "vec": "column-major",
        });
        writeln!(out, "{header}")?;
        writeln!(out, "ray,slot,a,b,re,im")?;
        for (r, row) in self.rows.iter().enumerate() {
            for (slot, k) in row {
                for b in 0..k.ncols() {
                    for a in 0..k.nrows() {
                        writeln!(out, "{r},{slot},{a},{b},{},{}", k[(a, b)].re, k[(a, b)].im)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn assemble_row(b: &AttenuationField, path: &GeodesicPath, grid: &PixelGrid, kind: FieldKind, t: f64, step: f64) -> Result<Vec<(usize, CMat)>> {
    let n = ((path.exit_time() / step).ceil() as usize).max(3);
    let (u1, u2) = b.transports(path, t, n)?;
    let weights = fourth_order_weights(n, u1.spacing());
    let comps = kind.components();
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut row: Vec<(usize, CMat)> = Vec::new();
    for k in 0..=n {
        let (x, v) = path.eval(u1.nodes[k]);
        let left = u1.values[k].adjoint();
        let block = match &u2 {
            Some(u2) => kron(&u2.values[k].transpose(), &left),
            None => left,
        };
        grid.for_each_hat(x, |node, phi| {
            for j in 0..comps {
                let c = weights[k] * phi * if kind == FieldKind::OneForm { v[j] } else { 1.0 };
                let slot = comps * node + j;
                let pos = *index.entry(slot).or_insert_with(|| {
                    row.push((slot, CMat::zeros(block.nrows(), block.ncols())));
                    row.len() - 1
                });
                row[pos].1 += &block * C64::from(c);
            }
        });
    }
    row.sort_by_key(|(s, _)| *s);
    Ok(row)
}

/// Columns are the transforms of single pixel basis fields, integrated along
/// each ray with the same transports and quadrature as [`super::art_forward`].
pub fn assemble_system(
    b: &AttenuationField,
    paths: &[GeodesicPath],
    grid: &PixelGrid,
    kind: FieldKind,
    t: f64,
    opts: AssemblyOptions,
) -> Result<RayTransformSystem> {
    if !(opts.step > 0.0) {
        return Err(Error::Invalid(format!("step must be positive, got {}", opts.step)));
    }
    let shape = b.shape();
    let d = shape.0 * shape.1;
    let comps = kind.components();
    let estimate: usize = paths
        .iter()
        .map(|p| {
            let nodes = (2.0 * (1.5 * p.exit_time() / grid.spacing() + 3.0)).ceil() as usize;
            nodes.min(grid.len()) * comps * (d * d * 16 + 8)
        })
        .sum();
    if estimate > opts.memory_limit {
        return Err(Error::Size(format!("estimated {estimate} bytes exceeds the limit of {}", opts.memory_limit)));
    }
    let rows = paths.par_iter().map(|p| assemble_row(b, p, grid, kind, t, opts.step)).collect::<Result<Vec<_>>>()?;
    Ok(RayTransformSystem { grid: grid.clone(), kind, shape, time: t, rows })
}

/// Tikhonov-regularised least squares by CGLS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionOptions {
    /// `λ_reg` relative to the largest eigenvalue of `A*A`.
    pub lambda_rel: f64,
    /// Stop when `‖A*(b − Ax) − λx‖ ≤ tolerance · ‖A*b‖`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub power_iterations: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self { lambda_rel: 1e-6, tolerance: 1e-8, max_iterations: 20_000, power_iterations: 40 }
    }
}

/// Result of [`invert`].
#[derive(Debug, Clone)]
pub struct Inversion {
    pub field: PixelField,
    pub lambda: f64,
    pub lambda_max: f64,
    pub iterations: usize,
    /// Relative normal-equation residual after each iteration.
    pub history: Vec<f64>,
    /// `‖Ax − b‖ / ‖b‖`.
    pub misfit: f64,
}

impl Inversion {
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iteration,relative_residual\n");
        for (k, r) in self.history.iter().enumerate() {
            s.push_str(&format!("{},{r:e}\n", k + 1));
        }
        s
    }
}

fn dot(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
}

fn norm(a: &[C64]) -> f64 {
    dot(a, a).sqrt()
}

/// Largest eigenvalue of `A*A` by power iteration from a fixed start vector.
pub fn normal_eigenvalue_max(system: &RayTransformSystem, iterations: usize) -> f64 {
    let n = system.unknown_count();
    let mut v = vec![C64::from(1.0 / (n as f64).sqrt()); n];
    let mut lambda = 0.0;
    for _ in 0..iterations.max(1) {
        let w = system.adjoint(&system.apply(&v));
        lambda = norm(&w);
        if lambda == 0.0 {
            return 0.0;
        }
        v = w.iter().map(|z| z / lambda).collect();
    }
    lambda
}

/// Minimises `‖Ax − b‖² + λ‖x‖²`, `λ = lambda_rel · λ_max(A*A)`.
pub fn invert(system: &RayTransformSystem, data: &[CMat], opts: InversionOptions) -> Result<Inversion> {
    let b = system.data_vector(data)?;
    let n = system.unknown_count();
    let lambda_max = normal_eigenvalue_max(system, opts.power_iterations);
    let lambda = opts.lambda_rel * lambda_max;
    let mut x = vec![C64::from(0.0); n];
    let mut r = b.clone();
    let mut s = system.adjoint(&r);
    let s0 = norm(&s);
    let mut history = Vec::new();
    if s0 > 0.0 {
        let mut p = s.clone();
        let mut gamma = dot(&s, &s);
        loop {
            let q = system.apply(&p);
            let delta = dot(&q, &q) + lambda * dot(&p, &p);
            let alpha = gamma / delta;
            for (xi, pi) in x.iter_mut().zip(&p) {
                *xi += pi * alpha;
            }
            for (ri, qi) in r.iter_mut().zip(&q) {
                *ri -= qi * alpha;
            }
            s = system.adjoint(&r);
            for (si, xi) in s.iter_mut().zip(&x) {
                *si -= xi * lambda;
            }
            let g = dot(&s, &s);
            history.push(g.sqrt() / s0);
            if g.sqrt() <= opts.tolerance * s0 {
                break;
            }
            if history.len() >= opts.max_iterations {
                return Err(Error::NonConvergence(format!(
                    "CGLS stopped at relative residual {:.3e} after {} iterations",
                    g.sqrt() / s0,
                    history.len()
                )));
            }
            let beta = g / gamma;
            gamma = g;
            for (pi, si) in p.iter_mut().zip(&s) {
                *pi = si + *pi * beta;
            }
        }
    }
    let bn = norm(&b);
    let misfit = if bn > 0.0 { norm(&r) / bn } else { 0.0 };
    Ok(Inversion {
        field: PixelField::from_vector(system.kind, system.shape, &x),
        lambda,
        lambda_max,
        iterations: history.len(),
        history,
        misfit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{random_connection, ConnectionForm};
    use crate::geometry::{sample_inflow, trace_geodesic, Metric};
    use crate::linalg::random_hermitian;
    use crate::raytransform::{endo_connection, transport_solve, ArtOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn rays(metric: &Metric, points: usize, dirs: usize) -> Vec<GeodesicPath> {
        sample_inflow(metric, points, dirs).iter().map(|s| trace_geodesic(metric, s.x, s.theta, 1e-3).unwrap()).collect()
    }

    fn pair(seed: u64) -> AttenuationField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1: Arc<dyn ConnectionForm> = Arc::new(random_connection(&mut rng, 2, 2, 1.0, 0.5, false));
        let a2: Arc<dyn ConnectionForm> = Arc::new(random_connection(&mut rng, 2, 2, 1.0, 0.5, false));
        endo_connection(a1, a2).unwrap()
    }

    #[test]
    fn hats_form_a_partition_of_unity_in_the_disk() {
        let grid = PixelGrid::new(9, 1.0).unwrap();
        for &(a, b) in &[(0.0, 0.0), (0.31, -0.52), (-0.7, 0.69), (0.999, 0.0)] {
            let mut total = 0.0;
            grid.for_each_hat(Point::new(a, b), |_, w| total += w);
            assert!((total - 1.0).abs() < 1e-14);
        }
        assert!(grid.len() < 81 && (0..grid.len()).any(|k| !grid.inside(k)));
        assert!(PixelGrid::new(1, 1.0).is_err());
    }

    #[test]
    fn counts_and_zero_field() {
        let grid = PixelGrid::new(8, 1.0).unwrap();
        let b = pair(1);
        let paths = rays(&Metric::flat(), 5, 3);
        let sys = assemble_system(&b, &paths, &grid, FieldKind::Function, 0.0, AssemblyOptions::default()).unwrap();
        assert_eq!(sys.row_count(), paths.len() * 4);
        assert_eq!(sys.unknown_count(), grid.len() * 4);
        let data = sys.forward(&PixelField::zeros(&grid, FieldKind::Function, (2, 2))).unwrap();
        assert!(data.iter().all(|d| fro(d) == 0.0));
        let mut out = Vec::new();
        sys.dump(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.lines().next().unwrap().contains("\"rays\":15"));
    }

    #[test]
    fn single_pixel_column_matches_direct_solve() {
        let metric = Metric::radial_bump(0.3, 0.5).unwrap();
        let grid = PixelGrid::new(10, 1.0).unwrap();
        let b = pair(2);
        let paths = rays(&metric, 6, 4);
        for kind in [FieldKind::Function, FieldKind::OneForm] {
            let sys = assemble_system(&b, &paths, &grid, kind, 0.3, AssemblyOptions::default()).unwrap();
            let mut field = PixelField::zeros(&grid, kind, (2, 2));
            let slot = if kind == FieldKind::OneForm { 2 * 40 + 1 } else { 40 };
            field.coeffs[slot][(1, 0)] = C64::new(0.3, -1.2);
            field.coeffs[slot][(0, 1)] = C64::from(0.7);
            let column = sys.forward(&field).unwrap();
            let f = field.into_integrand(grid.clone());
            let mut hit = 0;
            for (p, c) in paths.iter().zip(&column) {
                let direct = transport_solve(&b, &f, p, 0.3, ArtOptions::default()).unwrap();
                assert!(fro(&(direct.entry_value() - c)) < 1e-8);
                hit += (fro(c) > 0.0) as usize;
            }
            assert!(hit > 0);
        }
    }

    #[test]
    fn adjoint_is_consistent() {
        let grid = PixelGrid::new(7, 1.0).unwrap();
        let sys = assemble_system(&pair(3), &rays(&Metric::flat(), 4, 3), &grid, FieldKind::OneForm, 0.0, AssemblyOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        use rand::Rng;
        let x: Vec<C64> = (0..sys.unknown_count()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let y: Vec<C64> = (0..sys.row_count()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let lhs: C64 = sys.apply(&x).iter().zip(&y).map(|(a, b)| b.conj() * a).sum();
        let rhs: C64 = x.iter().zip(&sys.adjoint(&y)).map(|(a, b)| b.conj() * a).sum();
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm());
    }

    #[test]
    fn memory_limit_is_enforced() {
        let grid = PixelGrid::new(16, 1.0).unwrap();
        let opts = AssemblyOptions { memory_limit: 1000, ..AssemblyOptions::default() };
        let r = assemble_system(&pair(4), &rays(&Metric::flat(), 3, 3), &grid, FieldKind::Function, 0.0, opts);
        assert!(matches!(r, Err(Error::Size(_))));
    }

    #[test]
    fn inversion_behaves_like_tikhonov() {
        let grid = PixelGrid::new(10, 1.0).unwrap();
        let b = pair(5);
        let sys = assemble_system(&b, &rays(&Metric::flat(), 16, 12), &grid, FieldKind::Function, 0.0, AssemblyOptions::default()).unwrap();
        let zero = vec![CMat::zeros(2, 2); sys.rays()];
        let inv = invert(&sys, &zero, InversionOptions::default()).unwrap();
        assert_eq!(inv.field.norm(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (h1, h2) = (random_hermitian(&mut rng, 2, 1.0), random_hermitian(&mut rng, 2, 1.0));
        let truth = PixelField::sample(&grid, |x| {
            &h1 * C64::from((-(x - Point::new(0.3, 0.1)).norm_squared() / 0.1).exp()) + &h2 * C64::from(x[1] * (1.0 - x.norm_squared()))
        });
        let data = sys.forward(&truth).unwrap();
        let mut last = f64::INFINITY;
        for lr in [1e-4, 2e-4, 4e-4] {
            let inv = invert(&sys, &data, InversionOptions { lambda_rel: lr, ..InversionOptions::default() }).unwrap();
            assert!(*inv.history.last().unwrap() <= 1e-8);
            assert!(inv.field.norm() <= last * (1.0 + 1e-9));
            last = inv.field.norm();
        }
        let tight = InversionOptions { max_iterations: 2, ..InversionOptions::default() };
        assert!(matches!(invert(&sys, &data, tight), Err(Error::NonConvergence(_))));
    }
}
