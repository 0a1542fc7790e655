use super::{solve_ibvp, BoundaryData, Discretization, Domain, Solution};
use crate::bundle::{ConnectionForm, Potential};
use crate::{CVec, Error, Point, Result, C64};
use std::io::Write;

/// Covariant normal derivative `∇^A_ν u = c⁻¹(∂_n u + A(n) u)` on the square
/// edges (corners excluded), at every time level.
#[derive(Debug, Clone)]
pub struct DtNRecord {
    pub rank: usize,
    pub spacing: f64,
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
    /// `values[k][b]` at `times[k]` and `points[b]`.
    pub values: Vec<Vec<CVec>>,
}

/// Boundary samples with outward normal and the two inward neighbours.
fn edge_samples(cells: usize) -> Vec<((usize, usize), (i64, i64))> {
    let n = cells;
    let mut out = Vec::with_capacity(4 * (n - 1));
    out.extend((1..n).map(|i| ((i, 0), (0, -1))));
    out.extend((1..n).map(|j| ((n, j), (1, 0))));
    out.extend((1..n).map(|i| ((i, n), (0, 1))));
    out.extend((1..n).map(|j| ((0, j), (-1, 0))));
    out
}

/// Normal derivative record of a computed solution, using the one-sided
/// second-order difference `(3u_b − 4u_{b−1} + u_{b−2}) / 2h`.
pub fn dtn_from_solution(sol: &Solution, a: &dyn ConnectionForm) -> Result<DtNRecord> {
    if sol.mesh.domain() != Domain::Square {
        return Err(Error::Invalid("the normal-derivative record is defined on the square only".into()));
    }
    let mesh = &sol.mesh;
    let h = mesh.spacing();
    let samples = edge_samples(mesh.cells());
    let step = |(i, j): (usize, usize), (di, dj): (i64, i64), k: i64| {
        mesh.node((i as i64 - k * di) as usize, (j as i64 - k * dj) as usize)
    };
    let points: Vec<Point> = samples.iter().map(|&(ij, _)| mesh.position(mesh.node(ij.0, ij.1))).collect();
    let normals: Vec<Point> = samples.iter().map(|&(_, (di, dj))| Point::new(di as f64, dj as f64)).collect();
    let values = sol
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            samples
                .iter()
                .enumerate()
                .map(|(b, &(ij, dir))| {
                    let (n0, n1, n2) = (step(ij, dir, 0), step(ij, dir, 1), step(ij, dir, 2));
                    let u0 = sol.value(k, n0);
                    let dn = (&u0 * C64::from(3.0) - sol.value(k, n1) * C64::from(4.0) + sol.value(k, n2)) / C64::from(2.0 * h);
                    let comps = a.components(t, points[b]);
                    let an = &comps[0] * C64::from(normals[b].x) + &comps[1] * C64::from(normals[b].y);
                    (dn + an * u0) / C64::from(sol.weight(n0).sqrt())
                })
                .collect()
        })
        .collect();
    Ok(DtNRecord { rank: sol.rank, spacing: h, times: sol.times.clone(), points, normals, values })
}

/// `Λ_{A,V} f`: solve the Dirichlet problem and record the normal derivative.
pub fn dtn_map(a: &dyn ConnectionForm, v: &dyn Potential, f: &BoundaryData, disc: &Discretization) -> Result<DtNRecord> {
    if disc.domain != Domain::Square {
        return Err(Error::Invalid("the normal-derivative record is defined on the square only".into()));
    }
    dtn_from_solution(&solve_ibvp(a, v, f, disc)?, a)
}

impl DtNRecord {
    fn weights(&self) -> Vec<f64> {
        let m = self.times.len();
        (0..m)
            .map(|k| {
                let dt = |a: usize, b: usize| self.times[b] - self.times[a];
                let left = if k > 0 { dt(k - 1, k) } else { 0.0 };
                let right = if k + 1 < m { dt(k, k + 1) } else { 0.0 };
                0.5 * (left + right) * self.spacing
            })
            .collect()
    }

    fn pairwise(&self, other: &DtNRecord, f: impl Fn(&CVec, &CVec) -> f64) -> Result<f64> {
        if self.times.len() != other.times.len() || self.points.len() != other.points.len() || self.rank != other.rank {
            return Err(Error::Invalid("records have different layouts".into()));
        }
        let w = self.weights();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(&w)
            .map(|((a, b), w)| w * a.iter().zip(b).map(|(x, y)| f(x, y)).sum::<f64>())
            .sum::<f64>()
            .sqrt())
    }

    /// `L²((0,T) × ∂M)` norm, trapezoidal in time.
    pub fn norm(&self) -> f64 {
        self.pairwise(self, |x, _| x.norm_squared()).unwrap_or(f64::NAN)
    }

    pub fn distance(&self, other: &DtNRecord) -> Result<f64> {
        self.pairwise(other, |x, y| (x - y).norm_squared())
    }

    /// `‖self − other‖ / ‖self‖`; zero when both vanish.
    pub fn relative_gap(&self, other: &DtNRecord) -> Result<f64> {
        let d = self.distance(other)?;
        let n = self.norm();
        Ok(if d == 0.0 { 0.0 } else { d / n })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Samples of `self` at the times and points of a coarser record.
    pub fn restrict_to(&self, coarse: &DtNRecord) -> Result<DtNRecord> {
        let tol = 1e-9;
        let times: Vec<usize> = coarse
            .times
            .iter()
            .map(|t| self.times.iter().position(|s| (s - t).abs() < tol))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Invalid("coarse times are not a subset".into()))?;
        let points: Vec<usize> = coarse
            .points
            .iter()
            .zip(&coarse.normals)
            .map(|(x, n)| self.points.iter().zip(&self.normals).position(|(y, m)| (x - y).norm() < tol && (n - m).norm() < tol))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Invalid("coarse points are not a subset".into()))?;
        Ok(DtNRecord {
            rank: self.rank,
            spacing: coarse.spacing,
            times: coarse.times.clone(),
            points: coarse.points.clone(),
            normals: coarse.normals.clone(),
            values: times.iter().map(|&k| points.iter().map(|&b| self.values[k][b].clone()).collect()).collect(),
        })
    }

    /// CSV `t,x,y,nx,ny,component,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,y,nx,ny,component,re,im")?;
        for (k, t) in self.times.iter().enumerate() {
            for (b, (x, n)) in self.points.iter().zip(&self.normals).enumerate() {
                for (c, z) in self.values[k][b].iter().enumerate() {
                    writeln!(w, "{t},{},{},{},{},{c},{:.12e},{:.12e}", x.x, x.y, n.x, n.y, z.re, z.im)?;
                }
            }
        }
        Ok(())
    }
}
