use super::{GeodesicPath, Metric};
use crate::interp::lagrange_weights;
use crate::{Error, Point, Result};
use nalgebra::{DMatrix, DVector};

/// Grid and integration settings for [`build_fermi_chart_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartOptions {
    /// Target spacing of the uniform `r` grid.
    pub step: f64,
    /// Sub-range of `[0, ρ₊]` covered by the chart; whole path when `None`.
    pub r_range: Option<(f64, f64)>,
    /// RK4 step along normal geodesics.
    pub normal_step: f64,
}

impl Default for ChartOptions {
    fn default() -> Self {
        Self { step: 0.01, r_range: None, normal_step: 1e-3 }
    }
}

/// Geometry of the chart at `(r, y)`: image point, coordinate frame and the
/// pulled-back metric `g_ab` with its inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubePoint {
    pub x: Point,
    pub dx_dr: Point,
    pub dx_dy: Point,
    pub metric: [[f64; 2]; 2],
    pub inverse: [[f64; 2]; 2],
    pub sqrt_det: f64,
}

/// Fermi coordinates `(r, y) ↦ exp_{γ(r)}(y N(r))` along a geodesic, with the
/// Taylor coefficients in `y` of the inverse metric on a uniform `r` grid.
#[derive(Debug, Clone)]
pub struct FermiChart {
    metric: Metric,
    path: GeodesicPath,
    r_start: f64,
    h: f64,
    intervals: usize,
    width: f64,
    order: usize,
    normal_step: f64,
    /// Per node: monomial coefficients of `g^{rr}, g^{ry}, g^{yy}` in `y`.
    coeffs: Vec<[Vec<f64>; 3]>,
}

/// Chart over the whole path with default grid settings.
pub fn build_fermi_chart(metric: &Metric, path: &GeodesicPath, width: f64, order: usize) -> Result<FermiChart> {
    build_fermi_chart_with(metric, path, width, order, ChartOptions::default())
}

pub fn build_fermi_chart_with(
    metric: &Metric,
    path: &GeodesicPath,
    width: f64,
    order: usize,
    opts: ChartOptions,
) -> Result<FermiChart> {
    if !(width > 0.0) || !(opts.step > 0.0) || !(opts.normal_step > 0.0) {
        return Err(Error::Invalid("chart width and steps must be positive".into()));
    }
    let (a, b) = opts.r_range.unwrap_or((0.0, path.exit_time()));
    if !(0.0 <= a && a < b && b <= path.exit_time() + 1e-12) {
        return Err(Error::Invalid(format!("chart range [{a}, {b}] is not inside the path")));
    }
    let intervals = ((b - a) / opts.step - 1e-9).ceil().max(6.0) as usize;
    let mut chart = FermiChart {
        metric: metric.clone(),
        path: path.clone(),
        r_start: a,
        h: (b - a) / intervals as f64,
        intervals,
        width,
        order,
        normal_step: opts.normal_step,
        coeffs: Vec::new(),
    };
    chart.check_width()?;
    let fit_radius = (0.5 * width).min(0.1);
    let q = order + 9;
    let u: Vec<f64> = (0..q).map(|k| (std::f64::consts::PI * (k as f64 + 0.5) / q as f64).cos()).collect();
    let vander = DMatrix::from_fn(q, q, |i, j| u[i].powi(j as i32));
    let lu = vander.lu();
    let ys: Vec<f64> = u.iter().map(|v| v * fit_radius).collect();
    for k in 0..=intervals {
        let r = chart.node(k);
        if metric.is_flat() {
            let mut e = [vec![0.0; order + 1], vec![0.0; order + 1], vec![0.0; order + 1]];
            e[0][0] = 1.0;
            e[2][0] = 1.0;
            chart.coeffs.push(e);
            continue;
        }
        let pts = chart.tube_points(r, &ys);
        let mut comps: [Vec<f64>; 3] = Default::default();
        for (c, sel) in comps.iter_mut().zip([(0, 0), (0, 1), (1, 1)]) {
            let rhs = DVector::from_iterator(q, pts.iter().map(|p| p.inverse[sel.0][sel.1]));
            let sol = lu.solve(&rhs).ok_or_else(|| Error::Invalid("singular Chebyshev system".into()))?;
            *c = (0..=order).map(|l| sol[l] / fit_radius.powi(l as i32)).collect();
        }
        chart.coeffs.push(comps);
    }
    Ok(chart)
}

impl FermiChart {
    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn path(&self) -> &GeodesicPath {
        &self.path
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_flat(&self) -> bool {
        self.metric.is_flat()
    }

    /// Uniform grid spacing.
    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn r_start(&self) -> f64 {
        self.r_start
    }

    pub fn r_end(&self) -> f64 {
        self.r_start + self.h * self.intervals as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.r_start + self.h * k as f64
    }

    /// Index of the grid node closest to `r`.
    pub fn nearest_node(&self, r: f64) -> usize {
        (((r - self.r_start) / self.h).round().max(0.0) as usize).min(self.intervals)
    }

    /// `γ(r)` and `γ′(r)`.
    pub fn center(&self, r: f64) -> (Point, Point) {
        self.path.eval(r)
    }

    /// Unit normal `N(r)`: `γ′(r)` rotated by `+π/2`.
    pub fn normal(&self, r: f64) -> Point {
        let (_, t) = self.center(r);
        Point::new(-t[1], t[0])
    }

    /// Coefficients of `g^{rr}, g^{ry}, g^{yy}` at grid node `k`.
    pub fn node_series(&self, k: usize) -> &[Vec<f64>; 3] {
        &self.coeffs[k]
    }

    /// Coefficients at arbitrary `r` by six-point Lagrange interpolation.
    pub fn series_at(&self, r: f64) -> [Vec<f64>; 3] {
        let (s, w) = lagrange_weights(r, self.r_start, self.h, self.intervals + 1);
        let mut out: [Vec<f64>; 3] = Default::default();
        for (c, o) in out.iter_mut().enumerate() {
            *o = (0..=self.order).map(|l| w.iter().enumerate().map(|(j, wj)| wj * self.coeffs[s + j][c][l]).sum()).collect();
        }
        out
    }

    /// `F(r)` with `g^{rr} = 1 − F(r) y² + O(y³)`.
    pub fn curvature_datum(&self, r: f64) -> f64 {
        if self.order < 2 {
            return 0.0;
        }
        -self.series_at(r)[0][2]
    }

    /// Largest deviation of the on-axis conditions `g^{jk}(r,0) = δ^{jk}`,
    /// `∂_y g^{jk}(r,0) = 0` over the grid.
    pub fn on_axis_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.coeffs {
            worst = worst.max((c[0][0] - 1.0).abs()).max(c[1][0].abs()).max((c[2][0] - 1.0).abs());
            if self.order >= 1 {
                worst = worst.max(c[0][1].abs()).max(c[1][1].abs()).max(c[2][1].abs());
            }
        }
        worst
    }

    /// Exact chart geometry at `(r, y)`.
    pub fn point(&self, r: f64, y: f64) -> TubePoint {
        self.tube_points(r, &[y])[0]
    }

    /// Chart geometry at `(r, y_i)` for several `y`, sharing the normal-geodesic integration.
    pub fn tube_points(&self, r: f64, ys: &[f64]) -> Vec<TubePoint> {
        let (g, t) = self.center(r);
        let n = Point::new(-t[1], t[0]);
        let mut out = vec![None; ys.len()];
        if self.metric.is_flat() {
            for (o, &y) in out.iter_mut().zip(ys) {
                *o = Some(self.finish(g + n * y, t, n));
            }
            return out.into_iter().map(Option::unwrap).collect();
        }
        let acc = self.metric.geodesic_accel(g, t);
        let dn = Point::new(-acc[1], acc[0]);
        for sign in [1.0, -1.0] {
            let mut targets: Vec<(usize, f64)> =
                ys.iter().enumerate().filter(|(_, y)| (**y >= 0.0) == (sign > 0.0)).map(|(i, y)| (i, y.abs())).collect();
            if targets.is_empty() {
                continue;
            }
            targets.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"));
            let mut s = [g[0], g[1], sign * n[0], sign * n[1], t[0], t[1], sign * dn[0], sign * dn[1]];
            let mut u = 0.0;
            for (idx, target) in targets {
                while u < target {
                    let h = self.normal_step.min(target - u);
                    s = self.jacobi_rk4(&s, h);
                    u = if target - u <= self.normal_step { target } else { u + h };
                }
                let x = Point::new(s[0], s[1]);
                out[idx] = Some(self.finish(x, Point::new(s[4], s[5]), Point::new(s[2], s[3]) * sign));
            }
        }
        out.into_iter().map(Option::unwrap).collect()
    }

    fn finish(&self, x: Point, dx_dr: Point, dx_dy: Point) -> TubePoint {
        let c2 = self.metric.factor_at(x).powi(2);
        let g = [[c2 * dx_dr.dot(&dx_dr), c2 * dx_dr.dot(&dx_dy)], [c2 * dx_dr.dot(&dx_dy), c2 * dx_dy.dot(&dx_dy)]];
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let inverse = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
        TubePoint { x, dx_dr, dx_dy, metric: g, inverse, sqrt_det: det.max(0.0).sqrt() }
    }

    /// Geodesic equation with its variational (Jacobi) equation; state
    /// `(x, x′, J, J′)`.
    fn jacobi_rhs(&self, s: &[f64; 8]) -> [f64; 8] {
        let x = Point::new(s[0], s[1]);
        let v = Point::new(s[2], s[3]);
        let j = Point::new(s[4], s[5]);
        let jp = Point::new(s[6], s[7]);
        let (dl, hl) = self.metric.log_jet(x);
        let a = -v * (2.0 * dl.dot(&v)) + dl * v.norm_squared();
        let hj = Point::new(hl[0][0] * j[0] + hl[0][1] * j[1], hl[1][0] * j[0] + hl[1][1] * j[1]);
        let dx = -v * (2.0 * v.dot(&hj)) + hj * v.norm_squared();
        let dv = -jp * (2.0 * dl.dot(&v)) - v * (2.0 * dl.dot(&jp)) + dl * (2.0 * v.dot(&jp));
        let jpp = dx + dv;
        [v[0], v[1], a[0], a[1], jp[0], jp[1], jpp[0], jpp[1]]
    }

    fn jacobi_rk4(&self, s: &[f64; 8], h: f64) -> [f64; 8] {
        let add = |a: &[f64; 8], b: &[f64; 8], f: f64| {
            let mut o = *a;
            for i in 0..8 {
                o[i] += f * b[i];
            }
            o
        };
        let k1 = self.jacobi_rhs(s);
        let k2 = self.jacobi_rhs(&add(s, &k1, h / 2.0));
        let k3 = self.jacobi_rhs(&add(s, &k2, h / 2.0));
        let k4 = self.jacobi_rhs(&add(s, &k3, h));
        let mut o = *s;
        for i in 0..8 {
            o[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        o
    }

    fn check_width(&self) -> Result<()> {
        if self.metric.is_flat() {
            return Ok(());
        }
        let coarse = Self { normal_step: (self.width / 200.0).min(self.normal_step.max(1e-3)), ..self.clone() };
        let ys: Vec<f64> = [-1.0, -0.75, -0.5, -0.25, 0.25, 0.5, 0.75, 1.0].iter().map(|f| f * self.width).collect();
        let stride = (self.intervals / 40).max(1);
        for k in (0..=self.intervals).step_by(stride) {
            let r = self.node(k);
            for p in coarse.tube_points(r, &ys) {
                let det = p.dx_dr[0] * p.dx_dy[1] - p.dx_dr[1] * p.dx_dy[0];
                if !(det > 1e-3) {
                    return Err(Error::Width(format!(
                        "normal geodesics degenerate (Jacobian {det:.3e}) at r = {r:.4} within width {}",
                        self.width
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::trace_geodesic;

    fn bumped_chart(order: usize) -> FermiChart {
        let g = Metric::radial_bump(0.3, 0.5).unwrap();
        let x = Point::new(-1.0, 0.0);
        let dir = Point::new(1.0, 0.35).normalize() / g.factor_at(x);
        let p = trace_geodesic(&g, x, dir, 1e-3).unwrap();
        build_fermi_chart(&g, &p, 0.3, order).unwrap()
    }

    #[test]
    fn flat_chart_is_cartesian() {
        let g = Metric::flat();
        let p = trace_geodesic(&g, Point::new(-1.0, 0.0), Point::new(0.8, 0.6), 1e-3).unwrap();
        let c = build_fermi_chart(&g, &p, 2.0, 5).unwrap();
        for k in 0..=c.intervals() {
            let s = c.node_series(k);
            assert_eq!(s[0][0], 1.0);
            assert_eq!(s[2][0], 1.0);
            assert!(s.iter().flat_map(|v| v.iter().skip(1)).all(|v| *v == 0.0));
        }
        let tp = c.point(0.7, 0.2);
        let (g0, _) = c.center(0.7);
        assert!((tp.x - (g0 + Point::new(-0.6, 0.8) * 0.2)).norm() < 1e-13);
        assert!((tp.inverse[0][0] - 1.0).abs() < 1e-13 && tp.inverse[0][1].abs() < 1e-13);
    }

    #[test]
    fn on_axis_conditions_hold() {
        let c = bumped_chart(4);
        assert!(c.on_axis_defect() < 1e-6, "defect {}", c.on_axis_defect());
        let (g0, _) = c.center(0.8);
        assert!((c.point(0.8, 0.0).x - g0).norm() < 1e-15);
    }

    #[test]
    fn curvature_datum_matches_second_differences() {
        let c = bumped_chart(2);
        for &r in &[0.3, 0.9, 1.4] {
            let g11 = |y: f64| c.point(r, y).inverse[0][0];
            let second = |d: f64| (g11(d) - 2.0 * g11(0.0) + g11(-d)) / (2.0 * d * d);
            let oracle = (4.0 * second(5e-3) - second(1e-2)) / 3.0;
            assert!((-c.curvature_datum(r) - oracle).abs() < 1e-5, "r={r}");
            // F = −K in two dimensions.
            let k = c.metric().gaussian_curvature(c.center(r).0);
            assert!((c.curvature_datum(r) + k).abs() < 1e-5);
        }
    }

    #[test]
    fn jacobian_matches_chart_differences() {
        let c = bumped_chart(2);
        let (r, y, h) = (0.6, 0.12, 1e-4);
        let p = c.point(r, y);
        let dr = (c.point(r + h, y).x - c.point(r - h, y).x) / (2.0 * h);
        let dy = (c.point(r, y + h).x - c.point(r, y - h).x) / (2.0 * h);
        assert!((p.dx_dr - dr).norm() < 1e-7);
        assert!((p.dx_dy - dy).norm() < 1e-7);
        assert!((p.metric[1][1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn too_wide_tube_is_rejected() {
        // Strong positive curvature focuses normal geodesics.
        let g = Metric::from_name("radial-bump(-0.6,0.6)").unwrap();
        let x = Point::new(-1.0, 0.0);
        let p = trace_geodesic(&g, x, Point::new(1.0, 0.0) / g.factor_at(x), 1e-3).unwrap();
        let err = build_fermi_chart(&g, &p, 3.0, 2).unwrap_err();
        assert!(matches!(err, Error::Width(_)));
    }
}
