//! Metric-space side of the density manifold: exact discrete quadratic-cost
//! transport, polygonal and Riemannian curve lengths, and characteristic
//! advection of densities.
//!
//! The transport LP is solved exactly with a transportation simplex (u-v
//! method on the basis spanning tree); no entropic regularization anywhere,
//! since these distances serve as oracles.

use crate::curve::DensityCurve;
use crate::density::{otto_inner, Density};
use crate::error::{Error, Result};
use crate::field::{require_same_grid, ScalarField};
use crate::grid::Grid;
use crate::ops::gradient;
use crate::spectral::TrigInterpolant;

/// Node-count cap for the exact LP.
pub const MAX_LP_NODES: usize = 4096;

/// A sparse optimal coupling between two discrete measures.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// (source node, target node, mass), basic cells with positive flow.
    pub entries: Vec<(usize, usize, f64)>,
    /// Total quadratic cost of the plan.
    pub cost: f64,
}

impl TransportPlan {
    /// Largest violation of the marginal constraints.
    pub fn marginal_defect(&self, mu: &[f64], nu: &[f64]) -> f64 {
        let mut rows = vec![0.0; mu.len()];
        let mut cols = vec![0.0; nu.len()];
        for &(i, j, m) in &self.entries {
            rows[i] += m;
            cols[j] += m;
        }
        let r = rows.iter().zip(mu).map(|(&s, &m)| (s - m).abs()).fold(0.0, f64::max);
        let c = cols.iter().zip(nu).map(|(&s, &m)| (s - m).abs()).fold(0.0, f64::max);
        r.max(c)
    }
}

fn node_masses(rho: &Density) -> Vec<f64> {
    rho.values().iter().zip(rho.grid().weights()).map(|(&v, &w)| v * w).collect()
}

fn pairwise_cost(grid: &Grid) -> Result<Vec<f64>> {
    let n = grid.n_nodes();
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = grid.flat_distance(i, j)?;
            cost[i * n + j] = d * d;
            cost[j * n + i] = d * d;
        }
    }
    Ok(cost)
}

/// Exact squared-distance optimal coupling between the quadrature masses of
/// two densities on one flat grid.
pub fn w2_plan(mu: &Density, nu: &Density) -> Result<TransportPlan> {
    require_same_grid(mu.grid(), nu.grid())?;
    let grid = mu.grid();
    let n = grid.n_nodes();
    if n > MAX_LP_NODES {
        return Err(Error::GridTooLarge { nodes: n, limit: MAX_LP_NODES });
    }
    let cost = pairwise_cost(grid)?;
    let supplies = node_masses(mu);
    let demands = node_masses(nu);
    let (entries, total) = simplex::solve(&supplies, &demands, &cost, n)?;
    let plan = TransportPlan { entries, cost: total };
    let defect = plan.marginal_defect(&supplies, &demands);
    if defect > 1e-10 {
        return Err(Error::Instability(format!("transport marginals violated by {defect:.3e}")));
    }
    Ok(plan)
}

/// Exact discrete quadratic Wasserstein distance.
pub fn w2_exact(mu: &Density, nu: &Density) -> Result<f64> {
    Ok(w2_plan(mu, nu)?.cost.max(0.0).sqrt())
}

/// Riemannian length of a curve: composite quadrature of the Otto speed
/// over the stored samples (Simpson on uniform spacing, trapezoid otherwise).
pub fn riemannian_length(curve: &DensityCurve) -> Result<f64> {
    let m = curve.len();
    let mut speeds = Vec::with_capacity(m);
    for j in 0..m {
        let e = otto_inner(curve.density(j), curve.potential(j), curve.potential(j))?;
        speeds.push(e.max(0.0).sqrt());
    }
    let times = curve.times();
    let dt = times[1] - times[0];
    let uniform = times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() < 1e-12 * dt.abs());
    if uniform && m >= 3 && (m - 1) % 2 == 0 {
        // composite Simpson
        let mut acc = speeds[0] + speeds[m - 1];
        for (j, &s) in speeds.iter().enumerate().take(m - 1).skip(1) {
            acc += if j % 2 == 1 { 4.0 * s } else { 2.0 * s };
        }
        Ok(acc * dt / 3.0)
    } else {
        let mut acc = 0.0;
        for j in 0..m - 1 {
            acc += 0.5 * (speeds[j] + speeds[j + 1]) * (times[j + 1] - times[j]);
        }
        Ok(acc)
    }
}

/// Sum of exact transport distances over the uniform partition of size `J`,
/// resampling the curve linearly in time as needed.
pub fn polygonal_length(curve: &DensityCurve, segments: usize) -> Result<f64> {
    if segments == 0 {
        return Err(Error::InvalidInput("need at least one segment".into()));
    }
    let (t0, t1) = (curve.start_time(), curve.end_time());
    let mut total = 0.0;
    let mut prev = curve.density_at(t0)?;
    for j in 1..=segments {
        let t = t0 + (t1 - t0) * j as f64 / segments as f64;
        let next = curve.density_at(t)?;
        total += w2_exact(&prev, &next)?;
        prev = next;
    }
    Ok(total)
}

/// Result of pushing a density forward under the characteristic flow of a
/// curve's potentials.
pub struct FlowAdvection {
    /// Deposited pushforward density.
    pub density: Density,
    /// Final particle positions, one per grid node.
    pub positions: Vec<[f64; 2]>,
    /// Quadratic displacement cost of the deterministic particle map,
    /// `sum rho0_i w_i d(x_i, X_i)^2`.
    pub monge_cost: f64,
    /// Total deposited mass before normalization; equals the initial mass
    /// to round-off because the splat weights sum to one.
    pub deposited_mass: f64,
}

/// Track particles seeded at the grid nodes through the time-interpolated
/// velocity field `grad phi(t)` and deposit their masses with linear
/// (area-weighted) splatting. Flat bases only.
pub fn advect_flow(rho0: &Density, curve: &DensityCurve, steps: usize) -> Result<FlowAdvection> {
    require_same_grid(rho0.grid(), curve.grid())?;
    let grid = rho0.grid().clone();
    if !grid.is_flat() {
        return Err(Error::Unsupported("characteristic advection needs a flat base".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("need at least one step".into()));
    }
    let dim = grid.dim();
    let n = grid.n_nodes();

    // Interpolants of the velocity components at every stored curve time.
    let mut velocity: Vec<Vec<TrigInterpolant>> = Vec::with_capacity(curve.len());
    for j in 0..curve.len() {
        let grad = gradient(curve.potential(j).field());
        velocity
            .push((0..dim).map(|axis| grid.engine().interpolant(grad.component(axis))).collect());
    }
    let times = curve.times().to_vec();
    let eval = |t: f64, p: [f64; 2]| -> [f64; 2] {
        let t = t.clamp(times[0], *times.last().unwrap());
        let hi = match times.iter().position(|&tj| tj >= t) {
            Some(0) => 1,
            Some(j) => j,
            None => times.len() - 1,
        };
        let lo = hi - 1;
        let theta = (t - times[lo]) / (times[hi] - times[lo]);
        let mut v = [0.0, 0.0];
        for axis in 0..dim {
            let a = velocity[lo][axis].eval(p[0], p[1]);
            let b = velocity[hi][axis].eval(p[0], p[1]);
            v[axis] = (1.0 - theta) * a + theta * b;
        }
        v
    };

    let mut positions: Vec<[f64; 2]> = (0..n).map(|node| grid.coord(node)).collect();
    let (t0, t1) = (times[0], *times.last().unwrap());
    let dt = (t1 - t0) / steps as f64;
    for step in 0..steps {
        let t = t0 + dt * step as f64;
        for p in positions.iter_mut() {
            let k1 = eval(t, *p);
            let k2 = eval(t + dt / 2.0, offset(*p, k1, dt / 2.0));
            let k3 = eval(t + dt / 2.0, offset(*p, k2, dt / 2.0));
            let k4 = eval(t + dt, offset(*p, k3, dt));
            for axis in 0..2 {
                p[axis] += dt / 6.0 * (k1[axis] + 2.0 * k2[axis] + 2.0 * k3[axis] + k4[axis]);
            }
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::Instability(format!("particle blow-up at step {step}")));
            }
        }
    }

    // Mass-conserving linear deposit.
    let shape = grid.shape();
    let periods = &grid.spec().periods;
    let mut deposited = vec![0.0; n];
    let masses = node_masses(rho0);
    for (node, p) in positions.iter().enumerate() {
        let mass = masses[node];
        match dim {
            1 => {
                let h = periods[0] / shape[0] as f64;
                let s = (p[0] / h).rem_euclid(shape[0] as f64);
                let i0 = s.floor() as usize % shape[0];
                let f = s - s.floor();
                deposited[i0] += mass * (1.0 - f);
                deposited[(i0 + 1) % shape[0]] += mass * f;
            }
            _ => {
                let hx = periods[0] / shape[0] as f64;
                let hy = periods[1] / shape[1] as f64;
                let sx = (p[0] / hx).rem_euclid(shape[0] as f64);
                let sy = (p[1] / hy).rem_euclid(shape[1] as f64);
                let (ix, iy) = (sx.floor() as usize % shape[0], sy.floor() as usize % shape[1]);
                let (fx, fy) = (sx - sx.floor(), sy - sy.floor());
                let ixp = (ix + 1) % shape[0];
                let iyp = (iy + 1) % shape[1];
                deposited[ix * shape[1] + iy] += mass * (1.0 - fx) * (1.0 - fy);
                deposited[ixp * shape[1] + iy] += mass * fx * (1.0 - fy);
                deposited[ix * shape[1] + iyp] += mass * (1.0 - fx) * fy;
                deposited[ixp * shape[1] + iyp] += mass * fx * fy;
            }
        }
    }
    let deposited_mass: f64 = deposited.iter().sum();
    let density_values: Vec<f64> =
        deposited.iter().zip(grid.weights()).map(|(&m, &w)| m / w).collect();
    let density = Density::new(ScalarField::new(grid.clone(), density_values)?)?;

    let mut monge_cost = 0.0;
    for (node, p) in positions.iter().enumerate() {
        let q = grid.coord(node);
        let mut d2 = 0.0;
        for axis in 0..dim {
            let period = periods[axis];
            let mut delta = (p[axis] - q[axis]).abs() % period;
            if delta > period / 2.0 {
                delta = period - delta;
            }
            d2 += delta * delta;
        }
        monge_cost += masses[node] * d2;
    }

    Ok(FlowAdvection { density, positions, monge_cost, deposited_mass })
}

fn offset(p: [f64; 2], v: [f64; 2], s: f64) -> [f64; 2] {
    [p[0] + v[0] * s, p[1] + v[1] * s]
}

/// Transportation simplex on a dense cost table.
mod simplex {
    use crate::error::{Error, Result};

    /// Solve the balanced transportation problem exactly. Returns the basic
    /// cells with positive flow and the optimal cost.
    pub fn solve(
        supplies: &[f64],
        demands: &[f64],
        cost: &[f64],
        stride: usize,
    ) -> Result<(Vec<(usize, usize, f64)>, f64)> {
        let m = supplies.len();
        let n = demands.len();
        let c = |i: usize, j: usize| cost[i * stride + j];

        // Northwest-corner initial basis: exactly m + n - 1 cells.
        let mut flow: Vec<f64> = Vec::with_capacity(m + n - 1);
        let mut cells: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
        {
            let mut a: Vec<f64> = supplies.to_vec();
            let mut b: Vec<f64> = demands.to_vec();
            let (mut i, mut j) = (0usize, 0usize);
            loop {
                let q = a[i].min(b[j]);
                cells.push((i, j));
                flow.push(q);
                a[i] -= q;
                b[j] -= q;
                if i == m - 1 && j == n - 1 {
                    break;
                }
                if a[i] <= 0.0 && i < m - 1 {
                    i += 1;
                } else {
                    j += 1;
                }
            }
        }

        let mut adjacency_row: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut adjacency_col: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (idx, &(i, j)) in cells.iter().enumerate() {
            adjacency_row[i].push(idx);
            adjacency_col[j].push(idx);
        }

        let cost_scale = cost.iter().cloned().fold(0.0_f64, f64::max).max(1.0);
        let tol = 1e-12 * cost_scale;
        let max_pivots = 200 * (m + n) * (m + n).max(64);
        let mut degenerate_streak = 0usize;
        let bland_after = 20 * (m + n);

        let mut u = vec![0.0_f64; m];
        let mut v = vec![0.0_f64; n];
        let mut seen_row = vec![false; m];
        let mut seen_col = vec![false; n];

        for _pivot in 0..max_pivots {
            // Duals from the basis tree.
            seen_row.iter_mut().for_each(|s| *s = false);
            seen_col.iter_mut().for_each(|s| *s = false);
            u[0] = 0.0;
            seen_row[0] = true;
            let mut stack: Vec<(bool, usize)> = vec![(true, 0)];
            while let Some((is_row, node)) = stack.pop() {
                if is_row {
                    for &idx in &adjacency_row[node] {
                        let (i, j) = cells[idx];
                        if !seen_col[j] {
                            v[j] = c(i, j) - u[i];
                            seen_col[j] = true;
                            stack.push((false, j));
                        }
                    }
                } else {
                    for &idx in &adjacency_col[node] {
                        let (i, j) = cells[idx];
                        if !seen_row[i] {
                            u[i] = c(i, j) - v[j];
                            seen_row[i] = true;
                            stack.push((true, i));
                        }
                    }
                }
            }
            if seen_row.iter().any(|s| !s) || seen_col.iter().any(|s| !s) {
                return Err(Error::Instability("transport basis lost connectivity".into()));
            }

            // Entering arc: Dantzig rule, Bland after a degenerate streak.
            let bland = degenerate_streak > bland_after;
            let mut entering: Option<(usize, usize, f64)> = None;
            'scan: for i in 0..m {
                for j in 0..n {
                    let r = c(i, j) - u[i] - v[j];
                    if r < -tol {
                        match (bland, &entering) {
                            (true, _) => {
                                entering = Some((i, j, r));
                                break 'scan;
                            }
                            (false, Some((_, _, best))) if r >= *best => {}
                            _ => entering = Some((i, j, r)),
                        }
                    }
                }
            }
            let Some((ei, ej, _)) = entering else {
                let mut total = 0.0;
                let mut out = Vec::new();
                for (idx, &(i, j)) in cells.iter().enumerate() {
                    total += flow[idx] * c(i, j);
                    if flow[idx] > 0.0 {
                        out.push((i, j, flow[idx]));
                    }
                }
                return Ok((out, total));
            };

            // Unique tree path from supply ei to demand ej.
            let path = tree_path(&cells, &adjacency_row, &adjacency_col, m, n, ei, ej)?;

            // Entering cell takes +theta; path cells alternate starting with -.
            let mut theta = f64::INFINITY;
            let mut leaving = usize::MAX;
            for (k, &idx) in path.iter().enumerate() {
                if k % 2 == 0 && flow[idx] < theta {
                    theta = flow[idx];
                    leaving = idx;
                }
            }
            if !theta.is_finite() {
                return Err(Error::Instability("unbounded transport pivot".into()));
            }
            if theta <= 0.0 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            for (k, &idx) in path.iter().enumerate() {
                if k % 2 == 0 {
                    flow[idx] -= theta;
                } else {
                    flow[idx] += theta;
                }
            }

            // Replace the leaving cell with the entering one.
            let (li, lj) = cells[leaving];
            adjacency_row[li].retain(|&idx| idx != leaving);
            adjacency_col[lj].retain(|&idx| idx != leaving);
            cells[leaving] = (ei, ej);
            flow[leaving] = theta;
            adjacency_row[ei].push(leaving);
            adjacency_col[ej].push(leaving);
        }
        Err(Error::Instability("transport simplex exceeded its pivot budget".into()))
    }

    /// Cells on the unique basis-tree path from supply node `si` to demand
    /// node `tj`, ordered from the supply end.
    fn tree_path(
        cells: &[(usize, usize)],
        adjacency_row: &[Vec<usize>],
        adjacency_col: &[Vec<usize>],
        m: usize,
        n: usize,
        si: usize,
        tj: usize,
    ) -> Result<Vec<usize>> {
        // BFS over the bipartite tree; vertices 0..m rows, m..m+n columns.
        let total = m + n;
        let target = m + tj;
        let mut parent_edge = vec![usize::MAX; total];
        let mut parent_vertex = vec![usize::MAX; total];
        let mut visited = vec![false; total];
        visited[si] = true;
        let mut queue = std::collections::VecDeque::from([si]);
        while let Some(vtx) = queue.pop_front() {
            if vtx == target {
                break;
            }
            let edges = if vtx < m { &adjacency_row[vtx] } else { &adjacency_col[vtx - m] };
            for &idx in edges {
                let (i, j) = cells[idx];
                let next = if vtx < m { m + j } else { i };
                if !visited[next] {
                    visited[next] = true;
                    parent_edge[next] = idx;
                    parent_vertex[next] = vtx;
                    queue.push_back(next);
                }
            }
        }
        if !visited[target] {
            return Err(Error::Instability("transport basis path missing".into()));
        }
        let mut path = Vec::new();
        let mut vtx = target;
        while vtx != si {
            path.push(parent_edge[vtx]);
            vtx = parent_vertex[vtx];
        }
        path.reverse();
        Ok(path)
    }
}
