//! Two-dimensional Nelder–Mead over `(θ, φ)`.

use crate::sh::Direction;

/// Simplex-search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    /// Edge length of the initial simplex, radians.
    pub initial_step: f64,
    /// Stop once every vertex lies within this distance of every other, radians.
    pub diameter_tol: f64,
    pub max_evals: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            initial_step: 5f64.to_radians(),
            diameter_tol: 1e-4,
            max_evals: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadResult {
    pub best: Direction,
    pub value: f64,
    pub evals: usize,
    /// False when the evaluation budget ran out first.
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` starting from `start`.
///
/// Vertices live in unbounded `(θ, φ)` coordinates and are mapped onto the
/// sphere with [`Direction::from_unbounded`] before each evaluation, which wraps
/// φ and reflects θ across the poles.
pub fn nelder_mead_2d<F>(mut f: F, start: Direction, cfg: &NelderMeadConfig) -> NelderMeadResult
where
    F: FnMut(Direction) -> f64,
{
    let mut evals = 0usize;
    let mut eval = |p: [f64; 2], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(Direction::from_unbounded(p[0], p[1]));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let x0 = [start.theta, start.phi];
    let h = cfg.initial_step;
    let mut simplex = vec![x0, [x0[0] + h, x0[1]], [x0[0], x0[1] + h]];
    let mut values: Vec<f64> = Vec::with_capacity(3);
    for p in &simplex {
        values.push(eval(*p, &mut evals));
    }
    let mut converged = false;

    loop {
        // stable sort keeps the earlier vertex ahead on ties
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i]).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if diameter(&simplex) < cfg.diameter_tol {
            converged = true;
            break;
        }
        if evals >= cfg.max_evals {
            break;
        }

        let c = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let worst = simplex[2];
        let along = |t: f64| [c[0] + t * (c[0] - worst[0]), c[1] + t * (c[1] - worst[1])];

        let xr = along(REFLECT);
        let fr = eval(xr, &mut evals);
        if fr < values[0] {
            let xe = along(REFLECT * EXPAND);
            let fe = eval(xe, &mut evals);
            if fe < fr {
                simplex[2] = xe;
                values[2] = fe;
            } else {
                simplex[2] = xr;
                values[2] = fr;
            }
            continue;
        }
        if fr < values[1] {
            simplex[2] = xr;
            values[2] = fr;
            continue;
        }
        if fr < values[2] {
            let xc = along(REFLECT * CONTRACT);
            let fc = eval(xc, &mut evals);
            if fc <= fr {
                simplex[2] = xc;
                values[2] = fc;
                continue;
            }
        } else {
            let xcc = along(-CONTRACT);
            let fcc = eval(xcc, &mut evals);
            if fcc < values[2] {
                simplex[2] = xcc;
                values[2] = fcc;
                continue;
            }
        }
        let best = simplex[0];
        for i in 1..3 {
            simplex[i] = [
                best[0] + SHRINK * (simplex[i][0] - best[0]),
                best[1] + SHRINK * (simplex[i][1] - best[1]),
            ];
            values[i] = eval(simplex[i], &mut evals);
        }
    }

    NelderMeadResult {
        best: Direction::from_unbounded(simplex[0][0], simplex[0][1]),
        value: values[0],
        evals,
        converged,
    }
}

fn diameter(simplex: &[[f64; 2]]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..simplex.len() {
        for j in (i + 1)..simplex.len() {
            let dx = simplex[i][0] - simplex[j][0];
            let dy = simplex[i][1] - simplex[j][1];
            d = d.max((dx * dx + dy * dy).sqrt());
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |d: Direction| (d.theta - 1.0).powi(2) + (d.phi - 2.0).powi(2);
        let r = nelder_mead_2d(f, Direction::new(1.3, 2.3), &NelderMeadConfig::default());
        assert!((r.best.theta - 1.0).abs() < 1e-3);
        assert!((r.best.phi - 2.0).abs() < 1e-3);
        assert!(r.converged);
        assert!(r.evals <= 200);
    }

    #[test]
    fn constant_function_returns_start() {
        let start = Direction::new(0.7, 4.0);
        let r = nelder_mead_2d(|_| 3.0, start, &NelderMeadConfig::default());
        assert_eq!(r.best, start);
        assert_eq!(r.value, 3.0);
    }

    #[test]
    fn budget_exhaustion_returns_best_vertex() {
        let cfg = NelderMeadConfig {
            max_evals: 10,
            ..Default::default()
        };
        let f = |d: Direction| (d.theta - 1.0).powi(2) + (d.phi - 2.0).powi(2);
        let start = Direction::new(0.2, 0.5);
        let r = nelder_mead_2d(f, start, &cfg);
        assert!(!r.converged);
        assert!(r.value <= f(start));
        assert!((r.value - f(r.best)).abs() < 1e-15);
    }

    #[test]
    fn wraps_across_azimuth_seam() {
        // minimum at φ = 0.05 approached from φ = 6.2
        let target = Direction::new(1.2, 0.05);
        let f = |d: Direction| d.angle_to(&target).powi(2);
        let r = nelder_mead_2d(f, Direction::new(1.1, 6.2), &NelderMeadConfig::default());
        assert!(r.best.angle_to(&target) < 1e-3);
    }

    #[test]
    fn reflects_across_pole() {
        let target = Direction::new(0.05, 3.3);
        let f = |d: Direction| d.angle_to(&target).powi(2);
        let r = nelder_mead_2d(f, Direction::new(0.1, 0.2), &NelderMeadConfig::default());
        assert!(r.best.angle_to(&target) < 2e-3, "{:?}", r.best);
    }
}
