//! Sample grids and the data-parallel map over them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chart::ChartSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Lattice points per coordinate.
    pub lattice: usize,
    /// Uniform random points drawn in the sampling region.
    pub random: usize,
    pub seed: u64,
    /// Distance kept from the boundary of the sampling region.
    pub margin: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lattice: 5,
            random: 400,
            seed: 7,
            margin: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleGrid {
    spec: GridSpec,
    points: Vec<Vec<f64>>,
    lattice_points: usize,
    execution: Execution,
}

impl SampleGrid {
    pub fn new(chart: &ChartSpec, spec: &GridSpec) -> Self {
        let dim = chart.dim();
        let mut points = Vec::new();
        if spec.lattice > 0 {
            let axes: Vec<Vec<f64>> = chart
                .domain()
                .iter()
                .map(|iv| {
                    let lo = iv.lo + spec.margin;
                    let hi = iv.hi - spec.margin;
                    if spec.lattice == 1 {
                        vec![0.5 * (lo + hi)]
                    } else {
                        let k = spec.lattice - 1;
                        (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect()
                    }
                })
                .collect();
            let total = spec.lattice.pow(dim as u32);
            for flat in 0..total {
                let mut rest = flat;
                let mut p = vec![0.0; dim];
                for c in (0..dim).rev() {
                    p[c] = axes[c][rest % spec.lattice];
                    rest /= spec.lattice;
                }
                if chart.in_region(&p, spec.margin) {
                    points.push(p);
                }
            }
        }
        let lattice_points = points.len();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut drawn = 0;
        let mut attempts = 0usize;
        while drawn < spec.random && attempts < spec.random.saturating_mul(1000).max(1000) {
            attempts += 1;
            let p: Vec<f64> = chart
                .domain()
                .iter()
                .map(|iv| rng.random_range((iv.lo + spec.margin)..=(iv.hi - spec.margin)))
                .collect();
            if chart.in_region(&p, spec.margin) {
                points.push(p);
                drawn += 1;
            }
        }
        SampleGrid {
            spec: spec.clone(),
            points,
            lattice_points,
            execution: Execution::default(),
        }
    }

    /// A grid over explicitly given points.
    pub fn from_points(points: Vec<Vec<f64>>) -> Self {
        SampleGrid {
            spec: GridSpec {
                lattice: 0,
                random: 0,
                seed: 0,
                margin: 0.0,
            },
            lattice_points: 0,
            points,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn execution(&self) -> Execution {
        self.execution
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lattice_points(&self) -> usize {
        self.lattice_points
    }

    /// Applies `f` to every point, returning results in point order.
    pub fn map<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync + Send,
    {
        par_map(self.execution, &self.points, |p| f(p))
    }
}

/// Order-preserving map, parallel when enabled and requested.
pub fn par_map<I, T, F>(execution: Execution, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if execution == Execution::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = execution;
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_reproducible_and_inside_region() {
        let chart = ChartSpec::standard(1, 3.0).with_transverse_radius(3.0);
        let spec = GridSpec {
            lattice: 3,
            random: 50,
            seed: 11,
            margin: 1e-3,
        };
        let a = SampleGrid::new(&chart, &spec);
        let b = SampleGrid::new(&chart, &spec);
        assert_eq!(a.points(), b.points());
        assert_eq!(a.len(), a.lattice_points() + 50);
        assert!(a.points().iter().all(|p| chart.in_region(p, 1e-3)));
        let c = SampleGrid::new(&chart, &GridSpec { seed: 12, ..spec });
        assert_ne!(a.points(), c.points());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let chart = ChartSpec::standard(1, 1.0);
        let grid = SampleGrid::new(&chart, &GridSpec::default());
        let f = |p: &[f64]| p.iter().map(|x| x.sin()).sum::<f64>();
        let par = grid.clone().with_execution(Execution::Parallel).map(f);
        let seq = grid.with_execution(Execution::Sequential).map(f);
        assert_eq!(par, seq);
    }
}
