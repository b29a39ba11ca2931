//! Classic minimization benchmarks used to calibrate the swarm. The swarm
//! maximizes, so callers negate these.

use std::f64::consts::{E, PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    Sphere,
    Rastrigin,
    Rosenbrock,
    Ackley,
    Griewank,
}

impl TestFunction {
    pub const ALL: [TestFunction; 5] = [
        TestFunction::Sphere,
        TestFunction::Rastrigin,
        TestFunction::Rosenbrock,
        TestFunction::Ackley,
        TestFunction::Griewank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Sphere => "sphere",
            TestFunction::Rastrigin => "rastrigin",
            TestFunction::Rosenbrock => "rosenbrock",
            TestFunction::Ackley => "ackley",
            TestFunction::Griewank => "griewank",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Conventional symmetric search range `[-r, r]` per dimension.
    pub fn range(self) -> f64 {
        match self {
            TestFunction::Sphere => 5.0,
            TestFunction::Rastrigin => 5.12,
            TestFunction::Rosenbrock => 2.048,
            TestFunction::Ackley => 32.768,
            TestFunction::Griewank => 600.0,
        }
    }

    /// Every function has its global minimum 0.
    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Sphere => x.iter().map(|v| v * v).sum(),
            TestFunction::Rastrigin => x
                .iter()
                .map(|v| v * v - 10.0 * (2.0 * PI * v).cos() + 10.0)
                .sum(),
            TestFunction::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
            TestFunction::Ackley => {
                let n = x.len() as f64;
                let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
                let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
                (-20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E).max(0.0)
            }
            TestFunction::Griewank => {
                let s = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
                let p: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
                    .product();
                s - p + 1.0
            }
        }
    }

    /// Location of the global minimum in `dim` dimensions.
    pub fn minimizer(self, dim: usize) -> Vec<f64> {
        match self {
            TestFunction::Rosenbrock => vec![1.0; dim],
            _ => vec![0.0; dim],
        }
    }
}
