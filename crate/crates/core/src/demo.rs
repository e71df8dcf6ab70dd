//! Built-in demonstration systems on the torus `T^2` with golden-mean
//! frequency `w = (1, (1 + sqrt 5) / 2)`.
//!
//! - `elliptic`: `x' = eps (A x + (cos theta_1, 0))`, `A = [[0, 1], [-1, 0]]`.
//! - `nonlinear`: the same plus `(x_2^2, x_1 x_2)`.
//! - `hyperbolic`: `A = [[0, 1], [1, 0]]` with the same forcing.

use crate::averaging::AveragingOptions;
use crate::kam::pipeline::SolveOptions;
use crate::kam::{EngineConfig, Schedule};
use crate::system::{CoeffRecord, SystemRecord};
use crate::torus::Truncation;

pub const GOLDEN: f64 = 1.618_033_988_749_895;
pub const DEMO_EPS: f64 = 1e-3;

fn term(k: [i32; 2], alpha: [u32; 2], re: [f64; 2]) -> CoeffRecord {
    CoeffRecord { k: k.to_vec(), alpha: alpha.to_vec(), re: re.to_vec(), im: vec![] }
}

fn forced_linear(a: [[f64; 2]; 2]) -> Vec<CoeffRecord> {
    vec![
        term([0, 0], [1, 0], [a[0][0], a[1][0]]),
        term([0, 0], [0, 1], [a[0][1], a[1][1]]),
        term([1, 0], [0, 0], [0.5, 0.0]),
        term([-1, 0], [0, 0], [0.5, 0.0]),
    ]
}

fn record(f: Vec<CoeffRecord>) -> SystemRecord {
    SystemRecord {
        n: 2,
        omega: vec![1.0, GOLDEN],
        gamma: 0.1,
        tau: 1.2,
        a: 1.0,
        b: 2.0,
        rho: 0.25,
        r: 0.5,
        center: None,
        f,
        g: vec![],
    }
}

pub fn elliptic() -> SystemRecord {
    record(forced_linear([[0.0, 1.0], [-1.0, 0.0]]))
}

pub fn nonlinear() -> SystemRecord {
    let mut f = forced_linear([[0.0, 1.0], [-1.0, 0.0]]);
    f.push(term([0, 0], [0, 2], [1.0, 0.0]));
    f.push(term([0, 0], [1, 1], [0.0, 1.0]));
    record(f)
}

pub fn hyperbolic() -> SystemRecord {
    record(forced_linear([[0.0, 1.0], [1.0, 0.0]]))
}

pub fn by_name(name: &str) -> Option<SystemRecord> {
    match name {
        "elliptic" | "linear" => Some(elliptic()),
        "nonlinear" => Some(nonlinear()),
        "hyperbolic" => Some(hyperbolic()),
        _ => None,
    }
}

pub fn schedule(rho0: f64) -> Schedule {
    Schedule { rho0, c0: 0.2, kappa: 1.5, tau: 1.2, gamma: 0.1, m_max: 12, p_tol: 1e-14, k_trunc: 30, deg_max: 4 }
}

pub fn options(rho0: f64) -> SolveOptions {
    SolveOptions {
        averaging: AveragingOptions { trunc: Truncation::new(30, 4), neumann_terms: 8, divisor_floor: 1e-13 },
        margin_fraction: 0.8,
        engine: EngineConfig::new(schedule(rho0)),
    }
}
