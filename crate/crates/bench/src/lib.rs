//! Benchmark fixtures shared by the criterion targets.

use isslab::{assemble_scenario, Config, Scenario};

/// Odd-cubic Dirichlet problem on `(0, 1)` with `n` nodes.
pub fn interval_scenario(n: usize) -> Scenario {
    let text = format!(
        "[grid]\nn_x = {n}\ndt = 1e-3\nhorizon = 1e-3\n[coefficients]\na = 1 + 0.5*x\nc = 1\n\
         [reaction]\nkind = odd_cubic\n[disturbances]\nu0 = sin(pi*x)\nf = 0.1*sin(t)\n\
         [boundary]\nkind = dirichlet\nd = 0.05\n"
    );
    assemble_scenario(&Config::parse(&text).expect("fixture parses")).expect("fixture assembles")
}

/// Same problem on the unit square with `n x n` nodes.
pub fn square_scenario(n: usize) -> Scenario {
    let text = format!(
        "[domain]\nkind = rectangle\nx_hi = 1\ny_hi = 1\n[grid]\nn_x = {n}\nn_y = {n}\ndt = 1e-3\n\
         horizon = 1e-3\n[coefficients]\nc = 1\n[reaction]\nkind = odd_cubic\n\
         [disturbances]\nu0 = sin(pi*x)*sin(pi*y)\n[boundary]\nkind = dirichlet\n"
    );
    assemble_scenario(&Config::parse(&text).expect("fixture parses")).expect("fixture assembles")
}

pub const EXPRESSION: &str = "0.5*sin(pi*x)*exp(-t) + (1 + x^2)*cos(3*t) - abs(x - 0.5)";
