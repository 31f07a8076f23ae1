//! Strictness verdicts for `dX = σ(X) dB` from the integrals of `x/σ(x)²`.

use slmj::classify::{strictness_classify, strictness_quadrature};
use slmj::stochastics::{Diffusion, SdeModel, Sigma};

/// `σ(x) = x² + x`: strict at infinity, positive at zero.
struct Quadratic;

impl Diffusion for Quadratic {
    fn sigma(&self, x: f64) -> slmj::Result<f64> {
        Ok(x * x + x)
    }
    fn sigma_prime(&self, x: f64) -> slmj::Result<f64> {
        Ok(2.0 * x + 1.0)
    }
    fn domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
}

fn main() -> slmj::Result<()> {
    for p in [2.0, 1.5, 1.0, 0.4] {
        let m = SdeModel::new(1.0, Sigma::power(1.0, p))?;
        let v = strictness_classify(&m, 1.0)?;
        println!("sigma = x^{p:<4} -> {}", v.verdict.as_str());
    }
    for eps in [0.1, 1.0, 10.0] {
        let v = strictness_quadrature(&Quadratic, eps)?;
        println!("sigma = x^2 + x, eps = {eps:<4} -> {}", v.verdict.as_str());
    }
    // the same coefficient as a finite table cannot settle the tails
    let xs: Vec<f64> = (0..=80).map(|i| 10f64.powf(-4.0 + 0.1 * i as f64)).collect();
    let ys = xs.iter().map(|x| x * x + x).collect();
    let tab = Sigma::tabulated(xs, ys)?;
    let v = strictness_quadrature(&tab, 1.0)?;
    println!("sigma = x^2 + x (tabulated), eps = 1    -> {}", v.verdict.as_str());
    Ok(())
}
