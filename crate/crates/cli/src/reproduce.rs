use imh_core::cases::{dirichlet_multinomial, exponential_exponential};
use imh_core::general::{rate_report, steps_to_eps};
use imh_core::quadrature::QuadratureConfig;

use crate::output::{num, Csv, Meta, OutDir};
use crate::{Failure, Figure, ReproduceArgs};

/// Success probabilities of the beta-binomial sweep.
pub const STEPS_VS_N_P: [f64; 3] = [0.5, 0.3, 0.1];

/// `N = round(10^(1 + k/4))` for `k = 0..=12`.
pub fn steps_vs_n_grid() -> Vec<u64> {
    (0..=12)
        .map(|k| 10f64.powf(1.0 + 0.25 * k as f64).round() as u64)
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn reproduce(a: &ReproduceArgs) -> Result<(), Failure> {
    let out = OutDir::create(&a.out.out, Meta::from_env(None))?;
    match a.figure {
        Figure::StepsVsTheta => steps_vs_theta(a.epsilon, &out),
        Figure::StepsVsN => steps_vs_n(a.epsilon, &out),
    }
}

fn steps_vs_theta(eps: f64, out: &OutDir) -> Result<(), Failure> {
    let cfg = QuadratureConfig::default();
    let mut csv = Csv::new(&["theta", "wstar", "rate", "steps", "steps_ceil"]);
    csv.note("target Exp(1), proposal Exp(theta)");
    csv.note(format!("epsilon: {}", num(eps)));
    for k in 1..=99 {
        let theta = k as f64 / 100.0;
        let report = rate_report(&exponential_exponential(theta)?, &cfg)?;
        let s = report
            .steps(eps)?
            .ok_or_else(|| Failure::Numerical(format!("theta = {theta}: no geometric rate")))?;
        csv.row(vec![
            num(theta),
            num(report.wstar.unwrap_or(f64::NAN)),
            num(report.exact_rate.unwrap_or(f64::NAN)),
            num(s.fractional),
            s.ceiling.to_string(),
        ]);
    }
    out.csv("steps_vs_theta.csv", &csv)?;
    Ok(())
}

fn steps_vs_n(eps: f64, out: &OutDir) -> Result<(), Failure> {
    let grid = steps_vs_n_grid();
    let mut csv = Csv::new(&["p", "N", "x1", "x2", "wstar", "steps"]);
    csv.note("K = 2, alpha = (1, 1), counts (round(pN), N - round(pN)), uniform proposal on the simplex");
    csv.note(format!("epsilon: {}", num(eps)));
    for &p in &STEPS_VS_N_P {
        let mut top = Vec::new();
        for (k, &n) in grid.iter().enumerate() {
            let x1 = (p * n as f64).round();
            let x2 = n as f64 - x1;
            let case = dirichlet_multinomial(&[1.0, 1.0], &[x1, x2])?;
            let s = steps_to_eps(1.0 - 1.0 / case.wstar, eps)?;
            csv.row(vec![
                num(p),
                n.to_string(),
                num(x1),
                num(x2),
                num(case.wstar),
                num(s.fractional),
            ]);
            if k >= grid.len() - 5 {
                top.push((n as f64, s.fractional));
            }
        }
        println!(
            "p = {}: log-log slope over the top decade {:.4}",
            num(p),
            log_log_slope(&top)
        );
    }
    out.csv("steps_vs_n.csv", &csv)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spans_three_decades() {
        let g = steps_vs_n_grid();
        assert_eq!(g.len(), 13);
        assert_eq!((g[0], g[4], g[8], g[12]), (10, 100, 1000, 10_000));
        assert_eq!(g[1], 18);
    }

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 10.0, 100.0].iter().map(|x: &f64| (*x, 3.0 * x.sqrt())).collect();
        assert!((log_log_slope(&pts) - 0.5).abs() < 1e-12);
    }
}
