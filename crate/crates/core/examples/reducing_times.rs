//! Reducing times `T_n = inf{t : |B_t| ≥ α_n}` read off passage records,
//! the Doss bound on the stopped process, and `E|X_{T_n}|`.

use slmj::classify::krickeberg_norm;
use slmj::filtration::{detect_passages, LevelSet};
use slmj::projection::{reducing_times, stopped};
use slmj::stochastics::{inverse_path, sample_bessel3_coupled, TimeGrid};
use slmj::RngSpec;

fn main() -> slmj::Result<()> {
    let alphas = [0.25, 0.5, 0.75, 0.9];
    let levels = LevelSet::symmetric(alphas.to_vec())?;
    let grid = TimeGrid::with_step(3.0, 1.0 / 8192.0)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for s in 0..2000 {
        let (radius, driver) = sample_bessel3_coupled(grid, 1.0, RngSpec::new(9, s))?;
        let x = inverse_path(&radius)?;
        let rec = detect_passages(&driver, &levels, None)?;
        let rts = reducing_times(&rec, &alphas)?;
        let mut row = Vec::new();
        for rt in &rts {
            let (sup, value) = stopped(&x, rt);
            worst = worst.max(sup * (1.0 - rt.alpha));
            row.push((value, rt.censored));
        }
        rows.push(row);
    }
    println!("max of sup X^T (1 - alpha) over paths: {worst:.4} (bounded by 1)");
    let k = krickeberg_norm(&rows)?;
    for (a, (e, c)) in alphas.iter().zip(k.estimates.iter().zip(&k.censored)) {
        println!("alpha = {a:<5} E|X_T| = {:.4} ± {:.4}, censored {:.1}%", e.mean, e.se, 100.0 * c);
    }
    Ok(())
}
