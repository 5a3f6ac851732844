//! Simulates a small wind farm portfolio and prints summary statistics.
//!
//! ```bash
//! cargo run --release --example simulate
//! cargo run --release --example simulate -- /tmp/power.csv
//! ```

use windcast::data::{write_series, Observations, SiteSet, ValueScale};
use windcast::sim::{simulate, SimConfig};

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn main() -> windcast::Result<()> {
    let sites = SiteSet::new(
        vec!["coast".into(), "ridge".into(), "inland".into()],
        vec![20.0, 35.0, 12.5],
    )?;
    let cfg = SimConfig::homogeneous(sites.clone(), 0.7, 42);
    let hours = 24 * 365;
    let out = simulate(&cfg, hours)?;

    let columns: Vec<Vec<f64>> = (0..sites.len())
        .map(|s| {
            (0..out.power.len())
                .map(|t| out.power.get(t, s).unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    println!("{hours} hours from {}", out.power.start());
    println!(
        "{:<8} {:>8} {:>8} {:>8} {:>8}",
        "site", "mean", "lag1", "p(y=0)", "p(y=1)"
    );
    for (s, id) in sites.ids().iter().enumerate() {
        let y = &columns[s];
        let n = y.len() as f64;
        println!(
            "{id:<8} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            y.iter().sum::<f64>() / n,
            correlation(&y[..y.len() - 1], &y[1..]),
            y.iter().filter(|v| **v == 0.0).count() as f64 / n,
            y.iter().filter(|v| **v == 1.0).count() as f64 / n,
        );
    }
    println!(
        "power correlation coast/ridge  {:.3}",
        correlation(&columns[0], &columns[1])
    );
    println!(
        "power correlation coast/inland {:.3}",
        correlation(&columns[0], &columns[2])
    );
    println!(
        "mean wind speed at coast {:.2} m/s",
        out.speed.column(0).iter().sum::<f64>() / hours as f64
    );

    if let Some(path) = std::env::args().nth(1) {
        write_series(&path, &out.power, ValueScale::Capacity)?;
        println!("wrote power in MW to {path}");
    }
    Ok(())
}
