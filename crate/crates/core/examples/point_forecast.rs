//! Compares point forecasters against persistence on simulated data.
//!
//! Fits AR, threshold AR and CP-ARX (direction-dependent coefficients with a
//! fitted speed-to-power term) on the first 10,000 hours, then reports RMSE
//! by lead on the remaining hours. The NWP input is the realized wind, so
//! CP-ARX errors are close to the power-curve noise floor.
//!
//! ```bash
//! cargo run --release --example point_forecast
//! ```

use windcast::data::{Observations, SiteSet};
use windcast::point::{
    persistence, CparxSpec, HorizonMode, Inputs, LinearSpec, ModelFamily, PerfectNwp, PointForecaster, RegimeCovariate,
    RegimeRule,
};
use windcast::sim::{simulate, SimConfig};

const TRAIN: usize = 10_000;
const HOURS: usize = 14_000;
const LEADS: usize = 36;
const REPORT: [usize; 5] = [1, 6, 12, 24, 36];

fn main() -> windcast::Result<()> {
    let mut cfg = SimConfig::homogeneous(SiteSet::uniform("farm", 2, 1.0)?, 0.6, 7);
    cfg.power_noise_sd = 0.02;
    let sim = simulate(&cfg, HOURS)?;
    let nwp = PerfectNwp::new(sim.speed.clone(), sim.direction.clone())?;
    let train = sim.power.slice(0, TRAIN);
    let train_inputs = Inputs::new(&train, cfg.start).with_nwp(&nwp);
    let inputs = Inputs::new(&sim.power, cfg.start).with_nwp(&nwp);
    let site = 0;

    let rule = RegimeRule::new(RegimeCovariate::OwnLag(1), vec![0.5])?;
    let families = [
        ("AR(1,2)", ModelFamily::Linear(LinearSpec::ar(site, vec![1, 2], 1))),
        ("TAR", ModelFamily::Linear(LinearSpec::tar(site, vec![1, 2], 1, rule))),
        ("CP-ARX", ModelFamily::Cparx(CparxSpec::new(site, 1))),
    ];

    let origins: Vec<usize> = (TRAIN..sim.power.len() - LEADS).step_by(6).collect();
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut persistence_sse = vec![0.0; LEADS];
    let mut count = vec![0usize; LEADS];
    for &t in &origins {
        let Some(p) = persistence(&inputs, site, t, LEADS) else {
            continue;
        };
        for k in 1..=LEADS {
            if let Some(y) = sim.power.get(t + k, site) {
                persistence_sse[k - 1] += (p[k - 1] - y).powi(2);
                count[k - 1] += 1;
            }
        }
    }
    rows.push(("persistence".into(), persistence_sse));

    for (name, family) in families {
        let forecaster = PointForecaster::fit(&family, HorizonMode::Direct, LEADS, &train_inputs)?;
        let mut sse = vec![0.0; LEADS];
        for &t in &origins {
            let forecast = forecaster.predict(&inputs, t)?;
            for k in 1..=LEADS {
                if let Some(y) = sim.power.get(t + k, site) {
                    sse[k - 1] += (forecast[k - 1] - y).powi(2);
                }
            }
        }
        rows.push((name.into(), sse));
    }

    println!("RMSE (fraction of capacity) over {} origins", origins.len());
    print!("{:<12}", "model");
    for k in REPORT {
        print!(" {:>7}", format!("k={k}"));
    }
    println!();
    for (name, sse) in &rows {
        print!("{name:<12}");
        for k in REPORT {
            print!(" {:>7.4}", (sse[k - 1] / count[k - 1] as f64).sqrt());
        }
        println!();
    }
    let gain = 1.0 - (rows[3].1[23] / rows[0].1[23]).sqrt();
    println!(
        "CP-ARX improvement over persistence at 24 h: {:.1}% (perfect NWP)",
        100.0 * gain
    );
    Ok(())
}
