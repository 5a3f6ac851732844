//! Reserve sizing from the distribution of the system margin.
//!
//! The margin adds load forecast error, a forced outage and the wind power
//! forecast error. Up and down reserve are the quantiles of its positive and
//! negative parts at `short / (short + hold)`. The example checks them against
//! a brute-force search and shows how the up reserve grows with the penalty
//! for being short.
//!
//! ```bash
//! cargo run --release --example reserve
//! ```

use windcast::decisions::{
    convolve_margin, expected_reserve_cost, grid_search_reserve, optimal_reserves, GridDensity, ReserveProblem,
    SideCost,
};
use windcast::prob::{make_parametric, Family, PredictiveCdf};

/// Grid spacing in units of wind capacity.
const STEP: f64 = 0.002;

fn main() -> windcast::Result<()> {
    let point = 0.45;
    let wind = PredictiveCdf::parametric(
        0,
        24,
        make_parametric(point, 0.12f64.powi(2), Family::CensoredGaussian)?,
    );
    let mut problem = ReserveProblem {
        load_error: GridDensity::gaussian(0.0, 0.04, STEP)?,
        generation_loss: GridDensity::two_point_outage(0.02, 0.25, STEP)?,
        wind_error: GridDensity::wind_error(&wind, point, STEP)?,
        up: SideCost::new(60.0, 4.0)?,
        down: SideCost::new(15.0, 2.0)?,
    };

    for (name, d) in [
        ("load error", &problem.load_error),
        ("outage", &problem.generation_loss),
        ("wind error", &problem.wind_error),
    ] {
        println!("{name:<11} mean {:>7.4}  sd {:.4}", d.mean(), d.variance().sqrt());
    }
    let margin = convolve_margin(&problem)?;
    println!(
        "{:<11} mean {:>7.4}  sd {:.4}  ({} grid cells)",
        "margin",
        margin.density.mean(),
        margin.density.variance().sqrt(),
        margin.density.len()
    );

    let decision = optimal_reserves(&problem, &margin)?;
    let (up, down) = (margin.positive_part(), margin.negative_part());
    let up_search = grid_search_reserve(&up, &problem.up, 2001);
    let down_search = grid_search_reserve(&down, &problem.down, 2001);
    println!(
        "up reserve   {:.4} (search {:.4}), down reserve {:.4} (search {:.4})",
        decision.q_up, up_search, decision.q_down, down_search
    );
    println!("expected cost {:.4}", decision.expected_cost);

    println!("short penalty  up reserve  expected up cost");
    for short in [10.0, 30.0, 60.0, 200.0, 1000.0] {
        problem.up = SideCost::new(short, 4.0)?;
        let d = optimal_reserves(&problem, &margin)?;
        println!(
            "{short:>13.0} {:>11.4} {:>17.4}",
            d.q_up,
            expected_reserve_cost(&up, &problem.up, d.q_up)
        );
    }
    Ok(())
}
