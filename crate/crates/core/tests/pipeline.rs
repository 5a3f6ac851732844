use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use windcast::config::RunConfig;
use windcast::data::{parse_timestamp, SiteSet};
use windcast::decisions::{read_bids, read_prices, write_prices, PriceQuote, PriceRow};
use windcast::error::ErrorClass;
use windcast::pipeline::{files, run_pipeline, run_stage, RunOptions, Stage};
use windcast::prob::{cdf_inverse, io::read_quantile_forecasts};

fn small_config(out: &Path) -> RunConfig {
    let text = format!(
        r#"
seed = 7
out = "{}"

[sites]
ids = ["north", "south"]
capacities = [1.0]

[simulation]
hours = 3000

[model]
train_hours = 2000

[market]
site = "south"
"#,
        out.display()
    );
    RunConfig::from_toml(&text).unwrap()
}

fn read(out: &Path, name: &str) -> String {
    std::fs::read_to_string(out.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn plots() -> RunOptions {
    RunOptions { emit_plots_data: true }
}

#[test]
fn every_stage_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    run_pipeline(&cfg, Stage::Simulate, &plots()).unwrap();

    let headers = [
        (files::POWER, "timestamp,north,south"),
        (files::SPEED, "timestamp,north,south"),
        (files::DIRECTION, "timestamp,north,south"),
        (files::PRICES, "origin,lead_h,pi_c,pi_b,pi_s"),
        (files::POINT_FORECASTS, "origin,site,lead_h,value"),
        (files::FORECASTS, "origin,site,lead_h,alpha,quantile"),
        (files::FAN_CHART, "origin,site,lead_h,coverage,lower,upper"),
        (files::TRAJECTORIES, "origin,traj_id,site,lead_h,value"),
        (files::BIDS, "origin,lead_h,alpha,bid"),
        (
            files::SETTLEMENT,
            "origin,lead_h,strategy,observed,bid,day_ahead,balancing,total,imbalance",
        ),
        (files::RESERVE, "origin,lead_h,q_up,q_down,expected_cost"),
        (files::SCORES, "metric,lead_h,value,se,n"),
        (files::RELIABILITY, "alpha,coverage,n,bin"),
        (files::PIT, "site,lead_h,pit"),
    ];
    for (name, header) in headers {
        assert_eq!(read(dir.path(), name).lines().next(), Some(header), "{name}");
    }
    for name in [
        files::POINT_MODEL,
        files::PROB_MODEL,
        files::COVARIANCE_FIT,
        files::COVARIANCE,
    ] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }

    // Forecasts run up to 43 hours ahead for both sites at every origin.
    let points = read(dir.path(), files::POINT_FORECASTS);
    let mut per_origin: BTreeMap<String, usize> = BTreeMap::new();
    let mut max_lead = 0;
    for line in points.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        *per_origin.entry(fields[0].to_owned()).or_default() += 1;
        max_lead = max_lead.max(fields[2].parse::<usize>().unwrap());
        let v: f64 = fields[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    assert_eq!(max_lead, 43);
    assert!(!per_origin.is_empty());
    assert!(per_origin.values().all(|n| *n == 2 * 43));

    let trajectories = read(dir.path(), files::TRAJECTORIES);
    assert_eq!(trajectories.lines().count() - 1, per_origin.len() * 12 * 2 * 43);
    for line in trajectories.lines().skip(1) {
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }

    let scores = read(dir.path(), files::SCORES);
    for metric in ["crps", "rmse", "rmse_persistence", "energy_score", "pit_ks_statistic"] {
        assert!(
            scores.lines().any(|l| l.starts_with(&format!("{metric},"))),
            "missing {metric}"
        );
    }
}

#[test]
fn rerunning_from_a_later_stage_reproduces_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    run_pipeline(&cfg, Stage::Simulate, &RunOptions::default()).unwrap();
    let later = [
        files::BIDS,
        files::SETTLEMENT,
        files::RESERVE,
        files::SCORES,
        files::PIT,
    ];
    let before: Vec<String> = later.iter().map(|f| read(dir.path(), f)).collect();
    for f in later {
        std::fs::remove_file(dir.path().join(f)).unwrap();
    }
    run_pipeline(&cfg, Stage::Trade, &RunOptions::default()).unwrap();
    for (f, old) in later.iter().zip(&before) {
        assert_eq!(&read(dir.path(), f), old, "{f}");
    }
}

#[test]
fn trade_bids_are_predictive_quantiles_at_the_cost_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    for stage in [Stage::Simulate, Stage::Fit, Stage::Forecast] {
        run_stage(stage, &cfg, &RunOptions::default()).unwrap();
    }
    // Downward cost 10 and upward cost 30 at every hour: alpha = 0.25.
    let flat: Vec<PriceRow> = read_prices(dir.path().join(files::PRICES))
        .unwrap()
        .into_iter()
        .map(|row| PriceRow {
            quote: PriceQuote::new(40.0, 70.0, 30.0).unwrap(),
            ..row
        })
        .collect();
    let prices = dir.path().join("flat_prices.csv");
    write_prices(&prices, &flat).unwrap();
    cfg.data.prices = Some(prices);
    run_stage(Stage::Trade, &cfg, &RunOptions::default()).unwrap();

    let sites = SiteSet::new(vec!["north".into(), "south".into()], vec![1.0, 1.0]).unwrap();
    let forecasts = read_quantile_forecasts(dir.path().join(files::FORECASTS), &sites).unwrap();
    let by_key: BTreeMap<_, _> = forecasts
        .iter()
        .filter(|f| f.cdf.site == 1)
        .map(|f| ((f.origin, f.cdf.lead), &f.cdf))
        .collect();
    let bids = read_bids(dir.path().join(files::BIDS)).unwrap();
    assert!(!bids.is_empty());
    let spec = cfg.market.spec();
    for b in &bids {
        assert!(spec.leads().contains(&b.lead));
        assert_eq!(b.bid.alpha, 0.25);
        let f = by_key[&(b.origin, b.lead)];
        assert_eq!(b.bid.value, cdf_inverse(f, 0.25).unwrap());
    }
}

#[test]
fn missing_stage_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for stage in [
        Stage::Fit,
        Stage::Forecast,
        Stage::Trajectories,
        Stage::Trade,
        Stage::Reserve,
        Stage::Verify,
    ] {
        let err = run_stage(stage, &cfg, &RunOptions::default()).unwrap_err();
        assert_eq!(err.class(), ErrorClass::Data, "{stage}: {err}");
    }
    assert_eq!(Stage::from_str("bogus").unwrap_err().class(), ErrorClass::Config);
}

#[test]
fn invalid_configs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.market.site = "east".into();
    let err = run_stage(Stage::Simulate, &cfg, &RunOptions::default()).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Config);
    assert_eq!(
        RunConfig::from_toml("seed = 1\nunknown = 2\n").unwrap_err().class(),
        ErrorClass::Config
    );
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.copula.trajectories = 25;
    cfg.probabilistic.levels = vec![0.1, 0.5, 0.9];
    cfg.simulation.start = parse_timestamp("2010-03-01T06:00:00Z")
        .map(windcast::data::format_timestamp)
        .unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let back = RunConfig::load(&path).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(RunConfig::from_toml(&back.to_toml().unwrap()).unwrap(), cfg);
}
