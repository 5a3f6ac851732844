//! Decisions driven by probabilistic forecasts: day-ahead offers under
//! two-price imbalance settlement and reserve sizing from the system margin.

pub mod market;
pub mod reserve;

pub use market::{
    expected_imbalance_cost, optimal_bid, read_bids, read_prices, settle, trajectory_expected_cost, write_bids,
    write_prices, Bid, IssuedBid, MarketSpec, PriceForecaster, PriceQuote, PriceRow, PriceSimConfig, PriceTable,
    RevenueBreakdown, UnitCosts,
};
pub use reserve::{
    convolve_margin, expected_reserve_cost, grid_search_reserve, optimal_reserves, write_reserve_report, GridDensity,
    MarginDensity, ReserveDecision, ReserveProblem, ReserveReportRow, SideCost,
};
