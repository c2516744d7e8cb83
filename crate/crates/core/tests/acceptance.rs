//! Prints one PASS/FAIL line per acceptance criterion. A failing criterion
//! does not fail the target; the lines are the result.

use fluxtheo::selftest::{run_all, SelftestConfig, Status};

fn main() {
    let quick = std::env::var("FLUXTHEO_QUICK").is_ok_and(|v| v == "1");
    let cfg = SelftestConfig { quick, ..Default::default() };
    println!("acceptance ({} mode)", if quick { "quick" } else { "full" });
    let reports = run_all(&cfg, |r| println!("{r}"));
    let count = |s: Status| reports.iter().filter(|r| r.status == s).count();
    println!(
        "acceptance summary: {} passed, {} failed, {} skipped",
        count(Status::Pass),
        count(Status::Fail),
        count(Status::Skip)
    );
}
