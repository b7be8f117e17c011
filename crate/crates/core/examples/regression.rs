//! Prints the regression table for every worked example at default resolution.

use std::time::Instant;

use uda_core::worked_examples::{regression_table, ExampleSpec};
use uda_core::EntropyConfig;

fn main() {
    for spec in ExampleSpec::all_classes(&[1, 2, 3, 4]) {
        let start = Instant::now();
        let rows = regression_table(&[spec], EntropyConfig::NATS).expect("table");
        for r in rows {
            println!(
                "ex{} c{} {:<18} computed={:<24} expected={:<24} diff={:?}",
                r.example,
                r.class,
                r.quantity.name(),
                format!("{:?}", r.computed),
                format!("{:?}", r.expected),
                r.abs_diff
            );
        }
        println!("  ({:.2?})", start.elapsed());
    }
}
