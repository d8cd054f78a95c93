//! A continuous-time arm discretized on finer and finer grids: the index
//! converges at first order in the step.

use rmab::index::gittins_index;
use rmab::model::{ArmModel, Discount};

fn main() -> rmab::Result<()> {
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..7 {
        let delta = 0.4 / f64::from(1 << k);
        let arm = ArmModel::from_generator(vec![1.0, 3.0], vec![vec![-1.0, 1.0], vec![2.0, -2.0]], 0, delta)?;
        let m = gittins_index(&arm, &Discount::new(1.0, delta), 0)?.value;
        match prev {
            Some((p, diff)) if diff > 0.0 => println!("delta {delta:.5}  index {m:.8}  shrink {:.2}", diff / (m - p).abs()),
            _ => println!("delta {delta:.5}  index {m:.8}"),
        }
        prev = Some((m, prev.map_or(0.0, |(p, _)| (m - p).abs())));
    }
    Ok(())
}
