//! Lifts a discrete-time system over a finite task and checks it against
//! recursive simulation and its frequency response.

use sparse_ilc::lti::{frequency_response, lift, linf_norm, FrequencyGrid, TransferFunction};

fn main() -> sparse_ilc::Result<()> {
    let ts = 1e-3;
    // 0.2 z^-1 (1 + 0.5 z^-1) / (1 - 1.6 z^-1 + 0.68 z^-2)
    let sys = TransferFunction::with_delay(vec![0.2, 0.1], vec![1.0, -1.6, 0.68], 1, ts)?;
    let n = 200;
    let j = lift(&sys, n)?;

    let u: Vec<f64> = (0..n).map(|k| (0.05 * k as f64).sin()).collect();
    let y_lifted = j.apply(&u)?;
    let y_sim = sys.simulate(&u)?;
    let gap = y_lifted.iter().zip(&y_sim).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("lifted vs simulated: max difference {gap:.2e}");
    println!("toeplitz: {}, lower triangular: {}", j.is_toeplitz(1e-12), j.is_lower_triangular());

    let grid = FrequencyGrid::log_spaced(512, 1e-3)?;
    let resp = frequency_response(&sys, &grid);
    let (mag, w) = resp.peak();
    println!("peak |J| = {mag:.4} at {:.2} Hz", w / (2.0 * std::f64::consts::PI * ts));
    println!("H-inf estimate {:.4} (refined {:.4})", linf_norm(&sys, &grid), linf_norm(&sys, &grid.refined()));

    let sv = j.matrix().clone().singular_values();
    println!("lifted singular values in [{:.3e}, {:.3e}]", sv.min(), sv.max());
    Ok(())
}
