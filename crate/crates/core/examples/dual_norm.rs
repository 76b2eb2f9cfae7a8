//! Closed-form minimum of a linear function over an l-inf ball, and the
//! box normalization that puts every input domain in that form.

use gridverify::relax::{dual_norm_min, normalize, BoxDomain, NormOrder};

fn main() -> gridverify::Result<()> {
    let a = [0.5, -2.0, 1.25];
    let eps = 0.3;
    let closed = dual_norm_min(&a, eps, NormOrder::Inf)?;
    let corners = (0u32..8)
        .map(|m| eps * a.iter().enumerate().map(|(i, v)| if m >> i & 1 == 1 { *v } else { -v }).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    println!("min a.x over the ball: closed form {closed}, corners {corners}");

    // one fixed coordinate drops out of the ball
    let b = BoxDomain::new(vec![0.0, -1.0, 2.0], vec![0.1, 3.0, 2.0])?;
    let (ball, map) = normalize(&b)?;
    println!("box {:?}..{:?} -> unit ball of dim {}", b.lower, b.upper, ball.dim());
    for probe in [vec![-1.0, -1.0], vec![1.0, 1.0], vec![0.0, 0.5]] {
        let x = map.denormalize(&probe);
        println!("  {probe:?} -> {x:?} (back: {:?})", map.normalize_point(&x));
    }
    Ok(())
}
