//! Classical fixed-step fourth-order Runge-Kutta over flat state arrays.

/// One RK4 step of `ẋ = f(t, x)`. The derivative closure may fail, in which
/// case the step is abandoned and the error returned.
pub fn rk4_step<const N: usize, E>(
    x: &[f64; N],
    t: f64,
    dt: f64,
    mut f: impl FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
) -> Result<[f64; N], E> {
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * dt, &offset(x, &k1, 0.5 * dt))?;
    let k3 = f(t + 0.5 * dt, &offset(x, &k2, 0.5 * dt))?;
    let k4 = f(t + dt, &offset(x, &k3, dt))?;
    let mut out = *x;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

fn offset<const N: usize>(x: &[f64; N], k: &[f64; N], h: f64) -> [f64; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += h * k[i];
    }
    out
}
