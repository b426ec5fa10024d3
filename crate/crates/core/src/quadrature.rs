//! Quadrature over heat-time ladders and power-law tail extrapolation.

/// Log-trapezoid weights for the ladder abscissae: linear on the first
/// interval (which starts at s = 0), trapezoid in tau = log s above, i.e.
/// int f ds = int s f(s) dtau.  On a geometric ladder this is the uniform
/// trapezoid rule in tau, whose signed errors cancel for smooth decaying
/// integrands; a plain s-trapezoid would carry a one-signed O((rho-1)^2)
/// bias that the energy identity cannot afford.
pub fn ladder_weights(s_values: &[f64]) -> Vec<f64> {
    let n = s_values.len();
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    let start = if s_values[0] == 0.0 {
        let half = 0.5 * (s_values[1] - s_values[0]);
        w[0] += half;
        w[1] += half;
        1
    } else {
        0
    };
    for k in start..n - 1 {
        let dtau = (s_values[k + 1] / s_values[k]).ln();
        w[k] += 0.5 * dtau * s_values[k];
        w[k + 1] += 0.5 * dtau * s_values[k + 1];
    }
    w
}

/// Fit log y = a + p log s over the trailing `decades` of the samples and
/// return the extrapolated integral of C s^p over (s_max, infinity).
/// Returns 0 when the tail is not a decaying power law (p >= -1) or when
/// there are too few usable samples.
pub fn power_law_tail(s_values: &[f64], y: &[f64], decades: f64) -> f64 {
    let n = s_values.len();
    if n < 3 {
        return 0.0;
    }
    let s_max = s_values[n - 1];
    let s_lo = s_max / 10f64.powf(decades);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..n {
        if s_values[k] >= s_lo && s_values[k] > 0.0 && y[k] > 0.0 {
            xs.push(s_values[k].ln());
            ys.push(y[k].ln());
        }
    }
    if xs.len() < 3 {
        return 0.0;
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, yv) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (yv - my);
    }
    if sxx == 0.0 {
        return 0.0;
    }
    let p = sxy / sxx;
    if p >= -1.0 - 1e-9 {
        return 0.0;
    }
    let a = my - p * mx;
    // integral of e^a s^p over (s_max, inf) = e^a s_max^{p+1} / (-p-1)
    (a + (p + 1.0) * s_max.ln()).exp() / (-p - 1.0)
}
