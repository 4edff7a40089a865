//! Numerical reference for the slit field.
//!
//! Integrates the `y'` kernels left after the analytic `z'` integral directly
//! with adaptive Gauss–Kronrod quadrature. Shares no code with the closed form.

#![allow(clippy::excessive_precision)]

use super::{Acceleration, FieldError, SlitLayout, GUARD_BAND};

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1] (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_PANELS: usize = 20_000;

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive Gauss–Kronrod quadrature on a finite interval.
///
/// Bisects the panel with the largest error estimate until the summed
/// estimate drops below `abs_tol`.
pub fn adaptive_gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64, FieldError> {
    if a == b {
        return Ok(0.0);
    }
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&f, a, b);
    panels.push((a, b, v, e));
    let mut total_err = e;
    while total_err > abs_tol {
        if panels.len() >= MAX_PANELS {
            return Err(FieldError::QuadratureBudget {
                estimate: total_err,
                target: abs_tol,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|p, q| p.1 .3.total_cmp(&q.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _, err) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Panel cannot be split any further in floating point.
            return Err(FieldError::QuadratureBudget {
                estimate: total_err,
                target: abs_tol,
            });
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        total_err += e1 + e2 - err;
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
        // Recompute occasionally to shed accumulated cancellation error.
        if panels.len().is_multiple_of(256) {
            total_err = panels.iter().map(|p| p.3).sum();
        }
    }
    let mut values: Vec<f64> = panels.iter().map(|p| p.2).collect();
    values.sort_by(|p, q| p.abs().total_cmp(&q.abs()));
    Ok(values.iter().sum())
}

/// Acceleration at `(x, y)` by direct quadrature over the material.
///
/// The material is clipped to a window `[y − T, y + T]` that contains every
/// finite edge. Outside the window the `ax` kernel is integrated analytically
/// (each tail contributes `2·atan(x/T)`), and the `ay` tails cancel exactly
/// because they are odd about `y`.
pub fn force_quadrature_oracle(
    x: f64,
    y: f64,
    layout: &SlitLayout,
    kappa: f64,
    tol: f64,
) -> Result<Acceleration, FieldError> {
    if x.abs() <= GUARD_BAND || x.is_nan() {
        return Err(FieldError::GuardBand { x });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(FieldError::InvalidParameter {
            name: "tol",
            value: tol,
        });
    }
    let reach = layout.edges().iter().map(|e| (e - y).abs()).fold(0.0_f64, f64::max);
    let half_window = reach + 10.0 * (1.0 + x.abs());
    let (lo_cut, hi_cut) = (y - half_window, y + half_window);

    let x2 = x * x;
    let kernel_x = |yp: f64| {
        let d = y - yp;
        2.0 * x / (x2 + d * d)
    };
    let kernel_y = |yp: f64| {
        let d = y - yp;
        2.0 * d / (x2 + d * d)
    };

    // Integrals of the ax kernel over the two tails beyond the window.
    let mut ax = 4.0 * (x / half_window).atan();
    let mut ay = 0.0;
    // Both kernels are sharply peaked at y' = y with width |x|; split there.
    let mut breaks = vec![y - x.abs(), y, y + x.abs()];
    breaks.retain(|b| *b > lo_cut && *b < hi_cut);
    for iv in layout.material() {
        let a = iv.lo.max(lo_cut);
        let b = iv.hi.min(hi_cut);
        if a >= b {
            continue;
        }
        let mut nodes = vec![a];
        nodes.extend(breaks.iter().copied().filter(|p| *p > a && *p < b));
        nodes.push(b);
        for seg in nodes.windows(2) {
            ax += adaptive_gauss_kronrod(kernel_x, seg[0], seg[1], tol * 0.01)?;
            ay += adaptive_gauss_kronrod(kernel_y, seg[0], seg[1], tol * 0.01)?;
        }
    }
    Ok(Acceleration {
        ax: kappa * ax,
        ay: kappa * ay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcefield::{force_closed_form, Experiment};
    use std::f64::consts::{PI, TAU};

    #[test]
    fn gauss_kronrod_integrates_smooth_functions() {
        let v = adaptive_gauss_kronrod(|t| t.sin(), 0.0, PI, 1e-13).unwrap();
        approx::assert_relative_eq!(v, 2.0, max_relative = 1e-13);
        let lorentz = adaptive_gauss_kronrod(|t| 1.0 / (1e-6 + t * t), -1.0, 1.0, 1e-9).unwrap();
        approx::assert_relative_eq!(lorentz, 2.0 * (1.0f64 / 1e-3).atan() / 1e-3, max_relative = 1e-10);
    }

    #[test]
    fn full_plane_oracle() {
        let plane = SlitLayout::full_plane();
        let a = force_quadrature_oracle(1.0, 0.0, &plane, 1.0, 1e-10).unwrap();
        assert!((a.ax - TAU).abs() <= 1e-10);
        assert!(a.ay.abs() <= 1e-10);
    }

    #[test]
    fn symmetric_layout_oracle() {
        let both = SlitLayout::material_intervals(Experiment::Both, 1.0, 0.5).unwrap();
        let a = force_quadrature_oracle(-3.0, 0.0, &both, 1.0, 1e-10).unwrap();
        assert!(a.ay.abs() <= 1e-10);
    }

    #[test]
    fn oracle_agrees_with_closed_form_near_edges() {
        let upper = SlitLayout::material_intervals(Experiment::UpperOnly, 1.0, 0.5).unwrap();
        for &(x, y) in &[(-2.0, 0.5), (-1e-4, 1.0001), (0.01, 2.0), (-0.3, 1.5), (25.0, -40.0)] {
            let c = force_closed_form(x, y, &upper, 1.0).unwrap();
            let o = force_quadrature_oracle(x, y, &upper, 1.0, 1e-10).unwrap();
            assert!((c.ax - o.ax).abs() <= 1e-8 * (1.0 + c.ax.abs()), "{x} {y} {c:?} {o:?}");
            assert!((c.ay - o.ay).abs() <= 1e-8 * (1.0 + c.ay.abs()), "{x} {y} {c:?} {o:?}");
        }
    }
}
