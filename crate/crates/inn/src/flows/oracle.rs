//! RK4 integration of the vector fields that define each closed-form layer.
//! Used by tests to check that closed forms equal their flow maps.

use super::hat::{bump, hat, relu};
use super::FlowLayer;

pub type Field<'a> = Box<dyn Fn(&[f64], &mut [f64]) + 'a>;

/// Autonomous field `f` flowed for time `tau`.
pub struct Flow<'a> {
    pub tau: f64,
    pub field: Field<'a>,
}

/// Classical fourth-order Runge-Kutta for `dy/dt = f(y)` over `[0, tau]`.
pub fn rk4(f: &dyn Fn(&[f64], &mut [f64]), x: &[f64], tau: f64, steps: usize) -> Vec<f64> {
    assert!(steps >= 1);
    let n = x.len();
    let h = tau / steps as f64;
    let mut y = x.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        f(&y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        f(&tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// `s/(e^s − 1)`, continuous at 0.
fn exp_ratio(s: f64) -> f64 {
    if s.abs() < 1e-12 {
        1.0 - 0.5 * s
    } else {
        s / s.exp_m1()
    }
}

/// Sequence of flows whose composition is the layer, or `None` for layers
/// without a defining ODE (`h^r`, lift, project).
pub fn defining_flows(layer: &FlowLayer) -> Option<Vec<Flow<'_>>> {
    fn one(field: Field<'_>) -> Vec<Flow<'_>> {
        vec![Flow { tau: 1.0, field }]
    }
    Some(match layer {
        FlowLayer::ShiftLast(l) => (0..l.sources)
            .map(|j| Flow {
                tau: (l.n as f64).powi(-(j as i32 + 1)),
                field: Box::new(move |y: &[f64], out: &mut [f64]| {
                    out.fill(0.0);
                    out[l.dim - 1] = relu(y[j]);
                }) as Field<'_>,
            })
            .collect(),
        FlowLayer::LocalizedTranslate(l) => one(Box::new(move |y, out| {
            out.fill(0.0);
            let h = bump(y[l.dim - 1], l.center, l.half_width);
            for (o, d) in out.iter_mut().zip(&l.displacement) {
                *o = h * d;
            }
        })),
        FlowLayer::LocalizedShift(l) => {
            let sign = l.shift.signum();
            vec![Flow {
                tau: l.shift.abs(),
                field: Box::new(move |y, out| {
                    out.fill(0.0);
                    out[l.target] = sign * hat((y[l.anchor] - l.center) / l.delta + 1.0);
                }),
            }]
        }
        FlowLayer::LocalizedLast(l) => one(Box::new(move |y, out| {
            out.fill(0.0);
            out[l.dim - 1] = bump(y[l.control], l.center, l.half_width) * l.displacement;
        })),
        FlowLayer::CopyBlock(l) => one(Box::new(move |y, out| {
            out.fill(0.0);
            for j in 0..l.d {
                out[l.d + 1 + j] = y[j];
            }
        })),
        FlowLayer::KillLast(l) => one(Box::new(move |y, out| {
            out.fill(0.0);
            out[2 * l.d + 1] = -2.0 * l.anchor * l.gate(y);
        })),
        FlowLayer::AffineCoupling(b) => {
            // moving half `m` (offset 0 or 1 in the interleave) conditioned on the other
            let half = move |m: usize| -> Field<'_> {
                Box::new(move |y: &[f64], out: &mut [f64]| {
                    let cond: Vec<f64> = y.iter().skip(1 - m).step_by(2).copied().collect();
                    let (s, t) = b.conditioner(&cond);
                    out.fill(0.0);
                    for (k, i) in (m..y.len()).step_by(2).enumerate() {
                        out[i] = s[k] * y[i] + t[k] * exp_ratio(s[k]);
                    }
                })
            };
            vec![Flow { tau: 1.0, field: half(0) }, Flow { tau: 1.0, field: half(1) }]
        }
        FlowLayer::PerCoordinatePwl(_) | FlowLayer::Lift(_) | FlowLayer::Project(_) => return None,
    })
}

/// Layer output computed by integrating its defining flows.
pub fn integrate_layer(layer: &FlowLayer, x: &[f64], steps: usize) -> Option<Vec<f64>> {
    let flows = defining_flows(layer)?;
    let mut y = x.to_vec();
    for f in &flows {
        y = rk4(&*f.field, &y, f.tau, steps);
    }
    Some(y)
}
