//! Central finite differences. Forward-only, so it stays independent of the
//! reverse sweep it is used to validate.

use super::Array;

/// Relative error with denominator `max(|a|, |b|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Numeric gradient of `f` at `x` by central differences with step `eps`.
pub fn central_difference<F>(x: &Array, eps: f64, mut f: F) -> Array
where
    F: FnMut(&Array) -> f64,
{
    let mut probe = x.clone();
    let mut out = Array::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let up = f(&probe);
        probe.data_mut()[i] = orig - eps;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (up - down) / (2.0 * eps);
    }
    out
}

/// Largest element-wise relative error between two gradient arrays.
pub fn max_relative_error(analytic: &Array, numeric: &Array) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

use rand::Rng;

use super::{NumericsError, Tape, Var};
use crate::rng::SeedStream;

type Build = dyn Fn(&mut Tape, &[Var]) -> Result<Var, NumericsError>;

/// Max relative error of the reverse sweep against central differences for
/// `build` applied to `inputs`. The probe loss is `sum(out * weights)` with
/// fixed random weights so that no gradient is trivially uniform.
pub fn check_op(
    inputs: &[Array],
    build: &Build,
    weight_seed: u64,
    eps: f64,
) -> Result<f64, NumericsError> {
    let run = |xs: &[Array]| -> Result<(Tape, Vec<Var>, Var), NumericsError> {
        let mut tape = Tape::new();
        let vars = xs
            .iter()
            .map(|x| tape.leaf(x.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let out = build(&mut tape, &vars)?;
        let mut rng = SeedStream::new(weight_seed).rng();
        let w: Vec<f64> = (0..tape.value(out).len())
            .map(|_| 6.0 * rng.random::<f64>() - 3.0)
            .collect();
        let w = tape.leaf(Array::new(tape.shape(out), w)?)?;
        let prod = tape.mul(out, w)?;
        let loss = tape.sum(prod)?;
        Ok((tape, vars, loss))
    };
    let (tape, vars, loss) = run(inputs)?;
    let grads = tape.backward(loss)?;
    let mut worst: f64 = 0.0;
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.wrt(*v);
        let numeric = central_difference(&inputs[i], eps, |probe| {
            let mut xs = inputs.to_vec();
            xs[i] = probe.clone();
            let (t, _, l) = run(&xs).expect("probe forward");
            t.value(l).data()[0]
        });
        worst = worst.max(max_relative_error(&analytic, &numeric));
    }
    Ok(worst)
}

fn random_array(shape: &[usize], rng: &mut crate::rng::Rng, f: impl Fn(f64) -> f64) -> Array {
    let n = shape.iter().product();
    let data = (0..n).map(|_| f(rng.random::<f64>() * 2.0 - 1.0)).collect();
    Array::new(shape, data).expect("shape")
}

/// Keeps values at least 0.05 away from zero (kinks of relu and clamp).
fn away_from_zero(v: f64) -> f64 {
    if v >= 0.0 {
        v + 0.05
    } else {
        v - 0.05
    }
}

/// Runs every primitive through [`check_op`] on `trials` random shapes and
/// seeds. Returns `(primitive, worst relative error)`.
pub fn check_primitives(
    trials: usize,
    seed: u64,
) -> Result<Vec<(&'static str, f64)>, NumericsError> {
    let root = SeedStream::new(seed);
    let mut report = Vec::new();
    let eps = 1e-5;
    let names = [
        "matmul",
        "add",
        "add_rows",
        "sub",
        "mul",
        "div",
        "scale",
        "add_scalar",
        "concat",
        "slice",
        "embedding_lookup",
        "softmax",
        "sigmoid",
        "tanh",
        "relu",
        "exp",
        "log",
        "clamp_min",
        "layer_norm",
        "dropout",
        "masked_fill",
        "transpose",
        "gather",
        "sum",
    ];
    for (op_idx, name) in names.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for t in 0..trials {
            let s = root.path(&[op_idx as u64, t as u64]);
            let mut rng = s.rng();
            let m = rng.random_range(1..5);
            let n = rng.random_range(1..6);
            let k = rng.random_range(1..5);
            let plain =
                |rng: &mut crate::rng::Rng, shape: &[usize]| random_array(shape, rng, |v| v);
            let mask_seed = s.child(9);
            let (inputs, build): (Vec<Array>, Box<Build>) = match *name {
                "matmul" => (
                    vec![plain(&mut rng, &[m, k]), plain(&mut rng, &[k, n])],
                    Box::new(|t, v| t.matmul(v[0], v[1])),
                ),
                "add" => (
                    vec![plain(&mut rng, &[m, n]), plain(&mut rng, &[m, n])],
                    Box::new(|t, v| t.add(v[0], v[1])),
                ),
                "add_rows" => (
                    vec![plain(&mut rng, &[m, n]), plain(&mut rng, &[1, n])],
                    Box::new(|t, v| t.add(v[0], v[1])),
                ),
                "sub" => (
                    vec![plain(&mut rng, &[m, n]), plain(&mut rng, &[1, n])],
                    Box::new(|t, v| t.sub(v[0], v[1])),
                ),
                "mul" => (
                    vec![plain(&mut rng, &[m, n]), plain(&mut rng, &[m, n])],
                    Box::new(|t, v| t.mul(v[0], v[1])),
                ),
                "div" => (
                    vec![
                        plain(&mut rng, &[m, n]),
                        random_array(&[m, n], &mut rng, |v| away_from_zero(v) * 2.0),
                    ],
                    Box::new(|t, v| t.div(v[0], v[1])),
                ),
                "scale" => (
                    vec![plain(&mut rng, &[m, n, k])],
                    Box::new(|t, v| t.scale(v[0], -1.7)),
                ),
                "add_scalar" => (
                    vec![plain(&mut rng, &[m, n])],
                    Box::new(|t, v| t.add_scalar(v[0], 0.3)),
                ),
                "concat" => {
                    let axis = rng.random_range(0..2);
                    let other = if axis == 0 { [k, n] } else { [m, k] };
                    (
                        vec![plain(&mut rng, &[m, n]), plain(&mut rng, &other)],
                        Box::new(move |t, v| t.concat(&[v[0], v[1]], axis)),
                    )
                }
                "slice" => {
                    let start = rng.random_range(0..n);
                    let len = rng.random_range(1..=n - start);
                    (
                        vec![plain(&mut rng, &[m, n, k])],
                        Box::new(move |t, v| t.slice(v[0], 1, start, len)),
                    )
                }
                "embedding_lookup" => {
                    let idx: Vec<usize> = (0..k + 2).map(|_| rng.random_range(0..m)).collect();
                    (
                        vec![plain(&mut rng, &[m, n])],
                        Box::new(move |t, v| t.embedding_lookup(v[0], &idx)),
                    )
                }
                "softmax" => {
                    let axis = rng.random_range(0..3);
                    (
                        vec![random_array(&[m, n, k], &mut rng, |v| 1.5 * v)],
                        Box::new(move |t, v| t.softmax(v[0], axis)),
                    )
                }
                "sigmoid" => (
                    vec![random_array(&[m, n], &mut rng, |v| 4.0 * v)],
                    Box::new(|t, v| t.sigmoid(v[0])),
                ),
                "tanh" => (
                    vec![random_array(&[m, n], &mut rng, |v| 2.0 * v)],
                    Box::new(|t, v| t.tanh(v[0])),
                ),
                "relu" => (
                    vec![random_array(&[m, n], &mut rng, away_from_zero)],
                    Box::new(|t, v| t.relu(v[0])),
                ),
                "exp" => (vec![plain(&mut rng, &[m, n])], Box::new(|t, v| t.exp(v[0]))),
                "log" => (
                    vec![random_array(&[m, n], &mut rng, |v| v.abs() + 0.2)],
                    Box::new(|t, v| t.log(v[0])),
                ),
                "clamp_min" => (
                    vec![random_array(&[m, n], &mut rng, away_from_zero)],
                    Box::new(|t, v| t.clamp_min(v[0], 0.0)),
                ),
                "layer_norm" => (
                    vec![random_array(&[m, n.max(3)], &mut rng, |v| 2.0 * v)],
                    Box::new(|t, v| t.layer_norm(v[0])),
                ),
                "dropout" => (
                    vec![plain(&mut rng, &[m, n])],
                    Box::new(move |t, v| t.dropout(v[0], 0.3, true, &mut mask_seed.rng())),
                ),
                "masked_fill" => {
                    let mask: Vec<bool> = (0..m * n).map(|_| rng.random::<f64>() < 0.4).collect();
                    (
                        vec![plain(&mut rng, &[m, n])],
                        Box::new(move |t, v| t.masked_fill(v[0], &mask, -2.0)),
                    )
                }
                "transpose" => (
                    vec![plain(&mut rng, &[m, n])],
                    Box::new(|t, v| t.transpose(v[0])),
                ),
                "gather" => {
                    let cols: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
                    (
                        vec![plain(&mut rng, &[m, n])],
                        Box::new(move |t, v| t.gather(v[0], &cols)),
                    )
                }
                "sum" => (
                    vec![plain(&mut rng, &[m, n, k])],
                    Box::new(|t, v| t.sum(v[0])),
                ),
                _ => unreachable!(),
            };
            worst = worst.max(check_op(&inputs, &*build, s.child(1).raw(), eps)?);
        }
        report.push((*name, worst));
    }
    Ok(report)
}
