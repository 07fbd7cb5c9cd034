use rand::Rng;
use sdcfr_core::deep_cfr::{avg_policy, train_average_network};
use sdcfr_core::nn::{train, Layer, Mlp, NetConfig, TrainConfig};
use sdcfr_core::rng::{stream, Purpose};
use sdcfr_core::sampling::StrategySample;
use sdcfr_core::LegalMask;

fn sample(features: Vec<f32>, target: Vec<f32>, iteration: u32) -> StrategySample {
    let mask = LegalMask::prefix(target.len());
    StrategySample { features, target, mask, iteration, key: None }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

#[test]
fn jacobian_and_parameter_gradients_match_finite_differences() {
    let h = 1e-4;
    let mut worst = 0.0f64;
    for case in 0..20u64 {
        let mut rng = stream(100, Purpose::Test, case, 0);
        let d_in = rng.gen_range(1..8);
        let hidden: Vec<usize> = (0..rng.gen_range(0..4)).map(|_| rng.gen_range(1..12)).collect();
        let d_out = rng.gen_range(1..5);
        let net: Mlp<f64> = Mlp::init(&NetConfig::new(d_in, hidden, d_out), &mut rng).unwrap();
        let x: Vec<f64> = (0..d_in).map(|_| rng.gen_range(-2.0..2.0)).collect();

        let jac = net.input_jacobian(&x).unwrap();
        for i in 0..d_in {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let (yp, ym) = (net.forward(&xp).unwrap(), net.forward(&xm).unwrap());
            for o in 0..d_out {
                worst = worst.max(rel_err(jac[o * d_in + i], (yp[o] - ym[o]) / (2.0 * h)));
            }
        }

        let n = 3;
        let xs: Vec<f64> = (0..n * d_in).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let ts: Vec<f64> = (0..n * d_out).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let masks = vec![LegalMask::prefix(d_out); n];
        let w: Vec<f64> = (0..n).map(|k| (k + 1) as f64 / n as f64).collect();
        let (_, grads) = net.loss_and_grad(&xs, &ts, &masks, &w).unwrap();
        let analytic: Vec<f64> = grads.params().copied().collect();
        for (k, g) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            *plus.params_mut().nth(k).unwrap() += h;
            *minus.params_mut().nth(k).unwrap() -= h;
            let lp = plus.loss_and_grad(&xs, &ts, &masks, &w).unwrap().0;
            let lm = minus.loss_and_grad(&xs, &ts, &masks, &w).unwrap().0;
            worst = worst.max(rel_err(*g, (lp - lm) / (2.0 * h)));
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn single_sample_regression_converges() {
    let s = vec![sample(vec![0.2, -0.4, 1.0], vec![0.7, -1.3, 0.0], 4)];
    let mut s = s;
    s[0].mask = LegalMask::prefix(2);
    let mut net: Mlp<f32> = Mlp::init(&NetConfig::new(3, vec![16, 16], 3), &mut stream(1, Purpose::Test, 0, 0)).unwrap();
    let cfg = TrainConfig { batch_size: 1, n_updates: 4000, ..TrainConfig::value_default() };
    train(&mut net, &s, &cfg, 4, &mut stream(2, Purpose::Test, 0, 0)).unwrap();
    let y = net.forward(&s[0].features).unwrap();
    assert!((y[0] - 0.7).abs() < 1e-3 && (y[1] + 1.3).abs() < 1e-3, "{y:?}");
}

/// Synthetic set: two infosets at scalar features -1 and 2, targets that
/// change with the iteration.
fn synthetic() -> Vec<StrategySample> {
    let mut out = Vec::new();
    for t in 1..=10u32 {
        out.push(sample(vec![-1.0], vec![(t as f32) * 0.1], t));
        out.push(sample(vec![2.0], vec![1.0 - (t % 3) as f32 * 0.4], t));
    }
    out
}

/// Weighted least squares for `y = w x + b` through the normal equations.
fn normal_equations(data: &[StrategySample], scale: f64) -> (f64, f64) {
    let (mut sw, mut swx, mut swxx, mut swy, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in data {
        let w = scale * s.iteration as f64;
        let (x, y) = (s.features[0] as f64, s.target[0] as f64);
        sw += w;
        swx += w * x;
        swxx += w * x * x;
        swy += w * y;
        swxy += w * x * y;
    }
    let det = sw * swxx - swx * swx;
    ((sw * swxy - swx * swy) / det, (swxx * swy - swx * swxy) / det)
}

fn fit_linear(data: &[StrategySample], big_t: u64) -> Mlp<f64> {
    let mut net = Mlp::from_layers(vec![Layer::<f64>::zeros(1, 1)]).unwrap();
    let mut rng = stream(3, Purpose::Test, 0, 0);
    for lr in [1e-2, 1e-3, 1e-4] {
        let cfg = TrainConfig { batch_size: 256, n_updates: 3000, learning_rate: lr, ..TrainConfig::value_default() };
        train(&mut net, data, &cfg, big_t, &mut rng).unwrap();
    }
    net
}

#[test]
fn weighted_regression_reaches_the_normal_equation_optimum() {
    let data = synthetic();
    let (w, b) = normal_equations(&data, 1.0 / 10.0);
    let net = fit_linear(&data, 10);
    let l = &net.layers()[0];
    assert!((l.weights[0] - w).abs() < 1e-3 && (l.biases[0] - b).abs() < 1e-3, "{l:?} vs {w} {b}");
}

#[test]
fn relabeling_iterations_does_not_move_the_optimum() {
    let data = synthetic();
    let (w1, b1) = normal_equations(&data, 1.0);
    let (w2, b2) = normal_equations(&data, 7.0);
    assert!((w1 - w2).abs() < 1e-12 && (b1 - b2).abs() < 1e-12);
    let doubled: Vec<StrategySample> =
        data.iter().map(|s| StrategySample { iteration: s.iteration * 2, ..s.clone() }).collect();
    let a = fit_linear(&data, 10);
    let b = fit_linear(&doubled, 20);
    assert_eq!(a, b);
}

#[test]
fn duplicated_sample_equals_doubled_weight_in_total_gradient() {
    let net: Mlp<f64> = Mlp::init(&NetConfig::new(2, vec![5], 2), &mut stream(4, Purpose::Test, 0, 0)).unwrap();
    let masks = vec![LegalMask::prefix(2); 3];
    // {a@t, a@t, b} against {a@2t, b}; loss_and_grad averages, so rescale by n
    let xs3 = [0.3, -0.2, 0.3, -0.2, 1.0, 0.5];
    let ts3 = [0.4, -0.1, 0.4, -0.1, 0.0, 0.9];
    let (_, g3) = net.loss_and_grad(&xs3, &ts3, &masks, &[0.25, 0.25, 0.7]).unwrap();
    let (_, g2) = net.loss_and_grad(&xs3[2..], &ts3[2..], &masks[1..], &[0.5, 0.7]).unwrap();
    for (a, b) in g3.params().zip(g2.params()) {
        assert!((3.0 * a - 2.0 * b).abs() < 1e-12);
    }
}

#[test]
fn training_is_bitwise_deterministic() {
    let data = synthetic();
    let run = || {
        let mut net: Mlp<f32> = Mlp::init(&NetConfig::new(1, vec![8, 8], 1), &mut stream(5, Purpose::Test, 0, 0)).unwrap();
        let cfg = TrainConfig { batch_size: 32, n_updates: 200, ..TrainConfig::value_default() };
        train(&mut net, &data, &cfg, 10, &mut stream(6, Purpose::Test, 0, 0)).unwrap();
        net.params().map(|p| p.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn empty_buffer_is_an_error() {
    let mut net: Mlp<f32> = Mlp::zeros(&NetConfig::new(1, vec![], 1)).unwrap();
    let empty: Vec<StrategySample> = Vec::new();
    assert!(train(&mut net, &empty, &TrainConfig::value_default(), 1, &mut stream(0, Purpose::Test, 0, 0)).is_err());
}

#[test]
fn average_network_fits_a_single_strategy() {
    let data = vec![sample(vec![1.0, 0.0], vec![0.3, 0.7], 5)];
    let cfg = TrainConfig { batch_size: 16, n_updates: 2000, ..TrainConfig::average_default() };
    let net_cfg = NetConfig::new(2, vec![16, 16], 2);
    let (net, _) = train_average_network(&data, &net_cfg, &cfg, 5, &mut stream(7, Purpose::Test, 0, 0)).unwrap();
    let d = avg_policy(&net, &data[0].features, LegalMask::prefix(2)).unwrap();
    assert!((d[0] - 0.3).abs() < 1e-2 && (d[1] - 0.7).abs() < 1e-2, "{d:?}");
}

#[test]
fn average_network_weights_by_iteration() {
    let data = vec![sample(vec![1.0], vec![1.0, 0.0], 1), sample(vec![1.0], vec![0.0, 1.0], 3)];
    let cfg = TrainConfig { batch_size: 64, n_updates: 3000, ..TrainConfig::average_default() };
    let net_cfg = NetConfig::new(1, vec![16], 2);
    let (net, _) = train_average_network(&data, &net_cfg, &cfg, 3, &mut stream(8, Purpose::Test, 0, 0)).unwrap();
    let d = avg_policy(&net, &[1.0], LegalMask::prefix(2)).unwrap();
    assert!((d[0] - 0.25).abs() < 1e-2 && (d[1] - 0.75).abs() < 1e-2, "{d:?}");
}
