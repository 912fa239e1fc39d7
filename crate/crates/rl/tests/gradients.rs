use genctrl_rl::agent::{actor_gradients, critic_gradients};
use genctrl_rl::mlp::{Activation, Gradients, Mlp};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-6;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_batch(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| r.random_range(-1.5..1.5))
}

/// Widen the output layer so its gradients are not negligible.
fn boost_last(net: &mut Mlp<f64>, r: &mut ChaCha8Rng) {
    let last = net.layers.last_mut().unwrap();
    last.w.mapv_inplace(|_| r.random_range(-0.8..0.8));
    last.b.mapv_inplace(|_| r.random_range(-0.3..0.3));
}

/// Central differences of `loss` over every weight and bias of `net`.
fn fd_gradients(net: &Mlp<f64>, loss: impl Fn(&Mlp<f64>) -> f64) -> Gradients<f64> {
    let mut out = Gradients::zeros_like(net);
    let mut probe = net.clone();
    for l in 0..net.layers.len() {
        for idx in 0..net.layers[l].w.len() {
            let (r, c) = (idx / net.layers[l].w.ncols(), idx % net.layers[l].w.ncols());
            let v = probe.layers[l].w[[r, c]];
            probe.layers[l].w[[r, c]] = v + H;
            let up = loss(&probe);
            probe.layers[l].w[[r, c]] = v - H;
            let down = loss(&probe);
            probe.layers[l].w[[r, c]] = v;
            out.layers[l].0[[r, c]] = (up - down) / (2.0 * H);
        }
        for k in 0..net.layers[l].b.len() {
            let v = probe.layers[l].b[k];
            probe.layers[l].b[k] = v + H;
            let up = loss(&probe);
            probe.layers[l].b[k] = v - H;
            let down = loss(&probe);
            probe.layers[l].b[k] = v;
            out.layers[l].1[k] = (up - down) / (2.0 * H);
        }
    }
    out
}

fn rel_gap(a: &Gradients<f64>, b: &Gradients<f64>) -> f64 {
    let mut diff: f64 = 0.0;
    for ((aw, ab), (bw, bb)) in a.layers.iter().zip(&b.layers) {
        for (x, y) in aw.iter().chain(ab.iter()).zip(bw.iter().chain(bb.iter())) {
            diff = diff.max((x - y).abs());
        }
    }
    diff / b.max_abs().max(1e-300)
}

fn mse(net: &Mlp<f64>, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let out = net.forward(x, None).unwrap();
    (&out - y).mapv(|d| d * d).sum() / x.nrows() as f64
}

#[test]
fn small_network_gradients_match_finite_differences() {
    for (seed, output) in [(1, Activation::Tanh), (2, Activation::Linear)] {
        let mut r = rng(seed);
        let mut net = Mlp::<f64>::new(&[4, 5, 3], output, 2.0, 0, &mut r);
        boost_last(&mut net, &mut r);
        let x = random_batch(7, 4, &mut r);
        let y = random_batch(7, 3, &mut r);
        let cache = net.forward_cached(&x, None).unwrap();
        let d_out = (&cache.output - &y).mapv(|d| 2.0 * d / 7.0);
        let (g, d_x, _) = net.backward(&cache, &d_out);
        let fd = fd_gradients(&net, |n| mse(n, &x, &y));
        assert!(rel_gap(&g, &fd) < 1e-5, "{output:?}: {}", rel_gap(&g, &fd));

        // input gradient
        let mut worst: f64 = 0.0;
        for i in 0..7 {
            for j in 0..4 {
                let mut xp = x.clone();
                xp[[i, j]] += H;
                let up = mse(&net, &xp, &y);
                xp[[i, j]] -= 2.0 * H;
                let down = mse(&net, &xp, &y);
                worst = worst.max((d_x[[i, j]] - (up - down) / (2.0 * H)).abs());
            }
        }
        let scale = d_x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst / scale < 1e-5);
    }
}

#[test]
fn critic_gradients_match_finite_differences() {
    let mut r = rng(3);
    let mut critic = Mlp::<f64>::critic(4, (5, 3), 2, &mut r);
    boost_last(&mut critic, &mut r);
    let s = random_batch(6, 4, &mut r);
    let a = random_batch(6, 2, &mut r);
    let y = random_batch(6, 1, &mut r);
    let loss = |c: &Mlp<f64>, a: &Array2<f64>| {
        let q = c.forward(&s, Some(a)).unwrap();
        (&q - &y).mapv(|d| d * d).sum() / 6.0
    };
    let (l, g, d_a) = critic_gradients(&critic, &s, &a, &y).unwrap();
    assert!((l - loss(&critic, &a)).abs() < 1e-15);
    let fd = fd_gradients(&critic, |c| loss(c, &a));
    assert!(rel_gap(&g, &fd) < 1e-5);

    let mut worst: f64 = 0.0;
    for i in 0..6 {
        for j in 0..2 {
            let mut ap = a.clone();
            ap[[i, j]] += H;
            let up = loss(&critic, &ap);
            ap[[i, j]] -= 2.0 * H;
            let down = loss(&critic, &ap);
            worst = worst.max((d_a[[i, j]] - (up - down) / (2.0 * H)).abs());
        }
    }
    let scale = d_a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst / scale < 1e-5, "{}", worst / scale);
}

#[test]
fn actor_gradients_match_finite_differences() {
    let mut r = rng(4);
    let mut actor = Mlp::<f64>::actor(4, (5, 4), 2, 3.0, &mut r);
    let mut critic = Mlp::<f64>::critic(4, (5, 3), 2, &mut r);
    boost_last(&mut actor, &mut r);
    boost_last(&mut critic, &mut r);
    let s = random_batch(5, 4, &mut r);
    let (_, g) = actor_gradients(&actor, &critic, &s).unwrap();
    let fd = fd_gradients(&actor, |a| {
        let act = a.forward(&s, None).unwrap();
        -critic.forward(&s, Some(&act)).unwrap().sum() / 5.0
    });
    assert!(rel_gap(&g, &fd) < 1e-5);
}

#[test]
fn constant_loss_has_zero_gradient() {
    let mut r = rng(5);
    let mut net = Mlp::<f64>::new(&[4, 5, 3], Activation::Linear, 1.0, 0, &mut r);
    for l in &mut net.layers {
        l.w.fill(0.0);
        l.b.fill(0.0);
    }
    let x = random_batch(3, 4, &mut r);
    let y: Array2<f64> = Array2::zeros((3, 3));
    let cache = net.forward_cached(&x, None).unwrap();
    let d_out = (&cache.output - &y).mapv(|d| 2.0 * d / 3.0);
    let (g, _, _) = net.backward(&cache, &d_out);
    assert_eq!(g.max_abs(), 0.0);
}
