use l2t_core::numcore::kernels::{matmul_acc, tanh_slice};
use std::time::Instant;

fn main() {
    let (m, k, n) = (256usize, 64usize, 64usize);
    let x: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.001).sin()).collect();
    let w: Vec<f64> = (0..n * k).map(|i| (i as f64 * 0.002).cos()).collect();
    let mut y = vec![0.0f64; m * n];
    let iters = 3000;
    let t = Instant::now();
    for _ in 0..iters {
        y.iter_mut().for_each(|v| *v = 0.0);
        matmul_acc(&x, &w, &mut y, m, k, n);
    }
    let dt = t.elapsed().as_secs_f64() / iters as f64;
    println!("matmul: {:.2} GFLOP/s (sink {})", 2.0 * (m * k * n) as f64 / dt / 1e9, y[0]);

    let mut v: Vec<f64> = (0..m * 64).map(|i| (i as f64 * 0.01).sin()).collect();
    let t = Instant::now();
    for _ in 0..iters {
        tanh_slice(&mut v);
    }
    println!("tanh: {:.2} ns/elem (sink {})", t.elapsed().as_secs_f64() / (iters * m * 64) as f64 * 1e9, v[0]);
}
