// quick throwaway benchmark
use ramnet::tensor::{ops, Tensor};
use std::time::Instant;

fn main() {
    let cases: [(usize, usize, usize, usize, usize, usize); 5] = [
        (5, 16, 64, 64, 5, 1),
        (16, 16, 64, 64, 5, 2),
        (32, 16, 32, 32, 3, 1),
        (64, 32, 16, 16, 3, 1),
        (128, 64, 8, 8, 3, 1),
    ];
    let reps = 40;
    // forward only
    let mut fwd_flops = 0.0f64;
    let t0 = Instant::now();
    for _ in 0..reps {
        for &(cin, cout, h, w, k, stride) in &cases {
            let x = Tensor::<f32>::from_vec(&[2, cin, h, w], vec![0.5; 2 * cin * h * w]).unwrap();
            let wt = Tensor::<f32>::from_vec(&[cout, cin, k, k], vec![0.01; cout * cin * k * k]).unwrap();
            let y = ops::conv2d(&x, &wt, None, stride, k / 2).unwrap();
            let (_, _, oh, ow) = y.dim4().unwrap();
            fwd_flops += 2.0 * (2 * cout * cin * k * k * oh * ow) as f64;
        }
    }
    let fwd_dt = t0.elapsed().as_secs_f64();
    println!("forward: {:.3}s -> {:.2} GFLOP/s", fwd_dt, fwd_flops / fwd_dt / 1e9);

    // forward + backward
    let mut flops = 0.0f64;
    let t1 = Instant::now();
    for _ in 0..reps {
        for &(cin, cout, h, w, k, stride) in &cases {
            let x = Tensor::<f32>::param(&[2, cin, h, w], vec![0.5; 2 * cin * h * w]).unwrap();
            let wt = Tensor::<f32>::param(&[cout, cin, k, k], vec![0.01; cout * cin * k * k]).unwrap();
            let b = Tensor::<f32>::param(&[cout], vec![0.0; cout]).unwrap();
            let y = ops::conv2d(&x, &wt, Some(&b), stride, k / 2).unwrap();
            let loss = ops::sum_all(&y);
            loss.backward().unwrap();
            let (_, _, oh, ow) = y.dim4().unwrap();
            flops += 3.0 * 2.0 * (2 * cout * cin * k * k * oh * ow) as f64;
        }
    }
    let dt = t1.elapsed().as_secs_f64();
    println!("fwd+bwd: {:.3}s -> {:.2} GFLOP/s", dt, flops / dt / 1e9);
}
