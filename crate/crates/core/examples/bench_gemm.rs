// raw kernel benchmark (throwaway)
use std::time::Instant;

fn main() {
    for &(m, k, n) in &[(16usize, 125usize, 4096usize), (32, 288, 1024), (64, 800, 64), (64, 1152, 256), (128, 64, 4096)] {
        let a = vec![0.3f32; m * k];
        let b = vec![0.7f32; k * n];
        let mut c = vec![0.0f32; m * n];
        let reps = (2e9 / (2.0 * (m * k * n) as f64)).max(1.0) as usize;
        let t = Instant::now();
        for _ in 0..reps {
            ramnet::tensor::gemm_bench::matmul_acc_pub(&mut c, &a, &b, m, k, n);
        }
        let dt = t.elapsed().as_secs_f64();
        let gf = 2.0 * (m * k * n * reps) as f64 / dt / 1e9;
        println!("M{m} K{k} N{n}: {gf:.2} GFLOP/s");
    }
}
