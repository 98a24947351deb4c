use ndarray::{Array1, Array2};
use vfgp::gp::{Dataset, FitConfig, GpModel};
use vfgp::kernels::Kernel;

fn main() {
    let n = 30;
    let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 / (n - 1) as f64);
    let y = Array1::from_iter(x.column(0).iter().map(|&v| (2.0 * std::f64::consts::PI * v).sin()));
    let data = Dataset::new(x.clone(), y.clone()).unwrap();
    let model = GpModel::fit(data, &FitConfig::default()).unwrap();
    println!("kernel: theta0^2={:.3e} weights={:?}", model.kernel().self_cov(), model.kernel().length_weights());
    println!("sigma2: {:.3e}", model.noise().variance());
    println!("report: {:?}", model.fit_report());
    let (mean, _) = model.predict(x.view()).unwrap();
    let maxres = mean.iter().zip(y.iter()).map(|(m, t)| (m - t).abs()).fold(0.0f64, f64::max);
    println!("max residual: {:.3e}", maxres);
    let maxw = model.weights().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    println!("max |alpha|: {:.3e}", maxw);
}
