use hamlab_core::*;
use std::time::Instant;

fn bump(x: &[f64], lo: f64, hi: f64) -> f64 {
    let mut v = 1.0;
    for &xi in x {
        let a = lo + 0.2 * (hi - lo);
        let b = hi - 0.2 * (hi - lo);
        let t = (xi - a) / (b - a);
        if !(0.0..=1.0).contains(&t) { return 0.0; }
        v *= (t * (1.0 - t)).powi(4) * 256.0;
    }
    v
}

fn main() {
    for (nodes, iters) in [(33usize, 2000usize), (64, 5000)] {
        let g = Grid::uniform_box(2, nodes, 0.0, 1.0).unwrap();
        let mask = BoundaryMask::outer_layers(&g, 3).unwrap();
        let u0 = ScalarField::from_fn(g, |x| 0.25*(x[0]*x[0] - x[1]*x[1]) + 0.05*bump(x, 0.0, 1.0));
        let params = DescentParams { step: None, max_iters: iters, grad_target: 1e-12 };
        let t0 = Instant::now();
        let (_, trace) = descend(&u0, &mask, &params).unwrap();
        let el = t0.elapsed().as_secs_f64();
        let f = &trace.rows[0];
        let l = trace.rows.last().unwrap();
        println!("{nodes}^2 rows {} time {el:.1}s res {:.4e} -> {:.4e} (x{:.1} reduction) F {:.8}->{:.8} gmax {:.2e}->{:.2e}",
                 trace.rows.len(), f.residual_l2, l.residual_l2, f.residual_l2/l.residual_l2,
                 f.volume, l.volume, f.max_grad, l.max_grad);
        // find first iteration achieving 10x
        if let Some(r) = trace.rows.iter().find(|r| r.residual_l2 <= f.residual_l2/10.0) {
            println!("  10x residual reduction at iteration {} (t~{:.1}s scaled)", r.iter, el*r.iter as f64/(trace.rows.len() as f64));
        } else {
            println!("  10x NOT reached");
        }
    }
}
