use crate::nn::{GradientSet, ParamShape, ParamView, Parameterized};
use crate::numkit::Matrix;

/// `WᵀW − I`, sized `in×in` for a weight stored `out×in`.
fn gram_residual(w: &Matrix) -> Matrix {
    let mut gram = w.matmul_tn(w).expect("WᵀW is always conformable");
    for i in 0..gram.rows() {
        gram.set(i, i, gram.get(i, i) - 1.0);
    }
    gram
}

/// `‖WᵀW − I‖²_F` for a single weight matrix.
pub fn ortho_penalty_matrix(w: &Matrix) -> f64 {
    gram_residual(w).frobenius_sq()
}

/// Gradient of [`ortho_penalty_matrix`]: `4·W·(WᵀW − I)`.
pub fn ortho_grad_matrix(w: &Matrix) -> Matrix {
    w.matmul(&gram_residual(w))
        .expect("W·(WᵀW − I) is always conformable")
        .scale(4.0)
}

/// Parameters the penalty applies to: named weights with two dimensions.
/// Biases and the one-dimensional norm-layer scales are excluded.
fn penalised(view: &ParamView<'_>) -> Option<Matrix> {
    match view.shape {
        ParamShape::Matrix { rows, cols } if view.name.ends_with("weight") => {
            Some(Matrix::from_vec(rows, cols, view.values.to_vec()).expect("view shape is consistent"))
        }
        _ => None,
    }
}

/// `λ · Σ_W ‖WᵀW − I‖²_F` over every fully connected weight matrix.
pub fn ortho_penalty<P: Parameterized + ?Sized>(model: &P, lambda: f64) -> f64 {
    let total: f64 = model
        .params()
        .iter()
        .filter_map(penalised)
        .map(|w| ortho_penalty_matrix(&w))
        .sum();
    lambda * total
}

/// Gradient of [`ortho_penalty`], aligned with `model.params()`; zero for
/// every slot the penalty does not touch.
pub fn ortho_grad<P: Parameterized + ?Sized>(model: &P, lambda: f64) -> GradientSet {
    let slots = model
        .params()
        .iter()
        .map(|view| match penalised(view) {
            Some(w) => ortho_grad_matrix(&w).scale(lambda).into_vec(),
            None => vec![0.0; view.values.len()],
        })
        .collect();
    GradientSet { slots }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DualPathNet;
    use crate::nn::{flatten_params, grad_check, load_params, Linear};
    use crate::numkit::RngStream;

    fn layer(w: Matrix) -> Linear {
        let out = w.rows();
        Linear::new(w, vec![0.0; out]).unwrap()
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(ortho_penalty(&layer(Matrix::identity(3)), 0.02), 0.0);
        let w = Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]);
        assert!((ortho_penalty(&layer(w), 0.02) - 0.06).abs() < 1e-15);
        let two = Matrix::identity(2).scale(2.0);
        assert!((ortho_penalty(&layer(two), 0.02) - 0.36).abs() < 1e-15);
    }

    #[test]
    fn grad_examples() {
        let g = ortho_grad(&layer(Matrix::identity(2)), 0.02);
        assert!(g.flatten().iter().all(|&v| v == 0.0));

        let g = ortho_grad(&layer(Matrix::identity(2).scale(2.0)), 0.02);
        let w = &g.slots[0];
        for (i, &v) in w.iter().enumerate() {
            let expect = if i % 3 == 0 { 0.48 } else { 0.0 };
            assert!((v - expect).abs() < 1e-15, "{i}: {v}");
        }
        assert_eq!(g.slots[1], vec![0.0, 0.0], "biases untouched");
    }

    #[test]
    fn grad_matches_finite_differences_on_rectangular_weight() {
        let mut rng = RngStream::new(12, 0);
        let l = Linear::init(3, 5, &mut rng);
        let g = ortho_grad(&l, 0.02);
        let report = grad_check(&flatten_params(&l), &g.flatten(), |p| {
            let mut c = l.clone();
            load_params(&mut c, p).unwrap();
            ortho_penalty(&c, 0.02)
        })
        .unwrap();
        assert!(report.passes(1e-7), "{report:?}");
    }

    #[test]
    fn norm_scales_and_biases_are_excluded() {
        let mut net = DualPathNet::treatment(0.3, &mut RngStream::new(0, 0)).unwrap();
        let before = ortho_penalty(&net, 1.0);
        net.path_a.bn1.gamma.iter_mut().for_each(|g| *g = 7.0);
        net.path_b.ln2.gamma.iter_mut().for_each(|g| *g = -3.0);
        net.head.bias[0] = 100.0;
        assert_eq!(ortho_penalty(&net, 1.0), before);
    }

    #[test]
    fn wide_input_layers_respect_the_rank_floor() {
        // out < in ⇒ rank(WᵀW) ≤ out ⇒ ‖WᵀW − I‖² ≥ in − out
        for seed in 0..20 {
            let mut rng = RngStream::new(seed, 0);
            let l = Linear::init(128, 1, &mut rng);
            assert!(ortho_penalty(&l, 1.0) >= 127.0);
            let l = Linear::init(9, 4, &mut rng);
            assert!(ortho_penalty(&l, 1.0) >= 5.0);
        }
        let net = DualPathNet::treatment(0.3, &mut RngStream::new(1, 0)).unwrap();
        assert!(ortho_penalty(&net, 0.02) >= 0.02 * 127.0);
    }
}
