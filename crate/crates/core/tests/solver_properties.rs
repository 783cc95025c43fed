use fairtrs::inner::{
    kkt_residual, pgd_solve, random_perturb, trs_solve, PerturbedSample, PgdOptions, TrsOptions,
};
use fairtrs::model::{bce_loss, loss_local_model, AffineModel};
use proptest::prelude::*;
use rand::SeedableRng;

fn instance() -> impl Strategy<Value = (Vec<f64>, f64, Vec<f64>, u8, f64)> {
    (2usize..=5).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0f64..1.0, n),
            -1.0f64..1.0,
            prop::collection::vec(0.0f64..1.0, n),
            0u8..=1,
            0.05f64..0.2,
        )
    })
}

fn loss_at(model: &AffineModel, x: &[f64], y: u8, delta: &[f64]) -> f64 {
    let xp: Vec<f64> = x.iter().zip(delta).map(|(a, d)| a + d).collect();
    bce_loss(model, &xp, y).unwrap()
}

proptest! {
    #[test]
    fn solvers_stay_feasible_and_never_lower_the_loss((w, b, x, y, r) in instance(), seed in any::<u64>()) {
        prop_assume!(w.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-3);
        let model = AffineModel::new(w, b).unwrap();
        let base = bce_loss(&model, &x, y).unwrap();

        let local = loss_local_model(&model, &x, y).unwrap();
        let trs = trs_solve(&local, r, &TrsOptions::default()).unwrap();
        let sample = PerturbedSample { model: &model, x: &x, y };
        let pgd = pgd_solve(&sample, r, &PgdOptions::default()).unwrap();
        let mut rng = rand_pcg::Pcg64Mcg::seed_from_u64(seed);
        let rnd = random_perturb(&mut rng, x.len(), r);

        for res in [&trs, &pgd, &rnd] {
            prop_assert!(res.delta_norm <= r * (1.0 + 1e-12));
        }
        prop_assert!(loss_at(&model, &x, y, &trs.delta) >= base);
        prop_assert!(loss_at(&model, &x, y, &pgd.delta) >= base);
        prop_assert!((rnd.delta_norm - r).abs() <= 1e-12);
        // the affine loss increases fastest along ±w, so no other direction beats TRS
        prop_assert!(loss_at(&model, &x, y, &trs.delta) >= loss_at(&model, &x, y, &rnd.delta) - 1e-12);
    }

    #[test]
    fn trs_satisfies_model_kkt((w, b, x, y, r) in instance()) {
        prop_assume!(w.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-3);
        let model = AffineModel::new(w, b).unwrap();
        let local = loss_local_model(&model, &x, y).unwrap();
        let res = trs_solve(&local, r, &TrsOptions::default()).unwrap();
        let hd = local.hess.mul_vec(&res.delta);
        let model_grad: Vec<f64> = local.grad.iter().zip(&hd).map(|(g, h)| g + h).collect();
        let k = kkt_residual(&model_grad, &res.delta, res.lambda, r);
        let scale = local.grad.iter().map(|g| g * g).sum::<f64>().sqrt().max(1.0);
        prop_assert!(k.stationarity <= 1e-6 * scale, "{:?}", k);
        prop_assert!(k.primal <= 1e-9 && k.dual == 0.0 && k.complementarity <= 1e-6);
    }
}
