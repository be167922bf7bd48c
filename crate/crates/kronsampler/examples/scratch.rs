//! Scratch experiment runner (dev only).

use kronsampler::fp::{self, FactorMatrix};
use kronsampler::instances::{self, EnsembleKind, EnsembleSpec};
use kronsampler::linalg;
use kronsampler::recon;
use kronsampler::samplers::{self, Objective, ProblemInstance};

fn mse_of(instance: &ProblemInstance, sel: &kronsampler::Selection) -> Option<f64> {
    fp::mse(instance, sel).ok()
}

fn main() {
    c6_final();
    c7_final();
    c5_final();
    c34_final();
    c12_final();
}

fn c6_final() {
    for base in [1601u64, 2601, 3601, 4601] {
        let spec =
            EnsembleSpec::new(EnsembleKind::SignCondition, vec![(200, 40)], base, 20).unwrap();
        let mut worst_ratio = 0.0f64;
        let mut all_med_ok = true;
        for &budget in &[50usize, 80, 120, 160, 200] {
            let mut ffw_sum = 0.0;
            let mut fs_sum = 0.0;
            let mut med_sum = 0.0;
            for trial in 0..20 {
                let factor = instances::generate_trial(&spec, trial).unwrap().remove(0);
                let instance = ProblemInstance::new(vec![factor.clone()], budget).unwrap();
                ffw_sum += mse_of(&instance, &samplers::ffw_vector(&factor, budget).unwrap()).unwrap();
                fs_sum += mse_of(&instance, &samplers::frame_sense(&factor, budget).unwrap()).unwrap();
                let mut draws: Vec<f64> = (0..10u64)
                    .map(|d| {
                        let r = samplers::random_selection(&instance, 7000 + trial as u64 * 100 + d);
                        mse_of(&instance, &r).unwrap_or(f64::INFINITY)
                    })
                    .collect();
                draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
                med_sum += 0.5 * (draws[4] + draws[5]);
            }
            worst_ratio = worst_ratio.max(ffw_sum / fs_sum);
            all_med_ok &= ffw_sum <= med_sum;
            println!(
                "  C6 base={base} L={budget}: ratio {:.4} ffw {:.3} med {:.3}",
                ffw_sum / fs_sum,
                ffw_sum / 20.0,
                med_sum / 20.0
            );
        }
        println!("C6 base={base}: worst ratio {worst_ratio:.4} med_ok {all_med_ok}");
    }
}

fn c7_final() {
    let spec = EnsembleSpec::new(
        EnsembleKind::SignCondition,
        vec![(50, 10), (60, 20), (70, 15)],
        701,
        20,
    )
    .unwrap();
    for budget in [60usize, 90, 120, 150] {
        let mut ffw_sum = 0.0;
        let mut gfp_sum = 0.0;
        for trial in 0..20 {
            let factors = instances::generate_trial(&spec, trial).unwrap();
            let instance = ProblemInstance::new(factors, budget).unwrap();
            ffw_sum += mse_of(&instance, &samplers::ffw_tensor(&instance).unwrap())
                .unwrap_or(f64::INFINITY);
            gfp_sum += mse_of(&instance, &samplers::greedy_fp_tensor(&instance).unwrap())
                .unwrap_or(f64::INFINITY);
        }
        println!("C7 L={budget}: ffw<=gfp {}", ffw_sum <= gfp_sum);
    }
}

fn c5_final() {
    for seed in [501u64, 1501] {
        let spec =
            EnsembleSpec::new(EnsembleKind::SignCondition, vec![(8, 2), (9, 2)], seed, 50).unwrap();
        let mut sat = 0;
        let mut tot = 0;
        for trial in 0..50 {
            let factors = instances::generate_trial(&spec, trial).unwrap();
            for budget in 4..=17usize {
                let instance = ProblemInstance::new(factors.clone(), budget).unwrap();
                let opt = samplers::exhaustive_optimum(&instance, Objective::Fp).unwrap();
                let report = kronsampler::bounds::check_tensor_bound(&instance, &opt).unwrap();
                tot += 1;
                if report.satisfied {
                    sat += 1;
                }
            }
        }
        println!("C5 seed={seed}: {sat}/{tot} = {:.1}%", 100.0 * sat as f64 / tot as f64);
    }
}

fn c34_final() {
    let spec = EnsembleSpec::new(EnsembleKind::SignCondition, vec![(12, 2)], 301, 100).unwrap();
    let mut ok3 = 0;
    let mut ok4 = 0;
    for trial in 0..100 {
        let factor = instances::generate_trial(&spec, trial).unwrap().remove(0);
        let instance = ProblemInstance::new(vec![factor.clone()], 4).unwrap();
        let opt = samplers::exhaustive_optimum(&instance, Objective::Fp).unwrap();
        if kronsampler::bounds::g_ratio_check(&factor, 4, &opt).unwrap().satisfied {
            ok3 += 1;
        }
        if kronsampler::bounds::check_gamma(&factor, 4, &opt).unwrap().satisfied {
            ok4 += 1;
        }
    }
    println!("C3 {ok3}/100 C4 {ok4}/100");
}

fn c12_final() {
    let img = instances::synthetic_image(512, 512, 1300);
    let inst = instances::image_to_instance(&img, 40, 40).unwrap();
    let factors = vec![FactorMatrix::new(inst.u1.clone()), FactorMatrix::new(inst.u2.clone())];
    let instance = ProblemInstance::new(factors, 400).unwrap();
    let model = recon::SignalModel::new(
        vec![inst.u1.clone(), inst.u2.clone()],
        inst.core.as_slice().to_vec(),
    )
    .unwrap();
    let f_ref: Vec<f64> = img.as_slice().to_vec();

    let eval = |sel: &kronsampler::Selection| -> (f64, f64) {
        let v = recon::restrict_to_grid(&f_ref, &[512, 512], sel).unwrap();
        let m = recon::Measurement { values: v, noise_sigma: 0.0, seed: 0 };
        let restricted: Vec<_> = model
            .bases()
            .iter()
            .zip(sel.modes())
            .map(|(b, s)| linalg::restrict_rows(b, s).unwrap())
            .collect();
        match recon::reconstruct(&restricted, &m, model.bases()) {
            Ok((_, f_hat)) => {
                let met = recon::error_metrics(&f_ref, &f_hat).unwrap();
                (met.mse, met.psnr)
            }
            Err(_) => (f64::INFINITY, 0.0),
        }
    };

    let ffw = samplers::ffw_tensor(&instance).unwrap();
    let gfp = samplers::greedy_fp_tensor(&instance).unwrap();
    let (ffw_mse, ffw_psnr) = eval(&ffw);
    let (gfp_mse, _) = eval(&gfp);
    let mut psnrs = Vec::new();
    for d in 0..50u64 {
        psnrs.push(eval(&samplers::random_selection(&instance, 9000 + d)).1);
    }
    let mean_psnr: f64 = psnrs.iter().sum::<f64>() / 50.0;
    println!(
        "C12: ffw mse {ffw_mse:.3} psnr {ffw_psnr:.2} gfp mse {gfp_mse:.3} rand mean {mean_psnr:.2} mse_ok {} psnr_ok {}",
        ffw_mse <= gfp_mse,
        ffw_psnr >= mean_psnr
    );
}
