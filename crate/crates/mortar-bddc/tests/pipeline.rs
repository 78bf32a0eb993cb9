//! End-to-end checks that need the whole pipeline: the literal four-step
//! preconditioner against the cached concise form, the dense operator
//! identity, and the shipped geometry/config files.

use mortar_bddc::harness::{
    build_pipeline, run_experiment, ExperimentConfig, PartitionSpec, ScalingSpec,
};
use mortar_bddc::linalg::{sym_eig, Matrix, SpdFactor, Vector};
use std::path::{Path, PathBuf};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn small_pipeline(scaling: ScalingSpec) -> mortar_bddc::harness::Pipeline {
    let (mut cfg, base) =
        ExperimentConfig::load(&configs_dir().join("ex1_conforming.json")).unwrap();
    cfg.partition = PartitionSpec::Conforming {
        k: 2,
        n: 6,
        beta: 0.5,
    };
    cfg.degree = 1;
    cfg.scaling = scaling;
    build_pipeline(&cfg, &base).unwrap()
}

/// Literal four-step preconditioner application, built entirely from dense
/// matrices and the original operator definitions:
///
/// 1. subdomain dual solves against the weighted restriction of g,
/// 2. coarse solve with `F = R_PiGamma^T S_tilde R_PiGamma` where
///    `R_PiGamma = E_Pi - S_tilde_Delta^{-1} S_tilde E_Pi`,
/// 3. dual correction solves against the coarse component,
/// 4. sum.
fn four_step_reference(pipeline: &mortar_bddc::harness::Pipeline, g: &Vector) -> Vector {
    let op = &pipeline.operator;
    let layout = &op.layout;
    let dim_tilde = layout.dim_tilde();
    let s_tilde = op.dense_tilde_matrix();
    let e_d = op.averaging_dense();

    // Dense injections E_Delta^(i) and E_Pi into the tilde space, and the
    // weighted maps R_DeltaGamma^(i) (columns of E_D).
    let mut e_delta = Vec::new();
    let mut r_delta_gamma = Vec::new();
    for sl in &layout.subdomains {
        let nd = sl.dual_indices.len();
        let mut inj = Matrix::zeros(dim_tilde, nd);
        for c in 0..nd {
            inj[(sl.tilde_offset + c, c)] = 1.0;
        }
        e_delta.push(inj);
        r_delta_gamma.push(e_d.columns(sl.tilde_offset, nd).into_owned());
    }
    let mut e_pi = Matrix::zeros(dim_tilde, layout.dim_pi);
    for p in 0..layout.dim_pi {
        e_pi[(layout.dim_dual + p, p)] = 1.0;
    }
    let e_pi_hat = e_d.columns(layout.dim_dual, layout.dim_pi).into_owned();

    // Step 1.
    let mut u_delta_a = Vector::zeros(layout.dim_hat);
    let mut tilde_a = Vector::zeros(dim_tilde);
    let mut dual_factors = Vec::new();
    for (i, inj) in e_delta.iter().enumerate() {
        let s_dd = inj.transpose() * &s_tilde * inj;
        let factor = if s_dd.nrows() > 0 {
            Some(SpdFactor::new(&s_dd).unwrap())
        } else {
            None
        };
        if let Some(f) = &factor {
            let rhs = r_delta_gamma[i].transpose() * g;
            let u = f.solve_vec(&rhs);
            u_delta_a += &r_delta_gamma[i] * &u;
            tilde_a += inj * &u;
        }
        dual_factors.push(factor);
    }

    // Step 2: coarse problem from the original definition of F.
    let mut u_pi = Vector::zeros(layout.dim_pi);
    if layout.dim_pi > 0 {
        let mut s_delta_inv = Matrix::zeros(dim_tilde, dim_tilde);
        for (i, inj) in e_delta.iter().enumerate() {
            if let Some(f) = &dual_factors[i] {
                let inv = f.solve_mat(&Matrix::identity(inj.ncols(), inj.ncols()));
                s_delta_inv += inj * inv * inj.transpose();
            }
        }
        let r_pi_gamma = &e_pi - &s_delta_inv * &s_tilde * &e_pi;
        let f_pipi = r_pi_gamma.transpose() * &s_tilde * &r_pi_gamma;
        let rhs = e_pi_hat.transpose() * g - e_pi.transpose() * &s_tilde * &tilde_a;
        u_pi = SpdFactor::new(&f_pipi).unwrap().solve_vec(&rhs);
    }

    // Step 3.
    let mut u_delta_b = Vector::zeros(layout.dim_hat);
    for (i, inj) in e_delta.iter().enumerate() {
        if let Some(f) = &dual_factors[i] {
            let rhs = inj.transpose() * &s_tilde * &e_pi * &u_pi;
            let u = f.solve_vec(&rhs);
            u_delta_b -= &r_delta_gamma[i] * u;
        }
    }

    // Step 4.
    u_delta_a + e_pi_hat * u_pi + u_delta_b
}

#[test]
fn four_step_form_matches_concise_form() {
    for scaling in [ScalingSpec::M1, ScalingSpec::M2] {
        let pipeline = small_pipeline(scaling);
        for trial in 0..3u64 {
            let g = Vector::from_fn(pipeline.numbering.total, |i, _| {
                ((i as f64 + 1.3) * (trial as f64 + 0.7)).sin()
            });
            let reference = four_step_reference(&pipeline, &g);
            let concise = pipeline.operator.apply(&g);
            let rel = (&reference - &concise).norm() / reference.norm();
            assert!(
                rel <= 1e-12,
                "{scaling:?} trial {trial}: step form deviates by {rel}"
            );
        }
    }
}

#[test]
fn concise_operator_identity_holds_densely() {
    // M^{-1} = E_D S_tilde^{-1} E_D^T, evaluated with a dense inverse.
    let pipeline = small_pipeline(ScalingSpec::M2);
    let op = &pipeline.operator;
    let s_tilde = op.dense_tilde_matrix();
    let e_d = op.averaging_dense();
    let inv = SpdFactor::new(&s_tilde)
        .unwrap()
        .solve_mat(&Matrix::identity(s_tilde.nrows(), s_tilde.ncols()));
    let dense_identity = &e_d * inv * e_d.transpose();
    let dense_apply = op.dense_preconditioner();
    let rel = (&dense_identity - &dense_apply).norm() / dense_identity.norm();
    assert!(rel <= 1e-11, "operator identity deviates by {rel}");
}

#[test]
fn preconditioner_is_symmetric_positive() {
    for scaling in [ScalingSpec::M1, ScalingSpec::M2] {
        let pipeline = small_pipeline(scaling);
        let m_inv = pipeline.operator.dense_preconditioner();
        let asym = (&m_inv - m_inv.transpose()).norm() / m_inv.norm();
        assert!(asym <= 1e-10, "{scaling:?}: asymmetry {asym}");
        let sym = (&m_inv + m_inv.transpose()) * 0.5;
        let (vals, _) = sym_eig(&sym);
        assert!(vals[0] >= -1e-10, "{scaling:?}: negative eigenvalue {}", vals[0]);
    }
}

#[test]
fn transformed_schur_matches_congruence_of_original() {
    // The operator's assembled matrix is T^T S T of the untransformed
    // assembled Schur matrix.
    let pipeline = small_pipeline(ScalingSpec::M2);
    let n = pipeline.numbering.total;
    let s_orig =
        mortar_bddc::schur::dense_global_schur(&pipeline.schurs, &pipeline.numbering);
    let mut t_glob = Matrix::zeros(n, n);
    for (k, adapt) in pipeline.adapt.iter().enumerate() {
        let r = pipeline.numbering.range(k);
        t_glob
            .view_mut((r.start, r.start), (adapt.dim, adapt.dim))
            .copy_from(&adapt.t);
    }
    let expected = t_glob.transpose() * s_orig * &t_glob;
    let actual = pipeline.operator.dense_schur();
    let rel = (&expected - &actual).norm() / expected.norm();
    assert!(rel <= 1e-12, "congruence deviates by {rel}");
}

#[test]
fn solver_reduces_true_residual() {
    let pipeline = small_pipeline(ScalingSpec::M2);
    let (report, solution) = run_experiment(&pipeline);
    assert!(report.converged);
    let s_lambda = mortar_bddc::schur::apply_global_schur(
        &pipeline.schurs,
        &pipeline.numbering,
        &solution,
    );
    let rel = (s_lambda - &pipeline.g).norm() / pipeline.g.norm();
    assert!(rel <= 1e-8, "true residual {rel}");
}

#[test]
fn explicit_preconditioned_matrix_consistent_with_spectrum() {
    let pipeline = small_pipeline(ScalingSpec::M2);
    let g = mortar_bddc::bddc::dense_preconditioned_matrix(&pipeline.operator);
    let spectrum = mortar_bddc::bddc::preconditioned_spectrum(&pipeline.operator).unwrap();
    // Similar matrices share the trace.
    let trace: f64 = (0..g.nrows()).map(|i| g[(i, i)]).sum();
    let sum: f64 = spectrum.iter().sum();
    assert!((trace - sum).abs() <= 1e-9 * sum.abs());
    // In the fully primal limit the preconditioned matrix is the identity.
    let (mut cfg, base) =
        ExperimentConfig::load(&configs_dir().join("ex1_conforming.json")).unwrap();
    cfg.partition = PartitionSpec::Conforming {
        k: 2,
        n: 4,
        beta: 0.5,
    };
    cfg.degree = 1;
    cfg.coarse_space = mortar_bddc::harness::CoarseSpaceSpec::AllPrimal;
    let primal = build_pipeline(&cfg, &base).unwrap();
    let g = mortar_bddc::bddc::dense_preconditioned_matrix(&primal.operator);
    let n = g.nrows();
    let err = (&g - Matrix::identity(n, n))
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    assert!(err <= 1e-8, "fully primal deviates from identity by {err}");
}

#[test]
fn shipped_partition_has_38_interfaces() {
    let text = std::fs::read_to_string(configs_dir().join("fig5.json")).unwrap();
    let partition = mortar_bddc::geometry::load_partition(&text).unwrap();
    assert_eq!(partition.len(), 18);
    let interfaces = mortar_bddc::geometry::detect_interfaces(&partition).unwrap();
    assert_eq!(interfaces.len(), 38);
}

#[test]
fn edge_matrix_orderings_on_heterogeneous_config() {
    // On the random-coefficient pipeline: eliminating the other edges only
    // lowers energy (S - Sbar PSD), the parallel sum sits below both
    // operands, and the scaling pairs resolve the identity.
    let (cfg, base) =
        ExperimentConfig::load(&configs_dir().join("ex3_random.json")).unwrap();
    let pipeline = build_pipeline(&cfg, &base).unwrap();
    for (k, pair) in pipeline.edge_schurs.iter().enumerate() {
        let psum = mortar_bddc::adaptivity::parallel_sum(
            &pair[0].sbar,
            &pair[1].sbar,
            mortar_bddc::linalg::DEFLATION_TOL,
        );
        for es in pair {
            let (vals, _) = sym_eig(&(&es.s - &es.sbar));
            assert!(vals[0] >= -1e-10, "interface {k}: S - Sbar eig {}", vals[0]);
            let (vals, _) = sym_eig(&(&es.sbar - &psum));
            assert!(
                vals[0] >= -1e-10,
                "interface {k}: Sbar - (Sbar_i : Sbar_j) eig {}",
                vals[0]
            );
        }
        let scaling = &pipeline.scalings[k];
        let n = scaling.d[0].nrows();
        let sum_err = (&scaling.d[0] + &scaling.d[1] - Matrix::identity(n, n)).norm();
        assert!(sum_err <= 1e-12 * (n as f64), "interface {k}: D sum {sum_err}");
        let adapt = &pipeline.adapt[k];
        let check_err =
            (&adapt.d_check[0] + &adapt.d_check[1] - Matrix::identity(n, n)).norm();
        assert!(check_err <= 1e-10, "interface {k}: D_check sum {check_err}");
    }
}

#[test]
fn mesh_scale_refines_file_partitions() {
    let (mut cfg, base) =
        ExperimentConfig::load(&configs_dir().join("ex3_unconforming_fig5.json")).unwrap();
    let coarse = build_pipeline(&cfg, &base).unwrap();
    cfg.partition = PartitionSpec::File {
        path: "fig5.json".into(),
        mesh_scale: 2,
    };
    cfg.theta = mortar_bddc::harness::ThetaSpec::Rule {
        n: Some(16),
        beta: Some(2.0),
    };
    let fine = build_pipeline(&cfg, &base).unwrap();
    assert_eq!(fine.interfaces.len(), coarse.interfaces.len());
    // Doubling every mesh count doubles each nonmortar element count m,
    // so each n_k = m - 1 grows accordingly.
    for (a, b) in coarse
        .multiplier_spaces
        .iter()
        .zip(&fine.multiplier_spaces)
    {
        assert_eq!(b.elems, 2 * a.elems);
        assert_eq!(b.dim, 2 * a.elems - 1);
    }
    let (report, _) = run_experiment(&fine);
    assert!(report.converged);
}

#[test]
fn shipped_configs_build() {
    for name in [
        "ex1_conforming.json",
        "ex2_channels1.json",
        "ex2_channels3.json",
        "ex3_random.json",
        "ex3_unconforming_fig5.json",
    ] {
        let (cfg, base) = ExperimentConfig::load(&configs_dir().join(name)).unwrap();
        let pipeline = build_pipeline(&cfg, &base).unwrap();
        assert!(pipeline.numbering.total > 0, "{name}: empty system");
    }
}

#[test]
fn edge_reports_match_layout() {
    let pipeline = small_pipeline(ScalingSpec::M2);
    let (report, _) = run_experiment(&pipeline);
    assert_eq!(report.edges.len(), pipeline.interfaces.len());
    let pnum: usize = report.edges.iter().map(|e| e.n_pi).sum();
    assert_eq!(pnum, report.pnum);
    let total: usize = report.edges.iter().map(|e| e.n_k).sum();
    assert_eq!(total, report.dim_multipliers);
    assert!((report.ppnum - pnum as f64 / total as f64).abs() < 1e-15);
}
