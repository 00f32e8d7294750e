//! Exercise the C ABI the way a foreign binding would: through the raw
//! pointer surface, checking status codes and output buffers.

use std::ptr;

use ridgelift_ffi::*;

#[test]
fn full_pipeline_through_the_c_surface() {
    unsafe {
        let mut model: *mut RlModel = ptr::null_mut();
        assert_eq!(rl_model_logistic(60, 11, &mut model), RlStatus::Ok);

        let (mut d, mut k) = (0u64, 0u64);
        assert_eq!(rl_model_dims(model, &mut d, &mut k), RlStatus::Ok);
        assert_eq!((d, k), (60, 1));

        let mut c2 = 0.0;
        assert_eq!(rl_model_c2(model, &mut c2), RlStatus::Ok);
        assert_eq!(c2, 1.0);

        let x = vec![0.0f64; 60];
        let mut value = -1.0;
        assert_eq!(rl_model_value(model, x.as_ptr(), 60, &mut value), RlStatus::Ok);
        assert_eq!(value, 0.5);

        let mut plan: *mut RlPlan = ptr::null_mut();
        assert_eq!(
            rl_plan_dense(60, 1, 15, 450, 1e-3, 12, &mut plan),
            RlStatus::Ok
        );
        let mut len = 0u64;
        assert_eq!(rl_plan_measurement_len(plan, &mut len), RlStatus::Ok);
        assert_eq!(len, 450);
        let mut radius = 0.0;
        assert_eq!(rl_plan_enlarged_radius(plan, &mut radius), RlStatus::Ok);
        assert!((radius - 1e-3 * (60.0f64 / 450.0).sqrt()).abs() < 1e-15);

        let mut ms: *mut RlMeasurements = ptr::null_mut();
        assert_eq!(
            rl_measure(model, plan, 0.0, 0.0, 0.0, 13, &mut ms),
            RlStatus::Ok
        );
        let mut calls = 0u64;
        assert_eq!(rl_measurements_oracle_calls(ms, &mut calls), RlStatus::Ok);
        assert_eq!(calls, 15 * (450 + 1));
        let mut y = vec![0.0f64; 450];
        assert_eq!(rl_measurements_copy(ms, y.as_mut_ptr(), 450), RlStatus::Ok);
        assert!(y.iter().any(|v| v.abs() > 0.0));

        let mut est: *mut RlEstimate = ptr::null_mut();
        assert_eq!(
            rl_recover_rank_projected(plan, ms, 1, 300, 1e-7, 14, &mut est),
            RlStatus::Ok
        );
        let (mut iters, mut residual, mut feasible) = (0u64, 0.0f64, 0u8);
        assert_eq!(
            rl_estimate_stats(est, &mut iters, &mut residual, &mut feasible),
            RlStatus::Ok
        );
        assert!(iters > 0);

        let mut alignment = 0.0;
        assert_eq!(rl_alignment(model, est, 1, &mut alignment), RlStatus::Ok);
        assert!(alignment > 0.99, "alignment {alignment}");

        let mut a_hat = vec![0.0f64; 60];
        assert_eq!(
            rl_estimate_subspace(est, 1, a_hat.as_mut_ptr(), 60),
            RlStatus::Ok
        );
        let norm: f64 = a_hat.iter().map(|v| v * v).sum::<f64>();
        assert!((norm - 1.0).abs() < 1e-10);

        rl_estimate_free(est);
        rl_measurements_free(ms);
        rl_plan_free(plan);
        rl_model_free(model);
    }
}

#[test]
fn error_paths_set_messages_and_codes() {
    unsafe {
        // null output pointer
        assert_eq!(
            rl_model_logistic(10, 0, ptr::null_mut()),
            RlStatus::NullPointer
        );

        // invalid dimensions
        let mut model: *mut RlModel = ptr::null_mut();
        assert_eq!(
            rl_model_quadratic(3, 5, ptr::null(), 0, &mut model),
            RlStatus::InvalidArgument
        );
        let mut buf = vec![0i8; 256];
        let len = rl_last_error_message(buf.as_mut_ptr(), buf.len());
        assert!(len > 0);

        // shape mismatch on evaluation
        assert_eq!(rl_model_logistic(10, 0, &mut model), RlStatus::Ok);
        let x = [0.0f64; 4];
        let mut value = 0.0;
        assert_eq!(
            rl_model_value(model, x.as_ptr(), 4, &mut value),
            RlStatus::ShapeError
        );

        // degenerate subspace rank
        let mut plan: *mut RlPlan = ptr::null_mut();
        assert_eq!(rl_plan_dense(10, 1, 4, 80, 1e-3, 1, &mut plan), RlStatus::Ok);
        let mut ms: *mut RlMeasurements = ptr::null_mut();
        assert_eq!(rl_measure(model, plan, 0.0, 0.0, 0.0, 2, &mut ms), RlStatus::Ok);
        let mut est: *mut RlEstimate = ptr::null_mut();
        assert_eq!(
            rl_recover_rank_projected(plan, ms, 1, 200, 1e-7, 3, &mut est),
            RlStatus::Ok
        );
        let mut alignment = 0.0;
        assert_eq!(rl_alignment(model, est, 3, &mut alignment), RlStatus::Degenerate);

        rl_estimate_free(est);
        rl_measurements_free(ms);
        rl_plan_free(plan);
        rl_model_free(model);
    }
}

#[test]
fn bounds_round_trip_matches_library() {
    let inputs = RlBoundsInputs {
        d: 100,
        k: 1,
        m_x: 20,
        m_phi: 300,
        epsilon: 1e-3,
        c2: 1.0,
        alpha: 0.0625,
        rho: 0.5,
        kappa: 0.2,
        c0: 16.0,
        eta: 0.99,
        delta: 0.1,
        p1: 0.05,
        p2: 0.05,
        sigma: 0.0,
        gamma: 3.2,
    };
    let mut report = RlBoundsReport::default();
    let status = unsafe { rl_compute_bounds(&inputs, &mut report) };
    assert_eq!(status, RlStatus::Ok);
    assert!((report.q_kappa - 2.716049382716049e-4).abs() < 1e-16);
    assert!(report.lemma4_precondition_ok == 1);
    assert!(report.m_x_min > 0 && report.m_phi_min > 0);

    // density sanity through the ABI
    let y = [0.0f64];
    let mut density = 0.0;
    assert_eq!(
        unsafe { rl_pushforward_density(y.as_ptr(), 1, 3, &mut density) },
        RlStatus::Ok
    );
    assert!((density - 0.5).abs() < 1e-12);

    let mut version = 0.0f64;
    let _ = version; // silence unused in case of cfg changes
    assert!(!unsafe { rl_version() }.is_null());
}

#[test]
fn generated_header_exists_and_declares_the_surface() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ridgelift.h");
    let text = std::fs::read_to_string(&header).expect("cbindgen header generated at build time");
    for symbol in [
        "rl_model_logistic",
        "rl_plan_dense",
        "rl_measure",
        "rl_recover_rank_projected",
        "rl_recover_nuclear",
        "rl_recover_sparse_low_rank",
        "rl_alignment",
        "rl_compute_bounds",
        "rl_last_error_message",
        "RlStatus",
        "RlBoundsReport",
    ] {
        assert!(text.contains(symbol), "header missing {symbol}");
    }
}
