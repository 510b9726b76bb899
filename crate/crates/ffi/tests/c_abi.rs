use std::ffi::{c_char, CString};
use std::ptr;

use landau_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { landau_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn natural() -> *mut LandauSystem {
    let mut sys = ptr::null_mut();
    let s = unsafe { landau_system_new(1.0, 1.0, 1.0, LandauUnits::Natural, &mut sys) };
    assert_eq!(s, LandauStatus::Ok);
    sys
}

#[test]
fn resonance_through_handles() {
    unsafe {
        let sys = natural();
        let mut w = ptr::null_mut();
        assert_eq!(landau_waveform_rotating(0.1, 1.0, 0.0, &mut w), LandauStatus::Ok);
        let mut p = ptr::null_mut();
        assert_eq!(landau_propagator_assemble(sys, w, 10.0, 48, &mut p), LandauStatus::Ok);
        assert_eq!(landau_propagator_dimension(p), 48);

        let mut params = [0.0; 6];
        assert_eq!(landau_propagator_parameters(p, params.as_mut_ptr()), LandauStatus::Ok);
        assert!((params[3] + 0.5).abs() < 1e-14);
        assert!(params[5].abs() < 1e-14);

        let mut probs = vec![0.0; 48];
        assert_eq!(landau_propagator_transitions(p, 0, probs.as_mut_ptr(), probs.len()), LandauStatus::Ok);
        let mut survival = 0.0;
        assert_eq!(landau_resonance_survival(sys, 0.1, 10.0, &mut survival), LandauStatus::Ok);
        assert!((probs[0] - survival).abs() < 1e-14);
        assert!((survival - (-0.5f64).exp()).abs() < 1e-14);

        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(landau_propagator_j_element(p, 0, 0, &mut re, &mut im), LandauStatus::Ok);
        assert!((re * re + im * im - survival).abs() < 1e-14);

        landau_propagator_free(p);
        landau_waveform_free(w);
        landau_system_free(sys);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(landau_system_new(0.0, 1.0, 1.0, LandauUnits::Si, &mut sys), LandauStatus::InvalidArgument);
        assert!(sys.is_null());
        assert!(!last_error().is_empty());

        let sys = natural();
        let mut w = ptr::null_mut();
        assert_eq!(landau_waveform_constant(0.1, 0.0, &mut w), LandauStatus::Ok);
        let mut p = ptr::null_mut();
        assert_eq!(landau_propagator_assemble(sys, w, 1.0, 32, &mut p), LandauStatus::Ok);

        let mut small = [0.0; 4];
        assert_eq!(landau_propagator_transitions(p, 0, small.as_mut_ptr(), 4), LandauStatus::BufferTooSmall);
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(landau_propagator_j_element(p, 31, 0, &mut re, &mut im), LandauStatus::Truncation);
        assert!(last_error().contains("healthy"));
        assert_eq!(landau_propagator_parameters(ptr::null(), small.as_mut_ptr()), LandauStatus::NullPointer);
        assert_eq!(landau_propagator_dimension(ptr::null()), 0);

        landau_propagator_free(p);
        landau_waveform_free(w);
        landau_system_free(sys);
        landau_system_free(ptr::null_mut());
    }
}

#[test]
fn waveforms_from_samples_and_json() {
    unsafe {
        let sys = natural();
        let t = [0.0, 1.0, 2.0];
        let e1 = [0.1, 0.1, 0.1];
        let e2 = [0.0, 0.0, 0.0];
        let mut sampled = ptr::null_mut();
        assert_eq!(landau_waveform_sampled(t.as_ptr(), e1.as_ptr(), e2.as_ptr(), 3, &mut sampled), LandauStatus::Ok);
        let json = CString::new(r#"{"type": "constant", "e1": 0.1, "e2": 0.0}"#).unwrap();
        let mut constant = ptr::null_mut();
        assert_eq!(landau_waveform_from_json(json.as_ptr(), &mut constant), LandauStatus::Ok);

        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(landau_propagator_assemble(sys, sampled, 2.0, 32, &mut a), LandauStatus::Ok);
        assert_eq!(landau_propagator_assemble(sys, constant, 2.0, 32, &mut b), LandauStatus::Ok);
        let (mut pa, mut pb) = ([0.0; 6], [0.0; 6]);
        landau_propagator_parameters(a, pa.as_mut_ptr());
        landau_propagator_parameters(b, pb.as_mut_ptr());
        for j in 0..6 {
            assert!((pa[j] - pb[j]).abs() < 1e-9, "{j}: {} vs {}", pa[j], pb[j]);
        }

        let mut outside = ptr::null_mut();
        assert_eq!(landau_propagator_assemble(sys, sampled, 3.0, 32, &mut outside), LandauStatus::Domain);

        let bad = CString::new(r#"{"type": "nope"}"#).unwrap();
        let mut w = ptr::null_mut();
        assert_eq!(landau_waveform_from_json(bad.as_ptr(), &mut w), LandauStatus::InvalidArgument);

        for p in [a, b] {
            landau_propagator_free(p);
        }
        landau_waveform_free(sampled);
        landau_waveform_free(constant);
        landau_system_free(sys);
    }
}

#[test]
fn electron_scales() {
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(landau_system_electron_si(15.0, &mut sys), LandauStatus::Ok);
        let (mut w, mut l, mut k) = (0.0, 0.0, 0.0);
        assert_eq!(landau_system_scales(sys, &mut w, &mut l, &mut k), LandauStatus::Ok);
        assert!((w / 2.638e12 - 1.0).abs() < 1e-3);
        assert!((k * l - 2f64.sqrt()).abs() < 1e-12);
        landau_system_free(sys);
    }
}
