//! One PASS/FAIL line per acceptance criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::time::Instant;

use pwcycles::bifurcation::{
    default_monotonicity_input, monotonicity_demo, pseudo_hopf_search, two_fold_demo, PseudoHopfSetup, DEMO_ALPHA,
};
use pwcycles::certify::{
    certify_chain_with, certify_level0, sweep_count_level, validate_parameters, CountReport, Provenance, Tolerances,
    SWEEP_PER_UNIT, SWEEP_WINDOW,
};
use pwcycles::field::{PiecewiseField, Side};
use pwcycles::hamiltonian_family::{
    build_level, default_tables, expected_cycles, field_degree, hamiltonian_degree, pseudo_hopf_cycles,
};
use pwcycles::melnikov::{melnikov_oracle_check, oracle_grid, MelnikovSpec};
use pwcycles::ode::IntegratorOptions;
use pwcycles::poly::BiPolynomial;
use pwcycles::return_maps::{
    composed_return, entry_direction, half_return_algebraic, half_return_conservation, half_return_numeric,
    leftward_crossing, shift_derivative, ReturnChain,
};

struct Line {
    id: &'static str,
    passed: bool,
    detail: String,
}

fn line(id: &'static str, passed: bool, detail: String) -> Line {
    println!("{} criterion {id}: {detail}", if passed { "PASS" } else { "FAIL" });
    Line { id, passed, detail }
}

/// Certification and sweep at validated parameters.
fn level_run(k: usize) -> (CountReport, CountReport, f64) {
    let started = Instant::now();
    let tol = Tolerances::default();
    let tables = default_tables(k).unwrap();
    let p = validate_parameters(k, &tables, &tol).unwrap();
    let reports = certify_chain_with(k, p.epsilon, &p.epsilon_vector, &tables, &tol).unwrap();
    let top = reports.into_iter().find(|r| r.level == k).unwrap();
    let level = build_level(k, p.epsilon, &p.epsilon_vector, &tables).unwrap();
    let sweep = sweep_count_level(&level, SWEEP_WINDOW, SWEEP_PER_UNIT, &tol).unwrap();
    (top, sweep, started.elapsed().as_secs_f64())
}

fn criterion1() -> Line {
    let started = Instant::now();
    let mut ok = true;
    let mut worst = (0.0f64, 0.0f64);
    for eps in [1e-2, 1e-3, 1e-4] {
        let r = certify_level0(eps).unwrap();
        ok &= r.found == 1 && r.passed();
        for rec in &r.records {
            let shift = (rec.solved_ordinate - 0.5).abs();
            ok &= shift <= 5.0 * eps && rec.residual <= 1e-10;
            ok &= rec.upper_ordinate < 2.0 && rec.lower_ordinate > -2.0;
            worst = (worst.0.max(shift / eps), worst.1.max(rec.residual));
        }
    }
    let t = started.elapsed().as_secs_f64();
    line(
        "1",
        ok && t < 1.0,
        format!("one level-0 cycle per eps, max |y - 1/2| / eps = {:.3}, max residual {:e}, {t:.3} s", worst.0, worst.1),
    )
}

fn counted(id: &'static str, k: usize, budget: f64) -> Line {
    let (r, sweep, t) = level_run(k);
    let doubled = r.records.iter().filter(|c| c.provenance == Provenance::DoubledFromParent).count();
    let origin = r.records.iter().filter(|c| c.provenance == Provenance::MelnikovSeed).count();
    let expected_split = 2 * expected_cycles(k - 1) as usize;
    let ok = r.passed()
        && r.found == expected_cycles(k)
        && r.field_degree == field_degree(k)
        && sweep.found == r.found
        && doubled == expected_split
        && origin == hamiltonian_degree(k - 1) - 1
        && t < budget;
    line(
        id,
        ok,
        format!(
            "k = {k}: found {} of {} ({doubled} doubled + {origin} origin), degree {}, sweep {}, eps = {:e}, E = {:?}, {t:.2} s",
            r.found, r.expected, r.field_degree, sweep.found, r.epsilon_used, r.epsilon_vector_used
        ),
    )
}

fn criterion4() -> Line {
    let tables = default_tables(1).unwrap();
    let schedule = [1e-2, 1e-3, 1e-4];
    let mut ok = true;
    let mut detail = Vec::new();
    for k in [0, 1] {
        let level = build_level(k, 1e-3, &vec![0.5; k], &tables).unwrap();
        let spec = MelnikovSpec::from_level(&level);
        let r = melnikov_oracle_check(&level, &spec, &oracle_grid(k, 20).unwrap(), &schedule).unwrap();
        ok &= r.max_reduction_within(3.0, 30.0);
        detail.push(format!("k = {k} reductions {:.2?}", r.max_error_reduction));
    }
    line("4", ok, detail.join(", "))
}

fn criterion5() -> Line {
    let setup = PseudoHopfSetup::from_two_fold(&two_fold_demo(DEMO_ALPHA), 0.0, 1.0).unwrap();
    let out = pseudo_hopf_search(&setup, &[5e-2], &IntegratorOptions::default()).unwrap();
    let adm = out.iter().find(|o| o.sign == 1).unwrap();
    let opp = out.iter().find(|o| o.sign == -1).unwrap();
    let ok = adm.found && adm.encloses_segment && !opp.found && opp.absence_certified;
    let c = adm.cycle.unwrap();
    line(
        "5",
        ok,
        format!(
            "b = {}: cycle through {:.6} and {:.6} around segment {:?}; b = {}: absent, certified {}",
            adm.b, c.upper_ordinate, c.lower_ordinate, adm.sliding_segment, opp.b, opp.absence_certified
        ),
    )
}

fn criterion6() -> Line {
    let tol = Tolerances::default();
    let input = default_monotonicity_input(1e-2, &tol).unwrap();
    let (eps, b) = (1e-2, 1e-3);
    let r = monotonicity_demo(&input, eps, b, None, 4000, &tol).unwrap();
    let lift = r.lift.as_ref().unwrap();
    let wrong = monotonicity_demo(&input, eps, b, Some(-lift.admissible_b_sign()), 4000, &tol).unwrap();
    let flat = monotonicity_demo(&input, 0.0, b, None, 4000, &tol).unwrap();
    let ok = input.cycles.len() == 1
        && lift.lifted_degree == lift.base_degree + 1
        && r.count.found >= 2
        && wrong.count.found == 1
        && flat.count.found == 1;
    line(
        "6",
        ok,
        format!(
            "degree {} -> {}, lifted and shifted {} cycles, wrong sign {}, eps = 0 {}",
            lift.base_degree, lift.lifted_degree, r.count.found, wrong.count.found, flat.count.found
        ),
    )
}

/// Returns the line and the computed paired-centre value.
fn criterion7() -> (Line, f64) {
    let opts = IntegratorOptions::default();
    let chain = ReturnChain::single_loop(Side::Minus);
    let mut min = f64::INFINITY;
    let mut cycles = 0;
    let mut fixed_ok = true;
    let tables = default_tables(1).unwrap();
    let runs = [(0usize, 1e-3, vec![]), (1, 5e-3, vec![2.5e-3])];
    for (k, eps, evec) in runs {
        let level = build_level(k, eps, &evec, &tables).unwrap();
        let reports = certify_chain_with(k, eps, &evec, &tables, &Tolerances::default()).unwrap();
        let z = level.field();
        for rec in reports.iter().filter(|r| r.level == k).flat_map(|r| &r.records) {
            let y = leftward_crossing(&z, [rec.upper_ordinate, rec.lower_ordinate]).unwrap();
            let back = composed_return(&chain, &z, y, 0.0, &opts).unwrap();
            fixed_ok &= (back - y).abs() <= 1e-7;
            for b in [-1e-3, 0.0, 1e-3] {
                min = min.min(shift_derivative(&chain, &z, y, b, &opts).unwrap());
            }
            cycles += 1;
        }
    }
    let centres = PiecewiseField::smooth(-&BiPolynomial::y(), BiPolynomial::x());
    let paired = shift_derivative(&chain, &centres, 0.4, 0.0, &opts).unwrap();
    let bound_ok = fixed_ok && min >= 1.0 - 1e-4;
    let exact_ok = (paired - 3.0).abs() <= 1e-6;
    let l = line(
        "7",
        bound_ok && exact_ok,
        format!(
            "min d(pi)/db = {min:.6} over {cycles} certified cycles and |b| <= 1e-3 ({}); paired centres {paired:.6}, stated 3 ({})",
            if bound_ok { "bound holds" } else { "bound fails" },
            if exact_ok { "matches" } else { "mismatch" }
        ),
    );
    (l, paired)
}

fn criterion8() -> Line {
    let opts = IntegratorOptions::default();
    let mut notes = Vec::new();
    let mut ok = true;

    let l0 = build_level(0, 1e-2, &[], &default_tables(0).unwrap()).unwrap();
    let mut drift = 0.0f64;
    for i in 0..10 {
        let y = 0.1 + 0.08 * i as f64;
        for side in [Side::Plus, Side::Minus] {
            drift = drift.max(half_return_conservation(&l0, side, y, &opts).unwrap().1);
        }
    }
    ok &= drift <= 1e-9;
    notes.push(format!("drift {drift:.1e}"));

    let l = build_level(0, 1e-3, &[], &default_tables(0).unwrap()).unwrap();
    let z = l.field();
    let mut gap = 0.0f64;
    for i in 0..20 {
        let y = 0.05 + 0.9 * i as f64 / 19.0;
        for side in [Side::Plus, Side::Minus] {
            let a = half_return_algebraic(&l, side, y, 1e-3).unwrap();
            let n = half_return_numeric(&z, side, y, entry_direction(&z, side, y).unwrap(), &opts).unwrap();
            gap = gap.max((a - n).abs());
        }
    }
    ok &= gap <= 1e-8;
    notes.push(format!("half-return gap {gap:.1e}"));

    let tables = default_tables(2).unwrap();
    let mut sym = 0.0f64;
    let mut pull = 0.0f64;
    for k in 0..=2 {
        let lk = build_level(k, 0.0, &vec![1e-3; k], &tables).unwrap();
        for i in 1..10 {
            let y = 0.09 * i as f64 * if k == 0 { 1.0 } else { 0.25 };
            for side in [Side::Plus, Side::Minus] {
                sym = sym.max((half_return_algebraic(&lk, side, y, 0.0).unwrap() + y).abs());
            }
        }
        if k > 0 {
            let parent = build_level(k - 1, 0.0, &vec![1e-3; k - 1], &tables).unwrap();
            let child = build_level(k, 0.0, &vec![0.0; k], &tables).unwrap();
            pull = pull.max(child.h_plus.max_coeff_diff(&parent.h_plus.pullback_phi()));
            pull = pull.max(child.h_minus.max_coeff_diff(&parent.h_minus.pullback_phi()));
        }
    }
    ok &= sym <= 1e-12 && pull <= 1e-12;
    notes.push(format!("symmetry {sym:.1e}, pullback {pull:.1e}"));

    // counts: the level-0 value from certification, the recurrence for k = 0, 1
    let found0 = certify_level0(1e-3).unwrap().found;
    let (r1, _, _) = level_run(1);
    let (r2, _, _) = level_run(2);
    let rec = r1.found == 2 * found0 + hamiltonian_degree(0) as u64 - 1
        && r2.found == 2 * r1.found + hamiltonian_degree(1) as u64 - 1;
    ok &= rec;
    notes.push(format!("found {found0}, {}, {} (recurrence {})", r1.found, r2.found, if rec { "holds" } else { "fails" }));

    let (mut d, mut c) = (3usize, 1u64);
    let mut closed = true;
    for k in 0..=10 {
        closed &= hamiltonian_degree(k) == d && field_degree(k) == d - 1 && expected_cycles(k) == c;
        c = 2 * c + d as u64 - 1;
        d *= 2;
    }
    ok &= closed;
    notes.push(format!("closed forms k <= 10 {}", if closed { "match" } else { "differ" }));
    line("8", ok, notes.join("; "))
}

#[test]
fn acceptance() {
    let c1 = criterion1();
    let c2 = counted("2", 1, 30.0);
    let c3 = counted("3", 2, 600.0);
    let c4 = criterion4();
    let c5 = criterion5();
    let c6 = criterion6();
    let (c7, paired) = criterion7();
    let c8 = criterion8();
    let lines = [c1, c2, c3, c4, c5, c6, c7, c8];

    // The stated paired-centre value 3 double counts the outer term: with
    // both slopes -1 the b-derivative of phi+(phi-(y) - b) + b is exactly 2.
    assert!((paired - 2.0).abs() < 1e-6, "paired centres gave {paired}");
    // the pseudo-Hopf count refinement is checked separately and stays out of
    // the criteria; its closed form must at least match its recurrence
    assert_eq!(pseudo_hopf_cycles(1), 2 * pseudo_hopf_cycles(0) + hamiltonian_degree(0) as u64);

    let known_defects = ["7"];
    for l in &lines {
        if known_defects.contains(&l.id) {
            assert!(l.detail.contains("bound holds"), "criterion {} beyond the known defect: {}", l.id, l.detail);
        } else {
            assert!(l.passed, "criterion {} failed: {}", l.id, l.detail);
        }
    }
}
