//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::f64::consts::LN_2;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use shiftlab::certify::{
    certify_bounds, certify_euler_order, certify_nilpotent_sets, certify_spectral, Certificate, ClaimRegistry,
    EnvelopeClaim, GlobalClaim, LinearizedClaim, Step1Claim, Step2Claim, Claim,
};
use shiftlab::field::{build_ladder, FieldParams, RadiusLadder};
use shiftlab::kakutani::gelfand_estimate;

const SEED: u64 = 20_240_601;

struct Outcome {
    ok: bool,
    detail: String,
    certs: Vec<Certificate>,
}

fn timed(limit_s: u64, f: impl FnOnce() -> Outcome) -> (Outcome, Duration, bool) {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = took <= Duration::from_secs(limit_s);
    (out, took, in_time)
}

fn cert_line(c: &Certificate) -> String {
    format!("{}={:?} margin={:.4}", c.claim, c.verdict, c.margin_log)
}

/// Per-shell margins out of a merged certificate.
fn shell_margins(c: &Certificate) -> Vec<(u64, f64)> {
    c.witness
        .as_array()
        .map(|rows| {
            rows.iter()
                .filter_map(|r| Some((r["params"]["k"].as_u64()?, r["margin_log"].as_f64()?)))
                .collect()
        })
        .unwrap_or_default()
}

fn nilpotency() -> Outcome {
    let c = certify_nilpotent_sets(2.0, 6, 100, 256, SEED).expect("nilpotent certificate");
    Outcome { ok: c.passed(), detail: cert_line(&c), certs: vec![c] }
}

fn spectral() -> Outcome {
    let c = certify_spectral(2.0, 25, 20, 1e-3, 6).expect("spectral certificate");
    // Independent closed form: sum_q (2 - q) ln 2 / 2^q over q <= p equals p ln 2 / 2^p.
    let oracle_ok = (1..=25u32).all(|p| {
        let two_p = f64::from(p).exp2();
        let oracle = f64::from(p) * LN_2 / (two_p - 1.0);
        ((gelfand_estimate(2.0, p) - oracle) / oracle).abs() <= 1e-12
    });
    Outcome {
        ok: c.passed() && oracle_ok,
        detail: format!("{} closed-form-oracle={}", cert_line(&c), oracle_ok),
        certs: vec![c],
    }
}

fn bounds(ladder: &RadiusLadder) -> Outcome {
    let pairs = 10_000;
    let c = certify_bounds(ladder, 400, pairs, 64, SEED).expect("bounds certificate");
    Outcome { ok: c.passed() && pairs >= 10_000, detail: format!("{} pairs={pairs}", cert_line(&c)), certs: vec![c] }
}

fn run_claim(claim: &dyn Claim, ladder: &RadiusLadder) -> Certificate {
    claim.certify(ladder, SEED).expect("claim runs")
}

fn envelope(ladder: &RadiusLadder) -> Outcome {
    let claim = EnvelopeClaim { ks: vec![2, 3, 4], tol: 1e-10, ..EnvelopeClaim::default() };
    let c = run_claim(&claim, ladder);
    Outcome { ok: c.passed(), detail: cert_line(&c), certs: vec![c] }
}

fn stability_chain(ladder: &RadiusLadder) -> Outcome {
    let s1 = run_claim(&Step1Claim { ks: vec![3, 4, 5], n_ics: 32, ..Step1Claim::default() }, ladder);
    let s2 = run_claim(&Step2Claim { ks: vec![3, 4, 5], n_ics: 32, ..Step2Claim::default() }, ladder);
    let m1 = shell_margins(&s1);
    let m2 = shell_margins(&s2);
    let margins_ok = m1.len() == 3 && m1.iter().all(|(_, m)| *m >= LN_2 - 1e-3);
    // step2 margin is log(4 T_env / max T_hit)
    let hits_ok = m2.len() == 3 && m2.iter().all(|(_, m)| *m >= 0.0);
    Outcome {
        ok: s1.passed() && s2.passed() && margins_ok && hits_ok,
        detail: format!("{} {} step1-margins={m1:?} step2-margins={m2:?}", cert_line(&s1), cert_line(&s2)),
        certs: vec![s1, s2],
    }
}

fn global(ladder: &RadiusLadder) -> Outcome {
    let claim = GlobalClaim { n_ics: 16, ..GlobalClaim::default() };
    let c = run_claim(&claim, ladder);
    Outcome { ok: c.passed(), detail: cert_line(&c), certs: vec![c] }
}

fn linearized(ladder: &RadiusLadder, chain_passed: bool) -> Outcome {
    let claim = LinearizedClaim::default();
    assert!(claim.ns.iter().all(|n| *n <= 4096) && claim.ts.iter().all(|t| *t <= 64.0));
    let c = run_claim(&claim, ladder);
    Outcome {
        ok: c.passed() && chain_passed,
        detail: format!("{} best-log-norm={} nonlinear-chain-decays={chain_passed}", cert_line(&c), c.witness["best"]["log_norm"]),
        certs: vec![c],
    }
}

fn euler_order(ladder: &RadiusLadder) -> Outcome {
    let c = certify_euler_order(ladder, 1e-3, 2.0, 0.5, 64, SEED).expect("euler certificate");
    Outcome { ok: c.passed(), detail: format!("{} orders={}", cert_line(&c), c.witness["orders"]), certs: vec![c] }
}

fn determinism(ladder: &RadiusLadder, first: &[Certificate]) -> Outcome {
    let reg = ClaimRegistry::default();
    let ids: Vec<&str> = reg.ids();
    let a = reg.run_suite(&ids, ladder, SEED).expect("suite");
    let b = reg.run_suite(&ids, ladder, SEED).expect("suite");
    let mut mismatched: Vec<String> = a
        .certificates
        .iter()
        .zip(&b.certificates)
        .filter(|(x, y)| !x.same_outcome(y))
        .map(|(x, _)| x.claim.clone())
        .collect();
    // Criterion runs above reproduce too.
    for c in first {
        let again = match c.claim.as_str() {
            "nilpotent" => certify_nilpotent_sets(2.0, 6, 100, 256, SEED).unwrap(),
            "bounds" => certify_bounds(ladder, 400, 10_000, 64, SEED).unwrap(),
            "euler-order" => certify_euler_order(ladder, 1e-3, 2.0, 0.5, 64, SEED).unwrap(),
            _ => continue,
        };
        if !again.same_outcome(c) {
            mismatched.push(c.claim.clone());
        }
    }
    Outcome {
        ok: mismatched.is_empty() && a.certificates.len() == ids.len(),
        detail: format!("claims={} mismatched={mismatched:?}", ids.len()),
        certs: Vec::new(),
    }
}

struct Board {
    all_ok: bool,
    certs: Vec<Certificate>,
}

impl Board {
    fn report(&mut self, n: u32, name: &str, limit: Option<u64>, (out, took, in_time): (Outcome, Duration, bool)) -> bool {
        let ok = out.ok && (limit.is_none() || in_time);
        self.all_ok &= ok;
        let budget = limit.map(|l| format!(" (limit {l}s)")).unwrap_or_default();
        println!(
            "criterion {n} {name}: {} [{:.1}s{budget}] {}",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            out.detail
        );
        self.certs.extend(out.certs);
        out.ok
    }
}

fn main() -> ExitCode {
    let ladder = build_ladder(&FieldParams::default()).expect("default ladder");
    let mut board = Board { all_ok: true, certs: Vec::new() };

    board.report(1, "exact nilpotency", Some(10), timed(10, nilpotency));
    board.report(2, "spectral radius", Some(5), timed(5, spectral));
    board.report(3, "bound suite", Some(30), timed(30, || bounds(&ladder)));
    board.report(4, "decay envelope", Some(60), timed(60, || envelope(&ladder)));
    let chain = board.report(5, "stability chain", Some(300), timed(300, || stability_chain(&ladder)));
    board.report(6, "global attraction", Some(300), timed(300, || global(&ladder)));
    board.report(7, "linearized contrast", Some(300), timed(300, || linearized(&ladder, chain)));
    board.report(8, "euler convergence", None, timed(u64::MAX, || euler_order(&ladder)));
    let first = board.certs.clone();
    board.report(9, "determinism", None, timed(u64::MAX, || determinism(&ladder, &first)));

    if board.all_ok {
        println!("acceptance: all criteria PASS");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAIL");
        ExitCode::FAILURE
    }
}
