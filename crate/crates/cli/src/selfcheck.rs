use std::f64::consts::PI;

use viscowave::certificate::{explicit_lower_bound, gamma_identity_defect, CertificateInputs, Formulas};
use viscowave::kernel::MemoryKernel;
use viscowave::solver::{dissipativity_spot_check, Discretization, GridSpec, InitialData, Mode, ModelParams, Solver};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn worked_constants(formulas: Formulas) -> Check {
    let inputs = CertificateInputs::worked_example();
    let cp = inputs.c_poincare;
    let b = explicit_lower_bound(&inputs).expect("worked inputs are valid");
    let c1 = rel((formulas.c1)(&inputs), 8.0 + 8.0 * cp);
    let g1 = rel(b.gamma1, 495.0 / 8.0);
    let g2 = rel(b.gamma2, 45.0 + 73.0 * cp);
    let lb = rel(b.k0_lb, 8.0 * (-2.0f64).exp() / (1231.0 + 1168.0 * cp));
    let mut defect: f64 = 0.0;
    for tau in [0.0, 0.5, 1.0, 2.0] {
        for cp in [0.05, 1.0 / (PI * PI), 1.0] {
            let at = CertificateInputs { tau, c_poincare: cp, ..inputs };
            defect = defect.max(gamma_identity_defect(&at, formulas));
        }
    }
    let worst = c1.max(g1).max(g2).max(lb).max(defect);
    Check {
        name: "worked constants and gamma identity",
        pass: worst <= 1e-12,
        detail: format!("C1 {c1:.1e}, gamma1 {g1:.1e}, gamma2 {g2:.1e}, bound {lb:.1e}, identity {defect:.1e}"),
    }
}

fn pure_wave_error(nx: usize) -> f64 {
    let params = ModelParams {
        tau: 0.0,
        kernel: MemoryKernel::none(),
        ..ModelParams::worked_example(0.0, Mode::Original)
    };
    let mut solver = Solver::from_spec(params, &GridSpec::default().with_nx(nx)).expect("valid grid");
    let mut state = solver.build(&InitialData::sine(1));
    let steps = (0.5 / solver.discretization().dt).round() as usize;
    for _ in 0..steps {
        solver.step(&mut state).expect("finite");
    }
    let disc = solver.discretization();
    (0..=nx + 1)
        .map(|i| (state.u()[i] - (PI * disc.x(i)).sin() * (PI * state.t).cos()).abs())
        .fold(0.0, f64::max)
}

fn pure_wave() -> Check {
    let errors: Vec<f64> = [15, 31, 63].into_iter().map(pure_wave_error).collect();
    let order = errors.windows(2).map(|p| (p[0] / p[1]).log2()).fold(f64::INFINITY, f64::min);
    Check {
        name: "pure-wave convergence",
        pass: order >= 1.8,
        detail: format!("observed order {order:.2}"),
    }
}

fn spot_check(seed: u64) -> Check {
    let params = ModelParams::worked_example(0.0, Mode::Original);
    let disc = Discretization::new(&params, &GridSpec::default().with_nx(40).with_ns(24)).expect("valid grid");
    let stable = dissipativity_spot_check(&params, &disc, 20, 1e-8, seed);
    let unstable_params = ModelParams {
        tau: 0.0,
        kernel: MemoryKernel::none(),
        ..ModelParams::worked_example(-0.5, Mode::Original)
    };
    let disc = Discretization::new(&unstable_params, &GridSpec::default().with_nx(40)).expect("valid grid");
    let unstable = dissipativity_spot_check(&unstable_params, &disc, 20, 0.0, seed);
    Check {
        name: "dissipativity spot check",
        pass: stable.pass && unstable.max_quotient > 0.0,
        detail: format!(
            "max quotient {:.2e} (k = 0), {:.2e} (anti-damping)",
            stable.max_quotient, unstable.max_quotient
        ),
    }
}

pub fn run_checks(formulas: Formulas, seed: u64) -> Vec<Check> {
    vec![worked_constants(formulas), pure_wave(), spot_check(seed)]
}

pub fn render(checks: &[Check]) -> String {
    checks
        .iter()
        .map(|c| format!("{} {}: {}\n", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_build_passes() {
        let checks = run_checks(Formulas::STANDARD, 1);
        assert!(checks.iter().all(|c| c.pass), "{}", render(&checks));
    }

    #[test]
    fn tampered_c1_is_caught() {
        fn tampered(i: &CertificateInputs) -> f64 {
            viscowave::certificate::c1(i) * 1.001
        }
        let formulas = Formulas { c1: tampered, ..Formulas::STANDARD };
        let check = worked_constants(formulas);
        assert!(!check.pass, "{}", check.detail);
    }
}
